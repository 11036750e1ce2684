//! Optical pulse trains and electrical drive waveforms.
//!
//! The drive path is: bit pattern → Gaussian voltage pulses on a uniform
//! time grid → finite-bandwidth low-pass → AC-coupling high-pass. The two
//! filters are the only sources of inter-symbol memory in the simulator.

mod filter;
mod prbs;

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

pub use filter::{ac_couple, bandlimit, AcCouplingSpec};
pub use prbs::{feedback_taps, Lfsr, MAX_ORDER as PRBS_MAX_ORDER, MIN_ORDER as PRBS_MIN_ORDER};

pub const DEFAULT_BANDWIDTH_HZ: f64 = 8e9;
pub const DEFAULT_AC_CUTOFF_HZ: f64 = 1e5;
pub const DEFAULT_DT_S: f64 = 1e-12;
pub const DEFAULT_PRBS_ORDER: u32 = 10;
pub const DEFAULT_PRBS_LENGTH: usize = 1024;
pub const DEFAULT_CLOCK_RATE_HZ: f64 = 2e9;
pub const DEFAULT_OPTICAL_FWHM_S: f64 = 60e-12;
pub const DEFAULT_ELECTRICAL_FWHM_S: f64 = 125e-12;

/// Minimum samples across one electrical FWHM.
pub const MIN_SAMPLES_PER_FWHM: f64 = 8.0;

/// Gaussian pulses are evaluated out to this many FWHM from their center;
/// beyond it the envelope is below 1e-77 of its peak.
const GAUSSIAN_SUPPORT_FWHM: f64 = 8.0;

/// `4·ln 2`, the Gaussian FWHM shape constant.
const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Uniform time grid, `t_i = start_s + i·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub dt: f64,
    pub n: usize,
    #[serde(default)]
    pub start_s: f64,
}

impl SampleGrid {
    pub fn new(dt: f64, n: usize) -> Result<Self> {
        Self::starting_at(0.0, dt, n)
    }

    pub fn starting_at(start_s: f64, dt: f64, n: usize) -> Result<Self> {
        ensure_positive("grid.dt", dt)?;
        ensure_finite("grid.start_s", start_s)?;
        if n == 0 {
            return Err(Error::invalid("grid.n", "grid needs at least one sample"));
        }
        Ok(Self { dt, n, start_s })
    }

    /// Smallest grid with spacing `dt` covering `[t0, t1]`.
    pub fn covering(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        ensure_positive("grid.dt", dt)?;
        if t0.is_nan() || t1.is_nan() || t1 < t0 {
            return Err(Error::invalid("grid", format!("empty span [{t0}, {t1}]")));
        }
        let n = ((t1 - t0) / dt).ceil() as usize + 1;
        Self::starting_at(t0, dt, n)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_s + i as f64 * self.dt
    }

    pub fn end_s(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn duration(&self) -> f64 {
        self.n as f64 * self.dt
    }
}

/// Drive voltage sampled on a [`SampleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageWaveform {
    grid: SampleGrid,
    samples: Vec<f64>,
}

impl VoltageWaveform {
    pub fn new(grid: SampleGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::invalid(
                "waveform.samples",
                format!("expected {} samples, got {}", grid.n, samples.len()),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("waveform.samples", format!("sample {i} is not finite")));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: SampleGrid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n],
        }
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Pointwise `self + c`.
    pub fn offset(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|v| v + c).collect(),
        }
    }

    /// Pointwise `a·self + b·other` on a shared grid.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("waveform.grid", "waveforms are on different grids"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: self.grid,
            samples,
        })
    }

    fn check_span(&self, t0: f64, t1: f64) -> Result<()> {
        let (lo, hi) = (self.grid.start_s, self.grid.end_s());
        // Tolerate rounding in callers that compute window edges.
        let slack = 1e-9 * self.grid.dt;
        if t0 < lo - slack || t1 > hi + slack || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::WindowOutOfBounds {
                start: t0,
                end: t1,
                span_start: lo,
                span_end: hi,
            });
        }
        Ok(())
    }

    /// Continuous sample index of `t`, clamped to the record.
    fn position(&self, t: f64) -> (usize, f64) {
        let x = ((t - self.grid.start_s) / self.grid.dt).clamp(0.0, (self.grid.n - 1) as f64);
        let i = (x.floor() as usize).min(self.grid.n.saturating_sub(2));
        (i, x - i as f64)
    }

    /// Linear interpolation of the waveform at `t`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check_span(t, t)?;
        Ok(self.interp(t))
    }

    fn interp(&self, t: f64) -> f64 {
        if self.grid.n == 1 {
            return self.samples[0];
        }
        let (i, frac) = self.position(t);
        self.samples[i] + frac * (self.samples[i + 1] - self.samples[i])
    }

    /// Exact integral of the linear interpolant over `[t0, t1]`, in V·s.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 {
            return Ok(-self.integral(t1, t0)?);
        }
        self.check_span(t0, t1)?;
        if self.grid.n == 1 || t1 == t0 {
            return Ok(self.samples[0] * (t1 - t0));
        }
        let dt = self.grid.dt;
        let (i0, f0) = self.position(t0);
        let (i1, f1) = self.position(t1);
        let v0 = self.interp(t0);
        let v1 = self.interp(t1);
        if i0 == i1 {
            return Ok(0.5 * (v0 + v1) * (f1 - f0) * dt);
        }
        // partial head segment, whole interior segments, partial tail
        let mut acc = 0.5 * (v0 + self.samples[i0 + 1]) * (1.0 - f0);
        for k in i0 + 1..i1 {
            acc += 0.5 * (self.samples[k] + self.samples[k + 1]);
        }
        acc += 0.5 * (self.samples[i1] + v1) * f1;
        Ok(acc * dt)
    }

    /// Two-column CSV, `time_s,volts`, shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time_s,volts")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.time(i), v)?;
        }
        Ok(())
    }
}

/// One clock slot of a two-level pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    /// Signal pulse (`s`): electrically driven.
    #[serde(rename = "s")]
    Signal,
    /// Decoy pulse (`v`): no electrical input.
    #[serde(rename = "v")]
    Decoy,
}

impl Symbol {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Symbol::Signal
        } else {
            Symbol::Decoy
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Signal => 's',
            Symbol::Decoy => 'v',
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A clocked sequence of symbols; slot `k` spans `[k/f, (k+1)/f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPattern {
    symbols: Vec<Symbol>,
    clock_rate: f64,
}

impl BitPattern {
    pub fn new(symbols: Vec<Symbol>, clock_rate: f64) -> Result<Self> {
        ensure_positive("clock_rate_hz", clock_rate)?;
        if symbols.is_empty() {
            return Err(Error::invalid("pattern", "pattern must contain at least one symbol"));
        }
        Ok(Self { symbols, clock_rate })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn clock_rate(&self) -> f64 {
        self.clock_rate
    }

    pub fn period(&self) -> f64 {
        1.0 / self.clock_rate
    }

    pub fn slot_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.clock_rate
    }

    pub fn duration(&self) -> f64 {
        self.symbols.len() as f64 / self.clock_rate
    }
}

/// Maximal-length PRBS mapped to symbols (`1 → s`, `0 → v`), cycled or
/// truncated to `length`.
pub fn prbs(order: u32, seed: u32, length: usize, clock_rate: f64) -> Result<BitPattern> {
    if length == 0 {
        return Err(Error::invalid("prbs.length", "length must be >= 1"));
    }
    let lfsr = Lfsr::new(order, seed)?;
    let symbols = lfsr.take(length).map(Symbol::from_bit).collect();
    BitPattern::new(symbols, clock_rate)
}

/// Unit-peak Gaussian with the given FWHM, centered at zero.
pub fn gaussian(t: f64, fwhm: f64) -> f64 {
    (-FOUR_LN2 * (t / fwhm).powi(2)).exp()
}

/// Area of a Gaussian pulse with peak `amplitude`.
pub fn gaussian_area(amplitude: f64, fwhm: f64) -> f64 {
    amplitude * fwhm * (PI / FOUR_LN2).sqrt()
}

/// Electrical drive: one Gaussian pulse of peak `amplitude` centered on every
/// `s` slot, nothing on `v` slots.
pub fn synthesize_drive(
    pattern: &BitPattern,
    pulse_fwhm: f64,
    amplitude: f64,
    grid: SampleGrid,
) -> Result<VoltageWaveform> {
    ensure_positive("electrical_fwhm_s", pulse_fwhm)?;
    ensure_finite("drive_amplitude_v", amplitude)?;
    if pulse_fwhm >= pattern.period() {
        return Err(Error::invalid(
            "electrical_fwhm_s",
            format!(
                "pulse FWHM {pulse_fwhm:e} s must be shorter than the clock period {:e} s",
                pattern.period()
            ),
        ));
    }
    if pulse_fwhm / grid.dt < MIN_SAMPLES_PER_FWHM {
        return Err(Error::invalid(
            "grid.dt",
            format!(
                "{:.2} samples per FWHM; at least {MIN_SAMPLES_PER_FWHM} required",
                pulse_fwhm / grid.dt
            ),
        ));
    }
    if grid.start_s > 0.0 || grid.end_s() < pattern.duration() {
        return Err(Error::invalid(
            "grid",
            format!(
                "grid [{:e}, {:e}] s does not cover the pattern [0, {:e}] s",
                grid.start_s,
                grid.end_s(),
                pattern.duration()
            ),
        ));
    }
    let mut samples = vec![0.0; grid.n];
    let reach = GAUSSIAN_SUPPORT_FWHM * pulse_fwhm;
    for (k, sym) in pattern.symbols().iter().enumerate() {
        if *sym != Symbol::Signal {
            continue;
        }
        let center = pattern.slot_center(k);
        let lo = (((center - reach) - grid.start_s) / grid.dt).floor().max(0.0) as usize;
        let hi = ((((center + reach) - grid.start_s) / grid.dt).ceil() as usize).min(grid.n - 1);
        for (i, s) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *s += amplitude * gaussian(grid.time(i) - center, pulse_fwhm);
        }
    }
    VoltageWaveform::new(grid, samples)
}

/// Envelope shape of the optical pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Gaussian,
}

/// Gain-switched laser output entering the modulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalPulseTrain {
    pub clock_rate: f64,
    pub fwhm: f64,
    pub shape: PulseShape,
    /// Relative pulse energies before the modulator.
    pub pulse_energies: Vec<f64>,
    /// Delay of every optical pulse relative to its slot center.
    pub alignment_offset_s: f64,
}

impl OpticalPulseTrain {
    pub fn len(&self) -> usize {
        self.pulse_energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulse_energies.is_empty()
    }

    pub fn with_alignment_offset(mut self, offset_s: f64) -> Result<Self> {
        ensure_finite("alignment_offset_s", offset_s)?;
        self.alignment_offset_s = offset_s;
        Ok(self)
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.clock_rate + self.alignment_offset_s
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.center(k))
    }
}

pub fn optical_pulse_train(clock_rate: f64, fwhm: f64, count: usize) -> Result<OpticalPulseTrain> {
    ensure_positive("clock_rate_hz", clock_rate)?;
    ensure_positive("optical_fwhm_s", fwhm)?;
    if fwhm >= 1.0 / clock_rate {
        return Err(Error::invalid(
            "optical_fwhm_s",
            format!(
                "pulse FWHM {fwhm:e} s must be shorter than the clock period {:e} s",
                1.0 / clock_rate
            ),
        ));
    }
    if count == 0 {
        return Err(Error::invalid("pulse_count", "train needs at least one pulse"));
    }
    Ok(OpticalPulseTrain {
        clock_rate,
        fwhm,
        shape: PulseShape::Gaussian,
        pulse_energies: vec![1.0; count],
        alignment_offset_s: 0.0,
    })
}

/// How far an isolated drive pulse's AC-coupled baseline sits below zero one
/// clock period after the pulse center, in volts (positive = sag).
///
/// This is the level deficit the next slot inherits when the electrical
/// signal has not recovered to its base level.
pub fn recovery_residual(
    pulse_fwhm: f64,
    amplitude: f64,
    clock_rate: f64,
    dt: f64,
    spec: AcCouplingSpec,
) -> Result<f64> {
    ensure_positive("clock_rate_hz", clock_rate)?;
    let period = 1.0 / clock_rate;
    let lead = GAUSSIAN_SUPPORT_FWHM * pulse_fwhm;
    let grid = SampleGrid::covering(-lead, 2.0 * period + lead, dt)?;
    let single = BitPattern::new(vec![Symbol::Signal, Symbol::Decoy], clock_rate)?;
    let drive = synthesize_drive(&single, pulse_fwhm, amplitude, grid)?;
    let coupled = ac_couple(&drive, spec)?;
    let next = single.slot_center(1);
    Ok(drive.value_at(next)? - coupled.value_at(next)?)
}

/// AC-coupling corner whose [`recovery_residual`] equals `target_volts`.
///
/// The residual rises with the corner up to roughly `f/(2π)` and falls
/// beyond; the lower branch is returned. Fails when the target exceeds the
/// largest residual reachable at this clock rate.
pub fn ac_cutoff_for_recovery_residual(
    pulse_fwhm: f64,
    amplitude: f64,
    clock_rate: f64,
    dt: f64,
    target_volts: f64,
) -> Result<AcCouplingSpec> {
    crate::error::ensure_non_negative("wander_v", target_volts)?;
    if target_volts == 0.0 {
        return Ok(AcCouplingSpec::disabled());
    }
    let residual = |fc: f64| recovery_residual(pulse_fwhm, amplitude, clock_rate, dt, AcCouplingSpec { cutoff_hz: fc });
    let target = target_volts * amplitude.signum();
    // The continuous-time residual a·ω·exp(-ω/f) peaks at ω = f.
    let peak = clock_rate / (2.0 * PI);
    let peak_value = residual(peak)?;
    if target.abs() > peak_value.abs() {
        return Err(Error::invalid(
            "wander_v",
            format!(
                "target {target_volts} V exceeds the largest recovery residual {:.6} V at this clock rate",
                peak_value.abs()
            ),
        ));
    }
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if residual(mid)?.abs() < target.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    AcCouplingSpec::new(0.5 * (lo + hi))
}
