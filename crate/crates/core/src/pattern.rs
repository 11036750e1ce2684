//! End-to-end pulse-pattern experiments.
//!
//! A PRBS pattern becomes an electrical drive, passes the driver's low-pass
//! and AC coupling, and sets the interferometer phase seen by each optical
//! pulse. Per-pulse intensities are then grouped by the preceding symbol.
//!
//! Level convention: an undriven slot sits at the configured static phase
//! (π for two-level devices, the low "decoy" level); a slot driven at the
//! half-wave voltage moves to the transfer-curve peak.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::drift::{DriftSpec, PowerSeries, StabilityDevice, StabilitySampling};
use crate::drive::{
    self, ac_couple, ac_cutoff_for_recovery_residual, bandlimit, gaussian, AcCouplingSpec, BitPattern, SampleGrid,
    Symbol, VoltageWaveform,
};
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::interference::{
    coupling_from_extinction_db, interference_intensity, CouplingRatio, ExtinctionRatioDb, PhaseDifference,
};
use crate::traveling_wave::{interaction_window, net_sagnac_phase, Direction, LoopPlacement, ModulatorGeometry};

/// Groups whose decoy level is below this fraction of the signal level are
/// not reported: the detector cannot resolve them.
pub const DECOY_MEASUREMENT_FLOOR: f64 = 1e-3;
pub const DEFAULT_DETECTOR_NOISE_REL: f64 = 0.02;
pub const DEFAULT_WARMUP_SLOTS: usize = 128;
/// Amplitude scan span for the effective half-wave voltage, in units of `v_pi`.
const SCAN_SPAN: (f64, f64) = (0.1, 2.5);
pub const DEFAULT_SCAN_STEPS: usize = 200;
/// Sample points across the optical envelope when it is integrated.
const ENVELOPE_POINTS: usize = 41;
const ENVELOPE_REACH_FWHM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    SagnacTwoLevel,
    MzmTwoLevel,
    MzmQuadratureDecoy,
}

impl Device {
    /// Interferometer phase of an undriven slot.
    pub fn default_static_phase(self) -> f64 {
        match self {
            Self::SagnacTwoLevel | Self::MzmTwoLevel => PI,
            Self::MzmQuadratureDecoy => FRAC_PI_2,
        }
    }

    /// Drive amplitude that moves an undriven slot to the transfer peak.
    pub fn nominal_amplitude(self, v_pi: f64) -> f64 {
        v_pi * self.default_static_phase() / PI
    }
}

/// Splitter given either directly as `r` or by its measured extinction ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Ratio(CouplingRatio),
    Extinction { extinction_db: f64 },
}

impl CouplingSpec {
    pub fn ratio(&self) -> Result<CouplingRatio> {
        match *self {
            Self::Ratio(r) => Ok(r),
            Self::Extinction { extinction_db } => {
                coupling_from_extinction_db(ExtinctionRatioDb::finite(extinction_db)?)
            }
        }
    }
}

impl From<CouplingRatio> for CouplingSpec {
    fn from(r: CouplingRatio) -> Self {
        Self::Ratio(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrbsSource {
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default = "default_prbs_seed")]
    pub seed: u32,
    #[serde(default = "default_length")]
    pub length: usize,
}

fn default_order() -> u32 {
    drive::DEFAULT_PRBS_ORDER
}
fn default_prbs_seed() -> u32 {
    1
}
fn default_length() -> usize {
    drive::DEFAULT_PRBS_LENGTH
}

impl Default for PrbsSource {
    fn default() -> Self {
        Self {
            order: default_order(),
            seed: default_prbs_seed(),
            length: default_length(),
        }
    }
}

fn default_clock() -> f64 {
    drive::DEFAULT_CLOCK_RATE_HZ
}
fn default_optical_fwhm() -> f64 {
    drive::DEFAULT_OPTICAL_FWHM_S
}
fn default_electrical_fwhm() -> f64 {
    drive::DEFAULT_ELECTRICAL_FWHM_S
}
fn default_dt() -> f64 {
    drive::DEFAULT_DT_S
}
fn default_noise() -> f64 {
    DEFAULT_DETECTOR_NOISE_REL
}
fn default_warmup() -> usize {
    DEFAULT_WARMUP_SLOTS
}

/// One pattern experiment. Absent optional fields take device defaults when
/// the config is [resolved](ExperimentConfig::resolved).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub device: Device,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub pattern: PrbsSource,
    #[serde(default = "default_clock")]
    pub clock_rate_hz: f64,
    #[serde(default = "default_optical_fwhm")]
    pub optical_fwhm_s: f64,
    #[serde(default = "default_electrical_fwhm")]
    pub electrical_fwhm_s: f64,
    /// Peak drive voltage; defaults to the device's nominal swing.
    #[serde(default)]
    pub drive_amplitude_v: Option<f64>,
    #[serde(default)]
    pub geometry: ModulatorGeometry,
    #[serde(default)]
    pub placement: LoopPlacement,
    /// Driver low-pass corner; absent means ideal electronics.
    #[serde(default)]
    pub bandwidth_hz: Option<f64>,
    /// AC-coupling corner; 0 disables it.
    #[serde(default)]
    pub ac_cutoff_hz: Option<f64>,
    /// Baseline wander as a fraction of `v_pi`: the sag one clock period
    /// after an isolated drive pulse. Sets `ac_cutoff_hz` on resolution.
    #[serde(default)]
    pub wander_vpi_fraction: Option<f64>,
    /// Interferometer phase of an undriven slot; defaults per device.
    #[serde(default)]
    pub static_phase_rad: Option<f64>,
    /// Delay of the optical pulses relative to the slot centers.
    #[serde(default)]
    pub alignment_offset_s: f64,
    #[serde(default = "default_noise")]
    pub detector_noise_rel: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Pattern slots replayed before the recorded pattern so the AC-coupled
    /// baseline reaches its repeating state.
    #[serde(default = "default_warmup")]
    pub warmup_slots: usize,
    /// Weight the transfer curve over the optical pulse envelope instead of
    /// sampling it at the pulse center.
    #[serde(default)]
    pub optical_envelope: bool,
}

impl ExperimentConfig {
    /// Defaults for `device` with splitter `coupling`.
    pub fn new(device: Device, coupling: impl Into<CouplingSpec>) -> Self {
        Self {
            device,
            coupling: coupling.into(),
            pattern: PrbsSource::default(),
            clock_rate_hz: default_clock(),
            optical_fwhm_s: default_optical_fwhm(),
            electrical_fwhm_s: default_electrical_fwhm(),
            drive_amplitude_v: None,
            geometry: ModulatorGeometry::default(),
            placement: LoopPlacement::default(),
            bandwidth_hz: None,
            ac_cutoff_hz: None,
            wander_vpi_fraction: None,
            static_phase_rad: None,
            alignment_offset_s: 0.0,
            detector_noise_rel: default_noise(),
            seed: 0,
            dt_s: default_dt(),
            warmup_slots: default_warmup(),
            optical_envelope: false,
        }
    }

    /// Noise-free copy with ideal electronics.
    pub fn ideal(&self) -> Self {
        Self {
            bandwidth_hz: None,
            ac_cutoff_hz: Some(0.0),
            wander_vpi_fraction: None,
            detector_noise_rel: 0.0,
            ..self.clone()
        }
    }

    /// Copy whose AC coupling produces the given wander.
    pub fn with_wander(&self, vpi_fraction: f64) -> Self {
        Self {
            ac_cutoff_hz: None,
            wander_vpi_fraction: Some(vpi_fraction),
            ..self.clone()
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.drive_amplitude_v
            .unwrap_or_else(|| self.device.nominal_amplitude(self.geometry.v_pi))
    }

    pub fn static_phase(&self) -> f64 {
        self.static_phase_rad
            .unwrap_or_else(|| self.device.default_static_phase())
    }

    pub fn ac_coupling(&self) -> AcCouplingSpec {
        AcCouplingSpec {
            cutoff_hz: self.ac_cutoff_hz.unwrap_or(drive::DEFAULT_AC_CUTOFF_HZ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coupling.ratio().map_err(|e| e.in_field("coupling"))?;
        self.geometry.validate().map_err(|e| e.in_field("geometry"))?;
        ensure_finite("placement.offset_s", self.placement.offset_s)?;
        ensure_positive("clock_rate_hz", self.clock_rate_hz)?;
        ensure_positive("optical_fwhm_s", self.optical_fwhm_s)?;
        ensure_positive("electrical_fwhm_s", self.electrical_fwhm_s)?;
        ensure_positive("dt_s", self.dt_s)?;
        if let Some(a) = self.drive_amplitude_v {
            ensure_finite("drive_amplitude_v", a)?;
        }
        if let Some(b) = self.bandwidth_hz {
            ensure_positive("bandwidth_hz", b)?;
        }
        if let Some(fc) = self.ac_cutoff_hz {
            ensure_non_negative("ac_cutoff_hz", fc)?;
        }
        if let Some(w) = self.wander_vpi_fraction {
            ensure_non_negative("wander_vpi_fraction", w)?;
            if self.ac_cutoff_hz.is_some() {
                return Err(Error::invalid(
                    "wander_vpi_fraction",
                    "give either ac_cutoff_hz or wander_vpi_fraction, not both",
                ));
            }
        }
        if let Some(p) = self.static_phase_rad {
            ensure_finite("static_phase_rad", p)?;
        }
        ensure_finite("alignment_offset_s", self.alignment_offset_s)?;
        ensure_non_negative("detector_noise_rel", self.detector_noise_rel)?;
        let period = 1.0 / self.clock_rate_hz;
        if self.optical_fwhm_s >= period {
            return Err(Error::invalid(
                "optical_fwhm_s",
                "optical pulse is wider than a clock slot",
            ));
        }
        if self.electrical_fwhm_s >= period {
            return Err(Error::invalid(
                "electrical_fwhm_s",
                "electrical pulse is wider than a clock slot",
            ));
        }
        if self.pattern.length < 2 {
            return Err(Error::invalid("pattern.length", "at least two slots are needed"));
        }
        drive::Lfsr::new(self.pattern.order, self.pattern.seed).map_err(|e| e.in_field("pattern"))?;
        Ok(())
    }

    /// Validated copy with every default filled in and the wander replaced
    /// by the AC-coupling corner that produces it. Idempotent.
    pub fn resolved(&self) -> Result<Self> {
        self.validate()?;
        let mut out = self.clone();
        out.coupling = CouplingSpec::Ratio(self.coupling.ratio()?);
        out.drive_amplitude_v = Some(self.amplitude());
        out.static_phase_rad = Some(self.static_phase());
        let cutoff = match self.wander_vpi_fraction {
            Some(w) => {
                ac_cutoff_for_recovery_residual(
                    self.electrical_fwhm_s,
                    self.amplitude(),
                    self.clock_rate_hz,
                    self.dt_s,
                    w * self.geometry.v_pi,
                )
                .map_err(|e| e.in_field("wander_vpi_fraction"))?
                .cutoff_hz
            }
            None => self.ac_coupling().cutoff_hz,
        };
        out.ac_cutoff_hz = Some(cutoff);
        out.wander_vpi_fraction = None;
        Ok(out)
    }
}

/// Energy of one pulse after the modulator, relative to its input energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityRecord {
    pub index: usize,
    pub symbol: Symbol,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub prev: Symbol,
    pub cur: Symbol,
}

impl Transition {
    /// Row order of the transition table.
    pub const ORDER: [Transition; 4] = [
        Transition {
            prev: Symbol::Signal,
            cur: Symbol::Signal,
        },
        Transition {
            prev: Symbol::Decoy,
            cur: Symbol::Signal,
        },
        Transition {
            prev: Symbol::Signal,
            cur: Symbol::Decoy,
        },
        Transition {
            prev: Symbol::Decoy,
            cur: Symbol::Decoy,
        },
    ];
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.prev, self.cur)
    }
}

/// Intensity statistics of pulses sharing a (previous, current) symbol pair,
/// in units of the mean signal intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub transition: Transition,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// `100·(group mean − symbol mean)/symbol mean`.
    pub deviation_pct: f64,
}

/// `transition,mean,std,deviation_pct`, one row per reported transition.
pub fn write_transition_csv<W: Write>(stats: &[TransitionStats], mut out: W) -> io::Result<()> {
    writeln!(out, "transition,mean,std,deviation_pct")?;
    for s in stats {
        writeln!(out, "{},{},{},{}", s.transition, s.mean, s.std, s.deviation_pct)?;
    }
    Ok(())
}

/// Pattern with lead-in and lead-out slots around the recorded slots.
struct ExtendedPattern {
    pattern: BitPattern,
    first: usize,
}

/// Pads `base` with `lead` and `trail` slots, either replaying the pattern
/// cyclically or leaving the pads undriven.
fn extend_pattern(base: &BitPattern, lead: usize, trail: usize, cyclic: bool) -> Result<ExtendedPattern> {
    let n = base.len();
    let s = base.symbols();
    let symbols = (0..lead + n + trail)
        .map(|i| match i.checked_sub(lead) {
            Some(j) if j < n => s[j],
            _ if cyclic => s[(i + n * (lead / n + 1) - lead) % n],
            _ => Symbol::Decoy,
        })
        .collect();
    Ok(ExtendedPattern {
        pattern: BitPattern::new(symbols, base.clock_rate())?,
        first: lead,
    })
}

/// Filtered drive and per-slot transfer evaluation for one resolved config.
struct Pipeline {
    cfg: ExperimentConfig,
    r: CouplingRatio,
    ext: ExtendedPattern,
    /// Filtered drive for unit amplitude; the chain is linear in amplitude.
    unit_drive: VoltageWaveform,
}

impl Pipeline {
    fn build(cfg: &ExperimentConfig, base: &BitPattern, warmup: usize, cyclic: bool) -> Result<Self> {
        let cfg = cfg.resolved()?;
        let r = cfg.coupling.ratio()?;
        let period = base.period();
        let geom = &cfg.geometry;
        let env = if cfg.optical_envelope {
            ENVELOPE_REACH_FWHM * cfg.optical_fwhm_s
        } else {
            0.0
        };
        let reach = cfg.placement.offset_s.abs()
            + geom.walk_through_time()
            + cfg.alignment_offset_s.abs()
            + env
            + 8.0 * cfg.electrical_fwhm_s;
        let pad = (reach / period).ceil() as usize + 1;
        let ext = extend_pattern(base, warmup + pad, pad, cyclic)?;

        // Every window the recorded pulses can touch, plus the whole pattern.
        let mut lo: f64 = 0.0;
        let mut hi = ext.pattern.duration();
        for k in [ext.first, ext.first + base.len() - 1] {
            let t = ext.pattern.slot_center(k) + cfg.alignment_offset_s;
            for (t0, dir) in [
                (t, Direction::Parallel),
                (t + cfg.placement.offset_s, Direction::AntiParallel),
            ] {
                let (a, b) = interaction_window(t0, dir, geom);
                lo = lo.min(a - env);
                hi = hi.max(b + env);
            }
        }
        // Whole-step origin keeps slot centers on grid points.
        let start = (lo / cfg.dt_s).floor() * cfg.dt_s - cfg.dt_s;
        let grid = SampleGrid::covering(start, hi + cfg.dt_s, cfg.dt_s)?;
        let mut unit = drive::synthesize_drive(&ext.pattern, cfg.electrical_fwhm_s, 1.0, grid)?;
        if let Some(bw) = cfg.bandwidth_hz {
            unit = bandlimit(&unit, bw)?;
        }
        let unit_drive = ac_couple(&unit, cfg.ac_coupling())?;
        Ok(Self {
            cfg,
            r,
            ext,
            unit_drive,
        })
    }

    /// Phase imposed by the unit drive on a pulse launched at `t`.
    fn unit_modulation(&self, t: f64) -> Result<f64> {
        let cfg = &self.cfg;
        let drive = &self.unit_drive;
        Ok(match cfg.device {
            Device::SagnacTwoLevel => net_sagnac_phase(drive, t, &cfg.geometry, cfg.placement)?.radians(),
            Device::MzmTwoLevel | Device::MzmQuadratureDecoy => PI * drive.value_at(t)? / cfg.geometry.v_pi,
        })
    }

    fn transmission_at(&self, t: f64, amplitude: f64) -> Result<f64> {
        let phi = self.cfg.static_phase() - amplitude * self.unit_modulation(t)?;
        Ok(interference_intensity(self.r, PhaseDifference(phi)).value())
    }

    /// Transmission of recorded slot `k` at drive amplitude `amplitude`.
    fn transmission(&self, k: usize, amplitude: f64) -> Result<f64> {
        let t = self.ext.pattern.slot_center(self.ext.first + k) + self.cfg.alignment_offset_s;
        if !self.cfg.optical_envelope {
            return self.transmission_at(t, amplitude);
        }
        let fwhm = self.cfg.optical_fwhm_s;
        let reach = ENVELOPE_REACH_FWHM * fwhm;
        let (mut acc, mut norm) = (0.0, 0.0);
        for j in 0..ENVELOPE_POINTS {
            let tau = -reach + 2.0 * reach * j as f64 / (ENVELOPE_POINTS - 1) as f64;
            let w = gaussian(tau, fwhm);
            acc += w * self.transmission_at(t + tau, amplitude)?;
            norm += w;
        }
        Ok(acc / norm)
    }
}

/// Per-pulse output energies for the configured pattern.
pub fn simulate_pattern(cfg: &ExperimentConfig) -> Result<Vec<IntensityRecord>> {
    let resolved = cfg.resolved()?;
    let base = drive::prbs(
        resolved.pattern.order,
        resolved.pattern.seed,
        resolved.pattern.length,
        resolved.clock_rate_hz,
    )?;
    simulate_on(&resolved, &base)
}

/// Runs the pipeline on an explicit pattern.
pub fn simulate_on(cfg: &ExperimentConfig, base: &BitPattern) -> Result<Vec<IntensityRecord>> {
    let pipe = Pipeline::build(cfg, base, cfg.warmup_slots, true)?;
    let amplitude = pipe.cfg.amplitude();
    let noise = pipe.cfg.detector_noise_rel;
    let mut rng = ChaCha8Rng::seed_from_u64(pipe.cfg.seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::invalid("detector_noise_rel", e.to_string()))?;
    let mut records = Vec::with_capacity(base.len());
    for (k, &symbol) in base.symbols().iter().enumerate() {
        let mut intensity = pipe.transmission(k, amplitude)?;
        if noise > 0.0 {
            intensity = (intensity * (1.0 + normal.sample(&mut rng))).max(0.0);
        }
        records.push(IntensityRecord {
            index: k,
            symbol,
            intensity,
        });
    }
    Ok(records)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Transition-conditioned statistics, normalized to unit mean signal
/// intensity. Every pulse after the first joins the group of its
/// (previous, current) symbols; empty groups and groups below the decoy
/// measurement floor are omitted.
pub fn classify_transitions(records: &[IntensityRecord]) -> Result<Vec<TransitionStats>> {
    if records.len() < 2 {
        return Err(Error::invalid("records", "at least two pulses are needed"));
    }
    let tail = &records[1..];
    let of = |sym: Symbol| {
        tail.iter()
            .filter(|r| r.symbol == sym)
            .map(|r| r.intensity)
            .collect::<Vec<_>>()
    };
    let signal = of(Symbol::Signal);
    if signal.is_empty() {
        return Err(Error::invalid("records", "no signal pulses to normalize against"));
    }
    let (s_mean, _) = mean_std(&signal);
    if s_mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let decoy = of(Symbol::Decoy);
    let v_mean = if decoy.is_empty() {
        0.0
    } else {
        mean_std(&decoy).0 / s_mean
    };
    let decoy_resolved = v_mean >= DECOY_MEASUREMENT_FLOOR;

    let mut out = Vec::with_capacity(4);
    for transition in Transition::ORDER {
        if transition.cur == Symbol::Decoy && !decoy_resolved {
            continue;
        }
        let group: Vec<f64> = records
            .windows(2)
            .filter(|w| w[0].symbol == transition.prev && w[1].symbol == transition.cur)
            .map(|w| w[1].intensity / s_mean)
            .collect();
        if group.is_empty() {
            continue;
        }
        let (mean, std) = mean_std(&group);
        let symbol_mean = if transition.cur == Symbol::Signal { 1.0 } else { v_mean };
        out.push(TransitionStats {
            transition,
            count: group.len(),
            mean,
            std,
            deviation_pct: 100.0 * (mean - symbol_mean) / symbol_mean,
        });
    }
    Ok(out)
}

/// Statistics for an MZM whose decoy level sits at the quadrature point.
pub fn quadrature_decoy_baseline(cfg: &ExperimentConfig) -> Result<Vec<TransitionStats>> {
    if cfg.device != Device::MzmQuadratureDecoy {
        return Err(Error::invalid(
            "device",
            "quadrature baseline needs device mzm_quadrature_decoy",
        ));
    }
    classify_transitions(&simulate_pattern(cfg)?)
}

/// Largest `|deviation_pct|` over the given rows.
pub fn max_abs_deviation(stats: &[TransitionStats]) -> f64 {
    stats.iter().map(|s| s.deviation_pct.abs()).fold(0.0, f64::max)
}

/// Largest `|deviation_pct|` over rows ending on a decoy pulse.
pub fn max_abs_decoy_deviation(stats: &[TransitionStats]) -> f64 {
    let v: Vec<_> = stats
        .iter()
        .copied()
        .filter(|s| s.transition.cur == Symbol::Decoy)
        .collect();
    max_abs_deviation(&v)
}

/// Meter-averaged output of an unmodulated device and its normalized
/// standard deviation in percent.
pub fn stability_experiment(
    device: &StabilityDevice,
    drift: DriftSpec,
    sampling: &StabilitySampling,
) -> Result<(PowerSeries, f64)> {
    device.measure(drift, sampling)
}

/// Drive amplitude at which an isolated signal pulse reaches the transfer
/// peak through the full Sagnac pipeline.
pub fn effective_half_wave_voltage(cfg: &ExperimentConfig) -> Result<f64> {
    effective_half_wave_voltage_with_steps(cfg, DEFAULT_SCAN_STEPS)
}

/// As [`effective_half_wave_voltage`] with an explicit coarse-scan density.
pub fn effective_half_wave_voltage_with_steps(cfg: &ExperimentConfig, steps: usize) -> Result<f64> {
    if cfg.device != Device::SagnacTwoLevel {
        return Err(Error::invalid(
            "device",
            "effective half-wave voltage is defined for sagnac_two_level",
        ));
    }
    if steps < 3 {
        return Err(Error::invalid("steps", "scan needs at least 3 points"));
    }
    let cfg = ExperimentConfig {
        detector_noise_rel: 0.0,
        ..cfg.clone()
    };
    let isolated = BitPattern::new(vec![Symbol::Signal], cfg.clock_rate_hz)?;
    let pipe = Pipeline::build(&cfg, &isolated, 0, false)?;

    let v_pi = cfg.geometry.v_pi;
    let (a0, a1) = (SCAN_SPAN.0 * v_pi, SCAN_SPAN.1 * v_pi);
    let at = |i: usize| a0 + (a1 - a0) * i as f64 / (steps - 1) as f64;
    let f = |a: f64| pipe.transmission(0, a);
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..steps {
        let v = f(at(i))?;
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == 0 || best.0 == steps - 1 {
        return Err(Error::ScanBracket(format!(
            "transmission peak lies at the scan edge ({} V) of [{a0}, {a1}] V",
            at(best.0)
        )));
    }
    // Golden-section refinement inside the neighbouring scan cells.
    let (mut lo, mut hi) = (at(best.0 - 1), at(best.0 + 1));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}
