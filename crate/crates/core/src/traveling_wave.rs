//! Optical phase picked up inside a traveling-wave phase modulator.
//!
//! Light enters the electrode at `z = 0` at `t_entry` and moves toward
//! `z = L`. The electrical wave either enters with it at `z = 0`
//! (co-propagating, "parallel") or from the far end at `z = L`
//! (counter-propagating, "anti-parallel"). The voltage seen at position `z`
//! is the input-port voltage at the retarded time
//!
//! ```text
//! parallel:       t_entry + z·n_optical/c − z·n_rf/c
//! anti-parallel:  t_entry + z·n_optical/c − (L − z)·n_rf/c
//! ```
//!
//! and the phase is `π/Vπ` times the mean of that voltage over the
//! electrode. Because the retarded time is affine in `z`, the mean equals
//! the time-average of the drive over the swept window; it is evaluated as
//! the exact integral of the linearly interpolated drive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drive::VoltageWaveform;
use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::interference::PhaseDifference;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_LENGTH_M: f64 = 0.05;
pub const DEFAULT_INDEX: f64 = 2.2;
pub const DEFAULT_V_PI: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorGeometry {
    /// Electrode (crystal) length in meters.
    pub length_m: f64,
    /// Optical group index.
    pub n_optical: f64,
    /// Effective index of the electrical traveling wave.
    pub n_rf: f64,
    /// Half-wave voltage for velocity-matched co-propagation, volts.
    pub v_pi: f64,
}

impl Default for ModulatorGeometry {
    fn default() -> Self {
        Self {
            length_m: DEFAULT_LENGTH_M,
            n_optical: DEFAULT_INDEX,
            n_rf: DEFAULT_INDEX,
            v_pi: DEFAULT_V_PI,
        }
    }
}

impl ModulatorGeometry {
    pub fn new(length_m: f64, n_optical: f64, n_rf: f64, v_pi: f64) -> Result<Self> {
        let g = Self {
            length_m,
            n_optical,
            n_rf,
            v_pi,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("length_m", self.length_m)?;
        ensure_positive("v_pi", self.v_pi)?;
        for (field, n) in [("n_optical", self.n_optical), ("n_rf", self.n_rf)] {
            if !(n.is_finite() && n >= 1.0) {
                return Err(Error::invalid(field, format!("index must be >= 1, got {n}")));
            }
        }
        Ok(())
    }

    /// Time the light needs to cross the electrode.
    pub fn optical_transit(&self) -> f64 {
        self.length_m * self.n_optical / SPEED_OF_LIGHT
    }

    /// Time the electrical wave needs to cross the electrode.
    pub fn electrical_transit(&self) -> f64 {
        self.length_m * self.n_rf / SPEED_OF_LIGHT
    }

    /// Duration over which a counter-propagating light pulse and electrical
    /// pulse can meet inside the electrode, `(n_optical + n_rf)·L/c`.
    pub fn walk_through_time(&self) -> f64 {
        self.optical_transit() + self.electrical_transit()
    }
}

/// Propagation direction of the light relative to the electrical wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Parallel,
    AntiParallel,
}

/// Position of the phase modulator in the loop, expressed as the extra delay
/// of the anti-parallel pulse at the modulator relative to the parallel one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopPlacement {
    pub offset_s: f64,
}

impl LoopPlacement {
    pub fn new(offset_s: f64) -> Result<Self> {
        ensure_finite("placement.offset_s", offset_s)?;
        Ok(Self { offset_s })
    }

    /// Modulator at the loop midpoint: both directions arrive together.
    pub fn center() -> Self {
        Self { offset_s: 0.0 }
    }
}

/// Span `[t_first, t_last]` of input-port times sampled by a light pulse
/// entering at `t_entry`. Not ordered when `n_rf > n_optical` in parallel.
pub fn retarded_time_span(t_entry: f64, dir: Direction, geom: &ModulatorGeometry) -> (f64, f64) {
    let l_over_c = geom.length_m / SPEED_OF_LIGHT;
    match dir {
        Direction::Parallel => (t_entry, t_entry + l_over_c * (geom.n_optical - geom.n_rf)),
        Direction::AntiParallel => (t_entry - geom.electrical_transit(), t_entry + geom.optical_transit()),
    }
}

/// Ordered window of drive times that influence the phase.
pub fn interaction_window(t_entry: f64, dir: Direction, geom: &ModulatorGeometry) -> (f64, f64) {
    let (a, b) = retarded_time_span(t_entry, dir, geom);
    (a.min(b), a.max(b))
}

/// Phase in radians accumulated by a light pulse entering at `t_entry`.
pub fn accumulated_phase(
    drive: &VoltageWaveform,
    t_entry: f64,
    dir: Direction,
    geom: &ModulatorGeometry,
) -> Result<f64> {
    geom.validate()?;
    ensure_finite("launch_time_s", t_entry)?;
    let (t_first, t_last) = retarded_time_span(t_entry, dir, geom);
    let mean_voltage = if t_first == t_last {
        drive.value_at(t_first)?
    } else {
        drive.integral(t_first, t_last)? / (t_last - t_first)
    };
    Ok(PI * mean_voltage / geom.v_pi)
}

/// Phase difference `φ_parallel − φ_anti-parallel` at the loop output.
pub fn net_sagnac_phase(
    drive: &VoltageWaveform,
    launch_time: f64,
    geom: &ModulatorGeometry,
    placement: LoopPlacement,
) -> Result<PhaseDifference> {
    let parallel = accumulated_phase(drive, launch_time, Direction::Parallel, geom)?;
    let anti = accumulated_phase(drive, launch_time + placement.offset_s, Direction::AntiParallel, geom)?;
    Ok(PhaseDifference(parallel - anti))
}

/// Smallest loop offset keeping the anti-parallel window, widened by
/// `electrical_fwhm + guard` on each side, clear of the electrical pulse
/// aligned to the parallel light.
///
/// For matched indices this is `walk_through/2 + electrical_fwhm + guard`.
pub fn required_offset(geom: &ModulatorGeometry, electrical_fwhm: f64, guard: f64) -> Result<LoopPlacement> {
    geom.validate()?;
    ensure_non_negative("electrical_fwhm_s", electrical_fwhm)?;
    ensure_non_negative("guard_s", guard)?;
    let clearance = 0.5 * geom.walk_through_time() + electrical_fwhm + guard;
    // The anti-parallel window is centered this far after its entry time.
    let skew = 0.5 * (geom.optical_transit() - geom.electrical_transit());
    let offset = if skew >= 0.0 {
        clearance - skew
    } else {
        -clearance - skew
    };
    LoopPlacement::new(offset)
}

/// Highest clock rate at which a single counter-propagating electrical
/// pulse meets at most one anti-parallel light pulse.
pub fn max_clock_rate(geom: &ModulatorGeometry) -> Result<f64> {
    geom.validate()?;
    Ok(1.0 / geom.walk_through_time())
}

/// Worst-case (over relative timing) number of anti-parallel light pulses
/// at `clock_rate` whose electrode transit meets one electrical pulse.
///
/// The meeting condition confines light entry times to a half-open window of
/// one walk-through time; a lattice of spacing `1/f` puts at most
/// `⌈walk_through·f⌉` points in it.
pub fn anti_parallel_overlap_count(geom: &ModulatorGeometry, clock_rate: f64) -> Result<u64> {
    geom.validate()?;
    ensure_positive("clock_rate_hz", clock_rate)?;
    let ratio = geom.walk_through_time() * clock_rate;
    let nearest = ratio.round();
    let count = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    Ok(count.max(1.0) as u64)
}

/// Time-domain count of anti-parallel light pulses meeting one electrical
/// pulse inside the electrode, maximized over `phase_samples` relative
/// timings of the light pulse train.
///
/// The electrical pulse enters at `z = L` at `t = 0`; light pulses enter at
/// `z = 0` every `1/clock_rate`. Both positions are stepped through the
/// common transit interval in `time_steps` increments and a meeting is a
/// sign change of their separation.
pub fn simulated_overlap_count(
    geom: &ModulatorGeometry,
    clock_rate: f64,
    phase_samples: usize,
    time_steps: usize,
) -> Result<u64> {
    geom.validate()?;
    ensure_positive("clock_rate_hz", clock_rate)?;
    if phase_samples == 0 || time_steps == 0 {
        return Err(Error::invalid("samples", "phase and time sampling must be non-empty"));
    }
    let period = 1.0 / clock_rate;
    let (t_opt, t_el) = (geom.optical_transit(), geom.electrical_transit());
    let v_opt = geom.length_m / t_opt;
    let v_el = geom.length_m / t_el;
    let k_lo = ((-t_opt - period) / period).floor() as i64 - 1;
    let k_hi = ((t_el + period) / period).ceil() as i64 + 1;
    let mut best = 0;
    for j in 0..phase_samples {
        let phase = (j as f64 + 0.5) / phase_samples as f64 * period;
        let mut count = 0;
        for k in k_lo..=k_hi {
            let entry = phase + k as f64 * period;
            let (start, end) = (entry.max(0.0), (entry + t_opt).min(t_el));
            if start >= end {
                continue;
            }
            let gap = |t: f64| (t - entry) * v_opt - (geom.length_m - t * v_el);
            let mut prev = gap(start);
            let met = (1..=time_steps).any(|i| {
                let g = gap(start + (end - start) * i as f64 / time_steps as f64);
                let crossed = prev == 0.0 || prev.signum() != g.signum();
                prev = g;
                crossed
            });
            if met {
                count += 1;
            }
        }
        best = best.max(count);
    }
    Ok(best)
}
