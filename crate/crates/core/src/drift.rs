//! Slow power drift of unmodulated modulators.
//!
//! The MZM bias phase performs a Wiener random walk. The Sagnac loop is
//! immune to it except through a small fraction `epsilon` of the light that
//! crosses into the misaligned crystal axis and sees the same drifting phase
//! at a quadrature-referenced operating point. A power meter then averages
//! the output over fixed windows.

use std::f64::consts::FRAC_PI_2;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::interference::{interference_intensity, CouplingRatio, PhaseDifference};

/// Diffusion of the bias phase fitted so a 3600 s, 1 s-averaged MZM run at
/// quadrature shows a 61.2 % normalized standard deviation.
pub const CALIBRATED_SIGMA_RAD_PER_SQRT_S: f64 = 1.40;
/// Mixing fraction fitted for a 1.4 % Sagnac normalized standard deviation.
pub const CALIBRATED_EPSILON: f64 = 0.070;
/// Raw sampling step of the drift simulation.
pub const DEFAULT_DRIFT_DT_S: f64 = 0.01;
/// Averaging time of the power meter.
pub const METER_WINDOW_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub sigma_rad_per_sqrt_s: f64,
    pub seed: u64,
}

impl DriftSpec {
    pub fn new(sigma_rad_per_sqrt_s: f64, seed: u64) -> Result<Self> {
        let s = Self {
            sigma_rad_per_sqrt_s,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("drift.sigma_rad_per_sqrt_s", self.sigma_rad_per_sqrt_s)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Power fraction coupled into the misaligned crystal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationMixing {
    pub epsilon: f64,
}

impl PolarizationMixing {
    pub fn new(epsilon: f64) -> Result<Self> {
        let m = Self { epsilon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_finite() && (0.0..1.0).contains(&self.epsilon) {
            Ok(())
        } else {
            Err(Error::invalid(
                "mixing.epsilon",
                format!("must lie in [0, 1), got {}", self.epsilon),
            ))
        }
    }
}

/// Uniformly sampled optical power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    sample_period_s: f64,
    values: Vec<f64>,
}

impl PowerSeries {
    pub fn new(sample_period_s: f64, values: Vec<f64>) -> Result<Self> {
        ensure_positive("sample_period_s", sample_period_s)?;
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "series.values",
                format!("sample {i} is negative or not finite"),
            ));
        }
        Ok(Self {
            sample_period_s,
            values,
        })
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.sample_period_s
    }

    /// Rescaled so the largest sample is exactly 1.
    pub fn max_normalized(&self) -> Result<Self> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::invalid(
                "series.values",
                "all samples are zero; cannot normalize to the maximum",
            ));
        }
        let values = self
            .values
            .iter()
            .map(|v| if *v == max { 1.0 } else { v / max })
            .collect();
        Ok(Self {
            sample_period_s: self.sample_period_s,
            values,
        })
    }

    /// Two-column CSV, `time_s,normalized_power`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time_s,normalized_power")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.time(k), v)?;
        }
        Ok(())
    }
}

fn sample_count(duration_s: f64, dt_s: f64) -> Result<usize> {
    ensure_positive("duration_s", duration_s)?;
    ensure_positive("dt_s", dt_s)?;
    if dt_s > duration_s {
        return Err(Error::invalid(
            "dt_s",
            format!("step {dt_s} s exceeds the duration {duration_s} s"),
        ));
    }
    Ok((duration_s / dt_s).round() as usize)
}

/// Bias-phase excursion `φ(t_k)`, `k = 0..duration/dt`, starting at 0 with
/// independent `N(0, σ²·dt)` increments.
pub fn mzm_dc_phase_path(duration_s: f64, dt_s: f64, spec: DriftSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = sample_count(duration_s, dt_s)?;
    let step = spec.sigma_rad_per_sqrt_s * dt_s.sqrt();
    let mut path = Vec::with_capacity(n);
    if step == 0.0 {
        path.resize(n, 0.0);
        return Ok(path);
    }
    let normal = Normal::new(0.0, step).map_err(|e| Error::invalid("drift.sigma_rad_per_sqrt_s", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut phi = 0.0;
    for _ in 0..n {
        path.push(phi);
        phi += normal.sample(&mut rng);
    }
    Ok(path)
}

/// Unmodulated Sagnac output `(1 − ε)·1 + ε·I(r, π/2 + φ(t))`, max-normalized.
///
/// The ideal loop has zero net phase between directions and sits at the
/// transfer-curve peak; the leaked light rides the drifting bias phase.
pub fn sagnac_stability_series(
    mixing: PolarizationMixing,
    drift: DriftSpec,
    duration_s: f64,
    dt_s: f64,
    r: CouplingRatio,
) -> Result<PowerSeries> {
    mixing.validate()?;
    let path = mzm_dc_phase_path(duration_s, dt_s, drift)?;
    let ideal = interference_intensity(r, PhaseDifference(0.0)).value();
    let eps = mixing.epsilon;
    let values = path
        .iter()
        .map(|phi| (1.0 - eps) * ideal + eps * interference_intensity(r, PhaseDifference(FRAC_PI_2 + phi)).value())
        .collect();
    PowerSeries::new(dt_s, values)?.max_normalized()
}

/// Unmodulated MZM output `I(r, bias_phase + φ(t))`, max-normalized.
pub fn mzm_stability_series(
    drift: DriftSpec,
    duration_s: f64,
    dt_s: f64,
    r: CouplingRatio,
    bias_phase: f64,
) -> Result<PowerSeries> {
    ensure_finite("bias_phase_rad", bias_phase)?;
    let path = mzm_dc_phase_path(duration_s, dt_s, drift)?;
    let values = path
        .iter()
        .map(|phi| interference_intensity(r, PhaseDifference(bias_phase + phi)).value())
        .collect();
    PowerSeries::new(dt_s, values)?.max_normalized()
}

/// Non-overlapping boxcar average over `window_s`; a trailing partial window
/// is dropped. Values are averaged, not renormalized.
pub fn power_meter_average(raw: &PowerSeries, window_s: f64) -> Result<PowerSeries> {
    ensure_positive("meter_window_s", window_s)?;
    let ratio = window_s / raw.sample_period_s;
    let per_window = ratio.round();
    if per_window < 1.0 || (ratio - per_window).abs() > 1e-9 * ratio {
        return Err(Error::invalid(
            "meter_window_s",
            format!(
                "window {window_s} s must be a whole multiple (>= 1) of the sample period {} s",
                raw.sample_period_s
            ),
        ));
    }
    let m = per_window as usize;
    if raw.len() < m {
        return Err(Error::invalid(
            "duration_s",
            format!(
                "series spans {} s, shorter than one {window_s} s meter window",
                raw.len() as f64 * raw.sample_period_s
            ),
        ));
    }
    let values = raw
        .values
        .chunks_exact(m)
        .map(|c| c.iter().sum::<f64>() / m as f64)
        .collect();
    PowerSeries::new(window_s, values)
}

/// `100·σ/μ` with the population standard deviation.
pub fn normalized_std(series: &PowerSeries) -> Result<f64> {
    normalized_std_of(series.values())
}

pub(crate) fn normalized_std_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(100.0 * var.sqrt() / mean)
}

/// Settings shared by every run of a stability ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySampling {
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_window")]
    pub meter_window_s: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DRIFT_DT_S
}

fn default_window() -> f64 {
    METER_WINDOW_S
}

impl StabilitySampling {
    pub fn new(duration_s: f64) -> Self {
        Self {
            duration_s,
            dt_s: DEFAULT_DRIFT_DT_S,
            meter_window_s: METER_WINDOW_S,
        }
    }
}

/// Unmodulated device whose stability is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StabilityDevice {
    Sagnac {
        coupling: CouplingRatio,
        mixing: PolarizationMixing,
    },
    Mzm {
        coupling: CouplingRatio,
        bias_phase_rad: f64,
    },
}

impl StabilityDevice {
    /// Raw max-normalized output for one drift realization.
    pub fn raw_series(&self, drift: DriftSpec, sampling: &StabilitySampling) -> Result<PowerSeries> {
        match *self {
            Self::Sagnac { coupling, mixing } => {
                sagnac_stability_series(mixing, drift, sampling.duration_s, sampling.dt_s, coupling)
            }
            Self::Mzm {
                coupling,
                bias_phase_rad,
            } => mzm_stability_series(drift, sampling.duration_s, sampling.dt_s, coupling, bias_phase_rad),
        }
    }

    /// Meter-averaged, max-normalized series and its normalized std in %.
    pub fn measure(&self, drift: DriftSpec, sampling: &StabilitySampling) -> Result<(PowerSeries, f64)> {
        let raw = self.raw_series(drift, sampling)?;
        let averaged = power_meter_average(&raw, sampling.meter_window_s)?.max_normalized()?;
        let std = normalized_std(&averaged)?;
        Ok((averaged, std))
    }
}

/// Mean normalized std over one run per seed. Runs execute in parallel; the
/// sum is taken in seed order so the result does not depend on scheduling.
pub fn ensemble_normalized_std(
    device: &StabilityDevice,
    drift: DriftSpec,
    sampling: &StabilitySampling,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "ensemble needs at least one seed"));
    }
    let stds = seeds
        .par_iter()
        .map(|&seed| device.measure(drift.with_seed(seed), sampling).map(|(_, s)| s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(stds.iter().sum::<f64>() / stds.len() as f64)
}

fn bisect(mut lo: f64, mut hi: f64, iterations: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::ScanBracket(format!(
            "no sign change on [{lo}, {hi}]: residuals {f_lo} and {f_hi}"
        )));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Diffusion `σ` in `[lo, hi]` at which the ensemble-mean MZM normalized std
/// equals `target_pct`.
///
/// The averaged std first rises with `σ` and then falls once the phase
/// wanders appreciably within one meter window, so a target below the peak
/// has two roots; the bracket selects one.
pub fn fit_drift_sigma(
    target_pct: f64,
    coupling: CouplingRatio,
    bias_phase_rad: f64,
    sampling: &StabilitySampling,
    seeds: &[u64],
    bracket: (f64, f64),
) -> Result<f64> {
    ensure_positive("target_pct", target_pct)?;
    let device = StabilityDevice::Mzm {
        coupling,
        bias_phase_rad,
    };
    bisect(bracket.0, bracket.1, 30, |sigma| {
        let drift = DriftSpec::new(sigma, 0)?;
        Ok(ensemble_normalized_std(&device, drift, sampling, seeds)? - target_pct)
    })
}

/// Mixing fraction at which the ensemble-mean Sagnac normalized std equals
/// `target_pct` for the given drift.
pub fn fit_mixing_epsilon(
    target_pct: f64,
    coupling: CouplingRatio,
    sigma_rad_per_sqrt_s: f64,
    sampling: &StabilitySampling,
    seeds: &[u64],
) -> Result<f64> {
    ensure_positive("target_pct", target_pct)?;
    let drift = DriftSpec::new(sigma_rad_per_sqrt_s, 0)?;
    bisect(0.0, 0.5, 30, |epsilon| {
        let device = StabilityDevice::Sagnac {
            coupling,
            mixing: PolarizationMixing::new(epsilon)?,
        };
        Ok(ensemble_normalized_std(&device, drift, sampling, seeds)? - target_pct)
    })
}
