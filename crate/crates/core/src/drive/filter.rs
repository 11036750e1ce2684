//! First-order electrical filters, discretized with the bilinear transform.
//!
//! Both filters treat the record as if its first sample had been held
//! indefinitely before `t = 0`, so they are LTI on the extended signal and
//! commute with each other. Cutoffs are pre-warped so the digital −3 dB
//! corner lands exactly on the requested frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::VoltageWaveform;
use crate::error::{ensure_non_negative, ensure_positive, Result};

/// First-order high-pass corner modelling AC coupling in the driver chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcCouplingSpec {
    /// −3 dB corner in Hz; 0 disables the filter.
    pub cutoff_hz: f64,
}

impl AcCouplingSpec {
    pub fn new(cutoff_hz: f64) -> Result<Self> {
        ensure_non_negative("ac_cutoff_hz", cutoff_hz)?;
        Ok(Self { cutoff_hz })
    }

    pub fn disabled() -> Self {
        Self { cutoff_hz: 0.0 }
    }
}

impl Default for AcCouplingSpec {
    fn default() -> Self {
        Self {
            cutoff_hz: super::DEFAULT_AC_CUTOFF_HZ,
        }
    }
}

/// Pre-warped analog-prototype coefficient `tan(π·fc·dt)`, or `None` at or
/// above Nyquist.
fn prewarp(cutoff_hz: f64, dt: f64) -> Option<f64> {
    let x = cutoff_hz * dt;
    (x < 0.5).then(|| (PI * x).tan())
}

/// Single-pole low-pass with unit DC gain.
pub fn bandlimit(w: &VoltageWaveform, bandwidth_hz: f64) -> Result<VoltageWaveform> {
    ensure_positive("bandwidth_hz", bandwidth_hz)?;
    let Some(k) = prewarp(bandwidth_hz, w.grid().dt) else {
        // Corner above Nyquist: the discrete filter is an identity.
        return Ok(w.clone());
    };
    let b = k / (1.0 + k);
    let a = (k - 1.0) / (k + 1.0);
    let x = w.samples();
    let mut out = Vec::with_capacity(x.len());
    let (mut x_prev, mut y_prev) = (x[0], x[0]);
    for &xn in x {
        let y = b * (xn + x_prev) - a * y_prev;
        out.push(y);
        x_prev = xn;
        y_prev = y;
    }
    VoltageWaveform::new(*w.grid(), out)
}

/// Single-pole high-pass; the output baseline relaxes toward zero mean.
pub fn ac_couple(w: &VoltageWaveform, spec: AcCouplingSpec) -> Result<VoltageWaveform> {
    ensure_non_negative("ac_cutoff_hz", spec.cutoff_hz)?;
    if spec.cutoff_hz == 0.0 {
        return Ok(w.clone());
    }
    let Some(k) = prewarp(spec.cutoff_hz, w.grid().dt) else {
        return VoltageWaveform::new(*w.grid(), vec![0.0; w.len()]);
    };
    let b = 1.0 / (1.0 + k);
    let a = (k - 1.0) / (k + 1.0);
    let x = w.samples();
    let mut out = Vec::with_capacity(x.len());
    // Held first sample is DC: the steady-state output is zero.
    let (mut x_prev, mut y_prev) = (x[0], 0.0);
    for &xn in x {
        let y = b * (xn - x_prev) - a * y_prev;
        out.push(y);
        x_prev = xn;
        y_prev = y;
    }
    VoltageWaveform::new(*w.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::SampleGrid;

    fn grid(dt: f64, n: usize) -> SampleGrid {
        SampleGrid::new(dt, n).unwrap()
    }

    fn step(g: SampleGrid, at: usize) -> VoltageWaveform {
        let s = (0..g.n).map(|i| if i >= at { 1.0 } else { 0.0 }).collect();
        VoltageWaveform::new(g, s).unwrap()
    }

    #[test]
    fn lowpass_passes_dc() {
        let g = grid(1e-12, 2000);
        let w = VoltageWaveform::new(g, vec![0.731; g.n]).unwrap();
        let y = bandlimit(&w, 8e9).unwrap();
        assert!(y.samples().iter().all(|v| (v - 0.731).abs() < 1e-12));
    }

    #[test]
    fn lowpass_step_settles_with_rc_time_constant() {
        let g = grid(1e-12, 4000);
        let bw = 8e9;
        let tau = 1.0 / (2.0 * PI * bw);
        let y = bandlimit(&step(g, 100), bw).unwrap();
        for m in [1.0, 2.0, 3.0] {
            let i = 100 + (m * tau / g.dt).round() as usize;
            // the linearly interpolated step crosses half-height at sample 99.5
            let elapsed = (i as f64 - 99.5) * g.dt;
            let expected = 1.0 - (-elapsed / tau).exp();
            let got = y.samples()[i];
            assert!(
                (got - expected).abs() / expected < 0.01,
                "m={m} got={got} expected={expected}"
            );
        }
    }

    #[test]
    fn lowpass_far_above_band_is_transparent() {
        let g = grid(1e-12, 1000);
        let s = (0..g.n).map(|i| (i as f64 * 0.01).sin()).collect();
        let w = VoltageWaveform::new(g, s).unwrap();
        let y = bandlimit(&w, 100.0 / g.dt).unwrap();
        for (a, b) in w.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() <= 0.01 * a.abs().max(1e-3));
        }
        assert!(bandlimit(&w, 0.0).is_err());
    }

    #[test]
    fn ac_couple_disabled_is_identity() {
        let g = grid(1e-9, 64);
        let s = (0..g.n).map(|i| i as f64).collect();
        let w = VoltageWaveform::new(g, s).unwrap();
        assert_eq!(ac_couple(&w, AcCouplingSpec::disabled()).unwrap(), w);
        assert!(AcCouplingSpec::new(-1.0).is_err());
    }

    #[test]
    fn ac_couple_constant_decays() {
        let fc = 1e6;
        let tau = 1.0 / (2.0 * PI * fc);
        let dt = tau / 200.0;
        let n = (10.0 * tau / dt) as usize;
        // held constant from the start
        let w = VoltageWaveform::new(grid(dt, n), vec![1.0; n]).unwrap();
        let y = ac_couple(&w, AcCouplingSpec::new(fc).unwrap()).unwrap();
        assert!(y.samples()[n - 1].abs() < 1e-3);
        // switched on at the first sample: exp(-t/τ) decay
        let on = step(grid(dt, n + 1), 1);
        let y = ac_couple(&on, AcCouplingSpec::new(fc).unwrap()).unwrap();
        let last = *y.samples().last().unwrap();
        assert!(last < 1e-3 && last > 0.0, "{last}");
        let at_tau = y.samples()[1 + 200];
        assert!((at_tau - (-1f64).exp()).abs() < 2e-3, "{at_tau}");
    }

    #[test]
    fn ac_couple_passes_fast_square_wave() {
        let g = grid(1e-12, 20_000);
        let period = 200;
        // leading zero: the held pre-record level is the square wave's mean
        let s = (0..g.n)
            .map(|i| match i {
                0 => 0.0,
                _ if (i / (period / 2)) % 2 == 0 => 1.0,
                _ => -1.0,
            })
            .collect();
        let w = VoltageWaveform::new(g, s).unwrap();
        let y = ac_couple(&w, AcCouplingSpec::new(1e5).unwrap()).unwrap();
        for (a, b) in w.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() < 0.01);
        }
    }
}
