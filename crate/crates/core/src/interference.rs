//! Static two-beam interference and transfer curves.
//!
//! Everything here evaluates a lossless 2×2 interferometer per pulse: the
//! beamsplitter power split `r:t` sets the contrast, the phase difference sets
//! the operating point. Peak transmission is normalized to exactly 1.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Reflected-arm power fraction `r` of the interfering beamsplitter.
///
/// The transmitted fraction is always derived as `1 - r`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CouplingRatio(f64);

impl CouplingRatio {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 && r < 1.0 {
            Ok(Self(r))
        } else {
            Err(Error::invalid(
                "r",
                format!("coupling ratio must lie in (0, 1), got {r}"),
            ))
        }
    }

    /// A balanced 50:50 splitter.
    pub fn balanced() -> Self {
        Self(0.5)
    }

    pub fn r(self) -> f64 {
        self.0
    }

    pub fn t(self) -> f64 {
        1.0 - self.0
    }

    /// `(R - T)^2`, the floor of the transfer curve.
    pub fn contrast_floor(self) -> f64 {
        let d = self.r() - self.t();
        d * d
    }
}

impl TryFrom<f64> for CouplingRatio {
    type Error = Error;

    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<CouplingRatio> for f64 {
    fn from(c: CouplingRatio) -> f64 {
        c.0
    }
}

impl fmt::Display for CouplingRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.r(), self.t())
    }
}

/// Optical phase difference between the two interfering paths, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseDifference(pub f64);

impl PhaseDifference {
    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for PhaseDifference {
    fn from(rad: f64) -> Self {
        Self(rad)
    }
}

/// Normalized output intensity, `0 <= value <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transmission(f64);

impl Transmission {
    /// Clamps rounding excursions outside `[0, 1]`.
    pub fn new(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Maximum extinction ratio of an interferometer, in dB.
///
/// A perfectly balanced splitter has no finite extinction ratio; that case is
/// carried as [`ExtinctionRatioDb::Unbounded`] rather than as an IEEE infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionRatioDb {
    Finite(f64),
    Unbounded,
}

impl ExtinctionRatioDb {
    pub fn finite(db: f64) -> Result<Self> {
        if db.is_finite() && db >= 0.0 {
            Ok(Self::Finite(db))
        } else {
            Err(Error::invalid(
                "extinction_db",
                format!("must be finite and >= 0, got {db}"),
            ))
        }
    }

    pub fn db(self) -> Option<f64> {
        match self {
            Self::Finite(db) => Some(db),
            Self::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Self::Unbounded)
    }
}

/// Renders finite values in shortest round-trip form and the unbounded value
/// as the literal `inf`.
impl fmt::Display for ExtinctionRatioDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(db) => write!(f, "{db}"),
            Self::Unbounded => f.write_str("inf"),
        }
    }
}

/// DC bias of a Mach-Zehnder modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzmBias {
    /// Half-wave voltage in volts.
    pub v_pi: f64,
    /// DC offset added to the drive, in volts.
    pub v_dc: f64,
}

impl MzmBias {
    pub fn new(v_pi: f64, v_dc: f64) -> Result<Self> {
        ensure_positive("v_pi", v_pi)?;
        ensure_finite("v_dc", v_dc)?;
        Ok(Self { v_pi, v_dc })
    }
}

/// Output intensity `R² + T² + 2RT·cos(Δφ)` of the main port.
pub fn interference_intensity(r: CouplingRatio, dphi: PhaseDifference) -> Transmission {
    let (rr, tt) = (r.r(), r.t());
    Transmission::new(rr * rr + tt * tt + 2.0 * rr * tt * dphi.0.cos())
}

/// Intensity of the second output port; the two ports always sum to 1.
pub fn complementary_port_intensity(r: CouplingRatio, dphi: PhaseDifference) -> Transmission {
    Transmission::new(1.0 - interference_intensity(r, dphi).value())
}

/// `-20·log10(|2r - 1|)`.
pub fn max_extinction_ratio_db(r: CouplingRatio) -> ExtinctionRatioDb {
    let imbalance = (2.0 * r.r() - 1.0).abs();
    if imbalance == 0.0 {
        ExtinctionRatioDb::Unbounded
    } else {
        ExtinctionRatioDb::Finite(-20.0 * imbalance.log10())
    }
}

/// Inverse of [`max_extinction_ratio_db`] on the `r >= 0.5` branch.
///
/// The `r < 0.5` solution is the same device with its ports relabelled.
pub fn coupling_from_extinction_db(er: ExtinctionRatioDb) -> Result<CouplingRatio> {
    match er {
        ExtinctionRatioDb::Unbounded => Ok(CouplingRatio::balanced()),
        ExtinctionRatioDb::Finite(db) => {
            let er = ExtinctionRatioDb::finite(db)?;
            let db = er.db().unwrap_or_default();
            let r = 0.5 * (1.0 + 10f64.powf(-db / 20.0));
            // 0 dB maps to r = 1, which is not a valid splitter.
            CouplingRatio::new(r)
                .map_err(|_| Error::invalid("extinction_db", format!("{db} dB has no splitter with 0 < r < 1")))
        }
    }
}

/// Transmission of an MZM at drive voltage `v`; `Δφ = π(v + v_dc)/v_pi`.
pub fn mzm_transmission(v: f64, bias: MzmBias, r: CouplingRatio) -> Transmission {
    let dphi = PI * (v + bias.v_dc) / bias.v_pi;
    interference_intensity(r, PhaseDifference(dphi))
}

/// Slope `dI/dΔφ = -2RT·sin(Δφ)` of the transfer curve.
pub fn small_signal_sensitivity(dphi: PhaseDifference, r: CouplingRatio) -> f64 {
    -2.0 * r.r() * r.t() * dphi.0.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn cr(r: f64) -> CouplingRatio {
        CouplingRatio::new(r).unwrap()
    }

    #[test]
    fn coupling_ratio_rejects_out_of_range() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(CouplingRatio::new(bad).is_err(), "{bad}");
        }
        assert_eq!(cr(0.8).r() + cr(0.8).t(), 1.0);
    }

    #[test]
    fn intensity_examples() {
        assert!(interference_intensity(cr(0.5), PI.into()).value().abs() < 1e-15);
        assert_eq!(interference_intensity(cr(0.8), 0.0.into()).value(), 1.0);
        // (R - T)^2 = 0.6^2
        assert!((interference_intensity(cr(0.8), PI.into()).value() - 0.36).abs() < 1e-12);
    }

    #[test]
    fn complementary_examples() {
        assert!((complementary_port_intensity(cr(0.5), PI.into()).value() - 1.0).abs() < 1e-15);
        assert!((complementary_port_intensity(cr(0.8), PI.into()).value() - 0.64).abs() < 1e-12);
        assert!(complementary_port_intensity(cr(0.7), 0.0.into()).value().abs() < 1e-15);
    }

    #[test]
    fn extinction_examples() {
        assert_eq!(max_extinction_ratio_db(cr(0.5)), ExtinctionRatioDb::Unbounded);
        let er75 = max_extinction_ratio_db(cr(0.75)).db().unwrap();
        let er80 = max_extinction_ratio_db(cr(0.8)).db().unwrap();
        assert!((er75 - 6.0206).abs() < 1e-4, "{er75}");
        assert!((er80 - 4.4370).abs() < 1e-4, "{er80}");
    }

    #[test]
    fn extinction_inverse_examples() {
        let r = |db: f64| coupling_from_extinction_db(ExtinctionRatioDb::Finite(db)).unwrap().r();
        assert!((r(3.94) - 0.8174).abs() < 1e-3);
        assert!((r(30.48) - 0.5150).abs() < 1e-3);
        assert_eq!(
            coupling_from_extinction_db(ExtinctionRatioDb::Unbounded).unwrap().r(),
            0.5
        );
        assert!(coupling_from_extinction_db(ExtinctionRatioDb::Finite(-1.0)).is_err());
        assert!(coupling_from_extinction_db(ExtinctionRatioDb::Finite(0.0)).is_err());
    }

    #[test]
    fn extinction_display() {
        assert_eq!(ExtinctionRatioDb::Unbounded.to_string(), "inf");
        assert_eq!(ExtinctionRatioDb::Finite(6.5).to_string(), "6.5");
    }

    #[test]
    fn mzm_examples() {
        let bias = MzmBias::new(3.0, 0.0).unwrap();
        assert!(mzm_transmission(3.0, bias, cr(0.5)).value().abs() < 1e-15);
        assert!((mzm_transmission(1.5, bias, cr(0.5)).value() - 0.5).abs() < 1e-12);
        for r in [0.2, 0.5, 0.9] {
            assert_eq!(mzm_transmission(0.0, bias, cr(r)).value(), 1.0);
        }
        assert!(MzmBias::new(0.0, 0.0).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        for r in [0.3, 0.5, 0.8] {
            assert_eq!(small_signal_sensitivity(0.0.into(), cr(r)), 0.0);
            assert!(small_signal_sensitivity(PI.into(), cr(r)).abs() < 1e-15);
        }
        assert!((small_signal_sensitivity(FRAC_PI_2.into(), cr(0.5)) + 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ports_conserve_energy(r in 1e-6f64..1.0 - 1e-6, phi in -20.0f64..20.0) {
            let c = cr(r);
            let sum = interference_intensity(c, phi.into()).value()
                + complementary_port_intensity(c, phi.into()).value();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn intensity_within_contrast_range(r in 1e-6f64..1.0 - 1e-6, phi in -20.0f64..20.0) {
            let c = cr(r);
            let i = interference_intensity(c, phi.into()).value();
            prop_assert!(i >= c.contrast_floor() - 1e-12 && i <= 1.0);
            prop_assert!((interference_intensity(c, PI.into()).value() - c.contrast_floor()).abs() < 1e-12);
        }

        #[test]
        fn extinction_round_trip(r in 0.5 + 1e-6f64..1.0 - 1e-6) {
            let back = coupling_from_extinction_db(max_extinction_ratio_db(cr(r))).unwrap();
            prop_assert!((back.r() - r).abs() < 1e-9);
        }

        #[test]
        fn extinction_decreases_with_imbalance(a in 1e-6f64..0.49, b in 1e-6f64..0.49) {
            prop_assume!((a - b).abs() > 1e-9);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            let er = |d: f64| max_extinction_ratio_db(cr(0.5 + d)).db().unwrap();
            prop_assert!(er(near) > er(far));
            // mirror branch
            let er_low = |d: f64| max_extinction_ratio_db(cr(0.5 - d)).db().unwrap();
            prop_assert!(er_low(near) > er_low(far));
        }

        #[test]
        fn sensitivity_matches_finite_difference(r in 1e-3f64..1.0 - 1e-3, phi in -10.0f64..10.0) {
            let c = cr(r);
            let h = 1e-6;
            let fd = (interference_intensity(c, (phi + h).into()).value()
                - interference_intensity(c, (phi - h).into()).value()) / (2.0 * h);
            prop_assert!((fd - small_signal_sensitivity(phi.into(), c)).abs() < 1e-6);
        }

        #[test]
        fn sensitivity_bounded_by_two_rt(r in 1e-3f64..1.0 - 1e-3, phi in -10.0f64..10.0) {
            let c = cr(r);
            let peak = 2.0 * c.r() * c.t();
            prop_assert!(small_signal_sensitivity(phi.into(), c).abs() <= peak + 1e-15);
            prop_assert!((small_signal_sensitivity(FRAC_PI_2.into(), c).abs() - peak).abs() < 1e-15);
        }
    }
}
