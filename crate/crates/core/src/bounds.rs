//! Mixing-time lower bounds from an approximate eigenfunction Φ.
//!
//! With E[Φ(X_{t+1}) | X_t] within ρ of (1-γ)Φ(X_t) and conditional second
//! moment of the increment at most R, the chain started at Φ̂ is still at
//! total variation distance ≥ 1-ε from stationarity for every t ≤ T.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub phi_max: f64,
    pub r: f64,
    pub gamma: f64,
    pub rho: f64,
    pub eps: f64,
}

impl BoundInputs {
    pub fn new(phi_max: f64, r: f64, gamma: f64, rho: f64, eps: f64) -> Result<Self> {
        let b = Self { phi_max, r, gamma, rho, eps };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.gamma >= 0.5 {
            return Err(Error::LemmaInapplicable { gamma: self.gamma });
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("R must be positive, got {}", self.r)));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be non-negative, got {}", self.rho)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.phi_max > 0.0 && self.phi_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi_max must be positive, got {}", self.phi_max)));
        }
        Ok(())
    }

    /// √((R + 6ρΦ̂)/(γε)), the Chebyshev radius.
    pub fn deviation_radius(&self) -> f64 {
        ((self.r + 6.0 * self.rho * self.phi_max) / (self.gamma * self.eps)).sqrt()
    }

    /// ρ/γ + √((R + 6ρΦ̂)/(γε)).
    pub fn cut_level(&self) -> f64 {
        self.rho / self.gamma + self.deviation_radius()
    }
}

/// ε = 1/ln n.
pub fn default_eps(n: usize) -> f64 {
    1.0 / (n as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    pub t_real: f64,
    /// ⌊T⌋; TV ≥ 1-ε holds for all 0 ≤ t ≤ t_steps.
    pub t_steps: i64,
    pub threshold: f64,
    /// T ≤ 0: no step carries a guarantee.
    pub vacuous: bool,
}

impl BoundResult {
    fn new(t_real: f64, threshold: f64) -> Self {
        Self { t_real, t_steps: t_real.floor() as i64, threshold, vacuous: t_real <= 0.0 }
    }

    pub fn covers(&self, t: u64) -> bool {
        !self.vacuous && (t as f64) <= self.t_real
    }
}

/// T = (ln Φ̂ - ½ ln(4R/(γε))) / (-ln(1-γ)) for an exact eigenfunction.
pub fn eigenfunction_t(b: &BoundInputs) -> Result<BoundResult> {
    b.validate()?;
    if b.rho != 0.0 {
        return Err(Error::InvalidParameter(format!("exact eigenfunction bound needs rho = 0, got {}", b.rho)));
    }
    let num = b.phi_max.ln() - 0.5 * (4.0 * b.r / (b.gamma * b.eps)).ln();
    let t = num / -(-b.gamma).ln_1p();
    Ok(BoundResult::new(t, (b.r / (b.gamma * b.eps)).sqrt()))
}

/// T = (ln Φ̂ - ln(2ρ/γ + √(4(R + 6ρΦ̂)/(γε)))) / (-ln(1-γ)).
pub fn extended_t(b: &BoundInputs) -> Result<BoundResult> {
    b.validate()?;
    let inner = 2.0 * b.rho / b.gamma + (4.0 * (b.r + 6.0 * b.rho * b.phi_max) / (b.gamma * b.eps)).sqrt();
    let t = (b.phi_max.ln() - inner.ln()) / -(-b.gamma).ln_1p();
    Ok(BoundResult::new(t, b.cut_level()))
}

/// Closed-form asymptotic lower bounds, natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticBounds {
    /// p²(2-p)/(8π²(1-p²)) n² ln n for the circular deck.
    pub circular_overhand: Option<f64>,
    /// The same expression for the linear deck.
    pub linear_overhand: Option<f64>,
    /// p²/(8π²(1-p)) n² ln n, from γ ≈ 4π²(1-p)/(p²n²) of the implemented law.
    pub derived_overhand: Option<f64>,
    /// n³ ln n / (8π²).
    pub rudvalis: f64,
}

pub fn overhand_coefficient(p: f64) -> f64 {
    p * p * (2.0 - p) / (8.0 * PI * PI * (1.0 - p * p))
}

pub fn derived_overhand_coefficient(p: f64) -> f64 {
    p * p / (8.0 * PI * PI * (1.0 - p))
}

pub fn asymptotic_bounds(n: usize, p: Option<f64>) -> AsymptoticBounds {
    let nf = n as f64;
    let scale = nf * nf * nf.ln();
    let overhand = p.map(|p| overhand_coefficient(p) * scale);
    AsymptoticBounds {
        circular_overhand: overhand,
        linear_overhand: overhand,
        derived_overhand: p.map(|p| derived_overhand_coefficient(p) * scale),
        rudvalis: nf * scale / (8.0 * PI * PI),
    }
}

/// The threshold test behind the bound at step t: declare "not mixed" when
/// Φ > c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdCertificate {
    pub t: u64,
    pub cut_level: f64,
    /// Lower bound on E Φ(X_t): (1-γ)^t Φ̂ - ρ/γ.
    pub mean_lower: f64,
    /// |E Φ(X_∞)| ≤ ρ/γ.
    pub stationary_mean_bound: f64,
    /// Chebyshev radius used on both sides.
    pub radius: f64,
    /// Tail budget of each Chebyshev step, ε/2.
    pub budget: f64,
    pub guaranteed: bool,
    /// 1-ε when guaranteed, 0 otherwise.
    pub separation: f64,
}

pub fn threshold_certificate(b: &BoundInputs, t: u64) -> Result<ThresholdCertificate> {
    let bound = extended_t(b)?;
    let decay = (t as f64 * (-b.gamma).ln_1p()).exp();
    let guaranteed = bound.covers(t);
    Ok(ThresholdCertificate {
        t,
        cut_level: b.cut_level(),
        mean_lower: decay * b.phi_max - b.rho / b.gamma,
        stationary_mean_bound: b.rho / b.gamma,
        radius: b.deviation_radius(),
        budget: b.eps / 2.0,
        guaranteed,
        separation: if guaranteed { 1.0 - b.eps } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inputs(phi: f64, r: f64, gamma: f64, rho: f64, eps: f64) -> BoundInputs {
        BoundInputs::new(phi, r, gamma, rho, eps).unwrap()
    }

    #[test]
    fn reference_value() {
        let b = inputs(100.0, 1.0, 0.01, 0.0, 0.1);
        let t = eigenfunction_t(&b).unwrap();
        let expected = (100f64.ln() - 0.5 * 4000f64.ln()) / -(0.99f64.ln());
        assert!((t.t_real - expected).abs() < 1e-12);
        assert!((t.t_real - 45.585).abs() < 5e-4, "{}", t.t_real);
        assert_eq!(t.t_steps, 45);
        assert!((t.threshold - 1000f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn defining_property() {
        let (r, gamma, eps): (f64, f64, f64) = (2.5, 0.03, 0.2);
        let c = (r / (gamma * eps)).sqrt();
        let phi = 7.0 * c;
        let t = eigenfunction_t(&inputs(phi, r, gamma, 0.0, eps)).unwrap().t_real;
        let decayed = (1.0f64 - gamma).powf(t) * phi;
        assert!((decayed / (2.0 * c) - 1.0).abs() < 1e-12);
        let at_boundary = eigenfunction_t(&inputs(2.0 * c, r, gamma, 0.0, eps)).unwrap();
        assert!(at_boundary.t_real.abs() < 1e-12);
    }

    #[test]
    fn doubling_phi_adds_a_constant() {
        let gamma = 0.07;
        let a = eigenfunction_t(&inputs(40.0, 1.3, gamma, 0.0, 0.3)).unwrap().t_real;
        let b = eigenfunction_t(&inputs(80.0, 1.3, gamma, 0.0, 0.3)).unwrap().t_real;
        assert!((b - a - 2f64.ln() / -(1.0 - gamma as f64).ln()).abs() < 1e-11);
    }

    #[test]
    fn vacuous_results_are_flagged() {
        let t = eigenfunction_t(&inputs(1.0, 10.0, 0.1, 0.0, 0.1)).unwrap();
        assert!(t.vacuous);
        assert!(t.t_steps < 0);
        assert!(!t.covers(0));
    }

    #[test]
    fn input_validation() {
        assert_eq!(BoundInputs::new(1.0, 1.0, 0.5, 0.0, 0.1).unwrap_err(), Error::LemmaInapplicable { gamma: 0.5 });
        assert!(matches!(BoundInputs::new(1.0, 1.0, 0.7, 0.0, 0.1), Err(Error::LemmaInapplicable { .. })));
        assert!(BoundInputs::new(1.0, 1.0, 0.0, 0.0, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 0.0, 0.1, 0.0, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 0.1, -1.0, 0.1).is_err());
        assert!(BoundInputs::new(1.0, 1.0, 0.1, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(0.0, 1.0, 0.1, 0.0, 0.5).is_err());
        assert!(eigenfunction_t(&inputs(1.0, 1.0, 0.1, 0.2, 0.5)).is_err());
        let bad = BoundInputs { phi_max: 1.0, r: 1.0, gamma: 0.6, rho: 0.0, eps: 0.1 };
        assert!(matches!(extended_t(&bad), Err(Error::LemmaInapplicable { .. })));
    }

    #[test]
    fn half_coefficient_is_exact() {
        assert_eq!(overhand_coefficient(0.5), 1.0 / (16.0 * PI * PI));
        assert_eq!(derived_overhand_coefficient(0.5), 1.0 / (16.0 * PI * PI));
        let a = asymptotic_bounds(128, Some(0.5));
        let expected = 128.0 * 128.0 * 128f64.ln() / (16.0 * PI * PI);
        assert!((a.circular_overhand.unwrap() / expected - 1.0).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_values() {
        let a = asymptotic_bounds(10, None);
        assert!((a.rudvalis - 1000.0 * 10f64.ln() / (8.0 * PI * PI)).abs() < 1e-12);
        assert!((a.rudvalis - 29.16).abs() < 5e-3, "{}", a.rudvalis);
        assert!(a.circular_overhand.is_none());
        for p in [0.1, 0.25, 0.75, 0.9] {
            for n in [2usize, 10, 1000] {
                let a = asymptotic_bounds(n, Some(p));
                assert_eq!(a.circular_overhand, a.linear_overhand);
            }
            let ratio = derived_overhand_coefficient(p) / overhand_coefficient(p);
            assert!((ratio - (1.0 + p) / (2.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_cut_levels() {
        let b = inputs(50.0, 2.0, 0.05, 0.0, 0.2);
        let c = threshold_certificate(&b, 0).unwrap();
        assert!((c.cut_level - (2.0f64 / 0.01).sqrt()).abs() < 1e-12);
        assert!(b.phi_max > 2.0 * c.cut_level);
        assert!(c.guaranteed);
        assert_eq!(c.separation, 0.8);
        assert_eq!(c.budget, 0.1);
        assert_eq!(c.mean_lower, 50.0);

        let b = inputs(50.0, 2.0, 0.05, 0.01, 0.2);
        let c = threshold_certificate(&b, 3).unwrap();
        let expected = 0.01 / 0.05 + ((2.0 + 6.0 * 0.01 * 50.0) / 0.01f64).sqrt();
        assert!((c.cut_level - expected).abs() < 1e-12);
        assert!((extended_t(&b).unwrap().threshold - expected).abs() < 1e-12);
    }

    #[test]
    fn certificate_beyond_t() {
        let b = inputs(50.0, 2.0, 0.05, 0.01, 0.2);
        let t = extended_t(&b).unwrap();
        let after = threshold_certificate(&b, t.t_steps as u64 + 1).unwrap();
        assert!(!after.guaranteed);
        assert_eq!(after.separation, 0.0);
        let at = threshold_certificate(&b, t.t_steps as u64).unwrap();
        assert!(at.guaranteed);
        // At a covered step the mean clears both Chebyshev windows.
        assert!(at.mean_lower - at.radius >= at.cut_level - 1e-9);
    }

    fn valid_inputs() -> impl Strategy<Value = BoundInputs> {
        (1e-3f64..1e4, 1e-4f64..1e3, 1e-6f64..0.4999, 1e-3f64..0.999)
            .prop_map(|(phi, r, gamma, eps)| BoundInputs { phi_max: phi, r, gamma, rho: 0.0, eps })
    }

    proptest! {
        #[test]
        fn extended_reduces_to_eigenfunction_bound(b in valid_inputs()) {
            let a = eigenfunction_t(&b).unwrap();
            let e = extended_t(&b).unwrap();
            let scale = a.t_real.abs().max(1.0);
            prop_assert!((a.t_real - e.t_real).abs() <= 1e-12 * scale);
            prop_assert!((a.threshold - e.threshold).abs() <= 1e-12 * a.threshold);
        }

        #[test]
        fn strictly_decreasing_in_rho(b in valid_inputs(), rho in 1e-6f64..10.0, bump in 1e-3f64..10.0) {
            let lo = extended_t(&BoundInputs { rho, ..b }).unwrap().t_real;
            let hi = extended_t(&BoundInputs { rho: rho + bump, ..b }).unwrap().t_real;
            let zero = extended_t(&b).unwrap().t_real;
            prop_assert!(hi < lo);
            prop_assert!(lo < zero);
        }

        #[test]
        fn floor_brackets_t(b in valid_inputs()) {
            let t = extended_t(&b).unwrap();
            prop_assert!((t.t_steps as f64) <= t.t_real && t.t_real < t.t_steps as f64 + 1.0);
        }
    }
}
