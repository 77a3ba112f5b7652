//! Error function and the confluent hypergeometric function ₁F₁(1; 5/2; u).
//!
//! For a = 1 the Kummer large-argument expansion of ₁F₁(1; c; u) has a single
//! exponential term, and with c = 5/2 the function reduces to
//!
//! ```text
//! ₁F₁(1; 5/2; u) = Γ(5/2) eᵘ u^{-3/2} erf(√u) − 3/(2u)
//! ```
//!
//! which is evaluated for large u. Small u uses the power series, whose terms
//! are all positive.

use crate::error::{Error, Result};

/// Above this argument the closed erf representation replaces the series.
pub const HYP1F1_CROSSOVER: f64 = 20.0;

const GAMMA_5_2: f64 = 1.329_340_388_179_137; // 3√π/4

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Power series Σ uⁿ / (5/2)ₙ.
pub fn hyp1f1_1_52_series(u: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    loop {
        term *= u / (2.5 + n);
        sum += term;
        n += 1.0;
        if term <= sum * 1e-17 || n > 5000.0 {
            break;
        }
    }
    sum
}

/// e^{-u} ₁F₁(1; 5/2; u) through the erf representation; finite for all u > 0.
pub fn hyp1f1_1_52_scaled_closed(u: f64) -> f64 {
    let su = u.sqrt();
    GAMMA_5_2 * erf(su) / (u * su) - 1.5 * (-u).exp() / u
}

/// ₁F₁(1; 5/2; u) for u ≥ 0.
pub fn hyp1f1_1_52(u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::InvalidInput(format!("₁F₁(1,5/2,u) needs finite u ≥ 0, got {u}")));
    }
    if u <= HYP1F1_CROSSOVER {
        Ok(hyp1f1_1_52_series(u))
    } else {
        let su = u.sqrt();
        Ok(GAMMA_5_2 * u.exp() * erf(su) / (u * su) - 1.5 / u)
    }
}

/// e^{-u} ₁F₁(1; 5/2; u), safe from overflow for every u ≥ 0.
pub fn hyp1f1_1_52_scaled(u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::InvalidInput(format!("₁F₁(1,5/2,u) needs finite u ≥ 0, got {u}")));
    }
    if u <= HYP1F1_CROSSOVER {
        Ok((-u).exp() * hyp1f1_1_52_series(u))
    } else {
        Ok(hyp1f1_1_52_scaled_closed(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_points() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(10.0) - 1.0).abs() <= 1e-15);
        assert_eq!(erf(-0.7), -erf(0.7));
    }

    #[test]
    fn hyp1f1_at_zero_is_one() {
        assert_eq!(hyp1f1_1_52(0.0).unwrap(), 1.0);
        assert_eq!(hyp1f1_1_52_scaled(0.0).unwrap(), 1.0);
    }

    #[test]
    fn branches_agree_at_crossover() {
        for u in [5.0, 10.0, HYP1F1_CROSSOVER, 30.0] {
            let series = hyp1f1_1_52_series(u);
            let closed = hyp1f1_1_52_scaled_closed(u) * u.exp();
            assert!(((series - closed) / series).abs() < 1e-13, "u={u}");
        }
    }

    #[test]
    fn scaled_form_is_finite_at_the_top_of_the_range() {
        let v = hyp1f1_1_52_scaled(700.0).unwrap();
        // leading behaviour Γ(5/2) u^{-3/2}
        let lead = GAMMA_5_2 / 700f64.powf(1.5);
        assert!(((v - lead) / lead).abs() < 1e-12);
        assert!(hyp1f1_1_52(700.0).unwrap().is_finite());
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(hyp1f1_1_52(-1.0).is_err());
        assert!(hyp1f1_1_52(f64::NAN).is_err());
    }
}
