//! Forcing families, bounded reactions, and the exact exponent type.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One-dimensional source `f(x)` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceFn {
    Constant { value: f64 },
    /// `a + b x`
    Affine { a: f64, b: f64 },
    /// `a + b cos(k pi x)`
    Cosine { a: f64, b: f64, k: f64 },
}

impl SourceFn {
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            SourceFn::Constant { value } => T::lit(value),
            SourceFn::Affine { a, b } => T::lit(a) + T::lit(b) * x,
            SourceFn::Cosine { a, b, k } => T::lit(a) + T::lit(b) * (T::lit(k) * T::PI() * x).cos(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match *self {
            SourceFn::Constant { value } => value >= 0.0,
            SourceFn::Affine { a, b } => a >= 0.0 && a + b >= 0.0,
            SourceFn::Cosine { a, b, .. } => a - b.abs() >= 0.0,
        }
    }
}

/// Bounded reaction `f(u)` with bounded derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReactionFn {
    Zero,
    Constant { c: f64 },
    /// `c / (1 + u^2)`
    Lorentzian { c: f64 },
    /// `c sin(k u)`
    Sine { c: f64, k: f64 },
}

impl ReactionFn {
    pub fn eval<T: Real>(&self, u: T) -> T {
        match *self {
            ReactionFn::Zero => T::zero(),
            ReactionFn::Constant { c } => T::lit(c),
            ReactionFn::Lorentzian { c } => T::lit(c) / (T::one() + u * u),
            ReactionFn::Sine { c, k } => T::lit(c) * (T::lit(k) * u).sin(),
        }
    }

    pub fn derivative<T: Real>(&self, u: T) -> T {
        match *self {
            ReactionFn::Zero | ReactionFn::Constant { .. } => T::zero(),
            ReactionFn::Lorentzian { c } => {
                let d = T::one() + u * u;
                -T::lit(2.0 * c) * u / (d * d)
            }
            ReactionFn::Sine { c, k } => T::lit(c * k) * (T::lit(k) * u).cos(),
        }
    }

    /// `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            ReactionFn::Zero => 0.0,
            ReactionFn::Constant { c } | ReactionFn::Lorentzian { c } | ReactionFn::Sine { c, .. } => {
                c.abs()
            }
        }
    }

    /// `sup |f'|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ReactionFn::Zero | ReactionFn::Constant { .. } => 0.0,
            // max of 2|u|/(1+u^2)^2 is attained at u = 1/sqrt(3)
            ReactionFn::Lorentzian { c } => c.abs() * 3.0 * 3f64.sqrt() / 8.0,
            ReactionFn::Sine { c, k } => (c * k).abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ReactionFn::Zero => true,
            ReactionFn::Constant { c } | ReactionFn::Lorentzian { c } => c.is_finite(),
            ReactionFn::Sine { c, k } => c.is_finite() && k.is_finite(),
        };
        if ok && self.sup_bound().is_finite() && self.lipschitz().is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("reaction {self:?} is not bounded")))
        }
    }
}

/// Exponent `p > 1` kept as a rational so that `p' - 1 = 1/(p - 1)` is exact
/// before conversion to floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exponent(Ratio<i64>);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidSpec(format!("exponent p = {p} must be > 1")));
        }
        let r = Ratio::<i64>::approximate_float(p)
            .ok_or_else(|| Error::InvalidSpec(format!("exponent {p} has no rational form")))?;
        Ok(Exponent(r))
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        let r = Ratio::new(num, den);
        if r <= Ratio::from_integer(1) {
            return Err(Error::InvalidSpec(format!("exponent {num}/{den} must be > 1")));
        }
        Ok(Exponent(r))
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn value<T: Real>(&self) -> T {
        T::lit(*self.0.numer() as f64) / T::lit(*self.0.denom() as f64)
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn conjugate<T: Real>(&self) -> T {
        let q = self.0 / (self.0 - Ratio::from_integer(1));
        T::lit(*q.numer() as f64) / T::lit(*q.denom() as f64)
    }

    /// `p' - 1 = 1 / (p - 1)`.
    pub fn conjugate_minus_one<T: Real>(&self) -> T {
        let q = (self.0 - Ratio::from_integer(1)).recip();
        T::lit(*q.numer() as f64) / T::lit(*q.denom() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_algebra_is_exact() {
        let p = Exponent::new(3.0).unwrap();
        assert_eq!(p.conjugate::<f64>(), 1.5);
        assert_eq!(p.conjugate_minus_one::<f64>(), 0.5);
        let p = Exponent::new(2.5).unwrap();
        assert_eq!(p.conjugate_minus_one::<f64>(), 2.0 / 3.0);
        assert!(Exponent::new(1.0).is_err());
    }

    #[test]
    fn lorentzian_lipschitz_matches_sampled_derivative() {
        let f = ReactionFn::Lorentzian { c: 1.0 };
        let sampled = (0..20001)
            .map(|i| f.derivative(-5.0 + i as f64 * 5e-4).abs())
            .fold(0.0, f64::max);
        assert!((sampled - f.lipschitz()).abs() < 1e-6);
    }
}
