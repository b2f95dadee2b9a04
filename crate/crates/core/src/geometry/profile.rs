//! Strictly positive periodic profiles `g` (top boundary) and `h` (strip
//! thickness).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_dyadic;
use crate::scalar::Real;

/// Shape of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileFamily {
    Constant { c: f64 },
    /// `a + b cos(2 pi k y / L)`
    Cosine { a: f64, b: f64, k: u32 },
    /// Linear interpolation of `values` at `breakpoints` (from 0 to the period).
    PiecewiseLinear { breakpoints: Vec<f64>, values: Vec<f64> },
}

/// Serializable description: the period plus the family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub period: f64,
    #[serde(flatten)]
    pub family: ProfileFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicProfile<T> {
    period: T,
    family: ProfileFamily,
    min_value: T,
    max_value: T,
}

impl<T: Real> PeriodicProfile<T> {
    pub fn new(period: f64, family: ProfileFamily) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidProfile(format!("period {period} must be positive")));
        }
        let (lo, hi) = match &family {
            ProfileFamily::Constant { c } => (*c, *c),
            ProfileFamily::Cosine { a, b, k } => {
                if *k == 0 {
                    return Err(Error::InvalidProfile("cosine wavenumber must be >= 1".into()));
                }
                if b.abs() >= *a {
                    return Err(Error::InvalidProfile(format!(
                        "cosine profile needs |b| < a (a = {a}, b = {b})"
                    )));
                }
                (a - b.abs(), a + b.abs())
            }
            ProfileFamily::PiecewiseLinear { breakpoints, values } => {
                if breakpoints.len() < 2 || breakpoints.len() != values.len() {
                    return Err(Error::InvalidProfile(
                        "piecewise-linear profile needs matching breakpoints/values (>= 2)".into(),
                    ));
                }
                if breakpoints[0] != 0.0 || (breakpoints[breakpoints.len() - 1] - period).abs() > 1e-12 * period {
                    return Err(Error::InvalidProfile("breakpoints must span [0, period]".into()));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidProfile("breakpoints must increase strictly".into()));
                }
                if values[0] != values[values.len() - 1] {
                    return Err(Error::InvalidProfile("first and last values must agree".into()));
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidProfile("non-finite profile values".into()));
        }
        if lo <= 0.0 {
            return Err(Error::InvalidProfile(format!("profile minimum {lo} must be > 0")));
        }
        Ok(PeriodicProfile {
            period: T::lit(period),
            family,
            min_value: T::lit(lo),
            max_value: T::lit(hi),
        })
    }

    pub fn from_config(cfg: &ProfileConfig) -> Result<Self> {
        Self::new(cfg.period, cfg.family.clone())
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(1.0, ProfileFamily::Constant { c })
    }

    /// `a + b cos(2 pi y / period)`.
    pub fn cosine(a: f64, b: f64, period: f64) -> Result<Self> {
        Self::new(period, ProfileFamily::Cosine { a, b, k: 1 })
    }

    pub fn piecewise_linear(period: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(period, ProfileFamily::PiecewiseLinear { breakpoints, values })
    }

    pub fn config(&self) -> ProfileConfig {
        ProfileConfig {
            period: self.period.to_f64_lossy(),
            family: self.family.clone(),
        }
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn family(&self) -> &ProfileFamily {
        &self.family
    }

    pub fn min_value(&self) -> T {
        self.min_value
    }

    pub fn max_value(&self) -> T {
        self.max_value
    }

    pub fn is_constant(&self) -> bool {
        self.min_value == self.max_value
    }

    /// Reduces `y` to `[0, period)`.
    fn wrap(&self, y: T) -> T {
        let r = y - (y / self.period).floor() * self.period;
        if r >= self.period || r < T::zero() {
            T::zero()
        } else {
            r
        }
    }

    pub fn eval(&self, y: T) -> T {
        match &self.family {
            ProfileFamily::Constant { c } => T::lit(*c),
            ProfileFamily::Cosine { a, b, k } => {
                let t = self.wrap(y) / self.period;
                T::lit(*a) + T::lit(*b) * (T::TAU() * T::lit(*k as f64) * t).cos()
            }
            ProfileFamily::PiecewiseLinear { breakpoints, values } => {
                let t = self.wrap(y);
                let j = segment_index(breakpoints, t.to_f64_lossy());
                let (x0, x1) = (T::lit(breakpoints[j]), T::lit(breakpoints[j + 1]));
                let (v0, v1) = (T::lit(values[j]), T::lit(values[j + 1]));
                v0 + (v1 - v0) * (t - x0) / (x1 - x0)
            }
        }
    }

    /// Derivative (one-sided from the right at kinks).
    pub fn derivative(&self, y: T) -> T {
        match &self.family {
            ProfileFamily::Constant { .. } => T::zero(),
            ProfileFamily::Cosine { b, k, .. } => {
                let t = self.wrap(y) / self.period;
                let w = T::TAU() * T::lit(*k as f64) / self.period;
                -T::lit(*b) * w * (w * self.period * t).sin()
            }
            ProfileFamily::PiecewiseLinear { breakpoints, values } => {
                let t = self.wrap(y);
                let j = segment_index(breakpoints, t.to_f64_lossy());
                T::lit((values[j + 1] - values[j]) / (breakpoints[j + 1] - breakpoints[j]))
            }
        }
    }

    /// Exact Lipschitz constant of the family.
    pub fn lipschitz(&self) -> T {
        match &self.family {
            ProfileFamily::Constant { .. } => T::zero(),
            ProfileFamily::Cosine { b, k, .. } => {
                T::lit(b.abs()) * T::TAU() * T::lit(*k as f64) / self.period
            }
            ProfileFamily::PiecewiseLinear { breakpoints, values } => T::lit(
                breakpoints
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
                    .fold(0.0, f64::max),
            ),
        }
    }

    /// Interior kink locations within one period, `(0, period)`.
    pub fn kinks(&self) -> Vec<T> {
        match &self.family {
            ProfileFamily::PiecewiseLinear { breakpoints, .. } => breakpoints[1..breakpoints.len() - 1]
                .iter()
                .map(|&b| T::lit(b))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether `g(L - y) = g(y)`.
    pub fn is_even(&self) -> bool {
        match &self.family {
            ProfileFamily::Constant { .. } | ProfileFamily::Cosine { .. } => true,
            ProfileFamily::PiecewiseLinear { breakpoints, values } => {
                let n = breakpoints.len();
                (0..n).all(|i| {
                    let j = n - 1 - i;
                    (breakpoints[i] + breakpoints[j] - self.period.to_f64_lossy()).abs() < 1e-12
                        && values[i] == values[j]
                })
            }
        }
    }

    /// `(1/L) int_0^L profile(y)^exponent dy`.
    pub fn average(&self, exponent: T) -> Result<T> {
        profile_average(self, exponent)
    }
}

fn segment_index(breakpoints: &[f64], t: f64) -> usize {
    let n = breakpoints.len();
    match breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

/// Average of `profile^exponent` over one period, by composite 5-point
/// Gauss–Legendre with dyadic refinement to relative change `1e-10`.
pub fn profile_average<T: Real>(profile: &PeriodicProfile<T>, exponent: T) -> Result<T> {
    if profile.is_constant() {
        return Ok(profile.min_value.powf(exponent));
    }
    let l = profile.period;
    let kinks = profile.kinks();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0));
    let integral = integrate_dyadic(|y| profile.eval(y).powf(exponent), T::zero(), l, &kinks, tol)?;
    let avg = integral / l;
    if !avg.is_finite() {
        return Err(Error::InvalidProfile("non-finite profile average".into()));
    }
    Ok(avg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        let c = PeriodicProfile::<f64>::constant(2.0).unwrap();
        assert_eq!(profile_average(&c, 1.0).unwrap(), 2.0);
        let g = PeriodicProfile::<f64>::cosine(2.0, 1.0, 1.0).unwrap();
        assert!((profile_average(&g, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // closed form 1/sqrt(a^2 - b^2)
        let inv = profile_average(&g, -1.0).unwrap();
        assert!((inv - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        assert!((inv - 0.5773502692).abs() < 1e-10);
    }

    #[test]
    fn cosine_extrema_and_positivity() {
        let g = PeriodicProfile::<f64>::cosine(2.0, -1.0, 0.5).unwrap();
        assert_eq!(g.min_value(), 1.0);
        assert_eq!(g.max_value(), 3.0);
        assert!(PeriodicProfile::<f64>::cosine(1.0, 1.0, 1.0).is_err());
        assert!(PeriodicProfile::<f64>::constant(0.0).is_err());
    }

    #[test]
    fn periodicity_to_machine_precision() {
        let g = PeriodicProfile::<f64>::cosine(2.0, 1.0, 0.7).unwrap();
        for i in 0..50 {
            let y = -3.0 + i as f64 * 0.137;
            assert!((g.eval(y) - g.eval(y + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn sawtooth_average_and_lipschitz() {
        let s = PeriodicProfile::<f64>::piecewise_linear(1.0, vec![0.0, 0.5, 1.0], vec![1.0, 3.0, 1.0]).unwrap();
        assert!((profile_average(&s, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(s.lipschitz(), 4.0);
        assert!(s.is_even());
        assert_eq!(s.eval(0.25), 2.0);
        assert_eq!(s.eval(1.25), 2.0);
    }

    #[test]
    fn lipschitz_bounds_sampled_slopes() {
        let g = PeriodicProfile::<f64>::cosine(2.0, 0.5, 0.3).unwrap();
        let lip = g.lipschitz();
        for i in 0..1000 {
            let y = i as f64 * 1e-3;
            assert!(g.derivative(y).abs() <= lip * (1.0 + 1e-12));
        }
    }
}
