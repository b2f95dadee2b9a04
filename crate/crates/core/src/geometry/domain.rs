//! The thin domain `R^eps = {0 < x < 1, 0 < y < eps g(x/eps^alpha)}` and its
//! concentration strip of thickness `eps^(1+gamma) h(x/eps^beta)` under the top
//! boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{Exponent, ReactionFn, SourceFn};
use crate::geometry::profile::PeriodicProfile;
use crate::quadrature::integrate_dyadic;
use crate::scalar::Real;

/// What drives the concentrated right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    None,
    /// `f^eps(x, y) = f(x)`
    XDependent { f: SourceFn },
    /// Semilinear reaction `f(u)`.
    Reaction { f: ReactionFn },
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingSpec::Reaction { f } => f.validate(),
            _ => Ok(()),
        }
    }
}

/// Integer split of `(0, 1)` into whole periods `I` and the leftover `Lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicSplit<T> {
    /// Scaled period (`eps^alpha L_g` or `eps^beta L_h`).
    pub period: T,
    /// Number of whole periods in `I` (that is `N + 1`).
    pub n_cells: usize,
    /// Left end of `Lambda`; equals 1 when `Lambda` is empty.
    pub lambda_start: T,
}

impl<T: Real> PeriodicSplit<T> {
    pub fn new(period: T) -> Self {
        let inv = (T::one() / period).floor();
        let mut n = inv.to_usize().unwrap_or(0);
        let tol = T::lit(1e-12);
        if T::from_usize_lossy(n + 1) * period <= T::one() + tol {
            n += 1;
        }
        while n > 0 && T::from_usize_lossy(n) * period > T::one() + tol {
            n -= 1;
        }
        let mut lambda_start = T::from_usize_lossy(n) * period;
        if T::one() - lambda_start <= tol {
            lambda_start = T::one();
        }
        PeriodicSplit { period, n_cells: n, lambda_start }
    }

    pub fn lambda_len(&self) -> T {
        T::one() - self.lambda_start
    }

    pub fn has_lambda(&self) -> bool {
        self.lambda_start < T::one()
    }

    /// Start of cell `k`.
    pub fn cell_start(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.period
    }

    /// Index of the whole period containing `x`, or `None` on `Lambda`.
    pub fn cell_of(&self, x: T) -> Option<usize> {
        if x >= self.lambda_start || x < T::zero() {
            return None;
        }
        let k = (x / self.period).floor().to_usize().unwrap_or(0);
        Some(k.min(self.n_cells.saturating_sub(1)))
    }
}

#[derive(Debug, Clone)]
pub struct ThinDomainSpec<T> {
    pub epsilon: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub g: PeriodicProfile<T>,
    pub h: PeriodicProfile<T>,
    pub p: Exponent,
    pub forcing: ForcingSpec,
}

impl<T: Real> ThinDomainSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        epsilon: T,
        alpha: T,
        beta: T,
        gamma: T,
        g: PeriodicProfile<T>,
        h: PeriodicProfile<T>,
        p: Exponent,
        forcing: ForcingSpec,
    ) -> Result<Self> {
        let spec = ThinDomainSpec { epsilon, alpha, beta, gamma, g, h, p, forcing };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !pos(self.epsilon) || !pos(self.alpha) || !pos(self.beta) || !pos(self.gamma) {
            return Err(Error::InvalidSpec("epsilon, alpha, beta, gamma must be positive".into()));
        }
        if self.beta >= self.alpha {
            return Err(Error::InvalidSpec(format!(
                "need 0 < beta < alpha (beta = {}, alpha = {})",
                self.beta, self.alpha
            )));
        }
        let reach = self.epsilon.powf(self.gamma) * self.h.max_value();
        let limit = T::lit(0.9) * self.g.min_value();
        if reach > limit {
            return Err(Error::Geometry(format!(
                "strip leaves the domain: eps^gamma h1 = {reach} exceeds 0.9 g0 = {limit}"
            )));
        }
        self.forcing.validate()
    }

    pub fn p_value(&self) -> T {
        self.p.value()
    }

    /// `eps^alpha L_g`.
    pub fn cell_length(&self) -> T {
        self.epsilon.powf(self.alpha) * self.g.period()
    }

    /// `eps^beta L_h`.
    pub fn strip_period(&self) -> T {
        self.epsilon.powf(self.beta) * self.h.period()
    }

    pub fn g_split(&self) -> PeriodicSplit<T> {
        PeriodicSplit::new(self.cell_length())
    }

    pub fn h_split(&self) -> PeriodicSplit<T> {
        PeriodicSplit::new(self.strip_period())
    }

    /// `eps^gamma`
    pub fn eps_gamma(&self) -> T {
        self.epsilon.powf(self.gamma)
    }

    pub fn g_at(&self, x: T) -> T {
        self.g.eval(x / self.epsilon.powf(self.alpha))
    }

    pub fn h_at(&self, x: T) -> T {
        self.h.eval(x / self.epsilon.powf(self.beta))
    }

    /// `eps g(x / eps^alpha)`
    pub fn top(&self, x: T) -> T {
        self.epsilon * self.g_at(x)
    }

    /// `eps (g(x/eps^alpha) - eps^gamma h(x/eps^beta))`
    pub fn interface(&self, x: T) -> T {
        self.epsilon * (self.g_at(x) - self.eps_gamma() * self.h_at(x))
    }

    pub fn strip_thickness(&self, x: T) -> T {
        self.epsilon * self.eps_gamma() * self.h_at(x)
    }

    /// Breakpoints in `(0, 1)` where the profiles are not smooth or the
    /// periodic cells start.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut pts = Vec::new();
        let gs = self.g_split();
        let hs = self.h_split();
        let ea = self.epsilon.powf(self.alpha);
        let eb = self.epsilon.powf(self.beta);
        // a constant profile has no oscillation to align with
        if !self.g.is_constant() {
            push_periodic(&mut pts, gs.period, &self.g.kinks(), ea);
        }
        if !self.h.is_constant() {
            push_periodic(&mut pts, hs.period, &self.h.kinks(), eb);
        }
        pts.push(gs.lambda_start);
        pts.push(hs.lambda_start);
        clean_points(pts)
    }

    /// `|R^eps| = eps int_0^1 g(x/eps^alpha) dx`.
    pub fn domain_area(&self) -> Result<T> {
        let bp = self.breakpoints();
        let v = integrate_dyadic(|x| self.top(x), T::zero(), T::one(), &bp, T::lit(1e-12))?;
        Ok(v)
    }

    /// `|O^eps| = eps^(1+gamma) int_0^1 h(x/eps^beta) dx`.
    pub fn strip_area(&self) -> Result<T> {
        let bp = self.breakpoints();
        integrate_dyadic(|x| self.strip_thickness(x), T::zero(), T::one(), &bp, T::lit(1e-12))
    }
}

fn push_periodic<T: Real>(pts: &mut Vec<T>, period: T, kinks: &[T], scale: T) {
    let mut k = 0usize;
    loop {
        let base = T::from_usize_lossy(k) * period;
        if base >= T::one() {
            break;
        }
        if k > 0 {
            pts.push(base);
        }
        for &q in kinks {
            let x = base + q * scale;
            if x < T::one() {
                pts.push(x);
            }
        }
        k += 1;
    }
}

/// Sorts, removes near-duplicates and drops points outside `(0, 1)`.
pub(crate) fn clean_points<T: Real>(mut pts: Vec<T>) -> Vec<T> {
    let tol = T::lit(1e-12);
    pts.retain(|&x| x > tol && x < T::one() - tol);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for x in pts {
        if out.last().map_or(true, |&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eps: f64) -> ThinDomainSpec<f64> {
        ThinDomainSpec::new(
            eps,
            1.0,
            0.5,
            1.0,
            PeriodicProfile::cosine(2.0, 1.0, 1.0).unwrap(),
            PeriodicProfile::constant(1.0).unwrap(),
            Exponent::new(2.0).unwrap(),
            ForcingSpec::None,
        )
        .unwrap()
    }

    #[test]
    fn split_is_exact_for_dyadic_cells() {
        let s = PeriodicSplit::new(1.0f64 / 32.0);
        assert_eq!(s.n_cells, 32);
        assert!(!s.has_lambda());
        let s = PeriodicSplit::new(0.3);
        assert_eq!(s.n_cells, 3);
        assert!((s.lambda_len() - 0.1f64).abs() < 1e-12);
        assert!(s.lambda_len() < s.period);
        assert_eq!(s.cell_of(0.95), None);
        assert_eq!(s.cell_of(0.61), Some(2));
    }

    #[test]
    fn guards() {
        let g = PeriodicProfile::<f64>::constant(1.0).unwrap();
        let h = PeriodicProfile::<f64>::constant(1.0).unwrap();
        let p = Exponent::new(2.0).unwrap();
        assert!(ThinDomainSpec::new(0.1, 1.0, 1.0, 1.0, g.clone(), h.clone(), p, ForcingSpec::None).is_err());
        // eps^gamma h1 = 0.95 > 0.9 g0
        let err = ThinDomainSpec::new(0.95, 1.0, 0.5, 1.0, g, h, p, ForcingSpec::None).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn areas_match_periodic_averages() {
        let s = spec(1.0 / 16.0);
        assert!((s.domain_area().unwrap() - 2.0 / 16.0).abs() < 1e-12);
        assert!((s.strip_area().unwrap() - 1.0 / 256.0).abs() < 1e-14);
    }
}
