//! Gauss–Legendre rules and the dyadic composite integrator used for profile
//! averages and the exact-geometry integrals of the verifiers.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Rule with `n` points, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let (x, w) = legendre_nodes_f64(n);
        GaussLegendre {
            nodes: x.into_iter().map(T::lit).collect(),
            weights: w.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule on `[a, b]` split into `panels` equal pieces.
    pub fn composite<F: FnMut(T) -> T>(&self, a: T, b: T, panels: usize, mut f: F) -> T {
        let h = (b - a) / T::from_usize_lossy(panels);
        let mut acc = T::zero();
        for k in 0..panels {
            let lo = a + h * T::from_usize_lossy(k);
            acc = acc + self.integrate(lo, lo + h, &mut f);
        }
        acc
    }

    /// Composite nodes/weights over `[a, b]` with `panels` equal pieces.
    pub fn composite_points(&self, a: T, b: T, panels: usize) -> Vec<(T, T)> {
        let h = (b - a) / T::from_usize_lossy(panels);
        let mut out = Vec::with_capacity(panels * self.len());
        for k in 0..panels {
            let lo = a + h * T::from_usize_lossy(k);
            out.extend(self.on_interval(lo, lo + h));
        }
        out
    }
}

fn legendre_nodes_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Integrates `f` over `[a, b]` split at `breaks` (sorted, inside `(a, b)`),
/// doubling the number of 5-point Gauss–Legendre panels per piece until the
/// relative change drops below `rel_tol`.
pub fn integrate_dyadic<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    breaks: &[T],
    rel_tol: T,
) -> Result<T> {
    let rule = GaussLegendre::<T>::new(5);
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    pts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    pts.push(b);
    let eval = |panels: usize| -> T {
        pts.windows(2)
            .map(|w| rule.composite(w[0], w[1], panels, &f))
            .sum()
    };
    let mut panels = 2usize;
    let mut prev = eval(panels);
    if !prev.is_finite() {
        return Err(Error::InvalidProfile("non-finite integrand".into()));
    }
    let floor = T::epsilon() * T::lit(64.0);
    for _ in 0..18 {
        panels *= 2;
        let cur = eval(panels);
        if !cur.is_finite() {
            return Err(Error::InvalidProfile("non-finite integrand".into()));
        }
        let diff = (cur - prev).abs();
        if diff <= rel_tol * cur.abs() || diff <= floor * (cur.abs() + T::one()) {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_exact_for_degree_2n_minus_1() {
        for n in 1..8 {
            let rule = GaussLegendre::<f64>::new(n);
            let deg = 2 * n - 1;
            let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let rule = GaussLegendre::<f64>::new(16);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dyadic_handles_kinks() {
        let f = |x: f64| (x - 0.3).abs();
        let got = integrate_dyadic(f, 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((got - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn f32_rule_works() {
        let rule = GaussLegendre::<f32>::new(5);
        let got = rule.integrate(0.0f32, 2.0, |x| x * x);
        assert!((got - 8.0 / 3.0).abs() < 1e-5);
    }
}
