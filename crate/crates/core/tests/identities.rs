use std::sync::Arc;

use thinpl_core::concentration::verify_concentration_identity;
use thinpl_core::geometry::{build_thin_mesh, ForcingSpec, PeriodicProfile, ThinDomainSpec};
use thinpl_core::unfolding::{
    norm_identity, strip_test_function_error, unfold, unfold_strip, verify_iteration, ComposedField, SmoothField,
    StripUnfoldGrid, UnfoldGrid,
};
use thinpl_core::{Exponent, Field, ReactionFn};

fn cosine_spec(eps: f64) -> ThinDomainSpec<f64> {
    ThinDomainSpec::new(
        eps,
        1.0,
        0.5,
        1.0,
        PeriodicProfile::cosine(2.0, 1.0, 1.0).unwrap(),
        PeriodicProfile::cosine(1.0, 0.5, 1.0).unwrap(),
        Exponent::new(2.0).unwrap(),
        ForcingSpec::None,
    )
    .unwrap()
}

fn smooth() -> SmoothField<impl Fn(f64, f64) -> f64 + Sync, impl Fn(f64, f64) -> [f64; 2] + Sync> {
    SmoothField::new(
        |x: f64, y: f64| (1.0 + x * x) * (std::f64::consts::PI * x).cos() + 3.0 * y + 0.5,
        |x: f64, _y: f64| {
            let pi = std::f64::consts::PI;
            [2.0 * x * (pi * x).cos() - (1.0 + x * x) * pi * (pi * x).sin(), 3.0]
        },
    )
}

#[test]
fn first_unfolding_identity_is_exact_for_smooth_fields() {
    let spec = cosine_spec(1.0 / 32.0);
    let mesh = build_thin_mesh(&spec, spec.epsilon / 12.0).unwrap();
    let r = verify_concentration_identity(&mesh, &spec, &smooth(), 64).unwrap();
    eprintln!("{r:?}");
    assert!(r.relative < 1e-4);
}

#[test]
fn mis_tagged_strip_fails_the_identity() {
    let spec = cosine_spec(1.0 / 32.0);
    let mut mesh = build_thin_mesh(&spec, spec.epsilon / 12.0).unwrap();
    let mut tags = mesh.strip_tag.clone();
    let first = tags.iter().position(|&t| t).unwrap();
    // shift the strip down by one layer in every column
    for t in tags.iter_mut().skip(first.saturating_sub(2)).step_by(7) {
        *t = !*t;
    }
    mesh.set_strip_tags(tags).unwrap();
    let r = verify_concentration_identity(&mesh, &spec, &smooth(), 64).unwrap();
    eprintln!("{r:?}");
    assert!(r.relative > 1e-2);
}

#[test]
fn iterated_identity_with_depth_gap() {
    let spec = cosine_spec(1.0 / 32.0);
    let grid = StripUnfoldGrid::new(&spec, 64).unwrap();
    let r = verify_iteration(&smooth(), &grid).unwrap();
    eprintln!("{r:?}");
    assert!(r.relative < 1e-4);
}

#[test]
fn norm_identity_holds_for_fem_fields() {
    let spec = cosine_spec(1.0 / 32.0);
    let mesh = Arc::new(build_thin_mesh(&spec, spec.epsilon / 12.0).unwrap());
    let f = Field::interpolate(mesh, |x, y| (3.0 * x).sin() + 40.0 * y + 0.2);
    let grid = UnfoldGrid::standard(&spec).unwrap();
    for p in [2.0, 3.0] {
        let r = norm_identity(&f, &grid, p).unwrap();
        eprintln!("{r:?}");
        assert!(r.relative < 1e-2);
    }
}

#[test]
fn unfolding_is_linear_and_commutes_with_reactions() {
    let spec = cosine_spec(1.0 / 16.0);
    let mesh = Arc::new(build_thin_mesh(&spec, spec.epsilon / 8.0).unwrap());
    let u = Field::interpolate(mesh.clone(), |x, y| x.sin() + 10.0 * y);
    let v = Field::interpolate(mesh, |x, y| (2.0 * x).cos() * (1.0 + y));
    let grid = UnfoldGrid::new(&spec, 16, 4).unwrap();
    let w = u.combine(2.0, &v, -0.5).unwrap();
    let (tu, tv, tw) = (unfold(&u, &grid).unwrap(), unfold(&v, &grid).unwrap(), unfold(&w, &grid).unwrap());
    for i in 0..tw.values.len() {
        assert!((tw.values[i] - (2.0 * tu.values[i] - 0.5 * tv.values[i])).abs() < 1e-13);
    }
    let f = ReactionFn::Lorentzian { c: 1.0 };
    let comp = ComposedField { inner: &u, f: f.clone() };
    let sgrid = StripUnfoldGrid::new(&spec, 8).unwrap();
    let a = unfold_strip(&comp, &sgrid).unwrap();
    let b = unfold_strip(&u, &sgrid).unwrap();
    for (ra, rb) in a.values.iter().zip(&b.values) {
        for (x, y) in ra.iter().zip(rb) {
            assert_eq!(*x, f.eval(*y));
        }
    }
}

#[test]
fn strip_unfolding_of_test_functions_converges() {
    let mut prev = f64::INFINITY;
    // eps = 4^-k keeps both splits free of leftovers, so the sequence is monotone
    for k in 1..=5 {
        let spec = cosine_spec(0.25f64.powi(k));
        let grid = StripUnfoldGrid::new(&spec, 16).unwrap();
        let e = strip_test_function_error(|x: f64| (std::f64::consts::PI * x).cos(), &grid, 2.0);
        eprintln!("eps=4^-{k} err={e}");
        assert!(e < prev);
        prev = e;
    }
}
