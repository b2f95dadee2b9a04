use thinpl_core::geometry::{build_cell_mesh, build_thin_mesh, profile_average, ForcingSpec, PeriodicProfile, ThinDomainSpec};
use thinpl_core::{Error, Exponent};

/// Composite Simpson on (a, b) with `n` (even) panels.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn spec(eps: f64, g: PeriodicProfile<f64>, h: PeriodicProfile<f64>) -> ThinDomainSpec<f64> {
    ThinDomainSpec::new(eps, 1.0, 0.5, 1.0, g, h, Exponent::new(2.0).unwrap(), ForcingSpec::None).unwrap()
}

fn cosine(a: f64, b: f64) -> PeriodicProfile<f64> {
    PeriodicProfile::cosine(a, b, 1.0).unwrap()
}

#[test]
fn profile_averages() {
    let c = PeriodicProfile::<f64>::constant(2.0).unwrap();
    assert!((profile_average(&c, 1.0).unwrap() - 2.0).abs() < 1e-14);
    let g = cosine(2.0, 1.0);
    assert!((profile_average(&g, 1.0).unwrap() - 2.0).abs() < 1e-12);
    assert!((profile_average(&g, -1.0).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-10);
    let oracle = simpson(0.0, 1.0, 20_000, |y| g.eval(y).powf(-0.5));
    assert!((profile_average(&g, -0.5).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn rectangle_area() {
    let s = spec(0.1, PeriodicProfile::constant(1.0).unwrap(), PeriodicProfile::constant(0.5).unwrap());
    let m = build_thin_mesh(&s, 0.02).unwrap();
    assert!((m.area() - 0.1).abs() < 1e-13, "area {}", m.area());
    assert!((m.strip_area() - 0.1 * 0.1 * 0.5).abs() < 1e-14);
    let xmax = m.vertices.iter().map(|v| v[0]).fold(0.0, f64::max);
    let ymax = m.vertices.iter().map(|v| v[1]).fold(0.0, f64::max);
    assert_eq!(xmax, 1.0);
    assert!((ymax - 0.1).abs() < 1e-15);
}

#[test]
fn oscillating_area_matches_quadrature() {
    let eps = 0.1;
    let s = spec(eps, cosine(2.0, 1.0), cosine(1.0, 0.5));
    let area = eps * simpson(0.0, 1.0, 200_000, |x| s.g.eval(x / eps));
    let mut prev = f64::INFINITY;
    for d in [8.0, 16.0, 32.0] {
        let m = build_thin_mesh(&s, eps / d).unwrap();
        let rel = (m.area() - area).abs() / area;
        assert!(rel < prev);
        prev = rel;
    }
    assert!(prev < 1e-5, "relative area gap {prev}");
}

#[test]
fn strip_area_matches_quadrature() {
    for &eps in &[0.125, 0.0625] {
        let s = spec(eps, cosine(2.0, 1.0), cosine(1.0, 0.5));
        let m = build_thin_mesh(&s, eps / 8.0).unwrap();
        let want = eps * eps * simpson(0.0, 1.0, 200_000, |x| s.h.eval(x / eps.sqrt()));
        let rel = (m.strip_area() - want).abs() / want;
        assert!(rel < 2e-3, "eps {eps}: relative strip area gap {rel}");
    }
}

#[test]
fn top_vertices_lie_on_the_boundary_and_tags_sit_in_the_strip() {
    let eps = 0.0625;
    let s = spec(eps, cosine(2.0, 1.0), cosine(1.0, 0.5));
    let m = build_thin_mesh(&s, eps / 8.0).unwrap();
    let lay = m.layout().unwrap();
    for (c, &x) in lay.xs.iter().enumerate() {
        let top = m.vertices[lay.vertex(c, lay.levels - 1)];
        assert!((top[1] - s.top(x)).abs() < 1e-12);
    }
    for (t, tri) in m.triangles.iter().enumerate() {
        for &v in tri {
            let [x, y] = m.vertices[v];
            if m.strip_tag[t] {
                assert!(y >= s.interface(x) - 1e-14);
            } else {
                assert!(y <= s.interface(x) + 1e-14);
            }
        }
    }
    // at least eight columns per oscillation period
    assert!(lay.xs.len() - 1 >= 8 * 16);
}

#[test]
fn coarse_thin_mesh_is_refused_with_a_hint() {
    let s = spec(0.1, cosine(2.0, 1.0), cosine(1.0, 0.5));
    match build_thin_mesh(&s, 0.5) {
        Err(Error::TooCoarse { required, .. }) => assert!(required > 0.0 && required < 0.1),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn unit_cell_square() {
    let g = PeriodicProfile::<f64>::constant(1.0).unwrap();
    let m = build_cell_mesh(&g, 0.1).unwrap();
    assert!((m.area() - 1.0).abs() < 1e-13);
    let lay = m.layout().unwrap();
    assert_eq!(lay.xs.len(), 11);
    assert!(lay.levels >= 11 && lay.levels <= 13);
    let pairs = m.periodic_pairs.as_ref().unwrap();
    assert_eq!(pairs.len(), lay.levels);
    for &(a, b) in pairs {
        let (va, vb) = (m.vertices[a], m.vertices[b]);
        assert_eq!(va[0], 0.0);
        assert_eq!(vb[0], 1.0);
        assert_eq!(va[1], vb[1]);
        assert_eq!(m.dof(a), m.dof(b));
    }
    assert_eq!(m.n_dofs(), m.n_vertices() - lay.levels);
}

#[test]
fn cosine_cell_area() {
    let g = cosine(2.0, 1.0);
    let mut prev = f64::INFINITY;
    for &h in &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let gap = (build_cell_mesh(&g, h).unwrap().area() - 2.0).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-4, "area gap {prev}");
}

#[test]
fn coarse_cell_mesh_is_refused() {
    let g = cosine(2.0, 1.0);
    assert!(matches!(build_cell_mesh(&g, 1.0), Err(Error::TooCoarse { .. })));
    assert!(matches!(build_cell_mesh(&g, 1.5), Err(Error::TooCoarse { .. })));
}
