use ccbm::mesh::{build_rect_mesh, signed_area, InclusionSpec, Rect, VectorField};
use proptest::prelude::*;

fn rect() -> impl Strategy<Value = Rect> {
    (-2.0..2.0f64, 0.1..3.0f64, -2.0..2.0f64, 0.1..3.0f64).prop_map(|(x, w, y, h)| Rect::new(x, x + w, y, y + h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structured_mesh_invariants(nx in 1usize..14, ny in 1usize..14, r in rect()) {
        let m = build_rect_mesh(nx, ny, r).unwrap();
        prop_assert_eq!(m.num_vertices(), (nx + 1) * (ny + 1));
        prop_assert_eq!(m.num_triangles(), 2 * nx * ny);
        for t in m.triangles() {
            prop_assert!(t.iter().all(|&v| v < m.num_vertices()));
            prop_assert!(signed_area(m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]) > 0.0);
        }
        prop_assert!((m.total_area() - r.area()).abs() <= 1e-12 * r.area());
        let edges = m.boundary_edges();
        prop_assert_eq!(edges.len(), 2 * (nx + ny));
        for (k, e) in edges.iter().enumerate() {
            prop_assert_eq!(e.vertices[1], edges[(k + 1) % edges.len()].vertices[0]);
        }
        let len: f64 = edges.iter().map(|e| {
            let (p, q) = (m.vertices()[e.vertices[0]], m.vertices()[e.vertices[1]]);
            (q[0] - p[0]).hypot(q[1] - p[1])
        }).sum();
        prop_assert!((len - r.perimeter()).abs() <= 1e-12 * r.perimeter());
    }

    #[test]
    fn zero_field_deformation_is_identity(n in 1usize..10, t in 0.0..10.0f64) {
        let m = build_rect_mesh(n, n, Rect::centered_unit()).unwrap();
        let d = m.deform(&VectorField::zeros(m.num_vertices()), t).unwrap();
        prop_assert_eq!(d.vertices(), m.vertices());
    }

    #[test]
    fn mark_region_is_idempotent(cx in -0.2..0.2f64, cy in -0.2..0.2f64, r in 0.05..0.25f64) {
        let m = build_rect_mesh(16, 16, Rect::centered_unit()).unwrap();
        let spec = InclusionSpec::disc([cx, cy], r, 10.0, &m.bounds()).unwrap();
        let (a, _) = m.mark_region(&spec);
        let (b, _) = a.mark_region(&spec);
        prop_assert_eq!(a.element_region(), b.element_region());
    }
}

#[test]
fn reference_mesh_counts() {
    let m = build_rect_mesh(100, 100, Rect::centered_unit()).unwrap();
    assert_eq!((m.num_vertices(), m.num_triangles()), (10201, 20000));
    let minimal = build_rect_mesh(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
    assert_eq!((minimal.num_triangles(), minimal.boundary_edges().len()), (2, 4));
}

#[test]
fn tagged_disc_area_close_to_analytic() {
    let m = build_rect_mesh(100, 100, Rect::centered_unit()).unwrap();
    let spec = InclusionSpec::disc([0.0, 0.0], 0.1, 10.0, &m.bounds()).unwrap();
    let a = m.mark_region(&spec).0.tagged_area();
    let exact = std::f64::consts::PI * 0.01;
    assert!((a - exact).abs() <= 0.05 * exact, "tagged area {a}");
}

#[test]
fn shear_lowers_quality() {
    let m = build_rect_mesh(10, 10, Rect::centered_unit()).unwrap();
    let bump = |p: [f64; 2]| (std::f64::consts::PI * p[0]).cos() * (std::f64::consts::PI * p[1]).cos();
    let shear = VectorField::from_fn(&m, |p| [p[1] * bump(p), 0.0]);
    let q0 = m.min_triangle_quality();
    assert!(m.deform(&shear, 0.2).unwrap().min_triangle_quality() < q0);
}
