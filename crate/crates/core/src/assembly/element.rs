//! Reference-element basis functions, quadrature and local matrices.

use super::dofs::Degree;
use crate::mesh::{signed_area, InclusionSpec, Overlap};

/// Barycentric points and weights (weights sum to one).
struct Rule {
    points: &'static [[f64; 3]],
    weights: &'static [f64],
}

const A6: f64 = 0.445_948_490_915_965;
const B6: f64 = 0.091_576_213_509_771;
const W6A: f64 = 0.223_381_589_678_011;
const W6B: f64 = 0.109_951_743_655_322;

// Degree-4 six-point rule: exact for P2 × P2 products.
static SIX_POINT: Rule = Rule {
    points: &[
        [A6, A6, 1.0 - 2.0 * A6],
        [A6, 1.0 - 2.0 * A6, A6],
        [1.0 - 2.0 * A6, A6, A6],
        [B6, B6, 1.0 - 2.0 * B6],
        [B6, 1.0 - 2.0 * B6, B6],
        [1.0 - 2.0 * B6, B6, B6],
    ],
    weights: &[W6A, W6A, W6A, W6B, W6B, W6B],
};

// Degree-2 three-point rule: exact for P1 × P1 products.
static THREE_POINT: Rule = Rule {
    points: &[
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ],
    weights: &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
};

fn rule(degree: Degree) -> &'static Rule {
    match degree {
        Degree::P1 => &THREE_POINT,
        Degree::P2 => &SIX_POINT,
    }
}

/// Basis values at barycentric point `l`; P2 ordering is vertices then the
/// midpoints of edges 01, 12, 20.
pub fn basis_values(degree: Degree, l: [f64; 3]) -> [f64; 6] {
    match degree {
        Degree::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        Degree::P2 => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

fn basis_gradients(degree: Degree, l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    match degree {
        Degree::P1 => {
            g[..3].copy_from_slice(gl);
        }
        Degree::P2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                g[i] = [s * gl[i][0], s * gl[i][1]];
            }
            for (m, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                g[3 + m] = [
                    4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]),
                    4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1]),
                ];
            }
        }
    }
    g
}

/// Gradients of the barycentric coordinates and the triangle area.
fn barycentric_gradients(c: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(c[0], c[1], c[2]);
    let inv = 1.0 / (2.0 * area);
    (
        [
            [(c[1][1] - c[2][1]) * inv, (c[2][0] - c[1][0]) * inv],
            [(c[2][1] - c[0][1]) * inv, (c[0][0] - c[2][0]) * inv],
            [(c[0][1] - c[1][1]) * inv, (c[1][0] - c[0][0]) * inv],
        ],
        area,
    )
}

pub type Local = [[f64; 6]; 6];

pub fn stiffness(degree: Degree, c: &[[f64; 2]; 3]) -> Local {
    let (gl, area) = barycentric_gradients(c);
    let n = degree.local_dofs();
    let r = rule(degree);
    let mut k = [[0.0; 6]; 6];
    for (l, w) in r.points.iter().zip(r.weights) {
        let g = basis_gradients(degree, *l, &gl);
        for i in 0..n {
            for j in 0..n {
                k[i][j] += w * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    k
}

pub fn mass(degree: Degree, c: &[[f64; 2]; 3]) -> Local {
    let area = signed_area(c[0], c[1], c[2]);
    let mut m = [[0.0; 6]; 6];
    add_mass_on_subtriangle(degree, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], area, &mut m, None);
    m
}

/// Adds `∫_S φ_i φ_j` over the sub-triangle `S` with barycentric corners
/// `sub` (relative to the parent) and physical area `sub_area`. When
/// `indicator` is given, quadrature points outside it are dropped.
fn add_mass_on_subtriangle(
    degree: Degree,
    sub: &[[f64; 3]; 3],
    sub_area: f64,
    m: &mut Local,
    indicator: Option<&dyn Fn([f64; 3]) -> bool>,
) {
    let n = degree.local_dofs();
    for (q, w) in SIX_POINT.points.iter().zip(SIX_POINT.weights) {
        let l = [
            q[0] * sub[0][0] + q[1] * sub[1][0] + q[2] * sub[2][0],
            q[0] * sub[0][1] + q[1] * sub[1][1] + q[2] * sub[2][1],
            q[0] * sub[0][2] + q[1] * sub[1][2] + q[2] * sub[2][2],
        ];
        if let Some(ind) = indicator {
            if !ind(l) {
                continue;
            }
        }
        let phi = basis_values(degree, l);
        for i in 0..n {
            for j in 0..n {
                m[i][j] += w * sub_area * phi[i] * phi[j];
            }
        }
    }
}

/// Maximum bisection depth for triangles cut by a region boundary.
const SUBCELL_DEPTH: u32 = 9;

/// `∫_{T ∩ ω} φ_i φ_j` by adaptive 4-way subdivision of the triangles that
/// straddle ∂ω.
pub fn region_mass(degree: Degree, c: &[[f64; 2]; 3], region: &InclusionSpec) -> Option<Local> {
    match region.classify(c) {
        Overlap::Outside => None,
        Overlap::Inside => Some(mass(degree, c)),
        Overlap::Cut => {
            let mut m = [[0.0; 6]; 6];
            let area = signed_area(c[0], c[1], c[2]);
            let root = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            subdivide(degree, c, region, &root, area, 0, &mut m);
            Some(m)
        }
    }
}

fn to_physical(c: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
        l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
    ]
}

fn subdivide(
    degree: Degree,
    c: &[[f64; 2]; 3],
    region: &InclusionSpec,
    sub: &[[f64; 3]; 3],
    sub_area: f64,
    depth: u32,
    m: &mut Local,
) {
    let phys = [to_physical(c, sub[0]), to_physical(c, sub[1]), to_physical(c, sub[2])];
    match region.classify(&phys) {
        Overlap::Outside => {}
        Overlap::Inside => add_mass_on_subtriangle(degree, sub, sub_area, m, None),
        Overlap::Cut if depth >= SUBCELL_DEPTH => {
            let ind = |l: [f64; 3]| region.contains(to_physical(c, l));
            add_mass_on_subtriangle(degree, sub, sub_area, m, Some(&ind));
        }
        Overlap::Cut => {
            let mid = |a: [f64; 3], b: [f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            let m01 = mid(sub[0], sub[1]);
            let m12 = mid(sub[1], sub[2]);
            let m20 = mid(sub[2], sub[0]);
            let quarter = 0.25 * sub_area;
            for child in [[sub[0], m01, m20], [m01, sub[1], m12], [m20, m12, sub[2]], [m01, m12, m20]] {
                subdivide(degree, c, region, &child, quarter, depth + 1, m);
            }
        }
    }
}

/// Boundary mass of one facet: P1 `[a, b]`, P2 `[a, b, midpoint]`.
pub fn facet_mass(degree: Degree, length: f64) -> [[f64; 3]; 3] {
    match degree {
        Degree::P1 => {
            let s = length / 6.0;
            [[2.0 * s, s, 0.0], [s, 2.0 * s, 0.0], [0.0, 0.0, 0.0]]
        }
        Degree::P2 => {
            let s = length / 30.0;
            [[4.0 * s, -s, 2.0 * s], [-s, 4.0 * s, 2.0 * s], [2.0 * s, 2.0 * s, 16.0 * s]]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Primitive, Rect};

    const TRI: [[f64; 2]; 3] = [[0.1, -0.2], [0.9, 0.1], [0.3, 0.7]];

    fn total(m: &Local, n: usize) -> f64 {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[i][j]).sum()
    }

    #[test]
    fn partition_of_unity() {
        let area = signed_area(TRI[0], TRI[1], TRI[2]);
        for d in [Degree::P1, Degree::P2] {
            let n = d.local_dofs();
            assert!((total(&mass(d, &TRI), n) - area).abs() < 1e-14);
            let k = stiffness(d, &TRI);
            for row in k.iter().take(n) {
                assert!(row[..n].iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p1_mass_closed_form() {
        let area = signed_area(TRI[0], TRI[1], TRI[2]);
        let m = mass(Degree::P1, &TRI);
        assert!((m[0][0] - area / 6.0).abs() < 1e-15);
        assert!((m[0][1] - area / 12.0).abs() < 1e-15);
    }

    #[test]
    fn p2_stiffness_reproduces_quadratic_energy() {
        // u = x² has ∫|∇u|² = ∫ 4x²; P2 interpolation is exact.
        let d = Degree::P2;
        let mids = [[0, 1], [1, 2], [2, 0]];
        let mut pts = TRI.to_vec();
        for [a, b] in mids {
            pts.push([0.5 * (TRI[a][0] + TRI[b][0]), 0.5 * (TRI[a][1] + TRI[b][1])]);
        }
        let u: Vec<f64> = pts.iter().map(|p| p[0] * p[0]).collect();
        let k = stiffness(d, &TRI);
        let energy: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| u[i] * k[i][j] * u[j]).sum();
        // exact ∫ 4x² over the triangle via the vertex/midpoint formula for quadratics
        let area = signed_area(TRI[0], TRI[1], TRI[2]);
        let x2 = |p: [f64; 2]| 4.0 * p[0] * p[0];
        let exact = area / 3.0 * (x2(pts[3]) + x2(pts[4]) + x2(pts[5]));
        assert!((energy - exact).abs() < 1e-13);
    }

    #[test]
    fn region_mass_matches_disc_area() {
        let c = [[-0.05, -0.05], [0.05, -0.05], [0.0, 0.06]];
        let spec = InclusionSpec::new(
            vec![Primitive::Disc { center: [0.0, 0.0], radius: 0.02 }],
            1.0,
            &Rect::centered_unit(),
        )
        .unwrap();
        let m = region_mass(Degree::P1, &c, &spec).unwrap();
        let area = std::f64::consts::PI * 0.0004;
        assert!((total(&m, 3) - area).abs() < 1e-4 * area);
    }

    #[test]
    fn facet_mass_totals_length() {
        for d in [Degree::P1, Degree::P2] {
            let f = facet_mass(d, 0.3);
            let s: f64 = f.iter().flatten().sum();
            assert!((s - 0.3).abs() < 1e-15);
        }
    }
}
