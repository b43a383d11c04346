use std::sync::Arc;

use ccbm::assembly::{Degree, DofMap};
use ccbm::forward::{
    add_noise, generate_cauchy_data, perturb_boundary, restrict_data, transfer_trace, ForwardProblemSpec, GProfile,
    NoiseKind, NoiseModel,
};
use ccbm::mesh::{build_rect_mesh, InclusionSpec, Mesh, Rect};
use ccbm::Error;

fn unit(n: usize) -> Mesh {
    build_rect_mesh(n, n, Rect::centered_unit()).unwrap()
}

fn spec(n: usize, mu0: f64) -> ForwardProblemSpec {
    ForwardProblemSpec {
        truth: Some(InclusionSpec::disc([0.0, 0.0], 0.1, mu0, &Rect::centered_unit()).unwrap()),
        g_profile: GProfile::ConstantOne,
        fine_mesh: unit(n),
        degree: Degree::P2,
    }
}

fn value_at(points: &[[f64; 2]], values: &[f64], p: [f64; 2]) -> f64 {
    let k = points.iter().position(|q| (q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12).unwrap();
    values[k]
}

#[test]
fn centered_disc_trace_is_symmetric() {
    let (data, _) = generate_cauchy_data(&spec(40, 10.0)).unwrap();
    let scale = data.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (&p, &f) in data.points.iter().zip(&data.f) {
        for q in [[-p[0], p[1]], [p[0], -p[1]], [p[1], p[0]]] {
            assert!((value_at(&data.points, &data.f, q) - f).abs() <= 1e-8 * scale, "{p:?} vs {q:?}");
        }
    }
}

#[test]
fn stronger_sink_lowers_mean_potential() {
    let means: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|&mu0| {
            let (data, _) = generate_cauchy_data(&spec(20, mu0)).unwrap();
            data.f.iter().sum::<f64>() / data.len() as f64
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn missing_truth_is_rejected() {
    let s = ForwardProblemSpec { truth: None, ..spec(8, 10.0) };
    assert!(matches!(generate_cauchy_data(&s), Err(Error::EmptyInclusion)));
}

#[test]
fn multiplicative_noise_is_reproducible_and_unbiased() {
    let (_, sol) = generate_cauchy_data(&spec(10, 10.0)).unwrap();
    let model = NoiseModel::new(NoiseKind::MultiplicativeField, 0.1, 7).unwrap();
    assert_eq!(add_noise(&sol.u, &model, 0).unwrap(), add_noise(&sol.u, &model, 0).unwrap());
    let sd = sol.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n_seeds = 200;
    let probes = [0, 17, sol.u.len() / 2, sol.u.len() - 1];
    let mut sums = vec![0.0; probes.len()];
    for seed in 0..n_seeds {
        let m = NoiseModel { seed, ..model };
        let noisy = add_noise(&sol.u, &m, 0).unwrap();
        for (s, &k) in sums.iter_mut().zip(&probes) {
            *s += noisy[k];
        }
    }
    for (s, &k) in sums.iter().zip(&probes) {
        let mean = s / n_seeds as f64;
        let se = 0.1 * sd * sol.u[k].abs() / (n_seeds as f64).sqrt();
        assert!((mean - sol.u[k]).abs() <= 2.0 * se, "node {k}");
    }
}

#[test]
fn boundary_noise_norm_concentrates() {
    let (data, sol) = generate_cauchy_data(&spec(10, 10.0)).unwrap();
    let b = ccbm::assembly::assemble_boundary_mass(&sol.dofs);
    let delta = 0.1;
    let fmax = data.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut total = 0.0;
    let mut lumped = 0.0;
    let n = data.len();
    for seed in 0..100 {
        let m = NoiseModel::new(NoiseKind::AdditiveBoundary, delta, seed).unwrap();
        let xi: Vec<f64> = perturb_boundary(&data.f, &m, 0).unwrap().iter().zip(&data.f).map(|(a, b)| a - b).collect();
        let nodal = sol.dofs.scatter_boundary(&xi).unwrap();
        total += b.form(&nodal, &nodal).sqrt();
        // nodal quadrature: each loop node carries perimeter / n
        lumped += (xi.iter().map(|x| x * x).sum::<f64>() * 4.0 / n as f64).sqrt();
    }
    let expected = delta * fmax * 4.0f64.sqrt();
    let mean = total / 100.0;
    // white nodal noise seen through the P2 boundary mass: E‖ξ‖² = σ²·tr(B)
    let tr: f64 = (0..sol.dofs.num_dofs()).map(|i| b.row(i).filter(|&(j, _)| j == i).map(|(_, v)| v).sum::<f64>()).sum();
    let white = delta * fmax * tr.sqrt();
    assert!((mean - white).abs() <= 0.05 * white, "mean {mean} vs {white}");
    assert!(mean < expected);
    assert!((lumped / 100.0 - expected).abs() <= 0.05 * expected);
    let a = perturb_boundary(&data.f, &NoiseModel::new(NoiseKind::AdditiveBoundary, delta, 1).unwrap(), 0).unwrap();
    let c = perturb_boundary(&data.f, &NoiseModel::new(NoiseKind::AdditiveBoundary, delta, 2).unwrap(), 0).unwrap();
    assert_ne!(a, c);
}

#[test]
fn nested_transfer_is_subsampling() {
    let fine = DofMap::new(&unit(40), Degree::P2);
    let coarse = DofMap::new(&unit(20), Degree::P1);
    let v: Vec<f64> = (0..fine.boundary_loop().len()).map(|k| (k as f64 * 0.37).sin()).collect();
    let t = transfer_trace(&v, &fine, &coarse).unwrap();
    assert_eq!(t.len(), coarse.boundary_loop().len());
    for (k, x) in t.iter().enumerate() {
        assert_eq!(*x, v[4 * k]);
    }
}

#[test]
fn linear_trace_transfers_exactly() {
    let fine = DofMap::new(&unit(12), Degree::P1);
    let coarse = DofMap::new(&build_rect_mesh(5, 7, Rect::centered_unit()).unwrap(), Degree::P1);
    let lin = |p: [f64; 2]| 2.0 * p[0] - p[1] + 0.25;
    let v: Vec<f64> = fine.boundary_loop().iter().map(|&d| lin(fine.points()[d])).collect();
    let t = transfer_trace(&v, &fine, &coarse).unwrap();
    for (x, &d) in t.iter().zip(coarse.boundary_loop()) {
        assert!((x - lin(coarse.points()[d])).abs() < 1e-12);
    }
}

#[test]
fn restricted_data_resamples_flux() {
    let s = ForwardProblemSpec { g_profile: GProfile::AbsX, ..spec(20, 10.0) };
    let (data, sol) = generate_cauchy_data(&s).unwrap();
    let coarse = Arc::new(DofMap::new(&unit(10), Degree::P1));
    let c = restrict_data(&data, &sol.dofs, &coarse, &s.g_profile).unwrap();
    for (g, p) in c.g.iter().zip(&c.points) {
        assert_eq!(*g, p[0].abs());
    }
}
