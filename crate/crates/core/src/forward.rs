//! Synthetic Cauchy data from a known contact region, noise models, and
//! transfer of boundary traces between meshes.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_boundary_mass, assemble_reaction, assemble_stiffness, CauchyData, CholFactor, Degree, DofMap, Reaction,
    SOLVE_TOL,
};
use crate::assembly::sparse::refined_solve;
use crate::error::{Error, Result};
use crate::mesh::{InclusionSpec, Mesh};

/// Boundary flux profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GProfile {
    ConstantOne,
    AbsX,
    /// Values at equally spaced arclength positions around ∂Ω, starting at
    /// the lower-left corner and running counter-clockwise; interpolated
    /// linearly and periodically.
    Custom { samples: Vec<f64> },
}

impl GProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            GProfile::Custom { samples } if samples.is_empty() || samples.iter().all(|&v| v == 0.0) => {
                Err(Error::invalid("custom flux profile is empty or identically zero"))
            }
            GProfile::Custom { samples } if samples.iter().any(|v| !v.is_finite()) => {
                Err(Error::invalid("custom flux profile has non-finite samples"))
            }
            _ => Ok(()),
        }
    }

    /// Value at point `p` with arclength `s` on a boundary of length `perimeter`.
    pub fn eval(&self, p: [f64; 2], s: f64, perimeter: f64) -> f64 {
        match self {
            GProfile::ConstantOne => 1.0,
            GProfile::AbsX => p[0].abs(),
            GProfile::Custom { samples } => {
                let n = samples.len();
                let x = (s / perimeter).rem_euclid(1.0) * n as f64;
                let k = (x.floor() as usize).min(n - 1);
                let w = x - k as f64;
                (1.0 - w) * samples[k] + w * samples[(k + 1) % n]
            }
        }
    }

    /// Samples along the boundary loop of `dofs`.
    pub fn sample(&self, dofs: &DofMap) -> Vec<f64> {
        let per = dofs.perimeter();
        dofs.boundary_loop()
            .iter()
            .zip(dofs.arclength())
            .map(|(&d, &s)| self.eval(dofs.points()[d], s, per))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ForwardProblemSpec {
    /// `None` models the absence of contact, which leaves the pure Neumann
    /// problem singular.
    pub truth: Option<InclusionSpec>,
    pub g_profile: GProfile,
    pub fine_mesh: Mesh,
    pub degree: Degree,
}

/// Real forward solution on the fine mesh.
#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub dofs: Arc<DofMap>,
    pub u: Vec<f64>,
}

/// Solves `−Δu + μ₀χ_ω u = 0`, `∂_ν u = g` and returns `(g, f = u|∂Ω)`
/// on the fine boundary loop together with the field.
pub fn generate_cauchy_data(spec: &ForwardProblemSpec) -> Result<(CauchyData, ForwardSolution)> {
    spec.g_profile.validate()?;
    let truth = spec.truth.as_ref().ok_or(Error::EmptyInclusion)?;
    let dofs = Arc::new(DofMap::new(&spec.fine_mesh, spec.degree));
    let reaction = assemble_reaction(&dofs, &Reaction::region(truth.clone()));
    let region_measure: f64 = reaction.iter().map(|(_, _, v)| v).sum::<f64>() / truth.mu0();
    if region_measure <= 1e-14 * spec.fine_mesh.total_area() {
        return Err(Error::EmptyInclusion);
    }
    let a = assemble_stiffness(&dofs).add(&reaction);
    let g_loop = spec.g_profile.sample(&dofs);
    let rhs = assemble_boundary_mass(&dofs).mul_vec(&dofs.scatter_boundary(&g_loop)?);
    let chol = CholFactor::new(&a)?;
    let u = refined_solve(|x| a.mul_vec(x), |r| chol.solve_in_place(r), &rhs, SOLVE_TOL, a.frobenius_norm())?;
    let f = dofs.gather_boundary(&u);
    let data = CauchyData::new(&dofs, g_loop, f)?;
    Ok((data, ForwardSolution { dofs, u }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `u·(1 + δη)` on the whole field, `η ~ N(0, ‖u‖²_∞)` per node.
    MultiplicativeField,
    /// `f + ξ` on the boundary, `ξ ~ N(0, (δ‖f‖_∞)²)` per node.
    AdditiveBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub delta: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, delta: f64, seed: u64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("noise level must be nonnegative, got {delta}")));
        }
        Ok(Self { kind, delta, seed })
    }
}

/// Standard normal draws indexed by `(seed, stream, draw)`: each stream is an
/// independent ChaCha sequence, so realizations can run in any order.
pub fn normal_stream(seed: u64, stream: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    std::iter::repeat_with(move || StandardNormal.sample(&mut rng))
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Multiplicative field noise on stream `stream`.
pub fn add_noise(u: &[f64], model: &NoiseModel, stream: u64) -> Result<Vec<f64>> {
    if model.kind != NoiseKind::MultiplicativeField {
        return Err(Error::invalid("add_noise expects the multiplicative field model"));
    }
    if model.delta == 0.0 {
        return Ok(u.to_vec());
    }
    let sd = max_abs(u);
    Ok(u.iter().zip(normal_stream(model.seed, stream)).map(|(&x, z)| x * (1.0 + model.delta * sd * z)).collect())
}

/// Additive white boundary noise on stream `stream`.
pub fn perturb_boundary(f: &[f64], model: &NoiseModel, stream: u64) -> Result<Vec<f64>> {
    if model.kind != NoiseKind::AdditiveBoundary {
        return Err(Error::invalid("perturb_boundary expects the additive boundary model"));
    }
    if model.delta == 0.0 {
        return Ok(f.to_vec());
    }
    let sd = model.delta * max_abs(f);
    Ok(f.iter().zip(normal_stream(model.seed, stream)).map(|(&x, z)| x + sd * z).collect())
}

/// Linear interpolation of boundary-loop values from `fine` onto the
/// boundary-loop nodes of `coarse`, by arclength. Both loops start at the
/// lower-left corner of the same rectangle.
pub fn transfer_trace(values: &[f64], fine: &DofMap, coarse: &DofMap) -> Result<Vec<f64>> {
    let (bf, bc) = (fine.mesh().bounds(), coarse.mesh().bounds());
    let scale = bf.width().max(bf.height());
    if !bf.approx_eq(&bc, 1e-12 * scale) {
        return Err(Error::GeometryMismatch(format!("fine domain {bf:?} differs from coarse domain {bc:?}")));
    }
    if values.len() != fine.boundary_loop().len() {
        return Err(Error::invalid("trace length differs from the fine boundary loop"));
    }
    let s_f = fine.arclength();
    let per = fine.perimeter();
    let n = s_f.len();
    let tol = 1e-10 * per;
    let out = coarse
        .arclength()
        .iter()
        .map(|&s| {
            // last fine node at or before s
            let k = s_f.partition_point(|&x| x <= s + tol).saturating_sub(1);
            if (s_f[k] - s).abs() <= tol {
                return values[k];
            }
            let (s0, s1) = (s_f[k], if k + 1 < n { s_f[k + 1] } else { per });
            let w = (s - s0) / (s1 - s0);
            (1.0 - w) * values[k] + w * values[(k + 1) % n]
        })
        .collect();
    Ok(out)
}

/// Cauchy data on `coarse`: the flux profile sampled directly and the
/// measured trace transferred from the fine loop.
pub fn restrict_data(fine_data: &CauchyData, fine: &DofMap, coarse: &DofMap, g_profile: &GProfile) -> Result<CauchyData> {
    let f = transfer_trace(&fine_data.f, fine, coarse)?;
    CauchyData::new(coarse, g_profile.sample(coarse), f)
}

/// Fine-mesh data with optional multiplicative field noise (stream 0),
/// restricted to `coarse`.
pub fn coarse_cauchy_data(spec: &ForwardProblemSpec, coarse: &DofMap, noise: Option<&NoiseModel>) -> Result<CauchyData> {
    let (data, sol) = generate_cauchy_data(spec)?;
    let data = match noise {
        Some(model) if model.delta > 0.0 => data.with_f(sol.dofs.gather_boundary(&add_noise(&sol.u, model, 0)?)),
        _ => data,
    };
    restrict_data(&data, &sol.dofs, coarse, &spec.g_profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Rect};

    #[test]
    fn custom_profile_interpolates() {
        let p = GProfile::Custom { samples: vec![0.0, 1.0, 2.0, 3.0] };
        assert_eq!(p.eval([0.0; 2], 0.0, 4.0), 0.0);
        assert_eq!(p.eval([0.0; 2], 1.5, 4.0), 1.5);
        assert_eq!(p.eval([0.0; 2], 3.5, 4.0), 1.5);
        assert!(GProfile::Custom { samples: vec![0.0; 3] }.validate().is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = normal_stream(7, 0).take(5).collect();
        let b: Vec<f64> = normal_stream(7, 0).take(5).collect();
        let c: Vec<f64> = normal_stream(7, 1).take(5).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_is_identity() {
        let u = vec![1.0, -2.0, 3.0];
        let m = NoiseModel::new(NoiseKind::MultiplicativeField, 0.0, 1).unwrap();
        assert_eq!(add_noise(&u, &m, 0).unwrap(), u);
        let m = NoiseModel::new(NoiseKind::AdditiveBoundary, 0.0, 1).unwrap();
        assert_eq!(perturb_boundary(&u, &m, 0).unwrap(), u);
        assert!(add_noise(&u, &m, 0).is_err());
        assert!(NoiseModel::new(NoiseKind::AdditiveBoundary, -0.1, 1).is_err());
    }

    #[test]
    fn transfer_identity_and_mismatch() {
        let r = Rect::centered_unit();
        let m = build_rect_mesh(4, 4, r).unwrap();
        let d = DofMap::new(&m, Degree::P1);
        let v: Vec<f64> = (0..d.boundary_loop().len()).map(|k| k as f64).collect();
        assert_eq!(transfer_trace(&v, &d, &d).unwrap(), v);
        let other = build_rect_mesh(4, 4, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let e = transfer_trace(&v, &d, &DofMap::new(&other, Degree::P1)).unwrap_err();
        assert!(matches!(e, Error::GeometryMismatch(_)));
    }
}
