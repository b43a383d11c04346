//! First-order shape optimization of the contact region on a deforming
//! mesh: adjoint shape gradient on the interface, Sobolev extension,
//! scaled initial step and backtracking.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::sobolev::interface_load;
use crate::assembly::{
    h1_norm_sq, interface_pairing, CauchyData, ComplexField, Degree, DofMap, Reaction, SobolevOperator, SystemMatrix,
};
use crate::error::{Error, Result};
use crate::mesh::{InclusionSpec, InterfaceEdge, Mesh, Primitive, RegionWarning, VectorField};
use crate::topograd::DetectionResult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeOptConfig {
    pub beta: f64,
    /// Scaling of the initial step `s·J/‖θ‖²`.
    pub s: f64,
    /// The run ends once the largest vertex displacement `t·‖θ‖_∞` of a
    /// trial step falls below this length.
    pub t0: f64,
    pub max_iters: usize,
    /// Minimum triangle quality, as a fraction of the initial mesh's.
    pub quality_floor: f64,
}

impl Default for ShapeOptConfig {
    fn default() -> Self {
        Self { beta: 200.0, s: 0.5, t0: 1e-6, max_iters: 200, quality_floor: 0.05 }
    }
}

impl ShapeOptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("step scaling must be positive, got {}", self.s)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::invalid(format!("step tolerance must be positive, got {}", self.t0)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.quality_floor) {
            return Err(Error::invalid(format!("quality floor must lie in [0, 1), got {}", self.quality_floor)));
        }
        Ok(())
    }
}

/// Coarse P1 mesh and measured data for a shape run.
#[derive(Clone, Debug)]
pub struct ShapeScenario {
    pub mesh: Mesh,
    pub data: CauchyData,
    pub mu0: f64,
    /// Reference region for error reporting only.
    pub truth: Option<InclusionSpec>,
}

/// State, cost and factorized system on a tagged mesh.
pub struct Evaluation {
    pub system: SystemMatrix,
    pub u: ComplexField,
    pub j: f64,
}

pub fn evaluate(mesh: &Mesh, mu0: f64, beta: f64, data: &CauchyData) -> Result<Evaluation> {
    if mesh.num_tagged() == 0 {
        return Err(Error::EmptyInclusion);
    }
    let system = SystemMatrix::assemble(Arc::new(DofMap::new(mesh, Degree::P1)), &Reaction::tagged(mu0), beta)?;
    let u = system.solve_state(data)?;
    let j = system.cost(&u);
    Ok(Evaluation { system, u, j })
}

/// `G = μ₀(u_i ϑ_r − u_r ϑ_i)` at the vertices of the interface, zero
/// elsewhere. Both fields are P1 on `mesh`.
pub fn shape_gradient_density(mesh: &Mesh, u: &ComplexField, adj: &ComplexField, mu0: f64) -> Result<Vec<f64>> {
    if u.len() != mesh.num_vertices() || adj.len() != mesh.num_vertices() {
        return Err(Error::MeshMismatch);
    }
    let interface = mesh.interface_edges();
    if interface.is_empty() {
        return Err(Error::InterfaceNotResolved);
    }
    let mut g = vec![0.0; mesh.num_vertices()];
    for e in &interface {
        for &a in &e.vertices {
            g[a] = mu0 * (u.im[a] * adj.re[a] - u.re[a] * adj.im[a]);
        }
    }
    Ok(g)
}

/// `∫_{∂ω} G θ_ν ds`.
pub fn directional_derivative(interface: &[InterfaceEdge], g: &[f64], theta: &VectorField) -> f64 {
    interface_pairing(interface, g, theta)
}

/// `t = s·J/‖θ‖²_{H¹}`.
pub fn initial_step(s: f64, j: f64, theta_norm_sq: f64) -> Result<f64> {
    if !(theta_norm_sq > 0.0) {
        return Err(Error::ZeroDirection);
    }
    Ok(s * j / theta_norm_sq)
}

/// Descent direction at the current mesh.
pub struct Direction {
    pub density: Vec<f64>,
    pub theta: VectorField,
    pub norm_sq: f64,
    /// `dJ[θ]`, equal to `−‖θ‖²` up to round-off.
    pub slope: f64,
}

pub fn descent_direction(mesh: &Mesh, eval: &Evaluation, mu0: f64) -> Result<Direction> {
    let adj = eval.system.solve_adjoint(&eval.u.im)?;
    let density = shape_gradient_density(mesh, &eval.u, &adj, mu0)?;
    let interface = mesh.interface_edges();
    let op = SobolevOperator::new(mesh)?;
    let theta = op.solve(&interface_load(mesh.num_vertices(), &interface, &density))?;
    let norm_sq = h1_norm_sq(&op, &theta);
    let slope = directional_derivative(&interface, &density, &theta);
    Ok(Direction { density, theta, norm_sq, slope })
}

/// Accepted step of a line search.
pub struct Step {
    pub t: f64,
    pub mesh: Mesh,
    pub eval: Evaluation,
    pub quality: f64,
}

/// Halves `t` from `t_init` until the deformed mesh stays above
/// `min_quality` and `J` decreases. Fails once `t·‖θ‖_∞ < t0`.
pub fn line_search(
    mesh: &Mesh,
    theta: &VectorField,
    t_init: f64,
    j_current: f64,
    scenario: &ShapeScenario,
    config: &ShapeOptConfig,
    min_quality: f64,
) -> Result<Step> {
    let scale = theta.max_norm();
    let mut t = t_init;
    while t * scale >= config.t0 {
        if let Ok(candidate) = mesh.deform(theta, t) {
            let quality = candidate.min_triangle_quality();
            if quality >= min_quality {
                let eval = evaluate(&candidate, scenario.mu0, config.beta, &scenario.data)?;
                if eval.j < j_current {
                    return Ok(Step { t, mesh: candidate, eval, quality });
                }
            }
        }
        t *= 0.5;
    }
    Err(Error::StepTooSmall { t, t0: config.t0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    /// Step accepted to reach this iterate (0 at the start).
    pub t: f64,
    /// `max |G|` on the interface at this iterate.
    pub g_max: f64,
    pub quality: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    StepTooSmall,
    MaxIters,
    ZeroDirection,
}

#[derive(Clone, Debug)]
pub struct ShapeOptHistory {
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub initial_mesh: Mesh,
    pub final_mesh: Mesh,
}

impl ShapeOptHistory {
    pub fn initial_j(&self) -> f64 {
        self.records[0].j
    }

    pub fn final_j(&self) -> f64 {
        self.records[self.records.len() - 1].j
    }

    pub fn final_interface(&self) -> Vec<Vec<[f64; 2]>> {
        interface_polylines(&self.final_mesh)
    }

    /// CSV with header `iter,J,t,G,quality`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,J,t,G,quality")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.iter, r.j, r.t, r.g_max, r.quality)?;
        }
        Ok(())
    }
}

/// Runs the descent loop from the mesh tagged by `init`.
pub fn optimize_shape(scenario: &ShapeScenario, init: &InclusionSpec, config: &ShapeOptConfig) -> Result<ShapeOptHistory> {
    let (mesh, warning) = scenario.mesh.mark_region(init);
    if let Some(RegionWarning::EmptyRegion) = warning {
        return Err(Error::EmptyInclusion);
    }
    optimize_tagged(scenario, mesh, config)
}

/// Runs the descent loop from an already tagged mesh.
pub fn optimize_tagged(scenario: &ShapeScenario, mesh: Mesh, config: &ShapeOptConfig) -> Result<ShapeOptHistory> {
    config.validate()?;
    if mesh.num_tagged() == 0 {
        return Err(Error::EmptyInclusion);
    }
    if mesh.interface_edges().is_empty() {
        return Err(Error::InterfaceNotResolved);
    }
    let initial_mesh = mesh.clone();
    let min_quality = config.quality_floor * mesh.min_triangle_quality();
    let wrap = |iteration: usize| move |e: Error| Error::Iteration { iteration, source: Box::new(e) };

    let mut mesh = mesh;
    let mut eval = evaluate(&mesh, scenario.mu0, config.beta, &scenario.data).map_err(wrap(0))?;
    let mut records = Vec::new();
    let mut last_t = 0.0;
    let mut stop = StopReason::MaxIters;
    for iter in 0..config.max_iters {
        let dir = descent_direction(&mesh, &eval, scenario.mu0).map_err(wrap(iter))?;
        let g_max = dir.density.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        records.push(IterationRecord { iter, j: eval.j, t: last_t, g_max, quality: mesh.min_triangle_quality() });
        let t_init = match initial_step(config.s, eval.j, dir.norm_sq) {
            Ok(t) => t,
            Err(Error::ZeroDirection) => {
                stop = StopReason::ZeroDirection;
                break;
            }
            Err(e) => return Err(wrap(iter)(e)),
        };
        match line_search(&mesh, &dir.theta, t_init, eval.j, scenario, config, min_quality) {
            Ok(step) => {
                log::debug!("shape iter {iter}: J {:.6e} -> {:.6e}, t {:.3e}", eval.j, step.eval.j, step.t);
                mesh = step.mesh;
                eval = step.eval;
                last_t = step.t;
            }
            Err(Error::StepTooSmall { .. }) => {
                stop = StopReason::StepTooSmall;
                break;
            }
            Err(e) => return Err(wrap(iter)(e)),
        }
    }
    if stop == StopReason::MaxIters {
        let adj = eval.system.solve_adjoint(&eval.u.im).map_err(wrap(config.max_iters))?;
        let g = shape_gradient_density(&mesh, &eval.u, &adj, scenario.mu0).map_err(wrap(config.max_iters))?;
        let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        records.push(IterationRecord {
            iter: config.max_iters,
            j: eval.j,
            t: last_t,
            g_max,
            quality: mesh.min_triangle_quality(),
        });
    }
    Ok(ShapeOptHistory { records, stop, initial_mesh, final_mesh: mesh })
}

/// Closed loops of the interface, each traversed with ω on the left.
pub fn interface_polylines(mesh: &Mesh) -> Vec<Vec<[f64; 2]>> {
    let edges = mesh.interface_edges();
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, e) in edges.iter().enumerate() {
        out.entry(e.vertices[0]).or_default().push(k);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut path = vec![mesh.vertices()[edges[start].vertices[0]]];
        let mut k = start;
        loop {
            used[k] = true;
            let next_v = edges[k].vertices[1];
            path.push(mesh.vertices()[next_v]);
            match out.get(&next_v).and_then(|c| c.iter().copied().find(|&c| !used[c])) {
                Some(n) => k = n,
                None => break,
            }
        }
        loops.push(path);
    }
    loops
}

/// Polylines as CSV with header `loop,x,y`.
pub fn write_polylines_csv<W: Write>(loops: &[Vec<[f64; 2]>], mut w: W) -> Result<()> {
    writeln!(w, "loop,x,y")?;
    for (k, l) in loops.iter().enumerate() {
        for p in l {
            writeln!(w, "{k},{},{}", p[0], p[1])?;
        }
    }
    Ok(())
}

/// Largest distance from an interface vertex to the boundary of `truth`.
pub fn interface_error(mesh: &Mesh, truth: &InclusionSpec) -> f64 {
    mesh.interface_edges()
        .iter()
        .flat_map(|e| e.vertices)
        .map(|v| truth.boundary_distance(mesh.vertices()[v]))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct BetaRun {
    pub beta: f64,
    pub history: ShapeOptHistory,
    pub final_j: f64,
    pub interface_error: Option<f64>,
}

/// Independent runs that differ only in `β`.
pub fn compare_beta(
    scenario: &ShapeScenario,
    init: &InclusionSpec,
    betas: &[f64],
    config: &ShapeOptConfig,
) -> Result<Vec<BetaRun>> {
    if betas.is_empty() {
        return Err(Error::invalid("beta list is empty"));
    }
    betas
        .par_iter()
        .map(|&beta| {
            let history = optimize_shape(scenario, init, &ShapeOptConfig { beta, ..*config })?;
            let interface_error = scenario.truth.as_ref().map(|t| interface_error(&history.final_mesh, t));
            Ok(BetaRun { beta, final_j: history.final_j(), history, interface_error })
        })
        .collect()
}

/// Candidate component centres from the measured trace: local minima of `f`
/// along the boundary cast inward normals; pairwise ray intersections are
/// clustered within `cluster_radius`.
pub fn boundary_profile_components(data: &CauchyData, window: usize, cluster_radius: f64) -> Vec<[f64; 2]> {
    let n = data.len();
    if n < 3 || window == 0 {
        return Vec::new();
    }
    let (xmin, xmax) = data.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
    let (ymin, ymax) = data.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    let tol = 1e-9 * (xmax - xmin).max(ymax - ymin);
    let inward = |p: [f64; 2]| -> Option<[f64; 2]> {
        let sides = [
            ((p[0] - xmin).abs() < tol, [1.0, 0.0]),
            ((p[0] - xmax).abs() < tol, [-1.0, 0.0]),
            ((p[1] - ymin).abs() < tol, [0.0, 1.0]),
            ((p[1] - ymax).abs() < tol, [0.0, -1.0]),
        ];
        let hits: Vec<[f64; 2]> = sides.iter().filter(|s| s.0).map(|s| s.1).collect();
        (hits.len() == 1).then(|| hits[0])
    };
    let rays: Vec<([f64; 2], [f64; 2])> = (0..n)
        .filter(|&k| (1..=window).all(|d| data.f[k] < data.f[(k + d) % n] && data.f[k] < data.f[(k + n - d) % n]))
        .filter_map(|k| inward(data.points[k]).map(|d| (data.points[k], d)))
        .collect();
    let mut hits = Vec::new();
    for a in 0..rays.len() {
        for b in a + 1..rays.len() {
            let ((p, d), (q, e)) = (rays[a], rays[b]);
            let det = d[0] * (-e[1]) - d[1] * (-e[0]);
            if det.abs() < 1e-12 {
                continue;
            }
            let r = [q[0] - p[0], q[1] - p[1]];
            let s = (r[0] * (-e[1]) - r[1] * (-e[0])) / det;
            let u = (d[0] * r[1] - d[1] * r[0]) / det;
            if s > 0.0 && u > 0.0 {
                let x = [p[0] + s * d[0], p[1] + s * d[1]];
                if x[0] > xmin && x[0] < xmax && x[1] > ymin && x[1] < ymax {
                    hits.push(x);
                }
            }
        }
    }
    let mut clusters: Vec<(f64, [f64; 2])> = Vec::new();
    for h in hits {
        let found = clusters.iter_mut().find(|(c, s)| (s[0] / c - h[0]).hypot(s[1] / c - h[1]) <= cluster_radius);
        match found {
            Some((c, s)) => {
                *c += 1.0;
                s[0] += h[0];
                s[1] += h[1];
            }
            None => clusters.push((1.0, h)),
        }
    }
    clusters.into_iter().map(|(c, s)| [s[0] / c, s[1] / c]).collect()
}

/// Initial region from a topological detection: one disc per minimum, at
/// most `max_components` (deepest first), each with the estimated radius
/// shrunk to stay inside the domain.
pub fn init_from_detection(
    result: &DetectionResult,
    mu0: f64,
    domain: &crate::mesh::Rect,
    max_components: Option<usize>,
) -> Result<InclusionSpec> {
    let mut minima: Vec<_> = result.minima.iter().collect();
    minima.sort_by(|a, b| a.value.total_cmp(&b.value));
    let cap = max_components.unwrap_or(minima.len()).max(1);
    let shapes = minima
        .iter()
        .take(cap)
        .map(|m| {
            let c = m.point;
            let room = (c[0] - domain.xmin).min(domain.xmax - c[0]).min(c[1] - domain.ymin).min(domain.ymax - c[1]);
            Primitive::Disc { center: c, radius: result.radius_estimate.min(0.9 * room) }
        })
        .collect();
    InclusionSpec::new(shapes, mu0, domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rule() {
        assert_eq!(initial_step(1.0, 2.0, 4.0).unwrap(), 0.5);
        assert_eq!(initial_step(1.0, 0.0, 4.0).unwrap(), 0.0);
        assert_eq!(initial_step(2.0, 2.0, 4.0).unwrap(), 2.0 * initial_step(1.0, 2.0, 4.0).unwrap());
        assert!(matches!(initial_step(1.0, 2.0, 0.0), Err(Error::ZeroDirection)));
    }

    #[test]
    fn config_validation() {
        assert!(ShapeOptConfig::default().validate().is_ok());
        assert!(ShapeOptConfig { s: 0.0, ..Default::default() }.validate().is_err());
        assert!(ShapeOptConfig { max_iters: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn square_boundary_distance() {
        let sq = Primitive::Square { center: [0.0, 0.0], half_width: 0.1 };
        assert!((sq.boundary_distance([0.0, 0.0]) - 0.1).abs() < 1e-15);
        assert!((sq.boundary_distance([0.2, 0.0]) - 0.1).abs() < 1e-15);
        assert!((sq.boundary_distance([0.13, 0.14]) - 0.05).abs() < 1e-12);
    }
}
