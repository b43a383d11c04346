//! Monte-Carlo confidence maps for the topological gradient under noisy
//! Dirichlet data: Gaussian-probe projections, pointwise confidence
//! intervals, the rejection test and the red zone.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::assembly::{assemble_mass, CauchyData, CsrMatrix, DofMap, SystemMatrix};
use crate::error::{Error, Result};
use crate::forward::{perturb_boundary, NoiseKind, NoiseModel};
use crate::mesh::Rect;
use crate::topograd::{topo_gradient_from_data, TopoField};

/// Probe weights below `exp(−PROBE_CUTOFF²)` are dropped.
const PROBE_CUTOFF: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianProbe {
    pub center: [f64; 2],
    pub sigma: f64,
}

impl GaussianProbe {
    pub fn new(center: [f64; 2], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("probe width must be positive, got {sigma}")));
        }
        Ok(Self { center, sigma })
    }

    /// `exp(−|x − c|²/ς²)`
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let d2 = (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2);
        (-d2 / (self.sigma * self.sigma)).exp()
    }

    fn weights(&self, dofs: &DofMap) -> Vec<(usize, f64)> {
        let r2 = (PROBE_CUTOFF * self.sigma).powi(2);
        dofs.points()
            .iter()
            .enumerate()
            .filter(|(_, p)| (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2) <= r2)
            .map(|(k, &p)| (k, self.eval(p)))
            .collect()
    }
}

/// Cell-centred `n_scan × n_scan` lattice of probe centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub points: Vec<[f64; 2]>,
    pub n_scan: usize,
    pub sigma: f64,
}

impl ProbeGrid {
    /// `sigma = None` selects 1.5 × the lattice spacing.
    pub fn new(bounds: Rect, n_scan: usize, sigma: Option<f64>) -> Result<Self> {
        if n_scan == 0 {
            return Err(Error::invalid("scan grid needs at least one point per side"));
        }
        let (hx, hy) = (bounds.width() / n_scan as f64, bounds.height() / n_scan as f64);
        let sigma = sigma.unwrap_or(1.5 * hx.max(hy));
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("probe width must be positive, got {sigma}")));
        }
        let points = (0..n_scan)
            .flat_map(|j| {
                (0..n_scan).map(move |i| [bounds.xmin + (i as f64 + 0.5) * hx, bounds.ymin + (j as f64 + 0.5) * hy])
            })
            .collect();
        Ok(Self { points, n_scan, sigma })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn probe(&self, k: usize) -> GaussianProbe {
        GaussianProbe { center: self.points[k], sigma: self.sigma }
    }

    /// Index of the probe closest to `p`.
    pub fn nearest(&self, p: [f64; 2]) -> usize {
        let d = |q: &[f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        (0..self.len()).min_by(|&a, &b| d(&self.points[a]).total_cmp(&d(&self.points[b]))).unwrap_or(0)
    }
}

/// Consistent `L²` pairing of nodal fields with every probe of a grid.
pub struct Projector {
    dofs: Arc<DofMap>,
    mass: CsrMatrix,
    probes: Vec<Vec<(usize, f64)>>,
}

impl Projector {
    pub fn new(dofs: Arc<DofMap>, grid: &ProbeGrid) -> Self {
        let mass = assemble_mass(&dofs);
        let probes = (0..grid.len()).map(|k| grid.probe(k).weights(&dofs)).collect();
        Self { dofs, mass, probes }
    }

    pub fn dofs(&self) -> &Arc<DofMap> {
        &self.dofs
    }

    /// `∫ F Π_k` for every probe `k`.
    pub fn project_all(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dofs.num_dofs() {
            return Err(Error::MeshMismatch);
        }
        let mf = self.mass.mul_vec(values);
        Ok(self.probes.iter().map(|w| w.iter().map(|&(k, p)| p * mf[k]).sum()).collect())
    }
}

/// `∫ δJ Π` with the consistent mass matrix.
pub fn project(field: &TopoField, probe: &GaussianProbe) -> f64 {
    let mf = assemble_mass(&field.dofs).mul_vec(&field.values);
    probe.weights(&field.dofs).iter().map(|&(k, p)| p * mf[k]).sum()
}

/// Projections of every realization, in stream order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEnsemble {
    /// `samples[n][k]`: realization `n`, probe `k`.
    pub samples: Vec<Vec<f64>>,
    pub streams: Vec<u64>,
}

impl McEnsemble {
    pub fn n_mc(&self) -> usize {
        self.samples.len()
    }

    pub fn probe_series(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }
}

/// Runs `n_mc` realizations of additive boundary noise on `data.f`. The
/// factorization held by `system` (assembled with `μ = 0`) serves every
/// realization; stream `n` of `model.seed` drives realization `n`.
pub fn mc_run(
    system: &SystemMatrix,
    data: &CauchyData,
    model: &NoiseModel,
    n_mc: usize,
    projector: &Projector,
) -> Result<McEnsemble> {
    if n_mc < 2 {
        return Err(Error::invalid("Monte-Carlo runs need at least two realizations"));
    }
    if model.kind != NoiseKind::AdditiveBoundary {
        return Err(Error::invalid("statistical detection uses additive boundary noise"));
    }
    if !system.dofs().same_space(projector.dofs()) {
        return Err(Error::MeshMismatch);
    }
    let streams: Vec<u64> = (0..n_mc as u64).collect();
    let samples = streams
        .par_iter()
        .map(|&s| {
            let run = || -> Result<Vec<f64>> {
                let noisy = data.with_f(perturb_boundary(&data.f, model, s)?);
                let (_, field) = topo_gradient_from_data(system, &noisy)?;
                projector.project_all(&field.values)
            };
            run().map_err(|e| Error::Realization { stream: s, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McEnsemble { samples, streams })
}

/// Single-pass mean and unbiased variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance with divisor `n − 1`.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

/// Two-sided critical value `z_{1−α/2}`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = Normal::new(0.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(n.inverse_cdf(1.0 - alpha / 2.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMap {
    pub points: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub reject_h0: Vec<bool>,
    pub red_zone: Vec<bool>,
    pub alpha: f64,
    pub z: f64,
    pub n_mc: usize,
}

impl ConfidenceMap {
    pub fn num_rejected(&self) -> usize {
        self.reject_h0.iter().filter(|&&r| r).count()
    }

    pub fn red_zone_centroid(&self) -> Option<[f64; 2]> {
        let pts: Vec<[f64; 2]> = self.points.iter().zip(&self.red_zone).filter(|(_, &r)| r).map(|(p, _)| *p).collect();
        if pts.is_empty() {
            return None;
        }
        let n = pts.len() as f64;
        Some([pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n])
    }

    /// CSV with header `x,y,mean,std,ci_lo,ci_hi,reject,red`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,mean,std,ci_lo,ci_hi,reject,red")?;
        for k in 0..self.points.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.points[k][0],
                self.points[k][1],
                self.mean[k],
                self.std[k],
                self.ci_lower[k],
                self.ci_upper[k],
                u8::from(self.reject_h0[k]),
                u8::from(self.red_zone[k])
            )?;
        }
        Ok(())
    }
}

/// Pointwise `mean ± z·s/√N`; `H₀` is rejected where the upper bound is
/// negative.
pub fn ci_map(ensemble: &McEnsemble, grid: &ProbeGrid, alpha: f64) -> Result<ConfidenceMap> {
    let n_mc = ensemble.n_mc();
    if n_mc < 2 {
        return Err(Error::invalid("confidence intervals need at least two realizations"));
    }
    if ensemble.samples.iter().any(|s| s.len() != grid.len()) {
        return Err(Error::invalid("ensemble and probe grid sizes differ"));
    }
    let z = critical_value(alpha)?;
    let mut stats = vec![Welford::default(); grid.len()];
    for s in &ensemble.samples {
        for (w, &x) in stats.iter_mut().zip(s) {
            w.push(x);
        }
    }
    let mean: Vec<f64> = stats.iter().map(|w| w.mean()).collect();
    let std: Vec<f64> = stats.iter().map(|w| w.variance().sqrt()).collect();
    let half: Vec<f64> = std.iter().map(|s| z * s / (n_mc as f64).sqrt()).collect();
    let ci_lower: Vec<f64> = mean.iter().zip(&half).map(|(m, h)| m - h).collect();
    let ci_upper: Vec<f64> = mean.iter().zip(&half).map(|(m, h)| m + h).collect();
    let reject_h0 = ci_upper.iter().map(|&u| u < 0.0).collect();
    Ok(ConfidenceMap {
        points: grid.points.clone(),
        mean,
        std,
        ci_lower,
        ci_upper,
        reject_h0,
        red_zone: vec![false; grid.len()],
        alpha,
        z,
        n_mc,
    })
}

/// Marks rejected points whose mean lies within `fraction·|m|` of the
/// smallest rejected mean `m`.
pub fn red_zone(map: &ConfidenceMap, fraction: f64) -> Result<ConfidenceMap> {
    if !(fraction >= 0.0) {
        return Err(Error::invalid(format!("red-zone fraction must be nonnegative, got {fraction}")));
    }
    let gmin = map
        .mean
        .iter()
        .zip(&map.reject_h0)
        .filter(|(_, &r)| r)
        .map(|(&m, _)| m)
        .fold(f64::INFINITY, f64::min);
    if !gmin.is_finite() {
        return Err(Error::NoRejection);
    }
    let cut = gmin + fraction * gmin.abs();
    let red_zone = map.mean.iter().zip(&map.reject_h0).map(|(&m, &r)| r && m <= cut).collect();
    Ok(ConfidenceMap { red_zone, ..map.clone() })
}

/// `Err(n) = |(1/n)Σ_{k≤n} x_k − reference|` for `n = 1..N`.
pub fn running_error(series: &[f64], reference: f64) -> Vec<f64> {
    let mut sum = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            sum += x;
            (sum / (k + 1) as f64 - reference).abs()
        })
        .collect()
}

/// Least-squares slope of `log err` against `log n` over `n ∈ [n_min, N]`
/// (1-based), skipping exact zeros.
pub fn loglog_slope(err: &[f64], n_min: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = err
        .iter()
        .enumerate()
        .map(|(k, &e)| (k + 1, e))
        .filter(|&(n, e)| n >= n_min && e > 0.0)
        .map(|(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    pub probes: Vec<usize>,
    /// Mean of `Err(n)` over the probes, `n = 1..N`.
    pub err: Vec<f64>,
    pub slope: Option<f64>,
}

impl ConvergenceDiagnostic {
    /// CSV with header `n,err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,err")?;
        for (k, e) in self.err.iter().enumerate() {
            writeln!(w, "{},{e}", k + 1)?;
        }
        Ok(())
    }
}

/// Running-mean error averaged over `probes`, against the clean-data
/// projections `reference`, with the log–log slope over `n ≥ 10`.
pub fn convergence_diagnostic(ensemble: &McEnsemble, reference: &[f64], probes: &[usize]) -> Result<ConvergenceDiagnostic> {
    if probes.is_empty() {
        return Err(Error::invalid("no probes selected"));
    }
    let n = ensemble.n_mc();
    let mut err = vec![0.0; n];
    for &k in probes {
        let r = *reference.get(k).ok_or_else(|| Error::invalid(format!("probe {k} out of range")))?;
        for (acc, e) in err.iter_mut().zip(running_error(&ensemble.probe_series(k), r)) {
            *acc += e / probes.len() as f64;
        }
    }
    let slope = loglog_slope(&err, 10);
    Ok(ConvergenceDiagnostic { probes: probes.to_vec(), err, slope })
}
