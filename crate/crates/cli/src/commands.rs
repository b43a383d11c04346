//! The four pipelines and their outputs.

use std::path::Path;
use std::sync::Arc;

use ccbm::assembly::{CauchyData, Degree, DofMap, Reaction, SystemMatrix};
use ccbm::forward::{
    add_noise, generate_cauchy_data, perturb_boundary, restrict_data, transfer_trace, ForwardProblemSpec,
    ForwardSolution, NoiseKind, NoiseModel,
};
use ccbm::mesh::{build_rect_mesh, io::write_vtk, InclusionSpec, Mesh};
use ccbm::shape::{
    compare_beta, init_from_detection, interface_polylines, write_polylines_csv, ShapeOptHistory, ShapeScenario,
};
use ccbm::stat::{ci_map, convergence_diagnostic, loglog_slope, mc_run, red_zone, ProbeGrid, Projector};
use ccbm::topograd::{detect, topo_gradient_from_data, DetectionResult};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::is_no_detection;
use crate::output::{outline, OutDir, Svg};
use crate::CliError;

/// Synthesized data on the fine mesh.
pub struct Synthetic {
    pub fine_mesh: Mesh,
    pub fine_data: CauchyData,
    pub solution: ForwardSolution,
}

/// Measured data on the inverse mesh, synthesized or read from file.
pub struct Inputs {
    pub mesh: Mesh,
    pub dofs: Arc<DofMap>,
    pub data: CauchyData,
    /// The region behind synthesized data; unknown for file input.
    pub truth: Option<InclusionSpec>,
    pub synthetic: Option<Synthetic>,
}

pub fn synthesize(cfg: &ScenarioConfig) -> Result<Synthetic, CliError> {
    let truth = cfg.truth_spec()?;
    let fine_mesh = build_rect_mesh(cfg.forward.n, cfg.forward.n, cfg.rect()?)?;
    let spec = ForwardProblemSpec {
        truth: Some(truth.clone()),
        g_profile: cfg.truth.g_profile.clone(),
        fine_mesh: fine_mesh.clone(),
        degree: cfg.forward.degree,
    };
    let (data, solution) = generate_cauchy_data(&spec)?;
    let fine_data = if cfg.noise.delta > 0.0 {
        let model = NoiseModel::new(cfg.noise.kind, cfg.noise.delta, cfg.noise.seed)?;
        let f = match model.kind {
            NoiseKind::MultiplicativeField => solution.dofs.gather_boundary(&add_noise(&solution.u, &model, 0)?),
            NoiseKind::AdditiveBoundary => perturb_boundary(&data.f, &model, 0)?,
        };
        data.with_f(f)
    } else {
        data
    };
    Ok(Synthetic { fine_mesh: fine_mesh.mark_region(&truth).0, fine_data, solution })
}

pub fn inputs(cfg: &ScenarioConfig) -> Result<Inputs, CliError> {
    let mesh = build_rect_mesh(cfg.inverse.n, cfg.inverse.n, cfg.rect()?)?;
    let dofs = Arc::new(DofMap::new(&mesh, cfg.inverse.degree));
    if let Some(path) = &cfg.data.file {
        let data = read_cauchy_csv(path, &dofs)?;
        return Ok(Inputs { mesh, dofs, data, truth: None, synthetic: None });
    }
    let syn = synthesize(cfg)?;
    let data = restrict_data(&syn.fine_data, &syn.solution.dofs, &dofs, &cfg.truth.g_profile)?;
    Ok(Inputs { mesh, dofs, data, truth: Some(cfg.truth_spec()?), synthetic: Some(syn) })
}

/// Reads `s,x,y,g,f` rows; the points must follow the boundary loop of
/// `dofs`.
pub fn read_cauchy_csv(path: &Path, dofs: &DofMap) -> Result<CauchyData, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e.to_string()))?;
    let header: Vec<String> =
        reader.headers().map_err(|e| CliError::data(path, e.to_string()))?.iter().map(str::to_string).collect();
    if header != ["s", "x", "y", "g", "f"] {
        return Err(CliError::data(path, format!("expected header s,x,y,g,f, got {}", header.join(","))));
    }
    let (mut g, mut f) = (Vec::new(), Vec::new());
    let loop_ = dofs.boundary_loop();
    for (k, row) in reader.deserialize::<[f64; 5]>().enumerate() {
        let row = row.map_err(|e| CliError::data(path, e.to_string()))?;
        let Some(&d) = loop_.get(k) else {
            return Err(CliError::data(path, format!("more rows than the {} boundary nodes of the inverse mesh", loop_.len())));
        };
        let p = dofs.points()[d];
        if (p[0] - row[1]).abs() > 1e-9 || (p[1] - row[2]).abs() > 1e-9 {
            return Err(CliError::data(path, format!("row {} at ({}, {}) is not boundary node {:?}", k + 1, row[1], row[2], p)));
        }
        g.push(row[3]);
        f.push(row[4]);
    }
    if g.len() != loop_.len() {
        return Err(CliError::data(path, format!("{} rows for {} boundary nodes", g.len(), loop_.len())));
    }
    Ok(CauchyData::new(dofs, g, f)?)
}

#[derive(Serialize)]
struct ForwardSummary {
    fine_dofs: usize,
    boundary_nodes: usize,
    inverse_boundary_nodes: usize,
    noise_delta: f64,
    truth_area: f64,
    f_min: f64,
    f_max: f64,
}

pub fn forward(cfg: &ScenarioConfig, inputs: &Inputs, mut dir: OutDir) -> Result<(), CliError> {
    let Some(syn) = &inputs.synthetic else {
        return Err(CliError::Config("forward: data.file is set, there is nothing to synthesize".into()));
    };
    dir.write("cauchy.csv", |w| Ok(inputs.data.write_csv(w)?))?;
    dir.write("cauchy_fine.csv", |w| Ok(syn.fine_data.write_csv(w)?))?;
    dir.write("field.vtk", |w| Ok(write_vtk(&syn.fine_mesh, &[("u", &syn.solution.u)], w)?))?;
    let f = &syn.fine_data.f;
    dir.write_json(
        "forward.json",
        &ForwardSummary {
            fine_dofs: syn.solution.dofs.num_dofs(),
            boundary_nodes: syn.fine_data.len(),
            inverse_boundary_nodes: inputs.data.len(),
            noise_delta: cfg.noise.delta,
            truth_area: syn.fine_mesh.tagged_area(),
            f_min: f.iter().copied().fold(f64::INFINITY, f64::min),
            f_max: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
    )?;
    dir.finish("forward", cfg)
}

#[derive(Serialize)]
struct TopoSummary {
    detected: bool,
    argmin: [f64; 2],
    min_value: f64,
    num_minima: usize,
    center_estimate: Option<[f64; 2]>,
    radius_estimate: Option<f64>,
}

/// Writes the field and, when a negative minimum exists, the detection.
/// A field without one ends in `NoNegativeMinimum` after all files are
/// written.
pub fn topo(cfg: &ScenarioConfig, inputs: &Inputs, mut dir: OutDir) -> Result<DetectionResult, CliError> {
    let sys = SystemMatrix::assemble(inputs.dofs.clone(), &Reaction::none(), cfg.inverse.beta)?;
    let (u, field) = topo_gradient_from_data(&sys, &inputs.data)?;
    let detection = detect(&field, &u, &cfg.topo);
    dir.write("field.csv", |w| Ok(field.write_csv(w)?))?;
    dir.write("field.vtk", |w| Ok(write_vtk(&inputs.mesh, &[("dJ", &field.values)], w)?))?;
    let ok = detection.as_ref().ok();
    dir.write_json(
        "summary.json",
        &TopoSummary {
            detected: ok.is_some(),
            argmin: field.argmin_point(),
            min_value: field.global_min.1,
            num_minima: ok.map_or(0, |r| r.minima.len()),
            center_estimate: ok.map(|r| r.center_estimate),
            radius_estimate: ok.map(|r| r.radius_estimate),
        },
    )?;
    if let Some(r) = ok {
        dir.write_json("detection.json", r)?;
    }
    if cfg.output.svg {
        let mut svg = Svg::new(cfg.rect()?);
        svg.field(&inputs.mesh, &field.values);
        overlay_truth(&mut svg, inputs);
        if let Some(r) = ok {
            for m in &r.minima {
                svg.marker(m.point, "#00a000");
            }
        }
        svg.marker(field.argmin_point(), "black");
        dir.write_str("field.svg", &svg.finish())?;
    }
    dir.finish("topo", cfg)?;
    Ok(detection?)
}

fn overlay_truth(svg: &mut Svg, inputs: &Inputs) {
    if let Some(t) = &inputs.truth {
        for s in t.shapes() {
            svg.polyline(&outline(s), "#606060");
        }
    }
}

#[derive(Serialize)]
struct StatSummary {
    delta: f64,
    n_mc: usize,
    n_scan: usize,
    alpha: f64,
    z: f64,
    sigma: f64,
    num_rejected: usize,
    num_red: usize,
    red_zone_centroid: Option<[f64; 2]>,
    convergence_slope: Option<f64>,
}

/// One confidence map per noise level; a list of levels gets one
/// subdirectory each. Fails with `NoRejection` when no level rejects.
pub fn stat(cfg: &ScenarioConfig, inputs: &Inputs, mut dir: OutDir) -> Result<(), CliError> {
    let sys = SystemMatrix::assemble(inputs.dofs.clone(), &Reaction::none(), cfg.inverse.beta)?;
    let grid = ProbeGrid::new(cfg.rect()?, cfg.stat.n_scan, cfg.stat.sigma)?;
    let projector = Projector::new(inputs.dofs.clone(), &grid);
    let (_, clean) = topo_gradient_from_data(&sys, &inputs.data)?;
    let reference = projector.project_all(&clean.values)?;
    let n_probes = cfg.stat.convergence_probes.clamp(1, grid.len());
    let probes: Vec<usize> = (0..n_probes).map(|k| (2 * k + 1) * grid.len() / (2 * n_probes)).collect();

    let mut any_rejected = false;
    let mut rows = Vec::new();
    for delta in cfg.stat.delta.values() {
        let model = NoiseModel::new(NoiseKind::AdditiveBoundary, delta, cfg.noise.seed)?;
        let ensemble = mc_run(&sys, &inputs.data, &model, cfg.stat.n_mc, &projector)?;
        let map = ci_map(&ensemble, &grid, cfg.stat.alpha)?;
        let map = match red_zone(&map, cfg.stat.red_fraction) {
            Ok(m) => m,
            Err(ccbm::Error::NoRejection) => map,
            Err(e) => return Err(e.into()),
        };
        let diag = convergence_diagnostic(&ensemble, &reference, &probes)?;
        let summary = StatSummary {
            delta,
            n_mc: cfg.stat.n_mc,
            n_scan: cfg.stat.n_scan,
            alpha: cfg.stat.alpha,
            z: map.z,
            sigma: grid.sigma,
            num_rejected: map.num_rejected(),
            num_red: map.red_zone.iter().filter(|&&r| r).count(),
            red_zone_centroid: map.red_zone_centroid(),
            convergence_slope: loglog_slope(&diag.err, 10),
        };
        any_rejected |= summary.num_rejected > 0;
        log::info!("δ = {delta}: {} of {} probes reject", summary.num_rejected, grid.len());

        let mut sub = if cfg.stat.delta.is_list() { Some(dir.sub(&format!("delta_{delta}"))?) } else { None };
        let target = sub.as_mut().unwrap_or(&mut dir);
        target.write("map.csv", |w| Ok(map.write_csv(w)?))?;
        target.write_json("map.json", &map)?;
        target.write("convergence.csv", |w| Ok(diag.write_csv(w)?))?;
        target.write_json("summary.json", &summary)?;
        if cfg.output.svg {
            let mut svg = Svg::new(cfg.rect()?);
            let half = 0.5 * cfg.rect()?.width() / cfg.stat.n_scan as f64;
            svg.cells(&map.points, &map.mean, &map.reject_h0, half);
            overlay_truth(&mut svg, inputs);
            if let Some(c) = summary.red_zone_centroid {
                svg.marker(c, "#d00000");
            }
            target.write_str("map.svg", &svg.finish())?;
        }
        if let Some(sub) = sub {
            sub.finish("stat", cfg)?;
        }
        rows.push(summary);
    }
    if cfg.stat.delta.is_list() {
        dir.write_json("summary.json", &rows)?;
    }
    dir.finish("stat", cfg)?;
    if any_rejected {
        Ok(())
    } else {
        Err(ccbm::Error::NoRejection.into())
    }
}

#[derive(Serialize)]
struct ShapeSummary {
    beta: f64,
    stop: ccbm::shape::StopReason,
    iterations: usize,
    initial_j: f64,
    final_j: f64,
    interface_error: Option<f64>,
}

/// Initial region for the shape stage: a detection handed over in-process,
/// then a saved detection file, then the configured shapes.
pub fn shape_init(cfg: &ScenarioConfig, detection: Option<&DetectionResult>) -> Result<InclusionSpec, CliError> {
    let rect = cfg.rect()?;
    if let Some(r) = detection {
        return Ok(init_from_detection(r, cfg.truth.mu0, &rect, cfg.shape.init.max_components)?);
    }
    if let Some(path) = &cfg.shape.init.from_topo {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let r: DetectionResult = serde_json::from_str(&text).map_err(|e| CliError::data(path, e.to_string()))?;
        return Ok(init_from_detection(&r, cfg.truth.mu0, &rect, cfg.shape.init.max_components)?);
    }
    Ok(InclusionSpec::new(cfg.shape.init.shapes.clone(), cfg.truth.mu0, &rect)?)
}

pub fn shape(cfg: &ScenarioConfig, inputs: &Inputs, init: &InclusionSpec, mut dir: OutDir) -> Result<(), CliError> {
    // the descent runs on P1
    let data = if inputs.dofs.degree() == Degree::P1 {
        inputs.data.clone()
    } else {
        let p1 = DofMap::new(&inputs.mesh, Degree::P1);
        let g = transfer_trace(&inputs.data.g, &inputs.dofs, &p1)?;
        let f = transfer_trace(&inputs.data.f, &inputs.dofs, &p1)?;
        CauchyData::new(&p1, g, f)?
    };
    let scenario = ShapeScenario { mesh: inputs.mesh.clone(), data, mu0: cfg.truth.mu0, truth: inputs.truth.clone() };
    let betas = cfg.betas();
    let runs = compare_beta(&scenario, init, &betas, &cfg.shape_config(betas[0]))?;
    let single = runs.len() == 1;
    let mut rows = Vec::new();
    for run in &runs {
        let h = &run.history;
        let summary = ShapeSummary {
            beta: run.beta,
            stop: h.stop,
            iterations: h.records.len() - 1,
            initial_j: h.initial_j(),
            final_j: run.final_j,
            interface_error: run.interface_error,
        };
        if single {
            write_history(cfg, inputs, h, &summary, &mut dir)?;
        } else {
            let mut sub = dir.sub(&format!("beta_{}", run.beta))?;
            write_history(cfg, inputs, h, &summary, &mut sub)?;
            sub.finish("shape", cfg)?;
        }
        rows.push(summary);
    }
    if !single {
        dir.write("summary.csv", |w| {
            writeln!(w, "beta,iterations,initial_J,final_J,interface_error,stop")?;
            for r in &rows {
                let err = r.interface_error.map_or(String::new(), |e| e.to_string());
                let stop = serde_json::to_value(r.stop)?;
                writeln!(w, "{},{},{},{},{err},{}", r.beta, r.iterations, r.initial_j, r.final_j, stop.as_str().unwrap_or(""))?;
            }
            Ok(())
        })?;
    }
    dir.finish("shape", cfg)
}

fn write_history(
    cfg: &ScenarioConfig,
    inputs: &Inputs,
    h: &ShapeOptHistory,
    summary: &ShapeSummary,
    dir: &mut OutDir,
) -> Result<(), CliError> {
    dir.write("history.csv", |w| Ok(h.write_csv(w)?))?;
    let initial = interface_polylines(&h.initial_mesh);
    let fin = h.final_interface();
    dir.write("initial_interface.csv", |w| Ok(write_polylines_csv(&initial, w)?))?;
    dir.write("interface.csv", |w| Ok(write_polylines_csv(&fin, w)?))?;
    dir.write("final_mesh.vtk", |w| Ok(write_vtk(&h.final_mesh, &[], w)?))?;
    dir.write_json("summary.json", summary)?;
    if cfg.output.svg {
        let mut svg = Svg::new(cfg.rect()?);
        overlay_truth(&mut svg, inputs);
        for l in &initial {
            svg.polyline(l, "#3060d0");
        }
        for l in &fin {
            svg.polyline(l, "#d00000");
        }
        dir.write_str("shape.svg", &svg.finish())?;
    }
    Ok(())
}

/// Every stage into its own subdirectory. A detection, when found, seeds
/// the shape stage. No-detection outcomes are reported after all stages.
pub fn all(cfg: &ScenarioConfig, inputs: &Inputs, dir: OutDir) -> Result<(), CliError> {
    if inputs.synthetic.is_some() {
        forward(cfg, inputs, dir.sub("forward")?)?;
    }
    let mut deferred = None;
    let detection = match topo(cfg, inputs, dir.sub("topo")?) {
        Ok(r) => Some(r),
        Err(CliError::Core(e)) if is_no_detection(&e) => {
            log::warn!("topological stage: {e}; shape starts from the configured region");
            deferred = Some(e);
            None
        }
        Err(e) => return Err(e),
    };
    match stat(cfg, inputs, dir.sub("stat")?) {
        Err(CliError::Core(e)) if is_no_detection(&e) => {
            log::warn!("statistical stage: {e}");
            deferred.get_or_insert(e);
        }
        other => other?,
    }
    let init = shape_init(cfg, detection.as_ref())?;
    shape(cfg, inputs, &init, dir.sub("shape")?)?;
    dir.finish("all", cfg)?;
    deferred.map_or(Ok(()), |e| Err(e.into()))
}
