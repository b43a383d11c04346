//! Topological gradient `δJ = u_i v_r − u_r v_i`, one-shot detection from
//! the empty configuration, and extraction of its negative minima.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{CauchyData, ComplexField, DofMap, SystemMatrix};
use crate::error::{Error, Result};

/// Minima whose union-find persistence is below this fraction of the
/// field's range are merged into their deeper neighbour.
pub const PERSISTENCE_FRACTION: f64 = 0.02;

/// Radius calibration: the default centered disc of radius 0.1 maps to an
/// estimate of 0.1.
pub const R_CAL: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct TopoField {
    pub dofs: Arc<DofMap>,
    pub values: Vec<f64>,
    /// `(node, value)` of the smallest entry.
    pub global_min: (usize, f64),
}

impl TopoField {
    pub fn new(dofs: Arc<DofMap>, values: Vec<f64>) -> Result<Self> {
        if values.len() != dofs.num_dofs() || values.is_empty() {
            return Err(Error::MeshMismatch);
        }
        let global_min = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
        Ok(Self { dofs, values, global_min })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.global_min.1
    }

    pub fn argmin_point(&self) -> [f64; 2] {
        self.dofs.points()[self.global_min.0]
    }

    /// CSV with header `node,x,y,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,x,y,value")?;
        for (k, (p, v)) in self.dofs.points().iter().zip(&self.values).enumerate() {
            writeln!(w, "{k},{},{},{v}", p[0], p[1])?;
        }
        Ok(())
    }
}

pub fn topo_gradient_field(u: &ComplexField, v: &ComplexField, dofs: Arc<DofMap>) -> Result<TopoField> {
    let n = dofs.num_dofs();
    if u.len() != n || v.len() != n || u.degree != dofs.degree() || v.degree != dofs.degree() {
        return Err(Error::MeshMismatch);
    }
    let values = (0..n).map(|k| u.im[k] * v.re[k] - u.re[k] * v.im[k]).collect();
    TopoField::new(dofs, values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub node: usize,
    pub point: [f64; 2],
    pub value: f64,
}

/// Nodes grouped by hop distance from `start`, rings `1..=depth`.
fn rings(nbrs: &[Vec<usize>], start: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut dist = std::collections::HashMap::new();
    dist.insert(start, 0usize);
    let mut out = vec![Vec::new(); depth];
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        let d = dist[&a];
        if d == depth {
            continue;
        }
        for &b in &nbrs[a] {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(b) {
                e.insert(d + 1);
                out[d].push(b);
                queue.push_back(b);
            }
        }
    }
    out
}

/// A negative node strictly below every node within `depth` hops, whose
/// values rise ring by ring: each ring-`k` node lies above at least one of
/// its ring-`(k−1)` neighbours.
fn passes_ring_test(values: &[f64], nbrs: &[Vec<usize>], node: usize, depth: usize) -> bool {
    let v0 = values[node];
    if v0 >= 0.0 {
        return false;
    }
    let rs = rings(nbrs, node, depth);
    if rs.iter().flatten().any(|&b| values[b] <= v0) {
        return false;
    }
    for k in 1..rs.len() {
        let inner = &rs[k - 1];
        for &b in &rs[k] {
            let rises = nbrs[b].iter().any(|c| inner.contains(c) && values[*c] < values[b]);
            if !rises {
                return false;
            }
        }
    }
    true
}

struct UnionFind {
    parent: Vec<usize>,
    /// Deepest node of each root's component.
    birth: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
}

/// Persistence of each negative strict local minimum under a sublevel-set
/// sweep restricted to negative values: components die when they merge into
/// an older (deeper) one, or at level zero.
fn persistence(values: &[f64], nbrs: &[Vec<usize>]) -> std::collections::HashMap<usize, f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).filter(|&k| values[k] < 0.0).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut uf = UnionFind { parent: (0..n).collect(), birth: (0..n).collect() };
    let mut active = vec![false; n];
    let mut pers = std::collections::HashMap::new();
    for &a in &order {
        active[a] = true;
        for &b in &nbrs[a] {
            if !active[b] {
                continue;
            }
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                continue;
            }
            let (old, young) = if values[uf.birth[ra]] <= values[uf.birth[rb]] { (ra, rb) } else { (rb, ra) };
            let yb = uf.birth[young];
            if yb != a {
                pers.insert(yb, values[a] - values[yb]);
            }
            uf.parent[young] = old;
        }
    }
    for &a in &order {
        let r = uf.find(a);
        let b = uf.birth[r];
        pers.entry(b).or_insert(-values[b]);
    }
    pers
}

/// Negative minima passing the ring test with `ring_depth` rings, after
/// merging shallow candidates through union-find persistence. Sorted by
/// value, deepest first.
pub fn find_local_minima(field: &TopoField, ring_depth: usize) -> Result<Vec<Minimum>> {
    if ring_depth == 0 {
        return Err(Error::invalid("ring depth must be at least 1"));
    }
    let nbrs = field.dofs.node_neighbors();
    let v = &field.values;
    let pers = persistence(v, &nbrs);
    let floor = PERSISTENCE_FRACTION * field.range();
    let mut out: Vec<Minimum> = (0..v.len())
        .filter(|&k| v[k] < 0.0 && pers.get(&k).is_some_and(|&p| p >= floor))
        .filter(|&k| passes_ring_test(v, &nbrs, k, ring_depth))
        .map(|k| Minimum { node: k, point: field.dofs.points()[k], value: v[k] })
        .collect();
    out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.node.cmp(&b.node)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub minimum: usize,
    /// Upper bounding iso-level.
    pub level: f64,
    pub nodes: Vec<usize>,
}

/// Uniform iso-levels from the global minimum to the maximum.
pub fn iso_levels(field: &TopoField, n_levels: usize) -> Vec<f64> {
    let (lo, hi) = (field.global_min.1, field.max());
    (0..n_levels).map(|k| lo + (hi - lo) * k as f64 / (n_levels - 1) as f64).collect()
}

/// For each minimum (deepest first), the connected set of unclaimed nodes
/// lying below the first iso-level above the minimum's value.
pub fn extract_basins(field: &TopoField, minima: &[Minimum], n_levels: usize) -> Result<Vec<Basin>> {
    if n_levels < 2 {
        return Err(Error::invalid("at least two iso-levels are required"));
    }
    let levels = iso_levels(field, n_levels);
    let nbrs = field.dofs.node_neighbors();
    let v = &field.values;
    let mut claimed = vec![false; v.len()];
    let mut sorted: Vec<&Minimum> = minima.iter().filter(|m| m.value < 0.0).collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut basins = Vec::new();
    for m in sorted {
        let Some(&level) = levels.iter().find(|&&l| l > m.value) else { continue };
        if claimed[m.node] {
            continue;
        }
        let mut nodes = vec![m.node];
        claimed[m.node] = true;
        let mut queue = VecDeque::from([m.node]);
        while let Some(a) = queue.pop_front() {
            for &b in &nbrs[a] {
                if !claimed[b] && v[b] < level {
                    claimed[b] = true;
                    nodes.push(b);
                    queue.push_back(b);
                }
            }
        }
        nodes.sort_unstable();
        basins.push(Basin { minimum: m.node, level, nodes });
    }
    Ok(basins)
}

/// Center = mean of the minima; radius = `r_cal·|deepest|/range`.
pub fn estimate_center_radius(minima: &[Minimum], field: &TopoField, r_cal: f64) -> Result<([f64; 2], f64)> {
    if minima.is_empty() {
        return Err(Error::NoMinima);
    }
    let n = minima.len() as f64;
    let center = [
        minima.iter().map(|m| m.point[0]).sum::<f64>() / n,
        minima.iter().map(|m| m.point[1]).sum::<f64>() / n,
    ];
    let deepest = minima.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let range = field.range();
    let radius = if range > 0.0 { r_cal * deepest.abs() / range } else { 0.0 };
    Ok((center, radius))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub ring_depth: usize,
    pub n_levels: usize,
    pub r_cal: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { ring_depth: 2, n_levels: 30, r_cal: R_CAL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedMinimum {
    pub node: usize,
    pub point: [f64; 2],
    pub value: f64,
    pub basin: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub minima: Vec<DetectedMinimum>,
    pub center_estimate: [f64; 2],
    pub radius_estimate: f64,
    pub iso_levels: Vec<f64>,
    pub global_min: Minimum,
}

/// State with `μ = 0`, adjoint with source `−2u_i`, and the gradient field.
/// `system` must be assembled without reaction.
pub fn topo_gradient_from_data(system: &SystemMatrix, data: &CauchyData) -> Result<(ComplexField, TopoField)> {
    let u = system.solve_state(data)?;
    let v = system.solve_adjoint(&u.im)?;
    let field = topo_gradient_field(&u, &v, system.dofs().clone())?;
    Ok((u, field))
}

/// Reads the negative minima of a computed field.
pub fn detect(field: &TopoField, u: &ComplexField, cfg: &DetectConfig) -> Result<DetectionResult> {
    let scale = u.re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if field.global_min.1 >= -1e-9 * scale * scale {
        return Err(Error::NoNegativeMinimum);
    }
    let minima = find_local_minima(field, cfg.ring_depth)?;
    if minima.is_empty() {
        return Err(Error::NoNegativeMinimum);
    }
    let basins = extract_basins(field, &minima, cfg.n_levels)?;
    let (center, radius) = estimate_center_radius(&minima, field, cfg.r_cal)?;
    let detected = minima
        .iter()
        .map(|m| DetectedMinimum {
            node: m.node,
            point: m.point,
            value: m.value,
            basin: basins.iter().find(|b| b.minimum == m.node).map(|b| b.nodes.clone()).unwrap_or_default(),
        })
        .collect();
    let (gn, gv) = field.global_min;
    Ok(DetectionResult {
        minima: detected,
        center_estimate: center,
        radius_estimate: radius,
        iso_levels: iso_levels(field, cfg.n_levels),
        global_min: Minimum { node: gn, point: field.dofs.points()[gn], value: gv },
    })
}

/// One-shot identification from the empty configuration.
pub fn one_shot_detect(system: &SystemMatrix, data: &CauchyData, cfg: &DetectConfig) -> Result<(TopoField, DetectionResult)> {
    let (u, field) = topo_gradient_from_data(system, data)?;
    let result = detect(&field, &u, cfg)?;
    Ok((field, result))
}
