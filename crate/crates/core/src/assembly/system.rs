use std::sync::Arc;

use super::dofs::DofMap;
use super::element::{self, Local};
use super::sparse::{refined_solve, CsrMatrix, LuFactor};
use super::{CauchyData, ComplexField};
use crate::error::{Error, Result};
use crate::mesh::InclusionSpec;

/// Relative residual accepted from the direct solver.
pub const SOLVE_TOL: f64 = 1e-10;

/// Reaction coefficient μ entering the zeroth-order term.
#[derive(Clone, Debug, Default)]
pub struct Reaction {
    /// `μ₀` on the mesh's tagged elements.
    pub tagged: Option<f64>,
    /// Regions integrated exactly (sub-cell quadrature), each with its own `μ₀`.
    pub regions: Vec<InclusionSpec>,
}

impl Reaction {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn tagged(mu0: f64) -> Self {
        Self { tagged: Some(mu0), regions: Vec::new() }
    }

    pub fn region(spec: InclusionSpec) -> Self {
        Self { tagged: None, regions: vec![spec] }
    }

    pub fn with_region(mut self, spec: InclusionSpec) -> Self {
        self.regions.push(spec);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.tagged.is_none() && self.regions.is_empty()
    }
}

fn scatter(entries: &mut Vec<(usize, usize, f64)>, dofs: &[usize], local: &Local, scale: f64) {
    for (a, &i) in dofs.iter().enumerate() {
        for (b, &j) in dofs.iter().enumerate() {
            let v = local[a][b];
            if v != 0.0 {
                entries.push((i, j, scale * v));
            }
        }
    }
}

fn assemble_cells(dofs: &DofMap, local: impl Fn(usize) -> Option<(Local, f64)>) -> CsrMatrix {
    let mut entries = Vec::new();
    for k in 0..dofs.mesh().num_triangles() {
        if let Some((m, s)) = local(k) {
            scatter(&mut entries, dofs.cell(k), &m, s);
        }
    }
    CsrMatrix::from_triplets(dofs.num_dofs(), entries)
}

pub fn assemble_stiffness(dofs: &DofMap) -> CsrMatrix {
    let d = dofs.degree();
    assemble_cells(dofs, |k| Some((element::stiffness(d, &dofs.mesh().corners(k)), 1.0)))
}

pub fn assemble_mass(dofs: &DofMap) -> CsrMatrix {
    let d = dofs.degree();
    assemble_cells(dofs, |k| Some((element::mass(d, &dofs.mesh().corners(k)), 1.0)))
}

pub fn assemble_reaction(dofs: &DofMap, reaction: &Reaction) -> CsrMatrix {
    let d = dofs.degree();
    let mesh = dofs.mesh();
    let mut m = CsrMatrix::from_triplets(dofs.num_dofs(), Vec::new());
    if let Some(mu0) = reaction.tagged {
        let tags = mesh.element_region();
        m = m.add(&assemble_cells(dofs, |k| tags[k].then(|| (element::mass(d, &mesh.corners(k)), mu0))));
    }
    for spec in &reaction.regions {
        m = m.add(&assemble_cells(dofs, |k| {
            element::region_mass(d, &mesh.corners(k), spec).map(|l| (l, spec.mu0()))
        }));
    }
    m
}

pub fn assemble_boundary_mass(dofs: &DofMap) -> CsrMatrix {
    let d = dofs.degree();
    let nf = d.facet_dofs();
    let mut entries = Vec::new();
    for f in dofs.facets() {
        let local = element::facet_mass(d, f.length);
        for a in 0..nf {
            for b in 0..nf {
                entries.push((f.dofs[a], f.dofs[b], local[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(dofs.num_dofs(), entries)
}

/// Discrete sesquilinear form `a(w, v) = (∇w,∇v) + (μw,v) + iβ⟨w,v⟩` as the
/// real block operator `[[K+M_μ, −βB], [βB, K+M_μ]]` on interleaved
/// `(re, im)` unknowns, factorized once.
///
/// The adjoint operator (boundary sign `−iβ`) is the block transpose, so
/// adjoint solves reuse the same factorization.
pub struct SystemMatrix {
    dofs: Arc<DofMap>,
    beta: f64,
    operator: CsrMatrix,
    mass: CsrMatrix,
    boundary: CsrMatrix,
    block: CsrMatrix,
    lu: LuFactor,
}

impl std::fmt::Debug for SystemMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemMatrix")
            .field("dofs", &self.dofs.num_dofs())
            .field("degree", &self.dofs.degree())
            .field("beta", &self.beta)
            .finish()
    }
}

impl SystemMatrix {
    pub fn assemble(dofs: Arc<DofMap>, reaction: &Reaction, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        let stiffness = assemble_stiffness(&dofs);
        let operator = stiffness.add(&assemble_reaction(&dofs, reaction));
        let mass = assemble_mass(&dofs);
        let boundary = assemble_boundary_mass(&dofs);
        let n = dofs.num_dofs();
        let mut entries = Vec::with_capacity(2 * operator.nnz() + 2 * boundary.nnz());
        for (i, j, v) in operator.iter() {
            entries.push((2 * i, 2 * j, v));
            entries.push((2 * i + 1, 2 * j + 1, v));
        }
        for (i, j, v) in boundary.iter() {
            entries.push((2 * i, 2 * j + 1, -beta * v));
            entries.push((2 * i + 1, 2 * j, beta * v));
        }
        let block = CsrMatrix::from_triplets(2 * n, entries);
        let lu = LuFactor::new(&block)?;
        Ok(Self { dofs, beta, operator, mass, boundary, block, lu })
    }

    pub fn dofs(&self) -> &Arc<DofMap> {
        &self.dofs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `K + M_μ`
    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Boundary mass `B` (the β-coupling block).
    pub fn boundary_mass(&self) -> &CsrMatrix {
        &self.boundary
    }

    pub fn block(&self) -> &CsrMatrix {
        &self.block
    }

    /// Load vector of `F(v) = ⟨g,v⟩ + iβ⟨f,v⟩` from nodal boundary data.
    pub fn state_rhs(&self, g_nodal: &[f64], f_nodal: &[f64]) -> ComplexField {
        let re = self.boundary.mul_vec(g_nodal);
        let im: Vec<f64> = self.boundary.mul_vec(f_nodal).into_iter().map(|v| self.beta * v).collect();
        ComplexField::new(re, im, self.dofs.degree())
    }

    /// Solves the state problem with Robin data `g + iβf`.
    pub fn solve_state(&self, data: &CauchyData) -> Result<ComplexField> {
        if data.len() != self.dofs.boundary_loop().len() {
            return Err(Error::invalid("Cauchy data does not match the mesh boundary"));
        }
        let g = self.dofs.scatter_boundary(&data.g)?;
        let f = self.dofs.scatter_boundary(&data.f)?;
        self.solve_state_rhs(&self.state_rhs(&g, &f))
    }

    pub fn solve_state_rhs(&self, rhs: &ComplexField) -> Result<ComplexField> {
        let b = rhs.interleave();
        let anorm = self.block.frobenius_norm();
        let x = refined_solve(|x| self.block.mul_vec(x), |r| self.lu.solve_in_place(r), &b, SOLVE_TOL, anorm)?;
        Ok(ComplexField::deinterleave(&x, self.dofs.degree()))
    }

    /// Adjoint `−Δv + μv = −2u_i`, `∂_ν v − iβv = 0`, with the source applied
    /// through the consistent mass matrix.
    pub fn solve_adjoint(&self, u_im: &[f64]) -> Result<ComplexField> {
        if u_im.len() != self.dofs.num_dofs() {
            return Err(Error::MeshMismatch);
        }
        let re: Vec<f64> = self.mass.mul_vec(u_im).into_iter().map(|v| -2.0 * v).collect();
        let rhs = ComplexField::new(re, vec![0.0; u_im.len()], self.dofs.degree());
        self.solve_adjoint_rhs(&rhs)
    }

    pub fn solve_adjoint_rhs(&self, rhs: &ComplexField) -> Result<ComplexField> {
        let b = rhs.interleave();
        let x = refined_solve(
            |x| self.apply_adjoint_interleaved(x),
            |r| self.lu.solve_transpose_in_place(r),
            &b,
            SOLVE_TOL,
            self.block.frobenius_norm(),
        )?;
        Ok(ComplexField::deinterleave(&x, self.dofs.degree()))
    }

    fn apply_adjoint_interleaved(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dofs.num_dofs();
        let mut y = vec![0.0; 2 * n];
        for (i, j, v) in self.block.iter() {
            y[j] += v * x[i];
        }
        y
    }

    /// Block operator applied to `u`: the discrete `a(u, ·)`.
    pub fn apply(&self, u: &ComplexField) -> ComplexField {
        ComplexField::deinterleave(&self.block.mul_vec(&u.interleave()), self.dofs.degree())
    }

    /// Adjoint block operator applied to `v`.
    pub fn apply_adjoint(&self, v: &ComplexField) -> ComplexField {
        ComplexField::deinterleave(&self.apply_adjoint_interleaved(&v.interleave()), self.dofs.degree())
    }

    /// `Re a(u,u) = ‖∇u_r‖² + (μu_r,u_r) + ‖∇u_i‖² + (μu_i,u_i)`
    pub fn real_energy(&self, u: &ComplexField) -> f64 {
        self.operator.form(&u.re, &u.re) + self.operator.form(&u.im, &u.im)
    }

    /// `J = ∫ u_i²`
    pub fn cost(&self, u: &ComplexField) -> f64 {
        self.mass.form(&u.im, &u.im)
    }
}
