//! Finite-element assembly and solves for the complex-Robin state, the
//! adjoint problems, and the Sobolev extension of shape gradients.

pub mod dofs;
pub mod element;
pub mod sobolev;
pub mod sparse;
pub mod system;

use std::io::Write;
use std::sync::Arc;

pub use dofs::{Degree, DofMap, Facet};
pub use sobolev::{h1_norm_sq, interface_pairing, solve_sobolev_extension, SobolevOperator};
pub use sparse::{CholFactor, CsrMatrix, LuFactor};
pub use system::{
    assemble_boundary_mass, assemble_mass, assemble_reaction, assemble_stiffness, Reaction, SystemMatrix, SOLVE_TOL,
};

use crate::error::{Error, Result};
use crate::mesh::{InclusionSpec, Mesh};

/// Nodal complex field `u = u_r + i u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub degree: Degree,
}

impl ComplexField {
    pub fn new(re: Vec<f64>, im: Vec<f64>, degree: Degree) -> Self {
        assert_eq!(re.len(), im.len(), "real and imaginary parts differ in length");
        Self { re, im, degree }
    }

    pub fn zeros(n: usize, degree: Degree) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n], degree)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// `[re₀, im₀, re₁, im₁, …]`
    pub fn interleave(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).flat_map(|(&r, &i)| [r, i]).collect()
    }

    pub fn deinterleave(x: &[f64], degree: Degree) -> Self {
        let re = x.iter().step_by(2).copied().collect();
        let im = x.iter().skip(1).step_by(2).copied().collect();
        Self::new(re, im, degree)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.re.iter().map(|v| s * v).collect(),
            self.im.iter().map(|v| s * v).collect(),
            self.degree,
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).fold(0.0, f64::max)
    }

    /// CSV with header `node,x,y,re,im`.
    pub fn write_csv<W: Write>(&self, dofs: &DofMap, mut w: W) -> Result<()> {
        if dofs.num_dofs() != self.len() || dofs.degree() != self.degree {
            return Err(Error::MeshMismatch);
        }
        writeln!(w, "node,x,y,re,im")?;
        for (k, p) in dofs.points().iter().enumerate() {
            writeln!(w, "{k},{},{},{},{}", p[0], p[1], self.re[k], self.im[k])?;
        }
        Ok(())
    }
}

/// Boundary Cauchy pair `(g, f)` sampled at the boundary-loop nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData {
    pub arclength: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Neumann flux.
    pub g: Vec<f64>,
    /// Dirichlet measurement.
    pub f: Vec<f64>,
}

impl CauchyData {
    pub fn new(dofs: &DofMap, g: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let n = dofs.boundary_loop().len();
        if g.len() != n || f.len() != n {
            return Err(Error::invalid(format!(
                "Cauchy data lengths ({}, {}) differ from {n} boundary nodes",
                g.len(),
                f.len()
            )));
        }
        let points = dofs.boundary_loop().iter().map(|&d| dofs.points()[d]).collect();
        Ok(Self { arclength: dofs.arclength().to_vec(), points, g, f })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.g.iter().chain(&self.f).all(|&v| v == 0.0)
    }

    pub fn with_f(&self, f: Vec<f64>) -> Self {
        assert_eq!(f.len(), self.len());
        Self { f, ..self.clone() }
    }

    /// CSV with header `s,x,y,g,f`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,x,y,g,f")?;
        for k in 0..self.len() {
            let p = self.points[k];
            writeln!(w, "{},{},{},{},{}", self.arclength[k], p[0], p[1], self.g[k], self.f[k])?;
        }
        Ok(())
    }
}

fn reaction_for(spec: Option<&InclusionSpec>) -> Reaction {
    spec.map_or_else(Reaction::none, |s| Reaction::region(s.clone()))
}

/// Assembles and factorizes the block system. A given inclusion enters as
/// `μ₀χ_ω` integrated exactly over the cut cells.
pub fn assemble_ccbm(mesh: &Mesh, spec: Option<&InclusionSpec>, beta: f64, degree: Degree) -> Result<SystemMatrix> {
    SystemMatrix::assemble(Arc::new(DofMap::new(mesh, degree)), &reaction_for(spec), beta)
}

pub fn solve_state(
    mesh: &Mesh,
    spec: Option<&InclusionSpec>,
    beta: f64,
    data: &CauchyData,
    degree: Degree,
) -> Result<ComplexField> {
    if data.is_trivial() {
        return Err(Error::invalid("Cauchy data is identically zero"));
    }
    assemble_ccbm(mesh, spec, beta, degree)?.solve_state(data)
}

pub fn solve_topo_adjoint(
    mesh: &Mesh,
    spec: Option<&InclusionSpec>,
    beta: f64,
    u_im: &[f64],
    degree: Degree,
) -> Result<ComplexField> {
    assemble_ccbm(mesh, spec, beta, degree)?.solve_adjoint(u_im)
}

/// Adjoint for the shape stage, with `μ = μ₀` on the mesh's tagged region.
pub fn solve_shape_adjoint(mesh: &Mesh, mu0: f64, beta: f64, u_im: &[f64], degree: Degree) -> Result<ComplexField> {
    if mesh.num_tagged() == 0 {
        return Err(Error::EmptyInclusion);
    }
    if !(mu0 > 0.0) {
        return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
    }
    let sys = SystemMatrix::assemble(Arc::new(DofMap::new(mesh, degree)), &Reaction::tagged(mu0), beta)?;
    sys.solve_adjoint(u_im)
}

/// `J = ∫_Ω u_i²`, exact for the element order.
pub fn cost_j(u_im: &[f64], dofs: &DofMap) -> Result<f64> {
    if u_im.len() != dofs.num_dofs() {
        return Err(Error::MeshMismatch);
    }
    Ok(assemble_mass(dofs).form(u_im, u_im))
}
