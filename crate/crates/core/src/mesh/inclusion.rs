use serde::{Deserialize, Serialize};

use super::Rect;
use crate::error::{Error, Result};

/// Geometric building block of a contact region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Disc { center: [f64; 2], radius: f64 },
    /// Axis-aligned square.
    Square { center: [f64; 2], half_width: f64 },
}

/// Position of a triangle relative to a convex region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    Inside,
    Outside,
    Cut,
}

impl Primitive {
    pub fn center(&self) -> [f64; 2] {
        match *self {
            Primitive::Disc { center, .. } | Primitive::Square { center, .. } => center,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Primitive::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Primitive::Square { center, half_width } => {
                (p[0] - center[0]).abs() < half_width && (p[1] - center[1]).abs() < half_width
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            Primitive::Square { half_width, .. } => 4.0 * half_width * half_width,
        }
    }

    /// Unsigned distance from `p` to the boundary curve.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Primitive::Disc { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs(),
            Primitive::Square { center, half_width } => {
                let dx = (p[0] - center[0]).abs() - half_width;
                let dy = (p[1] - center[1]).abs() - half_width;
                if dx > 0.0 || dy > 0.0 {
                    dx.max(0.0).hypot(dy.max(0.0))
                } else {
                    -dx.max(dy)
                }
            }
        }
    }

    /// `[xmin, xmax, ymin, ymax]`
    pub fn bbox(&self) -> [f64; 4] {
        let (c, r) = match *self {
            Primitive::Disc { center, radius } => (center, radius),
            Primitive::Square { center, half_width } => (center, half_width),
        };
        [c[0] - r, c[0] + r, c[1] - r, c[1] + r]
    }

    /// Signed distance of the boundary of the primitive to the rectangle
    /// boundary; positive when the primitive lies strictly inside.
    fn clearance(&self, bounds: &Rect) -> f64 {
        let [x0, x1, y0, y1] = self.bbox();
        (x0 - bounds.xmin)
            .min(bounds.xmax - x1)
            .min(y0 - bounds.ymin)
            .min(bounds.ymax - y1)
    }

    /// Classifies a triangle against the primitive. Both shapes are convex,
    /// so three interior vertices imply the whole triangle is inside.
    pub fn classify(&self, tri: &[[f64; 2]; 3]) -> Overlap {
        if tri.iter().all(|&p| self.contains(p)) {
            return Overlap::Inside;
        }
        let separated = match *self {
            Primitive::Disc { center, radius } => point_triangle_distance(center, tri) >= radius,
            Primitive::Square { center, half_width } => {
                square_triangle_separated(center, half_width, tri)
            }
        };
        if separated {
            Overlap::Outside
        } else {
            Overlap::Cut
        }
    }
}

fn point_triangle_distance(p: [f64; 2], tri: &[[f64; 2]; 3]) -> f64 {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let s0 = orient(tri[0], tri[1], p);
    let s1 = orient(tri[1], tri[2], p);
    let s2 = orient(tri[2], tri[0], p);
    let inside = (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0);
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|k| point_segment_distance(p, tri[k], tri[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - s * ab[0];
    let dy = ap[1] - s * ab[1];
    (dx * dx + dy * dy).sqrt()
}

// Separating-axis test over the square axes and the triangle edge normals.
fn square_triangle_separated(c: [f64; 2], hw: f64, tri: &[[f64; 2]; 3]) -> bool {
    let square = [
        [c[0] - hw, c[1] - hw],
        [c[0] + hw, c[1] - hw],
        [c[0] + hw, c[1] + hw],
        [c[0] - hw, c[1] + hw],
    ];
    let mut axes = vec![[1.0, 0.0], [0.0, 1.0]];
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        axes.push([b[1] - a[1], a[0] - b[0]]);
    }
    axes.iter().any(|ax| {
        let proj = |p: &[f64; 2]| p[0] * ax[0] + p[1] * ax[1];
        let (smin, smax) = square
            .iter()
            .map(proj)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (tmin, tmax) = tri
            .iter()
            .map(proj)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        smax <= tmin || tmax <= smin
    })
}

/// Contact region ω given as a union of primitives, with reaction
/// coefficient `mu0` active inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    shapes: Vec<Primitive>,
    mu0: f64,
}

impl InclusionSpec {
    /// Validates that `mu0 > 0` and that every primitive is non-degenerate
    /// and keeps a positive distance to the boundary of `domain`.
    pub fn new(shapes: Vec<Primitive>, mu0: f64, domain: &Rect) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid(format!("mu0 must be positive, got {mu0}")));
        }
        if shapes.is_empty() {
            return Err(Error::invalid("inclusion needs at least one shape"));
        }
        for (k, s) in shapes.iter().enumerate() {
            let size = match *s {
                Primitive::Disc { radius, .. } => radius,
                Primitive::Square { half_width, .. } => half_width,
            };
            if !(size > 0.0 && size.is_finite()) {
                return Err(Error::invalid(format!("shape {k} has non-positive size")));
            }
            if s.clearance(domain) <= 0.0 {
                return Err(Error::invalid(format!(
                    "shape {k} is not strictly inside the domain"
                )));
            }
        }
        Ok(Self { shapes, mu0 })
    }

    pub fn disc(center: [f64; 2], radius: f64, mu0: f64, domain: &Rect) -> Result<Self> {
        Self::new(vec![Primitive::Disc { center, radius }], mu0, domain)
    }

    pub fn shapes(&self) -> &[Primitive] {
        &self.shapes
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn with_mu0(&self, mu0: f64) -> Self {
        Self { shapes: self.shapes.clone(), mu0 }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.shapes.iter().any(|s| s.contains(p))
    }

    /// Distance from `p` to the nearest primitive boundary.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.shapes.iter().map(|s| s.boundary_distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Sum of primitive areas (exact when the primitives are disjoint).
    pub fn nominal_area(&self) -> f64 {
        self.shapes.iter().map(Primitive::area).sum()
    }

    pub fn classify(&self, tri: &[[f64; 2]; 3]) -> Overlap {
        let mut all_outside = true;
        for s in &self.shapes {
            match s.classify(tri) {
                Overlap::Inside => return Overlap::Inside,
                Overlap::Cut => all_outside = false,
                Overlap::Outside => {}
            }
        }
        if all_outside {
            Overlap::Outside
        } else {
            Overlap::Cut
        }
    }
}
