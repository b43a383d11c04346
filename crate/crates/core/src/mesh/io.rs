//! Plain-text and legacy-VTK mesh I/O.
//!
//! Text layout: a header line `vertices N triangles M`, then `N` lines of
//! `x y`, then `M` lines of zero-based vertex index triples.

use std::io::{BufRead, Write};

use super::{Mesh, Rect};
use crate::error::{Error, Result};

pub fn write_text<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "vertices {} triangles {}", mesh.num_vertices(), mesh.num_triangles())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Reads a mesh written by [`write_text`]. The bounding rectangle is taken
/// from the vertex extents.
pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    let (line_no, header) = lines.next().ok_or_else(|| parse_err(1, "empty input".into()))?;
    let header = header?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (nv, nt) = match tokens.as_slice() {
        ["vertices", n, "triangles", m] => (
            n.parse::<usize>().map_err(|e| parse_err(line_no, e.to_string()))?,
            m.parse::<usize>().map_err(|e| parse_err(line_no, e.to_string()))?,
        ),
        _ => return Err(parse_err(line_no, format!("bad header `{header}`"))),
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "missing vertex lines".into()))?;
        let line = line?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(ln, e.to_string())))
            .collect::<Result<_>>()?;
        if v.len() != 2 {
            return Err(parse_err(ln, "expected two coordinates".into()));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "missing triangle lines".into()))?;
        let line = line?;
        let v: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| parse_err(ln, e.to_string())))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(parse_err(ln, "expected three vertex indices".into()));
        }
        triangles.push([v[0], v[1], v[2]]);
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &vertices {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    Mesh::from_parts(vertices, triangles, Rect::new(xmin, xmax, ymin, ymax)?)
}

/// Legacy VTK unstructured grid with the region tag as cell data and any
/// number of vertex scalar fields as point data.
pub fn write_vtk<W: Write>(mesh: &Mesh, point_data: &[(&str, &[f64])], mut w: W) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "ccbm mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", mesh.num_triangles(), 4 * mesh.num_triangles())?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.num_triangles())?;
    for _ in 0..mesh.num_triangles() {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {}", mesh.num_triangles())?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &r in mesh.element_region() {
        writeln!(w, "{}", u8::from(r))?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, values) in point_data {
            if values.len() < mesh.num_vertices() {
                return Err(Error::invalid(format!("point field `{name}` is too short")));
            }
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            // higher-order fields store vertex values first
            for v in &values[..mesh.num_vertices()] {
                writeln!(w, "{v}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;

    #[test]
    fn text_round_trip() {
        let m = build_rect_mesh(3, 2, Rect::new(-0.5, 0.5, -0.5, 0.5).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_text(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vertices 12 triangles 12\n"));
        let back = read_text(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_header_reports_line() {
        let err = read_text("verts 3 tris 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn vtk_has_sections() {
        let m = build_rect_mesh(2, 2, Rect::centered_unit()).unwrap();
        let field = vec![1.0; m.num_vertices()];
        let mut buf = Vec::new();
        write_vtk(&m, &[("u", &field)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        for key in ["POINTS 9 double", "CELLS 8 32", "CELL_TYPES 8", "POINT_DATA 9", "SCALARS u double 1"] {
            assert!(s.contains(key), "missing {key}");
        }
    }
}
