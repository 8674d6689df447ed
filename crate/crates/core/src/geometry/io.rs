//! Text mesh format with header `CYWMESH 1`.
//!
//! ```text
//! CYWMESH 1
//! DIM 3
//! PERIOD 1            (optional)
//! VERTICES n
//! 0 x y z
//! TETS m
//! a b c d
//! BFACES k
//! a b c sign
//! FLAGS n
//! 0|1                 (1 = boundary)
//! ```

use super::Mesh;
use crate::error::{CywError, Result, Stage};
use std::fmt::Write as _;

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "CYWMESH 1");
    let _ = writeln!(s, "DIM {}", mesh.dim());
    if let Some(p) = mesh.period() {
        let _ = writeln!(s, "PERIOD {p:?}");
    }
    let _ = writeln!(s, "VERTICES {}", mesh.vertex_count());
    for v in 0..mesh.vertex_count() {
        let _ = write!(s, "{v}");
        for c in mesh.vertex(v) {
            let _ = write!(s, " {c:?}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "TETS {}", mesh.tets().len());
    for t in mesh.tets() {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "BFACES {}", mesh.boundary_faces().len());
    for f in mesh.boundary_faces() {
        let _ = writeln!(s, "{} {} {} {}", f.vertices[0], f.vertices[1], f.vertices[2], f.orientation);
    }
    let _ = writeln!(s, "FLAGS {}", mesh.vertex_count());
    for v in 0..mesh.vertex_count() {
        let _ = writeln!(s, "{}", u8::from(mesh.is_boundary(v)));
    }
    s
}

fn bad(line: usize, msg: impl Into<String>) -> CywError {
    CywError::invalid(Stage::Geometry, format!("mesh file line {line}: {}", msg.into()))
}

/// Parses a mesh and checks that the stored boundary faces and flags agree
/// with the ones recomputed from the tetrahedra.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(0, format!("unexpected end of file, expected {what}")));

    let (ln, header) = next("header")?;
    if header != "CYWMESH 1" {
        return Err(bad(ln, "missing 'CYWMESH 1' header"));
    }
    let section = |(ln, l): (usize, &str), name: &str| -> Result<Vec<String>> {
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Err(bad(ln, format!("expected section {name}")));
        }
        Ok(it.map(str::to_string).collect())
    };
    let num = |ln: usize, s: &str| -> Result<usize> { s.parse().map_err(|_| bad(ln, format!("bad integer '{s}'"))) };

    let l = next("DIM")?;
    let dim = num(l.0, section(l, "DIM")?.first().map(String::as_str).unwrap_or(""))?;
    let mut l = next("VERTICES")?;
    let mut period = None;
    if l.1.starts_with("PERIOD") {
        let v = section(l, "PERIOD")?;
        period = Some(v.first().and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(l.0, "bad period"))?);
        l = next("VERTICES")?;
    }
    let nv = num(l.0, section(l, "VERTICES")?.first().map(String::as_str).unwrap_or(""))?;
    let mut coords = Vec::with_capacity(nv * dim);
    for i in 0..nv {
        let (ln, row) = next("vertex")?;
        let parts: Vec<&str> = row.split_whitespace().collect();
        if parts.len() != dim + 1 || num(ln, parts[0])? != i {
            return Err(bad(ln, "malformed vertex row"));
        }
        for p in &parts[1..] {
            coords.push(p.parse::<f64>().map_err(|_| bad(ln, format!("bad coordinate '{p}'")))?);
        }
    }
    let l = next("TETS")?;
    let nt = num(l.0, section(l, "TETS")?.first().map(String::as_str).unwrap_or(""))?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, row) = next("tetrahedron")?;
        let idx: Vec<usize> = row.split_whitespace().map(|s| num(ln, s)).collect::<Result<_>>()?;
        if idx.len() != 4 {
            return Err(bad(ln, "tetrahedron row needs 4 indices"));
        }
        tets.push([idx[0], idx[1], idx[2], idx[3]]);
    }
    let l = next("BFACES")?;
    let nb = num(l.0, section(l, "BFACES")?.first().map(String::as_str).unwrap_or(""))?;
    let mut faces = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, row) = next("boundary face")?;
        let parts: Vec<&str> = row.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(bad(ln, "boundary face row needs 3 indices and a sign"));
        }
        let v = [num(ln, parts[0])?, num(ln, parts[1])?, num(ln, parts[2])?];
        let sign: i8 = parts[3].parse().map_err(|_| bad(ln, "bad orientation sign"))?;
        faces.push((v, sign));
    }
    let l = next("FLAGS")?;
    let nf = num(l.0, section(l, "FLAGS")?.first().map(String::as_str).unwrap_or(""))?;
    let mut flags = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, row) = next("flag")?;
        flags.push(match row {
            "0" => false,
            "1" => true,
            _ => return Err(bad(ln, "flag must be 0 or 1")),
        });
    }

    let mut mesh = Mesh::new(dim, coords, tets, period)?;
    if mesh.boundary_faces().len() != faces.len() {
        return Err(CywError::invalid(Stage::Geometry, "stored boundary faces disagree with the tetrahedra"));
    }
    for (f, (v, _)) in mesh.boundary_faces().iter().zip(&faces) {
        if f.vertices != *v {
            return Err(CywError::invalid(Stage::Geometry, "stored boundary face order disagrees with the tetrahedra"));
        }
    }
    if flags.len() != mesh.vertex_count() || flags.iter().enumerate().any(|(v, &b)| b != mesh.is_boundary(v)) {
        return Err(CywError::invalid(Stage::Geometry, "stored vertex flags disagree with the tetrahedra"));
    }
    let signs: Vec<i8> = faces.iter().map(|f| f.1).collect();
    mesh.set_face_orientations(&signs);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_preset;

    #[test]
    fn round_trip_preserves_mesh() {
        let (mesh, _) = build_preset("annulus", 0).unwrap();
        let text = write_mesh(&mesh);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.id(), mesh.id());
        assert_eq!(back.boundary_faces(), mesh.boundary_faces());
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(read_mesh("DIM 3\n").is_err());
    }
}
