use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::registration::Mesh;

use super::{read_text, write_atomic};

/// Loads a Wavefront OBJ in millimetres. Only `v` and `f` records are used;
/// polygons are fan-triangulated and degenerate triangles dropped (see
/// [`Mesh::dropped_triangles`]).
pub fn load_obj(path: &Path) -> Result<Mesh> {
    parse_obj(&read_text(path)?, path)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut it = raw.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::parse(path, line, format!("bad vertex '{}'", raw.trim())))?;
                if coords.len() != 3 {
                    return Err(Error::parse(path, line, "vertex needs three coordinates".to_string()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx = it
                    .map(|tok| face_index(tok, vertices.len()))
                    .collect::<Option<Vec<usize>>>()
                    .ok_or_else(|| Error::parse(path, line, format!("bad face '{}'", raw.trim())))?;
                if idx.len() < 3 {
                    return Err(Error::parse(
                        path,
                        line,
                        "face needs at least three vertices".to_string(),
                    ));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// `v`, `v/vt`, `v//vn` or `v/vt/vn`; negative indices count from the end.
fn face_index(tok: &str, count: usize) -> Option<usize> {
    let v: i64 = tok.split('/').next()?.parse().ok()?;
    let i = if v > 0 { v - 1 } else { count as i64 + v };
    (0..count as i64).contains(&i).then_some(i as usize)
}

pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::from("# units=mm\n");
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn save_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    write_atomic(path, write_obj(mesh).as_bytes())
}
