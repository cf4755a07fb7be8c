//! Minimal Wavefront OBJ reader/writer (`v` and `f` records only).

use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use crate::geometry::{TriangleMesh, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: index out of range ({index} with {vertex_count} vertices)")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("input is not valid UTF-8")]
    Encoding,
}

/// Parses ASCII OBJ text. Polygons with more than three corners are fan-triangulated;
/// texture and normal indices are dropped.
pub fn load_mesh<T: Real>(bytes: &[u8]) -> Result<TriangleMesh<T>, ObjError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ObjError::Encoding)?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut ignored = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        match tag {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(malformed(line_no, "vertex needs 3 coordinates"));
                }
                let mut xyz = [T::zero(); 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| malformed(line_no, &format!("bad coordinate {tok:?}")))?;
                    if !v.is_finite() {
                        return Err(malformed(line_no, "non-finite coordinate"));
                    }
                    *slot = T::lit(v);
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| malformed(line_no, &format!("bad face index {tok:?}")))?;
                    corners.push(resolve_index(idx, vertices.len(), line_no)?);
                }
                if corners.len() < 3 {
                    return Err(malformed(line_no, "face needs at least 3 vertices"));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => ignored += 1,
        }
    }
    if ignored > 0 {
        warn!("ignored {ignored} unsupported OBJ records");
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
    })
}

fn malformed(line: usize, message: &str) -> ObjError {
    ObjError::Malformed {
        line,
        message: message.to_string(),
    }
}

// Indices are 1-based; negative ones count back from the latest vertex. Faces may only
// reference vertices that were already declared.
fn resolve_index(idx: i64, vertex_count: usize, line: usize) -> Result<usize, ObjError> {
    let n = vertex_count as i64;
    let resolved = if idx > 0 { idx - 1 } else { n + idx };
    if idx == 0 || resolved < 0 || resolved >= n {
        return Err(ObjError::IndexOutOfRange {
            line,
            index: idx,
            vertex_count,
        });
    }
    Ok(resolved as usize)
}

/// Serializes a mesh as OBJ text. Coordinates use Rust's shortest round-trip formatting.
pub fn write_obj<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64());
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
o cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
";

    #[test]
    fn single_triangle() {
        let m: TriangleMesh<f64> = load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn cube_quads_are_fanned() {
        let m: TriangleMesh<f64> = load_mesh(CUBE.as_bytes()).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
    }

    #[test]
    fn slash_and_negative_indices() {
        let m: TriangleMesh<f32> =
            load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let err = load_mesh::<f64>(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap_err();
        assert_eq!(
            err,
            ObjError::IndexOutOfRange {
                line: 4,
                index: 9,
                vertex_count: 3
            }
        );
        assert!(err.to_string().contains("index out of range"));
    }

    #[test]
    fn malformed_vertex() {
        let err = load_mesh::<f64>(b"v 0 0\n").unwrap_err();
        assert!(matches!(err, ObjError::Malformed { line: 1, .. }));
        let err = load_mesh::<f64>(b"v 0 0 0\nv 0 x 0\n").unwrap_err();
        assert!(matches!(err, ObjError::Malformed { line: 2, .. }));
    }

    #[test]
    fn write_then_load_keeps_counts() {
        let m: TriangleMesh<f64> = load_mesh(CUBE.as_bytes()).unwrap();
        let again: TriangleMesh<f64> = load_mesh(write_obj(&m).as_bytes()).unwrap();
        assert_eq!(again, m);
    }
}
