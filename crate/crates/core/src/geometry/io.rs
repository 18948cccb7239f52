//! STL (ASCII and binary) and OBJ reading and writing.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, TriMesh};
use crate::scalar::Real;

/// Loads a mesh file, scales it about the origin and computes mass properties
/// for a uniform `density` (kg/m³).
///
/// The format is chosen from the extension (`.stl` / `.obj`, case-insensitive).
pub fn load_mesh<T: Real>(path: &Path, scale: T, density: T) -> Result<TriMesh<T>, GeometryError> {
    let bytes = std::fs::read(path).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (verts, tris) = match ext.as_deref() {
        Some("stl") => parse_stl(&bytes)?,
        Some("obj") => parse_obj(std::str::from_utf8(&bytes).map_err(|e| GeometryError::Parse(e.to_string()))?)?,
        other => return Err(GeometryError::Parse(format!("unsupported mesh extension {other:?}"))),
    };
    let verts = verts
        .into_iter()
        .map(|v| Point3::new(T::lit(v[0]) * scale, T::lit(v[1]) * scale, T::lit(v[2]) * scale))
        .collect();
    TriMesh::new(verts, tris, density)
}

type RawMesh = (Vec<[f64; 3]>, Vec<[u32; 3]>);

pub fn parse_stl(bytes: &[u8]) -> Result<RawMesh, GeometryError> {
    let is_binary = bytes.len() >= 84 && {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        bytes.len() == 84 + 50 * n
    };
    let soup = if is_binary {
        parse_stl_binary(bytes)
    } else if bytes.trim_ascii_start().starts_with(b"solid") {
        parse_stl_ascii(std::str::from_utf8(bytes).map_err(|e| GeometryError::Parse(e.to_string()))?)?
    } else {
        return Err(GeometryError::Parse("not an STL file".into()));
    };
    Ok(weld(&soup))
}

fn parse_stl_binary(bytes: &[u8]) -> Vec<[[f64; 3]; 3]> {
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    (0..n)
        .map(|i| {
            let base = 84 + 50 * i + 12;
            std::array::from_fn(|v| std::array::from_fn(|k| f(base + 12 * v + 4 * k)))
        })
        .collect()
}

fn parse_stl_ascii(text: &str) -> Result<Vec<[[f64; 3]; 3]>, GeometryError> {
    let mut out = Vec::new();
    let mut current: Vec<[f64; 3]> = Vec::with_capacity(3);
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let mut v = [0.0; 3];
                for slot in &mut v {
                    *slot = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| GeometryError::Parse(format!("line {}: bad vertex", lineno + 1)))?;
                }
                current.push(v);
            }
            Some("endloop") => {
                if current.len() != 3 {
                    return Err(GeometryError::Parse(format!(
                        "line {}: facet with {} vertices",
                        lineno + 1,
                        current.len()
                    )));
                }
                out.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Merges bit-identical vertices of a triangle soup.
fn weld(soup: &[[[f64; 3]; 3]]) -> RawMesh {
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut verts = Vec::new();
    let tris = soup
        .iter()
        .map(|tri| {
            tri.map(|v| {
                *index.entry(v.map(f64::to_bits)).or_insert_with(|| {
                    verts.push(v);
                    verts.len() as u32 - 1
                })
            })
        })
        .collect();
    (verts, tris)
}

pub fn parse_obj(text: &str) -> Result<RawMesh, GeometryError> {
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |msg: &str| GeometryError::Parse(format!("line {}: {msg}", lineno + 1));
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for slot in &mut v {
                    *slot = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| err("bad vertex"))?;
                }
                verts.push(v);
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                        let resolved = if i < 0 { verts.len() as i64 + i } else { i - 1 };
                        if resolved < 0 || resolved >= verts.len() as i64 {
                            return Err(err("face index out of range"));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(err("only triangulated faces are supported"));
                }
                tris.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((verts, tris))
}

/// Serializes a mesh as OBJ (1-based `v`/`f` records).
pub fn write_obj<T: Real>(mesh: &TriMesh<T>) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x.to_f64_lossy(), v.y.to_f64_lossy(), v.z.to_f64_lossy());
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// Serializes a mesh as binary little-endian STL.
pub fn write_stl_binary<T: Real>(mesh: &TriMesh<T>) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for (i, _) in mesh.triangles.iter().enumerate() {
        let n = mesh.normals[i];
        for c in [n.x, n.y, n.z] {
            out.extend_from_slice(&(c.to_f64_lossy() as f32).to_le_bytes());
        }
        for v in mesh.triangle(i) {
            for c in [v.x, v.y, v.z] {
                out.extend_from_slice(&(c.to_f64_lossy() as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}
