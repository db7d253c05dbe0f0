//! ASCII OBJ input and ASCII PLY input/output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses the `v`/`f` subset of OBJ. Other records are ignored; texture and
/// normal references after `/` are dropped. Negative indices count back from
/// the most recent vertex, as in the OBJ format.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut p = [0.0; 3];
                for (k, tok) in coords.iter().take(3).enumerate() {
                    p[k] = tok.parse().map_err(|_| Error::MalformedLine {
                        line: line_no,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(Error::NonTriangleFace {
                        line: line_no,
                        count: refs.len(),
                    });
                }
                let mut face = [0usize; 3];
                for (k, tok) in refs.iter().enumerate() {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| Error::MalformedLine {
                        line: line_no,
                        message: format!("bad vertex reference {tok:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let zero_based = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => n + i,
                        _ => -1,
                    };
                    if zero_based < 0 || zero_based >= n {
                        return Err(Error::IndexOutOfRange {
                            index: idx,
                            count: vertices.len(),
                        });
                    }
                    face[k] = zero_based as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Writes an ASCII PLY with x, y, z and one `double` property per named
/// field, followed by the face list.
pub fn save_ply(mesh: &TriMesh, fields: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_fields(mesh, fields)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_ply(mesh, fields, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_ply<W: Write>(mesh: &TriMesh, fields: &[(&str, &[f64])], out: &mut W) -> std::io::Result<()> {
    if let Err(e) = check_fields(mesh, fields) {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()));
    }
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    for (name, _) in fields {
        writeln!(out, "property double {name}")?;
    }
    writeln!(out, "element face {}", mesh.face_count())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "end_header")?;
    for (i, p) in mesh.vertices().iter().enumerate() {
        write!(out, "{} {} {}", p[0], p[1], p[2])?;
        for (_, values) in fields {
            write!(out, " {}", values[i])?;
        }
        writeln!(out)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

fn check_fields(mesh: &TriMesh, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in fields {
        if values.len() != mesh.vertex_count() {
            return Err(Error::LengthMismatch {
                what: "vertex field",
                expected: mesh.vertex_count(),
                found: values.len(),
            });
        }
        if name.is_empty() || name.contains(char::is_whitespace) || ["x", "y", "z"].contains(name) {
            return Err(Error::InvalidInput(format!("invalid PLY property name {name:?}")));
        }
    }
    Ok(())
}

/// Named per-vertex fields, in file order.
pub type VertexProperties = Vec<(String, Vec<f64>)>;

/// Reads an ASCII PLY with triangle faces. Vertex properties other than
/// x, y, z are returned as named fields in header order.
pub fn load_ply(path: impl AsRef<Path>) -> Result<(TriMesh, VertexProperties)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text)
}

fn parse_ply(text: &str) -> Result<(TriMesh, VertexProperties)> {
    let malformed = |line: usize, message: &str| Error::MalformedLine {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(malformed(1, "missing `ply` magic")),
    }

    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    loop {
        let (no, line) = lines.next().ok_or_else(|| malformed(0, "missing end_header"))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(malformed(no, "only ASCII PLY is supported")),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                n_vertices = n.parse().map_err(|_| malformed(no, "bad vertex count"))?;
                current = "vertex";
            }
            ["element", "face", n] => {
                n_faces = n.parse().map_err(|_| malformed(no, "bad face count"))?;
                current = "face";
            }
            ["element", ..] => return Err(malformed(no, "unsupported element")),
            ["property", "list", ..] if current == "face" => {}
            ["property", _, name] if current == "vertex" => vertex_props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(malformed(no, "unrecognised header line")),
        }
    }
    let axis = |name: &str| {
        vertex_props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| malformed(0, "vertex element lacks x/y/z"))
    };
    let (ix, iy, iz) = (axis("x")?, axis("y")?, axis("z")?);

    let mut vertices = Vec::with_capacity(n_vertices);
    let mut columns = vec![Vec::with_capacity(n_vertices); vertex_props.len()];
    for _ in 0..n_vertices {
        let (no, line) = lines.next().ok_or_else(|| malformed(0, "truncated vertex list"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed(no, "bad vertex value"))?;
        if values.len() != vertex_props.len() {
            return Err(malformed(no, "wrong number of vertex properties"));
        }
        vertices.push([values[ix], values[iy], values[iz]]);
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (no, line) = lines.next().ok_or_else(|| malformed(0, "truncated face list"))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed(no, "bad face index"))?;
        match idx.as_slice() {
            [3, a, b, c] => faces.push([*a, *b, *c]),
            [k, ..] => return Err(Error::NonTriangleFace { line: no, count: *k }),
            [] => return Err(malformed(no, "empty face")),
        }
    }
    let fields = vertex_props
        .into_iter()
        .zip(columns)
        .filter(|(name, _)| !["x", "y", "z"].contains(&name.as_str()))
        .collect();
    Ok((TriMesh::new(vertices, faces)?, fields))
}
