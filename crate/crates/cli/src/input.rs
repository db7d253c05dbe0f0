use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use meshnoise::mesh::{icosphere, load_obj, load_ply, subdivide_midpoint, write_ply};
use meshnoise::noise::NoiseModel;
use meshnoise::{Error, Screening, TriMesh, DEFAULT_TAU};
use serde::Serialize;

use crate::error::CliError;
use crate::{FieldFormat, MeshArgs, Model, ScreeningArgs};

/// A loaded mesh with the name used in reports and file names.
pub struct NamedMesh {
    pub name: String,
    pub source: String,
    pub mesh: TriMesh,
}

fn load(path: &Path) -> Result<TriMesh, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let wrap = |source: Error| match source {
        Error::Io { .. } => CliError::Core(source),
        source => CliError::Mesh {
            path: path.to_path_buf(),
            source,
        },
    };
    let mesh = match ext.as_deref() {
        Some("obj") => load_obj(path).map_err(wrap)?,
        Some("ply") => load_ply(path).map_err(wrap)?.0,
        _ => {
            return Err(CliError::Usage(format!(
                "{}: unsupported mesh format (expected .obj or .ply)",
                path.display()
            )))
        }
    };
    let report = mesh.validate();
    if let Some(&face) = report.degenerate_faces.first() {
        return Err(CliError::Mesh {
            path: path.to_path_buf(),
            source: Error::DegenerateFace {
                face,
                area: mesh.face_area(face),
            },
        });
    }
    if !report.is_manifold || !report.is_oriented {
        return Err(CliError::Mesh {
            path: path.to_path_buf(),
            source: Error::InvalidInput(format!(
                "mesh must be a consistently oriented manifold ({} non-manifold edges, oriented: {})",
                report.non_manifold_edge_count, report.is_oriented
            )),
        });
    }
    Ok(mesh)
}

/// Checks that every path exists before any mesh is parsed.
fn check_paths(paths: &[PathBuf]) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "mesh file not found"),
            ));
        }
    }
    Ok(())
}

pub fn load_meshes(args: &MeshArgs) -> Result<Vec<NamedMesh>, CliError> {
    if let Some(level) = args.icosphere {
        return Ok(vec![NamedMesh {
            name: format!("icosphere{level}"),
            source: format!("icosphere:{level}"),
            mesh: icosphere(level),
        }]);
    }
    if args.meshes.is_empty() {
        return Err(CliError::Usage("give a mesh file or --icosphere LEVEL".into()));
    }
    check_paths(&args.meshes)?;
    let mut out: Vec<NamedMesh> = Vec::with_capacity(args.meshes.len());
    for p in &args.meshes {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
        let mut name = stem.clone();
        let mut k = 1;
        while out.iter().any(|m| m.name == name) {
            k += 1;
            name = format!("{stem}-{k}");
        }
        out.push(NamedMesh {
            name,
            source: p.display().to_string(),
            mesh: load(p)?,
        });
    }
    Ok(out)
}

pub fn load_single(args: &MeshArgs) -> Result<NamedMesh, CliError> {
    if args.meshes.len() > 1 {
        return Err(CliError::Usage("this command takes a single mesh".into()));
    }
    Ok(load_meshes(args)?.remove(0))
}

/// Appends `levels` successive midpoint subdivisions of the first mesh.
pub fn add_subdivisions(meshes: &mut Vec<NamedMesh>, levels: usize) {
    for j in 1..=levels {
        let prev = &meshes[meshes.len() - 1].mesh;
        let mesh = subdivide_midpoint(prev);
        let base = &meshes[0];
        meshes.push(NamedMesh {
            name: format!("{}-sub{j}", base.name),
            source: format!("{} (midpoint subdivision x{j})", base.source),
            mesh,
        });
    }
}

pub fn noise_model(model: Model) -> NoiseModel {
    match model {
        Model::Naive => NoiseModel::Naive,
        Model::White => NoiseModel::White,
        Model::Matern => NoiseModel::Matern,
        Model::MaternNormalized => NoiseModel::MaternNormalized,
        Model::Explicit => NoiseModel::Explicit,
    }
}

/// `--c` selects normalized screening, otherwise `--tau` (default 100).
/// `matern-normalized` without `--c` uses `c = 1`.
pub fn screening(args: &ScreeningArgs, model: Model) -> Result<Screening, CliError> {
    let s = match (args.tau, args.c, model) {
        (Some(_), Some(_), _) => return Err(CliError::Usage("--tau and --c are mutually exclusive".into())),
        (Some(_), None, Model::MaternNormalized) => {
            return Err(CliError::Usage("matern-normalized takes --c, not --tau".into()))
        }
        (None, Some(_), Model::Matern | Model::Explicit) => {
            return Err(CliError::Usage(format!(
                "--c applies to matern-normalized; use --tau with {}",
                noise_model(model).name()
            )))
        }
        (_, Some(c), _) => Screening::Normalized(c),
        (None, None, Model::MaternNormalized) => Screening::Normalized(1.0),
        (tau, None, _) => Screening::Tau(tau.unwrap_or(DEFAULT_TAU)),
    };
    s.validate().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value).map_err(std::io::Error::other)?;
        writeln!(out)
    })
}

/// Writes named per-vertex fields as `<stem>.ply` or `<stem>.csv`; returns
/// the path.
pub fn write_fields(
    dir: &Path,
    stem: &str,
    mesh: &TriMesh,
    fields: &[(String, Vec<f64>)],
    format: FieldFormat,
) -> Result<PathBuf, CliError> {
    match format {
        FieldFormat::Ply => {
            let path = dir.join(format!("{stem}.ply"));
            let named: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
            write_file(&path, |out| write_ply(mesh, &named, out))?;
            Ok(path)
        }
        FieldFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            write_file(&path, |out| {
                write!(out, "vertex")?;
                for (name, _) in fields {
                    write!(out, ",{name}")?;
                }
                writeln!(out)?;
                for v in 0..mesh.vertex_count() {
                    write!(out, "{v}")?;
                    for (_, values) in fields {
                        write!(out, ",{}", values[v])?;
                    }
                    writeln!(out)?;
                }
                Ok(())
            })?;
            Ok(path)
        }
    }
}

/// `sample_<i>` for one channel, `sample_<i>_<c>` otherwise.
pub fn field_name(sample: usize, channel: usize, channels: usize) -> String {
    if channels == 1 {
        format!("sample_{sample}")
    } else {
        format!("sample_{sample}_{channel}")
    }
}
