//! Task suites (generated or loaded from a manifest), object files and OBJ
//! import.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use labo_core::grasp::{GraspTask, GraspType, Split, TaskSuite};
use labo_core::objects::{self, ComplexityBin, ObjectKind, ObjectModel, Shape, TriMesh};
use serde::{Deserialize, Serialize};

use crate::config::SuiteConfig;
use crate::error::{read_input, CliError, CliResult};

pub const MANIFEST_COLUMNS: [&str; 5] = ["split", "grasp_type", "object", "seed", "mass"];

/// Per-task facts the report needs, recorded in every run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub split: Split,
    pub grasp_type: GraspType,
    pub shape: String,
    pub vertex_count: usize,
    pub bin: ComplexityBin,
}

pub fn task_info(suite: &TaskSuite) -> Vec<TaskInfo> {
    suite
        .tasks
        .iter()
        .zip(&suite.split)
        .map(|(t, &s)| TaskInfo {
            split: s,
            grasp_type: t.grasp_type,
            shape: t.object.shape.kind_name().to_string(),
            vertex_count: t.object.vertex_count(),
            bin: t.object.complexity_bin(),
        })
        .collect()
}

pub fn build_suite(cfg: &SuiteConfig) -> CliResult<TaskSuite> {
    match &cfg.manifest {
        Some(p) => load_manifest(p),
        None => Ok(TaskSuite::generate(cfg.n_train, cfg.n_test, cfg.seed)),
    }
}

/// Closed triangle mesh from a Wavefront OBJ file. Polygons are fanned into
/// triangles and all groups are merged into one body.
pub fn load_obj(path: &Path) -> CliResult<TriMesh> {
    let unsupported = |reason: String| CliError::UnsupportedMesh {
        path: path.to_path_buf(),
        reason,
    };
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| match e {
        tobj::LoadError::OpenFileFailed => CliError::input(path, std::io::Error::from(std::io::ErrorKind::NotFound)),
        e => unsupported(e.to_string()),
    })?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in &models {
        let base = vertices.len();
        let p = &m.mesh.positions;
        vertices.extend(p.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]));
        faces.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|f| [base + f[0] as usize, base + f[1] as usize, base + f[2] as usize]),
        );
    }
    if faces.is_empty() {
        return Err(unsupported("no faces".into()));
    }
    TriMesh::new(vertices, faces).map_err(|e| unsupported(e.to_string()))
}

fn load_object(path: &Path, mass: Option<f64>) -> CliResult<ObjectModel> {
    let mut obj = match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => ObjectModel::new(Shape::Mesh { mesh: Arc::new(load_obj(path)?) }, 1.0),
        Some("json") => serde_json::from_str(&read_input(path)?)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        _ => return Err(CliError::usage(format!("{}: objects must be .json or .obj", path.display()))),
    };
    if let Some(m) = mass {
        if !(m > 0.0 && m.is_finite()) {
            return Err(CliError::usage(format!("{}: mass must be positive", path.display())));
        }
        obj.mass = m;
    }
    Ok(obj)
}

/// Tab-separated task list with columns [`MANIFEST_COLUMNS`]; object paths
/// are relative to the manifest, `-` keeps an object's own mass. Lines
/// starting with `#` are comments.
pub fn load_manifest(path: &Path) -> CliResult<TaskSuite> {
    let text = read_input(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let bad = |line: usize, msg: String| CliError::usage(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.split('\t').eq(MANIFEST_COLUMNS) => {}
        _ => return Err(bad(1, format!("header must be `{}`", MANIFEST_COLUMNS.join("\\t")))),
    }
    let (mut tasks, mut split) = (Vec::new(), Vec::new());
    for (n, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        let [s, g, obj, seed, mass] = cols[..] else {
            return Err(bad(n, format!("expected {} columns, found {}", MANIFEST_COLUMNS.len(), cols.len())));
        };
        let s = Split::parse(s).ok_or_else(|| bad(n, format!("unknown split `{s}`")))?;
        let g = GraspType::parse(g).ok_or_else(|| bad(n, format!("unknown grasp type `{g}`")))?;
        let seed: u64 = seed.parse().map_err(|_| bad(n, format!("bad seed `{seed}`")))?;
        let mass = match mass {
            "-" => None,
            m => Some(m.parse::<f64>().map_err(|_| bad(n, format!("bad mass `{m}`")))?),
        };
        tasks.push(GraspTask {
            grasp_type: g,
            object: load_object(&dir.join(obj), mass)?,
            seed,
        });
        split.push(s);
    }
    if !split.contains(&Split::Train) {
        return Err(bad(1, "manifest has no train tasks".into()));
    }
    Ok(TaskSuite::new(tasks, split))
}

pub fn object_file_name(i: usize) -> String {
    format!("object-{i:04}.json")
}

/// Writes `count` objects of `kind` and an `objects.tsv` index into `dir`.
pub fn write_objects(kind: ObjectKind, count: usize, seed: u64, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut index = String::from("index\tfile\tshape\tvertex_count\tcomplexity\tmass\n");
    let mut files = Vec::with_capacity(count);
    for (i, o) in objects::generate_objects(kind, count, seed).iter().enumerate() {
        let name = object_file_name(i);
        let path = dir.join(&name);
        fs::write(&path, serde_json::to_string_pretty(o)? + "\n")?;
        index += &format!(
            "{i}\t{name}\t{}\t{}\t{}\t{}\n",
            o.shape.kind_name(),
            o.vertex_count(),
            o.complexity_bin().name(),
            o.mass
        );
        files.push(path);
    }
    fs::write(dir.join("objects.tsv"), index)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

    #[test]
    fn obj_import_and_rejection() {
        let d = tempfile::tempdir().unwrap();
        let good = d.path().join("t.obj");
        fs::write(&good, TETRA).unwrap();
        let m = load_obj(&good).unwrap();
        assert_eq!(m.vertices.len(), 4);

        let open = d.path().join("open.obj");
        fs::write(&open, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_obj(&open), Err(CliError::UnsupportedMesh { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let d = tempfile::tempdir().unwrap();
        write_objects(ObjectKind::Box, 2, 3, d.path()).unwrap();
        fs::write(d.path().join("t.obj"), TETRA).unwrap();
        let manifest = d.path().join("suite.tsv");
        fs::write(
            &manifest,
            format!(
                "# two tasks\n{}\ntrain\tpower\tobject-0000.json\t5\t-\ntest\tpinch\tt.obj\t6\t1.5\n",
                MANIFEST_COLUMNS.join("\t")
            ),
        )
        .unwrap();
        let s = load_manifest(&manifest).unwrap();
        assert_eq!(s.n_tasks(), 1);
        assert_eq!(s.tasks[0].object, objects::generate_objects(ObjectKind::Box, 1, 3)[0]);
        assert_eq!(s.tasks[1].object.mass, 1.5);
        assert_eq!(task_info(&s)[1].shape, "mesh");

        fs::write(&manifest, "split\tgrasp_type\tobject\tseed\tmass\ntrain\tgrip\tobject-0000.json\t5\t-\n").unwrap();
        assert_eq!(load_manifest(&manifest).unwrap_err().exit_code(), 2);
    }
}
