//! File formats and report persistence.
//!
//! Numeric inputs are comma-separated rows preceded by `#` header lines:
//!
//! ```text
//! # units=mm
//! # convention=p->R*p+t
//! # columns=qw,qx,qy,qz,tx,ty,tz
//! 1,0,0,0,600,0,250
//! ```
//!
//! `units` is always required; `convention` is required wherever rows carry
//! rotations. Scenes and reports are JSON carrying the same two keys.

mod detections;
mod manifest;
mod obj;
mod rows;
mod scene;

pub use detections::{load_detections, load_ground_truth, save_detections, DETECTION_COLUMNS};
pub use manifest::{file_digest, InputDigest, RunManifest};
pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use rows::{
    load_board, load_correspondences, load_points, load_poses, load_views, save_board, save_correspondences,
    save_points, save_poses, save_views, RowKind,
};
pub use scene::{load_scene, parse_scene, save_scene, scene_json};

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const UNITS: &str = "mm";
pub const CONVENTION: &str = "p->R*p+t";

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    units: &'a str,
    convention: &'a str,
    manifest: &'a RunManifest,
    result: &'a T,
}

/// Pretty JSON report embedding its manifest, newline-terminated.
pub fn report_json<T: Serialize>(manifest: &RunManifest, result: &T) -> Result<String> {
    let env = Envelope {
        units: UNITS,
        convention: CONVENTION,
        manifest,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::invalid(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn save_report<T: Serialize>(path: &Path, manifest: &RunManifest, result: &T) -> Result<()> {
    write_atomic(path, report_json(manifest, result)?.as_bytes())
}

/// CSV with a fixed header; every row must have the header's width.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("writing CSV: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid(format!(
                "CSV row has {} fields, header has {}",
                r.len(),
                header.len()
            )));
        }
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("writing CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("writing CSV: {e}")))
}

pub fn save_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, csv_string(header, rows)?.as_bytes())
}

/// Header lines of a row file: `# key=value`.
pub(crate) fn header_block(kind: &str, columns: &[&str], with_convention: bool) -> String {
    let mut s = format!("# {kind}\n# units={UNITS}\n");
    if with_convention {
        s.push_str(&format!("# convention={CONVENTION}\n"));
    }
    s.push_str(&format!("# columns={}\n", columns.join(",")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        // no temporary files left behind
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_width_is_enforced() {
        assert!(csv_string(&["a", "b"], &[vec!["1".into()]]).is_err());
        assert_eq!(
            csv_string(&["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap(),
            "a,b\n1,\"x,y\"\n"
        );
    }
}
