use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose};
use crate::handeye::{HandEyeView, MarkerBoard};
use crate::registration::Correspondences;

use super::{header_block, read_text, write_atomic, CONVENTION, UNITS};

/// The numeric row formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Poses,
    Points,
    Correspondences,
    Board,
    Views,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            RowKind::Poses => "poses",
            RowKind::Points => "points",
            RowKind::Correspondences => "correspondences",
            RowKind::Board => "board",
            RowKind::Views => "views",
        }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            RowKind::Poses => &["qw", "qx", "qy", "qz", "tx", "ty", "tz"],
            RowKind::Points => &["x", "y", "z"],
            RowKind::Correspondences => &["mx", "my", "mz", "model_x", "model_y", "model_z"],
            RowKind::Board => &[
                "board_x",
                "board_y",
                "board_z",
                "measured_x",
                "measured_y",
                "measured_z",
            ],
            RowKind::Views => &[
                "ee_qw", "ee_qx", "ee_qy", "ee_qz", "ee_tx", "ee_ty", "ee_tz", "cam_qw", "cam_qx", "cam_qy", "cam_qz",
                "cam_tx", "cam_ty", "cam_tz",
            ],
        }
    }

    fn has_rotations(&self) -> bool {
        matches!(self, RowKind::Poses | RowKind::Views)
    }
}

/// A parsed row with its 1-based source line.
struct Row {
    line: usize,
    values: Vec<f64>,
}

fn parse_rows(text: &str, path: &Path, kind: RowKind) -> Result<Vec<Row>> {
    let columns = kind.columns();
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let Some(body) = t.strip_prefix('#') else { break };
        if let Some((k, v)) = body.split_once('=') {
            header.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
    }
    let require = |key: &str, expected: &str| -> Result<()> {
        match header.get(key) {
            None => Err(Error::parse(
                path,
                1,
                format!("missing '{key}' header (expected '# {key}={expected}')"),
            )),
            Some((line, v)) if v != expected => Err(Error::parse(
                path,
                *line,
                format!("{key} is '{v}', expected '{expected}'; values are never converted"),
            )),
            Some(_) => Ok(()),
        }
    };
    require("units", UNITS)?;
    if kind.has_rotations() {
        require("convention", CONVENTION)?;
    }
    require("columns", &columns.join(","))?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| line_of(text, p.byte()));
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| line_of(text, p.byte()));
        if record.iter().all(|f| f.is_empty()) || record.get(0).is_some_and(|f| f.starts_with('#')) {
            continue;
        }
        if record.len() != columns.len() {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "expected {} values ({}), found {}",
                    columns.len(),
                    columns.join(","),
                    record.len()
                ),
            ));
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(k, f)| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(Error::parse(
                    path,
                    line,
                    format!("{} is {v}; only finite values are accepted", columns[k]),
                )),
                Err(_) => Err(Error::parse(
                    path,
                    line,
                    format!("{} value '{f}' is not a number", columns[k]),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(Row { line, values });
    }
    Ok(rows)
}

/// 1-based line containing byte `offset`.
pub(crate) fn line_of(text: &str, offset: u64) -> usize {
    let bytes = text.as_bytes();
    let mut end = (offset as usize).min(bytes.len());
    // records are reported from the end of the previous one
    while end < bytes.len() && (bytes[end] == b'\n' || bytes[end] == b'\r') {
        end += 1;
    }
    bytes[..end].iter().filter(|b| **b == b'\n').count() + 1
}

fn load(path: &Path, kind: RowKind) -> Result<Vec<Row>> {
    parse_rows(&read_text(path)?, path, kind)
}

fn pose_at(path: &Path, row: &Row, offset: usize) -> Result<Pose> {
    let v = &row.values[offset..offset + 7];
    Pose::from_row([v[0], v[1], v[2], v[3], v[4], v[5], v[6]]).map_err(|e| Error::parse(path, row.line, e.to_string()))
}

fn point_at(row: &Row, offset: usize) -> Point3 {
    Point3::new(row.values[offset], row.values[offset + 1], row.values[offset + 2])
}

pub fn load_poses(path: &Path) -> Result<Vec<Pose>> {
    load(path, RowKind::Poses)?
        .iter()
        .map(|r| pose_at(path, r, 0))
        .collect()
}

pub fn load_points(path: &Path) -> Result<Vec<Point3>> {
    Ok(load(path, RowKind::Points)?.iter().map(|r| point_at(r, 0)).collect())
}

pub fn load_correspondences(path: &Path) -> Result<Correspondences> {
    let rows = load(path, RowKind::Correspondences)?;
    Correspondences::new(
        rows.iter().map(|r| point_at(r, 0)).collect(),
        rows.iter().map(|r| point_at(r, 3)).collect(),
    )
}

pub fn load_board(path: &Path) -> Result<MarkerBoard> {
    let rows = load(path, RowKind::Board)?;
    MarkerBoard::new(
        rows.iter().map(|r| point_at(r, 0)).collect(),
        rows.iter().map(|r| point_at(r, 3)).collect(),
    )
}

pub fn load_views(path: &Path) -> Result<Vec<HandEyeView>> {
    load(path, RowKind::Views)?
        .iter()
        .map(|r| {
            Ok(HandEyeView {
                ee_pose: pose_at(path, r, 0)?,
                marker_in_cam: pose_at(path, r, 7)?,
            })
        })
        .collect()
}

fn save(path: &Path, kind: RowKind, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = header_block(kind.name(), kind.columns(), kind.has_rotations());
    for r in rows {
        let fields: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn save_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    save(path, RowKind::Poses, poses.iter().map(|p| p.to_row().to_vec()))
}

pub fn save_points(path: &Path, points: &[Point3]) -> Result<()> {
    save(path, RowKind::Points, points.iter().map(|p| vec![p.x, p.y, p.z]))
}

pub fn save_correspondences(path: &Path, c: &Correspondences) -> Result<()> {
    save(
        path,
        RowKind::Correspondences,
        c.measured()
            .iter()
            .zip(c.model())
            .map(|(m, p)| vec![m.x, m.y, m.z, p.x, p.y, p.z]),
    )
}

pub fn save_board(path: &Path, b: &MarkerBoard) -> Result<()> {
    save(
        path,
        RowKind::Board,
        b.board_points()
            .iter()
            .zip(b.measured_points())
            .map(|(p, m)| vec![p.x, p.y, p.z, m.x, m.y, m.z]),
    )
}

pub fn save_views(path: &Path, views: &[HandEyeView]) -> Result<()> {
    save(
        path,
        RowKind::Views,
        views.iter().map(|v| {
            let mut r = v.ee_pose.to_row().to_vec();
            r.extend(v.marker_in_cam.to_row());
            r
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_rotation, RngStream};

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn poses_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = RngStream::new(4);
        let poses: Vec<Pose> = (0..20)
            .map(|_| Pose::new(random_rotation(&mut rng), rng.gaussian_vector(500.0)))
            .collect();
        let p = dir.path().join("a.poses");
        save_poses(&p, &poses).unwrap();
        assert_eq!(load_poses(&p).unwrap(), poses);
    }

    #[test]
    fn missing_units_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "legacy.poses",
            "# convention=p->R*p+t\n# columns=qw,qx,qy,qz,tx,ty,tz\n1,0,0,0,1,2,3\n",
        );
        let e = load_poses(&p).unwrap_err().to_string();
        assert!(e.contains("missing 'units'"), "{e}");
        let p = write(
            dir.path(),
            "m.poses",
            "# units=m\n# convention=p->R*p+t\n# columns=qw,qx,qy,qz,tx,ty,tz\n",
        );
        assert!(load_poses(&p).unwrap_err().to_string().contains("never converted"));
        let p = write(dir.path(), "c.poses", "# units=mm\n# columns=qw,qx,qy,qz,tx,ty,tz\n");
        assert!(load_poses(&p).unwrap_err().to_string().contains("convention"));
    }

    #[test]
    fn bad_rows_cite_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let head = "# units=mm\n# convention=p->R*p+t\n# columns=qw,qx,qy,qz,tx,ty,tz\n";
        let cases = [
            ("1,0,0,0,1,2,3\n1,0,0,0,1,2\n", 5),
            ("1,0,0,0,1,2,3\n\n1,0,0,0,1,x,3\n", 6),
            ("1,0,0,0,1,2,nan\n", 4),
            // quaternion norm 1.01
            ("1.01,0,0,0,1,2,3\n", 4),
        ];
        for (i, (body, line)) in cases.iter().enumerate() {
            let p = write(dir.path(), &format!("bad{i}.poses"), &format!("{head}{body}"));
            match load_poses(&p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, *line, "case {i}"),
                other => panic!("case {i}: {other:?}"),
            }
        }
    }

    #[test]
    fn near_unit_quaternion_is_renormalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "n.poses",
            "# units=mm\n# convention=p->R*p+t\n# columns=qw,qx,qy,qz,tx,ty,tz\n1.0000004,0,0,0,1,2,3\n",
        );
        assert_eq!(load_poses(&p).unwrap()[0].rotation.to_wxyz(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn other_formats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = RngStream::new(8);
        let pts: Vec<Point3> = (0..12).map(|_| Point3::from(rng.gaussian_vector(50.0))).collect();
        let g = Pose::new(random_rotation(&mut rng), rng.gaussian_vector(300.0));
        let moved: Vec<Point3> = pts.iter().map(|p| g.apply(p)).collect();

        let p = dir.path().join("p.points");
        save_points(&p, &pts).unwrap();
        assert_eq!(load_points(&p).unwrap(), pts);

        let c = Correspondences::new(moved.clone(), pts.clone()).unwrap();
        let p = dir.path().join("c.corr");
        save_correspondences(&p, &c).unwrap();
        assert_eq!(load_correspondences(&p).unwrap(), c);

        let b = MarkerBoard::new(pts.clone(), moved).unwrap();
        let p = dir.path().join("b.board");
        save_board(&p, &b).unwrap();
        assert_eq!(load_board(&p).unwrap(), b);

        let views = vec![HandEyeView {
            ee_pose: g,
            marker_in_cam: g.inverse(),
        }];
        let p = dir.path().join("v.views");
        save_views(&p, &views).unwrap();
        assert_eq!(load_views(&p).unwrap(), views);
    }

    #[test]
    fn column_header_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.points", "# units=mm\n# columns=x,z,y\n1,2,3\n");
        assert!(load_points(&p).is_err());
    }
}
