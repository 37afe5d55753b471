use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, Rotation, Vector3};
use crate::metrics::{Detection, GroundTruth, OrientedBox};
use crate::registration::Mesh;
use crate::sim::SceneConfig;

use super::{read_text, write_atomic, UNITS};

pub const DETECTION_COLUMNS: [&str; 12] = [
    "category", "score", "cx", "cy", "cz", "hx", "hy", "hz", "qw", "qx", "qy", "qz",
];

/// Detections CSV: a `# units=mm` line, then a header row of
/// [`DETECTION_COLUMNS`].
pub fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    let text = read_text(path)?;
    let units = text
        .lines()
        .take_while(|l| l.trim_start().starts_with('#'))
        .find_map(|l| {
            l.trim_start_matches('#')
                .trim()
                .strip_prefix("units=")
                .map(|u| u.trim().to_string())
        });
    match units.as_deref() {
        None => {
            return Err(Error::parse(
                path,
                1,
                format!("missing 'units' header (expected '# units={UNITS}')"),
            ))
        }
        Some(u) if u != UNITS => return Err(Error::parse(path, 1, format!("units is '{u}', expected '{UNITS}'"))),
        _ => {}
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, 0, e.to_string()))?
        .clone();
    if header.iter().ne(DETECTION_COLUMNS.iter().copied()) {
        let line = header.position().map_or(0, |p| super::rows::line_of(&text, p.byte()));
        return Err(Error::parse(
            path,
            line,
            format!("header must be {}", DETECTION_COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            Error::parse(
                path,
                e.position().map_or(0, |p| super::rows::line_of(&text, p.byte())),
                e.to_string(),
            )
        })?;
        let line = record.position().map_or(0, |p| super::rows::line_of(&text, p.byte()));
        let mut v = [0.0; 11];
        for (k, slot) in v.iter_mut().enumerate() {
            let f = &record[k + 1];
            *slot = f.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::parse(
                    path,
                    line,
                    format!("{} value '{f}' is not a finite number", DETECTION_COLUMNS[k + 1]),
                )
            })?;
        }
        let rotation =
            Rotation::from_wxyz([v[7], v[8], v[9], v[10]]).map_err(|e| Error::parse(path, line, e.to_string()))?;
        let bbox = OrientedBox::new(Point3::new(v[1], v[2], v[3]), Vector3::new(v[4], v[5], v[6]), rotation)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(Detection {
            category: record[0].to_string(),
            score: v[0],
            bbox,
        });
    }
    Ok(out)
}

pub fn save_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let rows: Vec<Vec<String>> = detections
        .iter()
        .map(|d| {
            let b = &d.bbox;
            let q = b.rotation.to_wxyz();
            let mut r = vec![d.category.clone(), d.score.to_string()];
            r.extend([b.center.x, b.center.y, b.center.z].iter().map(f64::to_string));
            r.extend(b.half_extents.iter().map(f64::to_string));
            r.extend(q.iter().map(f64::to_string));
            r
        })
        .collect();
    let body = super::csv_string(&DETECTION_COLUMNS, &rows)?;
    write_atomic(path, format!("# units={UNITS}\n{body}").as_bytes())
}

/// Ground-truth boxes of a scene: each mesh's local bounding box placed at
/// the object pose.
pub fn load_ground_truth(scene: &SceneConfig, meshes: &[Mesh]) -> Result<Vec<GroundTruth>> {
    scene
        .objects
        .iter()
        .zip(meshes)
        .map(|(o, m)| {
            let (lo, hi) = m.bounds();
            let local = OrientedBox::new(nalgebra::center(&lo, &hi), (hi - lo) / 2.0, Rotation::identity())?;
            Ok(GroundTruth {
                category: o.category.name().to_string(),
                bbox: local.transformed(&Pose::new(o.pose.rotation, o.pose.translation)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_rotation, RngStream};

    #[test]
    fn round_trip_and_errors() {
        let mut rng = RngStream::new(3);
        let dets: Vec<Detection> = (0..5)
            .map(|i| Detection {
                category: if i % 2 == 0 { "cup".into() } else { "can, tall".into() },
                score: rng.uniform01(),
                bbox: OrientedBox::new(
                    Point3::from(rng.gaussian_vector(100.0)),
                    Vector3::new(10.0, 20.0, 30.0),
                    random_rotation(&mut rng),
                )
                .unwrap(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        save_detections(&p, &dets).unwrap();
        assert_eq!(load_detections(&p).unwrap(), dets);

        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replacen("# units=mm\n", "", 1)).unwrap();
        assert!(load_detections(&p).unwrap_err().to_string().contains("units"));

        std::fs::write(
            &p,
            "# units=mm\ncategory,score,cx,cy,cz,hx,hy,hz,qw,qx,qy,qz\ncup,0.5,0,0,0,1,1,-1,1,0,0,0\n",
        )
        .unwrap();
        match load_detections(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
