//! Evaluation metrics: oriented-box IoU, detection AP, pointwise pose RMSE,
//! and the annotation-accuracy comparison table.

mod ap;
mod iou;

pub use ap::{average_precision, ApReport, CategoryAp, Detection, DetectionSet, GroundTruth};
pub use iou::{intersection_volume, iou3d, OrientedBox};

use std::fmt::Write as _;

use serde::Serialize;

use crate::geom::{Point3, Pose};

/// Root mean squared distance between `gt·p` and `est·p` over `points`.
pub fn pointwise_rmse(points: &[Point3], gt: &Pose, est: &Pose) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let sq: f64 = points.iter().map(|p| (gt.apply(p) - est.apply(p)).norm_squared()).sum();
    (sq / points.len() as f64).sqrt()
}

/// Published point RMSE of other labeling setups, mm. The first is a lower
/// bound.
pub const LITERATURE_POINT_RMSE: [(&str, &str, f64); 4] = [
    ("RGB-D dataset", "depth map", 17.0),
    ("TOD", "multi-view", 3.4),
    ("StereOBJ", "multi-view", 2.3),
    ("robot tip (reference)", "robot", 0.80),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub setup: String,
    pub labeling: String,
    pub point_rmse_mm: f64,
    pub lower_bound: bool,
    pub simulated: bool,
}

/// Literature rows followed by one row per simulated camera and their mean.
pub fn comparison_rows(simulated: &[(String, f64)]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = LITERATURE_POINT_RMSE
        .iter()
        .enumerate()
        .map(|(i, &(setup, labeling, v))| ComparisonRow {
            setup: setup.into(),
            labeling: labeling.into(),
            point_rmse_mm: v,
            lower_bound: i == 0,
            simulated: false,
        })
        .collect();
    for (name, v) in simulated {
        rows.push(ComparisonRow {
            setup: format!("simulated {name}"),
            labeling: "robot".into(),
            point_rmse_mm: *v,
            lower_bound: false,
            simulated: true,
        });
    }
    if simulated.len() > 1 {
        rows.push(ComparisonRow {
            setup: "simulated mean".into(),
            labeling: "robot".into(),
            point_rmse_mm: simulated.iter().map(|(_, v)| v).sum::<f64>() / simulated.len() as f64,
            lower_bound: false,
            simulated: true,
        });
    }
    rows
}

/// Aligned plain-text rendering of [`comparison_rows`].
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.setup.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:<10}  {:>10}", "setup", "labeling", "point RMSE");
    for r in rows {
        let value = format!("{}{:.2} mm", if r.lower_bound { ">=" } else { "" }, r.point_rmse_mm);
        let _ = writeln!(out, "{:<width$}  {:<10}  {:>10}", r.setup, r.labeling, value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_rotation, random_unit_vector, RngStream, Rotation};

    #[test]
    fn rmse_cases() {
        let mut rng = RngStream::new(9);
        let pts: Vec<Point3> = (0..500).map(|_| Point3::from(rng.gaussian_vector(60.0))).collect();
        let gt = Pose::new(random_rotation(&mut rng), rng.gaussian_vector(300.0));
        assert_eq!(pointwise_rmse(&pts, &gt, &gt), 0.0);

        let moved = Pose::from_translation(random_unit_vector(&mut rng) * 0.80) * gt;
        assert!((pointwise_rmse(&pts, &gt, &moved) - 0.80).abs() < 1e-12);

        let turned = gt * Pose::from_rotation(Rotation::axis_angle(&random_unit_vector(&mut rng), 1.5).unwrap());
        let mut sq = 0.0;
        for p in &pts {
            let d = gt.apply(p) - turned.apply(p);
            sq += d.x * d.x + d.y * d.y + d.z * d.z;
        }
        assert!((pointwise_rmse(&pts, &gt, &turned) - (sq / 500.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn comparison_layout() {
        let rows = comparison_rows(&[("rgbd".into(), 0.84), ("polarization".into(), 0.76)]);
        assert_eq!(rows.len(), 7);
        assert!((rows[6].point_rmse_mm - 0.80).abs() < 1e-12);
        let text = comparison_table(&rows);
        assert!(text.contains(">=17.00 mm"));
        assert!(text.lines().all(|l| l.len() == text.lines().next().unwrap().len()));
    }
}
