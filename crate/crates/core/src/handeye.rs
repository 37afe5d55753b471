//! Camera-to-end-effector calibration from tip-measured marker points.
//!
//! The board's points are measured with the calibrated tip in the robot base
//! frame, which fixes `T_marker→base` directly. Each view then closes the
//! chain `T_cam→ee = T_ee→base⁻¹ · T_marker→base · T_marker→cam⁻¹`, and the
//! per-view estimates are averaged.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rotation_distance, Point3, Pose, Rotation, Vector3};
use crate::registration::{align_points, is_collinear, Alignment};

pub const DEFAULT_BOARD_POINTS: usize = 12;
pub const DEFAULT_RIGIDITY_TOLERANCE_MM: f64 = 1.0;
/// Per-view estimates farther than this from the mean rotation are flagged.
pub const VIEW_FLAG_DEG: f64 = 5.0;
/// Evaluation RMSE reported for the two physical cameras, mm.
pub const REFERENCE_RMSE_MM: [(&str, f64); 2] = [("rgbd", 0.89), ("polarization", 0.83)];

/// Nominal board points (marker frame) with their tip measurements (base
/// frame).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkerBoard {
    board_points: Vec<Point3>,
    measured_points: Vec<Point3>,
}

impl MarkerBoard {
    pub fn new(board_points: Vec<Point3>, measured_points: Vec<Point3>) -> Result<Self> {
        Self::with_tolerance(board_points, measured_points, DEFAULT_RIGIDITY_TOLERANCE_MM)
    }

    /// Checks that every pairwise distance agrees within `tolerance` mm.
    pub fn with_tolerance(board_points: Vec<Point3>, measured_points: Vec<Point3>, tolerance: f64) -> Result<Self> {
        if board_points.len() != measured_points.len() {
            return Err(Error::invalid(format!(
                "board has {} points but {} were measured",
                board_points.len(),
                measured_points.len()
            )));
        }
        if board_points.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "marker board needs at least 3 points, got {}",
                board_points.len()
            )));
        }
        if tolerance.is_nan() || tolerance < 0.0 {
            return Err(Error::invalid(format!(
                "rigidity tolerance {tolerance} must be non-negative"
            )));
        }
        if is_collinear(&board_points) {
            return Err(Error::DegenerateGeometry("board points are collinear".into()));
        }
        let n = board_points.len();
        for i in 0..n {
            for j in i + 1..n {
                let board = (board_points[i] - board_points[j]).norm();
                let measured = (measured_points[i] - measured_points[j]).norm();
                if (board - measured).abs() > tolerance {
                    return Err(Error::InconsistentMeasurement {
                        i,
                        j,
                        board,
                        measured,
                        tolerance,
                    });
                }
            }
        }
        Ok(MarkerBoard {
            board_points,
            measured_points,
        })
    }

    pub fn board_points(&self) -> &[Point3] {
        &self.board_points
    }

    pub fn measured_points(&self) -> &[Point3] {
        &self.measured_points
    }

    pub fn len(&self) -> usize {
        self.board_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.board_points.is_empty()
    }
}

/// `cols × rows` grid in the marker's xy plane, centred on the origin.
pub fn board_grid(cols: usize, rows: usize, spacing_mm: f64) -> Vec<Point3> {
    let cx = (cols as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    (0..rows)
        .flat_map(|r| {
            (0..cols).map(move |c| Point3::new((c as f64 - cx) * spacing_mm, (r as f64 - cy) * spacing_mm, 0.0))
        })
        .collect()
}

/// One capture: end-effector pose and the detected marker pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandEyeView {
    /// `T_ee→base`.
    pub ee_pose: Pose,
    /// `T_marker→cam`.
    pub marker_in_cam: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HandEyeResult {
    /// `T_cam→ee`.
    pub cam_to_ee: Pose,
    pub per_view_estimates: Vec<Pose>,
    pub per_view_rmse: Vec<f64>,
    pub overall_rmse: f64,
    /// Views whose own estimate is more than [`VIEW_FLAG_DEG`] off the mean.
    pub flagged_views: Vec<usize>,
}

/// `T_marker→base` from the board measurements, with its residual.
pub fn marker_from_base(board: &MarkerBoard) -> Result<Alignment> {
    align_points(&board.board_points, &board.measured_points)
}

/// Views for a known chain: what a perfect detector would report.
pub fn views_from_chain(cam_to_ee: &Pose, marker_base: &Pose, ee_poses: &[Pose]) -> Vec<HandEyeView> {
    let to_ee = cam_to_ee.inverse();
    ee_poses
        .iter()
        .map(|ee| HandEyeView {
            ee_pose: *ee,
            marker_in_cam: to_ee * ee.inverse() * *marker_base,
        })
        .collect()
}

pub fn solve_handeye(views: &[HandEyeView], marker_base: &Pose, board: &MarkerBoard) -> Result<HandEyeResult> {
    if views.is_empty() {
        return Err(Error::invalid("hand-eye calibration needs at least one view"));
    }
    let estimates: Vec<Pose> = views
        .iter()
        .map(|v| v.ee_pose.inverse() * *marker_base * v.marker_in_cam.inverse())
        .collect();
    let cam_to_ee = mean_pose(&estimates);
    let flagged_views = estimates
        .iter()
        .enumerate()
        .filter(|(_, e)| rotation_distance(&e.rotation, &cam_to_ee.rotation) > VIEW_FLAG_DEG)
        .map(|(i, _)| i)
        .collect();
    let per_view_rmse = per_view_rmse(views, &cam_to_ee, board);
    Ok(HandEyeResult {
        cam_to_ee,
        overall_rmse: pooled(&per_view_rmse),
        per_view_estimates: estimates,
        per_view_rmse,
        flagged_views,
    })
}

/// RMSE over all views and board points between the chain
/// `ee · cam_to_ee · marker_in_cam · b` and the tip measurements.
pub fn evaluate_handeye(views: &[HandEyeView], cam_to_ee: &Pose, board: &MarkerBoard) -> f64 {
    pooled(&per_view_rmse(views, cam_to_ee, board))
}

pub fn per_view_rmse(views: &[HandEyeView], cam_to_ee: &Pose, board: &MarkerBoard) -> Vec<f64> {
    views
        .iter()
        .map(|v| {
            let chain = v.ee_pose * *cam_to_ee * v.marker_in_cam;
            let sq: f64 = board
                .board_points
                .iter()
                .zip(&board.measured_points)
                .map(|(b, m)| (chain.apply(b) - m).norm_squared())
                .sum();
            (sq / board.len() as f64).sqrt()
        })
        .collect()
}

// every view carries the same number of points
fn pooled(per_view: &[f64]) -> f64 {
    if per_view.is_empty() {
        return 0.0;
    }
    (per_view.iter().map(|r| r * r).sum::<f64>() / per_view.len() as f64).sqrt()
}

/// Chordal L2 mean: top eigenvector of `Σ q·qᵀ` for the rotation,
/// arithmetic mean for the translation.
pub fn mean_pose(poses: &[Pose]) -> Pose {
    let mut m = Matrix4::<f64>::zeros();
    let mut t = Vector3::zeros();
    for p in poses {
        let q = Vector4::from(p.rotation.to_wxyz());
        m += q * q.transpose();
        t += p.translation;
    }
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(top).into_owned();
    // the eigen solver stops at a loose tolerance; polish by power iteration
    for _ in 0..4 {
        let next = m * v;
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        v = next / n;
    }
    if v[0] < 0.0 {
        v = -v;
    }
    let rotation = Rotation::from_wxyz([v[0], v[1], v[2], v[3]]).unwrap_or_else(|_| poses[0].rotation);
    Pose::new(rotation, t / poses.len() as f64)
}
