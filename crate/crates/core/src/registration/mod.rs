//! Object pose annotation: keypoint alignment for the initial pose, then ICP
//! of sparse tip-measured surface points against dense mesh samples.

mod bench;
mod icp;
mod kdtree;
mod mesh;
pub mod shapes;

pub use bench::{
    recovery_meshes, run_icp_recovery, IcpBenchConfig, IcpBenchReport, IcpTrial, BENCH_SAMPLE_COUNT,
    REFERENCE_RECOVERY_ERROR,
};
pub use icp::{icp_refine, icp_refine_with, IcpOutcome, IcpParams, SurfaceModel};
pub use kdtree::KdTree;
pub use mesh::{sample_surface, Mesh};

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{rotation_distance, Point3, Pose, Rotation, Vector3};

/// Keypoint residual above which an initial alignment is flagged, mm.
pub const KEYPOINT_RESIDUAL_FLAG_MM: f64 = 0.5;

/// Paired points: `measured[i]` (base frame) corresponds to `model[i]`
/// (model frame).
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondences {
    measured: Vec<Point3>,
    model: Vec<Point3>,
}

impl Correspondences {
    pub fn new(measured: Vec<Point3>, model: Vec<Point3>) -> Result<Self> {
        if measured.len() != model.len() {
            return Err(Error::invalid(format!(
                "correspondence lists differ in length ({} measured, {} model)",
                measured.len(),
                model.len()
            )));
        }
        if model.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "absolute orientation needs at least 3 point pairs, got {}",
                model.len()
            )));
        }
        if is_collinear(&model) {
            return Err(Error::DegenerateGeometry("model points are collinear".into()));
        }
        Ok(Correspondences { measured, model })
    }

    pub fn measured(&self) -> &[Point3] {
        &self.measured
    }

    pub fn model(&self) -> &[Point3] {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }
}

/// Rigid alignment result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Alignment {
    /// Maps model points onto measured points.
    pub pose: Pose,
    pub residual_rms: f64,
}

impl Alignment {
    pub fn flagged(&self) -> bool {
        self.residual_rms > KEYPOINT_RESIDUAL_FLAG_MM
    }
}

/// Closed-form least-squares rigid transform (no scale) from model to
/// measured points: SVD of the cross-covariance with determinant correction.
pub fn absolute_orientation(c: &Correspondences) -> Result<Alignment> {
    align_points(&c.model, &c.measured)
}

pub(crate) fn align_points(source: &[Point3], target: &[Point3]) -> Result<Alignment> {
    debug_assert_eq!(source.len(), target.len());
    let n = source.len() as f64;
    let sc = centroid(source);
    let tc = centroid(target);

    let mut h = Matrix3::<f64>::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - sc) * (t - tc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD of cross-covariance failed".into())),
    };
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = v_t.transpose() * correction * u.transpose();
    let rotation = Rotation::from_matrix(&r);
    let translation = tc.coords - rotation.rotate(&sc.coords);
    let pose = Pose::new(rotation, translation);

    let sq: f64 = source
        .iter()
        .zip(target)
        .map(|(s, t)| (pose.apply(s) - t).norm_squared())
        .sum();
    Ok(Alignment {
        pose,
        residual_rms: (sq / n).sqrt(),
    })
}

pub(crate) fn centroid(points: &[Point3]) -> Point3 {
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// True when the points span less than a plane's worth of directions.
pub(crate) fn is_collinear(points: &[Point3]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let c = centroid(points);
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] <= 0.0 || ev[1] <= ev[0] * 1e-18 || ev[1].sqrt() < 1e-9
}

/// Translation and rotation distance between two poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoseError {
    pub translation_mm: f64,
    pub rotation_deg: f64,
}

pub fn pose_error(gt: &Pose, est: &Pose) -> PoseError {
    PoseError {
        translation_mm: (gt.translation - est.translation).norm(),
        rotation_deg: rotation_distance(&gt.rotation, &est.rotation),
    }
}
