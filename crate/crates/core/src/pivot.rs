//! Tool-tip pivot calibration.
//!
//! The tool tip rests on a fixed point while the end-effector is rotated
//! around it. For every stop `i`, `R_i·x + t_i` is the same base-frame point,
//! so differences of consecutive stops give the linear system
//! `(R_i − R_{i+1})·x = t_{i+1} − t_i`, closed cyclically with the
//! `(R_n − R_1)` row. Its minimum-norm least-squares solution is the tip
//! offset `x` in the end-effector frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rotation_distance, Point3, Pose, Vector3};

/// Tip-location spread reported for the physical robot setup, mm.
pub const REFERENCE_TIP_VARIANCE_MM: f64 = 0.057;

/// How pose pairs are stacked into the least-squares system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stacking {
    /// Consecutive pairs plus the cyclic closing row.
    #[default]
    Consecutive,
    /// Every unordered pair once.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PivotOptions {
    /// Minimum of the largest pairwise rotation between stops, degrees.
    pub min_rotation_deg: f64,
    pub stacking: Stacking,
}

impl Default for PivotOptions {
    fn default() -> Self {
        PivotOptions {
            min_rotation_deg: 10.0,
            stacking: Stacking::Consecutive,
        }
    }
}

/// End-effector poses `T_ee→base` recorded while pivoting about the tip.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotMeasurementSet {
    poses: Vec<Pose>,
}

impl PivotMeasurementSet {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.len() < 3 {
            return Err(Error::invalid(format!(
                "pivot calibration needs at least 3 poses, got {}",
                poses.len()
            )));
        }
        Ok(PivotMeasurementSet { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Largest pairwise rotation distance, degrees.
    pub fn rotation_diversity(&self) -> f64 {
        let mut max = 0.0f64;
        for (i, a) in self.poses.iter().enumerate() {
            for b in &self.poses[i + 1..] {
                max = max.max(rotation_distance(&a.rotation, &b.rotation));
            }
        }
        max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PivotResult {
    /// Tip position in the end-effector frame.
    pub tip_offset: Vector3,
    /// Tip position in the base frame (mean over stops).
    pub pivot_point: Point3,
    pub residual_rms: f64,
}

pub fn solve_pivot(m: &PivotMeasurementSet) -> Result<PivotResult> {
    solve_pivot_with(m, &PivotOptions::default())
}

pub fn solve_pivot_with(m: &PivotMeasurementSet, opts: &PivotOptions) -> Result<PivotResult> {
    let diversity = m.rotation_diversity();
    if diversity < opts.min_rotation_deg {
        return Err(Error::InsufficientRotation {
            max_deg: diversity,
            required_deg: opts.min_rotation_deg,
        });
    }

    let pairs = stacked_pairs(m.poses.len(), opts.stacking);
    let mut a = DMatrix::<f64>::zeros(3 * pairs.len(), 3);
    let mut b = DVector::<f64>::zeros(3 * pairs.len());
    for (row, &(i, j)) in pairs.iter().enumerate() {
        let (pi, pj) = (&m.poses[i], &m.poses[j]);
        let diff = pi.rotation.matrix() - pj.rotation.matrix();
        let rhs = pj.translation - pi.translation;
        a.fixed_view_mut::<3, 3>(3 * row, 0).copy_from(&diff);
        b.fixed_rows_mut::<3>(3 * row).copy_from(&rhs);
    }

    // rank from the singular values; solution from Householder QR, which is
    // the unique (hence minimum-norm) least-squares solution at full rank
    let sigma = a.singular_values();
    let tol = (sigma.max() * 1e-9).max(1e-12);
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    let qr = a.qr();
    let qtb = qr.q().transpose() * &b;
    let x = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { rank: 2 })?;
    let tip_offset = Vector3::new(x[0], x[1], x[2]);

    let tips: Vec<Point3> = m.poses.iter().map(|p| p.apply(&Point3::from(tip_offset))).collect();
    let pivot_point = Point3::from(tips.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / tips.len() as f64);
    let residual_rms = rms_distance(&tips, &pivot_point);

    Ok(PivotResult {
        tip_offset,
        pivot_point,
        residual_rms,
    })
}

/// Root-mean-square distance of each stop's tip location from the pivot point.
pub fn tip_variance(m: &PivotMeasurementSet, r: &PivotResult) -> f64 {
    let tips: Vec<Point3> = m.poses.iter().map(|p| p.apply(&Point3::from(r.tip_offset))).collect();
    rms_distance(&tips, &r.pivot_point)
}

fn rms_distance(points: &[Point3], center: &Point3) -> f64 {
    let sum: f64 = points.iter().map(|p| (p - center).norm_squared()).sum();
    (sum / points.len() as f64).sqrt()
}

fn stacked_pairs(n: usize, stacking: Stacking) -> Vec<(usize, usize)> {
    match stacking {
        Stacking::Consecutive => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        Stacking::AllPairs => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
    }
}

/// Synthesizes `n` end-effector poses pivoting a tool with `tip_offset`
/// about `pivot`. Tilts are drawn up to `max_tilt_deg` from a base
/// orientation, with free spin about the tool axis.
pub fn synthesize_pivot_poses(
    tip_offset: &Vector3,
    pivot: &Point3,
    n: usize,
    max_tilt_deg: f64,
    translation_noise_sigma: f64,
    rng: &mut crate::geom::RngStream,
) -> Vec<Pose> {
    use crate::geom::Rotation;
    (0..n)
        .map(|_| {
            let tilt_axis = {
                let a = rng.unit_vector();
                Vector3::new(a.x, a.y, 0.0).try_normalize(1e-9).unwrap_or(Vector3::x())
            };
            let tilt = Rotation::axis_angle(&tilt_axis, rng.uniform(0.0, max_tilt_deg)).expect("unit axis");
            let spin = Rotation::axis_angle(&Vector3::z(), rng.uniform(-180.0, 180.0)).expect("unit axis");
            let rotation = tilt * spin;
            let translation = pivot.coords - rotation.rotate(tip_offset) + rng.gaussian_vector(translation_noise_sigma);
            Pose::new(rotation, translation)
        })
        .collect()
}
