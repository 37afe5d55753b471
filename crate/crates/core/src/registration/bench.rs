//! Pose-recovery experiment for the annotation step.
//!
//! For each mesh: 25 ground-truth surface points are picked once on the
//! part of the object reachable above its support plane and jittered with
//! uniform noise; ICP is then started from several perturbed poses. The recovered pose is compared with
//! the ground truth.

use serde::Serialize;

use crate::error::Result;
use crate::geom::{random_rotation, Point3, Pose, RngStream, Rotation, Vector3};

use super::icp::{icp_refine_with, IcpParams, SurfaceModel};
use super::mesh::sample_surface;
use super::{pose_error, Mesh};

/// Reported mean recovery error, translation mm and rotation degrees.
pub const REFERENCE_RECOVERY_ERROR: (f64, f64) = (0.20, 0.38);

/// Points closer than this to the support plane are out of reach, mm.
pub const SUPPORT_CLEARANCE_MM: f64 = 0.5;

/// Model samples per mesh in the experiment, dense enough that sample
/// spacing stays well under the injected noise.
pub const BENCH_SAMPLE_COUNT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcpBenchConfig {
    pub points_per_object: usize,
    /// Per-axis uniform measurement noise half-width, mm.
    pub point_noise_mm: f64,
    /// Per-axis uniform translation perturbation half-width, mm.
    pub max_translation_mm: f64,
    /// Rotation perturbation drawn uniformly in `[0, max]` degrees.
    pub max_rotation_deg: f64,
    pub perturbations_per_object: usize,
    pub icp: IcpParams,
    pub seed: u64,
}

impl Default for IcpBenchConfig {
    fn default() -> Self {
        IcpBenchConfig {
            points_per_object: 25,
            point_noise_mm: 0.2,
            max_translation_mm: 2.0,
            max_rotation_deg: 4.0,
            perturbations_per_object: 5,
            icp: IcpParams {
                sample_count: BENCH_SAMPLE_COUNT,
                ..IcpParams::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcpTrial {
    pub object: String,
    pub trial: usize,
    pub initial_translation_error_mm: f64,
    pub initial_rotation_error_deg: f64,
    pub translation_error_mm: f64,
    pub rotation_error_deg: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcpBenchReport {
    pub trials: Vec<IcpTrial>,
    pub mean_translation_error_mm: f64,
    pub mean_rotation_error_deg: f64,
    pub rms_translation_error_mm: f64,
    pub rms_rotation_error_deg: f64,
}

/// Runs the recovery experiment over named meshes.
pub fn run_icp_recovery(meshes: &[(String, Mesh)], config: &IcpBenchConfig) -> Result<IcpBenchReport> {
    config.icp.validate()?;
    let root = RngStream::new(config.seed);
    let mut trials = Vec::new();
    for (k, (name, mesh)) in meshes.iter().enumerate() {
        let mut rng = root.fork(k as u64);
        let model_params = IcpParams {
            sample_seed: rng.next_u64(),
            ..config.icp.clone()
        };
        let model = SurfaceModel::from_mesh(mesh, &model_params);

        // ground-truth surface, independent of the ICP samples
        let truth_surface = sample_surface(mesh, 20_000, &mut rng);
        // the object rests on its lowest face; the tip cannot reach below
        let support_z = truth_surface.iter().map(|p| p.z).fold(f64::INFINITY, f64::min) + SUPPORT_CLEARANCE_MM;

        // one measurement per object, then several perturbed starts
        let gt = Pose::new(random_rotation(&mut rng), rng.gaussian_vector(300.0));
        let area: Vec<&Point3> = truth_surface.iter().filter(|p| p.z > support_z).collect();
        let noise = config.point_noise_mm;
        let measured: Vec<Point3> = (0..config.points_per_object)
            .map(|_| {
                let p = area[rng.below(area.len())];
                let jitter = Vector3::new(
                    rng.uniform(-noise, noise),
                    rng.uniform(-noise, noise),
                    rng.uniform(-noise, noise),
                );
                gt.apply(p) + jitter
            })
            .collect();

        for trial in 0..config.perturbations_per_object {
            let t = config.max_translation_mm;
            let offset = Vector3::new(rng.uniform(-t, t), rng.uniform(-t, t), rng.uniform(-t, t));
            let tilt = Rotation::axis_angle(&rng.unit_vector(), rng.uniform(0.0, config.max_rotation_deg))?;
            // perturbation about the object origin, expressed in the base frame
            let initial = Pose::new(tilt * gt.rotation, gt.translation + offset);
            let before = pose_error(&gt, &initial);

            let out = icp_refine_with(&measured, &model, &initial, &model_params)?;
            let after = pose_error(&gt, &out.pose);
            trials.push(IcpTrial {
                object: name.clone(),
                trial,
                initial_translation_error_mm: before.translation_mm,
                initial_rotation_error_deg: before.rotation_deg,
                translation_error_mm: after.translation_mm,
                rotation_error_deg: after.rotation_deg,
                iterations: out.iterations,
                converged: out.converged,
            });
        }
    }
    let n = trials.len().max(1) as f64;
    let mean = |f: fn(&IcpTrial) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let rms = |f: fn(&IcpTrial) -> f64| (trials.iter().map(|t| f(t).powi(2)).sum::<f64>() / n).sqrt();
    Ok(IcpBenchReport {
        mean_translation_error_mm: mean(|t| t.translation_error_mm),
        mean_rotation_error_deg: mean(|t| t.rotation_error_deg),
        rms_translation_error_mm: rms(|t| t.translation_error_mm),
        rms_rotation_error_deg: rms(|t| t.rotation_error_deg),
        trials,
    })
}

/// The three stand-in meshes of the recovery experiment. All are closed
/// solids: with walls thinner than the perturbation, nearest-sample matching
/// lands on the opposite wall.
pub fn recovery_meshes() -> Result<Vec<(String, Mesh)>> {
    use super::shapes::Shape;
    Ok(vec![
        (
            "chamfered-box".into(),
            Shape::box_with_chamfer([120.0, 80.0, 60.0], 6.0).mesh()?,
        ),
        ("travel-mug".into(), Shape::travel_mug(40.0, 95.0).mesh()?),
        ("blade".into(), Shape::knife(210.0).mesh()?),
    ])
}
