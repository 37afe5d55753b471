//! Simulated annotation-quality evaluation.
//!
//! Objects are placed at known poses in the robot base frame and a camera on
//! the arm replays recorded end-effector trajectories. Ground truth is
//! `T_gt = T_cam→ee⁻¹ · T_ee→base⁻¹ · T_obj→base`; the annotated pose uses
//! the same chain with a perturbed object pose and a perturbed hand-eye
//! matrix. The reported error is the pointwise RMSE between the two over
//! each object's surface samples.

mod scene;

pub use scene::{
    generate_scene, object_bounds, BoardSetup, MeshSource, SceneCamera, SceneConfig, SceneObject, Trajectory, TEMPLATES,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{random_unit_vector, Point3, Pose, RngStream, Rotation};
use crate::handeye::{evaluate_handeye, HandEyeView, MarkerBoard};
use crate::metrics::pointwise_rmse;
use crate::registration::{sample_surface, Mesh};

/// Final per-camera RMSE of the reference simulation, mm.
pub const REFERENCE_SIM_RMSE_MM: [(&str, f64); 2] = [("rgbd", 0.84), ("polarization", 0.76)];
pub const DEFAULT_SAMPLES_PER_OBJECT: usize = 2_000;
pub const DEFAULT_DRAWS: usize = 25;

/// Frame in which the object pose error is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFrame {
    /// `(R_err·R, t + t_err)`: rotation about the object's own origin.
    #[default]
    ObjectOrigin,
    /// `[R_err|t_err] · T`: rotation about the base origin.
    BaseOrigin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub obj_translation_mm: f64,
    pub obj_rotation_deg: f64,
    pub obj_frame: NoiseFrame,
    /// Target evaluation RMSE of each camera's perturbed hand-eye matrix.
    /// Zero leaves that camera's matrix exact.
    pub handeye_target_rmse: BTreeMap<String, f64>,
    pub seed: u64,
    pub samples_per_object: usize,
    pub search: PerturbationSearch,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            obj_translation_mm: 0.20,
            obj_rotation_deg: 0.38,
            obj_frame: NoiseFrame::ObjectOrigin,
            handeye_target_rmse: [("rgbd".to_string(), 0.89), ("polarization".to_string(), 0.83)].into(),
            seed: 0,
            samples_per_object: DEFAULT_SAMPLES_PER_OBJECT,
            search: PerturbationSearch::default(),
        }
    }
}

impl NoiseSpec {
    /// No noise anywhere.
    pub fn zero() -> Self {
        NoiseSpec {
            obj_translation_mm: 0.0,
            obj_rotation_deg: 0.0,
            handeye_target_rmse: BTreeMap::new(),
            ..NoiseSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.obj_translation_mm) || !ok(self.obj_rotation_deg) {
            return Err(Error::invalid(
                "object noise magnitudes must be finite and non-negative",
            ));
        }
        if let Some((name, v)) = self.handeye_target_rmse.iter().find(|(_, v)| !ok(**v)) {
            return Err(Error::invalid(format!("hand-eye target for '{name}' is {v}")));
        }
        if self.samples_per_object == 0 {
            return Err(Error::invalid("samples_per_object must be positive"));
        }
        self.search.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSearch {
    pub budget: usize,
    pub tolerance_pct: f64,
    /// When false, candidates are pure translations.
    pub rotation: bool,
}

impl Default for PerturbationSearch {
    fn default() -> Self {
        PerturbationSearch {
            budget: 10_000,
            tolerance_pct: 2.0,
            rotation: true,
        }
    }
}

impl PerturbationSearch {
    fn validate(&self) -> Result<()> {
        if self.budget == 0 || !(self.tolerance_pct > 0.0 && self.tolerance_pct.is_finite()) {
            return Err(Error::invalid(format!("invalid perturbation search {self:?}")));
        }
        Ok(())
    }
}

/// Two independent unit vectors: the first scaled to the translation error,
/// the second the axis of the rotation error.
pub fn perturb_object_pose(t: &Pose, spec: &NoiseSpec, rng: &mut RngStream) -> Result<Pose> {
    let direction = random_unit_vector(rng);
    let axis = random_unit_vector(rng);
    let r_err = Rotation::axis_angle(&axis, spec.obj_rotation_deg)?;
    let t_err = direction * spec.obj_translation_mm;
    Ok(match spec.obj_frame {
        NoiseFrame::ObjectOrigin => Pose::new(r_err * t.rotation, t.translation + t_err),
        NoiseFrame::BaseOrigin => Pose::new(r_err, t_err) * *t,
    })
}

/// An accepted hand-eye perturbation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HandEyePerturbation {
    /// Applied in the camera frame: `cam_to_ee = original · perturbation`.
    pub perturbation: Pose,
    pub cam_to_ee: Pose,
    pub evaluated_rmse: f64,
    pub draws: usize,
}

/// Draws random small perturbations of `cam` until one evaluates within
/// the tolerance of `target_rmse` on the given views.
pub fn calibrate_handeye_perturbation(
    cam: &Pose,
    board: &MarkerBoard,
    views: &[HandEyeView],
    target_rmse: f64,
    search: &PerturbationSearch,
    rng: &mut RngStream,
) -> Result<HandEyePerturbation> {
    if !(target_rmse > 0.0 && target_rmse.is_finite()) {
        return Err(Error::invalid(format!(
            "target RMSE must be positive, got {target_rmse}"
        )));
    }
    if views.is_empty() {
        return Err(Error::invalid("perturbation calibration needs at least one view"));
    }
    search.validate()?;

    // sweep angles up to the rotation that alone would move the board
    // points by twice the target
    let mut distance = 0.0;
    for v in views {
        for b in board.board_points() {
            distance += v.marker_in_cam.apply(b).coords.norm();
        }
    }
    distance /= (views.len() * board.len()) as f64;
    let max_angle_deg = if search.rotation {
        (2.0 * target_rmse / distance.max(1.0)).to_degrees()
    } else {
        0.0
    };

    let tol = target_rmse * search.tolerance_pct / 100.0;
    let mut closest = f64::INFINITY;
    for draw in 1..=search.budget {
        let direction = random_unit_vector(rng);
        let magnitude = rng.uniform(0.0, 2.0 * target_rmse);
        let axis = random_unit_vector(rng);
        let angle = rng.uniform(0.0, max_angle_deg);
        let perturbation = Pose::new(Rotation::axis_angle(&axis, angle)?, direction * magnitude);
        let candidate = *cam * perturbation;
        let rmse = evaluate_handeye(views, &candidate, board);
        if (rmse - target_rmse).abs() <= tol {
            return Ok(HandEyePerturbation {
                perturbation,
                cam_to_ee: candidate,
                evaluated_rmse: rmse,
                draws: draw,
            });
        }
        if (rmse - target_rmse).abs() < (closest - target_rmse).abs() {
            closest = rmse;
        }
    }
    Err(Error::SearchFailed {
        target: target_rmse,
        tolerance_pct: search.tolerance_pct,
        draws: search.budget,
        closest,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectReport {
    pub object: String,
    /// Mean over frames of the per-frame RMSE, mm.
    pub rmse_mm: f64,
    /// Per-frame RMSE in trajectory order, mm.
    pub frames: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CameraReport {
    pub camera: String,
    pub target_rmse_mm: f64,
    pub handeye: Option<HandEyePerturbation>,
    pub objects: Vec<ObjectReport>,
    /// Mean over objects, mm.
    pub rmse_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedObject {
    pub object: String,
    pub pose: Pose,
    pub annotated_pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub draw: u64,
    pub objects: Vec<PerturbedObject>,
    pub cameras: Vec<CameraReport>,
}

impl SimReport {
    pub fn camera(&self, name: &str) -> Option<&CameraReport> {
        self.cameras.iter().find(|c| c.camera == name)
    }
}

/// Model-frame surface samples for every mesh; fixed by the noise seed so
/// that repeated draws differ only in the injected noise.
pub fn object_samples(meshes: &[Mesh], spec: &NoiseSpec) -> Vec<Vec<Point3>> {
    let root = RngStream::new(spec.seed).fork(u64::MAX);
    meshes
        .iter()
        .enumerate()
        .map(|(k, m)| sample_surface(m, spec.samples_per_object, &mut root.fork(k as u64)))
        .collect()
}

/// One simulation run: draw 0 of the noise seed.
pub fn simulate_annotation_error(scene: &SceneConfig, meshes: &[Mesh], spec: &NoiseSpec) -> Result<SimReport> {
    spec.validate()?;
    scene.validate()?;
    let samples = object_samples(meshes, spec);
    simulate_draw(scene, &samples, spec, 0)
}

/// Run `draw` with precomputed object samples.
pub fn simulate_draw(scene: &SceneConfig, samples: &[Vec<Point3>], spec: &NoiseSpec, draw: u64) -> Result<SimReport> {
    if samples.len() != scene.objects.len() {
        return Err(Error::invalid(format!(
            "{} sample sets for {} objects",
            samples.len(),
            scene.objects.len()
        )));
    }
    let run = RngStream::new(spec.seed).fork(draw);
    let object_rng = run.fork(0);
    let camera_rng = run.fork(1);

    let objects: Vec<PerturbedObject> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| {
            Ok(PerturbedObject {
                object: o.name.clone(),
                pose: o.pose,
                annotated_pose: perturb_object_pose(&o.pose, spec, &mut object_rng.fork(k as u64))?,
            })
        })
        .collect::<Result<_>>()?;

    let board = scene.board.marker_board()?;
    let mut cameras = Vec::with_capacity(scene.cameras.len());
    for (c, cam) in scene.cameras.iter().enumerate() {
        let target = *spec.handeye_target_rmse.get(&cam.name).unwrap_or(&0.0);
        let handeye = if target > 0.0 {
            let views = scene.calibration_views(cam);
            Some(calibrate_handeye_perturbation(
                &cam.cam_to_ee,
                &board,
                &views,
                target,
                &spec.search,
                &mut camera_rng.fork(c as u64),
            )?)
        } else {
            None
        };
        let annotated_cam = handeye.as_ref().map_or(cam.cam_to_ee, |h| h.cam_to_ee);
        let (gt_inv, ann_inv) = (cam.cam_to_ee.inverse(), annotated_cam.inverse());

        let reports = objects
            .iter()
            .zip(samples)
            .map(|(o, pts)| {
                let frames: Vec<f64> = scene
                    .trajectories
                    .iter()
                    .flat_map(|t| &t.stops)
                    .map(|ee| {
                        let ee_inv = ee.inverse();
                        let gt = gt_inv * ee_inv * o.pose;
                        let annotated = ann_inv * ee_inv * o.annotated_pose;
                        pointwise_rmse(pts, &gt, &annotated)
                    })
                    .collect();
                ObjectReport {
                    object: o.object.clone(),
                    rmse_mm: mean(&frames),
                    frames,
                }
            })
            .collect::<Vec<_>>();
        cameras.push(CameraReport {
            camera: cam.name.clone(),
            target_rmse_mm: target,
            handeye,
            rmse_mm: mean(&reports.iter().map(|r| r.rmse_mm).collect::<Vec<_>>()),
            objects: reports,
        });
    }
    Ok(SimReport {
        seed: spec.seed,
        draw,
        objects,
        cameras,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CameraSummary {
    pub camera: String,
    pub single_draw_mm: f64,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub min_mm: f64,
    pub max_mm: f64,
    pub reference_mm: Option<f64>,
    pub per_draw_mm: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatedSimReport {
    pub draws: usize,
    /// Draw 0 in full.
    pub single: SimReport,
    pub cameras: Vec<CameraSummary>,
}

/// `draws` independent runs (draw 0 is the single-run result).
pub fn simulate_repeated(
    scene: &SceneConfig,
    meshes: &[Mesh],
    spec: &NoiseSpec,
    draws: usize,
) -> Result<RepeatedSimReport> {
    if draws == 0 {
        return Err(Error::invalid("draw count must be positive"));
    }
    spec.validate()?;
    scene.validate()?;
    let samples = object_samples(meshes, spec);
    let runs = (0..draws as u64)
        .map(|d| simulate_draw(scene, &samples, spec, d))
        .collect::<Result<Vec<_>>>()?;
    let cameras = scene
        .cameras
        .iter()
        .enumerate()
        .map(|(c, cam)| {
            let values: Vec<f64> = runs.iter().map(|r| r.cameras[c].rmse_mm).collect();
            let m = mean(&values);
            let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
            CameraSummary {
                camera: cam.name.clone(),
                single_draw_mm: values[0],
                mean_mm: m,
                std_mm: var.sqrt(),
                min_mm: values.iter().copied().fold(f64::INFINITY, f64::min),
                max_mm: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                reference_mm: REFERENCE_SIM_RMSE_MM
                    .iter()
                    .find(|(n, _)| *n == cam.name)
                    .map(|(_, v)| *v),
                per_draw_mm: values,
            }
        })
        .collect();
    Ok(RepeatedSimReport {
        draws,
        single: runs.into_iter().next().expect("draws > 0"),
        cameras,
    })
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
