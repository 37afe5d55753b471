use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, RngStream, Rotation, Vector3};
use crate::handeye::{board_grid, views_from_chain, HandEyeView, MarkerBoard};
use crate::registration::shapes::{Category, Shape};
use crate::registration::Mesh;

pub const TEMPLATES: [&str; 1] = ["phocal-like"];

/// Where an object's mesh comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Procedural(Shape),
    /// OBJ file; relative paths resolve against the scene file's directory.
    Obj(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub category: Category,
    pub mesh: MeshSource,
    /// `T_obj→base`.
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneCamera {
    pub name: String,
    /// `T_cam→ee`.
    pub cam_to_ee: Pose,
    /// End-effector poses used to evaluate hand-eye perturbations.
    pub calibration_stops: Vec<Pose>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub name: String,
    /// `T_ee→base` at each stop.
    pub stops: Vec<Pose>,
}

/// Calibration board: nominal points and its true placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardSetup {
    pub points: Vec<Point3>,
    /// `T_marker→base`.
    pub marker_base: Pose,
}

impl BoardSetup {
    /// Board with exact tip measurements.
    pub fn marker_board(&self) -> Result<MarkerBoard> {
        let measured = self.points.iter().map(|p| self.marker_base.apply(p)).collect();
        MarkerBoard::new(self.points.clone(), measured)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub objects: Vec<SceneObject>,
    pub cameras: Vec<SceneCamera>,
    pub trajectories: Vec<Trajectory>,
    pub board: BoardSetup,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let nonempty = |what: &str, n: usize| {
            if n == 0 {
                Err(Error::invalid(format!("scene needs at least one {what}")))
            } else {
                Ok(())
            }
        };
        nonempty("object", self.objects.len())?;
        nonempty("camera", self.cameras.len())?;
        nonempty("trajectory", self.trajectories.len())?;
        unique("object", self.objects.iter().map(|o| o.name.as_str()))?;
        unique("camera", self.cameras.iter().map(|c| c.name.as_str()))?;
        for t in &self.trajectories {
            if t.stops.is_empty() {
                return Err(Error::invalid(format!("trajectory '{}' has no stops", t.name)));
            }
        }
        for c in &self.cameras {
            if c.calibration_stops.is_empty() {
                return Err(Error::invalid(format!("camera '{}' has no calibration stops", c.name)));
            }
        }
        self.board.marker_board()?;
        Ok(())
    }

    /// Builds or loads every object mesh, in object order.
    pub fn load_meshes(&self, base_dir: Option<&Path>) -> Result<Vec<Mesh>> {
        self.objects
            .iter()
            .map(|o| match &o.mesh {
                MeshSource::Procedural(shape) => shape.mesh(),
                MeshSource::Obj(path) => {
                    let full = match base_dir {
                        Some(dir) if path.is_relative() => dir.join(path),
                        _ => path.clone(),
                    };
                    crate::io::load_obj(&full)
                }
            })
            .collect()
    }

    pub fn calibration_views(&self, camera: &SceneCamera) -> Vec<HandEyeView> {
        views_from_chain(&camera.cam_to_ee, &self.board.marker_base, &camera.calibration_stops)
    }

    pub fn frame_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.stops.len()).sum()
    }

    /// Applies `g` to every base-frame quantity.
    pub fn rebased(&self, g: &Pose) -> SceneConfig {
        let mut s = self.clone();
        for o in &mut s.objects {
            o.pose = *g * o.pose;
        }
        for c in &mut s.cameras {
            for e in &mut c.calibration_stops {
                *e = *g * *e;
            }
        }
        for t in &mut s.trajectories {
            for e in &mut t.stops {
                *e = *g * *e;
            }
        }
        s.board.marker_base = *g * s.board.marker_base;
        s
    }
}

fn unique<'a>(what: &str, names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::invalid(format!("duplicate {what} name '{n}'")));
        }
    }
    Ok(())
}

pub fn generate_scene(template: &str, rng: &mut RngStream) -> Result<SceneConfig> {
    match template {
        "phocal-like" => phocal_like(rng),
        other => Err(Error::invalid(format!(
            "unknown scene template '{other}' (available: {})",
            TEMPLATES.join(", ")
        ))),
    }
}

const TABLE_CENTER: [f64; 2] = [650.0, 0.0];
const TABLE_HALF: [f64; 2] = [230.0, 260.0];

/// Tabletop scene: 5 to 8 objects on the plane `z = 0` in front of the
/// robot, a marker board beside them, two arm cameras and two orbits.
fn phocal_like(rng: &mut RngStream) -> Result<SceneConfig> {
    let count = 5 + rng.below(4);
    let mut categories = Category::ALL.to_vec();
    let mut objects = Vec::with_capacity(count);
    let mut boxes: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for k in 0..count {
        let category = categories.remove(rng.below(categories.len()));
        let shape = category.default_shape();
        let mesh = shape.mesh()?;
        let (lo, _) = mesh.bounds();
        let mut placed = None;
        for _ in 0..2_000 {
            let yaw = Rotation::axis_angle(&Vector3::z(), rng.uniform(-180.0, 180.0))?;
            let xy = [
                TABLE_CENTER[0] + rng.uniform(-TABLE_HALF[0], TABLE_HALF[0]),
                TABLE_CENTER[1] + rng.uniform(-TABLE_HALF[1], TABLE_HALF[1]),
            ];
            let pose = Pose::new(yaw, Vector3::new(xy[0], xy[1], -lo.z));
            let footprint = footprint(&mesh, &pose);
            if boxes.iter().all(|b| !overlaps(b, &footprint)) {
                placed = Some((pose, footprint));
                break;
            }
        }
        let (pose, footprint) =
            placed.ok_or_else(|| Error::DegenerateGeometry("could not place objects without overlap".into()))?;
        boxes.push(footprint);
        objects.push(SceneObject {
            name: format!("{category}-{k}"),
            category,
            mesh: MeshSource::Procedural(shape),
            pose,
        });
    }

    // board lies flat beside the objects, near the robot
    let board = BoardSetup {
        points: board_grid(4, 3, 40.0),
        marker_base: Pose::new(
            Rotation::axis_angle(&Vector3::z(), rng.uniform(-20.0, 20.0))?,
            Vector3::new(TABLE_CENTER[0] - TABLE_HALF[0] - 120.0, rng.uniform(-80.0, 80.0), 0.0),
        ),
    };

    let mounts = [
        ("rgbd", Vector3::new(-65.0, 35.0, 70.0), [0.0, 2.0, -1.5]),
        ("polarization", Vector3::new(60.0, 40.0, 75.0), [0.0, -1.5, 2.5]),
    ];
    let mut cameras = Vec::new();
    for (name, offset, tilt) in mounts {
        let rot = Rotation::axis_angle(&Vector3::x(), tilt[0] + rng.uniform(-1.0, 1.0))?
            * Rotation::axis_angle(&Vector3::y(), tilt[1] + rng.uniform(-1.0, 1.0))?
            * Rotation::axis_angle(&Vector3::z(), tilt[2] + rng.uniform(-1.0, 1.0))?;
        let cam_to_ee = Pose::new(rot, offset + rng.gaussian_vector(2.0));
        let target = Point3::from(board.marker_base.translation);
        let calibration_stops = (0..10)
            .map(|_| {
                let eye = orbit_point(
                    &target,
                    rng.uniform(380.0, 480.0),
                    rng.uniform(50.0, 75.0),
                    rng.uniform(-180.0, 180.0),
                );
                Ok(Pose::look_at(&eye, &target, &Vector3::x())? * cam_to_ee.inverse())
            })
            .collect::<Result<Vec<_>>>()?;
        cameras.push(SceneCamera {
            name: name.to_string(),
            cam_to_ee,
            calibration_stops,
        });
    }

    let center = Point3::new(TABLE_CENTER[0], TABLE_CENTER[1], 0.0);
    let orbits = [("orbit-high", 480.0, 55.0), ("orbit-low", 560.0, 35.0)];
    let trajectories = orbits
        .iter()
        .map(|&(name, radius, elevation)| {
            let n = 80 + rng.below(41);
            let start = rng.uniform(-150.0, -110.0);
            let end = rng.uniform(110.0, 150.0);
            let stops = (0..n)
                .map(|i| {
                    let azimuth = start + (end - start) * i as f64 / (n - 1) as f64 + rng.uniform(-2.0, 2.0);
                    let eye = orbit_point(
                        &center,
                        radius + rng.uniform(-20.0, 20.0),
                        elevation + rng.uniform(-3.0, 3.0),
                        azimuth,
                    );
                    let aim = center + rng.gaussian_vector(15.0);
                    Pose::look_at(&eye, &aim, &Vector3::z())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory {
                name: name.to_string(),
                stops,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let scene = SceneConfig {
        objects,
        cameras,
        trajectories,
        board,
    };
    scene.validate()?;
    Ok(scene)
}

/// Point at `radius` from `center`, `elevation` above the table and
/// `azimuth` measured from the robot-facing side (-x), degrees.
fn orbit_point(center: &Point3, radius: f64, elevation: f64, azimuth: f64) -> Point3 {
    let (el, az) = (elevation.to_radians(), azimuth.to_radians());
    center + Vector3::new(-az.cos() * el.cos(), az.sin() * el.cos(), el.sin()) * radius
}

/// Axis-aligned xy extent of the posed mesh.
fn footprint(mesh: &Mesh, pose: &Pose) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in mesh.vertices() {
        let p = pose.apply(v);
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

fn overlaps(a: &([f64; 2], [f64; 2]), b: &([f64; 2], [f64; 2])) -> bool {
    (0..2).all(|k| a.0[k] < b.1[k] && b.0[k] < a.1[k])
}

/// World-space axis-aligned bounds of every object, for overlap checks.
pub fn object_bounds(scene: &SceneConfig, meshes: &[Mesh]) -> Vec<(Point3, Point3)> {
    scene
        .objects
        .iter()
        .zip(meshes)
        .map(|(o, m)| {
            let mut lo = Point3::from([f64::INFINITY; 3]);
            let mut hi = Point3::from([f64::NEG_INFINITY; 3]);
            for v in m.vertices() {
                let p = o.pose.apply(v);
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
            (lo, hi)
        })
        .collect()
}
