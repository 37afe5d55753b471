//! Rigid-body algebra in millimetres and degrees.
//!
//! A [`Pose`] maps points as `p -> R·p + t`. Composition `a * b` applies `b`
//! first, so a chain such as `T_cam→ee⁻¹ · T_ee→base⁻¹ · T_obj→base` is written
//! left to right exactly as it reads.
//!
//! Rotations are stored as unit quaternions. Angles cross the public API in
//! degrees; radians stay internal.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Tolerance on |axis| for [`Rotation::axis_angle`].
pub const AXIS_NORM_TOLERANCE: f64 = 1e-9;
/// Tolerance on |q| accepted when reading a quaternion from outside.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;
/// Compose chains renormalize after this many factors.
pub const RENORMALIZE_EVERY: usize = 8;

/// A proper rotation in 3-space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Rodrigues rotation about a unit `axis` by `angle_deg` degrees.
    pub fn axis_angle(axis: &Vector3, angle_deg: f64) -> Result<Self> {
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOLERANCE {
            return Err(Error::NonUnitAxis { norm });
        }
        if !angle_deg.is_finite() {
            return Err(Error::invalid(format!("rotation angle {angle_deg} is not finite")));
        }
        let half = angle_deg.to_radians() / 2.0;
        let v = axis / norm * half.sin();
        Ok(Rotation(UnitQuaternion::new_unchecked(Quaternion::new(
            half.cos(),
            v.x,
            v.y,
            v.z,
        ))))
    }

    /// Builds a rotation from `[w, x, y, z]`.
    ///
    /// The quaternion must be unit length within [`QUATERNION_NORM_TOLERANCE`].
    /// Values already unit to 1e-12 are kept bit-for-bit; others are rescaled.
    pub fn from_wxyz(q: [f64; 4]) -> Result<Self> {
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("quaternion {q:?} has non-finite components")));
        }
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        let norm = quat.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "quaternion norm {norm} differs from 1 by more than {QUATERNION_NORM_TOLERANCE}"
            )));
        }
        if (norm - 1.0).abs() <= 1e-12 {
            Ok(Rotation(UnitQuaternion::new_unchecked(quat)))
        } else {
            Ok(Rotation(UnitQuaternion::new_normalize(quat)))
        }
    }

    pub fn to_wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Nearest rotation to an arbitrary 3×3 matrix (SVD projection with
    /// determinant correction).
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Rotation(UnitQuaternion::from_matrix(m))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Rotation(q)
    }

    pub fn unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.inverse())
    }

    /// Rotation angle in degrees, in `[0, 180]`.
    pub fn angle_deg(&self) -> f64 {
        let q = self.0.quaternion();
        2.0 * q.imag().norm().atan2(q.w.abs()).to_degrees()
    }

    pub fn rotate(&self, v: &Vector3) -> Vector3 {
        self.0 * v
    }

    pub fn renormalized(&self) -> Self {
        Rotation(UnitQuaternion::new_normalize(*self.0.quaternion()))
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Geodesic distance between two rotations in degrees, in `[0, 180]`.
pub fn rotation_distance(a: &Rotation, b: &Rotation) -> f64 {
    (a.inverse() * *b).angle_deg()
}

/// Rigid transform, translation in millimetres.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3) -> Self {
        Pose { rotation, translation }
    }

    pub fn identity() -> Self {
        Pose::default()
    }

    pub fn from_translation(translation: Vector3) -> Self {
        Pose::new(Rotation::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Pose::new(rotation, Vector3::zeros())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    /// `(Rᵀ, −Rᵀ·t)`.
    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose {
            rotation: r,
            translation: -r.rotate(&self.translation),
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.rotate(&p.coords) + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation.rotate(v)
    }

    /// `[qw, qx, qy, qz, tx, ty, tz]`.
    pub fn to_row(&self) -> [f64; 7] {
        let q = self.rotation.to_wxyz();
        let t = self.translation;
        [q[0], q[1], q[2], q[3], t.x, t.y, t.z]
    }

    pub fn from_row(row: [f64; 7]) -> Result<Pose> {
        let rotation = Rotation::from_wxyz([row[0], row[1], row[2], row[3]])?;
        if row[4..].iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("translation {:?} is not finite", &row[4..])));
        }
        Ok(Pose::new(rotation, Vector3::new(row[4], row[5], row[6])))
    }

    pub fn renormalized(&self) -> Pose {
        Pose::new(self.rotation.renormalized(), self.translation)
    }

    /// Camera-style frame at `eye` with `+z` towards `target` and `-y` as
    /// close to `up` as possible.
    pub fn look_at(eye: &Point3, target: &Point3, up: &Vector3) -> Result<Pose> {
        let z = target - eye;
        let x = z.cross(up);
        if z.norm() < 1e-9 || x.norm() < 1e-9 * z.norm() {
            return Err(Error::DegenerateGeometry(format!(
                "look_at from {eye} to {target} is undefined for up {up}"
            )));
        }
        let z = z.normalize();
        let x = x.normalize();
        let y = z.cross(&x);
        Ok(Pose::new(rotation_from_axes(&x, &y, &z), eye.coords))
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.to_row();
        write!(
            f,
            "q(w,x,y,z)=({:.9}, {:.9}, {:.9}, {:.9}) t=({:.6}, {:.6}, {:.6}) mm",
            r[0], r[1], r[2], r[3], r[4], r[5], r[6]
        )
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wxyz().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Rotation::from_wxyz(<[f64; 4]>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let row = <[f64; 7]>::deserialize(d)?;
        Pose::from_row(row).map_err(serde::de::Error::custom)
    }
}

/// Composes `factors` left to right (`f[0] · f[1] · …`), renormalizing the
/// rotation every [`RENORMALIZE_EVERY`] factors.
pub fn compose_chain(factors: &[Pose]) -> Pose {
    let mut acc = Pose::identity();
    for (i, f) in factors.iter().enumerate() {
        acc = acc.compose(f);
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            acc = acc.renormalized();
        }
    }
    if factors.len() > RENORMALIZE_EVERY {
        acc = acc.renormalized();
    }
    acc
}

/// Seeded, platform-independent random stream (ChaCha8).
///
/// Parallel or nested work takes a [`fork`](RngStream::fork) rather than
/// sharing one stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `index`; does not advance `self`.
    pub fn fork(&self, index: u64) -> RngStream {
        let stream = splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        Self::with_stream(self.seed, stream)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gaussian_vector(&mut self, sigma: f64) -> Vector3 {
        Vector3::new(self.gaussian(), self.gaussian(), self.gaussian()) * sigma
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    pub fn unit_vector(&mut self) -> Vector3 {
        random_unit_vector(self)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform direction on the unit sphere from a normalized Gaussian triple.
pub fn random_unit_vector(rng: &mut RngStream) -> Vector3 {
    loop {
        let v = Vector3::new(rng.gaussian(), rng.gaussian(), rng.gaussian());
        let n = v.norm();
        // exact zero has probability ~0; the loop only guards the division
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Uniformly random rotation (normalized Gaussian quaternion).
pub fn random_rotation(rng: &mut RngStream) -> Rotation {
    let q = Quaternion::new(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    Rotation(UnitQuaternion::new_normalize(q))
}

/// Rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between(from: &Vector3, to: &Vector3) -> Rotation {
    match UnitQuaternion::rotation_between(from, to) {
        Some(q) => Rotation(q),
        // antiparallel: half turn about any perpendicular axis
        None => {
            let helper = if from.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let axis = Unit::new_normalize(from.cross(&helper));
            Rotation(UnitQuaternion::from_axis_angle(&axis, std::f64::consts::PI))
        }
    }
}

/// Rotation whose columns are the given orthonormal frame axes.
pub fn rotation_from_axes(x: &Vector3, y: &Vector3, z: &Vector3) -> Rotation {
    Rotation::from_matrix(&Matrix3::from_columns(&[*x, *y, *z]))
}
