use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, Rotation, Vector3};

/// Oriented box: `center + rotation · (±half_extents)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point3,
    pub half_extents: Vector3,
    pub rotation: Rotation,
}

impl OrientedBox {
    pub fn new(center: Point3, half_extents: Vector3, rotation: Rotation) -> Result<Self> {
        if !half_extents.iter().all(|h| h.is_finite() && *h > 0.0) || !center.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!(
                "box needs finite center and positive half extents, got {center} / {half_extents}"
            )));
        }
        Ok(OrientedBox {
            center,
            half_extents,
            rotation,
        })
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn transformed(&self, g: &Pose) -> OrientedBox {
        OrientedBox {
            center: g.apply(&self.center),
            half_extents: self.half_extents,
            rotation: g.rotation * self.rotation,
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let local = self.rotation.inverse().rotate(&(p - self.center));
        (0..3).all(|k| local[k].abs() <= self.half_extents[k])
    }

    pub fn corner(&self, signs: [f64; 3]) -> Point3 {
        let h = self.half_extents;
        self.center
            + self
                .rotation
                .rotate(&Vector3::new(signs[0] * h.x, signs[1] * h.y, signs[2] * h.z))
    }

    /// The six faces as (outward normal, offset, corners counter-clockwise
    /// seen from outside).
    fn faces(&self) -> [Face; 6] {
        let axes = self.rotation.matrix();
        std::array::from_fn(|f| {
            let (axis, sign) = (f / 2, if f % 2 == 0 { -1.0 } else { 1.0 });
            let normal = axes.column(axis) * sign;
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            // corners in the (u, v) plane, ordered so that u × v · normal > 0
            let order: [(f64, f64); 4] = if sign > 0.0 {
                [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            } else {
                [(-1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, -1.0)]
            };
            let polygon = order
                .iter()
                .map(|&(su, sv)| {
                    let mut s = [0.0; 3];
                    s[axis] = sign;
                    s[u] = su;
                    s[v] = sv;
                    self.corner(s)
                })
                .collect();
            Face {
                normal,
                offset: normal.dot(&self.center.coords) + self.half_extents[axis],
                polygon,
            }
        })
    }
}

struct Face {
    normal: Vector3,
    offset: f64,
    polygon: Vec<Point3>,
}

/// Intersection over union of two oriented boxes, computed exactly from the
/// intersection polytope.
pub fn iou3d(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Volume of `a ∩ b`. Faces of the intersection are the faces of each box
/// clipped by the other box; summing `area · height / 3` over them from a
/// fixed reference point gives the volume.
pub fn intersection_volume(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let fa = a.faces();
    let fb = b.faces();
    let scale = a.half_extents.amax().max(b.half_extents.amax());
    let eps = 1e-12 * scale;
    let reference = a.center;

    let mut volume = 0.0;
    for (own, other, skip_shared) in [(&fb, &fa, false), (&fa, &fb, true)] {
        for face in own.iter() {
            // a face of `a` lying on an equally oriented face of `b` was
            // already counted from `b`'s side
            if skip_shared
                && other.iter().any(|o| {
                    (o.normal - face.normal).norm() < 1e-12 && (o.offset - face.offset).abs() <= eps.max(1e-12)
                })
            {
                continue;
            }
            let mut poly = face.polygon.clone();
            for plane in other.iter() {
                poly = clip(&poly, plane, eps);
                if poly.len() < 3 {
                    break;
                }
            }
            if poly.len() < 3 {
                continue;
            }
            let area = polygon_area(&poly, &face.normal);
            let height = face.normal.dot(&(poly[0] - reference));
            volume += area * height / 3.0;
        }
    }
    volume.max(0.0)
}

/// Keeps the part of `poly` with `normal · x ≤ offset` (boundary included).
fn clip(poly: &[Point3], plane: &Face, eps: f64) -> Vec<Point3> {
    let dist = |p: &Point3| plane.normal.dot(&p.coords) - plane.offset;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let (dp, dq) = (dist(p), dist(q));
        let (p_in, q_in) = (dp <= eps, dq <= eps);
        if p_in {
            out.push(*p);
        }
        if p_in != q_in && (dp - dq).abs() > 0.0 {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t.clamp(0.0, 1.0));
        }
    }
    out
}

fn polygon_area(poly: &[Point3], normal: &Vector3) -> f64 {
    let mut acc = Vector3::zeros();
    let o = poly[0];
    for i in 1..poly.len() - 1 {
        acc += (poly[i] - o).cross(&(poly[i + 1] - o));
    }
    0.5 * acc.dot(normal).abs()
}
