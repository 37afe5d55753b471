//! Procedural stand-in meshes for household object categories.
//!
//! Every shape is centred on its bounding box, with `z` up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, Vector3};

use super::Mesh;

/// Object category labels used in scenes and detection sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Bottle,
    Box,
    Can,
    Cup,
    Remote,
    Teapot,
    Cutlery,
    Glassware,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Bottle,
        Category::Box,
        Category::Can,
        Category::Cup,
        Category::Remote,
        Category::Teapot,
        Category::Cutlery,
        Category::Glassware,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::Bottle => "bottle",
            Category::Box => "box",
            Category::Can => "can",
            Category::Cup => "cup",
            Category::Remote => "remote",
            Category::Teapot => "teapot",
            Category::Cutlery => "cutlery",
            Category::Glassware => "glassware",
        }
    }

    /// A representative procedural shape for the category.
    pub fn default_shape(&self) -> Shape {
        match self {
            Category::Bottle => Shape::bottle(35.0, 220.0),
            Category::Box => Shape::box_with_chamfer([120.0, 80.0, 60.0], 3.0),
            Category::Can => Shape::can(33.0, 115.0),
            Category::Cup => Shape::mug(40.0, 95.0),
            Category::Remote => Shape::box_with_chamfer([170.0, 45.0, 20.0], 4.0),
            Category::Teapot => Shape::teapot(),
            Category::Cutlery => Shape::knife(210.0),
            Category::Glassware => Shape::wine_glass(),
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown category '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Box with full side lengths `size`, all edges bevelled by `chamfer`.
    ChamferedBox { size: [f64; 3], chamfer: f64 },
    /// Surface of revolution of an `(r, z)` profile about the z axis.
    Revolution { profile: Vec<[f64; 2]>, segments: usize },
    /// Counter-clockwise `(x, y)` outline extruded along z.
    Extrusion { outline: Vec<[f64; 2]>, thickness: f64 },
    /// Union of posed parts, re-centred on the combined bounding box.
    Compound { parts: Vec<Part> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub shape: Shape,
    pub pose: Pose,
}

impl Part {
    pub fn new(shape: Shape, pose: Pose) -> Part {
        Part { shape, pose }
    }
}

impl Shape {
    pub fn box_with_chamfer(size: [f64; 3], chamfer: f64) -> Shape {
        Shape::ChamferedBox { size, chamfer }
    }

    /// Open-topped cup with 3 mm walls and a 5 mm base.
    pub fn cup(radius: f64, height: f64) -> Shape {
        revolution(vec![
            [0.0, 0.0],
            [radius - 4.0, 0.0],
            [radius, 4.0],
            [radius, height],
            [radius - 3.0, height],
            [radius - 3.0, 5.0],
            [0.0, 5.0],
        ])
    }

    pub fn can(radius: f64, height: f64) -> Shape {
        revolution(vec![
            [0.0, 0.0],
            [radius - 2.0, 0.0],
            [radius, 2.0],
            [radius, height - 2.0],
            [radius - 2.0, height],
            [0.0, height],
        ])
    }

    pub fn bottle(radius: f64, height: f64) -> Shape {
        let neck = 0.35 * radius;
        revolution(vec![
            [0.0, 0.0],
            [radius, 0.0],
            [radius, 0.6 * height],
            [0.8 * radius, 0.7 * height],
            [neck, 0.82 * height],
            [neck, height],
            [0.0, height],
        ])
    }

    /// Squat bulb with a lid knob.
    pub fn teapot() -> Shape {
        let mut profile: Vec<[f64; 2]> = (0..=16)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / 16.0;
                [75.0 * a.sin(), 55.0 * (1.0 - a.cos())]
            })
            .collect();
        profile.pop();
        profile.extend([[12.0, 110.0], [12.0, 122.0], [0.0, 125.0]]);
        revolution(profile)
    }

    pub fn wine_glass() -> Shape {
        revolution(vec![
            [0.0, 0.0],
            [35.0, 0.0],
            [35.0, 3.0],
            [4.0, 8.0],
            [4.0, 80.0],
            [30.0, 95.0],
            [40.0, 125.0],
            [38.0, 150.0],
            [36.0, 150.0],
            [37.5, 126.0],
            [28.0, 99.0],
            [0.0, 90.0],
        ])
    }

    /// Table-knife-like elongated blade with a handle.
    /// Table knife: flat blade ending in a thick chamfered grip.
    pub fn knife(length: f64) -> Shape {
        let s = length / 210.0;
        let blade = Shape::Extrusion {
            outline: [[-2.0, -11.0], [90.0, -7.0], [110.0, 3.0], [90.0, 11.0], [-2.0, 11.0]]
                .iter()
                .map(|p| [p[0] * s, p[1] * s])
                .collect(),
            thickness: 2.5 * s,
        };
        let grip = Shape::box_with_chamfer([100.0 * s, 24.0 * s, 16.0 * s], 3.0 * s);
        // the blade extrusion is re-centred on its own box, spanning x in [-2, 110]·s
        Shape::Compound {
            parts: vec![
                Part::new(blade, Pose::from_translation(Vector3::new(54.0 * s, 0.0, 0.0))),
                Part::new(grip, Pose::from_translation(Vector3::new(-50.0 * s, 0.0, 0.0))),
            ],
        }
    }

    /// Lidded mug: closed solid of revolution with a block handle.
    pub fn travel_mug(radius: f64, height: f64) -> Shape {
        let body = revolution(vec![
            [0.0, 0.0],
            [radius - 4.0, 0.0],
            [radius, 4.0],
            [radius, height - 4.0],
            [radius - 4.0, height],
            [0.0, height],
        ]);
        with_handle(body, radius, height)
    }

    /// Cup with a block handle on the +x side.
    pub fn mug(radius: f64, height: f64) -> Shape {
        with_handle(Shape::cup(radius, height), radius, height)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        match self {
            Shape::ChamferedBox { size, chamfer } => chamfered_box(*size, *chamfer),
            Shape::Revolution { profile, segments } => revolve(profile, *segments),
            Shape::Extrusion { outline, thickness } => extrude(outline, *thickness),
            Shape::Compound { parts } => compound(parts),
        }
    }
}

fn revolution(profile: Vec<[f64; 2]>) -> Shape {
    Shape::Revolution { profile, segments: 64 }
}

fn with_handle(body: Shape, radius: f64, height: f64) -> Shape {
    let handle = Shape::box_with_chamfer([24.0, 12.0, 0.6 * height], 2.0);
    Shape::Compound {
        parts: vec![
            Part::new(body, Pose::identity()),
            Part::new(
                handle,
                Pose::from_translation(Vector3::new(radius + 10.0, 0.0, 0.05 * height)),
            ),
        ],
    }
}

fn compound(parts: &[Part]) -> Result<Mesh> {
    if parts.is_empty() {
        return Err(Error::invalid("compound shape has no parts"));
    }
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for part in parts {
        let m = part.shape.mesh()?;
        let base = vertices.len();
        vertices.extend(m.vertices().iter().map(|v| part.pose.apply(v)));
        triangles.extend(m.triangles().iter().map(|t| t.map(|i| i + base)));
    }
    let (lo, hi) = bounds(&vertices);
    let mid = 0.5 * (lo.coords + hi.coords);
    for v in &mut vertices {
        *v -= mid;
    }
    Mesh::new(vertices, triangles)
}

fn bounds(points: &[Point3]) -> (Point3, Point3) {
    points.iter().fold(
        (Point3::from([f64::INFINITY; 3]), Point3::from([f64::NEG_INFINITY; 3])),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    )
}

fn chamfered_box(size: [f64; 3], chamfer: f64) -> Result<Mesh> {
    let [a, b, h] = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    if !(a > 0.0 && b > 0.0 && h > 0.0) || !(0.0..a.min(b).min(h)).contains(&chamfer) {
        return Err(Error::invalid(format!(
            "box size {size:?} with chamfer {chamfer} is invalid"
        )));
    }
    let signs = [-1.0, 1.0];
    let mut faces: Vec<Vec<Point3>> = Vec::new();
    if chamfer == 0.0 {
        let vertices: Vec<Point3> = (0..8)
            .map(|i| Point3::new(signs[i & 1] * a, signs[(i >> 1) & 1] * b, signs[(i >> 2) & 1] * h))
            .collect();
        // quads as vertex-index bit patterns: fixed bit `axis` set to `side`
        let mut triangles = Vec::new();
        for axis in 0..3 {
            for side in 0..2 {
                let idx: Vec<usize> = (0..8).filter(|i| (i >> axis) & 1 == side).collect();
                let pts: Vec<Point3> = idx.iter().map(|&i| vertices[i]).collect();
                let order = convex_order(&pts);
                let quad: Vec<usize> = order.iter().map(|&k| idx[k]).collect();
                triangles.push([quad[0], quad[1], quad[2]]);
                triangles.push([quad[0], quad[2], quad[3]]);
            }
        }
        return Mesh::new(vertices, triangles);
    }

    let c = chamfer;
    let px = |sx: f64, sy: f64, sz: f64| Point3::new(sx * a, sy * (b - c), sz * (h - c));
    let py = |sx: f64, sy: f64, sz: f64| Point3::new(sx * (a - c), sy * b, sz * (h - c));
    let pz = |sx: f64, sy: f64, sz: f64| Point3::new(sx * (a - c), sy * (b - c), sz * h);
    for s in signs {
        faces.push(signs.iter().flat_map(|&u| signs.map(|v| px(s, u, v))).collect());
        faces.push(signs.iter().flat_map(|&u| signs.map(|v| py(u, s, v))).collect());
        faces.push(signs.iter().flat_map(|&u| signs.map(|v| pz(u, v, s))).collect());
    }
    for s in signs {
        for t in signs {
            faces.push(signs.iter().flat_map(|&v| [px(s, t, v), py(s, t, v)]).collect());
            faces.push(signs.iter().flat_map(|&v| [px(s, v, t), pz(s, v, t)]).collect());
            faces.push(signs.iter().flat_map(|&v| [py(v, s, t), pz(v, s, t)]).collect());
            for u in signs {
                faces.push(vec![px(s, t, u), py(s, t, u), pz(s, t, u)]);
            }
        }
    }
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for face in faces {
        let order = convex_order(&face);
        let base = vertices.len();
        vertices.extend(order.iter().map(|&k| face[k]));
        for k in 1..order.len() - 1 {
            triangles.push([base, base + k, base + k + 1]);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Angular order of a planar convex polygon's corners, counter-clockwise
/// seen from outside (the polygon's centroid points away from the origin).
fn convex_order(points: &[Point3]) -> Vec<usize> {
    let c = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / points.len() as f64;
    let n = c.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let mut order: Vec<usize> = (0..points.len()).collect();
    let angle = |i: usize| {
        let d = points[i].coords - c;
        d.dot(&v).atan2(d.dot(&u))
    };
    order.sort_by(|&i, &j| angle(i).total_cmp(&angle(j)));
    order
}

fn revolve(profile: &[[f64; 2]], segments: usize) -> Result<Mesh> {
    if profile.len() < 2 || segments < 3 {
        return Err(Error::invalid("revolution needs ≥ 2 profile points and ≥ 3 segments"));
    }
    let (zmin, zmax) = profile.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p[1]), hi.max(p[1]))
    });
    let zmid = 0.5 * (zmin + zmax);
    let mut vertices = Vec::with_capacity(profile.len() * segments);
    for p in profile {
        for j in 0..segments {
            let a = std::f64::consts::TAU * j as f64 / segments as f64;
            vertices.push(Point3::new(p[0] * a.cos(), p[0] * a.sin(), p[1] - zmid));
        }
    }
    let mut triangles = Vec::new();
    for k in 0..profile.len() - 1 {
        for j in 0..segments {
            let jn = (j + 1) % segments;
            let (a, b) = (k * segments + j, k * segments + jn);
            let (c, d) = ((k + 1) * segments + jn, (k + 1) * segments + j);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::new(vertices, triangles)
}

fn extrude(outline: &[[f64; 2]], thickness: f64) -> Result<Mesh> {
    if outline.len() < 3 || thickness.is_nan() || thickness <= 0.0 {
        return Err(Error::invalid(
            "extrusion needs ≥ 3 outline points and positive thickness",
        ));
    }
    let n = outline.len();
    let (lo, hi) = outline
        .iter()
        .fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        });
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = thickness / 2.0;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for z in [-half, half] {
        vertices.extend(outline.iter().map(|p| Point3::new(p[0] - mid[0], p[1] - mid[1], z)));
    }
    let cx = outline.iter().map(|p| p[0]).sum::<f64>() / n as f64 - mid[0];
    let cy = outline.iter().map(|p| p[1]).sum::<f64>() / n as f64 - mid[1];
    let (bottom, top) = (2 * n, 2 * n + 1);
    vertices.push(Point3::new(cx, cy, -half));
    vertices.push(Point3::new(cx, cy, half));
    let mut triangles = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
        triangles.push([bottom, j, i]);
        triangles.push([top, n + i, n + j]);
    }
    Mesh::new(vertices, triangles)
}
