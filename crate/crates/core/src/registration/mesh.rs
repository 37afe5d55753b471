use crate::error::{Error, Result};
use crate::geom::{Point3, RngStream, Vector3};

/// Triangles at or below this area (mm²) are dropped on construction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Triangle mesh in millimetres.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    samples: Option<Vec<Point3>>,
    dropped: usize,
}

impl Mesh {
    /// Validates indices and drops degenerate triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("mesh vertex {p} is not finite")));
        }
        for (i, t) in triangles.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "triangle {i} references vertex {bad}, mesh has {} vertices",
                    vertices.len()
                )));
            }
        }
        let before = triangles.len();
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) > MIN_TRIANGLE_AREA)
            .collect();
        if triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles with positive area".to_string()));
        }
        let dropped = before - triangles.len();
        Ok(Mesh {
            vertices,
            triangles,
            samples: None,
            dropped,
        })
    }

    pub fn with_samples(mut self, samples: Vec<Point3>) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn samples(&self) -> Option<&[Point3]> {
        self.samples.as_deref()
    }

    /// Number of degenerate triangles removed at construction.
    pub fn dropped_triangles(&self) -> usize {
        self.dropped
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let t = self.triangles[i];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Axis-aligned bounds of the referenced vertices.
    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in &self.triangles {
            for &v in t {
                let p = self.vertices[v];
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Area-uniform random points on the mesh surface.
pub fn sample_surface(m: &Mesh, count: usize, rng: &mut RngStream) -> Vec<Point3> {
    let mut cumulative = Vec::with_capacity(m.triangles.len());
    let mut total = 0.0;
    for i in 0..m.triangles.len() {
        let [a, b, c] = m.triangle(i);
        total += triangle_area(&a, &b, &c);
        cumulative.push(total);
    }
    (0..count)
        .map(|_| {
            let target = rng.uniform01() * total;
            let i = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = m.triangle(i);
            let r1 = rng.uniform01().sqrt();
            let r2 = rng.uniform01();
            let p: Vector3 = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
            Point3::from(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::shapes::Shape;

    fn unit_cube() -> Mesh {
        Shape::ChamferedBox {
            size: [1.0, 1.0, 1.0],
            chamfer: 0.0,
        }
        .mesh()
        .unwrap()
    }

    #[test]
    fn cube_face_fractions() {
        let cube = unit_cube();
        let mut rng = RngStream::new(9);
        let samples = sample_surface(&cube, 60_000, &mut rng);
        assert_eq!(samples.len(), 60_000);
        // a point on the unit cube surface lies on the face of its largest |coordinate|
        let mut counts = [0usize; 6];
        for p in &samples {
            let (axis, v) = (0..3)
                .map(|k| (k, p[k]))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap();
            counts[2 * axis + usize::from(v > 0.0)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn single_triangle_samples_are_inside() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(4.0, 1.0, 0.5);
        let c = Point3::new(1.0, 3.0, -1.0);
        let m = Mesh::new(vec![a, b, c], vec![[0, 1, 2]]).unwrap();
        let mut rng = RngStream::new(1);
        let n = (b - a).cross(&(c - a));
        for p in sample_surface(&m, 5_000, &mut rng) {
            // barycentric coordinates by sub-triangle areas
            let w = |u: &Point3, v: &Point3| (u - p).cross(&(v - p)).dot(&n) / n.norm_squared();
            let (wa, wb, wc) = (w(&b, &c), w(&c, &a), w(&a, &b));
            assert!(wa >= -1e-12 && wb >= -1e-12 && wc >= -1e-12);
            assert!((wa + wb + wc - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_mesh_rejected() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        assert!(Mesh::new(v.clone(), vec![[0, 1, 2]]).is_err());
        assert!(Mesh::new(v.clone(), vec![]).is_err());
        assert!(Mesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = Mesh::new(v, vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.dropped_triangles(), 1);
        assert!((m.area() - 0.5).abs() < 1e-15);
    }
}
