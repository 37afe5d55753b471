use crate::geom::Point3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree for exact nearest-neighbour queries.
///
/// Points are reordered into a flat array; each internal node splits its
/// slice at the median along the axis of widest spread.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point3>,
    /// original index of each entry of `points`
    index: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build_node(points, &mut order, 0, &mut nodes);
        }
        KdTree {
            points: order.iter().map(|&i| points[i]).collect(),
            index: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Original index of the nearest point and its squared distance.
    /// Ties go to the lowest original index.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Point3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d = (self.points[k] - q).norm_squared();
                    let idx = self.index[k];
                    if d < best.1 || (d == best.1 && idx < best.0) {
                        *best = (idx, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build_node(points: &[Point3], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_slice, right_slice) = order.split_at_mut(mid);
    let left = build_node(points, left_slice, offset, nodes);
    let right = build_node(points, right_slice, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RngStream;

    fn linear_scan(points: &[Point3], q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = RngStream::new(77);
        let points: Vec<Point3> = (0..10_000)
            .map(|_| {
                Point3::new(
                    rng.uniform(-50.0, 50.0),
                    rng.uniform(-50.0, 50.0),
                    rng.gaussian() * 10.0,
                )
            })
            .collect();
        let tree = KdTree::build(&points);
        assert_eq!(tree.len(), points.len());
        for _ in 0..1_000 {
            let q = Point3::from(rng.gaussian_vector(60.0));
            let (i, d) = tree.nearest(&q).unwrap();
            let (j, e) = linear_scan(&points, &q);
            assert_eq!(d, e);
            assert_eq!(i, j);
        }
    }

    #[test]
    fn duplicates_and_small_sets() {
        let p = Point3::new(1.0, 1.0, 1.0);
        let tree = KdTree::build(&[p; 20]);
        assert_eq!(tree.nearest(&Point3::origin()).unwrap().0, 0);
        assert!(KdTree::build(&[]).nearest(&p).is_none());
        let tree = KdTree::build(&[Point3::origin()]);
        assert_eq!(tree.nearest(&p).unwrap(), (0, 3.0));
    }
}
