//! Bounding-volume hierarchy over scene triangles, built with binned
//! surface-area splits.

use crate::num::Real;

use super::scene::{Aabb, Triangle};
use super::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
enum Node<T> {
    Leaf {
        bounds: Aabb<T>,
        start: usize,
        count: usize,
    },
    Inner {
        bounds: Aabb<T>,
        left: usize,
        right: usize,
    },
}

impl<T: Real> Node<T> {
    fn bounds(&self) -> &Aabb<T> {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    /// Triangle indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

impl<T: Real> Bvh<T> {
    pub fn build(triangles: &[Triangle<T>]) -> Self {
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let centroids: Vec<Vec3<T>> = triangles.iter().map(Triangle::centroid).collect();
        let bounds: Vec<Aabb<T>> = triangles
            .iter()
            .map(|t| t.bounds().padded(T::ray_epsilon()))
            .collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(
                &mut nodes,
                &mut order,
                0,
                triangles.len(),
                0,
                &centroids,
                &bounds,
            );
        }
        Bvh { nodes, order }
    }

    /// Nearest hit `(triangle_index, t)` with `t > t_min`. Ties on `t` resolve
    /// to the lowest triangle index so results match a linear scan.
    pub fn nearest(
        &self,
        triangles: &[Triangle<T>],
        origin: Vec3<T>,
        dir: Vec3<T>,
        t_min: T,
    ) -> Option<(usize, T)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(T::one() / dir.x, T::one() / dir.y, T::one() / dir.z);
        let mut best: Option<(usize, T)> = None;
        let mut best_t = T::infinity();
        // (node, entry distance). Tree depth stays below 64; see SAH_MAX_DEPTH.
        let mut stack = [(0usize, T::zero()); 64];
        let mut top = 0;
        if self.nodes[0]
            .bounds()
            .ray_entry(origin, inv, best_t)
            .is_some()
        {
            top = 1;
        }
        while top > 0 {
            top -= 1;
            let (ni, entry) = stack[top];
            if entry > best_t {
                continue;
            }
            match self.nodes[ni] {
                Node::Leaf { start, count, .. } => {
                    for &ti in &self.order[start..start + count] {
                        if let Some(t) = triangles[ti].intersect(origin, dir) {
                            if t > t_min {
                                let better = match best {
                                    None => true,
                                    Some((bi, bt)) => t < bt || (t == bt && ti < bi),
                                };
                                if better {
                                    best = Some((ti, t));
                                    best_t = t;
                                }
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let el = self.nodes[left].bounds().ray_entry(origin, inv, best_t);
                    let er = self.nodes[right].bounds().ray_entry(origin, inv, best_t);
                    // Push the farther child first so the nearer is visited first.
                    match (el, er) {
                        (Some(a), Some(b)) => {
                            let (near, far) = if a <= b {
                                ((left, a), (right, b))
                            } else {
                                ((right, b), (left, a))
                            };
                            stack[top] = far;
                            stack[top + 1] = near;
                            top += 2;
                        }
                        (Some(a), None) => {
                            stack[top] = (left, a);
                            top += 1;
                        }
                        (None, Some(b)) => {
                            stack[top] = (right, b);
                            top += 1;
                        }
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

fn build_node<T: Real>(
    nodes: &mut Vec<Node<T>>,
    order: &mut [usize],
    start: usize,
    end: usize,
    depth: usize,
    centroids: &[Vec3<T>],
    bounds: &[Aabb<T>],
) -> usize {
    let mut b = Aabb::empty();
    let mut cb = Aabb::empty();
    for &i in &order[start..end] {
        b = b.union(bounds[i]);
        cb.grow(centroids[i]);
    }
    let index = nodes.len();
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds: b,
            start,
            count,
        });
        return index;
    }
    // Past SAH_MAX_DEPTH only balanced splits are made, which bounds the
    // traversal stack.
    let sah = (depth < SAH_MAX_DEPTH)
        .then(|| sah_split(&order[start..end], centroids, bounds, &cb))
        .flatten()
        .and_then(|(axis, pivot)| {
            let slice = &mut order[start..end];
            slice.sort_by(|&a, &c| {
                let ka = centroids[a][axis] >= pivot;
                let kc = centroids[c][axis] >= pivot;
                ka.cmp(&kc).then(a.cmp(&c))
            });
            let m = start
                + slice
                    .iter()
                    .take_while(|&&i| centroids[i][axis] < pivot)
                    .count();
            (m > start && m < end).then_some(m)
        });
    let Some(mid) =
        sah.or_else(|| median_split(&mut order[start..end], centroids, &cb).map(|m| start + m))
    else {
        nodes.push(Node::Leaf {
            bounds: b,
            start,
            count,
        });
        return index;
    };
    nodes.push(Node::Leaf {
        bounds: b,
        start,
        count,
    });
    let left = build_node(nodes, order, start, mid, depth + 1, centroids, bounds);
    let right = build_node(nodes, order, mid, end, depth + 1, centroids, bounds);
    nodes[index] = Node::Inner {
        bounds: b,
        left,
        right,
    };
    index
}

const SAH_BINS: usize = 16;
const SAH_MAX_DEPTH: usize = 32;

fn half_area<T: Real>(b: &Aabb<T>) -> T {
    let e = b.extent();
    if e.x < T::zero() {
        return T::zero();
    }
    e.x * e.y + e.y * e.z + e.z * e.x
}

/// Binned surface-area split: `(axis, pivot)` sending centroids below the
/// pivot left. `None` when no bin boundary separates the set.
fn sah_split<T: Real>(
    items: &[usize],
    centroids: &[Vec3<T>],
    bounds: &[Aabb<T>],
    cb: &Aabb<T>,
) -> Option<(usize, T)> {
    let ext = cb.extent();
    let mut best: Option<(T, usize, T)> = None;
    for axis in 0..3 {
        if !(ext[axis] > T::zero()) {
            continue;
        }
        let scale = T::lit(SAH_BINS as f64) / ext[axis];
        let bin_of = |i: usize| {
            ((centroids[i][axis] - cb.min[axis]) * scale)
                .to_usize()
                .unwrap_or(0)
                .min(SAH_BINS - 1)
        };
        let mut bin_bounds = [Aabb::empty(); SAH_BINS];
        let mut bin_count = [0usize; SAH_BINS];
        for &i in items {
            let k = bin_of(i);
            bin_bounds[k] = bin_bounds[k].union(bounds[i]);
            bin_count[k] += 1;
        }
        let mut right_area = [T::zero(); SAH_BINS];
        let mut acc = Aabb::empty();
        for k in (1..SAH_BINS).rev() {
            acc = acc.union(bin_bounds[k]);
            right_area[k] = half_area(&acc);
        }
        let mut left = Aabb::empty();
        let mut n_left = 0;
        for k in 1..SAH_BINS {
            left = left.union(bin_bounds[k - 1]);
            n_left += bin_count[k - 1];
            let n_right = items.len() - n_left;
            if n_left == 0 || n_right == 0 {
                continue;
            }
            let cost =
                half_area(&left) * T::lit(n_left as f64) + right_area[k] * T::lit(n_right as f64);
            if best.map_or(true, |(c, _, _)| cost < c) {
                best = Some((cost, axis, cb.min[axis] + T::lit(k as f64) / scale));
            }
        }
    }
    best.map(|(_, axis, pivot)| (axis, pivot))
}

/// Sorts along the widest centroid axis and splits in half; `None` when all
/// centroids coincide.
fn median_split<T: Real>(
    items: &mut [usize],
    centroids: &[Vec3<T>],
    cb: &Aabb<T>,
) -> Option<usize> {
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if !(ext[axis] > T::zero()) {
        return None;
    }
    items.sort_by(|&a, &c| {
        centroids[a][axis]
            .partial_cmp(&centroids[c][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&c))
    });
    Some(items.len() / 2)
}
