//! Exact nearest-neighbor search under the Euclidean norm.
//!
//! Neighbors are ranked by `(squared distance, id)`, so equidistant
//! candidates resolve to the smallest unit id regardless of the search
//! strategy. The k-d tree only prunes subtrees that are strictly farther
//! than the current best, which keeps it exact under that ordering.

use crate::population::Covariates;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Result of a query: position in the indexed point set and its squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub id: u64,
    pub distance2: f64,
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Covariates,
    ids: Vec<u64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn distance2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn better(candidate: (f64, u64), best: (f64, u64)) -> bool {
    candidate.0 < best.0 || (candidate.0 == best.0 && candidate.1 < best.1)
}

impl NeighborIndex {
    /// Builds a k-d tree over the rows of `points`.
    pub fn build(points: Covariates, ids: Vec<u64>) -> Self {
        assert_eq!(points.nrows(), ids.len(), "one id per point");
        let mut index = Self {
            order: (0..ids.len()).collect(),
            points,
            ids,
            nodes: Vec::new(),
        };
        if !index.ids.is_empty() {
            index.build_node(0, index.ids.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE || self.points.ncols() == 0 {
            return slot;
        }
        let p = self.points.ncols();
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..p {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.points.row(i)[a];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest <= 0.0 {
            return slot;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points.row(i)[axis].total_cmp(&points.row(j)[axis])
        });
        let value = self.points.row(self.order[mid])[axis];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[slot] = Node::Split { axis, value, left, right };
        slot
    }

    /// Exact nearest neighbor using the tree.
    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        if self.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u64::MAX, usize::MAX);
        self.search(0, query, &mut best);
        Some(Neighbor {
            index: best.2,
            id: best.1,
            distance2: best.0,
        })
    }

    fn search(&self, node: usize, query: &[f64], best: &mut (f64, u64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = distance2(self.points.row(i), query);
                    if better((d2, self.ids[i]), (best.0, best.1)) {
                        *best = (d2, self.ids[i], i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                // Points on the far side are at least |diff| away along `axis`.
                if diff * diff <= best.0 {
                    self.search(far, query, best);
                }
            }
        }
    }

    /// Exact nearest neighbor by linear scan; the reference for [`nearest`](Self::nearest).
    pub fn nearest_brute_force(&self, query: &[f64]) -> Option<Neighbor> {
        let mut best: Option<Neighbor> = None;
        for (i, row) in self.points.rows().enumerate() {
            let d2 = distance2(row, query);
            if best.is_none_or(|b| better((d2, self.ids[i]), (b.distance2, b.id))) {
                best = Some(Neighbor {
                    index: i,
                    id: self.ids[i],
                    distance2: d2,
                });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // coarse grid values force many exact ties
        let rows: Vec<[f64; 2]> = (0..2000)
            .map(|_| [rng.random_range(0..20) as f64, rng.random_range(0..20) as f64 * 0.5])
            .collect();
        let ids: Vec<u64> = (0..rows.len() as u64).map(|i| (i * 7919) % 10007).collect();
        let index = NeighborIndex::build(Covariates::from_rows(&rows).unwrap(), ids);
        for _ in 0..500 {
            let q = [rng.random_range(-2.0..22.0), rng.random_range(-2.0..12.0)];
            assert_eq!(index.nearest(&q), index.nearest_brute_force(&q));
        }
        for r in rows.iter().take(100) {
            assert_eq!(index.nearest(r), index.nearest_brute_force(r));
        }
    }

    #[test]
    fn tie_goes_to_smallest_id() {
        let pts = Covariates::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let index = NeighborIndex::build(pts, vec![7, 3]);
        assert_eq!(index.nearest(&[0.0, 0.0]).unwrap().id, 3);
    }
}
