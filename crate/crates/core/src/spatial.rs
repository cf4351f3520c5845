//! Point index for neighbor queries in 3D.

use rstar::primitives::GeomWithData;
use rstar::RTree;

type Entry = GeomWithData<[f64; 3], usize>;

pub(crate) struct PointIndex {
    tree: RTree<Entry>,
}

impl PointIndex {
    pub(crate) fn new(points: &[[f64; 3]]) -> Self {
        let entries = points.iter().enumerate().map(|(i, p)| Entry::new(*p, i)).collect();
        PointIndex { tree: RTree::bulk_load(entries) }
    }

    /// Distances to the `k` nearest indexed points, ascending.
    pub(crate) fn nearest_distances(&self, p: &[f64; 3], k: usize) -> Vec<f64> {
        self.tree.nearest_neighbor_iter_with_distance_2(p).take(k).map(|(_, d2)| d2.sqrt()).collect()
    }

    /// Indices of points with squared distance `≤ r2`, ascending.
    pub(crate) fn within(&self, p: &[f64; 3], r2: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self.tree.locate_within_distance(*p, r2).map(|e| e.data).collect();
        out.sort_unstable();
        out
    }
}
