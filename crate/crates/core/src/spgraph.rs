//! Superpoint graph construction by exact k-nearest-neighbor linking of
//! centroids, symmetrized by union.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone)]
pub struct SuperpointGraph {
    pub num_nodes: usize,
    /// Sorted neighbor ids per node; symmetric, no self-loops.
    pub neighbor_lists: Vec<Vec<usize>>,
    pub edge_count: usize,
}

impl SuperpointGraph {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbor_lists[i]
    }

    /// Adjacency test, the sparse matrix M.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbor_lists[i].binary_search(&j).is_ok()
    }

    /// Undirected edges as (i, j) with i < j, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (i, ns) in self.neighbor_lists.iter().enumerate() {
            for &j in ns {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn dump_edge_list(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Exact k-NN per node via a uniform grid over the centroids, directed
/// edges symmetrized by union. Distance ties break toward the lower node
/// id. `k >= |V|` is clamped to `|V| - 1`.
pub fn build_graph(centroids: &[Vec3], k: usize) -> Result<SuperpointGraph> {
    let n = centroids.len();
    if n == 0 {
        return Err(Error::Domain("graph over zero superpoints".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let k = if k >= n {
        if n > 1 {
            log::warn!("k = {k} >= |V| = {n}; clamping to {}", n - 1);
        }
        n - 1
    } else {
        k
    };
    if k == 0 {
        return Ok(SuperpointGraph {
            num_nodes: 1,
            neighbor_lists: vec![Vec::new()],
            edge_count: 0,
        });
    }

    let index = GridIndex::build(centroids);
    let mut neighbor_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in index.knn(centroids, i, k) {
            insert_sorted(&mut neighbor_lists[i], j);
            insert_sorted(&mut neighbor_lists[j], i);
        }
    }
    let edge_count = neighbor_lists.iter().map(Vec::len).sum::<usize>() / 2;
    Ok(SuperpointGraph {
        num_nodes: n,
        neighbor_lists,
        edge_count,
    })
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

struct GridIndex {
    cell_size: f64,
    origin: Vec3,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl GridIndex {
    fn build(points: &[Vec3]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0_f64, f64::max);
        let cells_per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell_size = (extent / cells_per_axis).max(1e-9);
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            cells.entry(Self::cell_of(p, lo, cell_size)).or_default().push(i);
        }
        GridIndex {
            cell_size,
            origin: lo,
            cells,
        }
    }

    fn cell_of(p: Vec3, origin: Vec3, s: f64) -> [i64; 3] {
        [
            ((p[0] - origin[0]) / s).floor() as i64,
            ((p[1] - origin[1]) / s).floor() as i64,
            ((p[2] - origin[2]) / s).floor() as i64,
        ]
    }

    /// Exact k nearest neighbors of node `q` (excluding itself), ties by
    /// lower id. Expands rings of cells until the k-th candidate distance
    /// is certified by the searched radius.
    fn knn(&self, points: &[Vec3], q: usize, k: usize) -> Vec<usize> {
        let center = Self::cell_of(points[q], self.origin, self.cell_size);
        let mut best: Vec<(f64, usize)> = Vec::new(); // (dist_sq, id), sorted
        let mut ring = 0i64;
        loop {
            let mut any_cell = false;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue; // shell only
                        }
                        let cell = [center[0] + dx, center[1] + dy, center[2] + dz];
                        if let Some(pts) = self.cells.get(&cell) {
                            any_cell = true;
                            for &j in pts {
                                if j == q {
                                    continue;
                                }
                                let d = geom::dist_sq(points[q], points[j]);
                                let entry = (d, j);
                                let pos = best
                                    .binary_search_by(|e| {
                                        e.0.partial_cmp(&d)
                                            .unwrap()
                                            .then(e.1.cmp(&j))
                                    })
                                    .unwrap_or_else(|p| p);
                                best.insert(pos, entry);
                                if best.len() > k {
                                    best.pop();
                                }
                            }
                        }
                    }
                }
            }
            // all points within `ring * cell_size` of q are now enumerated
            let certified = ring as f64 * self.cell_size;
            if best.len() == k && best[k - 1].0.sqrt() <= certified {
                break;
            }
            // ran past the whole grid
            if !any_cell && ring > 1 {
                let span = (points.len() as f64).cbrt().ceil() as i64 + 2;
                if ring > span {
                    break;
                }
            }
            ring += 1;
        }
        best.into_iter().map(|(_, j)| j).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_knn(points: &[Vec3], q: usize, k: usize) -> Vec<usize> {
        let mut others: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != q)
            .map(|j| (geom::dist_sq(points[q], points[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        others.into_iter().take(k).map(|(_, j)| j).collect()
    }

    #[test]
    fn two_nodes_single_edge() {
        let g = build_graph(&[[0.0; 3], [1.0, 0.0, 0.0]], 1).unwrap();
        assert_eq!(g.edge_count, 1);
        assert!(g.adjacent(0, 1) && g.adjacent(1, 0));
        assert!(!g.adjacent(0, 0));
    }

    #[test]
    fn collinear_equidistant_symmetrization() {
        // ends pick the middle (tie to lower id for node 2's choice between 1 and itself)
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let g = build_graph(&pts, 1).unwrap();
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn singleton_graph_no_edges() {
        let g = build_graph(&[[0.5; 3]], 3).unwrap();
        assert_eq!(g.edge_count, 0);
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn tie_breaks_to_lower_id() {
        // node 0 equidistant from 1 and 2; k=1 must pick node 1
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
        let g = build_graph(&pts, 1).unwrap();
        assert!(g.adjacent(0, 1));
        // 2 also chose 0, so 0-2 exists by union; directed choice still went to 1
        assert!(g.adjacent(2, 0));
    }

    #[test]
    fn grid_knn_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vec3> = (0..300)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let index = GridIndex::build(&points);
        for k in [1usize, 3, 5, 8] {
            for q in (0..points.len()).step_by(17) {
                assert_eq!(index.knn(&points, q, k), brute_knn(&points, q, k));
            }
        }
    }

    #[test]
    fn min_degree_and_symmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Vec3> = (0..80)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let k = 4;
        let g = build_graph(&points, k).unwrap();
        for i in 0..g.num_nodes {
            assert!(g.neighbors(i).len() >= k);
            for &j in g.neighbors(i) {
                assert_ne!(i, j);
                assert!(g.adjacent(j, i));
            }
        }
    }

    #[test]
    fn k_clamped_when_too_large() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let g = build_graph(&pts, 10).unwrap();
        // fully connected after clamping to |V|-1 = 2
        assert_eq!(g.edge_count, 3);
    }

    #[test]
    fn permutation_invariance_after_relabel() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec3> = (0..40)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let g1 = build_graph(&points, 3).unwrap();
        let perm: Vec<usize> = (0..points.len()).rev().collect();
        let permuted: Vec<Vec3> = perm.iter().map(|&p| points[p]).collect();
        let g2 = build_graph(&permuted, 3).unwrap();
        let mut edges2: Vec<(usize, usize)> = g2
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (perm[a], perm[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges2.sort();
        assert_eq!(g1.edges(), edges2);
    }
}
