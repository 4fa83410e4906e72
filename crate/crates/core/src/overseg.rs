//! Oversegmentation into superpoints and lifting of point-level weak labels.
//!
//! The partitioner is voxel-grid-seeded region growing: points are visited
//! in a canonical spatial order, regions grow across the 26-neighborhood
//! voxel adjacency while normal and color homogeneity hold, and oversized
//! regions are split into near-equal chunks. Precomputed assignments from
//! other partitioners load through [`load_superpointization`].

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::pcio::{self, PointCloud};
use crate::synth::WeakAnnotation;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct OversegParams {
    pub target_superpoint_size: usize,
    pub normal_angle_max_deg: f64,
    pub color_dist_max: f64,
    pub grid_size: f64,
}

impl Default for OversegParams {
    fn default() -> Self {
        OversegParams {
            target_superpoint_size: 30,
            normal_angle_max_deg: 30.0,
            color_dist_max: 0.2,
            grid_size: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Superpointization {
    pub assignment: Vec<usize>,
    pub num_superpoints: usize,
    pub centroids: Vec<Vec3>,
    pub mean_colors: Option<Vec<Vec3>>,
    pub mean_normals: Option<Vec<Vec3>>,
    pub member_lists: Vec<Vec<usize>>,
}

impl Superpointization {
    pub fn from_assignment(assignment: Vec<usize>, cloud: &PointCloud) -> Result<Self> {
        if assignment.len() != cloud.len() {
            return Err(Error::Validation(format!(
                "assignment length {} does not match point count {}",
                assignment.len(),
                cloud.len()
            )));
        }
        let num = match assignment.iter().max() {
            Some(&m) => m + 1,
            None => return Err(Error::Validation("empty assignment".into())),
        };
        let mut member_lists = vec![Vec::new(); num];
        for (p, &s) in assignment.iter().enumerate() {
            member_lists[s].push(p);
        }
        for (s, members) in member_lists.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Validation(format!("superpoint {s} is empty")));
            }
        }
        let centroids: Vec<Vec3> = member_lists
            .iter()
            .map(|m| geom::mean_of(m, &cloud.positions))
            .collect();
        let mean_colors = cloud.colors.as_ref().map(|colors| {
            member_lists
                .iter()
                .map(|m| geom::mean_of(m, colors))
                .collect()
        });
        let mean_normals = cloud.normals.as_ref().map(|normals| {
            member_lists
                .iter()
                .map(|m| geom::mean_of(m, normals))
                .collect()
        });
        Ok(Superpointization {
            assignment,
            num_superpoints: num,
            centroids,
            mean_colors,
            mean_normals,
            member_lists,
        })
    }

    /// Superpoint id sets as a canonical partition (each block sorted, blocks
    /// ordered by smallest member). Used to compare partitions irrespective
    /// of id labeling.
    pub fn canonical_partition(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = self
            .member_lists
            .iter()
            .map(|m| {
                let mut b = m.clone();
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort();
        blocks
    }
}

/// Deterministic region-growing partition. Points are processed in
/// lexicographic position order so the result is independent of input
/// point order (up to relabeling) when positions are distinct.
pub fn oversegment(cloud: &PointCloud, params: &OversegParams) -> Result<Superpointization> {
    if cloud.is_empty() {
        return Err(Error::Domain("cannot oversegment an empty cloud".into()));
    }
    if params.grid_size <= 0.0 || params.target_superpoint_size == 0 {
        return Err(Error::Validation(
            "grid_size and target_superpoint_size must be positive".into(),
        ));
    }
    let n = cloud.len();

    // canonical visiting order: lexicographic by position, original index last
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let pa = cloud.positions[a];
        let pb = cloud.positions[b];
        pa.partial_cmp(&pb).unwrap().then(a.cmp(&b))
    });
    let mut rank = vec![0usize; n];
    for (r, &p) in order.iter().enumerate() {
        rank[p] = r;
    }

    let origin = {
        let mut m = cloud.positions[0];
        for p in &cloud.positions {
            for a in 0..3 {
                m[a] = m[a].min(p[a]);
            }
        }
        m
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for &p in &order {
        cells
            .entry(pcio::voxel_index(cloud.positions[p], origin, params.grid_size))
            .or_default()
            .push(p); // canonical order within each cell
    }

    let compatible = |seed: usize, cand: usize| -> bool {
        if let Some(normals) = &cloud.normals {
            if geom::angle_deg(normals[seed], normals[cand]) > params.normal_angle_max_deg {
                return false;
            }
        }
        if let Some(colors) = &cloud.colors {
            if geom::dist(colors[seed], colors[cand]) > params.color_dist_max {
                return false;
            }
        }
        true
    };

    let mut visited = vec![false; n];
    let mut assignment = vec![usize::MAX; n];
    let mut next_id = 0usize;
    for &seed in &order {
        if visited[seed] {
            continue;
        }
        // BFS over voxel 26-neighborhood (plus own cell)
        let mut region: Vec<usize> = Vec::new();
        let mut queue = VecDeque::new();
        visited[seed] = true;
        queue.push_back(seed);
        region.push(seed);
        while let Some(p) = queue.pop_front() {
            let cell = pcio::voxel_index(cloud.positions[p], origin, params.grid_size);
            let mut candidates: Vec<usize> = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(pts) =
                            cells.get(&[cell[0] + dx, cell[1] + dy, cell[2] + dz])
                        {
                            for &q in pts {
                                if !visited[q] && compatible(seed, q) {
                                    candidates.push(q);
                                }
                            }
                        }
                    }
                }
            }
            candidates.sort_by_key(|&q| rank[q]);
            for q in candidates {
                if !visited[q] {
                    visited[q] = true;
                    queue.push_back(q);
                    region.push(q);
                }
            }
        }
        // split oversized regions into near-equal chunks in discovery order
        let chunks = region.len().div_ceil(params.target_superpoint_size);
        let base = region.len() / chunks;
        let rem = region.len() % chunks;
        let mut pos = 0usize;
        for c in 0..chunks {
            let size = base + usize::from(c < rem);
            for &p in &region[pos..pos + size] {
                assignment[p] = next_id;
            }
            pos += size;
            next_id += 1;
        }
    }
    Superpointization::from_assignment(assignment, cloud)
}

/// Reads one superpoint id per line (line i = point i) and validates
/// against the cloud; centroids and mean features are recomputed.
pub fn load_superpointization(path: &Path, cloud: &PointCloud) -> Result<Superpointization> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut assignment = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let id: usize = line
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad superpoint id `{line}`")))?;
        assignment.push(id);
    }
    Superpointization::from_assignment(assignment, cloud)
}

pub fn save_superpointization(path: &Path, sp: &Superpointization) -> Result<()> {
    let mut s = String::new();
    for &id in &sp.assignment {
        let _ = writeln!(s, "{id}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SuperpointWeakLabels {
    pub instance_label: Vec<Option<i32>>,
    pub semantic_label: Vec<Option<i32>>,
    pub annotated_mask: Vec<bool>,
}

/// Extends each clicked point's labels to its containing superpoint.
/// Two clicks of different instances in one superpoint are a conflict.
pub fn lift_labels(sp: &Superpointization, ann: &WeakAnnotation) -> Result<SuperpointWeakLabels> {
    let num = sp.num_superpoints;
    let mut instance_label = vec![None; num];
    let mut semantic_label = vec![None; num];
    let mut annotated_mask = vec![false; num];
    for click in &ann.entries {
        if click.point_index >= sp.assignment.len() {
            return Err(Error::Validation(format!(
                "click point index {} out of range",
                click.point_index
            )));
        }
        let s = sp.assignment[click.point_index];
        match instance_label[s] {
            Some(existing) if existing != click.instance_id => {
                return Err(Error::ClickConflict {
                    superpoint: s,
                    first: existing,
                    second: click.instance_id,
                });
            }
            _ => {
                instance_label[s] = Some(click.instance_id);
                semantic_label[s] = Some(click.semantic_class);
                annotated_mask[s] = true;
            }
        }
    }
    Ok(SuperpointWeakLabels {
        instance_label,
        semantic_label,
        annotated_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, SceneSpec, ShapeKind, WeakClick};
    use tempfile::tempdir;

    #[test]
    fn single_point_single_superpoint() {
        let cloud = PointCloud {
            positions: vec![[0.0; 3]],
            ..Default::default()
        };
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        assert_eq!(sp.num_superpoints, 1);
        assert_eq!(sp.assignment, vec![0]);
    }

    #[test]
    fn centroids_are_member_means() {
        let cloud = generate_scene(&SceneSpec::default()).unwrap();
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        for (s, members) in sp.member_lists.iter().enumerate() {
            let m = geom::mean_of(members, &cloud.positions);
            assert!(geom::dist(m, sp.centroids[s]) < 1e-6);
        }
    }

    #[test]
    fn opposite_normal_slabs_stay_separate() {
        // two coincident-in-xy slabs with opposing normals
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        for i in 0..50 {
            let x = (i % 10) as f64 * 0.02;
            let y = (i / 10) as f64 * 0.02;
            positions.push([x, y, 0.0]);
            normals.push([0.0, 0.0, 1.0]);
        }
        for i in 0..50 {
            let x = (i % 10) as f64 * 0.02;
            let y = (i / 10) as f64 * 0.02;
            positions.push([x, y, 0.05]);
            normals.push([0.0, 0.0, -1.0]);
        }
        let cloud = PointCloud {
            positions,
            normals: Some(normals),
            ..Default::default()
        };
        let params = OversegParams {
            normal_angle_max_deg: 30.0,
            target_superpoint_size: 200,
            grid_size: 0.1,
            ..Default::default()
        };
        let sp = oversegment(&cloud, &params).unwrap();
        for members in &sp.member_lists {
            let all_lower = members.iter().all(|&p| p < 50);
            let all_upper = members.iter().all(|&p| p >= 50);
            assert!(all_lower || all_upper, "superpoint spans both slabs");
        }
    }

    #[test]
    fn permutation_invariant_up_to_relabeling() {
        let cloud = generate_scene(&SceneSpec {
            num_instances: 3,
            points_per_instance: (100, 150),
            ..Default::default()
        })
        .unwrap();
        let sp1 = oversegment(&cloud, &OversegParams::default()).unwrap();

        // reverse the point order
        let n = cloud.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = PointCloud {
            positions: perm.iter().map(|&p| cloud.positions[p]).collect(),
            gt_semantic: cloud
                .gt_semantic
                .as_ref()
                .map(|v| perm.iter().map(|&p| v[p]).collect()),
            gt_instance: cloud
                .gt_instance
                .as_ref()
                .map(|v| perm.iter().map(|&p| v[p]).collect()),
            ..Default::default()
        };
        let sp2 = oversegment(&permuted, &OversegParams::default()).unwrap();

        // map sp2 blocks back to original indices and compare partitions
        let blocks2: Vec<Vec<usize>> = sp2
            .member_lists
            .iter()
            .map(|m| {
                let mut b: Vec<usize> = m.iter().map(|&q| perm[q]).collect();
                b.sort_unstable();
                b
            })
            .collect();
        let mut blocks2 = blocks2;
        blocks2.sort();
        assert_eq!(sp1.canonical_partition(), blocks2);
    }

    #[test]
    fn average_size_near_target() {
        let cloud = generate_scene(&SceneSpec {
            num_instances: 4,
            points_per_instance: (400, 400),
            ..Default::default()
        })
        .unwrap();
        let params = OversegParams {
            target_superpoint_size: 40,
            ..Default::default()
        };
        let sp = oversegment(&cloud, &params).unwrap();
        let avg = cloud.len() as f64 / sp.num_superpoints as f64;
        assert!(avg >= 10.0 && avg <= 160.0, "avg superpoint size {avg}");
    }

    #[test]
    fn purity_on_separated_scenes() {
        let cloud = generate_scene(&SceneSpec {
            num_instances: 4,
            spacing: 2.0,
            ..Default::default()
        })
        .unwrap();
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        let gt = cloud.gt_instance.as_ref().unwrap();
        for members in &sp.member_lists {
            let first = gt[members[0]];
            assert!(members.iter().all(|&p| gt[p] == first));
        }
    }

    #[test]
    fn load_round_trip_and_validation() {
        let dir = tempdir().unwrap();
        let cloud = PointCloud {
            positions: vec![[0.0; 3], [0.01, 0.0, 0.0], [5.0, 0.0, 0.0]],
            ..Default::default()
        };
        let path = dir.path().join("sp.txt");
        fs::write(&path, "0\n0\n1\n").unwrap();
        let sp = load_superpointization(&path, &cloud).unwrap();
        assert_eq!(sp.num_superpoints, 2);

        fs::write(&path, "0\n2\n2\n").unwrap();
        assert!(load_superpointization(&path, &cloud).is_err(), "id gap");

        let sp1 = oversegment(&cloud, &OversegParams::default()).unwrap();
        let out = dir.path().join("out.txt");
        save_superpointization(&out, &sp1).unwrap();
        let sp2 = load_superpointization(&out, &cloud).unwrap();
        assert_eq!(sp1.canonical_partition(), sp2.canonical_partition());
    }

    #[test]
    fn lift_single_click() {
        let cloud = generate_scene(&SceneSpec::default()).unwrap();
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        let ann = WeakAnnotation {
            entries: vec![WeakClick {
                point_index: 0,
                instance_id: 9,
                semantic_class: 2,
            }],
        };
        let labels = lift_labels(&sp, &ann).unwrap();
        let target = sp.assignment[0];
        for s in 0..sp.num_superpoints {
            if s == target {
                assert_eq!(labels.instance_label[s], Some(9));
                assert_eq!(labels.semantic_label[s], Some(2));
                assert!(labels.annotated_mask[s]);
            } else {
                assert!(labels.instance_label[s].is_none());
                assert!(!labels.annotated_mask[s]);
            }
        }
    }

    #[test]
    fn lift_zero_clicks_all_unlabeled() {
        let cloud = generate_scene(&SceneSpec::default()).unwrap();
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        let labels = lift_labels(&sp, &WeakAnnotation::default()).unwrap();
        assert!(labels.annotated_mask.iter().all(|&b| !b));
    }

    #[test]
    fn lift_consistent_clicks_merge_conflicting_error() {
        let cloud = PointCloud {
            positions: vec![[0.0; 3], [0.01, 0.0, 0.0]],
            ..Default::default()
        };
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        assert_eq!(sp.num_superpoints, 1);
        let same = WeakAnnotation {
            entries: vec![
                WeakClick {
                    point_index: 0,
                    instance_id: 1,
                    semantic_class: 0,
                },
                WeakClick {
                    point_index: 1,
                    instance_id: 1,
                    semantic_class: 0,
                },
            ],
        };
        assert!(lift_labels(&sp, &same).is_ok());
        let conflict = WeakAnnotation {
            entries: vec![
                WeakClick {
                    point_index: 0,
                    instance_id: 1,
                    semantic_class: 0,
                },
                WeakClick {
                    point_index: 1,
                    instance_id: 2,
                    semantic_class: 0,
                },
            ],
        };
        match lift_labels(&sp, &conflict) {
            Err(Error::ClickConflict { first, second, .. }) => {
                assert_eq!((first, second), (1, 2));
            }
            other => panic!("expected click conflict, got {other:?}"),
        }
    }

    #[test]
    fn separated_slabs_example_no_cross_superpoint() {
        // geometrically separated instances: superpoints never mix members
        let cloud = generate_scene(&SceneSpec {
            num_instances: 2,
            shape_kinds: vec![ShapeKind::PlaneSlab],
            spacing: 3.0,
            ..Default::default()
        })
        .unwrap();
        let sp = oversegment(&cloud, &OversegParams::default()).unwrap();
        let gt = cloud.gt_instance.as_ref().unwrap();
        for members in &sp.member_lists {
            let first = gt[members[0]];
            assert!(members.iter().all(|&p| gt[p] == first));
        }
    }
}
