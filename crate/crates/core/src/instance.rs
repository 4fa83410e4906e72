//! Pseudo-instance generation by offset voting, per-instance volume
//! statistics, and volume-aware clustering (radius-gated BFS proposals
//! filtered by the ratio of actual to predicted voxel counts).

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::overseg::Superpointization;
use crate::pcio::{self, PointCloud};
use crate::propagate::{LabelSource, LabelState};
use crate::spgraph::SuperpointGraph;

pub const DEFAULT_LAMBDA: f64 = 0.25;
pub const DEFAULT_BETA: f64 = 0.3;
const CONFIDENCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Pseudo,
    Clustered,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub superpoint_ids: BTreeSet<usize>,
    pub semantic_class: i32,
    pub confidence: f64,
    pub point_ids: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
    pub provenance: Provenance,
}

impl InstanceSet {
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.superpoint_ids.is_empty() {
                return Err(Error::Validation(format!("instance {i} is empty")));
            }
            for &s in &inst.superpoint_ids {
                if !seen.insert(s) {
                    return Err(Error::Validation(format!(
                        "superpoint {s} belongs to more than one instance"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maps each superpoint to its instance index, if any.
    pub fn superpoint_assignment(&self, num_superpoints: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_superpoints];
        for (idx, inst) in self.instances.iter().enumerate() {
            for &s in &inst.superpoint_ids {
                out[s] = Some(idx);
            }
        }
        out
    }
}

/// Per-instance voxel count and centroid-to-farthest-point radius, aligned
/// with the instance order of the set they were computed from.
#[derive(Debug, Clone)]
pub struct VolumeStats {
    pub voxel_counts: Vec<f64>,
    pub radii: Vec<f64>,
}

/// Elementwise p + o.
pub fn shift_superpoints(centroids: &[Vec3], offsets: &[Vec3]) -> Result<Vec<Vec3>> {
    if centroids.len() != offsets.len() {
        return Err(Error::Dimension(format!(
            "{} centroids vs {} offsets",
            centroids.len(),
            offsets.len()
        )));
    }
    Ok(centroids
        .iter()
        .zip(offsets)
        .map(|(&p, &o)| geom::add(p, o))
        .collect())
}

/// Each superpoint joins the instance of the nearest annotated superpoint
/// of the same semantic class, measured in shifted coordinates.
/// Superpoints with no same-class anchor stay unassigned.
pub fn vote_pseudo_instances(
    shifted: &[Vec3],
    semantics: &[i32],
    labels: &LabelState,
    sp: &Superpointization,
) -> Result<InstanceSet> {
    let v = shifted.len();
    if semantics.len() != v || labels.instance_label.len() != v {
        return Err(Error::Dimension("input lengths disagree".into()));
    }
    let anchors: Vec<usize> = (0..v)
        .filter(|&i| labels.source[i] == LabelSource::Annotated)
        .collect();
    if anchors.is_empty() {
        return Err(Error::Domain("voting requires at least one annotated superpoint".into()));
    }

    // one instance per annotated anchor's instance id
    let mut by_instance: std::collections::BTreeMap<i32, Instance> = Default::default();
    for s in 0..v {
        let mut best: Option<(f64, usize)> = None;
        for &a in &anchors {
            let class = labels.semantic_label[a].expect("annotated anchors carry a class");
            if class != semantics[s] {
                continue;
            }
            let d = geom::dist_sq(shifted[s], shifted[a]);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, a));
            }
        }
        if let Some((_, a)) = best {
            let inst_id = labels.instance_label[a].expect("annotated anchors carry an instance");
            let class = labels.semantic_label[a].unwrap();
            let entry = by_instance.entry(inst_id).or_insert_with(|| Instance {
                superpoint_ids: BTreeSet::new(),
                semantic_class: class,
                confidence: 1.0,
                point_ids: BTreeSet::new(),
            });
            entry.superpoint_ids.insert(s);
            entry.point_ids.extend(sp.member_lists[s].iter().copied());
        }
    }
    let set = InstanceSet {
        instances: by_instance.into_values().collect(),
        provenance: Provenance::Pseudo,
    };
    set.validate()?;
    Ok(set)
}

/// Voxel count and farthest-point radius per instance.
pub fn instance_volume_stats(
    instances: &InstanceSet,
    cloud: &PointCloud,
    voxel_size: f64,
) -> Result<VolumeStats> {
    let mut voxel_counts = Vec::with_capacity(instances.instances.len());
    let mut radii = Vec::with_capacity(instances.instances.len());
    for (i, inst) in instances.instances.iter().enumerate() {
        if inst.point_ids.is_empty() {
            return Err(Error::Domain(format!("instance {i} has no points")));
        }
        let pts: Vec<Vec3> = inst.point_ids.iter().map(|&p| cloud.positions[p]).collect();
        voxel_counts.push(pcio::voxel_count(&pts, voxel_size)? as f64);
        let centroid = geom::mean(&pts);
        radii.push(pts.iter().map(|&p| geom::dist(centroid, p)).fold(0.0, f64::max));
    }
    Ok(VolumeStats {
        voxel_counts,
        radii,
    })
}

/// Per-superpoint voxel index sets on a scene-anchored grid, precomputed
/// once so proposal voxel counts are cheap unions.
#[derive(Debug, Clone)]
pub struct VoxelOccupancy {
    pub voxel_size: f64,
    pub per_superpoint: Vec<BTreeSet<[i64; 3]>>,
}

pub fn superpoint_voxel_occupancy(
    cloud: &PointCloud,
    sp: &Superpointization,
    voxel_size: f64,
) -> Result<VoxelOccupancy> {
    if voxel_size <= 0.0 {
        return Err(Error::Domain("voxel_size must be positive".into()));
    }
    if cloud.is_empty() {
        return Err(Error::Domain("empty cloud".into()));
    }
    let mut origin = cloud.positions[0];
    for p in &cloud.positions {
        for a in 0..3 {
            origin[a] = origin[a].min(p[a]);
        }
    }
    let per_superpoint = sp
        .member_lists
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|&p| pcio::voxel_index(cloud.positions[p], origin, voxel_size))
                .collect()
        })
        .collect();
    Ok(VoxelOccupancy {
        voxel_size,
        per_superpoint,
    })
}

impl VoxelOccupancy {
    fn union_count(&self, superpoints: &[usize]) -> usize {
        let mut set: BTreeSet<[i64; 3]> = BTreeSet::new();
        for &s in superpoints {
            set.extend(self.per_superpoint[s].iter().copied());
        }
        set.len()
    }
}

/// Radius-gated BFS proposals over the superpoint graph, filtered by the
/// ratio of actual (`w`) to mean predicted (`w_bar`) voxel counts at
/// threshold `beta`; small proposals merge into the closest same-class
/// instance, or are promoted when no such instance exists.
#[allow(clippy::too_many_arguments)]
pub fn volume_aware_cluster(
    graph: &SuperpointGraph,
    shifted: &[Vec3],
    semantics: &[i32],
    voxel_pred: &[f64],
    radius_pred: &[f64],
    occupancy: &VoxelOccupancy,
    sp: &Superpointization,
    lambda: f64,
    beta: f64,
) -> Result<InstanceSet> {
    let v = graph.num_nodes;
    if shifted.len() != v
        || semantics.len() != v
        || voxel_pred.len() != v
        || radius_pred.len() != v
        || occupancy.per_superpoint.len() != v
    {
        return Err(Error::Dimension("input lengths must all equal |V|".into()));
    }
    if lambda <= 0.0 || beta <= 0.0 {
        return Err(Error::Domain("lambda and beta must be positive".into()));
    }

    // step (i): BFS proposals in ascending seed order
    let mut visited = vec![false; v];
    let mut proposals: Vec<Vec<usize>> = Vec::new();
    for seed in 0..v {
        if visited[seed] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::new();
        visited[seed] = true;
        queue.push_back(seed);
        members.push(seed);
        while let Some(j) = queue.pop_front() {
            for &k in graph.neighbors(j) {
                if visited[k] || semantics[k] != semantics[j] {
                    continue;
                }
                if geom::dist(shifted[k], shifted[j]) < lambda * radius_pred[j] {
                    visited[k] = true;
                    queue.push_back(k);
                    members.push(k);
                }
            }
        }
        proposals.push(members);
    }

    // step (ii): keep proposals whose actual voxel count clears beta * w_bar
    struct Proposal {
        members: Vec<usize>,
        class: i32,
        mean_shifted: Vec3,
        w: f64,
        w_bar: f64,
    }
    let stats: Vec<Proposal> = proposals
        .into_iter()
        .map(|members| {
            let w = occupancy.union_count(&members) as f64;
            let w_bar =
                members.iter().map(|&s| voxel_pred[s]).sum::<f64>() / members.len() as f64;
            let mean_shifted = geom::mean_of(&members, shifted);
            let class = semantics[members[0]];
            Proposal {
                members,
                class,
                mean_shifted,
                w,
                w_bar,
            }
        })
        .collect();

    let confidence = |w: f64, w_bar: f64| (w / (beta * w_bar + CONFIDENCE_EPS)).min(1.0);
    let mut instances: Vec<Instance> = Vec::new();
    let mut instance_means: Vec<Vec3> = Vec::new();
    let mut leftovers: Vec<&Proposal> = Vec::new();
    for p in &stats {
        if p.w > beta * p.w_bar {
            instances.push(Instance {
                superpoint_ids: p.members.iter().copied().collect(),
                semantic_class: p.class,
                confidence: confidence(p.w, p.w_bar),
                point_ids: BTreeSet::new(),
            });
            instance_means.push(p.mean_shifted);
        } else {
            leftovers.push(p);
        }
    }

    // step (iii): merge leftovers into the closest same-class instance;
    // instance statistics stay frozen at step (ii)
    let kept = instances.len();
    for p in leftovers {
        let mut best: Option<(f64, usize)> = None;
        for idx in 0..kept {
            if instances[idx].semantic_class != p.class {
                continue;
            }
            let d = geom::dist_sq(p.mean_shifted, instance_means[idx]);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        match best {
            Some((_, idx)) => {
                instances[idx].superpoint_ids.extend(p.members.iter().copied());
            }
            None => {
                // no same-class instance anywhere: promote instead of dropping
                instances.push(Instance {
                    superpoint_ids: p.members.iter().copied().collect(),
                    semantic_class: p.class,
                    confidence: confidence(p.w, p.w_bar),
                    point_ids: BTreeSet::new(),
                });
                instance_means.push(p.mean_shifted);
            }
        }
    }

    for inst in &mut instances {
        for &s in &inst.superpoint_ids {
            inst.point_ids.extend(sp.member_lists[s].iter().copied());
        }
    }
    let set = InstanceSet {
        instances,
        provenance: Provenance::Clustered,
    };
    set.validate()?;
    Ok(set)
}
