//! Synthetic scene generation and one-click-per-instance weak annotation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::pcio::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Box,
    Sphere,
    PlaneSlab,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub num_instances: usize,
    pub classes: Vec<i32>,
    pub shape_kinds: Vec<ShapeKind>,
    /// Inclusive range of points sampled per instance.
    pub points_per_instance: (usize, usize),
    /// Minimum inter-instance centroid distance, meters.
    pub spacing: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Scene bounding-box edge length; derived from spacing and instance
    /// count when absent.
    pub extent: Option<f64>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            num_instances: 4,
            classes: vec![0, 1],
            shape_kinds: vec![ShapeKind::Box, ShapeKind::Sphere],
            points_per_instance: (300, 500),
            spacing: 1.0,
            noise_sigma: 0.0,
            rng_seed: 0,
            extent: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_instances < 1 {
            return Err(Error::Validation("num_instances must be >= 1".into()));
        }
        if self.spacing <= 0.0 {
            return Err(Error::Validation("spacing must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Validation("noise_sigma must be >= 0".into()));
        }
        if self.classes.is_empty() || self.shape_kinds.is_empty() {
            return Err(Error::Validation(
                "classes and shape_kinds must be nonempty".into(),
            ));
        }
        if self.points_per_instance.0 < 1 || self.points_per_instance.0 > self.points_per_instance.1
        {
            return Err(Error::Validation(
                "points_per_instance must be a nonempty range".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeakClick {
    pub point_index: usize,
    pub instance_id: i32,
    pub semantic_class: i32,
}

#[derive(Debug, Clone, Default)]
pub struct WeakAnnotation {
    pub entries: Vec<WeakClick>,
}

const PLACEMENT_RETRIES: usize = 4000;

/// Deterministic scene generation: axis-aligned primitives with uniform
/// volume sampling plus Gaussian jitter. Instance i gets class
/// `classes[i % classes.len()]` and gt_instance id i.
pub fn generate_scene(spec: &SceneSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // scene box scaled so rejection sampling of centers terminates
    let extent = spec
        .extent
        .unwrap_or_else(|| spec.spacing * (spec.num_instances as f64).cbrt() * 2.0 + spec.spacing);
    if extent <= 0.0 {
        return Err(Error::Validation("extent must be positive".into()));
    }
    let mut centers: Vec<Vec3> = Vec::with_capacity(spec.num_instances);
    for i in 0..spec.num_instances {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let c = [
                rng.gen_range(0.0..extent),
                rng.gen_range(0.0..extent),
                rng.gen_range(0.0..extent),
            ];
            if centers.iter().all(|&o| geom::dist(c, o) >= spec.spacing) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place instance {i} with spacing {} after {PLACEMENT_RETRIES} tries",
                spec.spacing
            )));
        }
    }

    let jitter = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut positions = Vec::new();
    let mut gt_semantic = Vec::new();
    let mut gt_instance = Vec::new();
    // shapes sized well below spacing so instances stay separated
    let half_extent = 0.22 * spec.spacing;
    for (i, &center) in centers.iter().enumerate() {
        let kind = spec.shape_kinds[i % spec.shape_kinds.len()];
        let class = spec.classes[i % spec.classes.len()];
        let n = rng.gen_range(spec.points_per_instance.0..=spec.points_per_instance.1);
        for _ in 0..n {
            let local: Vec3 = match kind {
                ShapeKind::Box => [
                    rng.gen_range(-half_extent..half_extent),
                    rng.gen_range(-half_extent..half_extent),
                    rng.gen_range(-half_extent..half_extent),
                ],
                ShapeKind::Sphere => loop {
                    let p = [
                        rng.gen_range(-half_extent..half_extent),
                        rng.gen_range(-half_extent..half_extent),
                        rng.gen_range(-half_extent..half_extent),
                    ];
                    if geom::norm(p) <= half_extent {
                        break p;
                    }
                },
                ShapeKind::PlaneSlab => [
                    rng.gen_range(-half_extent..half_extent),
                    rng.gen_range(-half_extent..half_extent),
                    rng.gen_range(-0.05 * half_extent..0.05 * half_extent),
                ],
            };
            let noise = if spec.noise_sigma > 0.0 {
                [
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                ]
            } else {
                [0.0; 3]
            };
            positions.push(geom::add(geom::add(center, local), noise));
            gt_semantic.push(class);
            gt_instance.push(i as i32);
        }
    }

    let cloud = PointCloud {
        positions,
        colors: None,
        normals: None,
        gt_semantic: Some(gt_semantic),
        gt_instance: Some(gt_instance),
    };
    cloud.validate()?;
    Ok(cloud)
}

/// Samples one uniformly random point per ground-truth instance.
pub fn sample_weak_labels(cloud: &PointCloud, seed: u64) -> Result<WeakAnnotation> {
    let gt_instance = cloud
        .gt_instance
        .as_ref()
        .ok_or_else(|| Error::Domain("cloud has no gt_instance labels".into()))?;
    let gt_semantic = cloud
        .gt_semantic
        .as_ref()
        .ok_or_else(|| Error::Domain("cloud has no gt_semantic labels".into()))?;

    let mut members: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
    for (p, &id) in gt_instance.iter().enumerate() {
        if id >= 0 {
            members.entry(id).or_default().push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(members.len());
    for (id, pts) in &members {
        let &p = pts
            .choose(&mut rng)
            .ok_or_else(|| Error::Domain(format!("instance {id} has zero points")))?;
        entries.push(WeakClick {
            point_index: p,
            instance_id: *id,
            semantic_class: gt_semantic[p],
        });
    }
    Ok(WeakAnnotation { entries })
}
