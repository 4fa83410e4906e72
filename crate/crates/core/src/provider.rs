//! Per-superpoint prediction bundles: ground-truth oracle with controllable
//! noise, plus text/binary file loaders for externally produced predictions.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::overseg::Superpointization;
use crate::pcio::{self, PointCloud};

pub const DEFAULT_EMBED_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    /// |V| x d superpoint embeddings.
    pub embeddings: Vec<Vec<f64>>,
    /// Predicted class id per superpoint (argmax of the one-hot semantics).
    pub semantics: Vec<i32>,
    /// Predicted offset to the instance center, meters.
    pub offsets: Vec<Vec3>,
    /// Predicted instance voxel count per superpoint.
    pub voxel_pred: Vec<f64>,
    /// Predicted instance radius per superpoint, meters.
    pub radius_pred: Vec<f64>,
}

impl PredictionBundle {
    pub fn num_superpoints(&self) -> usize {
        self.semantics.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, expected_v: usize) -> Result<()> {
        let v = expected_v;
        if self.embeddings.len() != v
            || self.semantics.len() != v
            || self.offsets.len() != v
            || self.voxel_pred.len() != v
            || self.radius_pred.len() != v
        {
            return Err(Error::Validation(format!(
                "bundle row count does not match |V| = {v}"
            )));
        }
        let d = self.embed_dim();
        for (i, row) in self.embeddings.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Validation(format!(
                    "embedding row {i} has length {}, expected {d}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("non-finite embedding at row {i}")));
            }
        }
        for i in 0..v {
            if !geom::is_finite(self.offsets[i]) {
                return Err(Error::Validation(format!("non-finite offset at row {i}")));
            }
            if !(self.voxel_pred[i] > 0.0) || !self.voxel_pred[i].is_finite() {
                return Err(Error::Validation(format!(
                    "non-positive voxel prediction at row {i}"
                )));
            }
            if !(self.radius_pred[i] > 0.0) || !self.radius_pred[i].is_finite() {
                return Err(Error::Validation(format!(
                    "non-positive radius prediction at row {i}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub semantic_flip_prob: f64,
    pub offset_sigma: f64,
    pub volume_rel_sigma: f64,
    pub embedding_cluster_sigma: f64,
    pub rng_seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            semantic_flip_prob: 0.0,
            offset_sigma: 0.0,
            volume_rel_sigma: 0.0,
            embedding_cluster_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.semantic_flip_prob) {
            return Err(Error::Validation("semantic_flip_prob must be in [0,1]".into()));
        }
        if self.offset_sigma < 0.0 || self.volume_rel_sigma < 0.0 || self.embedding_cluster_sigma < 0.0
        {
            return Err(Error::Validation("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }
}

const MIN_POSITIVE_PRED: f64 = 1e-6;

/// Simulates the trained backbone from ground truth: semantics are the
/// per-superpoint majority class (flipped i.i.d.), offsets point to the
/// instance centroid, volume predictions carry the true instance voxel
/// count and farthest-point radius, and embeddings cluster around a random
/// unit anchor per instance.
pub fn oracle_predictions(
    cloud: &PointCloud,
    sp: &Superpointization,
    noise: &NoiseSpec,
    voxel_size: f64,
    embed_dim: usize,
) -> Result<PredictionBundle> {
    noise.validate()?;
    let gt_instance = cloud
        .gt_instance
        .as_ref()
        .ok_or_else(|| Error::Domain("oracle requires gt_instance".into()))?;
    let gt_semantic = cloud
        .gt_semantic
        .as_ref()
        .ok_or_else(|| Error::Domain("oracle requires gt_semantic".into()))?;

    let v = sp.num_superpoints;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();

    // per-instance point lists, centroids, volume stats
    let instance_ids = cloud.gt_instance_ids();
    let classes: Vec<i32> = {
        let set: std::collections::BTreeSet<i32> = gt_semantic.iter().copied().collect();
        set.into_iter().collect()
    };
    let mut inst_points: std::collections::BTreeMap<i32, Vec<Vec3>> = Default::default();
    for (p, &id) in gt_instance.iter().enumerate() {
        if id >= 0 {
            inst_points.entry(id).or_default().push(cloud.positions[p]);
        }
    }
    let mut inst_centroid: std::collections::BTreeMap<i32, Vec3> = Default::default();
    let mut inst_voxels: std::collections::BTreeMap<i32, f64> = Default::default();
    let mut inst_radius: std::collections::BTreeMap<i32, f64> = Default::default();
    for (&id, pts) in &inst_points {
        let c = geom::mean(pts);
        inst_centroid.insert(id, c);
        inst_voxels.insert(id, pcio::voxel_count(pts, voxel_size)? as f64);
        let r = pts.iter().map(|&p| geom::dist(c, p)).fold(0.0, f64::max);
        inst_radius.insert(id, r);
    }
    // one random unit anchor per instance, drawn in instance-id order
    let mut anchors: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
    for &id in &instance_ids {
        let mut a: Vec<f64> = (0..embed_dim).map(|_| gauss.sample(&mut rng)).collect();
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        a.iter_mut().for_each(|x| *x /= n);
        anchors.insert(id, a);
    }

    let mut embeddings = Vec::with_capacity(v);
    let mut semantics = Vec::with_capacity(v);
    let mut offsets = Vec::with_capacity(v);
    let mut voxel_pred = Vec::with_capacity(v);
    let mut radius_pred = Vec::with_capacity(v);
    for s in 0..v {
        let members = &sp.member_lists[s];
        // majority gt instance and class over members
        let mut inst_counts: std::collections::BTreeMap<i32, usize> = Default::default();
        let mut class_counts: std::collections::BTreeMap<i32, usize> = Default::default();
        for &p in members {
            *inst_counts.entry(gt_instance[p]).or_default() += 1;
            *class_counts.entry(gt_semantic[p]).or_default() += 1;
        }
        let majority_inst = *inst_counts
            .iter()
            .max_by_key(|&(id, c)| (*c, std::cmp::Reverse(*id)))
            .unwrap()
            .0;
        let majority_class = *class_counts
            .iter()
            .max_by_key(|&(id, c)| (*c, std::cmp::Reverse(*id)))
            .unwrap()
            .0;

        let mut class = majority_class;
        if noise.semantic_flip_prob > 0.0 && rng.gen::<f64>() < noise.semantic_flip_prob {
            let others: Vec<i32> = classes.iter().copied().filter(|&c| c != class).collect();
            if !others.is_empty() {
                class = others[rng.gen_range(0..others.len())];
            }
        }
        semantics.push(class);

        let center = inst_centroid
            .get(&majority_inst)
            .copied()
            .unwrap_or(sp.centroids[s]);
        let mut off = geom::sub(center, sp.centroids[s]);
        if noise.offset_sigma > 0.0 {
            for a in 0..3 {
                off[a] += noise.offset_sigma * gauss.sample(&mut rng);
            }
        }
        offsets.push(off);

        let mut u = inst_voxels.get(&majority_inst).copied().unwrap_or(1.0);
        let mut r = inst_radius.get(&majority_inst).copied().unwrap_or(0.0);
        if noise.volume_rel_sigma > 0.0 {
            u *= 1.0 + noise.volume_rel_sigma * gauss.sample(&mut rng);
            r *= 1.0 + noise.volume_rel_sigma * gauss.sample(&mut rng);
        }
        voxel_pred.push(u.max(MIN_POSITIVE_PRED));
        radius_pred.push(r.max(MIN_POSITIVE_PRED));

        let anchor = anchors.get(&majority_inst).cloned().unwrap_or_else(|| {
            let mut a = vec![0.0; embed_dim];
            if embed_dim > 0 {
                a[0] = 1.0;
            }
            a
        });
        let emb: Vec<f64> = anchor
            .iter()
            .map(|&x| {
                if noise.embedding_cluster_sigma > 0.0 {
                    x + noise.embedding_cluster_sigma * gauss.sample(&mut rng)
                } else {
                    x
                }
            })
            .collect();
        embeddings.push(emb);
    }

    let bundle = PredictionBundle {
        embeddings,
        semantics,
        offsets,
        voxel_pred,
        radius_pred,
    };
    bundle.validate(v)?;
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// File formats: text (header "V d") and binary twin (magic "SPP1")
// ---------------------------------------------------------------------------

pub fn save_predictions(path: &Path, bundle: &PredictionBundle) -> Result<()> {
    let v = bundle.num_superpoints();
    let d = bundle.embed_dim();
    let mut s = String::new();
    let _ = writeln!(s, "{v} {d}");
    for i in 0..v {
        for x in &bundle.embeddings[i] {
            let _ = write!(s, "{x} ");
        }
        let _ = write!(s, "{} ", bundle.semantics[i]);
        let o = bundle.offsets[i];
        let _ = write!(s, "{} {} {} ", o[0], o[1], o[2]);
        let _ = writeln!(s, "{} {}", bundle.voxel_pred[i], bundle.radius_pred[i]);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path, expected_v: usize) -> Result<PredictionBundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hn, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty prediction file"))?;
    let mut it = header.split_whitespace();
    let v: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, hn + 1, "bad header, expected `V d`"))?;
    let d: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, hn + 1, "bad header, expected `V d`"))?;
    if v != expected_v {
        return Err(Error::Validation(format!(
            "prediction file declares {v} superpoints, expected {expected_v}"
        )));
    }
    let mut bundle = PredictionBundle {
        embeddings: Vec::with_capacity(v),
        semantics: Vec::with_capacity(v),
        offsets: Vec::with_capacity(v),
        voxel_pred: Vec::with_capacity(v),
        radius_pred: Vec::with_capacity(v),
    };
    let mut rows = 0usize;
    for (n, line) in lines {
        if rows == v {
            return Err(Error::parse(path, n + 1, "more rows than declared"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let want = d + 1 + 3 + 2;
        if fields.len() != want {
            return Err(Error::parse(
                path,
                n + 1,
                format!("expected {want} fields, got {}", fields.len()),
            ));
        }
        let f = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("bad float `{}`", fields[i])))
        };
        let emb: Vec<f64> = (0..d).map(f).collect::<Result<_>>()?;
        let class: i32 = fields[d]
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad class id `{}`", fields[d])))?;
        let off = [f(d + 1)?, f(d + 2)?, f(d + 3)?];
        let u = f(d + 4)?;
        let r = f(d + 5)?;
        if u <= 0.0 {
            return Err(Error::Validation(format!(
                "non-positive voxel prediction at row {rows}"
            )));
        }
        if r <= 0.0 {
            return Err(Error::Validation(format!(
                "non-positive radius prediction at row {rows}"
            )));
        }
        bundle.embeddings.push(emb);
        bundle.semantics.push(class);
        bundle.offsets.push(off);
        bundle.voxel_pred.push(u);
        bundle.radius_pred.push(r);
        rows += 1;
    }
    if rows != v {
        return Err(Error::Validation(format!(
            "prediction file has {rows} rows, declared {v}"
        )));
    }
    bundle.validate(expected_v)?;
    Ok(bundle)
}

const BINARY_MAGIC: &[u8; 4] = b"SPP1";

pub fn save_predictions_binary(path: &Path, bundle: &PredictionBundle) -> Result<()> {
    let v = bundle.num_superpoints();
    let d = bundle.embed_dim();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(v as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for i in 0..v {
        for x in &bundle.embeddings[i] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&bundle.semantics[i].to_le_bytes());
        for a in 0..3 {
            buf.extend_from_slice(&bundle.offsets[i][a].to_le_bytes());
        }
        buf.extend_from_slice(&bundle.voxel_pred[i].to_le_bytes());
        buf.extend_from_slice(&bundle.radius_pred[i].to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_predictions_binary(path: &Path, expected_v: usize) -> Result<PredictionBundle> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::parse(path, 0, format!("truncated at offset {pos}")));
        }
        let out = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(out)
    };
    if take(&mut pos, 4)? != BINARY_MAGIC {
        return Err(Error::parse(path, 0, "bad magic, expected SPP1"));
    }
    let v = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    if v != expected_v {
        return Err(Error::Validation(format!(
            "prediction file declares {v} superpoints, expected {expected_v}"
        )));
    }
    let f64_at = |pos: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    let mut bundle = PredictionBundle {
        embeddings: Vec::with_capacity(v),
        semantics: Vec::with_capacity(v),
        offsets: Vec::with_capacity(v),
        voxel_pred: Vec::with_capacity(v),
        radius_pred: Vec::with_capacity(v),
    };
    for _ in 0..v {
        let emb: Vec<f64> = (0..d).map(|_| f64_at(&mut pos)).collect::<Result<_>>()?;
        bundle.embeddings.push(emb);
        let class = i32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        bundle.semantics.push(class);
        bundle
            .offsets
            .push([f64_at(&mut pos)?, f64_at(&mut pos)?, f64_at(&mut pos)?]);
        bundle.voxel_pred.push(f64_at(&mut pos)?);
        bundle.radius_pred.push(f64_at(&mut pos)?);
    }
    bundle.validate(expected_v)?;
    Ok(bundle)
}
