//! Instance-segmentation metrics (AP family, coverage, precision/recall)
//! and pseudo-label quality accounting. Metrics are computed per scene and
//! averaged by the caller; there is no cross-scene confidence pooling.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::instance::InstanceSet;
use crate::overseg::Superpointization;
use crate::pcio::PointCloud;
use crate::propagate::{LabelSource, LabelState};

/// IoU thresholds backing the aggregate AP value.
pub const AP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone)]
pub struct GroundTruthInstance {
    pub id: i32,
    pub semantic_class: i32,
    pub point_ids: BTreeSet<usize>,
}

/// Extracts ground-truth instances (id ascending) from a cloud carrying
/// both instance and semantic labels; negative ids are ignored.
pub fn ground_truth_instances(cloud: &PointCloud) -> Result<Vec<GroundTruthInstance>> {
    let (Some(inst), Some(sem)) = (&cloud.gt_instance, &cloud.gt_semantic) else {
        return Err(Error::Validation(
            "ground-truth instance and semantic labels are required".into(),
        ));
    };
    let mut by_id: BTreeMap<i32, GroundTruthInstance> = BTreeMap::new();
    for (p, (&i, &s)) in inst.iter().zip(sem).enumerate() {
        if i < 0 {
            continue;
        }
        let entry = by_id.entry(i).or_insert_with(|| GroundTruthInstance {
            id: i,
            semantic_class: s,
            point_ids: BTreeSet::new(),
        });
        if entry.semantic_class != s {
            return Err(Error::Validation(format!(
                "instance {i} spans semantic classes {} and {s}",
                entry.semantic_class
            )));
        }
        entry.point_ids.insert(p);
    }
    if by_id.is_empty() {
        return Err(Error::Domain("cloud has zero ground-truth instances".into()));
    }
    Ok(by_id.into_values().collect())
}

fn iou(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Point-set IoU for every (prediction, ground truth) pair; zero across
/// semantic classes.
pub fn match_and_iou(pred: &InstanceSet, gt: &[GroundTruthInstance]) -> Vec<Vec<f64>> {
    pred.instances
        .iter()
        .map(|p| {
            gt.iter()
                .map(|g| {
                    if p.semantic_class == g.semantic_class {
                        iou(&p.point_ids, &g.point_ids)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// All-point-interpolated PR area for one ranked TP/FP sequence.
fn pr_area(hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || hits.is_empty() {
        return 0.0;
    }
    // precision at each rank, then running max from the tail
    let mut precisions = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (rank, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    let mut best = 0.0_f64;
    let mut area = 0.0;
    for (rank, &hit) in hits.iter().enumerate().rev() {
        best = best.max(precisions[rank]);
        if hit {
            area += best / num_gt as f64;
        }
    }
    area
}

/// AP at one IoU threshold: mean over the classes present in the ground
/// truth. Predictions are ranked by descending confidence, ties broken by
/// instance id; each greedily claims the unmatched ground truth of
/// highest IoU at or above the threshold.
pub fn average_precision(
    pred: &InstanceSet,
    gt: &[GroundTruthInstance],
    ious: &[Vec<f64>],
    threshold: f64,
) -> f64 {
    let classes: BTreeSet<i32> = gt.iter().map(|g| g.semantic_class).collect();
    let mut total = 0.0;
    for &class in &classes {
        let gt_ids: Vec<usize> = (0..gt.len())
            .filter(|&g| gt[g].semantic_class == class)
            .collect();
        let mut ranked: Vec<usize> = (0..pred.instances.len())
            .filter(|&p| pred.instances[p].semantic_class == class)
            .collect();
        ranked.sort_by(|&a, &b| {
            pred.instances[b]
                .confidence
                .partial_cmp(&pred.instances[a].confidence)
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut taken = vec![false; gt.len()];
        let mut hits = Vec::with_capacity(ranked.len());
        for &p in &ranked {
            let best = gt_ids
                .iter()
                .filter(|&&g| !taken[g] && ious[p][g] >= threshold)
                .max_by(|&&a, &&b| ious[p][a].partial_cmp(&ious[p][b]).unwrap().then(b.cmp(&a)));
            match best {
                Some(&g) => {
                    taken[g] = true;
                    hits.push(true);
                }
                None => hits.push(false),
            }
        }
        total += pr_area(&hits, gt_ids.len());
    }
    total / classes.len() as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coverage {
    pub m_cov: f64,
    pub m_wcov: f64,
    pub m_prec: f64,
    pub m_rec: f64,
}

/// Best-IoU coverage plus one-to-one precision/recall at IoU >= 0.5.
/// With zero predictions everything, including `m_prec`, is 0.
pub fn coverage_metrics(
    pred: &InstanceSet,
    gt: &[GroundTruthInstance],
    ious: &[Vec<f64>],
) -> Coverage {
    let total_gt_points: usize = gt.iter().map(|g| g.point_ids.len()).sum();
    let mut m_cov = 0.0;
    let mut m_wcov = 0.0;
    for (g, inst) in gt.iter().enumerate() {
        let best = (0..pred.instances.len())
            .map(|p| ious[p][g])
            .fold(0.0, f64::max);
        m_cov += best / gt.len() as f64;
        m_wcov += best * inst.point_ids.len() as f64 / total_gt_points as f64;
    }

    // greedy one-to-one matching over all pairs, descending IoU
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for p in 0..pred.instances.len() {
        for g in 0..gt.len() {
            if ious[p][g] >= 0.5 {
                pairs.push((p, g));
            }
        }
    }
    pairs.sort_by(|&(pa, ga), &(pb, gb)| {
        ious[pb][gb]
            .partial_cmp(&ious[pa][ga])
            .unwrap()
            .then((pa, ga).cmp(&(pb, gb)))
    });
    let mut pred_taken = vec![false; pred.instances.len()];
    let mut gt_taken = vec![false; gt.len()];
    let mut matched = 0usize;
    for (p, g) in pairs {
        if !pred_taken[p] && !gt_taken[g] {
            pred_taken[p] = true;
            gt_taken[g] = true;
            matched += 1;
        }
    }
    Coverage {
        m_cov,
        m_wcov,
        m_prec: if pred.instances.is_empty() {
            0.0
        } else {
            matched as f64 / pred.instances.len() as f64
        },
        m_rec: matched as f64 / gt.len() as f64,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub m_cov: f64,
    pub m_wcov: f64,
    pub m_prec: f64,
    pub m_rec: f64,
    /// AP (threshold-mean) per semantic class present in the ground truth.
    pub per_class_ap: BTreeMap<i32, f64>,
}

impl MetricsReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        for (name, value) in [
            ("ap", self.ap),
            ("ap50", self.ap50),
            ("ap25", self.ap25),
            ("mcov", self.m_cov),
            ("mwcov", self.m_wcov),
            ("mprec", self.m_prec),
            ("mrec", self.m_rec),
        ] {
            out.push_str(&format!("{name}\t{value}\n"));
        }
        for (class, ap) in &self.per_class_ap {
            out.push_str(&format!("ap_class_{class}\t{ap}\n"));
        }
        out
    }

    /// Mean of the scalar fields across scene reports; per-class values
    /// are averaged over the reports that contain the class.
    pub fn mean(reports: &[MetricsReport]) -> Result<MetricsReport> {
        if reports.is_empty() {
            return Err(Error::Domain("cannot average zero metric reports".into()));
        }
        let n = reports.len() as f64;
        let mut out = MetricsReport::default();
        let mut class_counts: BTreeMap<i32, usize> = BTreeMap::new();
        for r in reports {
            out.ap += r.ap / n;
            out.ap50 += r.ap50 / n;
            out.ap25 += r.ap25 / n;
            out.m_cov += r.m_cov / n;
            out.m_wcov += r.m_wcov / n;
            out.m_prec += r.m_prec / n;
            out.m_rec += r.m_rec / n;
            for (&c, &v) in &r.per_class_ap {
                *out.per_class_ap.entry(c).or_insert(0.0) += v;
                *class_counts.entry(c).or_insert(0) += 1;
            }
        }
        for (c, v) in out.per_class_ap.iter_mut() {
            *v /= class_counts[c] as f64;
        }
        Ok(out)
    }
}

/// Full per-scene report against a labeled cloud.
pub fn evaluate(pred: &InstanceSet, cloud: &PointCloud) -> Result<MetricsReport> {
    let gt = ground_truth_instances(cloud)?;
    let ious = match_and_iou(pred, &gt);
    let per_threshold: Vec<f64> = AP_THRESHOLDS
        .iter()
        .map(|&t| average_precision(pred, &gt, &ious, t))
        .collect();
    let classes: BTreeSet<i32> = gt.iter().map(|g| g.semantic_class).collect();
    let mut per_class_ap = BTreeMap::new();
    for &class in &classes {
        let sub: Vec<GroundTruthInstance> = gt
            .iter()
            .filter(|g| g.semantic_class == class)
            .cloned()
            .collect();
        let sub_ious = match_and_iou(pred, &sub);
        let mean: f64 = AP_THRESHOLDS
            .iter()
            .map(|&t| average_precision(pred, &sub, &sub_ious, t))
            .sum::<f64>()
            / AP_THRESHOLDS.len() as f64;
        per_class_ap.insert(class, mean);
    }
    let cov = coverage_metrics(pred, &gt, &ious);
    Ok(MetricsReport {
        ap: per_threshold.iter().sum::<f64>() / per_threshold.len() as f64,
        ap50: per_threshold[0],
        ap25: average_precision(pred, &gt, &ious, 0.25),
        m_cov: cov.m_cov,
        m_wcov: cov.m_wcov,
        m_prec: cov.m_prec,
        m_rec: cov.m_rec,
        per_class_ap,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PseudoLabelQuality {
    /// Labeled-point fraction of the whole cloud.
    pub proportion: f64,
    /// Fraction of labeled points whose instance label matches the
    /// ground-truth instance.
    pub accuracy: f64,
}

/// Point-level proportion and accuracy of the superpoint label state.
pub fn pseudo_label_quality(
    state: &LabelState,
    sp: &Superpointization,
    cloud: &PointCloud,
) -> Result<PseudoLabelQuality> {
    let Some(gt) = &cloud.gt_instance else {
        return Err(Error::Validation(
            "ground-truth instance labels are required".into(),
        ));
    };
    if state.instance_label.len() != sp.num_superpoints {
        return Err(Error::Dimension(
            "label state does not match the superpointization".into(),
        ));
    }
    let mut labeled = 0usize;
    let mut correct = 0usize;
    for s in 0..sp.num_superpoints {
        if matches!(state.source[s], LabelSource::None) {
            continue;
        }
        let label = state.instance_label[s]
            .ok_or_else(|| Error::Validation(format!("superpoint {s} labeled without an id")))?;
        for &p in &sp.member_lists[s] {
            labeled += 1;
            if gt[p] == label {
                correct += 1;
            }
        }
    }
    Ok(PseudoLabelQuality {
        proportion: labeled as f64 / cloud.len() as f64,
        accuracy: if labeled == 0 {
            0.0
        } else {
            correct as f64 / labeled as f64
        },
    })
}
