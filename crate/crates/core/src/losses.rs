//! Loss evaluators: masked cross-entropy, L1 offset loss, the
//! discriminative embedding (affinity) loss with analytic gradients, the
//! volume loss, and the per-stage sums. Evaluation only; no trainer.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::instance::VolumeStats;

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub delta_v: f64,
    pub delta_d: f64,
    pub alpha: f64,
    pub class_count: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            delta_v: 0.1,
            delta_d: 1.5,
            alpha: 0.001,
            class_count: 2,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_d > self.delta_v && self.delta_v > 0.0) {
            return Err(Error::Validation("require delta_d > delta_v > 0".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Validation("alpha must be positive".into()));
        }
        Ok(())
    }
}

/// Mean cross-entropy over labeled superpoints, computed in
/// log-sum-exp form.
pub fn semantic_loss(logits: &[Vec<f64>], gt_class: &[Option<i32>]) -> Result<f64> {
    if logits.len() != gt_class.len() {
        return Err(Error::Dimension("logits and labels disagree in length".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (row, gt) in logits.iter().zip(gt_class) {
        let Some(class) = gt else { continue };
        let c = *class as usize;
        if c >= row.len() {
            return Err(Error::Validation(format!(
                "class {c} out of range for {} logits",
                row.len()
            )));
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
        total += lse - row[c];
        count += 1;
    }
    if count == 0 {
        return Err(Error::Domain("semantic loss over zero labeled superpoints".into()));
    }
    Ok(total / count as f64)
}

/// Mean L1 offset error over masked superpoints.
pub fn offset_loss(pred: &[Vec3], gt: &[Vec3], mask: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() || pred.len() != mask.len() {
        return Err(Error::Dimension("offset loss input lengths disagree".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..pred.len() {
        if !mask[i] {
            continue;
        }
        total += (0..3).map(|a| (pred[i][a] - gt[i][a]).abs()).sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return Err(Error::Domain("offset loss over zero masked superpoints".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityLoss {
    pub l_var: f64,
    pub l_dist: f64,
    pub l_reg: f64,
    pub l_aff: f64,
}

struct InstanceGroups {
    members: Vec<Vec<usize>>, // per instance, superpoint indices
}

fn group_instances(assignment: &[Option<usize>]) -> Result<InstanceGroups> {
    let count = assignment
        .iter()
        .flatten()
        .copied()
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    if count == 0 {
        return Err(Error::Domain("affinity loss requires at least one labeled instance".into()));
    }
    let mut members = vec![Vec::new(); count];
    for (s, a) in assignment.iter().enumerate() {
        if let Some(i) = a {
            members[*i].push(s);
        }
    }
    for (i, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::Domain(format!(
                "instance {i} has zero labeled superpoints"
            )));
        }
    }
    Ok(InstanceGroups { members })
}

fn embedding_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The pull/push/regularizer terms over labeled superpoints:
/// `l_aff = l_var + l_dist + alpha * l_reg`. `l_dist` is zero for a
/// single instance.
pub fn affinity_loss(
    embeddings: &[Vec<f64>],
    assignment: &[Option<usize>],
    cfg: &LossConfig,
) -> Result<AffinityLoss> {
    Ok(affinity_loss_grad(embeddings, assignment, cfg)?.0)
}

/// Loss plus analytic gradient w.r.t. every embedding row; unlabeled rows
/// get zero gradient.
pub fn affinity_loss_grad(
    embeddings: &[Vec<f64>],
    assignment: &[Option<usize>],
    cfg: &LossConfig,
) -> Result<(AffinityLoss, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if embeddings.len() != assignment.len() {
        return Err(Error::Dimension("embeddings and assignment disagree in length".into()));
    }
    let groups = group_instances(assignment)?;
    let num_instances = groups.members.len();
    let d = embeddings.first().map_or(0, Vec::len);
    if embeddings.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged embedding rows".into()));
    }

    let means: Vec<Vec<f64>> = groups
        .members
        .iter()
        .map(|members| {
            let mut mu = vec![0.0; d];
            for &s in members {
                for c in 0..d {
                    mu[c] += embeddings[s][c];
                }
            }
            mu.iter_mut().for_each(|v| *v /= members.len() as f64);
            mu
        })
        .collect();

    let inv_i = 1.0 / num_instances as f64;
    let mut grad = vec![vec![0.0; d]; embeddings.len()];
    // gradient w.r.t. each mean, chained to members at the end
    let mut mean_grad = vec![vec![0.0; d]; num_instances];

    // pull term
    let mut l_var = 0.0;
    for (i, members) in groups.members.iter().enumerate() {
        let inv_n = 1.0 / members.len() as f64;
        for &s in members {
            let diff: Vec<f64> = (0..d).map(|c| means[i][c] - embeddings[s][c]).collect();
            let dist = embedding_norm(&diff);
            let hinge = (dist - cfg.delta_v).max(0.0);
            l_var += inv_i * inv_n * hinge * hinge;
            if hinge > 0.0 && dist > 0.0 {
                let coef = inv_i * inv_n * 2.0 * hinge / dist;
                for c in 0..d {
                    // d dist / d x_s = -(mu - x)/dist ; d dist / d mu = (mu - x)/dist
                    grad[s][c] += coef * (-diff[c]);
                    mean_grad[i][c] += coef * diff[c];
                }
            }
        }
    }

    // push term
    let mut l_dist = 0.0;
    if num_instances >= 2 {
        let norm = 1.0 / (num_instances * (num_instances - 1)) as f64;
        for a in 0..num_instances {
            for b in 0..num_instances {
                if a == b {
                    continue;
                }
                let diff: Vec<f64> = (0..d).map(|c| means[a][c] - means[b][c]).collect();
                let dist = embedding_norm(&diff);
                let hinge = (2.0 * cfg.delta_d - dist).max(0.0);
                l_dist += norm * hinge * hinge;
                if hinge > 0.0 && dist > 0.0 {
                    let coef = norm * 2.0 * hinge * (-1.0) / dist;
                    for c in 0..d {
                        mean_grad[a][c] += coef * diff[c];
                        mean_grad[b][c] -= coef * diff[c];
                    }
                }
            }
        }
    }

    // regularizer
    let mut l_reg = 0.0;
    for (i, mu) in means.iter().enumerate() {
        let n = embedding_norm(mu);
        l_reg += inv_i * n;
        if n > 0.0 {
            for c in 0..d {
                mean_grad[i][c] += cfg.alpha * inv_i * mu[c] / n;
            }
        }
    }

    // chain mean gradients to members: d mu_i / d x_s = 1/n_i
    for (i, members) in groups.members.iter().enumerate() {
        let inv_n = 1.0 / members.len() as f64;
        for &s in members {
            for c in 0..d {
                grad[s][c] += inv_n * mean_grad[i][c];
            }
        }
    }

    let loss = AffinityLoss {
        l_var,
        l_dist,
        l_reg,
        l_aff: l_var + l_dist + cfg.alpha * l_reg,
    };
    Ok((loss, grad))
}

/// Mean L1 error between per-superpoint volume predictions and the stats of
/// the pseudo instance each labeled superpoint belongs to.
pub fn volume_loss(
    pred_u: &[f64],
    pred_r: &[f64],
    assignment: &[Option<usize>],
    stats: &VolumeStats,
) -> Result<f64> {
    if pred_u.len() != pred_r.len() || pred_u.len() != assignment.len() {
        return Err(Error::Dimension("volume loss input lengths disagree".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, a) in assignment.iter().enumerate() {
        let Some(j) = a else { continue };
        if *j >= stats.voxel_counts.len() {
            return Err(Error::Domain(format!(
                "superpoint {s} references instance {j} outside the stats"
            )));
        }
        total += (pred_u[s] - stats.voxel_counts[*j]).abs() + (pred_r[s] - stats.radii[*j]).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::Domain("volume loss over zero labeled superpoints".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageParts {
    pub semantic: Option<f64>,
    pub offset: Option<f64>,
    pub affinity: Option<f64>,
    pub volume: Option<f64>,
}

/// Stage 1: semantic + offset + affinity. Stage 2: semantic + offset + volume.
pub fn stage_loss(stage: Stage, parts: &StageParts) -> Result<f64> {
    let need = |x: Option<f64>, name: &str| {
        x.ok_or_else(|| Error::Validation(format!("stage loss is missing the {name} part")))
    };
    let sem = need(parts.semantic, "semantic")?;
    let off = need(parts.offset, "offset")?;
    match stage {
        Stage::One => Ok(sem + off + need(parts.affinity, "affinity")?),
        Stage::Two => Ok(sem + off + need(parts.volume, "volume")?),
    }
}

/// Max relative error between the analytic affinity-loss gradient and
/// central finite differences, over entries with non-negligible analytic
/// gradient.
pub fn grad_check(
    embeddings: &[Vec<f64>],
    assignment: &[Option<usize>],
    cfg: &LossConfig,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Domain("finite-difference step must be positive".into()));
    }
    let (_, grad) = affinity_loss_grad(embeddings, assignment, cfg)?;
    let mut work = embeddings.to_vec();
    let mut max_rel = 0.0_f64;
    for s in 0..embeddings.len() {
        if assignment[s].is_none() {
            continue;
        }
        for c in 0..embeddings[s].len() {
            let orig = work[s][c];
            work[s][c] = orig + h;
            let plus = affinity_loss(&work, assignment, cfg)?.l_aff;
            work[s][c] = orig - h;
            let minus = affinity_loss(&work, assignment, cfg)?.l_aff;
            work[s][c] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grad[s][c];
            if analytic.abs() > 1e-8 {
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
                max_rel = max_rel.max(rel);
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semantic_loss_saturated_and_uniform() {
        // large-margin correct logits drive the loss to ~0
        let logits = vec![vec![20.0, 0.0, 0.0], vec![0.0, 20.0, 0.0]];
        let gt = vec![Some(0), Some(1)];
        assert!(semantic_loss(&logits, &gt).unwrap() <= 1e-3);

        // uniform logits, C = 4 -> ln 4
        let logits = vec![vec![1.0; 4]; 3];
        let gt = vec![Some(0), Some(3), None];
        assert!((semantic_loss(&logits, &gt).unwrap() - 4.0_f64.ln()).abs() < 1e-12);

        // zero labeled superpoints
        assert!(semantic_loss(&logits, &[None, None, None]).is_err());
    }

    #[test]
    fn semantic_loss_matches_scalar_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let logits: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let gt = vec![Some(0), None, Some(2), Some(1), None];
        // straight-line oracle: softmax then -ln p
        let mut want = 0.0;
        let mut k = 0;
        for (row, g) in logits.iter().zip(&gt) {
            if let Some(c) = g {
                let z: f64 = row.iter().map(|l| l.exp()).sum();
                want += -(row[*c as usize].exp() / z).ln();
                k += 1;
            }
        }
        want /= k as f64;
        assert!((semantic_loss(&logits, &gt).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn offset_loss_cases() {
        let pred = vec![[1.0, -2.0, 0.5]];
        let gt = vec![[0.0; 3]];
        assert!((offset_loss(&pred, &gt, &[true]).unwrap() - 3.5).abs() < 1e-12);
        assert_eq!(offset_loss(&pred, &pred, &[true]).unwrap(), 0.0);
        assert!(offset_loss(&pred, &gt, &[false]).is_err());

        // random masked case vs scalar loop
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pred: Vec<Vec3> = (0..6)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let gt: Vec<Vec3> = (0..6)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let mask = [true, false, true, true, false, true];
        let mut want = 0.0;
        let mut k = 0;
        for i in 0..6 {
            if mask[i] {
                want += (0..3).map(|a| (pred[i][a] - gt[i][a]).abs()).sum::<f64>();
                k += 1;
            }
        }
        want /= k as f64;
        assert!((offset_loss(&pred, &gt, &mask).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn affinity_loss_inactive_hinges() {
        // every embedding equals its instance mean, means at the origin
        let embeddings = vec![vec![0.0, 0.0]; 4];
        let assignment = vec![Some(0), Some(0), Some(0), Some(0)];
        let cfg = LossConfig::default();
        let loss = affinity_loss(&embeddings, &assignment, &cfg).unwrap();
        assert_eq!(loss.l_var, 0.0);
        assert_eq!(loss.l_reg, 0.0);
        assert_eq!(loss.l_dist, 0.0); // single instance
    }

    #[test]
    fn affinity_push_inactive_beyond_margin() {
        // two means at distance >= 2 * delta_d
        let cfg = LossConfig::default();
        let far = 2.0 * cfg.delta_d + 0.5;
        let embeddings = vec![vec![0.0, 0.0], vec![far, 0.0]];
        let assignment = vec![Some(0), Some(1)];
        let loss = affinity_loss(&embeddings, &assignment, &cfg).unwrap();
        assert_eq!(loss.l_dist, 0.0);
    }

    #[test]
    fn affinity_push_hand_value() {
        // means at distance 1.0, delta_d = 1.5 -> l_dist = (3 - 1)^2 = 4.0
        let cfg = LossConfig::default();
        let embeddings = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let assignment = vec![Some(0), Some(1)];
        let loss = affinity_loss(&embeddings, &assignment, &cfg).unwrap();
        assert!((loss.l_dist - 4.0).abs() < 1e-12, "l_dist = {}", loss.l_dist);
    }

    #[test]
    fn affinity_matches_direct_double_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let embeddings: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let assignment: Vec<Option<usize>> = vec![
            Some(0),
            Some(0),
            Some(1),
            Some(1),
            Some(2),
            Some(2),
            Some(2),
            None,
        ];
        let cfg = LossConfig::default();
        let loss = affinity_loss(&embeddings, &assignment, &cfg).unwrap();

        // independent straight-line evaluation
        let hinge = |x: f64| x.max(0.0);
        let d = 4;
        let mut means = vec![vec![0.0; d]; 3];
        let mut counts = [0usize; 3];
        for (s, a) in assignment.iter().enumerate() {
            if let Some(i) = a {
                counts[*i] += 1;
                for c in 0..d {
                    means[*i][c] += embeddings[s][c];
                }
            }
        }
        for i in 0..3 {
            for c in 0..d {
                means[i][c] /= counts[i] as f64;
            }
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut var = 0.0;
        for (s, a) in assignment.iter().enumerate() {
            if let Some(i) = a {
                let diff: Vec<f64> =
                    (0..d).map(|c| means[*i][c] - embeddings[s][c]).collect();
                var += hinge(norm(&diff) - cfg.delta_v).powi(2) / (3.0 * counts[*i] as f64);
            }
        }
        let mut dist = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    let diff: Vec<f64> = (0..d).map(|c| means[a][c] - means[b][c]).collect();
                    dist += hinge(2.0 * cfg.delta_d - norm(&diff)).powi(2) / 6.0;
                }
            }
        }
        let reg: f64 = means.iter().map(|m| norm(m)).sum::<f64>() / 3.0;
        assert!((loss.l_var - var).abs() < 1e-12);
        assert!((loss.l_dist - dist).abs() < 1e-12);
        assert!((loss.l_reg - reg).abs() < 1e-12);
        assert!((loss.l_aff - (var + dist + cfg.alpha * reg)).abs() < 1e-12);
    }

    #[test]
    fn empty_instance_rejected() {
        let embeddings = vec![vec![0.0; 2]; 2];
        // instance 0 unused while instance 1 appears
        let assignment = vec![Some(1), Some(1)];
        assert!(affinity_loss(&embeddings, &assignment, &LossConfig::default()).is_err());
    }

    #[test]
    fn volume_loss_cases() {
        let stats = VolumeStats {
            voxel_counts: vec![10.0],
            radii: vec![1.0],
        };
        let assignment = vec![Some(0)];
        assert_eq!(
            volume_loss(&[10.0], &[1.0], &assignment, &stats).unwrap(),
            0.0
        );
        assert!(
            (volume_loss(&[12.0], &[1.5], &assignment, &stats).unwrap() - 2.5).abs() < 1e-12
        );
        assert!(volume_loss(&[1.0], &[1.0], &[None], &stats).is_err());

        // random case vs scalar loop
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let stats = VolumeStats {
            voxel_counts: vec![rng.gen_range(1.0..20.0), rng.gen_range(1.0..20.0)],
            radii: vec![rng.gen::<f64>(), rng.gen::<f64>()],
        };
        let assignment = vec![Some(0), Some(1), None, Some(0)];
        let u: Vec<f64> = (0..4).map(|_| rng.gen_range(1.0..20.0)).collect();
        let r: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
        let mut want = 0.0;
        let mut k = 0;
        for (s, a) in assignment.iter().enumerate() {
            if let Some(j) = a {
                want += (u[s] - stats.voxel_counts[*j]).abs() + (r[s] - stats.radii[*j]).abs();
                k += 1;
            }
        }
        want /= k as f64;
        assert!((volume_loss(&u, &r, &assignment, &stats).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn stage_loss_sums() {
        let parts = StageParts {
            semantic: Some(1.0),
            offset: Some(2.0),
            affinity: Some(3.0),
            volume: Some(4.0),
        };
        assert_eq!(stage_loss(Stage::One, &parts).unwrap(), 6.0);
        assert_eq!(stage_loss(Stage::Two, &parts).unwrap(), 7.0);
        let zeros = StageParts {
            semantic: Some(0.0),
            offset: Some(0.0),
            affinity: Some(0.0),
            volume: Some(0.0),
        };
        assert_eq!(stage_loss(Stage::One, &zeros).unwrap(), 0.0);
        let missing = StageParts {
            semantic: Some(1.0),
            offset: Some(1.0),
            ..Default::default()
        };
        assert!(stage_loss(Stage::One, &missing).is_err());
        assert!(stage_loss(Stage::Two, &missing).is_err());
    }

    #[test]
    fn grad_check_random_configuration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        // 8 superpoints, 2 instances, d = 4; spread clusters so no pair
        // sits on a hinge boundary
        let embeddings: Vec<Vec<f64>> = (0..8)
            .map(|s| {
                let base = if s < 4 { 0.0 } else { 1.2 };
                (0..4)
                    .map(|_| base + rng.gen_range(-0.3..0.3))
                    .collect()
            })
            .collect();
        let assignment: Vec<Option<usize>> =
            (0..8).map(|s| Some(if s < 4 { 0 } else { 1 })).collect();
        let err = grad_check(&embeddings, &assignment, &LossConfig::default(), 1e-5).unwrap();
        assert!(err < 1e-5, "grad check relative error {err}");
    }

    #[test]
    fn grad_zero_when_hinges_inactive() {
        // var hinge inactive (points at their mean), dist hinge inactive
        // (means far apart): only the regularizer contributes
        let cfg = LossConfig::default();
        let far = 2.0 * cfg.delta_d + 1.0;
        let embeddings = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![far, 0.0], vec![far, 0.0]];
        let assignment = vec![Some(0), Some(0), Some(1), Some(1)];
        let (loss, grad) = affinity_loss_grad(&embeddings, &assignment, &cfg).unwrap();
        assert_eq!(loss.l_var, 0.0);
        assert_eq!(loss.l_dist, 0.0);
        // instance 0's mean is the origin: reg gradient vanishes there
        assert_eq!(grad[0], vec![0.0, 0.0]);
        // instance 1's reg gradient is alpha / I along +x split over members
        let expect = cfg.alpha / 2.0 / 2.0;
        assert!((grad[2][0] - expect).abs() < 1e-12);
        assert!((grad[2][1]).abs() < 1e-12);
    }

    #[test]
    fn losses_permutation_invariant() {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let embeddings: Vec<Vec<f64>> = (0..6)
            .map(|s| vec![s as f64 * 0.3, 1.0 - s as f64 * 0.1])
            .collect();
        let assignment: Vec<Option<usize>> =
            vec![Some(0), Some(0), Some(1), Some(1), Some(1), None];
        let cfg = LossConfig::default();
        let base = affinity_loss(&embeddings, &assignment, &cfg).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let pe: Vec<Vec<f64>> = perm.iter().map(|&i| embeddings[i].clone()).collect();
        let pa: Vec<Option<usize>> = perm.iter().map(|&i| assignment[i]).collect();
        let permuted = affinity_loss(&pe, &pa, &cfg).unwrap();
        assert!((base.l_aff - permuted.l_aff).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance_of_var_and_dist_only() {
        let embeddings = vec![vec![0.1, 0.2], vec![0.4, 0.1], vec![1.5, 1.2], vec![1.1, 1.6]];
        let assignment = vec![Some(0), Some(0), Some(1), Some(1)];
        let cfg = LossConfig::default();
        let base = affinity_loss(&embeddings, &assignment, &cfg).unwrap();
        let shifted: Vec<Vec<f64>> = embeddings
            .iter()
            .map(|r| vec![r[0] + 10.0, r[1] - 3.0])
            .collect();
        let moved = affinity_loss(&shifted, &assignment, &cfg).unwrap();
        assert!((base.l_var - moved.l_var).abs() < 1e-9);
        assert!((base.l_dist - moved.l_dist).abs() < 1e-9);
        assert!(moved.l_reg > base.l_reg); // the regularizer is not invariant
    }
}
