//! Semantic-aware random-walk label propagation over the superpoint graph,
//! with class-agnostic ablation modes.

use serde::Deserialize;

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::overseg::SuperpointWeakLabels;
use crate::sparse::SparseMat;
use crate::spgraph::SuperpointGraph;

/// Default walk length t.
pub const DEFAULT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    /// Uniform weights over graph edges.
    RandomOnly,
    /// Affinity-weighted, class-agnostic.
    Affinity,
    /// Affinity-weighted and restricted to same-class edges.
    AffinitySemantic,
}

impl PropagationMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random_only" => Ok(PropagationMode::RandomOnly),
            "affinity" => Ok(PropagationMode::Affinity),
            "affinity_semantic" => Ok(PropagationMode::AffinitySemantic),
            other => Err(Error::Validation(format!("unknown propagation mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PropagationMode::RandomOnly => "random_only",
            PropagationMode::Affinity => "affinity",
            PropagationMode::AffinitySemantic => "affinity_semantic",
        }
    }
}

/// Which labeled nodes may donate their label during propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePolicy {
    AnnotatedOnly,
    AnnotatedAndPseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    Annotated,
    Pseudo,
    None,
}

#[derive(Debug, Clone)]
pub struct LabelState {
    pub instance_label: Vec<Option<i32>>,
    pub semantic_label: Vec<Option<i32>>,
    pub source: Vec<LabelSource>,
    /// For pseudo labels, the node the label was copied from (diagnostics).
    pub source_node: Vec<Option<usize>>,
}

impl LabelState {
    pub fn from_weak_labels(labels: &SuperpointWeakLabels) -> Self {
        let n = labels.annotated_mask.len();
        let source = (0..n)
            .map(|i| {
                if labels.annotated_mask[i] {
                    LabelSource::Annotated
                } else {
                    LabelSource::None
                }
            })
            .collect();
        LabelState {
            instance_label: labels.instance_label.clone(),
            semantic_label: labels.semantic_label.clone(),
            source,
            source_node: vec![None; n],
        }
    }

    pub fn num_labeled(&self) -> usize {
        self.source
            .iter()
            .filter(|s| !matches!(s, LabelSource::None))
            .count()
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        !matches!(self.source[i], LabelSource::None)
    }
}

/// Per-class row-stochastic transition matrices.
#[derive(Debug, Clone)]
pub struct TransitionSet {
    pub classes: Vec<i32>,
    pub mats: Vec<SparseMat>,
}

impl TransitionSet {
    pub fn for_class(&self, c: i32) -> Option<&SparseMat> {
        self.classes
            .iter()
            .position(|&x| x == c)
            .map(|i| &self.mats[i])
    }
}

/// The edge-weight matrix before row normalization. In `affinity_semantic`
/// mode an entry survives only when both endpoints carry class `c`.
pub fn weight_matrix(
    graph: &SuperpointGraph,
    affinity: &AffinityMatrix,
    semantics: &[i32],
    class: i32,
    mode: PropagationMode,
) -> Result<SparseMat> {
    let v = graph.num_nodes;
    if semantics.len() != v {
        return Err(Error::Dimension(format!("expected {v} semantic labels")));
    }
    if affinity.mat.n() != v {
        return Err(Error::Dimension("affinity size mismatch".into()));
    }
    if !semantics.contains(&class) {
        return Err(Error::Validation(format!(
            "class {class} not present in predicted semantics"
        )));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(v);
    for i in 0..v {
        let row: Vec<(usize, f64)> = match mode {
            PropagationMode::RandomOnly => graph
                .neighbors(i)
                .iter()
                .map(|&j| (j, 1.0))
                .collect(),
            PropagationMode::Affinity => affinity.mat.row(i).to_vec(),
            PropagationMode::AffinitySemantic => {
                if semantics[i] != class {
                    Vec::new()
                } else {
                    affinity
                        .mat
                        .row(i)
                        .iter()
                        .copied()
                        .filter(|&(j, _)| semantics[j] == class)
                        .collect()
                }
            }
        };
        rows.push(row);
    }
    SparseMat::from_rows(v, rows)
}

/// Row normalization; all-zero rows stay zero (no propagation from there).
pub fn transition_matrix(weights: &SparseMat) -> Result<SparseMat> {
    for i in 0..weights.n() {
        for &(j, w) in weights.row(i) {
            if w < 0.0 {
                return Err(Error::Validation(format!(
                    "negative weight at ({i}, {j})"
                )));
            }
        }
    }
    Ok(weights.row_normalized())
}

/// Builds one transition matrix per class present in `semantics`. The
/// class-agnostic modes share the same matrix across classes.
pub fn build_transitions(
    graph: &SuperpointGraph,
    affinity: &AffinityMatrix,
    semantics: &[i32],
    mode: PropagationMode,
) -> Result<TransitionSet> {
    let classes: Vec<i32> = {
        let set: std::collections::BTreeSet<i32> = semantics.iter().copied().collect();
        set.into_iter().collect()
    };
    let mats = match mode {
        PropagationMode::AffinitySemantic => classes
            .iter()
            .map(|&c| transition_matrix(&weight_matrix(graph, affinity, semantics, c, mode)?))
            .collect::<Result<Vec<_>>>()?,
        _ => {
            let shared = transition_matrix(&weight_matrix(
                graph, affinity, semantics, classes[0], mode,
            )?)?;
            vec![shared; classes.len()]
        }
    };
    Ok(TransitionSet { classes, mats })
}

/// One propagation pass: every unlabeled node takes the label of the
/// labeled node with the highest t-step walk probability of reaching it,
/// ties broken toward the smallest donor id. Annotated labels are fixed.
pub fn propagate_labels(
    transitions: &TransitionSet,
    semantics: &[i32],
    state: &LabelState,
    steps: usize,
    policy: SourcePolicy,
) -> Result<LabelState> {
    if steps == 0 {
        return Err(Error::Domain("propagation requires t >= 1".into()));
    }
    let v = semantics.len();
    if state.instance_label.len() != v {
        return Err(Error::Dimension("label state size mismatch".into()));
    }
    let powered: Vec<SparseMat> = transitions
        .mats
        .iter()
        .map(|t| t.pow(steps))
        .collect::<Result<_>>()?;

    let donors: Vec<usize> = (0..v)
        .filter(|&i| match state.source[i] {
            LabelSource::Annotated => true,
            LabelSource::Pseudo => policy == SourcePolicy::AnnotatedAndPseudo,
            LabelSource::None => false,
        })
        .collect();

    let mut next = state.clone();
    for j in 0..v {
        if state.is_labeled(j) {
            continue;
        }
        let class = semantics[j];
        let Some(pos) = transitions.classes.iter().position(|&c| c == class) else {
            continue;
        };
        let t_hat = &powered[pos];
        let mut best: Option<(f64, usize)> = None;
        for &i in &donors {
            let p = t_hat.get(i, j);
            if p > 0.0 && best.map_or(true, |(bp, _)| p > bp) {
                best = Some((p, i));
            }
        }
        if let Some((_, k)) = best {
            next.instance_label[j] = state.instance_label[k];
            next.semantic_label[j] = state.semantic_label[k];
            next.source[j] = LabelSource::Pseudo;
            next.source_node[j] = Some(k);
        }
    }
    Ok(next)
}
