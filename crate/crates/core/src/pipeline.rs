//! End-to-end orchestration: scene acquisition, oversegmentation, weak-label
//! lifting, prediction, propagation rounds, clustering, and metrics. Scenes
//! run in parallel; everything downstream of the config seed is
//! deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::affinity::{self, AffinityParams};
use crate::error::{Error, Result};
use crate::eval::{self, MetricsReport, PseudoLabelQuality};
use crate::instance::{self, InstanceSet};
use crate::overseg::{self, OversegParams};
use crate::pcio::{self, CloudFormat, PointCloud};
use crate::propagate::{self, LabelState, PropagationMode, SourcePolicy};
use crate::provider::{self, NoiseSpec};
use crate::spgraph;
use crate::synth::{self, SceneSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Synthetic scene template; `rng_seed` is re-derived per scene.
    pub scene: SceneSpec,
    pub num_scenes: usize,
    /// When set, scenes come from these files instead of the generator.
    pub scene_files: Vec<PathBuf>,
    pub scene_format: String,
    pub overseg: OversegParams,
    pub k: usize,
    /// Affinity parameter file; fresh identity-φ parameters otherwise.
    pub affinity_params: Option<PathBuf>,
    pub embed_dim: usize,
    pub mode: PropagationMode,
    pub steps: usize,
    pub rounds: usize,
    pub source_policy: SourcePolicy,
    pub lambda: f64,
    pub beta: f64,
    pub voxel_size: f64,
    pub noise: NoiseSpec,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    /// 0 picks the rayon default.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene: SceneSpec::default(),
            num_scenes: 1,
            scene_files: Vec::new(),
            scene_format: "columnar-binary".into(),
            overseg: OversegParams::default(),
            k: spgraph::DEFAULT_K,
            affinity_params: None,
            embed_dim: provider::DEFAULT_EMBED_DIM,
            mode: PropagationMode::AffinitySemantic,
            steps: propagate::DEFAULT_STEPS,
            rounds: 1,
            source_policy: SourcePolicy::AnnotatedAndPseudo,
            lambda: instance::DEFAULT_LAMBDA,
            beta: instance::DEFAULT_BETA,
            voxel_size: pcio::DEFAULT_VOXEL_SIZE,
            noise: NoiseSpec::default(),
            out_dir: None,
            seed: 7,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.scene_files.is_empty() && self.num_scenes == 0 {
            return Err(Error::Validation("num_scenes must be at least 1".into()));
        }
        for f in &self.scene_files {
            if !f.exists() {
                return Err(Error::Validation(format!(
                    "scene file {} does not exist",
                    f.display()
                )));
            }
        }
        CloudFormat::parse(&self.scene_format)?;
        if let Some(p) = &self.affinity_params {
            if !p.exists() {
                return Err(Error::Validation(format!(
                    "affinity parameter file {} does not exist",
                    p.display()
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Validation("steps must be at least 1".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Validation("embed_dim must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.beta > 0.0 && self.voxel_size > 0.0) {
            return Err(Error::Validation(
                "lambda, beta, and voxel_size must be positive".into(),
            ));
        }
        self.noise.validate()?;
        Ok(())
    }

    fn num_runs(&self) -> usize {
        if self.scene_files.is_empty() {
            self.num_scenes
        } else {
            self.scene_files.len()
        }
    }
}

/// splitmix64 over (seed, stream tags); decorrelates per-scene and
/// per-round randomness.
fn derive_seed(seed: u64, scene: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(scene.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SceneOutcome {
    pub scene_index: usize,
    pub report: MetricsReport,
    /// Point-level label quality before any propagation.
    pub baseline_quality: PseudoLabelQuality,
    /// One entry per completed propagation round.
    pub round_quality: Vec<PseudoLabelQuality>,
    pub pseudo_instances: InstanceSet,
    pub clustered: InstanceSet,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: MetricsReport,
    pub scenes: Vec<SceneOutcome>,
}

impl PipelineOutcome {
    /// Mean pseudo-label quality after round `r` (0-based) across scenes.
    pub fn mean_round_quality(&self, r: usize) -> Option<PseudoLabelQuality> {
        let rows: Vec<&PseudoLabelQuality> = self
            .scenes
            .iter()
            .filter_map(|s| s.round_quality.get(r))
            .collect();
        if rows.len() != self.scenes.len() {
            return None;
        }
        let n = rows.len() as f64;
        Some(PseudoLabelQuality {
            proportion: rows.iter().map(|q| q.proportion).sum::<f64>() / n,
            accuracy: rows.iter().map(|q| q.accuracy).sum::<f64>() / n,
        })
    }
}

/// Semantics used for propagation and clustering: the annotated or
/// propagated label where one exists, the predicted class elsewhere.
fn effective_semantics(state: &LabelState, predicted: &[i32]) -> Vec<i32> {
    predicted
        .iter()
        .enumerate()
        .map(|(s, &p)| state.semantic_label[s].unwrap_or(p))
        .collect()
}

fn acquire_cloud(cfg: &PipelineConfig, index: usize) -> Result<PointCloud> {
    if cfg.scene_files.is_empty() {
        let mut spec = cfg.scene.clone();
        spec.rng_seed = derive_seed(cfg.seed, index as u64, 0);
        synth::generate_scene(&spec)
    } else {
        let format = CloudFormat::parse(&cfg.scene_format)?;
        pcio::load_point_cloud(&cfg.scene_files[index], format)
    }
}

fn run_scene(cfg: &PipelineConfig, params: &AffinityParams, index: usize) -> Result<SceneOutcome> {
    let stage = |e: Error, name: &'static str| e.in_stage(name);

    let cloud = acquire_cloud(cfg, index).map_err(|e| stage(e, "scene"))?;
    let ann = synth::sample_weak_labels(&cloud, derive_seed(cfg.seed, index as u64, 1))
        .map_err(|e| stage(e, "annotate"))?;
    let sp = overseg::oversegment(&cloud, &cfg.overseg).map_err(|e| stage(e, "oversegment"))?;
    let weak = overseg::lift_labels(&sp, &ann).map_err(|e| stage(e, "lift"))?;
    let graph = spgraph::build_graph(&sp.centroids, cfg.k).map_err(|e| stage(e, "graph"))?;

    let mut state = LabelState::from_weak_labels(&weak);
    let baseline_quality =
        eval::pseudo_label_quality(&state, &sp, &cloud).map_err(|e| stage(e, "quality"))?;

    let predict = |round: u64| -> Result<provider::PredictionBundle> {
        let noise = NoiseSpec {
            rng_seed: derive_seed(cfg.seed, index as u64, 2 + round),
            ..cfg.noise
        };
        provider::oracle_predictions(&cloud, &sp, &noise, cfg.voxel_size, cfg.embed_dim)
            .map_err(|e| stage(e, "predict"))
    };

    let mut bundle = predict(0)?;
    let mut round_quality = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        if round > 0 {
            bundle = predict(round as u64)?;
        }
        let aff = affinity::compute_affinity(&bundle.embeddings, &graph, &sp.centroids, params)
            .map_err(|e| stage(e, "affinity"))?;
        let semantics = effective_semantics(&state, &bundle.semantics);
        let transitions = propagate::build_transitions(&graph, &aff, &semantics, cfg.mode)
            .map_err(|e| stage(e, "transitions"))?;
        state = propagate::propagate_labels(
            &transitions,
            &semantics,
            &state,
            cfg.steps,
            cfg.source_policy,
        )
        .map_err(|e| stage(e, "propagate"))?;
        round_quality.push(
            eval::pseudo_label_quality(&state, &sp, &cloud).map_err(|e| stage(e, "quality"))?,
        );
    }

    // stage-1 outputs: pseudo instances from shifted coordinates
    let shifted = instance::shift_superpoints(&sp.centroids, &bundle.offsets)
        .map_err(|e| stage(e, "shift"))?;
    let semantics = effective_semantics(&state, &bundle.semantics);
    let pseudo = instance::vote_pseudo_instances(&shifted, &semantics, &state, &sp)
        .map_err(|e| stage(e, "vote"))?;

    // stage-2 output: volume-aware clustering with predicted volumes
    let occupancy = instance::superpoint_voxel_occupancy(&cloud, &sp, cfg.voxel_size)
        .map_err(|e| stage(e, "occupancy"))?;
    let clustered = instance::volume_aware_cluster(
        &graph,
        &shifted,
        &semantics,
        &bundle.voxel_pred,
        &bundle.radius_pred,
        &occupancy,
        &sp,
        cfg.lambda,
        cfg.beta,
    )
    .map_err(|e| stage(e, "cluster"))?;

    let report = eval::evaluate(&clustered, &cloud).map_err(|e| stage(e, "evaluate"))?;

    if let Some(dir) = &cfg.out_dir {
        let scene_dir = dir.join(format!("scene_{index:04}"));
        fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
        let write = || -> Result<()> {
            pcio::save_point_cloud(
                &scene_dir.join("cloud.spc"),
                &cloud,
                CloudFormat::ColumnarBinary,
            )?;
            overseg::save_superpointization(&scene_dir.join("superpoints.txt"), &sp)?;
            graph.dump_edge_list(&scene_dir.join("edges.txt"))?;
            provider::save_predictions(&scene_dir.join("predictions.txt"), &bundle)?;
            pcio::write_results(&scene_dir.join("final"), cloud.len(), &clustered, &report)?;
            let mut rounds_tsv = String::from("round\tproportion\taccuracy\n");
            rounds_tsv.push_str(&format!(
                "0\t{}\t{}\n",
                baseline_quality.proportion, baseline_quality.accuracy
            ));
            for (r, q) in round_quality.iter().enumerate() {
                rounds_tsv.push_str(&format!("{}\t{}\t{}\n", r + 1, q.proportion, q.accuracy));
            }
            let rounds_path = scene_dir.join("rounds.tsv");
            fs::write(&rounds_path, rounds_tsv).map_err(|e| Error::io(&rounds_path, e))?;
            Ok(())
        };
        write().map_err(|e| stage(e, "artifacts"))?;
    }

    Ok(SceneOutcome {
        scene_index: index,
        report,
        baseline_quality,
        round_quality,
        pseudo_instances: pseudo,
        clustered,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let params = match &cfg.affinity_params {
        Some(path) => AffinityParams::load(path).map_err(|e| e.in_stage("affinity-params"))?,
        None => AffinityParams::identity_default(
            cfg.embed_dim,
            affinity::DEFAULT_HIDDEN,
            derive_seed(cfg.seed, u64::MAX, 0),
        ),
    };
    if params.dim() != cfg.embed_dim {
        return Err(Error::Validation(format!(
            "affinity parameters are for dimension {}, config says {}",
            params.dim(),
            cfg.embed_dim
        )));
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        params
            .save(&dir.join("affinity_params.txt"))
            .map_err(|e| e.in_stage("artifacts"))?;
    }

    let indices: Vec<usize> = (0..cfg.num_runs()).collect();
    let run_all = || -> Result<Vec<SceneOutcome>> {
        indices
            .par_iter()
            .map(|&i| run_scene(cfg, &params, i))
            .collect()
    };
    let mut scenes = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
        pool.install(run_all)?
    } else {
        run_all()?
    };
    scenes.sort_by_key(|s| s.scene_index);

    let reports: Vec<MetricsReport> = scenes.iter().map(|s| s.report.clone()).collect();
    let report = MetricsReport::mean(&reports)?;
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("metrics.tsv");
        fs::write(&path, report.to_tsv()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(PipelineOutcome { report, scenes })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub modes: Vec<PropagationMode>,
    pub steps: Vec<usize>,
    pub rounds: Vec<usize>,
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            modes: vec![
                PropagationMode::RandomOnly,
                PropagationMode::Affinity,
                PropagationMode::AffinitySemantic,
            ],
            steps: vec![propagate::DEFAULT_STEPS],
            rounds: vec![1],
            k: vec![spgraph::DEFAULT_K],
            lambda: vec![instance::DEFAULT_LAMBDA],
            beta: vec![instance::DEFAULT_BETA],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub mode: PropagationMode,
    pub steps: usize,
    pub rounds: usize,
    pub k: usize,
    pub lambda: f64,
    pub beta: f64,
    pub report: MetricsReport,
    pub final_quality: Option<PseudoLabelQuality>,
}

/// Runs the full cartesian grid over one base config; scene artifacts are
/// suppressed, only the aggregated table survives.
pub fn run_sweep(base: &PipelineConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.modes.is_empty()
        || grid.steps.is_empty()
        || grid.rounds.is_empty()
        || grid.k.is_empty()
        || grid.lambda.is_empty()
        || grid.beta.is_empty()
    {
        return Err(Error::Validation("every sweep axis needs at least one value".into()));
    }
    let mut rows = Vec::new();
    for &mode in &grid.modes {
        for &steps in &grid.steps {
            for &rounds in &grid.rounds {
                for &k in &grid.k {
                    for &lambda in &grid.lambda {
                        for &beta in &grid.beta {
                            let mut cfg = base.clone();
                            cfg.mode = mode;
                            cfg.steps = steps;
                            cfg.rounds = rounds;
                            cfg.k = k;
                            cfg.lambda = lambda;
                            cfg.beta = beta;
                            cfg.out_dir = None;
                            let outcome = run_pipeline(&cfg)?;
                            let final_quality = rounds
                                .checked_sub(1)
                                .and_then(|r| outcome.mean_round_quality(r));
                            rows.push(SweepRow {
                                mode,
                                steps,
                                rounds,
                                k,
                                lambda,
                                beta,
                                report: outcome.report,
                                final_quality,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "mode\tsteps\trounds\tk\tlambda\tbeta\tap\tap50\tap25\tmcov\tmprec\tmrec\tproportion\taccuracy\n",
    );
    for r in rows {
        let (prop, acc) = match &r.final_quality {
            Some(q) => (format!("{}", q.proportion), format!("{}", q.accuracy)),
            None => ("-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{prop}\t{acc}\n",
            r.mode.as_str(),
            r.steps,
            r.rounds,
            r.k,
            r.lambda,
            r.beta,
            r.report.ap,
            r.report.ap50,
            r.report.ap25,
            r.report.m_cov,
            r.report.m_prec,
            r.report.m_rec,
        ));
    }
    out
}
