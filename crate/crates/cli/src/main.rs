//! Pipeline driver: scene generation, per-stage commands, the end-to-end
//! run, and ablation sweeps. Every flag overrides its config-file key.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spseg::error::Error;
use spseg::eval;
use spseg::overseg;
use spseg::pcio::{self, CloudFormat};
use spseg::pipeline::{self, PipelineConfig, SweepGrid};
use spseg::propagate::PropagationMode;
use spseg::synth;

#[derive(Parser)]
#[command(name = "spseg", version, about = "Weakly supervised superpoint instance segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Pipeline config file (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// random_only | affinity | affinity_semantic
    #[arg(long)]
    mode: Option<String>,
    /// Random-walk length t
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    voxel_size: Option<f64>,
    /// Neighbors per superpoint in the k-NN graph
    #[arg(long)]
    k: Option<usize>,
    /// Worker threads (0 = automatic)
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<(), Error> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        if let Some(m) = &self.mode {
            cfg.mode = PropagationMode::parse(m)?;
        }
        if let Some(t) = self.steps {
            cfg.steps = t;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(v) = self.voxel_size {
            cfg.voxel_size = v;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(())
    }

    fn load(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes into the output directory
    Generate {
        #[command(flatten)]
        common: Overrides,
    },
    /// Oversegment one cloud file into superpoints
    Oversegment {
        /// Input cloud (ply-ascii or columnar-binary by config)
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Overrides,
    },
    /// Run the propagation rounds and report pseudo-label quality
    Propagate {
        #[command(flatten)]
        common: Overrides,
    },
    /// Run the full pipeline and report per-scene instance counts
    Cluster {
        #[command(flatten)]
        common: Overrides,
    },
    /// Re-score stored results against a labeled cloud
    Evaluate {
        /// Result stem, as written by `pipeline` (e.g. .../scene_0000/final)
        #[arg(long)]
        results: PathBuf,
        /// Labeled cloud file
        #[arg(long)]
        cloud: PathBuf,
        #[command(flatten)]
        common: Overrides,
    },
    /// Full run: metrics TSV on stdout, artifacts in the output directory
    Pipeline {
        #[command(flatten)]
        common: Overrides,
    },
    /// Cartesian ablation sweep; one aggregated table on stdout
    Sweep {
        /// Sweep grid file (TOML); a mode ablation grid by default
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        common: Overrides,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { common } => {
            let cfg = common.load()?;
            let dir = cfg
                .out_dir
                .clone()
                .ok_or_else(|| Error::Validation("generate requires --out".into()))?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let format = CloudFormat::parse(&cfg.scene_format)?;
            let ext = match format {
                CloudFormat::PlyAscii => "ply",
                CloudFormat::ColumnarBinary => "spc",
            };
            for i in 0..cfg.num_scenes {
                let mut spec = cfg.scene.clone();
                spec.rng_seed = cfg.seed.wrapping_add(i as u64);
                let cloud = synth::generate_scene(&spec)?;
                let path = dir.join(format!("scene_{i:04}.{ext}"));
                pcio::save_point_cloud(&path, &cloud, format)?;
                println!("{}\t{} points", path.display(), cloud.len());
            }
            Ok(())
        }
        Command::Oversegment { input, common } => {
            let cfg = common.load()?;
            let format = CloudFormat::parse(&cfg.scene_format)?;
            let cloud = pcio::load_point_cloud(&input, format)?;
            let sp = overseg::oversegment(&cloud, &cfg.overseg)?;
            let out = cfg
                .out_dir
                .clone()
                .unwrap_or_else(|| input.parent().unwrap_or(std::path::Path::new(".")).into());
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join("superpoints.txt");
            overseg::save_superpointization(&path, &sp)?;
            println!("{}\t{} superpoints", path.display(), sp.num_superpoints);
            Ok(())
        }
        Command::Propagate { common } => {
            let cfg = common.load()?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            println!("round\tproportion\taccuracy");
            for r in 0..cfg.rounds {
                if let Some(q) = outcome.mean_round_quality(r) {
                    println!("{}\t{}\t{}", r + 1, q.proportion, q.accuracy);
                }
            }
            Ok(())
        }
        Command::Cluster { common } => {
            let cfg = common.load()?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            println!("scene\tpseudo_instances\tclustered_instances");
            for s in &outcome.scenes {
                println!(
                    "{}\t{}\t{}",
                    s.scene_index,
                    s.pseudo_instances.instances.len(),
                    s.clustered.instances.len()
                );
            }
            Ok(())
        }
        Command::Evaluate { results, cloud, common } => {
            let cfg = common.load()?;
            let format = CloudFormat::parse(&cfg.scene_format)?;
            let cloud = pcio::load_point_cloud(&cloud, format)?;
            let set = pcio::read_results(&results)?;
            let report = eval::evaluate(&set, &cloud)?;
            print!("{}", report.to_tsv());
            Ok(())
        }
        Command::Pipeline { common } => {
            let cfg = common.load()?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            print!("{}", outcome.report.to_tsv());
            Ok(())
        }
        Command::Sweep { grid, common } => {
            let cfg = common.load()?;
            let grid = match grid {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    toml::from_str::<SweepGrid>(&text)
                        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
                }
                None => SweepGrid::default(),
            };
            let rows = pipeline::run_sweep(&cfg, &grid)?;
            print!("{}", pipeline::sweep_table(&rows));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
