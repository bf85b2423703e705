use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use voxadapt::dataset::{simulate, write_dataset};
use voxadapt::pipeline::{self, Arm};
use voxadapt::report::to_text;
use voxadapt::RunConfig;

#[derive(Parser)]
#[command(name = "voxadapt", version, about = "Scene adaptation of a semantic segmenter via a fused 3D semantic map")]
struct Cli {
    /// JSON run configuration; defaults to the benchmark configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides the configuration's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the small smoke-test configuration when no --config is given.
    #[arg(long, global = true)]
    smoke: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmArg {
    Replay,
    Finetune,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes, trajectories and frames.
    Simulate,
    /// Train the initial segmenter on the pre-training scenes.
    Pretrain,
    /// Fuse a scene's initial predictions into a semantic voxel map.
    Fuse {
        #[arg(long)]
        scene: String,
    },
    /// Render pseudo-labels from a fused map.
    RenderPseudo {
        #[arg(long)]
        scene: String,
    },
    /// Adapt the pre-trained segmenter on rendered pseudo-labels.
    Adapt {
        #[arg(long)]
        scene: String,
        #[arg(long, value_enum, default_value = "replay")]
        arm: ArmArg,
    },
    /// Compare a directory of predicted label images with ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Run every stage and write the report.
    Pipeline {
        /// Restrict to one adaptation scene.
        #[arg(long)]
        scene: Option<String>,
        /// Number of map → adapt rounds.
        #[arg(long)]
        iterations: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if cli.smoke => RunConfig::smoke(42),
        None => RunConfig::benchmark(42),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let out = &cfg.output_dir;
            cfg.save(&out.join("config.json"))?;
            let data = simulate(&cfg).context("stage simulate")?;
            write_dataset(out, &data).context("stage simulate")?;
            println!(
                "wrote {} pre-training and {} adaptation scenes to {}",
                data.pretrain.len(),
                data.adaptation.len(),
                out.display()
            );
        }
        Command::Pretrain => {
            let cfg = load_config(cli)?;
            pipeline::cmd_pretrain(&cfg, &cfg.output_dir).context("stage pretrain")?;
            println!("wrote {}", cfg.output_dir.join("theta0.bin").display());
        }
        Command::Fuse { scene } => {
            let cfg = load_config(cli)?;
            let map = pipeline::cmd_fuse(&cfg, &cfg.output_dir, scene).context("stage fuse")?;
            println!(
                "fused {} blocks into {}",
                map.allocated_blocks(),
                pipeline::scene_dir(&cfg.output_dir, scene).display()
            );
        }
        Command::RenderPseudo { scene } => {
            let cfg = load_config(cli)?;
            let pseudo = pipeline::cmd_render_pseudo(&cfg, &cfg.output_dir, scene).context("stage render-pseudo")?;
            println!("rendered {} pseudo-label images", pseudo.len());
        }
        Command::Adapt { scene, arm } => {
            let cfg = load_config(cli)?;
            let arm = match arm {
                ArmArg::Replay => Arm::Replay,
                ArmArg::Finetune => Arm::Finetune,
            };
            pipeline::cmd_adapt(&cfg, &cfg.output_dir, scene, arm).context("stage adapt")?;
            println!("adapted parameters written to {}", pipeline::scene_dir(&cfg.output_dir, scene).display());
        }
        Command::Eval { pred, gt } => {
            let classes = match &cli.config {
                Some(p) => RunConfig::load(p)?.class_count,
                None => RunConfig::benchmark(0).class_count,
            };
            let cm = pipeline::cmd_eval(pred, gt, classes).context("stage eval")?;
            let text = pipeline::format_metrics(&cm);
            print!("{text}");
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out)?;
                std::fs::write(out.join("metrics.txt"), text)?;
            }
        }
        Command::Pipeline { scene, iterations } => {
            let mut cfg = load_config(cli)?;
            if let Some(k) = iterations {
                cfg.adapt.iterations = *k;
                cfg.validate().context("invalid configuration")?;
            }
            let report = pipeline::run_pipeline(&cfg, &cfg.output_dir, scene.as_deref())?;
            print!("{}", to_text(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
