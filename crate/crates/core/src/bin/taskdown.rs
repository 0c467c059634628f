//! Command-line front end for the experiment harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taskdown::harness::{
    run_bench, run_eval, run_pretrain, run_robustness, run_sample, run_sweep, run_train, BenchConfig, RunConfig,
    RunReport, SampleMethod, SampleRequest,
};
use taskdown::heads::TaskKind;

#[derive(Parser)]
#[command(name = "taskdown", version, about = "Task-oriented point cloud downsampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a task head on full-resolution clouds.
    Pretrain(RunArgs),
    /// Train a sampler against a pretrained head and evaluate it.
    Train(RunArgs),
    /// Re-evaluate a trained sampler checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated output sizes; defaults to the configured ones.
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downsample one `.xyz` cloud.
    Sample {
        #[arg(long)]
        input: PathBuf,
        /// One of rs, random, voxel, fps or learned.
        #[arg(long, default_value = "fps")]
        method: SampleMethod,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write the sparse sampling matrix as "row col value" triplets.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time random, farthest point and learned sampling over output sizes.
    Bench {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512")]
        m_grid: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        shapes: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification accuracy under Gaussian input noise.
    Robustness {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.05,0.1")]
        levels: Vec<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one sampler per (alpha, tau_min) pair.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.2,2")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        tau_mins: Option<Vec<f64>>,
    },
}

/// Run configuration: a TOML file or task defaults, then flag overrides.
#[derive(Args)]
struct RunArgs {
    /// Base configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// classification, reconstruction_mlp, reconstruction_mfold or registration.
    #[arg(long, required_unless_present = "config")]
    task: Option<TaskKind>,
    /// Start from the small synthetic settings instead of full-size defaults.
    #[arg(long)]
    toy: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    flexible: bool,
    #[arg(long, value_delimiter = ',')]
    m_set: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau_min: Option<f64>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    joint: bool,
    /// With --joint, start the head from random weights.
    #[arg(long)]
    from_scratch: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    noise_level: Option<f64>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    head_checkpoint: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    eval_m: Option<Vec<usize>>,
}

impl RunArgs {
    fn resolve(&self) -> taskdown::Result<RunConfig> {
        let mut c = match (&self.config, self.task) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(task)) if self.toy => RunConfig::toy(task),
            (None, Some(task)) => RunConfig::for_task(task),
            (None, None) => unreachable!("clap requires --task without --config"),
        };
        c.seed = self.seed;
        macro_rules! set {
            ($($field:ident <- $flag:ident),* $(,)?) => {
                $(if let Some(v) = &self.$flag { c.$field = v.clone(); })*
            };
        }
        set!(
            n <- n, m <- m, m_set <- m_set, alpha <- alpha, tau_min <- tau_min,
            lr_start <- lr_start, lr_end <- lr_end, epochs <- epochs, batch_size <- batch_size,
            sparsify_threshold <- threshold, noise_level <- noise_level,
            pretrain_epochs <- pretrain_epochs, eval_m <- eval_m,
        );
        if let Some(path) = &self.head_checkpoint {
            c.head_checkpoint = Some(path.clone());
        }
        c.flexible |= self.flexible;
        c.joint_training |= self.joint;
        c.head_from_scratch |= self.from_scratch;
        c.validate()?;
        Ok(c)
    }
}

fn summarize(report: &RunReport, out: &Path) {
    for (name, value) in &report.reference {
        println!("{name} = {value:.4}");
    }
    for cell in &report.metrics {
        println!("{} m={} {} {} = {:.4}", cell.method, cell.m, cell.set.short(), cell.metric, cell.value);
    }
    for t in &report.timings {
        println!("{} m={} {:.6}s", t.stage, t.m, t.seconds);
    }
    println!("report written to {}", out.display());
}

fn run(cli: Cli) -> taskdown::Result<()> {
    match cli.command {
        Command::Pretrain(args) => {
            let report = run_pretrain(&args.resolve()?, &args.out)?;
            summarize(&report, &args.out);
        }
        Command::Train(args) => {
            let report = run_train(&args.resolve()?, &args.out)?;
            summarize(&report, &args.out);
        }
        Command::Eval { checkpoint, m_list, out } => {
            let report = run_eval(&checkpoint, m_list.as_deref(), &out)?;
            summarize(&report, &out);
        }
        Command::Sample {
            input,
            method,
            m,
            checkpoint,
            export_matrix,
            seed,
            out,
        } => {
            let request = SampleRequest {
                input: &input,
                method,
                m,
                seed,
                checkpoint: checkpoint.as_deref(),
                export_matrix: export_matrix.as_deref(),
            };
            let sampled = run_sample(&request, &out)?;
            println!("{method}: kept {} points in {}", sampled.len(), out.join("sampled.xyz").display());
        }
        Command::Bench {
            n,
            m_grid,
            shapes,
            repeats,
            seed,
            out,
        } => {
            let config = BenchConfig {
                n,
                m_grid,
                shapes,
                repeats,
                seed,
                ..BenchConfig::default()
            };
            let report = run_bench(&config, &out)?;
            summarize(&report, &out);
        }
        Command::Robustness {
            checkpoint,
            levels,
            m,
            seed,
            out,
        } => {
            let report = run_robustness(&checkpoint, m, &levels, seed, &out)?;
            summarize(&report, &out);
        }
        Command::Sweep { run, alphas, tau_mins } => {
            let config = run.resolve()?;
            let tau_mins = tau_mins.unwrap_or_else(|| vec![config.tau_min]);
            let report = run_sweep(&config, &alphas, &tau_mins, &run.out)?;
            summarize(&report, &run.out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
