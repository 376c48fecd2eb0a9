//! Argument parsing and command dispatch for the `ttpeel` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::experiments::{
    derivative_experiment, hilbert_experiment, synthetic_experiment, taylor_experiment, BuildSettings,
    DerivativeConfig, HilbertConfig, Method, ModelConfig, SyntheticConfig, TaylorConfig,
};
use crate::output::{
    unix_now, versions, write_hilbert_csv, write_json, write_samples_csv, write_stats_csv, RunManifest,
    MANIFEST_FILE,
};

#[derive(Debug, Parser)]
#[command(name = "ttpeel", version, about = "Tensor trains from tensor actions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Oversampling of the range finder.
    #[arg(long, global = true, default_value_t = 5)]
    pub p: usize,
    /// Extra interpolation fibers beyond `⌈r/N⌉`.
    #[arg(long, global = true, default_value_t = 1)]
    pub tau_extra: usize,
    /// JSON model config `{n, order, rank, p, seed, whiten}`; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hilbert tensor: action-based vs SVD-based trains over a rank sweep.
    Hilbert {
        #[arg(long, value_delimiter = ',', default_values_t = [41, 42, 43, 44, 45])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        r_min: usize,
        #[arg(long, default_value_t = 10)]
        r_max: usize,
        #[arg(long, value_delimiter = ',', default_values_t = ["rsvd".to_string(), "svd".to_string()])]
        methods: Vec<String>,
    },
    /// Rebuild a random tensor train from its actions.
    Synthetic {
        #[arg(long, value_delimiter = ',', default_values_t = [20, 20, 20, 20, 20])]
        shape: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 5, 6, 4])]
        true_ranks: Vec<usize>,
        /// Defaults to the true ranks.
        #[arg(long, value_delimiter = ',')]
        build_ranks: Option<Vec<usize>>,
    },
    /// Compress a derivative tensor of the reaction-diffusion model.
    Derivative {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        /// Search the smallest rank with relative σ₁ error below this.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 40)]
        r_max: usize,
        /// Random starts of the σ₁ power method.
        #[arg(long, default_value_t = 5)]
        sigma_starts: usize,
        #[arg(long)]
        no_whiten: bool,
    },
    /// Taylor surrogates and their normalized error statistics.
    Taylor {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        max_order: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        no_whiten: bool,
    },
    /// Print version and runtime information.
    Info,
}

fn load_model_config(path: Option<&Path>) -> Result<Option<ModelConfig>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let cfg: ModelConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Ok(Some(cfg))
        }
    }
}

/// Parsed global settings after merging the config file.
struct Context {
    out_dir: PathBuf,
    threads: usize,
    build: BuildSettings,
    model: Option<ModelConfig>,
}

impl Context {
    fn new(g: &GlobalArgs) -> Result<Self> {
        let model = load_model_config(g.config.as_deref())?;
        Ok(Self {
            out_dir: g.out_dir.clone(),
            threads: g.threads,
            build: BuildSettings {
                p: g.p,
                tau_extra: g.tau_extra,
                seed: g.seed,
            },
            model,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn finish(&self, command: &str, config: Value, timings: Value, outputs: Vec<PathBuf>, started: f64, clock: Instant) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            config,
            seed: self.build.seed,
            threads: rayon::current_num_threads(),
            versions: versions(),
            started_unix: started,
            finished_unix: unix_now(),
            wall_seconds: clock.elapsed().as_secs_f64(),
            timings,
            outputs,
        };
        write_json(&self.path(MANIFEST_FILE), &manifest)
    }
}

/// Runs one parsed command. Outputs go to `--out-dir`.
pub fn run(cli: &Cli) -> Result<()> {
    let mut ctx = Context::new(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Command::Info = cli.command {
        return pool.install(info);
    }
    fs::create_dir_all(&ctx.out_dir)?;
    if let Some(m) = &ctx.model {
        // file values fill in what the flags leave at their defaults
        if cli.global.p == 5 {
            ctx.build.p = m.p;
        }
        if cli.global.seed == 0 {
            ctx.build.seed = m.seed;
        }
    }
    pool.install(|| dispatch(&cli.command, &ctx))
}

fn info() -> Result<()> {
    println!("ttpeel {}", env!("CARGO_PKG_VERSION"));
    println!("worker threads: {}", rayon::current_num_threads());
    println!("dense entry limit: {}", ttpeel_core::shape::DENSE_ENTRY_LIMIT);
    println!("subcommands: hilbert, synthetic, derivative, taylor, info");
    Ok(())
}

fn dispatch(command: &Command, ctx: &Context) -> Result<()> {
    let started = unix_now();
    let clock = Instant::now();
    let model = ctx.model.clone().unwrap_or_default();
    match command {
        Command::Hilbert {
            dims,
            r_min,
            r_max,
            methods,
        } => {
            let cfg = HilbertConfig {
                dims: dims.clone(),
                ranks: (*r_min..=*r_max).collect(),
                methods: methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?,
            };
            let rows = hilbert_experiment(&cfg, &ctx.build)?;
            let csv = ctx.path("hilbert.csv");
            write_hilbert_csv(&csv, &rows)?;
            let timings = rows
                .iter()
                .map(|r| json!({"rank": r.rank, "method": r.method.name(), "seconds": r.seconds}))
                .collect();
            ctx.finish("hilbert", json!({"hilbert": cfg, "build": ctx.build}), timings, vec![csv], started, clock)
        }
        Command::Synthetic {
            shape,
            true_ranks,
            build_ranks,
        } => {
            let cfg = SyntheticConfig {
                shape: shape.clone(),
                true_ranks: true_ranks.clone(),
                build_ranks: build_ranks.clone().unwrap_or_else(|| true_ranks.clone()),
            };
            let report = synthetic_experiment(&cfg, &ctx.build)?;
            let out = ctx.path("synthetic.json");
            write_json(&out, &report)?;
            ctx.finish("synthetic", json!({"synthetic": cfg, "build": ctx.build}), Value::Null, vec![out], started, clock)?;
            if !report.pass {
                println!("relative error {:.3e} is above 1e-6", report.relative_error);
            }
            Ok(())
        }
        Command::Derivative {
            n,
            order,
            rank,
            eps,
            r_max,
            sigma_starts,
            no_whiten,
        } => {
            let cfg = DerivativeConfig {
                n: n.unwrap_or(model.n),
                order: order.unwrap_or(model.order),
                rank: rank.unwrap_or(model.rank),
                eps: *eps,
                r_max: *r_max,
                whiten: model.whiten && !no_whiten,
                sigma_starts: *sigma_starts,
                ..DerivativeConfig::default()
            };
            let report = derivative_experiment(&cfg, &ctx.build)?;
            let out = ctx.path("derivative.json");
            write_json(&out, &report)?;
            ctx.finish("derivative", json!({"derivative": cfg, "build": ctx.build}), Value::Null, vec![out], started, clock)
        }
        Command::Taylor {
            n,
            max_order,
            rank,
            samples,
            no_whiten,
        } => {
            let cfg = TaylorConfig {
                n: n.unwrap_or(ctx.model.as_ref().map_or(12, |m| m.n)),
                max_order: max_order.unwrap_or(ctx.model.as_ref().map_or(3, |m| m.order)),
                rank: rank.unwrap_or(model.rank),
                n_samples: *samples,
                whiten: model.whiten && !no_whiten,
            };
            let report = taylor_experiment(&cfg, &ctx.build)?;
            let stats = ctx.path("taylor_stats.csv");
            let samples = ctx.path("taylor_samples.csv");
            write_stats_csv(&stats, &report.stats)?;
            write_samples_csv(&samples, &report.errors)?;
            ctx.finish(
                "taylor",
                json!({"taylor": cfg, "build": ctx.build, "build_actions": report.build_actions, "ranks": report.ranks}),
                Value::Null,
                vec![stats, samples],
                started,
                clock,
            )
        }
        Command::Info => info(),
    }
}
