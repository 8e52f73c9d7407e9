use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fedsandbox::data::{self, Dataset, DATASETS};
use fedsandbox::fedstats::{LogVarBound, Scenario, TStatVariant};
use fedsandbox::harness::{
    emit_figures, emit_tables, parse_grid, pet_grid, sweep_training, sweep_tstat, write_pet_grid,
    write_stats, write_training, PetConfig, SweepConfig, DEFAULT_T_RANGE,
};
use fedsandbox::par;

#[derive(Parser)]
#[command(name = "fedsandbox", version, about = "Differential privacy sweeps over simulated federations")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and validate a dataset, or write a synthetic surrogate.
    Prepare {
        dataset: String,
        /// Write a labeled synthetic surrogate into the data directory.
        #[arg(long)]
        synthetic: bool,
        /// Rows of the surrogate (default: the schema's size).
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// DP t-test sweep over ε, K and scenarios.
    SweepStats(SweepArgs),
    /// DP-SGD sweep over ε, K and scenarios.
    SweepTrain(SweepArgs),
    /// Critical-ε tables from sweep outputs.
    Tables(InOut),
    /// SVG band plots from sweep outputs.
    Figures(InOut),
    /// Secure aggregation × DP quadrants on one dataset.
    Petgrid {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Training trials per cell.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 2000)]
        stats_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dataset: String,
    /// Comma-separated scenarios (central, local, secure or 1, 2, 3); default all.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<Scenario>,
    /// Comma-separated federation sizes.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Log-spaced grid `lo:hi:n`.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// 9-point grid and K ∈ {1, 4, 16, 64}.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    delta: Option<f64>,
    /// Release t directly with Laplace noise (central and secure only).
    #[arg(long)]
    tstat_direct_laplace: bool,
    /// Use Δvar / v_floor instead of ln(1 + Δvar / v_floor) for the variance release.
    #[arg(long)]
    linear_logvar_bound: bool,
    /// Skip range clamping of released means and variances.
    #[arg(long)]
    no_clamp: bool,
    /// Variance floor as a fraction of the squared column range.
    #[arg(long)]
    v_floor_fraction: Option<f64>,
    /// Training only: replace pairwise masking by a plain modular sum of encodings.
    #[arg(long)]
    fast_secagg: bool,
    /// Train the non-private baseline without gradient clipping.
    #[arg(long)]
    unclipped_baseline: bool,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    min_steps: Option<u64>,
}

#[derive(Args)]
struct InOut {
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    par::with_workers(workers, || run(cli.cmd))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Prepare {
            dataset,
            synthetic,
            rows,
            seed,
        } => prepare(&dataset, synthetic, rows, seed),
        Cmd::SweepStats(a) => {
            let (cfg, ds) = sweep_config(&a, false)?;
            eprintln!("{cfg}");
            let sweep = sweep_tstat(&cfg, &ds)?;
            for p in write_stats(&sweep, &a.out)? {
                println!("{}", p.display());
            }
            for (s, k) in cfg.groups() {
                eprintln!("critical eps {s} K={k}: {}", sweep.critical(s, k));
            }
            Ok(())
        }
        Cmd::SweepTrain(a) => {
            let (cfg, ds) = sweep_config(&a, true)?;
            eprintln!("{cfg}");
            let sweep = sweep_training(&cfg, &ds)?;
            for p in write_training(&sweep, &a.out)? {
                println!("{}", p.display());
            }
            for (s, k) in cfg.groups() {
                eprintln!("critical eps {s} K={k}: {}", sweep.critical(s, k));
            }
            Ok(())
        }
        Cmd::Tables(io) => {
            let out = io.out.as_deref().unwrap_or(&io.input);
            print_paths(emit_tables(&io.input, out)?)
        }
        Cmd::Figures(io) => {
            let out = io.out.as_deref().unwrap_or(&io.input);
            print_paths(emit_figures(&io.input, out)?)
        }
        Cmd::Petgrid {
            dataset,
            k,
            eps,
            trials,
            stats_trials,
            seed,
            out,
        } => {
            let ds = load(&dataset)?;
            let cfg = PetConfig {
                k,
                eps,
                train_trials: trials,
                stats_trials,
                master_seed: seed,
                ..PetConfig::default()
            };
            let rows = pet_grid(&ds, &cfg)?;
            for r in &rows {
                eprintln!(
                    "{:<34} accuracy {:.3} ± {:.3}  t {:.2}  critical eps train {} t-stat {}",
                    r.label(),
                    r.accuracy_mean,
                    r.accuracy_sd,
                    r.t,
                    r.critical_train,
                    r.critical_tstat
                );
            }
            println!("{}", write_pet_grid(&rows, &ds, &cfg, &out)?.display());
            Ok(())
        }
    }
}

fn print_paths(paths: Vec<PathBuf>) -> Result<()> {
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn load(name: &str) -> Result<Dataset> {
    let ds = Dataset::load(name, None).with_context(|| format!("loading {name}"))?;
    if ds.is_synthetic() {
        eprintln!("warning: {name} is a synthetic surrogate ({})", ds.source);
    }
    Ok(ds)
}

fn prepare(name: &str, synthetic: bool, rows: Option<usize>, seed: u64) -> Result<()> {
    if !DATASETS.contains(&name) {
        bail!("unknown dataset `{name}`; expected one of {}", DATASETS.join(", "));
    }
    if synthetic {
        let dir = data::data_dir();
        let path = data::write_surrogate(name, &dir, rows, seed)?;
        eprintln!("wrote synthetic surrogate {}", path.display());
    }
    let ds = load(name)?;
    let r = &ds.report;
    let [n0, n1] = ds.table.class_counts();
    println!("dataset   {name}");
    println!("source    {}", ds.source);
    println!(
        "rows      {} of {} raw ({} missing, {} duplicate, {} subsampled out; {} cells clamped)",
        ds.table.len(),
        r.raw_rows,
        r.missing_dropped,
        r.duplicates_dropped,
        r.subsampled_out,
        r.clamped_cells
    );
    println!("classes   {n0} / {n1}");
    println!("t-test on {}", ds.selected);
    println!("delta     {}", ds.schema.delta);
    Ok(())
}

fn sweep_config(a: &SweepArgs, training: bool) -> Result<(SweepConfig, Dataset)> {
    let ds = load(&a.dataset)?;
    let mut cfg = if training {
        SweepConfig::training(&a.dataset)
    } else {
        SweepConfig::stats(&a.dataset)
    };
    if a.desk {
        cfg = cfg.desk();
    }
    if !a.scenario.is_empty() {
        cfg.scenarios = a.scenario.clone();
    }
    if !a.k.is_empty() {
        cfg.ks = a.k.clone();
    }
    if let Some(g) = &a.eps {
        cfg.eps_grid = parse_grid(g)?;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    cfg.master_seed = a.seed;
    cfg.delta = a.delta;
    if a.tstat_direct_laplace {
        cfg.variant = TStatVariant::DirectLaplace {
            t_range: DEFAULT_T_RANGE,
        };
    }
    if a.linear_logvar_bound {
        cfg.log_bound = LogVarBound::Linear;
    }
    cfg.clamp = !a.no_clamp;
    if let Some(f) = a.v_floor_fraction {
        cfg.v_floor_fraction = f;
    }
    cfg.train.full_masking = !a.fast_secagg;
    cfg.train.baseline_clip = !a.unclipped_baseline;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(m) = a.min_steps {
        cfg.train.min_steps = m;
    }
    cfg.validate()?;
    Ok((cfg, ds))
}
