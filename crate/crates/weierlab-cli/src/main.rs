use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use weierlab_cli::commands::{self, VarianceMethodChoice};
use weierlab_cli::config::{self, RunConfig};
use weierlab_cli::presets::preset_config;
use weierlab_cli::CliError;

#[derive(Parser)]
#[command(
    name = "weierlab",
    version,
    about = "Numerical laboratory for generalized Weierstrass functions of expanding circle maps"
)]
struct Cli {
    /// Path to a JSON run config (may reference a preset and override fields).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: classic, smooth, nonlinear or cubic.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory (default: config out_dir, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for Monte Carlo commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rayon worker threads (default: all cores). Results are identical
    /// for every worker count; the manifest records the value used.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    GreenKubo,
    BirkhoffMc,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate alpha and phi on a dyadic grid or explicit points.
    Eval {
        /// Emit 2^GRID uniformly spaced points.
        #[arg(long)]
        grid: Option<u32>,
        /// Comma-separated points (overrides the grid; empty list allowed).
        #[arg(long)]
        points: Option<String>,
    },
    /// Build and export the Ulam invariant density.
    Density {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Lyapunov exponent L and ell = 1/sqrt(L).
    Lyapunov {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Dynamical variance sigma^2(phi).
    Variance {
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        term_tol: Option<f64>,
        #[arg(long)]
        mc_n: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Decide the regularity dichotomy (orbit sums vs variance).
    Classify {
        #[arg(long)]
        p_max: Option<u32>,
        #[arg(long)]
        orbit_tol: Option<f64>,
        #[arg(long)]
        sigma_tol: Option<f64>,
    },
    /// CLT experiment for the modulus of continuity.
    Clt {
        /// Comma-separated dyadic exponents k (h = 2^-k).
        #[arg(long)]
        h_exponents: Option<String>,
        #[arg(long)]
        n_samples: Option<usize>,
    },
    /// Law-of-iterated-logarithm trace at mu-random points.
    Lil {
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Per-scale maxima of the Zygmund ratio |D2_h alpha| / h.
    Zygmund {
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Per-scale maxima of the increment/Birkhoff residual ratio.
    Residual {
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long)]
        k_max: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn load_base_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match (&cli.config, &cli.preset) {
        (Some(path), None) => config::load_config(path),
        (None, Some(name)) => preset_config(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset {name:?}; available: {}",
                weierlab::presets::PRESET_NAMES.join(", ")
            ))
        }),
        (None, None) => Err(CliError::Config(
            "provide --config PATH or --preset NAME".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_base_config(&cli)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(workers) = cli.workers {
        cfg.workers = Some(workers);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(workers) = cfg.workers {
        if workers == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }

    // apply per-command overrides, then re-validate the final config
    match &cli.command {
        Command::Eval { grid, .. } => {
            if let Some(g) = grid {
                cfg.eval.grid_log2 = *g;
            }
        }
        Command::Density { m, tol } => {
            if let Some(m) = m {
                cfg.ulam.m = *m;
            }
            if let Some(tol) = tol {
                cfg.ulam.tol = *tol;
            }
        }
        Command::Lyapunov { m } => {
            if let Some(m) = m {
                cfg.ulam.m = *m;
            }
        }
        Command::Variance {
            n_max,
            term_tol,
            mc_n,
            mc_samples,
            ..
        } => {
            if let Some(v) = n_max {
                cfg.variance.n_max = *v;
            }
            if let Some(v) = term_tol {
                cfg.variance.term_tol = *v;
            }
            if let Some(v) = mc_n {
                cfg.variance.mc_n = *v;
            }
            if let Some(v) = mc_samples {
                cfg.variance.mc_samples = *v;
            }
        }
        Command::Classify {
            p_max,
            orbit_tol,
            sigma_tol,
        } => {
            if p_max.is_some() {
                cfg.classify.p_max = *p_max;
            }
            if let Some(v) = orbit_tol {
                cfg.classify.orbit_tol = *v;
            }
            if let Some(v) = sigma_tol {
                cfg.classify.sigma_tol = *v;
            }
        }
        Command::Clt {
            h_exponents,
            n_samples,
        } => {
            if let Some(text) = h_exponents {
                cfg.clt.h_exponents = parse_exponents(text)?;
            }
            if let Some(v) = n_samples {
                cfg.clt.n_samples = *v;
            }
        }
        Command::Lil {
            k_min,
            k_max,
            points,
        } => {
            if let Some(v) = k_min {
                cfg.lil.k_min = *v;
            }
            if let Some(v) = k_max {
                cfg.lil.k_max = *v;
            }
            if let Some(v) = points {
                cfg.lil.points = *v;
            }
        }
        Command::Zygmund {
            k_min,
            k_max,
            samples,
        } => {
            if let Some(v) = k_min {
                cfg.zygmund.k_min = *v;
            }
            if let Some(v) = k_max {
                cfg.zygmund.k_max = *v;
            }
            if let Some(v) = samples {
                cfg.zygmund.samples_per_scale = *v;
            }
        }
        Command::Residual {
            k_min,
            k_max,
            samples,
        } => {
            if let Some(v) = k_min {
                cfg.residual.k_min = *v;
            }
            if let Some(v) = k_max {
                cfg.residual.k_max = *v;
            }
            if let Some(v) = samples {
                cfg.residual.samples_per_scale = *v;
            }
        }
    }
    cfg.validate()?;

    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));

    let written = match &cli.command {
        Command::Eval { points, .. } => {
            let explicit = match points {
                Some(text) => Some(config::parse_points(text)?),
                None => None,
            };
            commands::cmd_eval(&cfg, &out_dir, explicit)?
        }
        Command::Density { .. } => commands::cmd_density(&cfg, &out_dir)?,
        Command::Lyapunov { .. } => commands::cmd_lyapunov(&cfg, &out_dir)?,
        Command::Variance { method, .. } => {
            let method = match method {
                MethodArg::GreenKubo => VarianceMethodChoice::GreenKubo,
                MethodArg::BirkhoffMc => VarianceMethodChoice::BirkhoffMc,
                MethodArg::Both => VarianceMethodChoice::Both,
            };
            commands::cmd_variance(&cfg, &out_dir, method)?
        }
        Command::Classify { .. } => commands::cmd_classify(&cfg, &out_dir)?,
        Command::Clt { .. } => commands::cmd_clt(&cfg, &out_dir)?,
        Command::Lil { .. } => commands::cmd_lil(&cfg, &out_dir)?,
        Command::Zygmund { .. } => commands::cmd_zygmund(&cfg, &out_dir)?,
        Command::Residual { .. } => commands::cmd_residual(&cfg, &out_dir)?,
    };
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_exponents(text: &str) -> Result<Vec<u32>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|e| CliError::Config(format!("bad exponent {s:?}: {e}")))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
