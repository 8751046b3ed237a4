//! `landis` experiment harness: config parsing, subcommand dispatch and
//! artifact emission on top of `landis_core`.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "landis", version, about = "Multipliers, ∂̄ reductions and order certificates for planar Schrödinger-type equations")]
pub struct Cli {
    /// TOML experiment file with top-level keys only.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the positive multiplier φ for a potential.
    Multiplier,
    /// Anchored Cauchy transform of a field.
    Cauchy {
        #[arg(long)]
        input: Option<String>,
        /// Anchor point `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<String>,
    },
    /// Reduce u to a ∂̄ system with a given multiplier.
    Reduce {
        #[arg(long)]
        u: Option<String>,
        /// φ as a scalar CSV.
        #[arg(long)]
        multiplier: Option<String>,
        /// Exterior cutoff `A,R`.
        #[arg(long)]
        exterior: Option<String>,
    },
    /// Certified vanishing orders.
    Order,
    /// Landis decay curve.
    Scale {
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "R-list")]
        r_list: Option<String>,
    },
    /// Exterior-domain terms and certified bounds.
    Exterior {
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long = "R-list")]
        r_list: Option<String>,
        #[arg(long = "Ctilde")]
        ctilde: Option<f64>,
    },
    /// Carleman estimate on random test functions.
    Carleman,
    /// Print what each subcommand checks.
    List,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Multiplier => "multiplier",
            Command::Cauchy { .. } => "cauchy",
            Command::Reduce { .. } => "reduce",
            Command::Order => "order",
            Command::Scale { .. } => "scale",
            Command::Exterior { .. } => "exterior",
            Command::Carleman => "carleman",
            Command::List => "list",
        }
    }
}

/// Subcommand and the statement it checks.
pub const MAPPING: &[(&str, &str)] = &[
    ("multiplier", "positive solution φ of Δφ + W·∇φ − Vφ = 0 with exp(−2(√M+K)) ≤ φ ≤ exp(2(√M+K)) on B_2"),
    ("cauchy", "Cauchy transform inverts ∂̄ with the log-Lipschitz envelope at the anchor"),
    ("reduce", "u = φv reduces to ∂̄g = α̃g (interior) or ∂̄g = α̃g + sources (exterior cutoff)"),
    ("order", "three-circle certificate: sup_{B_r}|u| ≥ r^{C(√M+K)}"),
    ("scale", "rescaled certificate: inf_{|z0|=R} sup_{B_1(z0)}|u| ≥ exp(−C R log R)"),
    ("exterior", "weighted cutoff argument outside a disc: lower bound exp(−C R (log R)²)"),
    ("carleman", "∫|∂̄h|²e^{φ_τ} ≥ ∫|h|²e^{φ_τ} for φ_τ = −τ log|z| + |z|², τ > 8"),
];

fn merge(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(c) = cfg.str_opt("command") {
        if c != cli.command.name() {
            return Err(CliError::Config(format!("config is for '{c}', not '{}'", cli.command.name())));
        }
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", s);
    }
    if let Some(n) = cli.grid_n {
        cfg.set("grid_n", n);
    }
    if let Some(t) = cli.tol {
        cfg.set("tol", t);
    }
    if let Some(o) = &cli.out {
        cfg.set("out", o.display());
    }
    let mut set = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    };
    match &cli.command {
        Command::Cauchy { input, anchor } => {
            set("input", input);
            set("anchor", anchor);
        }
        Command::Reduce { u, multiplier, exterior } => {
            set("u", u);
            set("multiplier", multiplier);
            set("exterior", exterior);
        }
        Command::Scale { family, r_list } => {
            set("family", family);
            set("r_list", r_list);
        }
        Command::Exterior { a, r_list, ctilde } => {
            set("r_list", r_list);
            if let Some(a) = a {
                cfg.set("a", a);
            }
            if let Some(c) = ctilde {
                cfg.set("ctilde", c);
            }
        }
        _ => {}
    }
    Ok(cfg)
}

/// Caps the global pool at `LANDIS_THREADS` when set.
fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("LANDIS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("LANDIS_THREADS must be a positive integer (got '{v}')")))?;
    // A pool may already exist when several runs share a process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Command::List = cli.command {
        for (cmd, what) in MAPPING {
            println!("{cmd:<11} {what}");
        }
        return Ok(());
    }
    init_threads()?;
    let cfg = merge(cli)?;
    let out = PathBuf::from(cfg.str_or("out", "out"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    let res = match cli.command {
        Command::Multiplier => commands::multiplier::run(&cfg, &out),
        Command::Cauchy { .. } => commands::cauchy::run(&cfg, &out),
        Command::Reduce { .. } => commands::reduce::run(&cfg, &out),
        Command::Order => commands::order::run(&cfg, &out),
        Command::Scale { .. } => commands::scale::run(&cfg, &out),
        Command::Exterior { .. } => commands::exterior::run(&cfg, &out),
        Command::Carleman => commands::carleman::run(&cfg, &out),
        Command::List => unreachable!("handled above"),
    };
    if let Err(err) = &res {
        err.write_report(&out);
    }
    res
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
