use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grainflow::cli_io::{plot_table, run_junction, run_network, run_stability, run_stats, Mode, RunConfig, Table};
use grainflow::{Error, Result, SurfaceTensionModel};

#[derive(Parser)]
#[command(name = "grainflow", version, about = "Grain-boundary dynamics with dynamic misorientation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Energy density, e.g. "sigma = 1 + 0.25*sin^2(2*theta)".
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a single triple junction.
    Junction {
        #[command(flatten)]
        common: Common,
        /// Anchor triangle as six numbers "x1,y1,x2,y2,x3,y3".
        #[arg(long)]
        triangle: Option<String>,
        #[arg(long, num_args = 3, value_delimiter = ',', allow_hyphen_values = true)]
        alpha0: Option<Vec<f64>>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        sample_dt: Option<f64>,
    },
    /// Evolve random Voronoi networks to the stop rule.
    Network {
        #[command(flatten)]
        common: Common,
        /// Infinite junction mobility.
        #[arg(long)]
        herring: bool,
        #[arg(long)]
        n_grains: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        stop_fraction: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Predicted and measured decay rates on random triangles.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_triangles: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the measured decay rates.
        #[arg(long)]
        no_measure: bool,
    },
    /// Misorientation distribution and temperature of saved snapshots.
    Stats {
        #[command(flatten)]
        common: Common,
        snapshots: Vec<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Line chart of columns from a CSV file.
    Plot {
        csv: PathBuf,
        #[arg(long, short)]
        x: String,
        #[arg(long, short, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

fn base_config(mode: Mode, c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let mut cfg = RunConfig::parse_unvalidated(&std::fs::read_to_string(p)?)?;
            cfg.mode = mode;
            cfg
        }
        None => RunConfig::new(mode),
    };
    if let Some(o) = &c.output {
        cfg.output = o.clone();
    }
    if let Some(s) = &c.sigma {
        let m: SurfaceTensionModel = s.parse()?;
        let (a, b, cc) = m.sin_squared_params().ok_or_else(|| Error::InvalidArgument("unsupported sigma".into()))?;
        cfg.model.a = a;
        cfg.model.b = b;
        cfg.model.c = cc;
    }
    if let Some(g) = c.gamma {
        cfg.dynamics.gamma = g;
    }
    if let Some(e) = c.eta {
        cfg.dynamics.eta = e;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Junction { common, triangle, alpha0, t_end, sample_dt } => {
            let mut cfg = base_config(Mode::Junction, &common)?;
            if let Some(t) = triangle {
                let tri: grainflow::AnchorTriangle = t.parse()?;
                cfg.junction.triangle = tri.to_coords();
            }
            if let Some(a) = alpha0 {
                cfg.junction.alpha0 = [a[0], a[1], a[2]];
            }
            if let Some(t) = t_end {
                cfg.junction.t_end = t;
            }
            if let Some(d) = sample_dt {
                cfg.junction.sample_dt = d;
            }
            cfg.validate()?;
            let r = run_junction(&cfg)?;
            let observed = r.observed.map_or("none".to_string(), |f| format!("{:.6}", f.rate));
            Ok(format!(
                "lambda = {:.6} (lambda1 = {:.6}, lambda2 = {:.6}), observed rate = {observed}, dissipation residual = {:.3e}\nwrote {}",
                r.lambda,
                r.lambda1,
                r.lambda2,
                r.dissipation_residual,
                cfg.output.display()
            ))
        }
        Command::Network { common, herring, n_grains, seed, runs, stop_fraction, t_end, snapshot_every } => {
            let mut cfg = base_config(Mode::Network, &common)?;
            let n = &mut cfg.network;
            cfg.dynamics.herring |= herring;
            if let Some(v) = n_grains {
                n.n_grains = v;
            }
            if let Some(v) = seed {
                n.seed = v;
            }
            if let Some(v) = runs {
                n.runs = v;
            }
            if let Some(v) = stop_fraction {
                n.stop_fraction = Some(v);
            }
            if let Some(v) = t_end {
                n.t_end = Some(v);
            }
            if let Some(v) = snapshot_every {
                n.snapshot_every = v;
            }
            cfg.validate()?;
            let s = run_network(&cfg)?;
            let mut msg = String::new();
            for r in &s.runs {
                msg.push_str(&format!(
                    "seed {}: N {} -> {}, t = {:.6}, {} steps, {} events\n",
                    r.seed,
                    r.n_initial,
                    r.network.n_grains(),
                    r.network.t,
                    r.steps,
                    r.events.len()
                ));
            }
            msg.push_str(&format!(
                "temperature D = {:.5} (KL {:.3e}{})\nwrote {}",
                s.temperature.d,
                s.temperature.kl,
                if s.temperature.flagged() { ", at bracket edge" } else { "" },
                cfg.output.display()
            ));
            Ok(msg)
        }
        Command::Stability { common, n_triangles, seed, no_measure } => {
            let mut cfg = base_config(Mode::Stability, &common)?;
            if let Some(v) = n_triangles {
                cfg.stability.n_triangles = v;
            }
            if let Some(v) = seed {
                cfg.stability.seed = v;
            }
            if no_measure {
                cfg.stability.measure = false;
            }
            cfg.validate()?;
            let rows = run_stability(&cfg)?;
            let worst = rows
                .iter()
                .filter_map(|r| r.observed.map(|o| o / r.lambda))
                .fold(f64::INFINITY, f64::min);
            Ok(format!(
                "{} triangles, min observed/predicted = {}\nwrote {}",
                rows.len(),
                if worst.is_finite() { format!("{worst:.4}") } else { "n/a".into() },
                cfg.output.display()
            ))
        }
        Command::Stats { common, snapshots, bins } => {
            let mut cfg = base_config(Mode::Stats, &common)?;
            if !snapshots.is_empty() {
                cfg.stats.snapshots = snapshots;
            }
            if let Some(b) = bins {
                cfg.stats.bins = b;
            }
            cfg.validate()?;
            let r = run_stats(&cfg)?;
            Ok(format!(
                "temperature D = {:.5} (KL {:.3e}{})\nwrote {}",
                r.temperature.d,
                r.temperature.kl,
                if r.temperature.flagged() { ", at bracket edge" } else { "" },
                cfg.output.display()
            ))
        }
        Command::Plot { csv, x, y, output, title } => {
            let table = Table::parse(&std::fs::read_to_string(&csv)?)?;
            let title = title.unwrap_or_else(|| csv.display().to_string());
            let svg = plot_table(&table, &x, &y, &title)?;
            let out = output.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&out, svg)?;
            Ok(format!("wrote {}", out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
