//! `vanetsim` — run 802.11p CAM broadcast simulations and the
//! lookup-table performance estimator from the command line.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use vanetsim_cli::commands::{self, LutGenOptions, SweepOptions};
use vanetsim_cli::config::Settings;

#[derive(Parser)]
#[command(name = "vanetsim", version, about = "802.11p broadcast CAM simulator and real-time performance estimator")]
struct Cli {
    /// Configuration file (flat `key = value`; flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed; every derived run seed is a pure function of it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps and table generation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario and write per-node metrics.
    Simulate {
        /// Simulated seconds (each node sends duration * cam_rate CAMs).
        #[arg(long)]
        duration_s: Option<f64>,
        /// Independent seed-averaged runs pooled into the metrics.
        #[arg(long)]
        runs: Option<u32>,
        /// Also write the per-packet log (packets.csv).
        #[arg(long)]
        packet_log: bool,
    },
    /// Hidden-node experiment: sweep the separation between two neighbor
    /// groups and emit transmitter/neighbor metrics per point.
    HiddenSweep {
        /// Comma-separated separations in meters.
        #[arg(long, value_delimiter = ',')]
        separations: Option<Vec<f64>>,
        #[arg(long, default_value_t = 300)]
        cams_per_node: u32,
        #[arg(long, default_value_t = 5)]
        seeds_per_point: u32,
    },
    /// Generate lookup tables over a neighbor-count grid.
    LutGen {
        /// 1, 2 or both.
        #[arg(long, default_value = "both")]
        cluster: String,
        /// Grid as start:end:step over neighbor counts.
        #[arg(long, default_value = "5:200:5")]
        grid: String,
        #[arg(long, default_value_t = 5)]
        runs_per_point: u32,
        #[arg(long, default_value_t = 1000)]
        tx_per_node: u32,
    },
    /// Fast path: estimate per-node performance from positions and
    /// prebuilt lookup tables. No simulation.
    Estimate {
        #[arg(long)]
        positions: PathBuf,
        #[arg(long)]
        lut1: PathBuf,
        #[arg(long)]
        lut2: PathBuf,
        #[arg(long)]
        factors: Option<PathBuf>,
        /// Scenario x-extent for edge classification (defaults to the
        /// bounding box of the positions).
        #[arg(long)]
        extent_min: Option<f64>,
        #[arg(long)]
        extent_max: Option<f64>,
    },
    /// Re-fit correction factors from a saved validation.csv.
    Fit {
        #[arg(long)]
        validation: PathBuf,
    },
    /// Simulate the configured scenario, correlate simulated vs analytical
    /// metrics, and fit (or apply) correction factors.
    Validate {
        #[arg(long)]
        lut1: PathBuf,
        #[arg(long)]
        lut2: PathBuf,
        /// Apply these factors instead of fitting new ones.
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long)]
        duration_s: Option<f64>,
    },
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<u32>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:end:step, got '{spec}'");
    }
    let (start, end, step): (u32, u32, u32) =
        (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
    if step == 0 || end < start {
        bail!("bad grid '{spec}'");
    }
    Ok((start..=end).step_by(step as usize).collect())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool init")?;
    }

    let mut settings = Settings::default();
    if let Some(path) = &cli.config {
        settings
            .apply_file(path)
            .with_context(|| format!("loading {}", path.display()))?;
    }
    for kv in &cli.sets {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        settings.apply_kv(0, key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        settings.seed = seed;
    }

    let out = &cli.out;
    match cli.command {
        Command::Simulate {
            duration_s,
            runs,
            packet_log,
        } => {
            if let Some(d) = duration_s {
                settings.duration_s = d;
            }
            if let Some(r) = runs {
                settings.runs = r;
            }
            let report = commands::cmd_simulate(&settings, out, packet_log)?;
            println!(
                "simulate: {} packets over {} nodes -> {}",
                report.packets,
                report.rows.len(),
                out.join("metrics.csv").display()
            );
        }
        Command::HiddenSweep {
            separations,
            cams_per_node,
            seeds_per_point,
        } => {
            let mut opts = SweepOptions {
                cams_per_node,
                seeds_per_point,
                ..SweepOptions::default()
            };
            if let Some(s) = separations {
                opts.separations = s;
            }
            settings.scenario.kind = "hidden_sweep".into();
            let report = commands::cmd_hidden_sweep(&settings, out, &opts)?;
            println!(
                "hidden-sweep: {} rows -> {}",
                report.rows.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::LutGen {
            cluster,
            grid,
            runs_per_point,
            tx_per_node,
        } => {
            let clusters = match cluster.as_str() {
                "1" => vec![1],
                "2" => vec![2],
                "both" => vec![1, 2],
                other => bail!("--cluster must be 1, 2 or both, got '{other}'"),
            };
            let opts = LutGenOptions {
                clusters,
                grid: parse_grid(&grid)?,
                runs_per_point,
                tx_per_node,
            };
            let (tables, warnings) = commands::cmd_lut_gen(&settings, out, &opts)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            for t in &tables {
                println!(
                    "lut-gen: cluster {} ({} rows) -> {}",
                    t.cluster,
                    t.rows.len(),
                    out.join(format!("lut_cluster{}.txt", t.cluster)).display()
                );
            }
        }
        Command::Estimate {
            positions,
            lut1,
            lut2,
            factors,
            extent_min,
            extent_max,
        } => {
            let extent = match (extent_min, extent_max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => bail!("--extent-min and --extent-max must be given together"),
            };
            let report = commands::cmd_estimate(
                &settings,
                out,
                &positions,
                &lut1,
                &lut2,
                factors.as_deref(),
                extent,
            )?;
            println!(
                "estimate: {} nodes in {:.3} ms ({:.3} ms estimation) -> {}",
                report.estimates.len(),
                report.elapsed.as_secs_f64() * 1e3,
                report.elapsed_estimate.as_secs_f64() * 1e3,
                out.join("estimates.csv").display()
            );
        }
        Command::Fit { validation } => {
            let factors = commands::cmd_fit(&settings, out, &validation)?;
            println!(
                "fit: factors (center/edge) mean_delay {:.4}/{:.4} p_delay {:.4}/{:.4} p_loss {:.4}/{:.4} -> {}",
                factors.mean_delay_center,
                factors.mean_delay_edge,
                factors.p_delay_center,
                factors.p_delay_edge,
                factors.p_loss_center,
                factors.p_loss_edge,
                out.join("factors.txt").display()
            );
        }
        Command::Validate {
            lut1,
            lut2,
            factors,
            runs,
            duration_s,
        } => {
            if let Some(r) = runs {
                settings.runs = r;
            }
            if let Some(d) = duration_s {
                settings.duration_s = d;
            }
            let report = commands::cmd_validate(&settings, out, &lut1, &lut2, factors.as_deref())?;
            println!(
                "validate: {} nodes; correlations mean_delay {:.4}, p_delay {:.4}, p_loss {:.4} \
                 (reference full-scale run reports 0.9417 / 0.9277 / 0.9167)",
                report.rows.len(),
                report.corr_mean_delay,
                report.corr_p_delay,
                report.corr_p_loss
            );
            if report.fitted {
                println!("validate: fitted factors -> {}", out.join("factors.txt").display());
            }
            println!("validate: rows -> {}", out.join("validation.csv").display());
        }
    }
    Ok(())
}
