//! The batch commands behind the CLI subcommands. Each command is a plain
//! function so tests (and the acceptance suite) can drive it in-process;
//! `main` only parses flags and dispatches.
//!
//! Every command writes its outputs under a single directory with fixed
//! filenames and echoes the effective configuration next to them. All
//! outputs are deterministic for a fixed seed.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use vanetsim_core::error::{Error, Result};
use vanetsim_core::estimator::{
    self, classify_zone, count_neighbors, CorrectionFactors, Estimate, FitSample, Metric, Zone,
};
use vanetsim_core::lut::{self, LookupTable, LutGenConfig};
use vanetsim_core::mac::{self, Node, PacketRecord, SimConfig};
use vanetsim_core::metrics::{aggregate_with, correlation, PerfMetrics};
use vanetsim_core::mix_seed;
use vanetsim_core::scenarios::{Extent, ScenarioSpec};

use crate::config::Settings;

/// Per-node aggregated metrics with position, the simulate output row.
#[derive(Debug, Clone)]
pub struct NodeMetricsRow {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub metrics: PerfMetrics,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub rows: Vec<NodeMetricsRow>,
    pub packets: usize,
}

/// One hidden-sweep line: transmitter and pooled-neighbor metrics at a
/// separation, or one of the collocated reference rows.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kind: String,
    pub separation_m: Option<f64>,
    pub tx: PerfMetrics,
    pub neighbors: PerfMetrics,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, kind: &str, separation: Option<f64>) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.kind == kind
                && match (separation, r.separation_m) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                    (None, None) => true,
                    _ => false,
                }
        })
    }
}

#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub n_t: u32,
    pub n_s: u32,
    pub zone: Zone,
    pub saturated: bool,
    pub sim: PerfMetrics,
    pub naive: PerfMetrics,
    pub corrected: PerfMetrics,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    /// Pearson correlation of simulated vs naive values, per calibrated
    /// metric (mean delay, delay probability, loss probability).
    pub corr_mean_delay: f64,
    pub corr_p_delay: f64,
    pub corr_p_loss: f64,
    pub factors: CorrectionFactors,
    /// Factors were fitted by this run (no factors file supplied).
    pub fitted: bool,
    /// Residual sum of squares per metric before/after correction.
    pub j_naive: [f64; 3],
    pub j_corrected: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub estimates: Vec<(u32, f64, f64, Estimate)>,
    /// Wall time of the full command body (parse, estimate, write).
    pub elapsed: Duration,
    /// Wall time of the estimation loop alone.
    pub elapsed_estimate: Duration,
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn echo_config(settings: &Settings, out: &Path, command: &str, extra: &[(String, String)]) -> Result<()> {
    let mut text = settings.to_config_text();
    text.push_str(&format!("# command = {command}\n"));
    for (k, v) in extra {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    std::fs::write(out.join("effective_config.txt"), text)?;
    Ok(())
}

fn sim_config(settings: &Settings, duration_s: f64, seed: u64) -> SimConfig {
    SimConfig {
        params: settings.params,
        radio: settings.radio,
        options: settings.options,
        duration_s,
        seed,
    }
}

/// Run `runs` independently seeded simulations of the same node list and
/// pool the packet records. Runs fan out across the thread pool; pooling
/// order is fixed by run index, so the result is deterministic.
fn run_pooled(
    nodes: &[Node],
    settings: &Settings,
    duration_s: f64,
    master_seed: u64,
    runs: u32,
) -> Result<Vec<PacketRecord>> {
    let outs: Vec<Result<Vec<PacketRecord>>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let cfg = sim_config(settings, duration_s, mix_seed(master_seed, r as u64));
            Ok(mac::run(nodes, &cfg)?.records)
        })
        .collect();
    let mut pooled = Vec::new();
    for o in outs {
        pooled.extend(o?);
    }
    Ok(pooled)
}

fn fmt_opt_sep(sep: Option<f64>) -> String {
    sep.map(|s| format!("{s:.1}")).unwrap_or_default()
}

fn metrics_cols(m: &PerfMetrics) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6}",
        m.p_collision, m.p_delay, m.p_loss, m.mean_delay_us
    )
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Simulate the configured scenario and write per-node metrics (and
/// optionally the per-packet log).
pub fn cmd_simulate(settings: &Settings, out: &Path, packet_log: bool) -> Result<SimulateReport> {
    ensure_dir(out)?;
    let spec = settings.scenario.to_spec()?;
    let (nodes, _) = spec.build()?;
    let records = run_pooled(&nodes, settings, settings.duration_s, settings.seed, settings.runs)?;

    let mut rows = Vec::new();
    for node in nodes.iter().filter(|n| n.transmits) {
        let node_records: Vec<&PacketRecord> =
            records.iter().filter(|r| r.tx_node == node.id).collect();
        if node_records.is_empty() {
            continue;
        }
        let metrics = aggregate_with(node_records.iter().copied(), settings.mean_delay_mode)?;
        rows.push(NodeMetricsRow {
            id: node.id,
            x: node.x,
            y: node.y,
            metrics,
        });
    }

    let mut csv = String::from("node_id,x,y,p_collision,p_delay,p_loss,mean_delay_us\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.3},{:.3},{}\n",
            r.id,
            r.x,
            r.y,
            metrics_cols(&r.metrics)
        ));
    }
    std::fs::write(out.join("metrics.csv"), csv)?;

    if packet_log {
        let mut csv = String::from("tx_node,seq,requested_at_us,delay_us,collided,lost\n");
        for p in &records {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.tx_node,
                p.seq,
                p.requested_at_us,
                p.delay_us().map(|d| d.to_string()).unwrap_or_default(),
                u8::from(p.collided),
                u8::from(p.lost()),
            ));
        }
        std::fs::write(out.join("packets.csv"), csv)?;
    }

    echo_config(settings, out, "simulate", &[("packet_log".into(), packet_log.to_string())])?;
    Ok(SimulateReport {
        rows,
        packets: records.len(),
    })
}

// ---------------------------------------------------------------------------
// hidden-sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub separations: Vec<f64>,
    pub cams_per_node: u32,
    pub seeds_per_point: u32,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            separations: (0..12).map(|i| i as f64 * 20.0).collect(),
            cams_per_node: 300,
            seeds_per_point: 5,
        }
    }
}

/// The hidden-node experiment: sweep the separation between the two
/// neighbor groups and record transmitter and neighbor metrics, plus the
/// 40- and 80-neighbor collocated reference rows.
pub fn cmd_hidden_sweep(settings: &Settings, out: &Path, opts: &SweepOptions) -> Result<SweepReport> {
    ensure_dir(out)?;
    if opts.separations.is_empty() {
        return Err(Error::invalid("separation list is empty"));
    }
    let duration_s = opts.cams_per_node as f64 / settings.params.cam_rate_hz;
    let total = settings.scenario.total_neighbors;

    enum Job {
        Sweep(usize, f64),
        Reference(usize, u32),
    }
    let mut jobs: Vec<Job> = opts
        .separations
        .iter()
        .enumerate()
        .map(|(i, &s)| Job::Sweep(i, s))
        .collect();
    jobs.push(Job::Reference(0, total / 2));
    jobs.push(Job::Reference(1, total));

    let results: Vec<Result<SweepRow>> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Sweep(i, separation) => {
                let (nodes, _) = ScenarioSpec::HiddenSweep {
                    total_neighbors: total,
                    separation_m: separation,
                    seed: settings.scenario.seed,
                }
                .build()?;
                let records = run_pooled(
                    &nodes,
                    settings,
                    duration_s,
                    mix_seed(settings.seed, i as u64),
                    opts.seeds_per_point,
                )?;
                let tx = aggregate_with(
                    records.iter().filter(|r| r.tx_node == 0),
                    settings.mean_delay_mode,
                )?;
                let neighbors = aggregate_with(
                    records.iter().filter(|r| r.tx_node >= 2),
                    settings.mean_delay_mode,
                )?;
                Ok(SweepRow {
                    kind: "sweep".into(),
                    separation_m: Some(separation),
                    tx,
                    neighbors,
                })
            }
            Job::Reference(which, n_neighbors) => {
                let (nodes, _) = ScenarioSpec::Collocated {
                    n_neighbors,
                    neighbor_distance_m: 0.0,
                    seed: settings.scenario.seed,
                }
                .build()?;
                let records = run_pooled(
                    &nodes,
                    settings,
                    duration_s,
                    mix_seed(settings.seed, 1000 + which as u64),
                    opts.seeds_per_point,
                )?;
                let tx = aggregate_with(
                    records.iter().filter(|r| r.tx_node == 0),
                    settings.mean_delay_mode,
                )?;
                let neighbors = aggregate_with(
                    records.iter().filter(|r| r.tx_node >= 2),
                    settings.mean_delay_mode,
                )?;
                Ok(SweepRow {
                    kind: format!("ref{n_neighbors}"),
                    separation_m: None,
                    tx,
                    neighbors,
                })
            }
        })
        .collect();

    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }

    let mut csv = String::from(
        "kind,separation_m,tx_p_collision,tx_p_delay,tx_p_loss,tx_mean_delay_us,\
         nb_p_collision,nb_p_delay,nb_p_loss,nb_mean_delay_us\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.kind,
            fmt_opt_sep(r.separation_m),
            metrics_cols(&r.tx),
            metrics_cols(&r.neighbors)
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv)?;

    echo_config(
        settings,
        out,
        "hidden-sweep",
        &[
            (
                "separations".into(),
                opts.separations
                    .iter()
                    .map(|s| format!("{s}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("cams_per_node".into(), opts.cams_per_node.to_string()),
            ("seeds_per_point".into(), opts.seeds_per_point.to_string()),
        ],
    )?;
    Ok(SweepReport { rows })
}

// ---------------------------------------------------------------------------
// lut-gen
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LutGenOptions {
    pub clusters: Vec<u8>,
    pub grid: Vec<u32>,
    pub runs_per_point: u32,
    pub tx_per_node: u32,
}

impl Default for LutGenOptions {
    fn default() -> Self {
        LutGenOptions {
            clusters: vec![1, 2],
            grid: (1..=40).map(|i| i * 5).collect(),
            runs_per_point: 5,
            tx_per_node: 1000,
        }
    }
}

/// Generate lookup tables and write `lut_cluster<k>.txt`. Returns the
/// tables along with any cluster-1 monotonicity warnings.
pub fn cmd_lut_gen(
    settings: &Settings,
    out: &Path,
    opts: &LutGenOptions,
) -> Result<(Vec<LookupTable>, Vec<String>)> {
    ensure_dir(out)?;
    let gen = LutGenConfig {
        params: settings.params,
        radio: settings.radio,
        options: settings.options,
        mean_delay_mode: settings.mean_delay_mode,
        runs_per_point: opts.runs_per_point,
        tx_per_node: opts.tx_per_node,
        seed: settings.seed,
    };
    let mut tables = Vec::new();
    let mut warnings = Vec::new();
    for &cluster in &opts.clusters {
        let table = lut::generate(cluster, &opts.grid, &gen)?;
        if cluster == 1 {
            for (name, values) in [
                ("p_delay", table.rows.iter().map(|r| r.metrics.p_delay).collect::<Vec<_>>()),
                ("p_collision", table.rows.iter().map(|r| r.metrics.p_collision).collect()),
                ("mean_delay_us", table.rows.iter().map(|r| r.metrics.mean_delay_us).collect()),
            ] {
                for (i, drop) in lut::non_decreasing_violations(&values) {
                    warnings.push(format!(
                        "cluster 1 {name} decreases at row {} by {:.2}%",
                        i,
                        drop * 100.0
                    ));
                }
            }
        }
        table.save(&out.join(format!("lut_cluster{cluster}.txt")))?;
        tables.push(table);
    }
    echo_config(
        settings,
        out,
        "lut-gen",
        &[
            (
                "clusters".into(),
                opts.clusters.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
            ),
            (
                "grid".into(),
                format!(
                    "{}:{}:{}",
                    opts.grid.first().copied().unwrap_or(0),
                    opts.grid.last().copied().unwrap_or(0),
                    opts.grid.get(1).map(|&b| b - opts.grid[0]).unwrap_or(0)
                ),
            ),
            ("runs_per_point".into(), opts.runs_per_point.to_string()),
            ("tx_per_node".into(), opts.tx_per_node.to_string()),
        ],
    )?;
    Ok((tables, warnings))
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

/// Parse a positions CSV (`node_id,x,y`, optional header). Every listed
/// node is a CAM transmitter.
pub fn parse_positions(text: &str) -> Result<Vec<Node>> {
    let mut nodes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.to_lowercase().starts_with("node_id") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::format(
                Some(lineno),
                format!("expected 'node_id,x,y', got '{line}'"),
            ));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::format(Some(lineno), format!("bad node id '{}'", fields[0])))?;
        let x: f64 = fields[1]
            .parse()
            .map_err(|_| Error::format(Some(lineno), format!("bad x '{}'", fields[1])))?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(Some(lineno), format!("bad y '{}'", fields[2])))?;
        nodes.push(Node {
            id,
            x,
            y,
            transmits: true,
            paired_rx: None,
        });
    }
    if nodes.is_empty() {
        return Err(Error::format(None, "positions file has no nodes"));
    }
    Ok(nodes)
}

/// The fast path: per-node counts, zone, naive and corrected estimates
/// from prebuilt lookup tables. No simulation runs.
pub fn cmd_estimate(
    settings: &Settings,
    out: &Path,
    positions_path: &Path,
    lut1_path: &Path,
    lut2_path: &Path,
    factors_path: Option<&Path>,
    extent_override: Option<(f64, f64)>,
) -> Result<EstimateReport> {
    let started = Instant::now();
    ensure_dir(out)?;
    let nodes = parse_positions(&std::fs::read_to_string(positions_path)?)?;
    let lut1 = LookupTable::load(lut1_path)?;
    let lut2 = LookupTable::load(lut2_path)?;
    let factors = match factors_path {
        Some(p) => CorrectionFactors::load(p)?,
        None => CorrectionFactors::identity(),
    };
    let extent = match extent_override {
        Some((lo, hi)) => Extent { x_min: lo, x_max: hi },
        None => Extent {
            x_min: nodes.iter().map(|n| n.x).fold(f64::INFINITY, f64::min),
            x_max: nodes.iter().map(|n| n.x).fold(f64::NEG_INFINITY, f64::max),
        },
    };

    let estimate_started = Instant::now();
    let mut estimates = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let est = estimator::estimate_node(
            i,
            &nodes,
            &settings.radio,
            &lut1,
            &lut2,
            &factors,
            extent,
            settings.sensing_cluster,
        )?;
        estimates.push((node.id, node.x, node.y, est));
    }
    let elapsed_estimate = estimate_started.elapsed();

    let mut csv = String::from(
        "node_id,x,y,n_t,n_s,zone,saturated,p_collision_naive,p_delay_naive,p_loss_naive,\
         mean_delay_us_naive,p_delay_est,p_loss_est,mean_delay_us_est\n",
    );
    for (id, x, y, est) in &estimates {
        csv.push_str(&format!(
            "{},{:.3},{:.3},{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            id,
            x,
            y,
            est.counts.n_t,
            est.counts.n_s,
            est.zone.as_str(),
            u8::from(est.saturated),
            metrics_cols(&est.naive),
            est.corrected.p_delay,
            est.corrected.p_loss,
            est.corrected.mean_delay_us,
        ));
    }
    std::fs::write(out.join("estimates.csv"), csv)?;
    echo_config(settings, out, "estimate", &[])?;
    Ok(EstimateReport {
        estimates,
        elapsed: started.elapsed(),
        elapsed_estimate,
    })
}

// ---------------------------------------------------------------------------
// validate + fit
// ---------------------------------------------------------------------------

/// Simulate the configured scenario, compare per-node simulated metrics
/// against the analytical estimate, report correlations, and fit (or
/// apply) correction factors.
pub fn cmd_validate(
    settings: &Settings,
    out: &Path,
    lut1_path: &Path,
    lut2_path: &Path,
    factors_path: Option<&Path>,
) -> Result<ValidationReport> {
    ensure_dir(out)?;
    let lut1 = LookupTable::load(lut1_path)?;
    let lut2 = LookupTable::load(lut2_path)?;
    let spec = settings.scenario.to_spec()?;
    let (nodes, extent) = spec.build()?;

    let records = run_pooled(&nodes, settings, settings.duration_s, settings.seed, settings.runs)?;

    // Per transmitting node: simulated metrics and the naive estimate.
    let mut base_rows: Vec<ValidationRow> = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        if !node.transmits {
            continue;
        }
        let node_records: Vec<&PacketRecord> =
            records.iter().filter(|r| r.tx_node == node.id).collect();
        if node_records.is_empty() {
            continue;
        }
        let sim = aggregate_with(node_records.iter().copied(), settings.mean_delay_mode)?;
        let counts = count_neighbors(i, &nodes, &settings.radio, settings.sensing_cluster)?;
        let zone = classify_zone(node.x, extent, &settings.radio)?;
        let (naive, saturated) = estimator::estimate_naive(counts, &lut1, &lut2)?;
        base_rows.push(ValidationRow {
            id: node.id,
            x: node.x,
            y: node.y,
            n_t: counts.n_t,
            n_s: counts.n_s,
            zone,
            saturated,
            sim,
            naive,
            corrected: naive, // filled below
        });
    }

    let sim_v = |f: fn(&PerfMetrics) -> f64| base_rows.iter().map(|r| f(&r.sim)).collect::<Vec<_>>();
    let naive_v =
        |f: fn(&PerfMetrics) -> f64| base_rows.iter().map(|r| f(&r.naive)).collect::<Vec<_>>();
    let corr_mean_delay = correlation(&sim_v(|m| m.mean_delay_us), &naive_v(|m| m.mean_delay_us))?;
    let corr_p_delay = correlation(&sim_v(|m| m.p_delay), &naive_v(|m| m.p_delay))?;
    let corr_p_loss = correlation(&sim_v(|m| m.p_loss), &naive_v(|m| m.p_loss))?;

    let samples: Vec<FitSample> = base_rows
        .iter()
        .map(|r| FitSample {
            naive: r.naive,
            simulated: r.sim,
            zone: r.zone,
        })
        .collect();

    let (factors, fitted) = match factors_path {
        Some(p) => (CorrectionFactors::load(p)?, false),
        None => (estimator::fit_correction(&samples)?, true),
    };
    for row in &mut base_rows {
        row.corrected = estimator::apply_correction(&row.naive, row.zone, &factors);
    }

    let identity = CorrectionFactors::identity();
    let j_of = |f: &CorrectionFactors| {
        [
            estimator::fit_residual(&samples, f, Metric::MeanDelay),
            estimator::fit_residual(&samples, f, Metric::PDelay),
            estimator::fit_residual(&samples, f, Metric::PLoss),
        ]
    };
    let report = ValidationReport {
        corr_mean_delay,
        corr_p_delay,
        corr_p_loss,
        factors,
        fitted,
        j_naive: j_of(&identity),
        j_corrected: j_of(&factors),
        rows: base_rows,
    };

    write_validation_csv(&report, out)?;
    if fitted {
        factors.save(&out.join("factors.txt"))?;
    }
    write_validation_summary(&report, out)?;
    echo_config(
        settings,
        out,
        "validate",
        &[(
            "factors_file".into(),
            factors_path.map(|p| p.display().to_string()).unwrap_or_else(|| "fitted".into()),
        )],
    )?;
    Ok(report)
}

fn write_validation_csv(report: &ValidationReport, out: &Path) -> Result<()> {
    let mut csv = String::from(
        "node_id,x,y,n_t,n_s,zone,saturated,p_collision,p_delay,p_loss,mean_delay_us,\
         p_collision_naive,p_delay_naive,p_loss_naive,mean_delay_us_naive,\
         p_delay_est,p_loss_est,mean_delay_us_est,ratio_mean_delay,ratio_p_delay,ratio_p_loss\n",
    );
    for r in &report.rows {
        let ratio = |s: f64, n: f64| {
            if n > 0.0 {
                format!("{:.6}", s / n)
            } else {
                String::new()
            }
        };
        csv.push_str(&format!(
            "{},{:.3},{:.3},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{}\n",
            r.id,
            r.x,
            r.y,
            r.n_t,
            r.n_s,
            r.zone.as_str(),
            u8::from(r.saturated),
            metrics_cols(&r.sim),
            metrics_cols(&r.naive),
            r.corrected.p_delay,
            r.corrected.p_loss,
            r.corrected.mean_delay_us,
            ratio(r.sim.mean_delay_us, r.naive.mean_delay_us),
            ratio(r.sim.p_delay, r.naive.p_delay),
            ratio(r.sim.p_loss, r.naive.p_loss),
        ));
    }
    std::fs::write(out.join("validation.csv"), csv)?;
    Ok(())
}

fn write_validation_summary(report: &ValidationReport, out: &Path) -> Result<()> {
    let f = &report.factors;
    let mut s = String::new();
    s.push_str("# validation summary\n");
    s.push_str(&format!("nodes = {}\n", report.rows.len()));
    s.push_str(&format!("corr_mean_delay = {:.4}\n", report.corr_mean_delay));
    s.push_str(&format!("corr_p_delay = {:.4}\n", report.corr_p_delay));
    s.push_str(&format!("corr_p_loss = {:.4}\n", report.corr_p_loss));
    s.push_str(&format!("factors_fitted = {}\n", report.fitted));
    for (metric, c, e) in [
        ("mean_delay", f.mean_delay_center, f.mean_delay_edge),
        ("p_delay", f.p_delay_center, f.p_delay_edge),
        ("p_loss", f.p_loss_center, f.p_loss_edge),
    ] {
        s.push_str(&format!("factor_{metric}_center = {c:.4}\n"));
        s.push_str(&format!("factor_{metric}_edge = {e:.4}\n"));
    }
    for (i, metric) in ["mean_delay", "p_delay", "p_loss"].iter().enumerate() {
        s.push_str(&format!(
            "j_{metric}_naive = {:.6e}\nj_{metric}_corrected = {:.6e}\n",
            report.j_naive[i], report.j_corrected[i]
        ));
    }
    std::fs::write(out.join("validation_summary.txt"), s)?;
    Ok(())
}

/// Re-fit correction factors from a saved `validation.csv`.
pub fn cmd_fit(settings: &Settings, out: &Path, validation_csv: &Path) -> Result<CorrectionFactors> {
    ensure_dir(out)?;
    let text = std::fs::read_to_string(validation_csv)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(None, "empty validation file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize> {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::format(Some(1), format!("missing column '{name}'")))
    };
    let (zone_c, pd_c, pl_c, md_c) = (col("zone")?, col("p_delay")?, col("p_loss")?, col("mean_delay_us")?);
    let (pdn_c, pln_c, mdn_c) = (
        col("p_delay_naive")?,
        col("p_loss_naive")?,
        col("mean_delay_us_naive")?,
    );

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let get = |c: usize| -> Result<f64> {
            f.get(c)
                .ok_or_else(|| Error::format(Some(lineno), "short row"))?
                .parse()
                .map_err(|_| Error::format(Some(lineno), format!("bad number in column {c}")))
        };
        let zone = match f.get(zone_c).copied().unwrap_or_default() {
            "center" => Zone::Center,
            "edge" => Zone::Edge,
            z => return Err(Error::format(Some(lineno), format!("bad zone '{z}'"))),
        };
        samples.push(FitSample {
            naive: PerfMetrics {
                p_collision: 0.0,
                p_delay: get(pdn_c)?,
                p_loss: get(pln_c)?,
                mean_delay_us: get(mdn_c)?,
            },
            simulated: PerfMetrics {
                p_collision: 0.0,
                p_delay: get(pd_c)?,
                p_loss: get(pl_c)?,
                mean_delay_us: get(md_c)?,
            },
            zone,
        });
    }
    let factors = estimator::fit_correction(&samples)?;
    factors.save(&out.join("factors.txt"))?;
    echo_config(settings, out, "fit", &[])?;
    Ok(factors)
}

// ---------------------------------------------------------------------------
// shared helpers for the binary
// ---------------------------------------------------------------------------

/// Fixed output filenames, also documented in the README.
pub fn out_path(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_parse_and_errors() {
        let nodes = parse_positions("node_id,x,y\n0,1.5,2.5\n1,3.0,4.0\n").unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[1].x, 3.0);
        let err = parse_positions("0,1.0\n").unwrap_err();
        assert!(matches!(Error::from(err), Error::Format { line: Some(1), .. }));
        let err = parse_positions("node_id,x,y\n0,one,2\n").unwrap_err();
        assert!(matches!(Error::from(err), Error::Format { line: Some(2), .. }));
    }
}
