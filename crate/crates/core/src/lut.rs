//! Two-cluster lookup tables: generation, persistence, interpolation.
//!
//! Cluster 1 tabulates the transmitter's metrics with the neighbor group
//! inside the transmission range (60 m); cluster 2 with the group in the
//! sensing-only annulus (140 m). Rows are indexed by neighbor count; an
//! implicit (0, all-zero) anchor row makes the interpolation exact for an
//! uncontended channel.
//!
//! The on-disk format is versioned delimited text — readable, diffable and
//! trivially parseable from any language. Values round-trip bit-exactly at
//! six significant digits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mac::{run, MacPhyParams, SimConfig, SimOptions};
use crate::metrics::{aggregate_with, MeanDelayMode, PerfMetrics};
use crate::mix_seed;
use crate::radio::RadioConfig;
use crate::scenarios::{build_collocated, CLUSTER1_DISTANCE_M, CLUSTER2_DISTANCE_M};

/// One table row: transmitter metrics at a given neighbor count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LutRow {
    pub n: u32,
    pub metrics: PerfMetrics,
}

/// How a table was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub params_hash: String,
    pub seed: u64,
    pub runs_per_point: u32,
    pub tx_per_node: u32,
    /// Mean-delay averaging mode the rows were aggregated with.
    pub mean_delay: MeanDelayMode,
}

/// Per-cluster metric curves indexed by neighbor count.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    /// 1 = transmission-range cluster, 2 = sensing-annulus cluster.
    pub cluster: u8,
    /// Rows with strictly increasing neighbor counts.
    pub rows: Vec<LutRow>,
    pub provenance: Provenance,
}

impl LookupTable {
    pub fn validate(&self) -> Result<()> {
        if self.cluster != 1 && self.cluster != 2 {
            return Err(Error::format(None, format!("bad cluster {}", self.cluster)));
        }
        if self.rows.is_empty() {
            return Err(Error::format(None, "table has no rows"));
        }
        for w in self.rows.windows(2) {
            if w[1].n <= w[0].n {
                return Err(Error::format(
                    None,
                    format!("neighbor counts not strictly increasing at n = {}", w[1].n),
                ));
            }
        }
        for row in &self.rows {
            if row.n == 0 {
                return Err(Error::format(None, "n = 0 is the implicit anchor row"));
            }
            row.metrics
                .validate()
                .map_err(|e| Error::format(None, format!("row n = {}: {e}", row.n)))?;
        }
        Ok(())
    }

    /// Piecewise-linear interpolation between bracketing rows, with the
    /// (0, zero-metrics) anchor included. Counts above the last row clamp
    /// to it; the flag reports that saturation.
    pub fn lookup(&self, n: u32) -> (PerfMetrics, bool) {
        let anchor = LutRow {
            n: 0,
            metrics: PerfMetrics::default(),
        };
        let last = *self.rows.last().expect("validated table");
        if n >= last.n {
            return (last.metrics, n > last.n);
        }
        let mut lo = anchor;
        let mut hi = last;
        for row in &self.rows {
            if row.n == n {
                return (row.metrics, false);
            }
            if row.n < n {
                lo = *row;
            } else {
                hi = *row;
                break;
            }
        }
        let t = (n - lo.n) as f64 / (hi.n - lo.n) as f64;
        let lerp = |a: f64, b: f64| a + t * (b - a);
        (
            PerfMetrics {
                p_collision: lerp(lo.metrics.p_collision, hi.metrics.p_collision),
                p_delay: lerp(lo.metrics.p_delay, hi.metrics.p_delay),
                p_loss: lerp(lo.metrics.p_loss, hi.metrics.p_loss),
                mean_delay_us: lerp(lo.metrics.mean_delay_us, hi.metrics.mean_delay_us),
            },
            false,
        )
    }

    /// Serialize to the versioned text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# vanetsim-lut v1\n");
        s.push_str(&format!("# cluster {}\n", self.cluster));
        s.push_str(&format!("# params_hash {}\n", self.provenance.params_hash));
        s.push_str(&format!("# seed {}\n", self.provenance.seed));
        s.push_str(&format!("# runs_per_point {}\n", self.provenance.runs_per_point));
        s.push_str(&format!("# tx_per_node {}\n", self.provenance.tx_per_node));
        s.push_str(&format!(
            "# mean_delay {}\n",
            match self.provenance.mean_delay {
                MeanDelayMode::AllPackets => "all_packets",
                MeanDelayMode::DelayedOnly => "delayed_only",
            }
        ));
        s.push_str("# columns n p_collision p_delay p_loss mean_delay_us\n");
        for row in &self.rows {
            s.push_str(&format!(
                "{} {:.5e} {:.5e} {:.5e} {:.5e}\n",
                row.n,
                row.metrics.p_collision,
                row.metrics.p_delay,
                row.metrics.p_loss,
                row.metrics.mean_delay_us,
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<LookupTable> {
        let mut cluster = None;
        let mut provenance = Provenance {
            params_hash: String::new(),
            seed: 0,
            runs_per_point: 0,
            tx_per_node: 0,
            mean_delay: MeanDelayMode::default(),
        };
        let mut rows = Vec::new();
        let mut saw_version = false;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if idx == 0 {
                    if rest != "vanetsim-lut v1" {
                        return Err(Error::format(
                            Some(lineno),
                            format!("unsupported header '{rest}'"),
                        ));
                    }
                    saw_version = true;
                    continue;
                }
                let mut parts = rest.splitn(2, ' ');
                let key = parts.next().unwrap_or_default();
                let value = parts.next().unwrap_or_default().trim();
                match key {
                    "cluster" => {
                        cluster = Some(value.parse::<u8>().map_err(|_| {
                            Error::format(Some(lineno), format!("bad cluster '{value}'"))
                        })?)
                    }
                    "params_hash" => provenance.params_hash = value.to_string(),
                    "seed" => {
                        provenance.seed = value.parse().map_err(|_| {
                            Error::format(Some(lineno), format!("bad seed '{value}'"))
                        })?
                    }
                    "runs_per_point" => {
                        provenance.runs_per_point = value.parse().map_err(|_| {
                            Error::format(Some(lineno), format!("bad runs_per_point '{value}'"))
                        })?
                    }
                    "tx_per_node" => {
                        provenance.tx_per_node = value.parse().map_err(|_| {
                            Error::format(Some(lineno), format!("bad tx_per_node '{value}'"))
                        })?
                    }
                    "mean_delay" => {
                        provenance.mean_delay = match value {
                            "all_packets" => MeanDelayMode::AllPackets,
                            "delayed_only" => MeanDelayMode::DelayedOnly,
                            other => {
                                return Err(Error::format(
                                    Some(lineno),
                                    format!("bad mean_delay mode '{other}'"),
                                ))
                            }
                        }
                    }
                    "columns" => {}
                    other => {
                        return Err(Error::format(
                            Some(lineno),
                            format!("unknown header key '{other}'"),
                        ))
                    }
                }
                continue;
            }
            if !saw_version {
                return Err(Error::format(Some(lineno), "missing version header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::format(
                    Some(lineno),
                    format!("expected 5 columns, got {}", fields.len()),
                ));
            }
            let n: u32 = fields[0]
                .parse()
                .map_err(|_| Error::format(Some(lineno), format!("bad count '{}'", fields[0])))?;
            let mut vals = [0.0f64; 4];
            for (k, f) in fields[1..].iter().enumerate() {
                vals[k] = f
                    .parse()
                    .map_err(|_| Error::format(Some(lineno), format!("bad value '{f}'")))?;
            }
            rows.push(LutRow {
                n,
                metrics: PerfMetrics {
                    p_collision: vals[0],
                    p_delay: vals[1],
                    p_loss: vals[2],
                    mean_delay_us: vals[3],
                },
            });
        }

        let table = LookupTable {
            cluster: cluster.ok_or_else(|| Error::format(None, "missing cluster header"))?,
            rows,
            provenance,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<LookupTable> {
        let text = std::fs::read_to_string(path)?;
        LookupTable::from_text(&text)
    }
}

/// Everything LuT generation needs besides the grid.
#[derive(Debug, Clone, Copy)]
pub struct LutGenConfig {
    pub params: MacPhyParams,
    pub radio: RadioConfig,
    pub options: SimOptions,
    pub mean_delay_mode: MeanDelayMode,
    pub runs_per_point: u32,
    pub tx_per_node: u32,
    pub seed: u64,
}

impl LutGenConfig {
    pub fn new(seed: u64) -> Self {
        LutGenConfig {
            params: MacPhyParams::default(),
            radio: RadioConfig::default(),
            options: SimOptions::default(),
            // All-packets averaging keeps the additive two-cluster
            // decomposition consistent: per-cluster expected delays sum.
            mean_delay_mode: MeanDelayMode::AllPackets,
            runs_per_point: 5,
            tx_per_node: 1000,
            seed,
        }
    }

    fn params_hash(&self, cluster: u8, distance: f64) -> String {
        let p = &self.params;
        let b = &self.radio.budget;
        let canon = format!(
            "cluster={cluster} dist={distance:.6} tx={:.6} len={} rate={:.6} cw={} aifsn={} \
             slot={} sifs={} eifs={} plcp={} payload={:.6} sens={:.6} cs={:.6} noise={:.6} \
             sinr={:.6} pl0={:.6} d0={:.6} n={:.6} lockout={} eifs_mode={:?} mean={:?}",
            p.tx_power_dbm,
            p.packet_length_bytes,
            p.cam_rate_hz,
            p.cw_min,
            p.aifsn,
            p.slot_us,
            p.sifs_us,
            p.eifs_us,
            p.plcp_overhead_us,
            p.payload_rate_mbps,
            b.rx_sensitivity_dbm,
            b.carrier_sense_dbm,
            b.noise_floor_dbm,
            b.sinr_threshold_db,
            self.radio.model.pl_d0_db,
            self.radio.model.d0_m,
            self.radio.model.exponent,
            self.options.rx_lockout,
            self.options.eifs_mode,
            self.mean_delay_mode,
        );
        format!("{:016x}", fnv64(canon.as_bytes()))
    }
}

/// Neighbor-group distance for a cluster id.
pub fn cluster_distance_m(cluster: u8) -> Result<f64> {
    match cluster {
        1 => Ok(CLUSTER1_DISTANCE_M),
        2 => Ok(CLUSTER2_DISTANCE_M),
        c => Err(Error::invalid(format!("cluster must be 1 or 2, got {c}"))),
    }
}

/// Generate a lookup table for `cluster` over the neighbor-count grid.
///
/// Each grid point runs `runs_per_point` independently seeded simulations
/// of the collocated scenario and pools the transmitter's packets before
/// aggregating. Points and runs execute in parallel.
pub fn generate(cluster: u8, grid: &[u32], cfg: &LutGenConfig) -> Result<LookupTable> {
    let distance = cluster_distance_m(cluster)?;
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid must be strictly ascending"));
    }
    if grid[0] == 0 {
        return Err(Error::invalid("grid must not contain 0; the anchor row is implicit"));
    }
    if cfg.runs_per_point == 0 || cfg.tx_per_node == 0 {
        return Err(Error::invalid("runs_per_point and tx_per_node must be positive"));
    }

    let duration_s = cfg.tx_per_node as f64 / cfg.params.cam_rate_hz;
    let jobs: Vec<(u32, u32)> = grid
        .iter()
        .flat_map(|&n| (0..cfg.runs_per_point).map(move |r| (n, r)))
        .collect();

    let results: Vec<((u32, u32), Result<Vec<crate::mac::PacketRecord>>)> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let out = (|| {
                let (nodes, _) = build_collocated(n, distance, cfg.seed)?;
                let sim = SimConfig {
                    params: cfg.params,
                    radio: cfg.radio,
                    options: cfg.options,
                    duration_s,
                    seed: mix_seed(mix_seed(cfg.seed, n as u64), r as u64),
                };
                let out = run(&nodes, &sim)?;
                Ok(out.records.into_iter().filter(|p| p.tx_node == 0).collect())
            })();
            ((n, r), out)
        })
        .collect();

    let mut per_point: std::collections::BTreeMap<u32, Vec<crate::mac::PacketRecord>> =
        std::collections::BTreeMap::new();
    for ((n, _), res) in results {
        per_point.entry(n).or_default().extend(res?);
    }

    let mut rows = Vec::with_capacity(grid.len());
    for (n, records) in per_point {
        let metrics = aggregate_with(&records, cfg.mean_delay_mode)?;
        rows.push(LutRow { n, metrics });
    }

    let table = LookupTable {
        cluster,
        rows,
        provenance: Provenance {
            params_hash: cfg.params_hash(cluster, distance),
            seed: cfg.seed,
            runs_per_point: cfg.runs_per_point,
            tx_per_node: cfg.tx_per_node,
            mean_delay: cfg.mean_delay_mode,
        },
    };
    table.validate()?;
    Ok(table)
}

/// Indices (and relative drop sizes) where a sequence decreases; used for
/// the contention-grows-with-density sanity check on cluster-1 curves.
pub fn non_decreasing_violations(values: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (i, w) in values.windows(2).enumerate() {
        if w[1] < w[0] {
            let rel = if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 };
            out.push((i + 1, rel));
        }
    }
    out
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> LookupTable {
        LookupTable {
            cluster: 1,
            rows: vec![
                LutRow {
                    n: 5,
                    metrics: PerfMetrics {
                        p_collision: 0.05,
                        p_delay: 0.10,
                        p_loss: 0.01,
                        mean_delay_us: 400.0,
                    },
                },
                LutRow {
                    n: 10,
                    metrics: PerfMetrics {
                        p_collision: 0.10,
                        p_delay: 0.20,
                        p_loss: 0.02,
                        mean_delay_us: 500.0,
                    },
                },
            ],
            provenance: Provenance {
                params_hash: "deadbeefdeadbeef".into(),
                seed: 42,
                runs_per_point: 5,
                tx_per_node: 1000,
                mean_delay: MeanDelayMode::default(),
            },
        }
    }

    #[test]
    fn lookup_anchor_grid_and_interpolation() {
        let t = sample_table();
        assert_eq!(t.lookup(0), (PerfMetrics::default(), false));
        assert_eq!(t.lookup(5).0.p_delay, 0.10);
        // n = 7 between rows 5 and 10: 0.6 * row(5) + 0.4 * row(10).
        let (m, sat) = t.lookup(7);
        assert!(!sat);
        assert!((m.p_delay - (0.6 * 0.10 + 0.4 * 0.20)).abs() < 1e-12);
        assert!((m.mean_delay_us - (0.6 * 400.0 + 0.4 * 500.0)).abs() < 1e-12);
        // Below the first row interpolates from the anchor.
        let (m, _) = t.lookup(1);
        assert!((m.p_delay - 0.02).abs() < 1e-12);
        // Above the grid clamps and flags saturation.
        let (m, sat) = t.lookup(50);
        assert!(sat);
        assert_eq!(m.p_delay, 0.20);
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let t = sample_table();
        let text = t.to_text();
        let back = LookupTable::from_text(&text).unwrap();
        assert_eq!(back.cluster, t.cluster);
        assert_eq!(back.provenance, t.provenance);
        assert_eq!(back.rows.len(), t.rows.len());
        // Six-significant-digit round trip is exact for these values, and
        // re-serialization is byte-identical.
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let t = sample_table();
        // Decreasing counts.
        let mut bad = t.clone();
        bad.rows.swap(0, 1);
        assert!(bad.validate().is_err());
        // Out-of-range probability.
        let mut bad = t.clone();
        bad.rows[0].metrics.p_loss = 1.2;
        assert!(bad.validate().is_err());
        // Bad cluster id.
        let mut bad = t.clone();
        bad.cluster = 3;
        assert!(bad.validate().is_err());
        // Text-level errors carry line numbers.
        let err = LookupTable::from_text("# vanetsim-lut v1\n# cluster 1\n5 0.1 0.1\n");
        assert!(matches!(err, Err(Error::Format { line: Some(3), .. })));
        assert!(LookupTable::from_text("# other-format v9\n").is_err());
    }

    #[test]
    fn single_row_generation_works() {
        let mut cfg = LutGenConfig::new(11);
        cfg.runs_per_point = 1;
        cfg.tx_per_node = 20;
        let t = generate(1, &[5], &cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].n, 5);
        assert_eq!(t.provenance.tx_per_node, 20);
        // Same seed regenerates the same table.
        let t2 = generate(1, &[5], &cfg).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn generation_rejects_bad_grids() {
        let cfg = LutGenConfig::new(0);
        assert!(generate(1, &[], &cfg).is_err());
        assert!(generate(1, &[0, 5], &cfg).is_err());
        assert!(generate(1, &[5, 5], &cfg).is_err());
        assert!(generate(3, &[5], &cfg).is_err());
    }

    #[test]
    fn violation_scan_flags_drops() {
        assert!(non_decreasing_violations(&[1.0, 2.0, 3.0]).is_empty());
        let v = non_decreasing_violations(&[1.0, 0.9, 3.0]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].0, 1);
        assert!((v[0].1 - 0.1).abs() < 1e-12);
    }
}
