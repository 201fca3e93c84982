//! Real-time analytical model: neighbor counting per cluster, the naive
//! additive estimate, and correction factors fitted by least squares with
//! a center/edge split.
//!
//! The naive estimate sums the two cluster curves: the time metric adds
//! plainly, probability metrics add with an upper clamp of 1. A fitted
//! multiplicative factor per (metric, zone) then calibrates the estimate
//! against simulation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::lut::LookupTable;
use crate::mac::Node;
use crate::metrics::PerfMetrics;
use crate::radio::RadioConfig;
use crate::scenarios::Extent;

/// Neighbor counts per cluster: `n_t` inside the transmission range,
/// `n_s` in the annulus out to the sensing range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NeighborCounts {
    pub n_t: u32,
    pub n_s: u32,
}

/// Which reading of "inside of sensing range" the second count uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingClusterMode {
    /// Annulus only: the inner disc is excluded so nothing is counted in
    /// both clusters. Default.
    #[default]
    Annulus,
    /// Whole sensing disc, inner disc included; exposed for comparison.
    FullDisc,
}

/// Count contending neighbors of `nodes[idx]` per cluster. Only nodes that
/// generate traffic count; silent probe receivers do not contend and are
/// excluded, as is the node itself. Boundaries are inclusive: a node at
/// exactly the transmission range is in `n_t`, at exactly the sensing
/// range in `n_s`.
pub fn count_neighbors(
    idx: usize,
    nodes: &[Node],
    radio: &RadioConfig,
    mode: SensingClusterMode,
) -> Result<NeighborCounts> {
    let t_range = radio.transmission_range_m()?;
    let s_range = radio.sensing_range_m()?;
    let me = &nodes[idx];
    let mut counts = NeighborCounts::default();
    for (j, other) in nodes.iter().enumerate() {
        if j == idx || !other.transmits {
            continue;
        }
        let d = me.distance_to(other);
        if d <= t_range {
            counts.n_t += 1;
            if mode == SensingClusterMode::FullDisc {
                counts.n_s += 1;
            }
        } else if d <= s_range {
            counts.n_s += 1;
        }
    }
    Ok(counts)
}

/// Scenario zone of a node: `Edge` when its sensing disc extends past the
/// x-extent of the scenario, `Center` otherwise (boundary inclusive to
/// center).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Zone {
    Center,
    Edge,
}

impl Zone {
    pub fn as_str(&self) -> &'static str {
        match self {
            Zone::Center => "center",
            Zone::Edge => "edge",
        }
    }
}

pub fn classify_zone(x: f64, extent: Extent, radio: &RadioConfig) -> Result<Zone> {
    let s = radio.sensing_range_m()?;
    if x - extent.x_min < s || extent.x_max - x < s {
        Ok(Zone::Edge)
    } else {
        Ok(Zone::Center)
    }
}

/// The three calibrated metrics. Collision probability is carried through
/// estimation for completeness but not corrected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MeanDelay,
    PDelay,
    PLoss,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::MeanDelay, Metric::PDelay, Metric::PLoss];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::MeanDelay => "mean_delay",
            Metric::PDelay => "p_delay",
            Metric::PLoss => "p_loss",
        }
    }

    fn of(&self, m: &PerfMetrics) -> f64 {
        match self {
            Metric::MeanDelay => m.mean_delay_us,
            Metric::PDelay => m.p_delay,
            Metric::PLoss => m.p_loss,
        }
    }
}

/// Multiplicative correction per metric and zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionFactors {
    pub mean_delay_center: f64,
    pub mean_delay_edge: f64,
    pub p_delay_center: f64,
    pub p_delay_edge: f64,
    pub p_loss_center: f64,
    pub p_loss_edge: f64,
}

impl Default for CorrectionFactors {
    fn default() -> Self {
        CorrectionFactors::identity()
    }
}

impl CorrectionFactors {
    pub fn identity() -> Self {
        CorrectionFactors {
            mean_delay_center: 1.0,
            mean_delay_edge: 1.0,
            p_delay_center: 1.0,
            p_delay_edge: 1.0,
            p_loss_center: 1.0,
            p_loss_edge: 1.0,
        }
    }

    pub fn get(&self, metric: Metric, zone: Zone) -> f64 {
        match (metric, zone) {
            (Metric::MeanDelay, Zone::Center) => self.mean_delay_center,
            (Metric::MeanDelay, Zone::Edge) => self.mean_delay_edge,
            (Metric::PDelay, Zone::Center) => self.p_delay_center,
            (Metric::PDelay, Zone::Edge) => self.p_delay_edge,
            (Metric::PLoss, Zone::Center) => self.p_loss_center,
            (Metric::PLoss, Zone::Edge) => self.p_loss_edge,
        }
    }

    pub fn set(&mut self, metric: Metric, zone: Zone, value: f64) {
        let slot = match (metric, zone) {
            (Metric::MeanDelay, Zone::Center) => &mut self.mean_delay_center,
            (Metric::MeanDelay, Zone::Edge) => &mut self.mean_delay_edge,
            (Metric::PDelay, Zone::Center) => &mut self.p_delay_center,
            (Metric::PDelay, Zone::Edge) => &mut self.p_delay_edge,
            (Metric::PLoss, Zone::Center) => &mut self.p_loss_center,
            (Metric::PLoss, Zone::Edge) => &mut self.p_loss_edge,
        };
        *slot = value;
    }

    pub fn validate(&self) -> Result<()> {
        for metric in Metric::ALL {
            for zone in [Zone::Center, Zone::Edge] {
                let v = self.get(metric, zone);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "factor {} {} must be positive, got {v}",
                        metric.as_str(),
                        zone.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# vanetsim-factors v1\n");
        for metric in Metric::ALL {
            for zone in [Zone::Center, Zone::Edge] {
                s.push_str(&format!(
                    "{} {} {:.5e}\n",
                    metric.as_str(),
                    zone.as_str(),
                    self.get(metric, zone)
                ));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut f = CorrectionFactors::identity();
        let mut seen = 0;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                if idx == 0 && line != "# vanetsim-factors v1" {
                    return Err(Error::format(Some(lineno), "unsupported factors header"));
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::format(Some(lineno), "expected 'metric zone value'"));
            }
            let metric = match parts[0] {
                "mean_delay" => Metric::MeanDelay,
                "p_delay" => Metric::PDelay,
                "p_loss" => Metric::PLoss,
                m => return Err(Error::format(Some(lineno), format!("unknown metric '{m}'"))),
            };
            let zone = match parts[1] {
                "center" => Zone::Center,
                "edge" => Zone::Edge,
                z => return Err(Error::format(Some(lineno), format!("unknown zone '{z}'"))),
            };
            let value: f64 = parts[2]
                .parse()
                .map_err(|_| Error::format(Some(lineno), format!("bad value '{}'", parts[2])))?;
            f.set(metric, zone, value);
            seen += 1;
        }
        if seen != 6 {
            return Err(Error::format(None, format!("expected 6 factor rows, got {seen}")));
        }
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        CorrectionFactors::from_text(&std::fs::read_to_string(path)?)
    }
}

/// A node's estimate: the naive additive value and the corrected one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub counts: NeighborCounts,
    pub zone: Zone,
    pub naive: PerfMetrics,
    pub corrected: PerfMetrics,
    /// A neighbor count exceeded the table grid and was clamped.
    pub saturated: bool,
}

/// Naive estimate: time metric is the plain sum of the two cluster
/// lookups, probability metrics are summed and clamped to 1.
pub fn estimate_naive(
    counts: NeighborCounts,
    lut1: &LookupTable,
    lut2: &LookupTable,
) -> Result<(PerfMetrics, bool)> {
    if lut1.cluster != 1 || lut2.cluster != 2 {
        return Err(Error::Config(format!(
            "expected cluster 1 and 2 tables, got {} and {}",
            lut1.cluster, lut2.cluster
        )));
    }
    let (m1, sat1) = lut1.lookup(counts.n_t);
    let (m2, sat2) = lut2.lookup(counts.n_s);
    let clamp = |v: f64| v.min(1.0);
    Ok((
        PerfMetrics {
            p_collision: clamp(m1.p_collision + m2.p_collision),
            p_delay: clamp(m1.p_delay + m2.p_delay),
            p_loss: clamp(m1.p_loss + m2.p_loss),
            mean_delay_us: m1.mean_delay_us + m2.mean_delay_us,
        },
        sat1 || sat2,
    ))
}

/// Apply zone factors to a naive estimate, re-clamping probabilities.
pub fn apply_correction(
    naive: &PerfMetrics,
    zone: Zone,
    factors: &CorrectionFactors,
) -> PerfMetrics {
    PerfMetrics {
        p_collision: naive.p_collision,
        p_delay: (naive.p_delay * factors.get(Metric::PDelay, zone)).min(1.0),
        p_loss: (naive.p_loss * factors.get(Metric::PLoss, zone)).min(1.0),
        mean_delay_us: naive.mean_delay_us * factors.get(Metric::MeanDelay, zone),
    }
}

/// Full per-node estimate.
pub fn estimate_node(
    idx: usize,
    nodes: &[Node],
    radio: &RadioConfig,
    lut1: &LookupTable,
    lut2: &LookupTable,
    factors: &CorrectionFactors,
    extent: Extent,
    mode: SensingClusterMode,
) -> Result<Estimate> {
    let counts = count_neighbors(idx, nodes, radio, mode)?;
    let zone = classify_zone(nodes[idx].x, extent, radio)?;
    let (naive, saturated) = estimate_naive(counts, lut1, lut2)?;
    let corrected = apply_correction(&naive, zone, factors);
    Ok(Estimate {
        counts,
        zone,
        naive,
        corrected,
        saturated,
    })
}

/// One fitting observation: a node's naive estimate against its simulated
/// metrics and its zone.
#[derive(Debug, Clone, Copy)]
pub struct FitSample {
    pub naive: PerfMetrics,
    pub simulated: PerfMetrics,
    pub zone: Zone,
}

/// Least-squares correction factors per (metric, zone): the closed-form
/// minimizer of `sum (f * naive - simulated)^2` is
/// `sum(naive * simulated) / sum(naive^2)`.
pub fn fit_correction(samples: &[FitSample]) -> Result<CorrectionFactors> {
    let mut out = CorrectionFactors::identity();
    for zone in [Zone::Center, Zone::Edge] {
        let zone_samples: Vec<&FitSample> = samples.iter().filter(|s| s.zone == zone).collect();
        if zone_samples.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples in zone {}, got {}",
                zone.as_str(),
                zone_samples.len()
            )));
        }
        for metric in Metric::ALL {
            let mut xy = 0.0;
            let mut xx = 0.0;
            for s in &zone_samples {
                let x = metric.of(&s.naive);
                let y = metric.of(&s.simulated);
                xy += x * y;
                xx += x * x;
            }
            if xx == 0.0 {
                return Err(Error::DegenerateFit(format!(
                    "all naive {} values are zero in zone {}",
                    metric.as_str(),
                    zone.as_str()
                )));
            }
            out.set(metric, zone, xy / xx);
        }
    }
    Ok(out)
}

/// Residual sum of squares per metric for a factor set (identity factors
/// give the naive residual).
pub fn fit_residual(samples: &[FitSample], factors: &CorrectionFactors, metric: Metric) -> f64 {
    samples
        .iter()
        .map(|s| {
            let f = factors.get(metric, s.zone);
            let e = f * metric.of(&s.naive) - metric.of(&s.simulated);
            e * e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::{LutRow, LookupTable, Provenance};
    use crate::metrics::MeanDelayMode;

    fn table(cluster: u8, rows: &[(u32, f64, f64, f64, f64)]) -> LookupTable {
        LookupTable {
            cluster,
            rows: rows
                .iter()
                .map(|&(n, pc, pd, pl, md)| LutRow {
                    n,
                    metrics: PerfMetrics {
                        p_collision: pc,
                        p_delay: pd,
                        p_loss: pl,
                        mean_delay_us: md,
                    },
                })
                .collect(),
            provenance: Provenance {
                params_hash: String::new(),
                seed: 0,
                runs_per_point: 1,
                tx_per_node: 1,
                mean_delay: MeanDelayMode::default(),
            },
        }
    }

    fn node(id: u32, x: f64, transmits: bool) -> Node {
        Node {
            id,
            x,
            y: 0.0,
            transmits,
            paired_rx: None,
        }
    }

    #[test]
    fn counts_respect_cluster_geometry() {
        let radio = RadioConfig::default();
        let mut nodes = vec![node(0, 0.0, true)];
        for i in 0..40 {
            nodes.push(node(1 + i, 60.0, true));
        }
        for i in 0..40 {
            nodes.push(node(41 + i, 140.0, true));
        }
        let c = count_neighbors(0, &nodes, &radio, SensingClusterMode::Annulus).unwrap();
        assert_eq!(c, NeighborCounts { n_t: 40, n_s: 40 });
        let full = count_neighbors(0, &nodes, &radio, SensingClusterMode::FullDisc).unwrap();
        assert_eq!(full, NeighborCounts { n_t: 40, n_s: 80 });
    }

    #[test]
    fn lone_node_counts_nothing() {
        let radio = RadioConfig::default();
        let nodes = vec![node(0, 0.0, true)];
        let c = count_neighbors(0, &nodes, &radio, SensingClusterMode::Annulus).unwrap();
        assert_eq!(c, NeighborCounts::default());
    }

    #[test]
    fn boundaries_are_inclusive() {
        let radio = RadioConfig::default();
        let nodes = vec![
            node(0, 0.0, true),
            node(1, 115.0, true),
            node(2, 175.0, true),
            node(3, 175.2, true),
        ];
        let c = count_neighbors(0, &nodes, &radio, SensingClusterMode::Annulus).unwrap();
        assert_eq!(c, NeighborCounts { n_t: 1, n_s: 1 });
    }

    #[test]
    fn silent_nodes_do_not_count() {
        let radio = RadioConfig::default();
        let nodes = vec![node(0, 0.0, true), node(1, 60.0, false), node(2, 60.0, true)];
        let c = count_neighbors(0, &nodes, &radio, SensingClusterMode::Annulus).unwrap();
        assert_eq!(c.n_t, 1);
    }

    #[test]
    fn zone_classification_examples() {
        let radio = RadioConfig::default();
        let extent = Extent { x_min: 0.0, x_max: 1500.0 };
        assert_eq!(classify_zone(750.0, extent, &radio).unwrap(), Zone::Center);
        assert_eq!(classify_zone(100.0, extent, &radio).unwrap(), Zone::Edge);
        assert_eq!(classify_zone(1450.0, extent, &radio).unwrap(), Zone::Edge);
        // Boundary inclusive to center.
        assert_eq!(classify_zone(175.0, extent, &radio).unwrap(), Zone::Center);
    }

    #[test]
    fn naive_estimation_sums_and_clamps() {
        let lut1 = table(1, &[(40, 0.4, 0.7, 0.1, 300.0)]);
        let lut2 = table(2, &[(40, 0.1, 0.5, 0.05, 200.0)]);
        // Single-cluster case: second term is the zero anchor.
        let (m, sat) = estimate_naive(NeighborCounts { n_t: 40, n_s: 0 }, &lut1, &lut2).unwrap();
        assert!(!sat);
        assert_eq!(m.p_delay, 0.7);
        assert_eq!(m.mean_delay_us, 300.0);
        // Probability clamp at 1, time adds plainly.
        let (m, _) = estimate_naive(NeighborCounts { n_t: 40, n_s: 40 }, &lut1, &lut2).unwrap();
        assert_eq!(m.p_delay, 1.0);
        assert_eq!(m.mean_delay_us, 500.0);
        // Zero counts estimate zero.
        let (m, _) = estimate_naive(NeighborCounts::default(), &lut1, &lut2).unwrap();
        assert_eq!(m, PerfMetrics::default());
        // Wrong cluster pairing is a configuration error.
        assert!(estimate_naive(NeighborCounts::default(), &lut2, &lut1).is_err());
    }

    #[test]
    fn correction_examples() {
        let mut f = CorrectionFactors::identity();
        f.mean_delay_center = 1.0857;
        f.p_loss_edge = 2.9121;
        let naive = PerfMetrics {
            p_collision: 0.2,
            p_delay: 0.5,
            p_loss: 0.40,
            mean_delay_us: 100.0,
        };
        let c = apply_correction(&naive, Zone::Center, &f);
        assert!((c.mean_delay_us - 108.57).abs() < 1e-9);
        let e = apply_correction(&naive, Zone::Edge, &f);
        assert_eq!(e.p_loss, 1.0); // 2.9121 * 0.40 clamps
        let id = apply_correction(&naive, Zone::Center, &CorrectionFactors::identity());
        assert_eq!(id, naive);
    }

    #[test]
    fn fit_recovers_hand_computed_factor() {
        // naive (1, 2), simulated (2, 3): f = (1*2 + 2*3) / (1 + 4) = 1.6.
        let mk = |n: f64, s: f64, zone| FitSample {
            naive: PerfMetrics {
                p_collision: 0.0,
                p_delay: n.min(1.0),
                p_loss: n.min(1.0),
                mean_delay_us: n,
            },
            simulated: PerfMetrics {
                p_collision: 0.0,
                p_delay: s.min(1.0),
                p_loss: s.min(1.0),
                mean_delay_us: s,
            },
            zone,
        };
        let samples = vec![
            mk(1.0, 2.0, Zone::Center),
            mk(2.0, 3.0, Zone::Center),
            mk(1.0, 2.0, Zone::Edge),
            mk(2.0, 3.0, Zone::Edge),
        ];
        let f = fit_correction(&samples).unwrap();
        assert!((f.mean_delay_center - 1.6).abs() < 1e-12);
        assert!((f.mean_delay_edge - 1.6).abs() < 1e-12);
    }

    #[test]
    fn fit_errors_on_degenerate_input() {
        let zero = PerfMetrics::default();
        let one = PerfMetrics {
            p_collision: 0.0,
            p_delay: 0.5,
            p_loss: 0.5,
            mean_delay_us: 1.0,
        };
        let samples = vec![
            FitSample { naive: zero, simulated: one, zone: Zone::Center },
            FitSample { naive: zero, simulated: one, zone: Zone::Center },
            FitSample { naive: one, simulated: one, zone: Zone::Edge },
            FitSample { naive: one, simulated: one, zone: Zone::Edge },
        ];
        assert!(matches!(fit_correction(&samples), Err(Error::DegenerateFit(_))));
        // Too few samples in one zone.
        assert!(fit_correction(&samples[..3]).is_err());
    }

    #[test]
    fn factors_file_round_trip() {
        let f = CorrectionFactors {
            mean_delay_center: 1.0857,
            mean_delay_edge: 1.3048,
            p_delay_center: 0.7516,
            p_delay_edge: 0.9671,
            p_loss_center: 2.2617,
            p_loss_edge: 2.9121,
        };
        let text = f.to_text();
        let back = CorrectionFactors::from_text(&text).unwrap();
        assert_eq!(back, f);
        assert!(CorrectionFactors::from_text("# vanetsim-factors v1\nmean_delay center 1.0\n").is_err());
        assert!(CorrectionFactors::from_text("# vanetsim-factors v1\nbogus center 1 2 3\n").is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::lut::{LutRow, Provenance};
    use crate::metrics::MeanDelayMode;
    use proptest::prelude::*;

    fn monotone_table(cluster: u8, steps: &[f64]) -> LookupTable {
        // Cumulative sums give non-decreasing rows.
        let mut acc = 0.0;
        let rows = steps
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                acc += s;
                LutRow {
                    n: (i as u32 + 1) * 5,
                    metrics: PerfMetrics {
                        p_collision: (acc / 10.0).min(1.0),
                        p_delay: (acc / 5.0).min(1.0),
                        p_loss: (acc / 20.0).min(1.0),
                        mean_delay_us: acc * 100.0,
                    },
                }
            })
            .collect();
        LookupTable {
            cluster,
            rows,
            provenance: Provenance {
                params_hash: String::new(),
                seed: 0,
                runs_per_point: 1,
                tx_per_node: 1,
                mean_delay: MeanDelayMode::default(),
            },
        }
    }

    proptest! {
        #[test]
        fn naive_estimate_is_monotone_in_counts(
            steps1 in proptest::collection::vec(0.0f64..0.5, 4),
            steps2 in proptest::collection::vec(0.0f64..0.5, 4),
            nt in 0u32..25,
            ns in 0u32..25,
        ) {
            let lut1 = monotone_table(1, &steps1);
            let lut2 = monotone_table(2, &steps2);
            let base = estimate_naive(NeighborCounts { n_t: nt, n_s: ns }, &lut1, &lut2).unwrap().0;
            let up_t = estimate_naive(NeighborCounts { n_t: nt + 1, n_s: ns }, &lut1, &lut2).unwrap().0;
            let up_s = estimate_naive(NeighborCounts { n_t: nt, n_s: ns + 1 }, &lut1, &lut2).unwrap().0;
            for m in [up_t, up_s] {
                prop_assert!(m.p_delay + 1e-12 >= base.p_delay);
                prop_assert!(m.p_loss + 1e-12 >= base.p_loss);
                prop_assert!(m.mean_delay_us + 1e-9 >= base.mean_delay_us);
            }
        }

        #[test]
        fn probabilities_never_exceed_one(
            pd1 in 0.0f64..1.0, pd2 in 0.0f64..1.0,
            factor in 0.1f64..10.0,
        ) {
            let naive = PerfMetrics { p_collision: 0.0, p_delay: pd1, p_loss: pd2, mean_delay_us: 10.0 };
            let mut f = CorrectionFactors::identity();
            f.p_delay_center = factor;
            f.p_loss_center = factor;
            let c = apply_correction(&naive, Zone::Center, &f);
            prop_assert!(c.p_delay <= 1.0 && c.p_loss <= 1.0);
        }

        #[test]
        fn fit_recovers_exact_multiples(mult in 0.05f64..8.0, n in 3usize..12) {
            let samples: Vec<FitSample> = (0..n * 2)
                .map(|i| {
                    let x = 0.1 + (i % n) as f64;
                    FitSample {
                        naive: PerfMetrics {
                            p_collision: 0.0,
                            p_delay: (x / 20.0).min(1.0),
                            p_loss: (x / 30.0).min(1.0),
                            mean_delay_us: x * 50.0,
                        },
                        simulated: PerfMetrics {
                            p_collision: 0.0,
                            p_delay: (x / 20.0 * mult).min(1.0),
                            p_loss: (x / 30.0 * mult).min(1.0),
                            mean_delay_us: x * 50.0 * mult,
                        },
                        zone: if i < n { Zone::Center } else { Zone::Edge },
                    }
                })
                .collect();
            let f = fit_correction(&samples).unwrap();
            // Unclamped metric recovers the multiple to 1e-9 relative.
            prop_assert!((f.mean_delay_center - mult).abs() <= 1e-9 * mult);
            prop_assert!((f.mean_delay_edge - mult).abs() <= 1e-9 * mult);
        }
    }
}
