//! The three experiment geometries, built with seeded reproducible
//! placement.
//!
//! All scenarios are static: positions are drawn once and never move.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mac::Node;

/// Cluster-1 geometry puts the neighbor group at 60 m, inside the
/// transmission range; cluster-2 at 140 m, inside the sensing range only.
pub const CLUSTER1_DISTANCE_M: f64 = 60.0;
pub const CLUSTER2_DISTANCE_M: f64 = 140.0;

/// Probe receiver distance used by the collocated scenario and receiver
/// pairing radius in the highway.
pub const PROBE_DISTANCE_M: f64 = 15.0;

/// Separation of the transmitter/receiver pair in the hidden-node sweep.
pub const PAIR_SEPARATION_M: f64 = 5.0;

pub const DEFAULT_LANE_WIDTH_M: f64 = 3.5;

/// Scenario description; round-trips through the run configuration file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    /// Transmitter at the origin, probe receiver at 15 m, `n_neighbors`
    /// collocated at `neighbor_distance_m`.
    Collocated {
        n_neighbors: u32,
        neighbor_distance_m: f64,
        seed: u64,
    },
    /// Tx/Rx pair at the center, two neighbor groups at ±separation/2.
    HiddenSweep {
        total_neighbors: u32,
        separation_m: f64,
        seed: u64,
    },
    /// Straight multi-lane road with uniformly placed OBUs, each paired
    /// with a silent receiver within 15 m.
    Highway {
        length_m: f64,
        lanes_per_direction: u32,
        n_obu: u32,
        lane_width_m: f64,
        seed: u64,
    },
}

/// X-axis extent of a built scenario, used for edge/center classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
}

impl ScenarioSpec {
    pub fn highway_defaults(seed: u64) -> Self {
        ScenarioSpec::Highway {
            length_m: 1500.0,
            lanes_per_direction: 3,
            n_obu: 500,
            lane_width_m: DEFAULT_LANE_WIDTH_M,
            seed,
        }
    }

    pub fn build(&self) -> Result<(Vec<Node>, Extent)> {
        match *self {
            ScenarioSpec::Collocated {
                n_neighbors,
                neighbor_distance_m,
                seed,
            } => build_collocated(n_neighbors, neighbor_distance_m, seed),
            ScenarioSpec::HiddenSweep {
                total_neighbors,
                separation_m,
                seed,
            } => build_hidden_sweep(total_neighbors, separation_m, seed),
            ScenarioSpec::Highway {
                length_m,
                lanes_per_direction,
                n_obu,
                lane_width_m,
                seed,
            } => build_highway(length_m, lanes_per_direction, n_obu, lane_width_m, seed),
        }
    }
}

/// One transmitter at the origin (id 0), a silent probe receiver at 15 m
/// (id 1) and `n_neighbors` transmitting nodes collocated at
/// `neighbor_distance_m` on the same axis. Placement is deterministic;
/// `seed` only matters to the simulation run built on top.
pub fn build_collocated(
    n_neighbors: u32,
    neighbor_distance_m: f64,
    _seed: u64,
) -> Result<(Vec<Node>, Extent)> {
    if !(neighbor_distance_m >= 0.0) {
        return Err(Error::invalid("neighbor distance must be non-negative"));
    }
    let mut nodes = vec![
        Node { id: 0, x: 0.0, y: 0.0, transmits: true, paired_rx: Some(1) },
        Node { id: 1, x: PROBE_DISTANCE_M, y: 0.0, transmits: false, paired_rx: None },
    ];
    for k in 0..n_neighbors {
        nodes.push(Node {
            id: 2 + k,
            x: neighbor_distance_m,
            y: 0.0,
            transmits: true,
            paired_rx: None,
        });
    }
    let x_max = neighbor_distance_m.max(PROBE_DISTANCE_M);
    Ok((nodes, Extent { x_min: 0.0, x_max }))
}

/// Transmitter (id 0) and silent receiver (id 1) 5 m apart at the center;
/// `total_neighbors` split into two groups at ±separation/2. Neighbor loss
/// is adjudicated at the central receiver, which both groups can reach for
/// every separation in the sweep.
pub fn build_hidden_sweep(
    total_neighbors: u32,
    separation_m: f64,
    _seed: u64,
) -> Result<(Vec<Node>, Extent)> {
    if total_neighbors % 2 != 0 {
        return Err(Error::invalid("total_neighbors must be even"));
    }
    if !(separation_m >= 0.0) {
        return Err(Error::invalid("separation must be non-negative"));
    }
    let half = PAIR_SEPARATION_M / 2.0;
    let mut nodes = vec![
        Node { id: 0, x: -half, y: 0.0, transmits: true, paired_rx: Some(1) },
        Node { id: 1, x: half, y: 0.0, transmits: false, paired_rx: None },
    ];
    let group = total_neighbors / 2;
    for k in 0..total_neighbors {
        let x = if k < group {
            -separation_m / 2.0
        } else {
            separation_m / 2.0
        };
        nodes.push(Node {
            id: 2 + k,
            x,
            y: 0.0,
            transmits: true,
            paired_rx: Some(1),
        });
    }
    Ok((
        nodes,
        Extent {
            x_min: -separation_m / 2.0,
            x_max: separation_m / 2.0,
        },
    ))
}

/// `n_obu` transmitting nodes uniform along a `length_m` road with
/// `2 * lanes_per_direction` lanes; each OBU gets a silent paired receiver
/// at a uniform distance in (0, 15] m and uniform bearing, clipped to the
/// road rectangle. OBUs take ids `0..n_obu`, receivers `n_obu..2*n_obu`.
pub fn build_highway(
    length_m: f64,
    lanes_per_direction: u32,
    n_obu: u32,
    lane_width_m: f64,
    seed: u64,
) -> Result<(Vec<Node>, Extent)> {
    if !(length_m > 0.0) {
        return Err(Error::invalid("road length must be positive"));
    }
    if lanes_per_direction == 0 || n_obu == 0 {
        return Err(Error::invalid("lane and node counts must be positive"));
    }
    if !(lane_width_m > 0.0) {
        return Err(Error::invalid("lane width must be positive"));
    }
    let lanes = 2 * lanes_per_direction;
    let half_width = lanes as f64 * lane_width_m / 2.0;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(2 * n_obu as usize);

    for i in 0..n_obu {
        let x = rng.random_range(0.0..length_m);
        let lane = rng.random_range(0..lanes);
        let y = (lane as f64 + 0.5) * lane_width_m - half_width;
        nodes.push(Node { id: i, x, y, transmits: true, paired_rx: Some(n_obu + i) });
    }
    for i in 0..n_obu {
        let obu = nodes[i as usize];
        let d = PROBE_DISTANCE_M * (1.0 - rng.random::<f64>()); // (0, 15]
        let bearing = rng.random_range(0.0..std::f64::consts::TAU);
        let x = (obu.x + d * bearing.cos()).clamp(0.0, length_m);
        let y = (obu.y + d * bearing.sin()).clamp(-half_width, half_width);
        nodes.push(Node { id: n_obu + i, x, y, transmits: false, paired_rx: None });
    }
    Ok((
        nodes,
        Extent {
            x_min: 0.0,
            x_max: length_m,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collocated_layout() {
        let (nodes, _) = build_collocated(40, 60.0, 0).unwrap();
        assert_eq!(nodes.len(), 42);
        assert_eq!(nodes[0].paired_rx, Some(1));
        assert!(!nodes[1].transmits);
        assert!((nodes[1].x - 15.0).abs() < 1e-12);
        assert!(nodes[2..].iter().all(|n| n.x == 60.0 && n.transmits));

        let (lone, _) = build_collocated(0, 0.0, 0).unwrap();
        assert_eq!(lone.len(), 2);
    }

    #[test]
    fn hidden_sweep_symmetry() {
        let (nodes, _) = build_hidden_sweep(80, 220.0, 0).unwrap();
        assert_eq!(nodes.len(), 82);
        let left = nodes.iter().filter(|n| n.x == -110.0).count();
        let right = nodes.iter().filter(|n| n.x == 110.0).count();
        assert_eq!(left, 40);
        assert_eq!(right, 40);
        // Group centroids equidistant from the pair center.
        let (a, _) = build_hidden_sweep(80, 0.0, 0).unwrap();
        assert_eq!(a.iter().filter(|n| n.x == 0.0 && n.transmits).count(), 80);
        assert!(build_hidden_sweep(81, 100.0, 0).is_err());
    }

    #[test]
    fn highway_population_and_determinism() {
        let (a, extent) = build_highway(1500.0, 3, 500, 3.5, 7).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(extent.x_max, 1500.0);
        assert!(a[..500].iter().all(|n| n.transmits));
        assert!(a[500..].iter().all(|n| !n.transmits));
        for i in 0..500usize {
            let rx = &a[500 + i];
            let d = a[i].distance_to(rx);
            assert!(d <= 15.0 + 1e-9, "receiver {i} at {d} m");
            assert!((0.0..=1500.0).contains(&rx.x));
        }
        let (b, _) = build_highway(1500.0, 3, 500, 3.5, 7).unwrap();
        assert_eq!(a, b);
        let (c, _) = build_highway(1500.0, 3, 500, 3.5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn highway_density_scales() {
        // Desk-scale derivation keeps 1 node / 3 m.
        let (full, _) = build_highway(1500.0, 3, 500, 3.5, 1).unwrap();
        let (desk, _) = build_highway(600.0, 3, 200, 3.5, 1).unwrap();
        let density_full: f64 = 500.0 / 1500.0;
        let density_desk: f64 = 200.0 / 600.0;
        assert!((density_full - density_desk).abs() < 1e-12);
        assert_eq!(full.len(), 1000);
        assert_eq!(desk.len(), 400);
    }

    #[test]
    fn highway_rejects_degenerate_inputs() {
        assert!(build_highway(0.0, 3, 10, 3.5, 0).is_err());
        assert!(build_highway(100.0, 0, 10, 3.5, 0).is_err());
        assert!(build_highway(100.0, 3, 0, 3.5, 0).is_err());
    }

    #[test]
    fn single_obu_highway_is_all_quiet() {
        use crate::mac::{run, SimConfig};
        let (nodes, _) = build_highway(600.0, 3, 1, 3.5, 3).unwrap();
        let out = run(&nodes, &SimConfig::new(1.0, 9)).unwrap();
        let m = crate::metrics::aggregate(&out.records).unwrap();
        assert_eq!(m, crate::metrics::PerfMetrics::default());
    }
}
