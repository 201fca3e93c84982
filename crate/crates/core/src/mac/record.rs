//! Node description and the per-packet output record.

use std::collections::BTreeMap;

/// Node identifier. Ids must be unique within a scenario but need not be
/// contiguous.
pub type NodeId = u32;

/// Simulation time in microseconds.
pub type Time = u64;

/// A radio node in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    /// Position, meters.
    pub x: f64,
    pub y: f64,
    /// Whether the node generates CAM traffic. Probe/paired receivers are
    /// silent listeners and never contend for the channel.
    pub transmits: bool,
    /// Designated receiver for this node's packets; loss is adjudicated
    /// there. `None` leaves the packets without a loss outcome.
    pub paired_rx: Option<NodeId>,
}

impl Node {
    pub fn distance_to(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Outcome of one generated CAM.
///
/// `delay` is the back-off time only: the span between the channel-access
/// request and the moment the frame is handed to the PHY. Transmission and
/// propagation time are excluded by definition.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub tx_node: NodeId,
    /// Per-node CAM sequence number, starting at 0.
    pub seq: u32,
    pub requested_at_us: Time,
    /// Grant instant; `None` when the CAM was replaced by a newer one
    /// before ever reaching the PHY (queue depth 1, drop-old).
    pub granted_at_us: Option<Time>,
    /// True when the access attempt arrived during another node's airtime.
    pub collided: bool,
    /// Reception outcome per adjudicated receiver.
    pub received_ok: BTreeMap<NodeId, bool>,
}

impl PacketRecord {
    /// Back-off delay in µs; `None` for dropped packets.
    pub fn delay_us(&self) -> Option<u64> {
        self.granted_at_us.map(|g| g - self.requested_at_us)
    }

    /// Dropped before transmission (replaced by a newer CAM).
    pub fn dropped(&self) -> bool {
        self.granted_at_us.is_none()
    }

    /// Delayed: dropped, or granted strictly after the request.
    pub fn delayed(&self) -> bool {
        match self.delay_us() {
            Some(d) => d > 0,
            None => true,
        }
    }

    /// Lost at the paired receiver (or dropped before transmission).
    pub fn lost(&self) -> bool {
        self.dropped() || self.received_ok.values().any(|ok| !ok)
    }
}

/// Result of one simulation run: every generated CAM, ordered by
/// `(tx_node, seq)`.
#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub records: Vec<PacketRecord>,
}

impl SimOutput {
    pub fn node_records(&self, id: NodeId) -> impl Iterator<Item = &PacketRecord> {
        self.records.iter().filter(move |r| r.tx_node == id)
    }
}
