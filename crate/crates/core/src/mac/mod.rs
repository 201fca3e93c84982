//! CSMA/CA discrete-event simulation of periodic broadcast CAMs.

pub mod backoff;
mod engine;
mod params;
mod record;

pub use backoff::{BackoffSource, RecordingBackoff, ScriptedBackoff};
pub use engine::{run, run_with_hooks, SimConfig, SimHooks, SimOptions};
pub use params::{EifsMode, MacPhyParams};
pub use record::{Node, NodeId, PacketRecord, SimOutput, Time};
