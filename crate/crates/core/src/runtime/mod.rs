//! Actors, correlated randomness, message accounting and the network cost model.

pub mod cost;
pub mod dealer;
pub mod ledger;
pub mod prf;
pub mod session;
pub mod transport;
pub mod wire;

pub use cost::{estimate_time, NetworkPreset, PhaseTime, TimeEstimate};
pub use dealer::{BeaverTriple, CosineMask, Request};
pub use ledger::{CommLedger, LedgerEntry, LedgerRow, Phase, Role};
pub use prf::PrfKey;
pub use session::{CostPlan, ProtocolStats, Provisioning, Session, SessionSeeds, TranscriptEntry};
pub use transport::{InMemoryTransport, TcpTransport, Transport};
pub use wire::{Tag, WireMessage};
