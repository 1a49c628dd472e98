//! Wall-clock estimates from a communication ledger.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::ledger::{CommLedger, Phase};

/// Link model: one-way bandwidth and a per-round latency charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkPreset {
    pub name: String,
    /// Bits per second.
    pub bandwidth: f64,
    /// Seconds charged per sequential round.
    pub latency: f64,
}

impl NetworkPreset {
    pub fn new(name: &str, bandwidth: f64, latency: f64) -> Result<Self> {
        if bandwidth <= 0.0 || !bandwidth.is_finite() || latency < 0.0 || !latency.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "network preset needs bandwidth > 0 and latency >= 0, got {bandwidth} / {latency}"
            )));
        }
        Ok(Self { name: name.into(), bandwidth, latency })
    }

    /// 3 Gbps, 0.8 ms.
    pub fn lan3g() -> Self {
        Self { name: "lan3g".into(), bandwidth: 3e9, latency: 0.8e-3 }
    }

    /// 200 Mbps, 40 ms.
    pub fn wan200() -> Self {
        Self { name: "wan200".into(), bandwidth: 200e6, latency: 40e-3 }
    }

    /// 100 Mbps, 80 ms.
    pub fn wan100() -> Self {
        Self { name: "wan100".into(), bandwidth: 100e6, latency: 80e-3 }
    }

    pub fn all() -> [Self; 3] {
        [Self::lan3g(), Self::wan200(), Self::wan100()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Parse(format!("unknown network preset `{name}` (expected lan3g, wan200 or wan100)")))
    }
}

impl fmt::Display for NetworkPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTime {
    pub rounds: u64,
    pub bytes: u64,
    pub latency_s: f64,
    pub transfer_s: f64,
}

impl PhaseTime {
    pub fn network_s(&self) -> f64 {
        self.latency_s + self.transfer_s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    pub per_phase: BTreeMap<Phase, PhaseTime>,
    pub compute_s: f64,
    /// Modeled network time of the online phases.
    pub network_s: f64,
    /// Modeled network time of the offline phase, reported apart.
    pub offline_s: f64,
    /// `compute_s + network_s`.
    pub total_s: f64,
}

/// `compute + rounds·latency + bytes·8/bandwidth`, per phase and in total.
/// Online phases make up the total; the offline phase is reported separately.
pub fn estimate_time(ledger: &CommLedger, net: &NetworkPreset, compute_seconds: f64) -> TimeEstimate {
    let mut out = TimeEstimate { compute_s: compute_seconds, ..Default::default() };
    for phase in Phase::ALL {
        let rounds = ledger.rounds_any(phase);
        let bytes = ledger.bytes(phase);
        if rounds == 0 && bytes == 0 {
            continue;
        }
        let t = PhaseTime {
            rounds,
            bytes,
            latency_s: rounds as f64 * net.latency,
            transfer_s: bytes as f64 * 8.0 / net.bandwidth,
        };
        if phase.is_online() {
            out.network_s += t.network_s();
        } else {
            out.offline_s += t.network_s();
        }
        out.per_phase.insert(phase, t);
    }
    out.total_s = out.compute_s + out.network_s;
    out
}
