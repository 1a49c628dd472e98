//! Per-phase communication accounting.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label attached to every message. Offline traffic is always kept apart
/// from the online phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Input,
    Forward,
    Output,
    Backward,
    Optimizer,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::Offline, Phase::Input, Phase::Forward, Phase::Output, Phase::Backward, Phase::Optimizer];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Offline => "offline",
            Phase::Input => "input",
            Phase::Forward => "forward",
            Phase::Output => "output",
            Phase::Backward => "backward",
            Phase::Optimizer => "optimizer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.label() == s)
    }

    pub fn is_online(self) -> bool {
        self != Phase::Offline
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Actors of a session: the two computation servers, the dealer and the
/// data owner who shares inputs and receives outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    S0,
    S1,
    Dealer,
    Client,
}

impl Role {
    pub fn server(j: usize) -> Self {
        if j == 0 {
            Role::S0
        } else {
            Role::S1
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::S0 => "s0",
            Role::S1 => "s1",
            Role::Dealer => "dealer",
            Role::Client => "client",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Role::S0, Role::S1, Role::Dealer, Role::Client].into_iter().find(|r| r.label() == s)
    }

    pub fn is_server(self) -> bool {
        matches!(self, Role::S0 | Role::S1)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub rounds: u64,
    pub bytes: u64,
    pub messages: u64,
}

impl LedgerEntry {
    fn absorb(&mut self, other: &LedgerEntry) {
        self.rounds += other.rounds;
        self.bytes += other.bytes;
        self.messages += other.messages;
    }
}

/// One exported ledger row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub phase: Phase,
    pub party: Role,
    pub rounds: u64,
    pub bytes: u64,
    pub messages: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommLedger {
    entries: BTreeMap<(Phase, Role), LedgerEntry>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record_message(&mut self, phase: Phase, sender: Role, payload_bytes: u64) {
        let e = self.entries.entry((phase, sender)).or_default();
        e.bytes += payload_bytes;
        e.messages += 1;
    }

    pub(crate) fn record_round(&mut self, phase: Phase, sender: Role) {
        self.entries.entry((phase, sender)).or_default().rounds += 1;
    }

    pub fn entry(&self, phase: Phase, role: Role) -> LedgerEntry {
        self.entries.get(&(phase, role)).copied().unwrap_or_default()
    }

    /// Sequential rounds of a phase: the larger count of the two servers.
    pub fn rounds(&self, phase: Phase) -> u64 {
        self.entry(phase, Role::S0).rounds.max(self.entry(phase, Role::S1).rounds)
    }

    /// Sequential rounds of a phase across every role that sent in it.
    pub fn rounds_any(&self, phase: Phase) -> u64 {
        self.entries.iter().filter(|((p, _), _)| *p == phase).map(|(_, e)| e.rounds).max().unwrap_or(0)
    }

    /// Bytes sent by all roles during a phase.
    pub fn bytes(&self, phase: Phase) -> u64 {
        self.entries.iter().filter(|((p, _), _)| *p == phase).map(|(_, e)| e.bytes).sum()
    }

    /// Bytes sent by the two servers during a phase.
    pub fn server_bytes(&self, phase: Phase) -> u64 {
        self.entry(phase, Role::S0).bytes + self.entry(phase, Role::S1).bytes
    }

    pub fn online_bytes(&self) -> u64 {
        Phase::ALL.iter().filter(|p| p.is_online()).map(|&p| self.bytes(p)).sum()
    }

    pub fn online_rounds(&self) -> u64 {
        Phase::ALL.iter().filter(|p| p.is_online()).map(|&p| self.rounds(p)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|e| *e == LedgerEntry::default())
    }

    /// Adds another ledger's counts into this one.
    pub fn merge(&mut self, other: &CommLedger) {
        for (k, e) in &other.entries {
            self.entries.entry(*k).or_default().absorb(e);
        }
    }

    /// Counts accumulated since `earlier`, which must be a previous snapshot of this ledger.
    pub fn delta_since(&self, earlier: &CommLedger) -> CommLedger {
        let mut out = CommLedger::new();
        for (k, e) in &self.entries {
            let before = earlier.entries.get(k).copied().unwrap_or_default();
            out.entries.insert(
                *k,
                LedgerEntry {
                    rounds: e.rounds - before.rounds,
                    bytes: e.bytes - before.bytes,
                    messages: e.messages - before.messages,
                },
            );
        }
        out
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.entries
            .iter()
            .map(|(&(phase, party), e)| LedgerRow {
                phase,
                party,
                rounds: e.rounds,
                bytes: e.bytes,
                messages: e.messages,
            })
            .collect()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = LedgerRow>) -> Self {
        let mut out = Self::new();
        for r in rows {
            out.entries.entry((r.phase, r.party)).or_default().absorb(&LedgerEntry {
                rounds: r.rounds,
                bytes: r.bytes,
                messages: r.messages,
            });
        }
        out
    }

    /// CSV with header `phase,party,rounds,bytes,messages`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.rows() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        // An empty ledger still gets its header line.
        if self.entries.is_empty() {
            buf.extend_from_slice(b"phase,party,rounds,bytes,messages\n");
        } else {
            self.write_csv(&mut buf)?;
        }
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<LedgerRow>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<LedgerRow> = serde_json::from_str(text)?;
        Ok(Self::from_rows(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CommLedger {
        let mut l = CommLedger::new();
        l.record_message(Phase::Forward, Role::S0, 16);
        l.record_message(Phase::Forward, Role::S1, 16);
        l.record_round(Phase::Forward, Role::S0);
        l.record_round(Phase::Forward, Role::S1);
        l.record_message(Phase::Offline, Role::Dealer, 8);
        l.record_round(Phase::Offline, Role::Dealer);
        l
    }

    #[test]
    fn accounting() {
        let l = sample();
        assert_eq!(l.rounds(Phase::Forward), 1);
        assert_eq!(l.bytes(Phase::Forward), 32);
        assert_eq!(l.server_bytes(Phase::Offline), 0);
        assert_eq!(l.bytes(Phase::Offline), 8);
        assert_eq!(l.online_bytes(), 32);
        assert!(CommLedger::new().is_empty());
    }

    #[test]
    fn exports_round_trip() {
        let l = sample();
        let csv = l.to_csv_string().unwrap();
        assert!(csv.starts_with("phase,party,rounds,bytes,messages\n"));
        assert!(csv.contains("forward,s0,1,16,1"));
        assert_eq!(CommLedger::read_csv(&csv).unwrap(), l);
        assert_eq!(CommLedger::from_json(&l.to_json().unwrap()).unwrap(), l);
    }

    #[test]
    fn merge_and_delta() {
        let mut a = sample();
        let snap = a.clone();
        a.merge(&sample());
        assert_eq!(a.bytes(Phase::Forward), 64);
        assert_eq!(a.delta_since(&snap).rows(), sample().rows());
    }

    #[test]
    fn phase_ids_are_stable() {
        for p in Phase::ALL {
            assert_eq!(Phase::from_id(p.id()), Some(p));
            assert_eq!(Phase::parse(p.label()), Some(p));
        }
        assert_eq!(Phase::from_id(42), None);
    }
}
