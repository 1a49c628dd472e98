//! A session wires the two servers, the dealer and the data owner together.
//!
//! Servers execute in lockstep inside one thread: every protocol step computes
//! each server's local state from its own share and the messages it received,
//! and every message physically travels through the configured [`Transport`]
//! in the wire format, so the ledger and the transcript reflect exactly what
//! crosses the network.

use std::collections::{HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::FixedPointConfig;
use crate::runtime::dealer::{assemble, derive, BeaverTriple, CosineMask, Dealer, Material, Request};
use crate::runtime::ledger::{CommLedger, Phase, Role};
use crate::runtime::prf::PrfKey;
use crate::runtime::transport::{InMemoryTransport, Transport};
use crate::runtime::wire::{Tag, WireMessage};
use crate::share::Shared;
use crate::tensor::RingTensor;

/// Per-role seeds. `prf0` is known to S0 and the dealer, `prf1` to S1 and
/// the dealer, `client` only to the data owner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub prf0: u64,
    pub prf1: u64,
    pub client: u64,
}

impl SessionSeeds {
    pub fn from_master(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        use rand::RngCore;
        Self { prf0: rng.next_u64(), prf1: rng.next_u64(), client: rng.next_u64() }
    }
}

/// How protocol requests for correlated randomness are served.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provisioning {
    /// The dealer generates each request when it is made (still offline traffic).
    OnDemand,
    /// As `OnDemand`, additionally recording every request into a plan.
    Record,
    /// Only material provisioned up front may be used.
    Strict,
}

/// Correlated randomness needed by one run of a computation, in request order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostPlan {
    pub requests: Vec<Request>,
}

impl CostPlan {
    pub fn count(&self, kind: &str) -> usize {
        self.requests.iter().filter(|r| r.kind() == kind).map(Request::size).sum()
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProtocolStats {
    pub multiplications: u64,
    pub comparisons: u64,
    pub comparison_calls: u64,
    pub cosines: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub from: Role,
    pub to: Role,
    pub bytes: Vec<u8>,
}

pub struct Session {
    cfg: FixedPointConfig,
    phase: Phase,
    ledger: CommLedger,
    transport: Box<dyn Transport>,
    digest: Sha256,
    transcript: Option<Vec<TranscriptEntry>>,
    dealer: Dealer,
    server_keys: [PrfKey; 2],
    mode: Provisioning,
    recorded: Vec<Request>,
    store: VecDeque<(Request, Material)>,
    consumed: HashSet<u64>,
    next_id: u64,
    client_rng: ChaCha20Rng,
    stats: ProtocolStats,
}

impl Session {
    /// Opens a session over in-memory channels.
    pub fn open(cfg: FixedPointConfig, seeds: SessionSeeds) -> Self {
        Self::with_transport(cfg, seeds, Box::new(InMemoryTransport::new()))
    }

    pub fn with_transport(cfg: FixedPointConfig, seeds: SessionSeeds, transport: Box<dyn Transport>) -> Self {
        let k0 = PrfKey::derive(seeds.prf0, "k0");
        let k1 = PrfKey::derive(seeds.prf1, "k1");
        Self {
            cfg,
            phase: Phase::Forward,
            ledger: CommLedger::new(),
            transport,
            digest: Sha256::new(),
            transcript: None,
            dealer: Dealer::new(k0.clone(), k1.clone()),
            server_keys: [k0, k1],
            mode: Provisioning::OnDemand,
            recorded: Vec::new(),
            store: VecDeque::new(),
            consumed: HashSet::new(),
            next_id: 0,
            client_rng: ChaCha20Rng::seed_from_u64(seeds.client),
            stats: ProtocolStats::default(),
        }
    }

    pub fn cfg(&self) -> &FixedPointConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn stats(&self) -> ProtocolStats {
        self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut ProtocolStats {
        &mut self.stats
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Sets the label for subsequent online traffic, returning the previous one.
    pub fn set_phase(&mut self, phase: Phase) -> Phase {
        std::mem::replace(&mut self.phase, phase)
    }

    pub fn with_phase<T>(&mut self, phase: Phase, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let prev = self.set_phase(phase);
        let out = f(self);
        self.phase = prev;
        out
    }

    /// Keeps a copy of every message from now on.
    pub fn record_transcript(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> Option<&[TranscriptEntry]> {
        self.transcript.as_deref()
    }

    /// SHA-256 over every message so far (sender, receiver, wire bytes).
    pub fn transcript_digest(&self) -> [u8; 32] {
        self.digest.clone().finalize().into()
    }

    pub fn close(self) -> CommLedger {
        self.ledger
    }

    // ---- provisioning -------------------------------------------------

    pub fn provisioning(&self) -> Provisioning {
        self.mode
    }

    pub fn set_provisioning(&mut self, mode: Provisioning) {
        self.mode = mode;
    }

    /// Requests recorded while in [`Provisioning::Record`] mode.
    pub fn recorded_plan(&self) -> CostPlan {
        CostPlan { requests: self.recorded.clone() }
    }

    /// Generates everything in `plan` during the offline phase and switches
    /// to strict mode.
    pub fn provision(&mut self, plan: &CostPlan) -> Result<()> {
        for req in &plan.requests {
            let m = self.generate(req)?;
            self.store.push_back((req.clone(), m));
        }
        if !plan.is_empty() {
            self.ledger.record_round(Phase::Offline, Role::Dealer);
        }
        self.mode = Provisioning::Strict;
        Ok(())
    }

    /// Provisioned units not yet used.
    pub fn remaining(&self) -> usize {
        self.store.len()
    }

    fn generate(&mut self, req: &Request) -> Result<Material> {
        let cfg = self.cfg;
        let d0 = derive(&mut self.server_keys[0], 0, req, &cfg);
        let d1 = derive(&mut self.server_keys[1], 1, req, &cfg);
        let correction = self.dealer.correction(req, &cfg);
        let tag = match req {
            Request::Triple { .. } => Tag::DealerTriple,
            Request::MatTriple { .. } => Tag::DealerMatTriple,
            Request::Cosine { .. } => Tag::DealerCosine,
            Request::BitTriple { .. } => Tag::DealerBitTriple,
            Request::BitMask { .. } => Tag::DealerBitMask,
        };
        let received = self.send_tensor(Phase::Offline, tag, Role::Dealer, Role::S1, &correction)?;
        let id = self.next_id;
        self.next_id += 1;
        Ok(assemble(id, req, d0, d1, received))
    }

    pub(crate) fn take(&mut self, req: Request) -> Result<Material> {
        match self.mode {
            Provisioning::OnDemand | Provisioning::Record => {
                if self.mode == Provisioning::Record {
                    self.recorded.push(req.clone());
                }
                let m = self.generate(&req)?;
                self.ledger.record_round(Phase::Offline, Role::Dealer);
                Ok(m)
            }
            Provisioning::Strict => {
                let Some((planned, m)) = self.store.pop_front() else {
                    return Err(Error::Shortfall { kind: req.kind(), needed: req.size(), request: req.to_string() });
                };
                if planned != req {
                    return Err(Error::PlanMismatch { expected: planned.to_string(), actual: req.to_string() });
                }
                Ok(m)
            }
        }
    }

    /// Marks single-use material as spent.
    pub(crate) fn consume(&mut self, id: u64) -> Result<()> {
        if self.consumed.insert(id) {
            Ok(())
        } else {
            Err(Error::Reused(id))
        }
    }

    /// `count` fresh elementwise triples of the given shape.
    pub fn dealer_beaver(&mut self, shape: &[usize], count: usize) -> Result<Vec<BeaverTriple>> {
        (0..count)
            .map(|_| match self.take(Request::Triple { shape: shape.to_vec() })? {
                Material::Triple(t) => Ok(t),
                _ => unreachable!("triple request yields a triple"),
            })
            .collect()
    }

    /// A matrix triple for an `n×k` by `k×m` product.
    pub fn dealer_matrix_beaver(&mut self, n: usize, k: usize, m: usize) -> Result<BeaverTriple> {
        match self.take(Request::MatTriple { n, k, m })? {
            Material::Triple(t) => Ok(t),
            _ => unreachable!("matrix triple request yields a triple"),
        }
    }

    /// A batch of `count` cosine masks.
    pub fn dealer_cosine_masks(&mut self, count: usize) -> Result<CosineMask> {
        match self.take(Request::Cosine { count })? {
            Material::Cosine(m) => Ok(m),
            _ => unreachable!("cosine request yields masks"),
        }
    }

    // ---- messaging ----------------------------------------------------

    fn send_bytes(&mut self, phase: Phase, from: Role, to: Role, bytes: Vec<u8>) -> Result<Vec<u8>> {
        if phase.is_online() && to == Role::Dealer {
            return Err(Error::PhaseViolation { to: to.to_string(), phase });
        }
        self.digest.update([from as u8, to as u8]);
        self.digest.update((bytes.len() as u64).to_le_bytes());
        self.digest.update(&bytes);
        if let Some(t) = self.transcript.as_mut() {
            t.push(TranscriptEntry { from, to, bytes: bytes.clone() });
        }
        self.transport.carry(from, to, bytes)
    }

    fn send_tensor(&mut self, phase: Phase, tag: Tag, from: Role, to: Role, t: &RingTensor) -> Result<RingTensor> {
        let msg = WireMessage { tag, phase, tensor: t.clone() };
        self.ledger.record_message(phase, from, msg.payload_bytes());
        let received = self.send_bytes(phase, from, to, msg.encode())?;
        let decoded = WireMessage::decode(&received)?;
        if decoded.tag != tag || decoded.phase != phase {
            return Err(Error::Wire(format!("expected {tag:?}/{phase}, got {:?}/{}", decoded.tag, decoded.phase)));
        }
        Ok(decoded.tensor)
    }

    /// One online round between the servers: server `j` sends `outgoing[j]`
    /// to its peer. Returns what each server received.
    pub(crate) fn exchange(&mut self, tag: Tag, outgoing: [Vec<RingTensor>; 2]) -> Result<[Vec<RingTensor>; 2]> {
        let phase = self.phase;
        let mut received: [Vec<RingTensor>; 2] = [Vec::new(), Vec::new()];
        for (j, msgs) in outgoing.iter().enumerate() {
            for t in msgs {
                let r = self.send_tensor(phase, tag, Role::server(j), Role::server(1 - j), t)?;
                received[1 - j].push(r);
            }
            self.ledger.record_round(phase, Role::server(j));
        }
        Ok(received)
    }

    /// Both servers publish their shares of `x` to each other. Returns the
    /// opened value (identical at both servers).
    pub(crate) fn open_shared(&mut self, tag: Tag, x: &Shared) -> Result<RingTensor> {
        let received = self.exchange(tag, [vec![x.share(0).clone()], vec![x.share(1).clone()]])?;
        let [from1, from0] = received;
        let at0 = x.share(0).add(&from1[0], &self.cfg)?;
        debug_assert_eq!(at0, from0[0].add(x.share(1), &self.cfg)?);
        Ok(at0)
    }

    /// Opens several shared tensors in a single round.
    pub(crate) fn open_many(&mut self, tag: Tag, xs: &[&Shared]) -> Result<Vec<RingTensor>> {
        let out0 = xs.iter().map(|x| x.share(0).clone()).collect();
        let out1 = xs.iter().map(|x| x.share(1).clone()).collect();
        let [from1, _] = self.exchange(tag, [out0, out1])?;
        xs.iter().zip(&from1).map(|(x, r)| x.share(0).add(r, &self.cfg)).collect()
    }

    /// The data owner secret-shares a plaintext tensor to the two servers.
    pub fn client_share(&mut self, x: &RingTensor) -> Result<Shared> {
        self.share_from(Role::Client, x)
    }

    /// Shares `x` from `owner` (client or dealer). Dealer-held inputs travel
    /// in the offline phase.
    pub fn share_from(&mut self, owner: Role, x: &RingTensor) -> Result<Shared> {
        if owner.is_server() {
            return Err(Error::PartyMismatch("inputs are shared by the client or the dealer".into()));
        }
        let phase = if owner == Role::Dealer { Phase::Offline } else { self.phase };
        let (s0, s1) = crate::share::share(x, &self.cfg, &mut self.client_rng);
        let r0 = self.send_tensor(phase, Tag::Input, owner, Role::S0, &s0.value)?;
        let r1 = self.send_tensor(phase, Tag::Input, owner, Role::S1, &s1.value)?;
        self.ledger.record_round(phase, owner);
        Shared::from_parts(r0, r1)
    }

    /// Both servers send their shares of `x` to the data owner, who reconstructs.
    pub fn reveal_to_client(&mut self, x: &Shared) -> Result<RingTensor> {
        let phase = self.phase;
        let r0 = self.send_tensor(phase, Tag::Output, Role::S0, Role::Client, x.share(0))?;
        let r1 = self.send_tensor(phase, Tag::Output, Role::S1, Role::Client, x.share(1))?;
        self.ledger.record_round(phase, Role::S0);
        self.ledger.record_round(phase, Role::S1);
        r0.add(&r1, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(seed: u64) -> Session {
        Session::open(FixedPointConfig::default(), SessionSeeds::from_master(seed))
    }

    #[test]
    fn fresh_session_has_empty_ledger() {
        let s = session(1);
        assert!(s.close().is_empty());
    }

    #[test]
    fn beaver_triples_are_correct() {
        let mut s = session(2);
        let cfg = *s.cfg();
        let triples = s.dealer_beaver(&[4, 4], 3).unwrap();
        for t in &triples {
            let [t0, t1] = &t.shares;
            let a = t0.a.add(&t1.a, &cfg).unwrap();
            let b = t0.b.add(&t1.b, &cfg).unwrap();
            let c = t0.c.add(&t1.c, &cfg).unwrap();
            assert_eq!(a.mul_elem(&b, &cfg).unwrap(), c);
        }
        assert_eq!(s.ledger().entry(Phase::Offline, Role::Dealer).messages, 3);
        assert_eq!(s.ledger().bytes(Phase::Offline), 3 * 16 * 8);
        assert_eq!(s.ledger().online_bytes(), 0);
    }

    #[test]
    fn matrix_triple_is_correct() {
        let mut s = session(3);
        let cfg = *s.cfg();
        let t = s.dealer_matrix_beaver(3, 5, 2).unwrap();
        let [t0, t1] = &t.shares;
        let a = t0.a.add(&t1.a, &cfg).unwrap();
        let b = t0.b.add(&t1.b, &cfg).unwrap();
        let c = t0.c.add(&t1.c, &cfg).unwrap();
        assert_eq!(a.matmul(&b, &cfg).unwrap(), c);
    }

    #[test]
    fn server_zero_receives_nothing_offline() {
        let mut s = session(4);
        s.record_transcript();
        s.dealer_beaver(&[8], 2).unwrap();
        s.dealer_cosine_masks(8).unwrap();
        let t = s.transcript().unwrap();
        assert!(t.iter().all(|e| e.from == Role::Dealer && e.to == Role::S1));
    }

    #[test]
    fn strict_mode_reports_shortfall() {
        let mut s = session(5);
        s.provision(&CostPlan { requests: vec![Request::Triple { shape: vec![2] }] }).unwrap();
        assert_eq!(s.remaining(), 1);
        assert!(s.dealer_beaver(&[2], 1).is_ok());
        match s.dealer_beaver(&[2], 1) {
            Err(Error::Shortfall { needed, .. }) => assert_eq!(needed, 2),
            other => panic!("expected shortfall, got {other:?}"),
        }
    }

    #[test]
    fn strict_mode_detects_plan_mismatch() {
        let mut s = session(6);
        s.provision(&CostPlan { requests: vec![Request::Cosine { count: 3 }] }).unwrap();
        assert!(matches!(s.dealer_beaver(&[2], 1), Err(Error::PlanMismatch { .. })));
    }

    #[test]
    fn identical_seeds_identical_transcripts() {
        let run = || {
            let mut s = session(7);
            let x = RingTensor::from_fn(&[5], |i| i as u64 * 1000);
            let sh = s.client_share(&x).unwrap();
            s.dealer_beaver(&[5], 1).unwrap();
            s.open_shared(Tag::Open, &sh).unwrap();
            s.transcript_digest()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dealer_cannot_receive_online() {
        let mut s = session(8);
        let r = s.send_tensor(Phase::Forward, Tag::Open, Role::S0, Role::Dealer, &RingTensor::zeros(&[1]));
        assert!(matches!(r, Err(Error::PhaseViolation { .. })));
    }

    #[test]
    fn input_and_output_round_trip() {
        let mut s = session(9);
        let cfg = *s.cfg();
        let x = RingTensor::encode_slice(&cfg, &[3], &[1.0, -2.0, 0.5]).unwrap();
        let sh = s.with_phase(Phase::Input, |s| s.client_share(&x)).unwrap();
        assert_ne!(sh.share(0), &x);
        let back = s.with_phase(Phase::Output, |s| s.reveal_to_client(&sh)).unwrap();
        assert_eq!(back, x);
        assert_eq!(s.ledger().entry(Phase::Input, Role::Client).bytes, 48);
        assert_eq!(s.ledger().rounds(Phase::Output), 1);
    }
}
