//! Forward-only prompt tuning. The data owner searches a low-dimensional `z`
//! with CMA-ES, projects it to a prompt, has the servers run the frozen model
//! on secret-shared inputs, and scores the revealed logits locally.

pub mod cma;
pub mod task;

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::secure::share_prompt;
use crate::model::{
    forward_plain, forward_secure, plan_forward, share_tokens, AttentionKind, Model, ModelConfig, PromptBlock,
    SecretWeights,
};
use crate::ring::FixedPointConfig;
use crate::runtime::{
    estimate_time, CommLedger, CostPlan, NetworkPreset, Phase, Role, Session, SessionSeeds, TimeEstimate,
};

pub use cma::{default_lambda, CmaState};
pub use task::{synthetic_task, synthetic_task_mixed, Dataset, Example};

/// Search-box half-width for `z`.
pub const Z_BOUND: f64 = 5.0;

/// Frozen `D × d` random projection from the search space to prompt space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    pub a: DMatrix<f64>,
}

/// Entries uniform on `[−1/√d, 1/√d]`.
pub fn init_projection(full: usize, d: usize, seed: u64) -> Result<ProjectionMatrix> {
    if d == 0 || d >= full {
        return Err(Error::InvalidConfig(format!("subspace dimension must satisfy 0 < d < D, got d={d}, D={full}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = 1.0 / (d as f64).sqrt();
    Ok(ProjectionMatrix { a: DMatrix::from_fn(full, d, |_, _| rng.random_range(-s..=s)) })
}

impl ProjectionMatrix {
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z
    }

    pub fn prompt(&self, z: &DVector<f64>, n_p: usize, d_model: usize) -> Result<PromptBlock> {
        PromptBlock::from_flat(self.project(z).as_slice(), n_p, d_model)
    }
}

/// Cross-entropy of `label` under `logits`, via a max-shifted log-sum-exp.
pub fn client_loss(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

/// Logits for a whole dataset under one prompt, plus what producing them cost.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    pub logits: Vec<Vec<f64>>,
    pub ledger: CommLedger,
    pub forwards: usize,
}

/// The only interface the tuner sees: a frozen model evaluated forward.
pub trait ForwardModel: Sync {
    /// `stream` identifies the candidate, so secure runs draw independent
    /// randomness per candidate.
    fn evaluate(&self, prompt: &PromptBlock, data: &Dataset, stream: u64) -> Result<Evaluation>;

    fn model(&self) -> &Model;
}

/// Direct plaintext inference.
pub struct PlainForward {
    pub model: Model,
}

impl ForwardModel for PlainForward {
    fn evaluate(&self, prompt: &PromptBlock, data: &Dataset, _stream: u64) -> Result<Evaluation> {
        let logits =
            data.examples.iter().map(|e| forward_plain(&self.model, &e.tokens, prompt)).collect::<Result<_>>()?;
        Ok(Evaluation { logits, ledger: CommLedger::new(), forwards: data.len() })
    }

    fn model(&self) -> &Model {
        &self.model
    }
}

/// Two-server inference. Weights are shared once by `owner`; every
/// candidate gets its own session with fresh prompt shares and a dealer
/// provisioned offline from a static plan.
pub struct SecureForward {
    pub model: Model,
    pub fixed: FixedPointConfig,
    weights: SecretWeights,
    setup: CommLedger,
    seed: u64,
    plans: Mutex<HashMap<(usize, usize), CostPlan>>,
}

impl SecureForward {
    pub fn new(model: Model, fixed: FixedPointConfig, owner: Role, seed: u64) -> Result<Self> {
        let mut s = Session::open(fixed, SessionSeeds::from_master(seed));
        if owner == Role::Client {
            s.set_phase(Phase::Input);
        }
        let weights = SecretWeights::share(&mut s, &model, owner)?;
        Ok(Self { model, fixed, weights, setup: s.close(), seed, plans: Mutex::new(HashMap::new()) })
    }

    /// Traffic spent sharing the weights.
    pub fn setup_ledger(&self) -> &CommLedger {
        &self.setup
    }

    fn plan(&self, n: usize, n_p: usize) -> Result<CostPlan> {
        if let Some(p) = self.plans.lock().expect("plan cache").get(&(n, n_p)) {
            return Ok(p.clone());
        }
        let p = plan_forward(&self.model, self.fixed, n, n_p)?;
        self.plans.lock().expect("plan cache").insert((n, n_p), p.clone());
        Ok(p)
    }
}

impl ForwardModel for SecureForward {
    fn evaluate(&self, prompt: &PromptBlock, data: &Dataset, stream: u64) -> Result<Evaluation> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream.wrapping_add(1));
        let mut s = Session::open(self.fixed, SessionSeeds::from_master(rng.random()));
        s.set_phase(Phase::Input);
        let p = share_prompt(&mut s, prompt)?;
        let mut logits = Vec::with_capacity(data.len());
        for e in &data.examples {
            let plan = self.plan(e.tokens.len(), prompt.n_p())?;
            s.provision(&plan)?;
            s.set_phase(Phase::Input);
            let t = share_tokens(&mut s, &self.model.cfg, &e.tokens)?;
            s.set_phase(Phase::Forward);
            let y = forward_secure(&mut s, &self.model, &self.weights, &t, &p)?;
            s.set_phase(Phase::Output);
            let cfg = *s.cfg();
            logits.push(s.reveal_to_client(&y)?.decode(&cfg));
        }
        Ok(Evaluation { logits, ledger: s.close(), forwards: data.len() })
    }

    fn model(&self) -> &Model {
        &self.model
    }
}

/// Tuning configuration, read from TOML. Missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// Search dimension.
    pub d: usize,
    /// Prompt rows.
    pub n_p: usize,
    /// Population size; defaults to `4 + ⌊3 ln d⌋`.
    #[serde(default)]
    pub lambda: Option<usize>,
    pub generations: usize,
    pub seed: u64,
    pub attention_kind: AttentionKind,
    #[serde(rename = "M")]
    pub m: usize,
    pub sigma: f64,
    pub network_preset: String,
    #[serde(default)]
    pub secure: bool,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_model_seed")]
    pub model_seed: u64,
    #[serde(default = "default_train")]
    pub train_size: usize,
    #[serde(default = "default_seq")]
    pub seq_len: usize,
    /// Seed of the synthetic task.
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
    /// Optional path to a `label<TAB>ids` dataset; the synthetic task otherwise.
    #[serde(default)]
    pub dataset: Option<String>,
}

fn default_step() -> f64 {
    1.0
}
fn default_model_seed() -> u64 {
    7
}
fn default_train() -> usize {
    32
}
fn default_seq() -> usize {
    8
}
fn default_data_seed() -> u64 {
    100
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            d: 16,
            n_p: 4,
            lambda: None,
            generations: 50,
            seed: 1,
            attention_kind: AttentionKind::Rfa,
            m: 64,
            sigma: 1.0,
            network_preset: "lan3g".into(),
            secure: false,
            step_size: default_step(),
            model_seed: default_model_seed(),
            train_size: default_train(),
            seq_len: default_seq(),
            data_seed: default_data_seed(),
            dataset: None,
        }
    }
}

impl TuneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            attention: self.attention_kind,
            features: self.m,
            sigma: self.sigma,
            n_max: self.seq_len + self.n_p,
            ..ModelConfig::default()
        }
    }

    pub fn lambda(&self) -> usize {
        self.lambda.unwrap_or_else(|| default_lambda(self.d))
    }

    /// Seed of the random projection; tied to the search seed.
    pub fn projection_seed(&self) -> u64 {
        self.seed.wrapping_add(1000)
    }

    pub fn network(&self) -> Result<NetworkPreset> {
        NetworkPreset::by_name(&self.network_preset)
    }
}

/// One row per generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_loss: f64,
    pub mean_loss: f64,
    /// Training accuracy of this generation's lowest-loss candidate.
    pub best_accuracy: f64,
    /// Lowest loss seen so far.
    pub best_so_far: f64,
    /// Cumulative candidate evaluations.
    pub evaluations: usize,
    /// Cumulative online bytes.
    pub comm_bytes: u64,
    /// Cumulative model forward passes.
    pub forwards: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TuneRecord {
    pub generations: Vec<GenerationRecord>,
}

impl TuneRecord {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for g in &self.generations {
            w.serialize(g)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        Ok(Self { generations: r.deserialize().collect::<std::result::Result<_, _>>()? })
    }

    pub fn max_accuracy(&self) -> f64 {
        self.generations.iter().map(|g| g.best_accuracy).fold(0.0, f64::max)
    }
}

/// Wall-clock split of a tuning run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TuneTimings {
    /// Candidate evaluation (model forwards plus client-side loss).
    pub forward_s: f64,
    /// `ask`, `tell` and projection on the client.
    pub optimizer_s: f64,
}

#[derive(Clone, Debug)]
pub struct TuneOutcome {
    pub best_z: DVector<f64>,
    pub best_loss: f64,
    pub record: TuneRecord,
    /// All traffic of the run, merged over candidates.
    pub ledger: CommLedger,
    pub timings: TuneTimings,
}

impl TuneOutcome {
    /// Modeled time: measured compute plus network time from the ledger.
    pub fn estimate(&self, net: &NetworkPreset) -> TimeEstimate {
        estimate_time(&self.ledger, net, self.timings.forward_s + self.timings.optimizer_s)
    }
}

/// Mean loss and accuracy of one evaluation.
pub fn score(eval: &Evaluation, data: &Dataset) -> (f64, f64) {
    let n = data.len() as f64;
    let loss = eval.logits.iter().zip(&data.examples).map(|(l, e)| client_loss(l, e.label)).sum::<f64>() / n;
    let hits = eval.logits.iter().zip(&data.examples).filter(|(l, e)| argmax(l) == e.label).count();
    (loss, hits as f64 / n)
}

/// The tuning loop: ask, project and clip, evaluate forward, score locally,
/// tell. Nothing but forward evaluations ever reaches the servers.
pub fn tune(
    fwd: &dyn ForwardModel,
    data: &Dataset,
    cfg: &TuneConfig,
    projection: &ProjectionMatrix,
) -> Result<TuneOutcome> {
    if cfg.generations == 0 {
        return Err(Error::InvalidConfig("generation budget must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let d_model = fwd.model().cfg.d_model;
    if projection.a.shape() != (cfg.n_p * d_model, cfg.d) {
        return Err(Error::ShapeMismatch {
            expected: vec![cfg.n_p * d_model, cfg.d],
            actual: vec![projection.a.nrows(), projection.a.ncols()],
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut state = CmaState::with_lambda(DVector::zeros(cfg.d), cfg.step_size, cfg.lambda())?;
    let mut record = TuneRecord::default();
    let mut ledger = CommLedger::new();
    let mut timings = TuneTimings::default();
    let (mut best_z, mut best_loss) = (DVector::zeros(cfg.d), f64::INFINITY);
    let (mut evaluations, mut forwards) = (0, 0);

    for generation in 0..cfg.generations {
        let t0 = Instant::now();
        let candidates = state.ask(&mut rng)?;
        let prompts = candidates
            .iter()
            .map(|z| projection.prompt(&z.map(|v| v.clamp(-Z_BOUND, Z_BOUND)), cfg.n_p, d_model))
            .collect::<Result<Vec<_>>>()?;
        timings.optimizer_s += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let base = (generation * state.lambda) as u64;
        let evals = prompts
            .par_iter()
            .enumerate()
            .map(|(i, p)| fwd.evaluate(p, data, base + i as u64))
            .collect::<Result<Vec<_>>>()?;
        let scores: Vec<(f64, f64)> = evals.iter().map(|e| score(e, data)).collect();
        timings.forward_s += t1.elapsed().as_secs_f64();

        for e in &evals {
            ledger.merge(&e.ledger);
            forwards += e.forwards;
        }
        evaluations += candidates.len();
        let losses: Vec<f64> = scores.iter().map(|s| s.0).collect();
        let best = (0..losses.len()).min_by(|&a, &b| losses[a].total_cmp(&losses[b])).expect("λ ≥ 2");
        if losses[best] < best_loss {
            best_loss = losses[best];
            best_z = candidates[best].map(|v| v.clamp(-Z_BOUND, Z_BOUND));
        }
        record.generations.push(GenerationRecord {
            generation,
            best_loss: losses[best],
            mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
            best_accuracy: scores[best].1,
            best_so_far: best_loss,
            evaluations,
            comm_bytes: ledger.online_bytes(),
            forwards,
        });

        let t2 = Instant::now();
        state.tell(&candidates, &losses)?;
        timings.optimizer_s += t2.elapsed().as_secs_f64();
    }
    Ok(TuneOutcome { best_z, best_loss, record, ledger, timings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_shape_and_determinism() {
        let a = init_projection(128, 16, 3).unwrap();
        assert_eq!(a.a.shape(), (128, 16));
        assert_eq!(a, init_projection(128, 16, 3).unwrap());
        assert!(init_projection(16, 16, 3).is_err());
        let bound = 1.0 / 4.0;
        assert!(a.a.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn projection_column_norms_concentrate() {
        // Uniform on [−s, s] has variance s²/3, so a column of D entries has
        // norm close to √(D/3)·s.
        let d = 16;
        let a = init_projection(512, d, 8).unwrap();
        let expect = (512.0f64 / 3.0).sqrt() / (d as f64).sqrt();
        for c in a.a.column_iter() {
            assert!((c.norm() / expect - 1.0).abs() < 0.2);
        }
    }

    #[test]
    fn project_examples() {
        let a = init_projection(64, 8, 1).unwrap();
        assert_eq!(a.project(&DVector::zeros(8)), DVector::zeros(64));
        let mut e1 = DVector::zeros(8);
        e1[0] = 1.0;
        assert_eq!(a.project(&e1), a.a.column(0).into_owned());
        let z = DVector::from_fn(8, |i, _| (i as f64).sin());
        let p = a.project(&z);
        for r in 0..64 {
            let manual: f64 = (0..8).map(|c| a.a[(r, c)] * z[c]).sum();
            assert!((p[r] - manual).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        assert!((client_loss(&[0.3, 0.3], 1) - 2f64.ln()).abs() < 1e-12);
        let l = client_loss(&[10.0, -10.0], 0);
        assert!((l - (-20f64).exp()).abs() < 1e-15 && l > 0.0);
        assert!((client_loss(&[1.0, 2.0, 0.5], 2) - client_loss(&[101.0, 102.0, 100.5], 2)).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let cfg = TuneConfig::default();
        assert_eq!(TuneConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        let minimal = "d = 8\nn_p = 2\ngenerations = 3\nseed = 4\nattention_kind = \"softmax\"\nM = 16\nsigma = 1.0\nnetwork_preset = \"wan100\"\n";
        let c = TuneConfig::from_toml(minimal).unwrap();
        assert_eq!(c.lambda(), default_lambda(8));
        assert!(TuneConfig::from_toml("d = 1\nbogus = 2").is_err());
    }

    fn small() -> (PlainForward, Dataset, TuneConfig, ProjectionMatrix) {
        let cfg = TuneConfig { generations: 3, train_size: 8, ..TuneConfig::default() };
        let model = Model::build(cfg.model_config(), cfg.model_seed).unwrap();
        let data = synthetic_task(16, cfg.seq_len, cfg.train_size, 1).unwrap();
        let proj = init_projection(cfg.n_p * 32, cfg.d, 2).unwrap();
        (PlainForward { model }, data, cfg, proj)
    }

    #[test]
    fn plain_tuning_is_deterministic_and_monotone() {
        let (fwd, data, cfg, proj) = small();
        let a = tune(&fwd, &data, &cfg, &proj).unwrap();
        let b = tune(&fwd, &data, &cfg, &proj).unwrap();
        assert_eq!(a.record, b.record);
        let gens = &a.record.generations;
        assert!(gens.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        assert_eq!(gens.last().unwrap().evaluations, 3 * cfg.lambda());
        assert_eq!(gens.last().unwrap().forwards, 3 * cfg.lambda() * 8);
        assert!(a.ledger.is_empty());
    }

    #[test]
    fn zero_budget_rejected() {
        let (fwd, data, cfg, proj) = small();
        assert!(tune(&fwd, &data, &TuneConfig { generations: 0, ..cfg }, &proj).is_err());
    }

    #[test]
    fn record_csv_round_trip() {
        let (fwd, data, cfg, proj) = small();
        let out = tune(&fwd, &data, &cfg, &proj).unwrap();
        assert_eq!(TuneRecord::from_csv(&out.record.to_csv().unwrap()).unwrap(), out.record);
    }

    #[test]
    fn secure_tuning_keeps_servers_forward_only() {
        let (plain, data, cfg, proj) = small();
        let cfg = TuneConfig { generations: 1, ..cfg };
        let data = Dataset { examples: data.examples[..2].to_vec() };
        let fwd = SecureForward::new(plain.model.clone(), FixedPointConfig::default(), Role::Dealer, 5).unwrap();
        let out = tune(&fwd, &data, &cfg, &proj).unwrap();
        for role in [Role::S0, Role::S1] {
            for phase in [Phase::Backward, Phase::Optimizer] {
                let e = out.ledger.entry(phase, role);
                assert_eq!((e.bytes, e.rounds), (0, 0));
            }
            assert!(out.ledger.entry(Phase::Forward, role).bytes > 0);
        }
        let p = tune(&plain, &data, &cfg, &proj).unwrap();
        let gap = (p.record.generations[0].mean_loss - out.record.generations[0].mean_loss).abs();
        assert!(gap < 1e-2, "{gap}");
    }
}
