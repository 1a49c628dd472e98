//! One tuning run end to end: model, data, projection, search and report.

use std::fs;
use std::path::Path;

use crate::bench::{BenchRow, BenchmarkReport};
use crate::error::Result;
use crate::model::Model;
use crate::ring::FixedPointConfig;
use crate::runtime::{estimate_time, CommLedger, NetworkPreset, Phase, Role};
use crate::tuner::{
    init_projection, synthetic_task, tune, Dataset, ForwardModel, PlainForward, ProjectionMatrix, SecureForward,
    TuneConfig, TuneOutcome,
};

/// Everything a run needs, derived deterministically from the config.
pub struct TuneSetup {
    pub model: Model,
    pub data: Dataset,
    pub projection: ProjectionMatrix,
}

impl TuneSetup {
    pub fn new(cfg: &TuneConfig) -> Result<Self> {
        let mc = cfg.model_config();
        let model = Model::build(mc.clone(), cfg.model_seed)?;
        let data = match &cfg.dataset {
            Some(path) => Dataset::parse(&fs::read_to_string(path)?)?,
            None => synthetic_task(mc.vocab, cfg.seq_len, cfg.train_size, cfg.data_seed)?,
        };
        let projection = init_projection(cfg.n_p * mc.d_model, cfg.d, cfg.projection_seed())?;
        Ok(Self { model, data, projection })
    }

    /// The plaintext or two-server forward, as the config asks.
    pub fn forward(&self, cfg: &TuneConfig) -> Result<Box<dyn ForwardModel>> {
        Ok(if cfg.secure {
            Box::new(SecureForward::new(self.model.clone(), FixedPointConfig::default(), Role::Dealer, cfg.seed)?)
        } else {
            Box::new(PlainForward { model: self.model.clone() })
        })
    }
}

pub struct TuneRun {
    pub outcome: TuneOutcome,
    pub report: BenchmarkReport,
}

/// Per-phase traffic of a ledger as report rows named `phase:<label>`.
/// Bytes are those of the busiest party in the phase.
pub fn phase_rows(ledger: &CommLedger, size: usize, seed: u64) -> Vec<BenchRow> {
    Phase::ALL
        .iter()
        .map(|&p| {
            let bytes = [Role::S0, Role::S1, Role::Dealer, Role::Client]
                .map(|r| ledger.entry(p, r).bytes)
                .into_iter()
                .max()
                .unwrap_or(0);
            let single = CommLedger::from_rows(ledger.rows().into_iter().filter(|r| r.phase == p));
            let [lan, w200, w100] = NetworkPreset::all().map(|net| {
                let t = estimate_time(&single, &net, 0.0);
                t.network_s + t.offline_s
            });
            BenchRow {
                operation: format!("phase:{}", p.label()),
                size,
                rounds: ledger.rounds_any(p),
                bytes_per_party: bytes,
                lan3g_s: lan,
                wan200_s: w200,
                wan100_s: w100,
                compute_s: 0.0,
                max_error: 0.0,
                seed,
            }
        })
        .collect()
}

/// Runs the search described by `cfg`. With `out`, writes the report,
/// `record.csv` and the measured `timings.json` there.
pub fn cmd_tune(cfg: &TuneConfig, out: Option<&Path>) -> Result<TuneRun> {
    let net = cfg.network()?;
    let setup = TuneSetup::new(cfg)?;
    let fwd = setup.forward(cfg)?;
    let outcome = tune(fwd.as_ref(), &setup.data, cfg, &setup.projection)?;

    let mut report =
        BenchmarkReport { rows: phase_rows(&outcome.ledger, cfg.generations, cfg.seed), ..Default::default() };
    // Only ledger-derived figures go in the report so reruns match exactly;
    // measured wall time is written next to it.
    let est = estimate_time(&outcome.ledger, &net, 0.0);
    let last = outcome.record.generations.last().expect("at least one generation");
    let m = &mut report.metrics;
    m.insert("best_loss".into(), outcome.best_loss);
    m.insert("final_accuracy".into(), last.best_accuracy);
    m.insert("max_accuracy".into(), outcome.record.max_accuracy());
    m.insert("network_s".into(), est.network_s);
    m.insert("offline_s".into(), est.offline_s);
    m.insert("forwards".into(), last.forwards as f64);
    if let Some(dir) = out {
        report.write(dir)?;
        fs::write(dir.join("record.csv"), outcome.record.to_csv()?)?;
        let total = outcome.estimate(&net);
        let timings = serde_json::json!({
            "network": net.name,
            "forward_s": outcome.timings.forward_s,
            "optimizer_s": outcome.timings.optimizer_s,
            "estimated_total_s": total.total_s,
            "optimizer_fraction": outcome.timings.optimizer_s / total.total_s,
        });
        fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&timings)?)?;
    }
    Ok(TuneRun { outcome, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plaintext_run_reports_phases() {
        let cfg = TuneConfig { generations: 2, train_size: 4, ..TuneConfig::default() };
        let run = cmd_tune(&cfg, None).unwrap();
        assert_eq!(run.outcome.record.generations.len(), 2);
        assert_eq!(run.report.rows.len(), Phase::ALL.len());
        assert!(run.report.rows.iter().all(|r| r.bytes_per_party == 0));
        assert_eq!(run.report, cmd_tune(&cfg, None).unwrap().report);
    }

    #[test]
    fn secure_run_is_forward_only() {
        let cfg = TuneConfig { generations: 1, train_size: 2, secure: true, ..TuneConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let run = cmd_tune(&cfg, Some(dir.path())).unwrap();
        let row = |p: &str| run.report.row(&format!("phase:{p}"), 1).unwrap().clone();
        assert!(row("forward").bytes_per_party > 0 && row("input").bytes_per_party > 0);
        for p in ["backward", "optimizer"] {
            assert_eq!((row(p).bytes_per_party, row(p).rounds), (0, 0));
        }
        assert!(dir.path().join("record.csv").exists() && dir.path().join("report.json").exists());
    }

    #[test]
    fn dataset_file_is_used() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        fs::write(&path, "0\t1 2 3\n1\t9 10 11\n").unwrap();
        let cfg = TuneConfig { generations: 1, dataset: Some(path.display().to_string()), ..TuneConfig::default() };
        assert_eq!(TuneSetup::new(&cfg).unwrap().data.len(), 2);
    }
}
