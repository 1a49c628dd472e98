//! Forward-only prompt tuning on the synthetic task. Pass `secure` to run
//! every forward over shares (a few minutes).

use mpc_prompt::bench::cmd_tune;
use mpc_prompt::runtime::{NetworkPreset, Phase};
use mpc_prompt::tuner::TuneConfig;

fn main() -> mpc_prompt::error::Result<()> {
    let secure = std::env::args().any(|a| a == "secure");
    let cfg = TuneConfig { secure, generations: if secure { 10 } else { 50 }, seed: 0, ..TuneConfig::default() };
    let run = cmd_tune(&cfg, None)?;
    for g in &run.outcome.record.generations {
        println!(
            "gen {:>2}  loss {:.4}  acc {:.3}  bytes {}",
            g.generation, g.best_loss, g.best_accuracy, g.comm_bytes
        );
    }
    let l = &run.outcome.ledger;
    println!("backward bytes {}, optimizer bytes {}", l.bytes(Phase::Backward), l.bytes(Phase::Optimizer));
    for net in NetworkPreset::all() {
        let t = run.outcome.estimate(&net);
        println!(
            "{:<7} estimated online {:.1} s (network {:.1} s), offline {:.1} s",
            net.name, t.total_s, t.network_s, t.offline_s
        );
    }
    Ok(())
}
