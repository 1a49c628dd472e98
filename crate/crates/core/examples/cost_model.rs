//! Turn a ledger into time estimates under the three network presets.

use mpc_prompt::protocols::sec_exp;
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{estimate_time, NetworkPreset, Phase, Session, SessionSeeds};
use mpc_prompt::tensor::RingTensor;

fn main() -> mpc_prompt::error::Result<()> {
    let cfg = FixedPointConfig::default();
    let mut s = Session::open(cfg, SessionSeeds::from_master(0));
    s.set_phase(Phase::Input);
    let x = s.client_share(&RingTensor::encode_slice(&cfg, &[4096], &vec![0.5; 4096])?)?;
    s.set_phase(Phase::Forward);
    sec_exp(&mut s, &x)?;
    let ledger = s.close();
    print!("{}", ledger.to_csv_string()?);
    for net in NetworkPreset::all() {
        let t = estimate_time(&ledger, &net, 0.0);
        println!("{:<7} online {:.4} s, offline {:.4} s", net.name, t.network_s, t.offline_s);
    }
    let custom = NetworkPreset::new("wifi", 50e6, 5e-3)?;
    println!("{:<7} online {:.4} s", custom.name, estimate_time(&ledger, &custom, 0.0).network_s);
    Ok(())
}
