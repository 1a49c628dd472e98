//! Encoder inference over shares, with the dealer provisioned from a plan
//! ahead of the online phase.

use mpc_prompt::model::*;
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::{Phase, Role, Session, SessionSeeds};

fn main() -> mpc_prompt::error::Result<()> {
    let fixed = FixedPointConfig::default();
    let model = Model::build(ModelConfig::default(), 7)?;
    let tokens = [1, 4, 9, 3, 12, 0];
    let prompt = PromptBlock::zeros(2, model.cfg.d_model);

    let plan = plan_forward(&model, fixed, tokens.len(), prompt.n_p())?;
    println!("plan: {} correlated items", plan.len());

    let mut s = Session::open(fixed, SessionSeeds::from_master(11));
    let weights = SecretWeights::share(&mut s, &model, Role::Dealer)?;
    s.provision(&plan)?;
    s.set_phase(Phase::Input);
    let t = share_tokens(&mut s, &model.cfg, &tokens)?;
    let p = share_prompt(&mut s, &prompt)?;
    s.set_phase(Phase::Forward);
    let y = forward_secure(&mut s, &model, &weights, &t, &p)?;
    s.set_phase(Phase::Output);
    let logits = s.reveal_to_client(&y)?.decode(&fixed);

    println!("secure logits: {logits:?}");
    println!("plain  logits: {:?}", forward_plain(&model, &tokens, &prompt)?);
    let l = s.ledger();
    println!(
        "forward: {} rounds, {} bytes; offline {} bytes",
        l.rounds(Phase::Forward),
        l.bytes(Phase::Forward),
        l.bytes(Phase::Offline)
    );
    Ok(())
}
