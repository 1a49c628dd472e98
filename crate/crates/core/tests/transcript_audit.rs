//! Every message of a recorded secure forward is checked against who may
//! talk to whom, in which phase, with which tag.

use std::collections::BTreeMap;

use mpc_prompt::model::*;
use mpc_prompt::ring::FixedPointConfig;
use mpc_prompt::runtime::*;

fn recorded_forward(seed: u64) -> Session {
    let fixed = FixedPointConfig::default();
    let model = Model::build(ModelConfig { layers: 1, n_max: 8, ..ModelConfig::default() }, 3).unwrap();
    let prompt = PromptBlock::zeros(2, model.cfg.d_model);
    let tokens = [1, 2, 9, 15];
    let mut s = Session::open(fixed, SessionSeeds::from_master(seed));
    s.record_transcript();
    let w = SecretWeights::share(&mut s, &model, Role::Dealer).unwrap();
    s.set_phase(Phase::Input);
    let t = share_tokens(&mut s, &model.cfg, &tokens).unwrap();
    let p = share_prompt(&mut s, &prompt).unwrap();
    s.set_phase(Phase::Forward);
    let y = forward_secure(&mut s, &model, &w, &t, &p).unwrap();
    s.set_phase(Phase::Output);
    s.reveal_to_client(&y).unwrap();
    s
}

#[test]
fn messages_follow_the_role_rules() {
    let s = recorded_forward(1);
    let entries = s.transcript().unwrap();
    assert!(!entries.is_empty());
    let mut counts: BTreeMap<(Phase, Role), u64> = BTreeMap::new();
    for e in entries {
        let m = WireMessage::decode(&e.bytes).unwrap();
        *counts.entry((m.phase, e.from)).or_default() += 1;
        let ok = match (e.from, e.to) {
            (Role::Client, Role::S0 | Role::S1) => m.phase == Phase::Input && m.tag == Tag::Input,
            (Role::S0 | Role::S1, Role::Client) => m.phase == Phase::Output && m.tag == Tag::Output,
            (Role::Dealer, Role::S0 | Role::S1) => m.phase == Phase::Offline,
            (Role::S0, Role::S1) | (Role::S1, Role::S0) => {
                m.phase == Phase::Forward
                    && matches!(
                        m.tag,
                        Tag::Open | Tag::BeaverMul | Tag::BeaverMatmul | Tag::Cosine | Tag::BitAnd | Tag::BitToArith
                    )
            }
            _ => false,
        };
        assert!(ok, "{:?} -> {:?}: {:?} in {:?}", e.from, e.to, m.tag, m.phase);
    }
    for ((phase, from), n) in counts {
        assert_eq!(s.ledger().entry(phase, from).messages, n, "{phase} {from}");
    }
    for phase in [Phase::Backward, Phase::Optimizer] {
        assert_eq!(s.ledger().bytes(phase), 0);
    }
}

#[test]
fn transcript_is_a_function_of_the_seed() {
    let a = recorded_forward(5).transcript_digest();
    assert_eq!(a, recorded_forward(5).transcript_digest());
    assert_ne!(a, recorded_forward(6).transcript_digest());
}

#[test]
fn servers_exchange_in_lockstep() {
    let s = recorded_forward(2);
    let l = s.ledger();
    let (a, b) = (l.entry(Phase::Forward, Role::S0), l.entry(Phase::Forward, Role::S1));
    assert_eq!((a.rounds, a.bytes, a.messages), (b.rounds, b.bytes, b.messages));
}
