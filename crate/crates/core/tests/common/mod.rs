//! Shared plumbing for the integration suites: fixture loading and a
//! trace-level legality check that works from the recorded lines alone.

pub mod audit;
pub mod fair_oracle;
pub mod sched_oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use vennet_core::config;
use vennet_core::protocol::{
    na_may_receive, na_may_send, na_next, pa_may_receive, pa_may_send, pa_next, NaPhase, PaPhase,
};
use vennet_core::{Envelope, Message, MsgKind, Party, RunSpec, VenId};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> RunSpec {
    let path = fixture_path(name);
    let text = fs::read_to_string(&path).expect("fixture exists");
    config::load_spec(&text).expect("fixture parses")
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(fixture_path(&format!("golden/{name}"))).expect("golden exists")
}

pub fn kinds(trace: &[Envelope]) -> Vec<MsgKind> {
    trace.iter().map(|e| e.msg.kind()).collect()
}

/// Replays a recorded trace against the agent statecharts without running
/// any agent. Sequence numbers are handed out at posting time, so the
/// trace is the posting order; an agent's replies appear after the message
/// that triggered them and before the next message delivered to that
/// agent. That makes the legality check a per-agent walk: each incoming
/// message opens a handling episode, the agent's own later messages
/// belong to it, and the next incoming message closes it.
pub fn replay_legality(trace: &[Envelope]) -> Result<(), String> {
    for w in trace.windows(2) {
        if w[1].seq <= w[0].seq {
            return Err(format!("seq {} follows {}, not a single-run trace", w[1].seq, w[0].seq));
        }
    }

    struct Episode<P> {
        phase: P,
        pending: Option<Message>,
        outs: Vec<Message>,
    }
    let mut na: BTreeMap<VenId, Episode<NaPhase>> = BTreeMap::new();
    let mut pa: BTreeMap<VenId, Episode<PaPhase>> = BTreeMap::new();

    for env in trace {
        // The sender's side: negotiation and planning agents only speak
        // while handling something.
        match &env.from {
            Party::Na(ven) => {
                let slot = na.entry(ven.clone()).or_insert(Episode {
                    phase: NaPhase::default(),
                    pending: None,
                    outs: Vec::new(),
                });
                if slot.pending.is_none() {
                    return Err(format!(
                        "message {}: {} speaks without anything to handle",
                        env.seq, env.from
                    ));
                }
                if !na_may_send(slot.phase, env.msg.kind()) {
                    return Err(format!(
                        "message {}: {} may not send {} from phase {}",
                        env.seq,
                        env.from,
                        env.msg.kind(),
                        slot.phase
                    ));
                }
                slot.outs.push(env.msg.clone());
            }
            Party::Pa(ven) => {
                let slot = pa.entry(ven.clone()).or_insert(Episode {
                    phase: PaPhase::default(),
                    pending: None,
                    outs: Vec::new(),
                });
                if slot.pending.is_none() {
                    return Err(format!(
                        "message {}: {} speaks without anything to handle",
                        env.seq, env.from
                    ));
                }
                // Replies go out of the transient planning state.
                if !pa_may_send(PaPhase::Planning, env.msg.kind()) {
                    return Err(format!(
                        "message {}: {} may not send {}",
                        env.seq,
                        env.from,
                        env.msg.kind()
                    ));
                }
                slot.outs.push(env.msg.clone());
            }
            _ => {}
        }

        // The recipient's side: close the previous episode, then check the
        // delivery against the resulting phase.
        match &env.to {
            Party::Na(ven) => {
                let slot = na.entry(ven.clone()).or_insert(Episode {
                    phase: NaPhase::default(),
                    pending: None,
                    outs: Vec::new(),
                });
                if let Some(prev) = slot.pending.take() {
                    slot.phase = na_next(slot.phase, &prev, &slot.outs);
                    slot.outs.clear();
                }
                if !na_may_receive(slot.phase, env.msg.kind()) {
                    return Err(format!(
                        "message {}: {} cannot take {} in phase {}",
                        env.seq,
                        env.to,
                        env.msg.kind(),
                        slot.phase
                    ));
                }
                slot.pending = Some(env.msg.clone());
            }
            Party::Pa(ven) => {
                let slot = pa.entry(ven.clone()).or_insert(Episode {
                    phase: PaPhase::default(),
                    pending: None,
                    outs: Vec::new(),
                });
                if let Some(prev) = slot.pending.take() {
                    slot.phase = pa_next(slot.phase, &prev, &slot.outs);
                    slot.outs.clear();
                }
                if !pa_may_receive(slot.phase, env.msg.kind()) {
                    return Err(format!(
                        "message {}: {} cannot take {} in phase {}",
                        env.seq,
                        env.to,
                        env.msg.kind(),
                        slot.phase
                    ));
                }
                slot.pending = Some(env.msg.clone());
            }
            // Clients, external suppliers and tier negotiators follow fixed
            // scripts, not statecharts.
            _ => {}
        }
    }
    Ok(())
}
