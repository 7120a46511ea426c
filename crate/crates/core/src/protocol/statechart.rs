//! Conversation statecharts for the two agent roles of a node.
//!
//! The negotiation agent cycles through five phases:
//!
//! ```text
//! Idle -C_US/C_DS-> AwaitingPlanner -R_PA_US-> AwaitingSupplier | Idle
//!                                  \-R_PA_US(infeasible)-> AwaitingCustomerReply | ServingTna
//! AwaitingSupplier -N_DS-> AwaitingPlanner -R_PA_DS-> Idle | AwaitingSupplier
//! AwaitingCustomerReply -RN(accept)-> AwaitingSupplier | Idle
//! AwaitingCustomerReply -RN(reject)-> ServingTna        (after asking for help)
//! Idle/ServingTna -C_TNA-> AwaitingPlanner
//! ```
//!
//! `D_TNA` may arrive in any phase and never moves it. A zero demand order,
//! one fully covered by stock on hand, is confirmed straight from `Idle`
//! without consulting the planner.
//!
//! The planning agent is a strict request and reply loop: `Idle`, then
//! `Planning` while a request is being answered.
//!
//! Outgoing messages are attributed to the phase the agent was in when the
//! triggering message arrived; the planner's replies to `Planning`, which
//! it enters on the request. The simulator checks every delivery and every
//! posting against these tables, and the same check runs over recorded
//! traces.

use std::fmt;

use super::{Message, MsgKind, Party};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaPhase {
    #[default]
    Idle,
    AwaitingPlanner,
    AwaitingSupplier,
    AwaitingCustomerReply,
    ServingTna,
}

impl fmt::Display for NaPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NaPhase::Idle => "Idle",
            NaPhase::AwaitingPlanner => "AwaitingPlanner",
            NaPhase::AwaitingSupplier => "AwaitingSupplier",
            NaPhase::AwaitingCustomerReply => "AwaitingCustomerReply",
            NaPhase::ServingTna => "ServingTna",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaPhase {
    #[default]
    Idle,
    Planning,
}

impl fmt::Display for PaPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaPhase::Idle => "Idle",
            PaPhase::Planning => "Planning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Receive,
    Send,
}

/// A protocol step outside the statechart.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{party} cannot {verb} {kind} in phase {phase}", verb = match direction { Direction::Receive => "receive", Direction::Send => "send" })]
pub struct StatechartViolation {
    pub party: Party,
    pub phase: String,
    pub kind: MsgKind,
    pub direction: Direction,
}

/// Message kinds a negotiation agent may be handed in `phase`.
pub fn na_may_receive(phase: NaPhase, kind: MsgKind) -> bool {
    use MsgKind::*;
    match kind {
        CUs | CDs => phase == NaPhase::Idle,
        RnUs | RnDs => phase == NaPhase::AwaitingCustomerReply,
        ADs | NDs => phase == NaPhase::AwaitingSupplier,
        RPaUs | RPaDs => phase == NaPhase::AwaitingPlanner,
        CTna => matches!(phase, NaPhase::Idle | NaPhase::ServingTna),
        DTna => true,
        // N_US, RN_US replies, A_US, HELP and planner requests never target
        // a negotiation agent.
        _ => false,
    }
}

/// Message kinds a negotiation agent may post while handling a message that
/// arrived in `phase`.
pub fn na_may_send(phase: NaPhase, kind: MsgKind) -> bool {
    use MsgKind::*;
    match kind {
        DPaN | DPaM => matches!(phase, NaPhase::Idle | NaPhase::ServingTna),
        DPaA => phase == NaPhase::AwaitingSupplier,
        CDs => matches!(phase, NaPhase::AwaitingPlanner | NaPhase::AwaitingCustomerReply),
        AUs | ADs => matches!(
            phase,
            NaPhase::Idle | NaPhase::AwaitingPlanner | NaPhase::AwaitingSupplier
        ),
        NUs | NDs | RnDs => phase == NaPhase::AwaitingPlanner,
        Help => matches!(phase, NaPhase::AwaitingCustomerReply | NaPhase::AwaitingPlanner),
        RTna => true,
        _ => false,
    }
}

/// Phase after handling `incoming` and posting `outs`.
pub fn na_next(phase: NaPhase, incoming: &Message, outs: &[Message]) -> NaPhase {
    use MsgKind::*;
    let sent = |k: MsgKind| outs.iter().any(|m| m.kind() == k);
    match incoming.kind() {
        DTna => phase,
        CUs | CDs => {
            if sent(DPaN) {
                NaPhase::AwaitingPlanner
            } else {
                // Covered by stock, confirmed on the spot.
                NaPhase::Idle
            }
        }
        RPaUs => {
            if sent(CDs) {
                NaPhase::AwaitingSupplier
            } else if sent(NUs) || sent(NDs) {
                NaPhase::AwaitingCustomerReply
            } else if sent(Help) {
                NaPhase::ServingTna
            } else {
                NaPhase::Idle
            }
        }
        RPaDs => match incoming {
            Message::RPaDs(p) if p.feasible => NaPhase::Idle,
            _ => NaPhase::AwaitingSupplier,
        },
        ADs => {
            if sent(AUs) || sent(ADs) {
                NaPhase::Idle
            } else {
                NaPhase::AwaitingSupplier
            }
        }
        NDs => NaPhase::AwaitingPlanner,
        RnUs | RnDs => {
            let accepted = matches!(
                incoming,
                Message::RnUs(p) | Message::RnDs(p) if p.accept
            );
            if accepted {
                if sent(CDs) {
                    NaPhase::AwaitingSupplier
                } else {
                    NaPhase::Idle
                }
            } else if sent(Help) {
                NaPhase::ServingTna
            } else {
                NaPhase::Idle
            }
        }
        CTna => NaPhase::AwaitingPlanner,
        _ => phase,
    }
}

pub fn pa_may_receive(phase: PaPhase, kind: MsgKind) -> bool {
    matches!(kind, MsgKind::DPaN | MsgKind::DPaM | MsgKind::DPaA) && phase == PaPhase::Idle
}

pub fn pa_may_send(phase: PaPhase, kind: MsgKind) -> bool {
    matches!(kind, MsgKind::RPaUs | MsgKind::RPaDs) && phase == PaPhase::Planning
}

pub fn pa_next(_phase: PaPhase, _incoming: &Message, outs: &[Message]) -> PaPhase {
    if outs.iter().any(|m| matches!(m.kind(), MsgKind::RPaUs | MsgKind::RPaDs)) {
        PaPhase::Idle
    } else {
        PaPhase::Planning
    }
}
