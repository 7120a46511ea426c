//! Message vocabulary of the coordination protocol.
//!
//! Seventeen message kinds cover four conversations:
//!
//! * order negotiation towards a customer (`C_US`, `N_US`, `RN_US`, `A_US`
//!   on the client edge; `C_DS`, `A_DS`, `N_DS`, `RN_DS` between nodes and
//!   towards external suppliers),
//! * a node asking its own planner for plans and evaluations (`D_PA_N`,
//!   `D_PA_M`, `D_PA_A`, `R_PA_US`, `R_PA_DS`),
//! * tier level load probing and reassignment (`D_TNA`, `R_TNA`, `C_TNA`),
//! * asking the tier negotiator for help (`HELP`).
//!
//! Everything that crosses the bus is one of these. Escalation between tier
//! negotiators and the network mediator is direct coordination inside the
//! runtime and deliberately has no wire form.

pub mod statechart;
pub mod wire;

pub use statechart::{
    na_may_receive, na_may_send, na_next, pa_may_receive, pa_may_send, pa_next, NaPhase, PaPhase,
    StatechartViolation,
};
pub use wire::{decode_line, encode_line, read_trace, DecodeError};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Day, DemandLine, Scenario, TierId, Units, VenId};

/// Identity of an order. Sub-orders derive their id from the parent as
/// `parent:orderer:product`, so the whole decomposition stays readable in
/// a trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderId(pub String);

impl OrderId {
    pub fn new(id: impl Into<String>) -> OrderId {
        OrderId(id.into())
    }

    pub fn sub_order(&self, orderer: &VenId, product: &str) -> OrderId {
        OrderId(format!("{}:{}:{}", self.0, orderer, product))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OrderId {
    fn from(s: &str) -> OrderId {
        OrderId(s.to_string())
    }
}

/// Any addressable endpoint on the bus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    /// External client stub.
    Client(VenId),
    /// Negotiation agent of a node, its only externally visible face.
    Na(VenId),
    /// Planning agent of a node, reachable from its own negotiation agent
    /// and the tier negotiator only.
    Pa(VenId),
    /// Tier negotiation agent.
    Tna(TierId),
    /// External raw material supplier stub.
    External(VenId),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Client(id) => write!(f, "client:{id}"),
            Party::Na(id) => write!(f, "na:{id}"),
            Party::Pa(id) => write!(f, "pa:{id}"),
            Party::Tna(t) => write!(f, "tna:{t}"),
            Party::External(id) => write!(f, "ext:{id}"),
        }
    }
}

impl std::str::FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Party, String> {
        let (prefix, name) = s.split_once(':').ok_or_else(|| format!("no prefix in {s:?}"))?;
        if name.is_empty() {
            return Err(format!("empty name in {s:?}"));
        }
        match prefix {
            "client" => Ok(Party::Client(VenId::from(name))),
            "na" => Ok(Party::Na(VenId::from(name))),
            "pa" => Ok(Party::Pa(VenId::from(name))),
            "tna" => name
                .parse()
                .map(|t| Party::Tna(TierId(t)))
                .map_err(|_| format!("bad tier in {s:?}")),
            "ext" => Ok(Party::External(VenId::from(name))),
            other => Err(format!("unknown party prefix {other:?}")),
        }
    }
}

/// The seventeen wire kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgKind {
    CUs,
    NUs,
    RnUs,
    AUs,
    CDs,
    ADs,
    NDs,
    RnDs,
    DPaN,
    DPaM,
    DPaA,
    RPaUs,
    RPaDs,
    DTna,
    RTna,
    CTna,
    Help,
}

impl MsgKind {
    pub const ALL: [MsgKind; 17] = [
        MsgKind::CUs,
        MsgKind::NUs,
        MsgKind::RnUs,
        MsgKind::AUs,
        MsgKind::CDs,
        MsgKind::ADs,
        MsgKind::NDs,
        MsgKind::RnDs,
        MsgKind::DPaN,
        MsgKind::DPaM,
        MsgKind::DPaA,
        MsgKind::RPaUs,
        MsgKind::RPaDs,
        MsgKind::DTna,
        MsgKind::RTna,
        MsgKind::CTna,
        MsgKind::Help,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::CUs => "C_US",
            MsgKind::NUs => "N_US",
            MsgKind::RnUs => "RN_US",
            MsgKind::AUs => "A_US",
            MsgKind::CDs => "C_DS",
            MsgKind::ADs => "A_DS",
            MsgKind::NDs => "N_DS",
            MsgKind::RnDs => "RN_DS",
            MsgKind::DPaN => "D_PA_N",
            MsgKind::DPaM => "D_PA_M",
            MsgKind::DPaA => "D_PA_A",
            MsgKind::RPaUs => "R_PA_US",
            MsgKind::RPaDs => "R_PA_DS",
            MsgKind::DTna => "D_TNA",
            MsgKind::RTna => "R_TNA",
            MsgKind::CTna => "C_TNA",
            MsgKind::Help => "HELP",
        }
    }

    pub fn from_str(s: &str) -> Option<MsgKind> {
        MsgKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// True for the kinds that only appear once an order escalated past the
    /// plain customer and supplier conversations.
    pub fn is_escalation(self) -> bool {
        matches!(self, MsgKind::DTna | MsgKind::RTna | MsgKind::CTna | MsgKind::Help)
    }
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An order: one dated quantity of one product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderPayload {
    pub order: OrderId,
    pub line: DemandLine,
}

/// Contract conclusion: the supplier commits to these delivery lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptPayload {
    pub order: OrderId,
    pub lines: Vec<DemandLine>,
}

/// Counter-proposal: the requested terms are infeasible, these alternative
/// scenarios are offered instead, in the supplier's preference order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterPayload {
    pub order: OrderId,
    pub scenarios: Vec<Scenario>,
}

/// The customer's verdict on a counter-proposal. `scenario` names the chosen
/// alternative when accepting; acceptance concludes the contract at those
/// terms with no further echo.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterReplyPayload {
    pub order: OrderId,
    pub accept: bool,
    pub scenario: Option<String>,
}

/// Planning latitude granted for one request. Everything defaults to zero:
/// a plain plan may use neither overtime nor subcontracting and must take
/// component dates as given. Escalation widens these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConditions {
    pub overtime_cap: Units,
    pub subcontract_cap: Units,
    /// How many days earlier than requested components may be assumed to
    /// arrive, granted only once a supplier confirmed the slack exists.
    pub component_advance_days: u32,
}

/// Ask the planner for a production plan covering `lines`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequestPayload {
    pub order: OrderId,
    pub lines: Vec<DemandLine>,
    pub conditions: PlanConditions,
}

/// Ask the planner whether the existing commitments survive a supplier's
/// counter-proposal, and if so which scenario to pick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatePayload {
    pub order: OrderId,
    pub scenarios: Vec<Scenario>,
}

/// Planner verdict on a plan request. Feasible plans list the dated
/// component needs left after netting local stock; infeasible ones list the
/// delivery scenarios worth offering instead, best first. No scenarios at
/// all means the planner sees no way to produce anything useful in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReplyPayload {
    pub order: OrderId,
    pub feasible: bool,
    pub needs: Vec<DemandLine>,
    pub scenarios: Vec<Scenario>,
}

/// Planner verdict on a counter-proposal evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateReplyPayload {
    pub order: OrderId,
    pub feasible: bool,
    pub scenario: Option<String>,
}

/// Tier negotiator asks a node for its load picture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRequestPayload {
    pub probe: u32,
}

/// A per-day quantity, used for both booked load and idle capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub day: Day,
    pub units: Units,
}

/// An order this node could not serve, with what is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockedOrder {
    pub order: OrderId,
    pub shortfall: Vec<DemandLine>,
}

/// A node's answer to a load probe. `load` lists days with booked
/// production, `idle` lists unbooked capacity on days that have any, both
/// sparse. `blocked` lists orders stuck at this node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotPayload {
    pub probe: u32,
    pub ven: VenId,
    pub load: Vec<LoadEntry>,
    pub idle: Vec<LoadEntry>,
    pub blocked: Vec<BlockedOrder>,
}

/// Tier negotiator directive: serve these lines of `order` for
/// `beneficiary`, planning under the given conditions. Sent both to trim an
/// overloaded node down to its feasible share and to hand the remainder to
/// a sibling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReassignPayload {
    pub order: OrderId,
    pub beneficiary: VenId,
    pub lines: Vec<DemandLine>,
    pub conditions: PlanConditions,
}

/// A node tells its tier negotiator it cannot serve an order and the
/// customer refused the alternatives. `line` restates the original terms,
/// `shortfall` the part of them the node cannot honour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelpPayload {
    pub order: OrderId,
    pub customer: VenId,
    pub line: DemandLine,
    pub shortfall: Vec<DemandLine>,
}

/// A message: kind plus payload. Kinds sharing a conversation role share
/// the payload shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    CUs(OrderPayload),
    NUs(CounterPayload),
    RnUs(CounterReplyPayload),
    AUs(AcceptPayload),
    CDs(OrderPayload),
    ADs(AcceptPayload),
    NDs(CounterPayload),
    RnDs(CounterReplyPayload),
    DPaN(PlanRequestPayload),
    DPaM(PlanRequestPayload),
    DPaA(EvaluatePayload),
    RPaUs(PlanReplyPayload),
    RPaDs(EvaluateReplyPayload),
    DTna(SnapshotRequestPayload),
    RTna(SnapshotPayload),
    CTna(ReassignPayload),
    Help(HelpPayload),
}

impl Message {
    pub fn kind(&self) -> MsgKind {
        match self {
            Message::CUs(_) => MsgKind::CUs,
            Message::NUs(_) => MsgKind::NUs,
            Message::RnUs(_) => MsgKind::RnUs,
            Message::AUs(_) => MsgKind::AUs,
            Message::CDs(_) => MsgKind::CDs,
            Message::ADs(_) => MsgKind::ADs,
            Message::NDs(_) => MsgKind::NDs,
            Message::RnDs(_) => MsgKind::RnDs,
            Message::DPaN(_) => MsgKind::DPaN,
            Message::DPaM(_) => MsgKind::DPaM,
            Message::DPaA(_) => MsgKind::DPaA,
            Message::RPaUs(_) => MsgKind::RPaUs,
            Message::RPaDs(_) => MsgKind::RPaDs,
            Message::DTna(_) => MsgKind::DTna,
            Message::RTna(_) => MsgKind::RTna,
            Message::CTna(_) => MsgKind::CTna,
            Message::Help(_) => MsgKind::Help,
        }
    }

    /// The order this message is about, if the kind carries one.
    pub fn order(&self) -> Option<&OrderId> {
        match self {
            Message::CUs(p) | Message::CDs(p) => Some(&p.order),
            Message::NUs(p) | Message::NDs(p) => Some(&p.order),
            Message::RnUs(p) | Message::RnDs(p) => Some(&p.order),
            Message::AUs(p) | Message::ADs(p) => Some(&p.order),
            Message::DPaN(p) | Message::DPaM(p) => Some(&p.order),
            Message::DPaA(p) => Some(&p.order),
            Message::RPaUs(p) => Some(&p.order),
            Message::RPaDs(p) => Some(&p.order),
            Message::CTna(p) => Some(&p.order),
            Message::Help(p) => Some(&p.order),
            Message::DTna(_) | Message::RTna(_) => None,
        }
    }
}

/// A message in flight: who, when and what. `seq` is the global posting
/// sequence number and totally orders every trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub seq: u64,
    pub sent_at: Day,
    pub from: Party,
    pub to: Party,
    pub msg: Message,
}
