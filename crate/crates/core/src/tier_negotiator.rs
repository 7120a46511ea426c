//! Tier level coordination: what happens when a node gives up on an order.
//!
//! Every tier has a coordinator. A blocked node hands it the order; the
//! coordinator probes all its tier members for load and idle capacity,
//! then tries to spread the uncoverable part over siblings able to make
//! the product. When the home tier cannot absorb it, the problem hops
//! outward: the next tier up, then the next down, and so on. A hop past
//! the last managed tier checks whether earlier raw material deliveries
//! would unblock the order, and asks for them when the external supplier
//! has that much flexibility. When every hop fails, the case goes to the
//! network mediator.
//!
//! Coordinators of different tiers share one controller, so coordination
//! between them is internal. Only the probes, their answers, and the final
//! reassignments travel as messages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::domain::{bom_children, DemandLine, NetworkConfig, TierId, Units, VenId};
use crate::planner::{earliest_loading, UNBOUNDED};
use crate::protocol::{
    HelpPayload, LoadEntry, Message, MsgKind, OrderId, Party, PlanConditions, ReassignPayload,
    SnapshotPayload, SnapshotRequestPayload,
};

/// A message a coordinator wants posted. The sending tier is explicit
/// because the shared controller speaks for all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TnaOut {
    pub from: TierId,
    pub to: Party,
    pub msg: Message,
}

/// A case the tiers could not settle; the network mediator decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediationRequest {
    pub order: OrderId,
    pub responsible: VenId,
    pub home: TierId,
    pub customer: VenId,
    pub line: DemandLine,
    pub shortfall: Vec<DemandLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseOutcome {
    /// Covered by reassignments inside the tiers.
    Redistributed { order: OrderId },
    /// Covered by pulling raw material deliveries forward.
    Flexed { order: OrderId, advance_days: u32 },
    /// All hops failed.
    NeedsMediation(MediationRequest),
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct EscalationStep {
    pub outs: Vec<TnaOut>,
    pub outcomes: Vec<CaseOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TnaError {
    #[error("snapshot for probe {probe} matches no open case")]
    StraySnapshot { probe: u32 },
    #[error("probe {probe} got a snapshot from {ven}, which was not asked")]
    UnexpectedMember { probe: u32, ven: VenId },
    #[error("probe {probe} got a second snapshot from {ven}")]
    DuplicateSnapshot { probe: u32, ven: VenId },
    #[error("help request from {ven}, which is in no managed tier")]
    UnknownResponsible { ven: VenId },
    #[error("tier coordinators do not handle {kind:?}")]
    Unhandled { kind: MsgKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hop {
    Tier(u32),
    /// Past the outermost managed tier: the external flexibility check.
    Flex,
}

#[derive(Debug)]
struct ProbeState {
    id: u32,
    tier: u32,
    expected: BTreeSet<VenId>,
    got: BTreeMap<VenId, SnapshotPayload>,
}

#[derive(Debug)]
struct Case {
    order: OrderId,
    responsible: VenId,
    home: u32,
    customer: VenId,
    line: DemandLine,
    shortfall: Vec<DemandLine>,
    hops: VecDeque<Hop>,
    probe: Option<ProbeState>,
}

/// The escalation web above the nodes: one coordinator per tier plus the
/// shared hop logic between them.
#[derive(Debug, Default)]
pub struct EscalationController {
    next_probe: u32,
    cases: Vec<Case>,
}

impl EscalationController {
    pub fn new() -> EscalationController {
        EscalationController { next_probe: 0, cases: Vec::new() }
    }

    pub fn open_cases(&self) -> usize {
        self.cases.len()
    }

    pub fn handle(
        &mut self,
        from: &Party,
        msg: &Message,
        net: &NetworkConfig,
    ) -> Result<EscalationStep, TnaError> {
        match msg {
            Message::Help(h) => self.on_help(from, h, net),
            Message::RTna(s) => self.on_snapshot(s, net),
            other => Err(TnaError::Unhandled { kind: other.kind() }),
        }
    }

    fn on_help(
        &mut self,
        from: &Party,
        h: &HelpPayload,
        net: &NetworkConfig,
    ) -> Result<EscalationStep, TnaError> {
        let responsible = match from {
            Party::Na(v) => v.clone(),
            _ => {
                return Err(TnaError::UnknownResponsible {
                    ven: VenId::from(from.to_string().as_str()),
                })
            }
        };
        let home = net
            .tier_of(&responsible)
            .ok_or_else(|| TnaError::UnknownResponsible { ven: responsible.clone() })?
            .0;

        // Hop order after the home tier: one out, one in, two out, two in.
        // A single step past the outermost tier is the flexibility check.
        let max = net.tier_count();
        let mut hops = VecDeque::new();
        for d in 1..=max {
            let up = home + d;
            if up <= max {
                hops.push_back(Hop::Tier(up));
            } else if up == max + 1 {
                hops.push_back(Hop::Flex);
            }
            if home > d {
                hops.push_back(Hop::Tier(home - d));
            }
        }

        let mut case = Case {
            order: h.order.clone(),
            responsible,
            home,
            customer: h.customer.clone(),
            line: h.line.clone(),
            shortfall: h.shortfall.clone(),
            hops,
            probe: None,
        };

        let mut step = EscalationStep::default();
        step.outs.extend(self.start_probe(&mut case, home, net));
        self.cases.push(case);
        Ok(step)
    }

    fn start_probe(&mut self, case: &mut Case, tier: u32, net: &NetworkConfig) -> Vec<TnaOut> {
        self.next_probe += 1;
        let id = self.next_probe;
        let members: Vec<VenId> =
            net.tiers[(tier - 1) as usize].iter().map(|v| v.id.clone()).collect();
        let outs = members
            .iter()
            .map(|m| TnaOut {
                from: TierId(tier),
                to: Party::Na(m.clone()),
                msg: Message::DTna(SnapshotRequestPayload { probe: id }),
            })
            .collect();
        case.probe = Some(ProbeState {
            id,
            tier,
            expected: members.into_iter().collect(),
            got: BTreeMap::new(),
        });
        outs
    }

    fn on_snapshot(
        &mut self,
        s: &SnapshotPayload,
        net: &NetworkConfig,
    ) -> Result<EscalationStep, TnaError> {
        let idx = self
            .cases
            .iter()
            .position(|c| c.probe.as_ref().map(|p| p.id) == Some(s.probe))
            .ok_or(TnaError::StraySnapshot { probe: s.probe })?;
        {
            let probe = self.cases[idx].probe.as_mut().expect("found by probe id");
            if !probe.expected.contains(&s.ven) {
                return Err(TnaError::UnexpectedMember { probe: s.probe, ven: s.ven.clone() });
            }
            if probe.got.insert(s.ven.clone(), s.clone()).is_some() {
                return Err(TnaError::DuplicateSnapshot { probe: s.probe, ven: s.ven.clone() });
            }
            if probe.got.len() < probe.expected.len() {
                return Ok(EscalationStep::default());
            }
        }

        let mut case = self.cases.swap_remove(idx);
        let probe = case.probe.take().expect("checked above");
        let mut step = EscalationStep::default();

        if let Some(outs) = try_redistribute(&case, probe.tier, &probe.got, net) {
            step.outs.extend(outs);
            step.outcomes.push(CaseOutcome::Redistributed { order: case.order });
            return Ok(step);
        }
        self.advance(case, net, &mut step);
        Ok(step)
    }

    /// Works through the remaining hops until one starts a probe, one
    /// resolves the case, or none is left.
    fn advance(&mut self, mut case: Case, net: &NetworkConfig, step: &mut EscalationStep) {
        while let Some(hop) = case.hops.pop_front() {
            match hop {
                Hop::Flex => {
                    if let Some((advance, out)) = try_flex(&case, net) {
                        step.outs.push(out);
                        step.outcomes
                            .push(CaseOutcome::Flexed { order: case.order, advance_days: advance });
                        return;
                    }
                }
                Hop::Tier(t) => {
                    let capable = net.tiers[(t - 1) as usize]
                        .iter()
                        .any(|v| v.makes(&case.line.product));
                    if !capable {
                        continue;
                    }
                    step.outs.extend(self.start_probe(&mut case, t, net));
                    self.cases.push(case);
                    return;
                }
            }
        }
        step.outcomes.push(CaseOutcome::NeedsMediation(MediationRequest {
            order: case.order,
            responsible: case.responsible,
            home: TierId(case.home),
            customer: case.customer,
            line: case.line,
            shortfall: case.shortfall,
        }));
    }
}

fn deliverable_by(idle: &[LoadEntry], due: crate::domain::Day) -> Units {
    idle.iter().filter(|e| e.day <= due).map(|e| e.units).sum()
}

/// Spreads the shortfall over product-capable members of the probed tier.
/// All or nothing: a partial cover leaves the case unresolved, so the
/// responsible node's share is only reduced when the rest is placed.
fn try_redistribute(
    case: &Case,
    tier: u32,
    snaps: &BTreeMap<VenId, SnapshotPayload>,
    net: &NetworkConfig,
) -> Option<Vec<TnaOut>> {
    let total_short: Units = case.shortfall.iter().map(|l| l.qty).sum();
    let mut remaining: Vec<DemandLine> = case.shortfall.clone();
    let mut allocations: Vec<(VenId, Vec<DemandLine>)> = Vec::new();

    for member in &net.tiers[(tier - 1) as usize] {
        if member.id == case.responsible || !member.makes(&case.line.product) {
            continue;
        }
        let mut idle = snaps[&member.id].idle.clone();
        let mut picked: Vec<DemandLine> = Vec::new();
        for line in remaining.iter_mut().filter(|l| l.qty > 0) {
            let mut take = line.qty.min(deliverable_by(&idle, line.due));
            if take == 0 {
                continue;
            }
            line.qty -= take;
            picked.push(DemandLine { qty: take, ..line.clone() });
            for slot in idle.iter_mut() {
                let used = slot.units.min(take);
                slot.units -= used;
                take -= used;
                if take == 0 {
                    break;
                }
            }
        }
        if !picked.is_empty() {
            allocations.push((member.id.clone(), picked));
        }
    }

    if remaining.iter().any(|l| l.qty > 0) {
        return None;
    }

    let mut outs = Vec::new();
    let kept = case.line.qty - total_short;
    if kept > 0 {
        outs.push(reassign(tier_of(net, &case.responsible), case, &case.responsible, vec![
            DemandLine { qty: kept, ..case.line.clone() },
        ]));
    }
    for (ven, lines) in allocations {
        outs.push(reassign(tier, case, &ven, lines));
    }
    Some(outs)
}

fn tier_of(net: &NetworkConfig, ven: &VenId) -> u32 {
    net.tier_of(ven).expect("escalation only involves managed nodes").0
}

fn reassign(from_tier: u32, case: &Case, to: &VenId, lines: Vec<DemandLine>) -> TnaOut {
    TnaOut {
        from: TierId(from_tier),
        to: Party::Na(to.clone()),
        msg: Message::CTna(ReassignPayload {
            order: case.order.clone(),
            beneficiary: case.customer.clone(),
            lines,
            conditions: PlanConditions::default(),
        }),
    }
}

/// Could the responsible node meet the original terms if components never
/// ran out? Then the order is blocked on component arrival, and delivering
/// the raw material earlier would free it. The check replans with
/// unbounded components; the needed advance is how far the assumed arrival
/// sits past the first production day of that plan.
fn try_flex(case: &Case, net: &NetworkConfig) -> Option<(u32, TnaOut)> {
    let cfg = net.ven(&case.responsible)?;
    let caps: Vec<(crate::domain::Day, Units)> =
        cfg.capacity.days().map(|d| (d, cfg.capacity.capacity_on(d))).collect();
    let unbounded = earliest_loading(
        &caps,
        |_| UNBOUNDED,
        0,
        std::slice::from_ref(&case.line),
        0,
        0,
    );
    if !unbounded.feasible {
        return None;
    }
    let first = unbounded.schedule.iter().find(|l| l.total() > 0).map(|l| l.day)?;

    let mut advance = 0u32;
    for edge in bom_children(cfg, &case.line.product).ok()? {
        let assumed = case.line.due.checked_back(edge.lead_offset).unwrap_or(crate::domain::Day(0));
        // A delivery is usable the day after it lands.
        advance = advance.max((assumed.0 + 1).saturating_sub(first.0));
    }
    if advance == 0 {
        return None;
    }

    // Every component supplier asked to move must be an external one with
    // that much room.
    for edge in bom_children(cfg, &case.line.product).ok()? {
        let assumed = case.line.due.checked_back(edge.lead_offset).unwrap_or(crate::domain::Day(0));
        if (assumed.0 + 1).saturating_sub(first.0) == 0 {
            continue;
        }
        let supplier = cfg.suppliers.iter().find_map(|sid| {
            if let Some(v) = net.ven(sid) {
                return v.makes(&edge.child).then_some(None);
            }
            net.external_supplier(sid)
                .filter(|s| s.products.contains(&edge.child))
                .map(Some)
        })?;
        match supplier {
            Some(stub) if stub.flex_days >= advance => {}
            _ => return None,
        }
    }

    let conditions = PlanConditions { component_advance_days: advance, ..Default::default() };
    let out = TnaOut {
        from: TierId(case.home),
        to: Party::Na(case.responsible.clone()),
        msg: Message::CTna(ReassignPayload {
            order: case.order.clone(),
            beneficiary: case.customer.clone(),
            lines: vec![case.line.clone()],
            conditions,
        }),
    };
    Some((advance, out))
}

/// The reassignment carrying a mediator granted relaxation: the
/// responsible node serves the full original terms under widened planning
/// conditions.
pub fn relaxation_reassign(req: &MediationRequest, conditions: PlanConditions) -> TnaOut {
    TnaOut {
        from: req.home,
        to: Party::Na(req.responsible.clone()),
        msg: Message::CTna(ReassignPayload {
            order: req.order.clone(),
            beneficiary: req.customer.clone(),
            lines: vec![req.line.clone()],
            conditions,
        }),
    }
}
