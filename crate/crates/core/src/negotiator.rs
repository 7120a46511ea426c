//! The negotiation agent: a node's only externally visible face.
//!
//! It takes customer orders, nets them against free finished stock, asks
//! its planner for the rest, orders components, relays counter-proposals
//! in both directions and concludes contracts. When a customer refuses the
//! alternatives it can offer, it hands the order to the tier negotiator.
//!
//! Handlers return effects instead of performing them: messages to post,
//! directives for the node's planner, and events for the runtime's order
//! registry and accounts. The bus applies them, which keeps every handler
//! a pure function of agent state plus the incoming message.

use std::collections::BTreeMap;

use crate::domain::{
    DemandLine, NetworkConfig, ProductId, Scenario, TierId, Units, VenConfig, VenId,
};
use crate::planner::{PaAgent, PaDirective};
use crate::protocol::{
    AcceptPayload, BlockedOrder, CounterPayload, CounterReplyPayload, EvaluatePayload,
    HelpPayload, Message, OrderId, OrderPayload, Party, PlanConditions, PlanRequestPayload,
    SnapshotPayload,
};

/// Topology facts an agent needs: who supplies what, and who is a client.
pub struct NaNetView<'a> {
    pub net: &'a NetworkConfig,
    pub me: &'a VenConfig,
}

impl NaNetView<'_> {
    /// Preferred source for a component: the first supplier in declared
    /// order able to make it.
    pub fn supplier_for(&self, product: &ProductId) -> Option<Party> {
        for sid in &self.me.suppliers {
            if let Some(v) = self.net.ven(sid) {
                if v.makes(product) {
                    return Some(Party::Na(sid.clone()));
                }
            } else if let Some(s) = self.net.external_supplier(sid) {
                if s.products.contains(product) {
                    return Some(Party::External(sid.clone()));
                }
            }
        }
        None
    }

    pub fn party_for(&self, id: &VenId) -> Party {
        if self.net.is_client(id) {
            Party::Client(id.clone())
        } else {
            Party::Na(id.clone())
        }
    }
}

/// Something the runtime must do on the agent's behalf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NaEvent {
    /// A contract concluded with this node as the supplier.
    Concluded {
        order: OrderId,
        customer: Party,
        lines: Vec<DemandLine>,
        original: DemandLine,
        counter_accepted: bool,
    },
    /// A component order was placed on behalf of `parent`.
    SubOrdered { parent: OrderId, sub: OrderId, supplier: Party },
    /// The order went to the tier negotiator.
    HelpRaised { order: OrderId },
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct NaEffects {
    pub outs: Vec<(Party, Message)>,
    pub directives: Vec<PaDirective>,
    pub events: Vec<NaEvent>,
}

impl NaEffects {
    fn out(&mut self, to: Party, msg: Message) {
        self.outs.push((to, msg));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NaError {
    #[error("{ven}: no order {order} on the books")]
    UnknownOrder { ven: VenId, order: OrderId },
    #[error("{ven}: no supply line {order}")]
    UnknownSubOrder { ven: VenId, order: OrderId },
    #[error("{ven}: nobody supplies {product}")]
    NoSupplier { ven: VenId, product: ProductId },
    #[error("{ven}: order {order} carries no quantity")]
    EmptyOrder { ven: VenId, order: OrderId },
    #[error("{ven}: message {0:?} does not belong at a negotiation agent", .kind)]
    Unhandled { ven: VenId, kind: crate::protocol::MsgKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LocalStatus {
    Planning,
    AwaitingSupply,
    Offered,
    Concluded,
    Helped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SubState {
    Ordered,
    Countered,
    Confirmed,
    Refused,
}

#[derive(Debug, Clone)]
struct SubOrder {
    supplier: Party,
    needs: Vec<DemandLine>,
    offered: Vec<Scenario>,
    confirmed: Vec<DemandLine>,
    state: SubState,
}

impl SubOrder {
    /// Confirmed deliveries cover the ordered terms when every ordered
    /// date is dominated: at least as much confirmed by then as asked.
    fn covered(&self) -> bool {
        let mut asked = 0;
        self.needs.iter().all(|need| {
            asked += need.qty;
            let have: Units =
                self.confirmed.iter().filter(|c| c.due <= need.due).map(|c| c.qty).sum();
            have >= asked
        })
    }
}

#[derive(Debug, Clone)]
struct OrderState {
    customer: Party,
    line: DemandLine,
    stock_served: Units,
    net: Vec<DemandLine>,
    status: LocalStatus,
    offered: Vec<Scenario>,
    shortfall: Vec<DemandLine>,
    subs: BTreeMap<OrderId, SubOrder>,
}

/// Negotiation agent state: the ledger of orders this node is serving.
#[derive(Debug)]
pub struct NaAgent {
    ven: VenId,
    tier: TierId,
    ledger: BTreeMap<OrderId, OrderState>,
}

impl NaAgent {
    pub fn new(ven: VenId, tier: TierId) -> NaAgent {
        NaAgent { ven, tier, ledger: BTreeMap::new() }
    }

    pub fn id(&self) -> &VenId {
        &self.ven
    }

    fn err_unknown(&self, order: &OrderId) -> NaError {
        NaError::UnknownOrder { ven: self.ven.clone(), order: order.clone() }
    }

    /// Handles one delivered message. `pa` is this node's planner, read
    /// only: all changes to it travel back as directives.
    pub fn handle(
        &mut self,
        from: &Party,
        msg: &Message,
        pa: &PaAgent,
        view: &NaNetView<'_>,
    ) -> Result<NaEffects, NaError> {
        match msg {
            Message::CUs(p) | Message::CDs(p) => self.on_order(from, p, pa),
            Message::RPaUs(p) => self.on_plan_reply(p, view),
            Message::RPaDs(p) => self.on_eval_reply(p),
            Message::ADs(p) => self.on_supply_confirmed(&p.order, p.lines.clone()),
            Message::NDs(p) => self.on_supply_countered(p),
            Message::RnUs(p) | Message::RnDs(p) => self.on_counter_reply(p, pa),
            Message::CTna(p) => self.on_reassign(p, pa, view),
            Message::DTna(p) => self.on_probe(p.probe, pa),
            other => Err(NaError::Unhandled { ven: self.ven.clone(), kind: other.kind() }),
        }
    }

    /// Splits demand into a stock served part and a part to produce.
    fn net_against_stock(lines: &[DemandLine], available: Units) -> (Units, Vec<DemandLine>) {
        let mut left = available;
        let mut net = Vec::new();
        for line in lines {
            let from_stock = line.qty.min(left);
            left -= from_stock;
            if line.qty > from_stock {
                net.push(DemandLine { qty: line.qty - from_stock, ..line.clone() });
            }
        }
        let total: Units = lines.iter().map(|l| l.qty).sum();
        let net_total: Units = net.iter().map(|l| l.qty).sum();
        (total - net_total, net)
    }

    /// Conclusion terms: the stock served part at the original due date
    /// plus the production lines, merged per date.
    fn conclusion_lines(state: &OrderState, committed: &[DemandLine]) -> Vec<DemandLine> {
        let mut per_due: BTreeMap<crate::domain::Day, Units> = BTreeMap::new();
        if state.stock_served > 0 {
            per_due.insert(state.line.due, state.stock_served);
        }
        for l in committed {
            *per_due.entry(l.due).or_insert(0) += l.qty;
        }
        per_due
            .into_iter()
            .map(|(due, qty)| DemandLine { product: state.line.product.clone(), due, qty })
            .collect()
    }

    fn conclude(
        &mut self,
        order: &OrderId,
        committed: &[DemandLine],
        counter_accepted: bool,
        effects: &mut NaEffects,
    ) {
        let state = self.ledger.get_mut(order).expect("caller checked the ledger");
        state.status = LocalStatus::Concluded;
        let lines = Self::conclusion_lines(state, committed);
        let accept = AcceptPayload { order: order.clone(), lines: lines.clone() };
        let msg = match &state.customer {
            Party::Client(_) => Message::AUs(accept),
            _ => Message::ADs(accept),
        };
        effects.out(state.customer.clone(), msg);
        effects.events.push(NaEvent::Concluded {
            order: order.clone(),
            customer: state.customer.clone(),
            lines,
            original: state.line.clone(),
            counter_accepted,
        });
    }

    fn on_order(
        &mut self,
        from: &Party,
        p: &OrderPayload,
        pa: &PaAgent,
    ) -> Result<NaEffects, NaError> {
        if p.line.qty == 0 {
            return Err(NaError::EmptyOrder { ven: self.ven.clone(), order: p.order.clone() });
        }
        let mut effects = NaEffects::default();
        let available = pa.available_stock(&p.line.product);
        let (stock_served, net) = Self::net_against_stock(std::slice::from_ref(&p.line), available);

        let state = OrderState {
            customer: from.clone(),
            line: p.line.clone(),
            stock_served,
            net: net.clone(),
            status: LocalStatus::Planning,
            offered: Vec::new(),
            shortfall: Vec::new(),
            subs: BTreeMap::new(),
        };
        self.ledger.insert(p.order.clone(), state);

        if net.is_empty() {
            // Fully on the shelf: confirm without waking the planner.
            effects.directives.push(PaDirective::CommitStock {
                order: p.order.clone(),
                lines: vec![p.line.clone()],
            });
            self.conclude(&p.order, &[], false, &mut effects);
        } else {
            effects.out(
                Party::Pa(self.ven.clone()),
                Message::DPaN(PlanRequestPayload {
                    order: p.order.clone(),
                    lines: net,
                    conditions: PlanConditions::default(),
                }),
            );
        }
        Ok(effects)
    }

    fn on_plan_reply(
        &mut self,
        p: &crate::protocol::PlanReplyPayload,
        view: &NaNetView<'_>,
    ) -> Result<NaEffects, NaError> {
        let state = self.ledger.get(&p.order).ok_or_else(|| self.err_unknown(&p.order))?;
        let customer = state.customer.clone();
        let original = state.line.clone();
        let stock_served = state.stock_served;
        let mut effects = NaEffects::default();

        if p.feasible {
            if p.needs.is_empty() {
                let committed = self.ledger[&p.order].net.clone();
                effects.directives.push(PaDirective::Commit {
                    order: p.order.clone(),
                    stock_served,
                });
                self.conclude(&p.order, &committed, false, &mut effects);
                return Ok(effects);
            }

            // Order every dated need from the preferred supplier. A product
            // needed on several dates gets one order per date.
            let mut subs: BTreeMap<OrderId, SubOrder> = BTreeMap::new();
            for need in &p.needs {
                let supplier = view.supplier_for(&need.product).ok_or_else(|| {
                    NaError::NoSupplier { ven: self.ven.clone(), product: need.product.clone() }
                })?;
                let repeated = p.needs.iter().filter(|n| n.product == need.product).count() > 1;
                let sub_id = if repeated {
                    OrderId::new(format!(
                        "{}:{}:{}@{}",
                        p.order, self.ven, need.product, need.due
                    ))
                } else {
                    p.order.sub_order(&self.ven, need.product.as_str())
                };
                effects.out(
                    supplier.clone(),
                    Message::CDs(OrderPayload { order: sub_id.clone(), line: need.clone() }),
                );
                effects.directives.push(PaDirective::LinkSupply {
                    sub_order: sub_id.clone(),
                    parent: p.order.clone(),
                    product: need.product.clone(),
                });
                effects.events.push(NaEvent::SubOrdered {
                    parent: p.order.clone(),
                    sub: sub_id.clone(),
                    supplier: supplier.clone(),
                });
                subs.insert(
                    sub_id,
                    SubOrder {
                        supplier,
                        needs: vec![need.clone()],
                        offered: Vec::new(),
                        confirmed: Vec::new(),
                        state: SubState::Ordered,
                    },
                );
            }
            let state = self.ledger.get_mut(&p.order).expect("checked above");
            state.subs = subs;
            state.status = LocalStatus::AwaitingSupply;
            return Ok(effects);
        }

        if !p.scenarios.is_empty() {
            let counter = CounterPayload { order: p.order.clone(), scenarios: p.scenarios.clone() };
            let msg = match customer {
                Party::Client(_) => Message::NUs(counter),
                _ => Message::NDs(counter),
            };
            effects.out(customer, msg);
            let state = self.ledger.get_mut(&p.order).expect("checked above");
            state.offered = p.scenarios.clone();
            state.status = LocalStatus::Offered;
            return Ok(effects);
        }

        // Nothing worth offering: straight to the tier negotiator.
        let shortfall = vec![original.clone()];
        self.raise_help(&p.order, &customer, original, shortfall, &mut effects);
        Ok(effects)
    }

    fn raise_help(
        &mut self,
        order: &OrderId,
        customer: &Party,
        line: DemandLine,
        shortfall: Vec<DemandLine>,
        effects: &mut NaEffects,
    ) {
        let customer_ven = match customer {
            Party::Client(v) | Party::Na(v) | Party::External(v) | Party::Pa(v) => v.clone(),
            Party::Tna(_) => unreachable!("a tier negotiator never orders"),
        };
        effects.out(
            Party::Tna(self.tier),
            Message::Help(HelpPayload {
                order: order.clone(),
                customer: customer_ven,
                line,
                shortfall: shortfall.clone(),
            }),
        );
        effects.events.push(NaEvent::HelpRaised { order: order.clone() });
        let state = self.ledger.get_mut(order).expect("caller checked the ledger");
        state.status = LocalStatus::Helped;
        state.shortfall = shortfall;
    }

    /// A supplier confirmed delivery lines for one of our component orders,
    /// possibly one of several nodes serving it after a reassignment.
    fn on_supply_confirmed(
        &mut self,
        sub_id: &OrderId,
        lines: Vec<DemandLine>,
    ) -> Result<NaEffects, NaError> {
        let parent_id = self
            .ledger
            .iter()
            .find(|(_, s)| s.subs.contains_key(sub_id))
            .map(|(id, _)| id.clone())
            .ok_or_else(|| NaError::UnknownSubOrder {
                ven: self.ven.clone(),
                order: sub_id.clone(),
            })?;

        let state = self.ledger.get_mut(&parent_id).expect("found just above");
        let sub = state.subs.get_mut(sub_id).expect("found just above");
        sub.confirmed.extend(lines);
        if sub.covered() {
            sub.state = SubState::Confirmed;
        }

        let mut effects = NaEffects::default();
        if state.subs.values().all(|s| matches!(s.state, SubState::Confirmed)) {
            let committed = state.net.clone();
            let stock_served = state.stock_served;
            effects.directives.push(PaDirective::Commit { order: parent_id.clone(), stock_served });
            self.conclude(&parent_id, &committed, false, &mut effects);
        }
        Ok(effects)
    }

    /// A supplier countered a component order: let the planner judge the
    /// offered scenarios against our own obligation.
    fn on_supply_countered(&mut self, p: &CounterPayload) -> Result<NaEffects, NaError> {
        let parent_id = self
            .ledger
            .iter()
            .find(|(_, s)| s.subs.contains_key(&p.order))
            .map(|(id, _)| id.clone())
            .ok_or_else(|| NaError::UnknownSubOrder {
                ven: self.ven.clone(),
                order: p.order.clone(),
            })?;
        let state = self.ledger.get_mut(&parent_id).expect("found just above");
        let sub = state.subs.get_mut(&p.order).expect("found just above");
        sub.state = SubState::Countered;
        sub.offered = p.scenarios.clone();

        let mut effects = NaEffects::default();
        effects.out(
            Party::Pa(self.ven.clone()),
            Message::DPaA(EvaluatePayload { order: p.order.clone(), scenarios: p.scenarios.clone() }),
        );
        Ok(effects)
    }

    /// The planner's verdict on a supplier's counter.
    fn on_eval_reply(
        &mut self,
        p: &crate::protocol::EvaluateReplyPayload,
    ) -> Result<NaEffects, NaError> {
        let parent_id = self
            .ledger
            .iter()
            .find(|(_, s)| s.subs.contains_key(&p.order))
            .map(|(id, _)| id.clone())
            .ok_or_else(|| NaError::UnknownSubOrder {
                ven: self.ven.clone(),
                order: p.order.clone(),
            })?;

        let mut effects = NaEffects::default();
        let state = self.ledger.get_mut(&parent_id).expect("found just above");
        let sub = state.subs.get_mut(&p.order).expect("found just above");
        let supplier = sub.supplier.clone();

        if p.feasible {
            let label = p.scenario.clone().expect("a feasible verdict names its scenario");
            let chosen = sub
                .offered
                .iter()
                .find(|s| s.label == label)
                .expect("the planner picked from the offered set");
            sub.confirmed = chosen.lines.clone();
            sub.state = SubState::Confirmed;
            effects.out(
                supplier,
                Message::RnDs(CounterReplyPayload {
                    order: p.order.clone(),
                    accept: true,
                    scenario: Some(label),
                }),
            );
            if state.subs.values().all(|s| matches!(s.state, SubState::Confirmed)) {
                let committed = state.net.clone();
                let stock_served = state.stock_served;
                effects
                    .directives
                    .push(PaDirective::Commit { order: parent_id.clone(), stock_served });
                self.conclude(&parent_id, &committed, false, &mut effects);
            }
        } else {
            sub.state = SubState::Refused;
            effects.out(
                supplier,
                Message::RnDs(CounterReplyPayload {
                    order: p.order.clone(),
                    accept: false,
                    scenario: None,
                }),
            );
        }
        Ok(effects)
    }

    /// The customer's verdict on our counter-proposal.
    fn on_counter_reply(
        &mut self,
        p: &CounterReplyPayload,
        pa: &PaAgent,
    ) -> Result<NaEffects, NaError> {
        let state = self.ledger.get(&p.order).ok_or_else(|| self.err_unknown(&p.order))?;
        let customer = state.customer.clone();
        let original = state.line.clone();
        let mut effects = NaEffects::default();

        if p.accept {
            let label = p.scenario.clone().unwrap_or_else(|| {
                state.offered.first().map(|s| s.label.clone()).unwrap_or_default()
            });
            let chosen = state
                .offered
                .iter()
                .find(|s| s.label == label)
                .ok_or_else(|| self.err_unknown(&p.order))?
                .clone();
            effects.directives.push(PaDirective::CommitScenario {
                order: p.order.clone(),
                label: label.clone(),
            });
            let st = self.ledger.get_mut(&p.order).expect("checked above");
            st.status = LocalStatus::Concluded;
            st.net = chosen.lines.clone();
            effects.events.push(NaEvent::Concluded {
                order: p.order.clone(),
                customer,
                lines: chosen.lines.clone(),
                original,
                counter_accepted: true,
            });

            // The scenario plan may still need components.
            if let Some(proposal) = pa.proposal(&p.order) {
                if let Some((_, plan)) =
                    proposal.scenarios.iter().find(|(s, _)| s.label == label)
                {
                    debug_assert!(
                        plan.needs.is_empty(),
                        "component ordering after a scenario conclusion is not wired up"
                    );
                }
            }
            return Ok(effects);
        }

        // Refused: report the gap between asked and achievable.
        let by_due = pa.proposal(&p.order).map(|pr| pr.by_due).unwrap_or(0);
        let missing = original.qty.saturating_sub(by_due);
        let shortfall = vec![DemandLine {
            product: original.product.clone(),
            due: original.due,
            qty: missing,
        }];
        self.raise_help(&p.order, &customer, original, shortfall, &mut effects);
        Ok(effects)
    }

    /// A reassignment from the tier negotiator: serve these lines for the
    /// beneficiary, under possibly widened planning conditions.
    fn on_reassign(
        &mut self,
        p: &crate::protocol::ReassignPayload,
        pa: &PaAgent,
        view: &NaNetView<'_>,
    ) -> Result<NaEffects, NaError> {
        let mut effects = NaEffects::default();
        let known = self.ledger.contains_key(&p.order);
        let customer = view.party_for(&p.beneficiary);
        let available = pa.available_stock(&p.lines[0].product);
        let (stock_served, net) = Self::net_against_stock(&p.lines, available);
        let line = DemandLine {
            product: p.lines[0].product.clone(),
            due: p.lines.last().expect("a reassignment carries lines").due,
            qty: p.lines.iter().map(|l| l.qty).sum(),
        };

        let state = OrderState {
            customer,
            line: line.clone(),
            stock_served,
            net: net.clone(),
            status: LocalStatus::Planning,
            offered: Vec::new(),
            shortfall: Vec::new(),
            subs: BTreeMap::new(),
        };
        self.ledger.insert(p.order.clone(), state);

        if net.is_empty() {
            effects.directives.push(PaDirective::CommitStock {
                order: p.order.clone(),
                lines: p.lines.clone(),
            });
            self.conclude(&p.order, &[], false, &mut effects);
        } else {
            let request = PlanRequestPayload {
                order: p.order.clone(),
                lines: net,
                conditions: p.conditions,
            };
            let msg = if known { Message::DPaM(request) } else { Message::DPaN(request) };
            effects.out(Party::Pa(self.ven.clone()), msg);
        }
        Ok(effects)
    }

    /// Load probe from the tier negotiator.
    fn on_probe(&self, probe: u32, pa: &PaAgent) -> Result<NaEffects, NaError> {
        let (load, idle) = pa.load_snapshot();
        let blocked = self
            .ledger
            .iter()
            .filter(|(_, s)| s.status == LocalStatus::Helped)
            .map(|(id, s)| BlockedOrder { order: id.clone(), shortfall: s.shortfall.clone() })
            .collect();
        let mut effects = NaEffects::default();
        effects.out(
            Party::Tna(self.tier),
            Message::RTna(SnapshotPayload {
                probe,
                ven: self.ven.clone(),
                load,
                idle,
                blocked,
            }),
        );
        Ok(effects)
    }
}
