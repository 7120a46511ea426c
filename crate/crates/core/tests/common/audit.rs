//! Independent accounting: rebuild every node's takings from the recorded
//! messages and the network description alone, without touching any engine
//! state. Concluded terms come from the acceptance messages, production
//! from the planner requests on the wire, penalties from comparing the two.

use std::collections::BTreeMap;

use vennet_core::domain::{DemandLine, Units};
use vennet_core::protocol::read_trace;
use vennet_core::{Message, Money, OrderId, Party, RunSpec, VenId};

#[derive(Debug, Default, Clone)]
pub struct Account {
    pub revenue: Money,
    pub production: Money,
    pub penalties: Money,
}

impl Account {
    pub fn benefit(&self) -> Money {
        self.revenue - self.production - self.penalties
    }
}

#[derive(Default)]
struct Side {
    ordered: Vec<DemandLine>,
    net: Option<Units>,
    offered: BTreeMap<String, Vec<DemandLine>>,
    concluded: Option<Vec<DemandLine>>,
}

/// Recomputes each node's account from a finished run's trace. Only plain
/// runs are supported: a trace that granted overtime or subcontracting
/// latitude is rejected, those cost rates never show in recorded messages.
pub fn recompute(spec: &RunSpec, trace_text: &str) -> BTreeMap<VenId, Account> {
    let trace = read_trace(trace_text).expect("trace parses");

    // (order, serving node) -> everything the wire said about that pair.
    let mut sides: BTreeMap<(OrderId, VenId), Side> = BTreeMap::new();

    for env in &trace {
        match (&env.msg, &env.to, &env.from) {
            (Message::CUs(p), Party::Na(seller), _) | (Message::CDs(p), Party::Na(seller), _) => {
                let side = sides.entry((p.order.clone(), seller.clone())).or_default();
                side.ordered = vec![p.line.clone()];
            }
            (Message::CTna(p), Party::Na(seller), _) => {
                let side = sides.entry((p.order.clone(), seller.clone())).or_default();
                side.ordered = p.lines.clone();
                assert_eq!(
                    p.conditions,
                    Default::default(),
                    "audit only covers runs without granted latitude"
                );
            }
            (Message::DPaN(p), Party::Pa(ven), _) | (Message::DPaM(p), Party::Pa(ven), _) => {
                let side = sides.entry((p.order.clone(), ven.clone())).or_default();
                side.net = Some(p.lines.iter().map(|l| l.qty).sum());
                assert_eq!(
                    p.conditions,
                    Default::default(),
                    "audit only covers runs without granted latitude"
                );
            }
            (Message::NUs(p), _, Party::Na(seller)) | (Message::NDs(p), _, Party::Na(seller)) => {
                let side = sides.entry((p.order.clone(), seller.clone())).or_default();
                for s in &p.scenarios {
                    side.offered.insert(s.label.clone(), s.lines.clone());
                }
            }
            (Message::AUs(p), _, Party::Na(seller)) | (Message::ADs(p), _, Party::Na(seller)) => {
                let side = sides.entry((p.order.clone(), seller.clone())).or_default();
                side.concluded = Some(p.lines.clone());
            }
            (Message::RnUs(p), Party::Na(seller), _)
            | (Message::RnDs(p), Party::Na(seller), _) => {
                if p.accept {
                    let label = p.scenario.as_ref().expect("acceptance names a scenario");
                    let side = sides.entry((p.order.clone(), seller.clone())).or_default();
                    let lines = side.offered.get(label).expect("accepted scenario was offered");
                    side.concluded = Some(lines.clone());
                }
            }
            _ => {}
        }
    }

    let mut accounts: BTreeMap<VenId, Account> = BTreeMap::new();
    for ((_, seller), side) in &sides {
        let Some(concluded) = &side.concluded else { continue };
        let Some(cfg) = spec.network.ven(seller) else { continue };
        let account = accounts.entry(seller.clone()).or_default();

        let sold: Units = concluded.iter().map(|l| l.qty).sum();
        account.revenue += cfg.costs.selling_price.times(sold);

        // What was asked minus what the planner was told to make is the
        // stock the node threw in; the rest of the concluded volume had to
        // be produced.
        let asked: Units = side.ordered.iter().map(|l| l.qty).sum();
        let stock_served = asked.saturating_sub(side.net.unwrap_or(0));
        account.production += cfg.costs.unit_production.times(sold.saturating_sub(stock_served));

        // Units delivered past the date they were ordered for, first in
        // first out against the ordered lines.
        let mut slots: Vec<(u32, Units)> =
            side.ordered.iter().map(|l| (l.due.0, l.qty)).collect();
        for line in concluded {
            let mut left = line.qty;
            for slot in slots.iter_mut() {
                if slot.1 == 0 || left == 0 {
                    continue;
                }
                let take = left.min(slot.1);
                slot.1 -= take;
                left -= take;
                let late = line.due.0.saturating_sub(slot.0);
                if late > 0 {
                    account.penalties +=
                        cfg.costs.penalty_per_unit_day.times(take * late);
                }
            }
        }
    }
    accounts
}

pub fn network_benefit(accounts: &BTreeMap<VenId, Account>) -> Money {
    accounts.values().map(|a| a.benefit()).sum()
}
