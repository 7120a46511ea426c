//! Production scheduling and the planning agent.
//!
//! Scheduling uses a deliberately small model. Stock on hand is usable at
//! once, a delivery arriving on day `d` is usable from `d + 1`, production
//! on the due day still counts, and storage is free. Under those rules
//! loading every day as early and as full as possible maximises the
//! finished quantity at every date, so one greedy pass decides feasibility,
//! finds the earliest completion and prices the plan.
//!
//! The planning agent wraps the scheduler with the node's book: committed
//! plans occupy capacity and reserve stock, open proposals do not. It
//! answers three requests: plan a new order, re-plan an order under changed
//! lines or conditions, and judge a supplier's counter-proposal against an
//! existing proposal.

use std::collections::BTreeMap;

use crate::domain::{
    bom_children, CostModel, Day, DemandLine, DomainError, ProductId, Scenario, Units, VenConfig,
};
use crate::money::Money;
use crate::protocol::statechart::PaPhase;
use crate::protocol::{
    EvaluatePayload, EvaluateReplyPayload, LoadEntry, Message, OrderId, PlanConditions,
    PlanReplyPayload, PlanRequestPayload,
};

/// Effectively no limit from component availability.
pub const UNBOUNDED: Units = Units::MAX;

/// Production booked on one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanLine {
    pub day: Day,
    pub normal: Units,
    pub overtime: Units,
}

impl PlanLine {
    pub fn total(&self) -> Units {
        self.normal + self.overtime
    }
}

/// Cumulative delivery obligations derived from demand lines.
fn deadlines(demand: &[DemandLine]) -> Vec<(Day, Units)> {
    let mut cum = 0;
    demand
        .iter()
        .map(|l| {
            cum += l.qty;
            (l.due, cum)
        })
        .collect()
}

/// Turns an arrival profile into the cumulative availability rule: stock is
/// usable at once, an arrival on day `d` from `d + 1`.
pub fn avail_from_profile(stock: Units, arrivals: &[(Day, Units)]) -> impl Fn(Day) -> Units + '_ {
    move |day: Day| {
        let late: Units = arrivals.iter().filter(|(d, _)| *d < day).map(|(_, q)| q).sum();
        stock.saturating_add(late)
    }
}

/// Outcome of one scheduling attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedResult {
    pub feasible: bool,
    /// Per day production, only days that produce. Empty when infeasible.
    pub schedule: Vec<PlanLine>,
    /// Units sourced outside, dated when they are delivered.
    pub subcontracted: Vec<(Day, Units)>,
    /// Largest quantity deliverable by each capacity day, at full speed and
    /// full latitude. Step profile, for counter-proposal construction.
    pub max_deliverable: Vec<(Day, Units)>,
    /// Earliest day the whole demand could be delivered, if ever.
    pub completion: Option<Day>,
}

impl SchedResult {
    /// Largest deliverable quantity by `day` under full latitude.
    pub fn deliverable_by(&self, day: Day) -> Units {
        self.max_deliverable
            .iter()
            .take_while(|(d, _)| *d <= day)
            .last()
            .map(|(_, q)| *q)
            .unwrap_or(0)
    }
}

/// Schedules `demand` onto `capacity` by earliest loading.
///
/// `capacity` lists residual units per day, ascending, and is the only
/// place production may happen. `avail_cum` bounds cumulative production
/// through each day, in product units, from component availability.
/// `stock` is finished stock already allocated to this demand. The two
/// pools grant overtime (extra units on capacity days) and subcontracting
/// (outside units deliverable on any date); both default to zero latitude.
pub fn earliest_loading(
    capacity: &[(Day, Units)],
    avail_cum: impl Fn(Day) -> Units,
    stock: Units,
    demand: &[DemandLine],
    overtime_pool: Units,
    subcontract_pool: Units,
) -> SchedResult {
    let marks = deadlines(demand);
    let total: Units = demand.iter().map(|l| l.qty).sum();

    // Full speed profile: the most that can be cumulatively produced
    // through each day, counting the whole overtime pool. Capacity on days
    // before the components exist is gone, not banked, hence the running
    // minimum rather than total capacity against total availability.
    let mut max_deliverable = Vec::with_capacity(capacity.len());
    let mut reachable: Units = 0;
    for &(day, cap) in capacity {
        reachable = reachable.saturating_add(cap).min(avail_cum(day));
        let best = reachable
            .saturating_add(overtime_pool)
            .min(avail_cum(day))
            .saturating_add(stock)
            .saturating_add(subcontract_pool);
        max_deliverable.push((day, best));
    }

    let deliverable_at = |day: Day| -> Units {
        max_deliverable
            .iter()
            .take_while(|(d, _)| *d <= day)
            .last()
            .map(|(_, q)| *q)
            .unwrap_or(stock.saturating_add(subcontract_pool))
    };

    let completion = capacity
        .iter()
        .map(|(d, _)| *d)
        .find(|d| deliverable_at(*d) >= total)
        .or_else(|| (stock.saturating_add(subcontract_pool) >= total).then(|| demand[0].due));

    let feasible = marks.iter().all(|&(due, q)| deliverable_at(due) >= q);
    if !feasible {
        return SchedResult {
            feasible: false,
            schedule: Vec::new(),
            subcontracted: Vec::new(),
            max_deliverable,
            completion,
        };
    }

    // How much the base capacity misses any deadline by decides the extra
    // units; overtime is preferred, the rest is subcontracted at the first
    // deadline that is short.
    let mut base_cum = Vec::with_capacity(capacity.len());
    let mut cum: Units = 0;
    for &(day, cap) in capacity {
        let p = cap.min(avail_cum(day).saturating_sub(cum));
        cum += p;
        base_cum.push((day, cum));
    }
    let base_at = |day: Day| -> Units {
        base_cum.iter().take_while(|(d, _)| *d <= day).last().map(|(_, q)| *q).unwrap_or(0)
    };

    let mut extra: Units = 0;
    let mut first_short: Option<Day> = None;
    for &(due, q) in &marks {
        let have = stock.saturating_add(base_at(due));
        let miss = q.saturating_sub(have);
        if miss > extra {
            extra = miss;
        }
        if miss > 0 && first_short.is_none() {
            first_short = Some(due);
        }
    }
    let total_miss = total.saturating_sub(stock.saturating_add(base_at(Day(u32::MAX))));
    if total_miss > extra {
        extra = total_miss;
    }

    let overtime_head = first_short
        .map(|due| avail_cum(due).saturating_sub(base_at(due)))
        .unwrap_or(UNBOUNDED);
    let ot_use = extra.min(overtime_pool).min(overtime_head);
    let sub_use = (extra - ot_use).min(subcontract_pool);
    let subcontracted: Vec<(Day, Units)> = if sub_use > 0 {
        vec![(first_short.expect("shortage implies a short deadline"), sub_use)]
    } else {
        Vec::new()
    };

    // Normal production toward the reduced target, earliest first.
    let target = total.saturating_sub(stock).saturating_sub(sub_use);
    let mut schedule: Vec<PlanLine> = Vec::new();
    let mut cum: Units = 0;
    for &(day, cap) in capacity {
        let p = cap.min(avail_cum(day).saturating_sub(cum)).min(target - cum);
        if p > 0 {
            schedule.push(PlanLine { day, normal: p, overtime: 0 });
            cum += p;
        }
        if cum == target {
            break;
        }
    }

    // Place overtime units one at a time on the earliest capacity day that
    // keeps availability respected everywhere after it, freeing the latest
    // normal unit when production merely has to move forward.
    let mut ot_left = ot_use;
    while ot_left > 0 {
        let due = first_unmet(&schedule, &subcontracted, stock, &marks)
            .unwrap_or(capacity.last().map(|(d, _)| *d).unwrap_or(Day(u32::MAX)));
        let slot = capacity
            .iter()
            .map(|(d, _)| *d)
            .filter(|d| *d <= due)
            .find(|d| fits_one_more(&schedule, &avail_cum, capacity, *d));
        let Some(day) = slot else { break };
        bump(&mut schedule, day, false);
        if cum == target {
            // Volume moved forward, not added: retire the latest normal unit.
            shrink_latest_normal(&mut schedule, day);
        } else {
            cum += 1;
        }
        ot_left -= 1;
    }

    // The profile check above is an upper bound on what placement can do;
    // if a deadline still stands missed the honest verdict is a refusal,
    // not a broken schedule.
    if !met(&schedule, &subcontracted, stock, &marks) {
        return SchedResult {
            feasible: false,
            schedule: Vec::new(),
            subcontracted: Vec::new(),
            max_deliverable,
            completion,
        };
    }

    SchedResult { feasible: true, schedule, subcontracted, max_deliverable, completion }
}

fn produced_by(schedule: &[PlanLine], day: Day) -> Units {
    schedule.iter().filter(|l| l.day <= day).map(|l| l.total()).sum()
}

fn met(
    schedule: &[PlanLine],
    sub: &[(Day, Units)],
    stock: Units,
    marks: &[(Day, Units)],
) -> bool {
    first_unmet(schedule, sub, stock, marks).is_none()
}

fn first_unmet(
    schedule: &[PlanLine],
    sub: &[(Day, Units)],
    stock: Units,
    marks: &[(Day, Units)],
) -> Option<Day> {
    marks
        .iter()
        .find(|&&(due, q)| {
            let delivered: Units = sub.iter().filter(|(d, _)| *d <= due).map(|(_, u)| u).sum();
            stock + produced_by(schedule, due) + delivered < q
        })
        .map(|&(due, _)| due)
}

fn fits_one_more(
    schedule: &[PlanLine],
    avail_cum: impl Fn(Day) -> Units,
    capacity: &[(Day, Units)],
    day: Day,
) -> bool {
    capacity
        .iter()
        .filter(|(d, _)| *d >= day)
        .all(|(d, _)| produced_by(schedule, *d) < avail_cum(*d))
}

fn bump(schedule: &mut Vec<PlanLine>, day: Day, normal: bool) {
    match schedule.iter_mut().find(|l| l.day == day) {
        Some(line) if normal => line.normal += 1,
        Some(line) => line.overtime += 1,
        None => {
            let line = PlanLine {
                day,
                normal: if normal { 1 } else { 0 },
                overtime: if normal { 0 } else { 1 },
            };
            let pos = schedule.iter().position(|l| l.day > day).unwrap_or(schedule.len());
            schedule.insert(pos, line);
        }
    }
}

fn shrink_latest_normal(schedule: &mut Vec<PlanLine>, after: Day) {
    if let Some(idx) = schedule.iter().rposition(|l| l.day > after && l.normal > 0) {
        schedule[idx].normal -= 1;
        if schedule[idx].total() == 0 {
            schedule.remove(idx);
        }
    }
}

/// A fully worked out way to serve one demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub product: ProductId,
    /// Delivery obligation the plan serves.
    pub lines: Vec<DemandLine>,
    pub schedule: Vec<PlanLine>,
    pub subcontracted: Vec<(Day, Units)>,
    /// Finished stock allocated to the obligation, on top of production.
    pub fg_stock_used: Units,
    pub comp_stock_used: BTreeMap<ProductId, Units>,
    /// Dated component orders still required, net of component stock.
    pub needs: Vec<DemandLine>,
}

impl Plan {
    pub fn produced_normal(&self) -> Units {
        self.schedule.iter().map(|l| l.normal).sum()
    }

    pub fn produced_overtime(&self) -> Units {
        self.schedule.iter().map(|l| l.overtime).sum()
    }

    pub fn subcontracted_units(&self) -> Units {
        self.subcontracted.iter().map(|(_, u)| u).sum()
    }

    /// Production cost of the plan. Stock served units cost nothing here;
    /// their cost was carried when they were made.
    pub fn cost(&self, costs: &CostModel) -> Money {
        costs.unit_production.times(self.produced_normal())
            + costs.overtime.times(self.produced_overtime())
            + costs.subcontract.times(self.subcontracted_units())
    }
}

/// What the planner thinks of a plan request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Feasible(Plan),
    /// Infeasible as asked; these alternatives work, best first. The
    /// quantity is what could still be delivered by the requested due date.
    Counter { scenarios: Vec<(Scenario, Plan)>, by_due: Units },
    /// Nothing useful can be planned inside the horizon.
    Hopeless,
}

/// An answered but not yet concluded plan request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub demand: Vec<DemandLine>,
    pub conditions: PlanConditions,
    pub plan: Option<Plan>,
    pub scenarios: Vec<(Scenario, Plan)>,
    pub by_due: Units,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PaError {
    #[error("no proposal or commitment for order {0}")]
    UnknownOrder(OrderId),
    #[error("order {0} is not a registered supply line")]
    UnknownLink(OrderId),
    #[error("no scenario labelled {label} for order {order}")]
    UnknownScenario { order: OrderId, label: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Instructions a negotiation agent hands its planner outside the message
/// flow: registering supply lines and concluding contracts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PaDirective {
    /// Conclude the proposed base plan, reserving `stock_served` finished
    /// units on top of it.
    Commit { order: OrderId, stock_served: Units },
    /// Conclude one of the proposed scenarios.
    CommitScenario { order: OrderId, label: String },
    /// Conclude a service straight from finished stock, no production.
    CommitStock { order: OrderId, lines: Vec<DemandLine> },
    /// Remember that `sub_order` procures `product` for `parent`.
    LinkSupply { sub_order: OrderId, parent: OrderId, product: ProductId },
}

/// The planning agent: scheduler plus the book of proposals, commitments,
/// booked capacity and reserved stock.
#[derive(Debug, Clone)]
pub struct PaAgent {
    cfg: VenConfig,
    phase: PaPhase,
    booked: BTreeMap<Day, Units>,
    reserved: BTreeMap<ProductId, Units>,
    proposals: BTreeMap<OrderId, Proposal>,
    committed: BTreeMap<OrderId, Plan>,
    supply_links: BTreeMap<OrderId, (OrderId, ProductId)>,
}

impl PaAgent {
    pub fn new(cfg: VenConfig) -> PaAgent {
        PaAgent {
            cfg,
            phase: PaPhase::Idle,
            booked: BTreeMap::new(),
            reserved: BTreeMap::new(),
            proposals: BTreeMap::new(),
            committed: BTreeMap::new(),
            supply_links: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &VenConfig {
        &self.cfg
    }

    pub fn phase(&self) -> PaPhase {
        self.phase
    }

    pub fn committed_plan(&self, order: &OrderId) -> Option<&Plan> {
        self.committed.get(order)
    }

    pub fn committed_plans(&self) -> impl Iterator<Item = (&OrderId, &Plan)> {
        self.committed.iter()
    }

    pub fn proposal(&self, order: &OrderId) -> Option<&Proposal> {
        self.proposals.get(order)
    }

    /// Stock of `product` not yet promised to anyone.
    pub fn available_stock(&self, product: &ProductId) -> Units {
        let held = self.cfg.stocks.get(product).copied().unwrap_or(0);
        held.saturating_sub(self.reserved.get(product).copied().unwrap_or(0))
    }

    /// Unbooked capacity per day, ascending, only days that have any.
    fn residual_capacity(&self) -> Vec<(Day, Units)> {
        self.cfg
            .capacity
            .days()
            .filter_map(|d| {
                let free = self
                    .cfg
                    .capacity
                    .capacity_on(d)
                    .saturating_sub(self.booked.get(&d).copied().unwrap_or(0));
                (free > 0).then_some((d, free))
            })
            .collect()
    }

    /// Booked production and idle capacity, for tier level probes.
    pub fn load_snapshot(&self) -> (Vec<LoadEntry>, Vec<LoadEntry>) {
        let load = self
            .booked
            .iter()
            .filter(|(_, u)| **u > 0)
            .map(|(d, u)| LoadEntry { day: *d, units: *u })
            .collect();
        let idle = self
            .cfg
            .capacity
            .days()
            .filter_map(|d| {
                let cap = self.cfg.capacity.capacity_on(d);
                let free = cap.saturating_sub(self.booked.get(&d).copied().unwrap_or(0));
                (cap > 0 && free > 0).then_some(LoadEntry { day: d, units: free })
            })
            .collect();
        (load, idle)
    }

    /// Handles one planner request, returning the replies to post.
    pub fn handle(&mut self, msg: &Message) -> Result<Vec<Message>, PaError> {
        self.phase = PaPhase::Planning;
        let replies = match msg {
            Message::DPaN(req) => vec![self.plan_request(req, false)?],
            Message::DPaM(req) => vec![self.plan_request(req, true)?],
            Message::DPaA(req) => vec![self.evaluate(req)?],
            other => {
                self.phase = PaPhase::Idle;
                return Err(PaError::UnknownOrder(
                    other.order().cloned().unwrap_or_else(|| OrderId::from("?")),
                ));
            }
        };
        self.phase = PaPhase::Idle;
        Ok(replies)
    }

    fn plan_request(
        &mut self,
        req: &PlanRequestPayload,
        replan: bool,
    ) -> Result<Message, PaError> {
        if replan {
            self.release(&req.order);
        }
        let outcome = self.plan_new(&req.lines, req.conditions)?;
        let reply = match &outcome {
            PlanOutcome::Feasible(plan) => PlanReplyPayload {
                order: req.order.clone(),
                feasible: true,
                needs: plan.needs.clone(),
                scenarios: Vec::new(),
            },
            PlanOutcome::Counter { scenarios, .. } => PlanReplyPayload {
                order: req.order.clone(),
                feasible: false,
                needs: Vec::new(),
                scenarios: scenarios.iter().map(|(s, _)| s.clone()).collect(),
            },
            PlanOutcome::Hopeless => PlanReplyPayload {
                order: req.order.clone(),
                feasible: false,
                needs: Vec::new(),
                scenarios: Vec::new(),
            },
        };
        let proposal = match outcome {
            PlanOutcome::Feasible(plan) => Proposal {
                demand: req.lines.clone(),
                conditions: req.conditions,
                by_due: plan.lines.iter().map(|l| l.qty).sum(),
                plan: Some(plan),
                scenarios: Vec::new(),
            },
            PlanOutcome::Counter { scenarios, by_due } => Proposal {
                demand: req.lines.clone(),
                conditions: req.conditions,
                plan: None,
                scenarios,
                by_due,
            },
            PlanOutcome::Hopeless => Proposal {
                demand: req.lines.clone(),
                conditions: req.conditions,
                plan: None,
                scenarios: Vec::new(),
                by_due: 0,
            },
        };
        self.proposals.insert(req.order.clone(), proposal);
        Ok(Message::RPaUs(reply))
    }

    /// Plans `demand` against residual capacity and free stock. Components
    /// are assumed to arrive exactly when ordered for, which later orders
    /// then have to secure.
    pub fn plan_new(
        &self,
        demand: &[DemandLine],
        conditions: PlanConditions,
    ) -> Result<PlanOutcome, PaError> {
        let product = demand[0].product.clone();
        let children = bom_children(&self.cfg, &product)?;

        // Assumed arrival per component: each demand line's share lands
        // `lead_offset` before that line is due, minus granted advance.
        let assumed: BTreeMap<ProductId, Vec<(Day, Units)>> = children
            .iter()
            .map(|edge| {
                let profile = demand
                    .iter()
                    .map(|l| {
                        let back = edge.lead_offset + conditions.component_advance_days;
                        (l.due.checked_back(back).unwrap_or(Day(0)), l.qty * edge.qty_per)
                    })
                    .collect();
                (edge.child.clone(), profile)
            })
            .collect();

        self.plan_with_profiles(demand, conditions, &assumed)
    }

    fn plan_with_profiles(
        &self,
        demand: &[DemandLine],
        conditions: PlanConditions,
        profiles: &BTreeMap<ProductId, Vec<(Day, Units)>>,
    ) -> Result<PlanOutcome, PaError> {
        let product = demand[0].product.clone();
        let children = bom_children(&self.cfg, &product)?;
        let capacity = self.residual_capacity();

        // Component stock worth netting, in component units.
        let comp_stock: BTreeMap<ProductId, Units> = children
            .iter()
            .map(|e| (e.child.clone(), self.available_stock(&e.child)))
            .collect();

        let avail = |day: Day| -> Units {
            children
                .iter()
                .map(|edge| {
                    let stock = comp_stock.get(&edge.child).copied().unwrap_or(0);
                    let arrived: Units = profiles
                        .get(&edge.child)
                        .map(|p| p.iter().filter(|(d, _)| *d < day).map(|(_, q)| q).sum())
                        .unwrap_or(0);
                    stock.saturating_add(arrived) / edge.qty_per
                })
                .min()
                .unwrap_or(UNBOUNDED)
        };

        let result = earliest_loading(
            &capacity,
            avail,
            0,
            demand,
            conditions.overtime_cap,
            conditions.subcontract_cap,
        );

        if result.feasible {
            let plan = self.finish_plan(demand, &result, conditions)?;
            return Ok(PlanOutcome::Feasible(plan));
        }

        // Counter-proposals: what fits by the requested date, the rest at
        // the earliest completion; or everything at the earliest completion.
        let total: Units = demand.iter().map(|l| l.qty).sum();
        let last_due = demand.last().expect("demand is never empty").due;
        let Some(completion) = result.completion else {
            return Ok(PlanOutcome::Hopeless);
        };
        let by_due = result.deliverable_by(last_due).min(total);

        let mut proposals: Vec<Vec<DemandLine>> = Vec::new();
        let split: Vec<DemandLine> = [(last_due, by_due), (completion, total - by_due)]
            .into_iter()
            .filter(|(_, q)| *q > 0)
            .map(|(due, qty)| DemandLine { product: product.clone(), due, qty })
            .collect();
        proposals.push(split);
        let delayed = vec![DemandLine { product: product.clone(), due: completion, qty: total }];
        if proposals[0] != delayed {
            proposals.push(delayed);
        }

        let mut scenarios = Vec::new();
        for (i, lines) in proposals.into_iter().enumerate() {
            let scenario = Scenario { label: format!("s{}", i + 1), lines: lines.clone() };
            let sched = earliest_loading(
                &capacity,
                avail,
                0,
                &lines,
                conditions.overtime_cap,
                conditions.subcontract_cap,
            );
            debug_assert!(sched.feasible, "counter-proposals are feasible by construction");
            let plan = self.finish_plan(&lines, &sched, conditions)?;
            scenarios.push((scenario, plan));
        }
        Ok(PlanOutcome::Counter { scenarios, by_due })
    }

    /// Derives stock allocation and net component needs from a schedule.
    fn finish_plan(
        &self,
        demand: &[DemandLine],
        result: &SchedResult,
        conditions: PlanConditions,
    ) -> Result<Plan, PaError> {
        let product = demand[0].product.clone();
        let children = bom_children(&self.cfg, &product)?;

        // Subcontracted units consume no local components; attribute them
        // to the lines at their delivery dates, latest lines first.
        let mut produced_per_line: Vec<Units> = demand.iter().map(|l| l.qty).collect();
        for &(day, units) in &result.subcontracted {
            let mut left = units;
            for (line, slot) in demand.iter().zip(produced_per_line.iter_mut()).rev() {
                if line.due >= day && left > 0 {
                    let take = (*slot).min(left);
                    *slot -= take;
                    left -= take;
                }
            }
        }

        let mut comp_stock_used: BTreeMap<ProductId, Units> = BTreeMap::new();
        let mut needs: Vec<DemandLine> = Vec::new();
        for edge in &children {
            let mut stock_left = self.available_stock(&edge.child);
            for (line, produced) in demand.iter().zip(produced_per_line.iter()) {
                let gross = produced * edge.qty_per;
                let from_stock = gross.min(stock_left);
                stock_left -= from_stock;
                if from_stock > 0 {
                    *comp_stock_used.entry(edge.child.clone()).or_insert(0) += from_stock;
                }
                let net = gross - from_stock;
                if net > 0 {
                    let back = edge.lead_offset + conditions.component_advance_days;
                    needs.push(DemandLine {
                        product: edge.child.clone(),
                        due: line.due.checked_back(back).unwrap_or(Day(0)),
                        qty: net,
                    });
                }
            }
        }

        Ok(Plan {
            product,
            lines: demand.to_vec(),
            schedule: result.schedule.clone(),
            subcontracted: result.subcontracted.clone(),
            fg_stock_used: 0,
            comp_stock_used,
            needs,
        })
    }

    /// Judges a counter-proposal for one supply line against the parent
    /// proposal: take the first offered scenario under which the parent
    /// demand still schedules inside its terms.
    fn evaluate(&mut self, req: &EvaluatePayload) -> Result<Message, PaError> {
        let (parent, component) = self
            .supply_links
            .get(&req.order)
            .cloned()
            .ok_or_else(|| PaError::UnknownLink(req.order.clone()))?;
        let proposal =
            self.proposals.get(&parent).ok_or_else(|| PaError::UnknownOrder(parent.clone()))?;
        let base =
            proposal.plan.as_ref().ok_or_else(|| PaError::UnknownOrder(parent.clone()))?;

        // Arrival profiles: ordered needs for every component, the counter
        // scenario's lines for the countered one.
        let assumed: BTreeMap<ProductId, Vec<(Day, Units)>> = {
            let mut map: BTreeMap<ProductId, Vec<(Day, Units)>> = BTreeMap::new();
            for need in &base.needs {
                map.entry(need.product.clone()).or_default().push((need.due, need.qty));
            }
            map
        };

        let demand = proposal.demand.clone();
        let conditions = proposal.conditions;
        for scenario in &req.scenarios {
            let mut profiles = assumed.clone();
            profiles.insert(
                component.clone(),
                scenario.lines.iter().map(|l| (l.due, l.qty)).collect(),
            );
            if let PlanOutcome::Feasible(mut plan) =
                self.plan_with_profiles(&demand, conditions, &profiles)?
            {
                // Orders are already placed; only the schedule moves.
                plan.needs = base.needs.clone();
                plan.comp_stock_used = base.comp_stock_used.clone();
                let entry = self.proposals.get_mut(&parent).expect("proposal just read");
                entry.plan = Some(plan);
                return Ok(Message::RPaDs(EvaluateReplyPayload {
                    order: req.order.clone(),
                    feasible: true,
                    scenario: Some(scenario.label.clone()),
                }));
            }
        }
        Ok(Message::RPaDs(EvaluateReplyPayload {
            order: req.order.clone(),
            feasible: false,
            scenario: None,
        }))
    }

    /// Applies a directive from the negotiation agent.
    pub fn apply(&mut self, directive: &PaDirective) -> Result<(), PaError> {
        match directive {
            PaDirective::Commit { order, stock_served } => {
                let proposal = self
                    .proposals
                    .remove(order)
                    .ok_or_else(|| PaError::UnknownOrder(order.clone()))?;
                let mut plan =
                    proposal.plan.ok_or_else(|| PaError::UnknownOrder(order.clone()))?;
                plan.fg_stock_used = *stock_served;
                self.book(order.clone(), plan);
                Ok(())
            }
            PaDirective::CommitScenario { order, label } => {
                let proposal = self
                    .proposals
                    .remove(order)
                    .ok_or_else(|| PaError::UnknownOrder(order.clone()))?;
                let plan = proposal
                    .scenarios
                    .iter()
                    .find(|(s, _)| &s.label == label)
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| PaError::UnknownScenario {
                        order: order.clone(),
                        label: label.clone(),
                    })?;
                self.book(order.clone(), plan);
                Ok(())
            }
            PaDirective::CommitStock { order, lines } => {
                let product = lines[0].product.clone();
                let total: Units = lines.iter().map(|l| l.qty).sum();
                let plan = Plan {
                    product,
                    lines: lines.clone(),
                    schedule: Vec::new(),
                    subcontracted: Vec::new(),
                    fg_stock_used: total,
                    comp_stock_used: BTreeMap::new(),
                    needs: Vec::new(),
                };
                self.book(order.clone(), plan);
                Ok(())
            }
            PaDirective::LinkSupply { sub_order, parent, product } => {
                self.supply_links
                    .insert(sub_order.clone(), (parent.clone(), product.clone()));
                Ok(())
            }
        }
    }

    fn book(&mut self, order: OrderId, plan: Plan) {
        for line in &plan.schedule {
            *self.booked.entry(line.day).or_insert(0) += line.total();
        }
        if plan.fg_stock_used > 0 {
            *self.reserved.entry(plan.product.clone()).or_insert(0) += plan.fg_stock_used;
        }
        for (comp, used) in &plan.comp_stock_used {
            *self.reserved.entry(comp.clone()).or_insert(0) += used;
        }
        self.committed.insert(order, plan);
    }

    /// Forgets any proposal and commitment for `order`, freeing what they
    /// booked and reserved. Used before re-planning under new terms.
    fn release(&mut self, order: &OrderId) {
        self.proposals.remove(order);
        if let Some(plan) = self.committed.remove(order) {
            for line in &plan.schedule {
                if let Some(b) = self.booked.get_mut(&line.day) {
                    *b = b.saturating_sub(line.total());
                }
            }
            if plan.fg_stock_used > 0 {
                if let Some(r) = self.reserved.get_mut(&plan.product) {
                    *r = r.saturating_sub(plan.fg_stock_used);
                }
            }
            for (comp, used) in &plan.comp_stock_used {
                if let Some(r) = self.reserved.get_mut(comp) {
                    *r = r.saturating_sub(*used);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BomEdge, CapacityCalendar, CostModel, TierId, VenId};

    fn money(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn tap_config(caps: &[(u32, u32)]) -> VenConfig {
        let start = Day(caps.iter().map(|(d, _)| *d).min().unwrap());
        let end = Day(caps.iter().map(|(d, _)| *d).max().unwrap());
        let overrides: Vec<(Day, Day, Units)> =
            caps.iter().map(|(d, u)| (Day(*d), Day(*d), *u)).collect();
        VenConfig {
            id: VenId::from("tap-plant"),
            tier: TierId(1),
            products: vec![ProductId::from("PF")],
            bom: vec![
                BomEdge {
                    parent: ProductId::from("PF"),
                    child: ProductId::from("SCBBA"),
                    qty_per: 1,
                    lead_offset: 4,
                },
                BomEdge {
                    parent: ProductId::from("PF"),
                    child: ProductId::from("SCBA"),
                    qty_per: 2,
                    lead_offset: 4,
                },
                BomEdge {
                    parent: ProductId::from("PF"),
                    child: ProductId::from("SCA"),
                    qty_per: 1,
                    lead_offset: 4,
                },
            ],
            stocks: [
                (ProductId::from("PF"), 20),
                (ProductId::from("SCBBA"), 80),
                (ProductId::from("SCBA"), 160),
                (ProductId::from("SCA"), 20),
            ]
            .into_iter()
            .collect(),
            capacity: CapacityCalendar::new(start, end, 0, &overrides).unwrap(),
            costs: CostModel {
                unit_production: money("2.00"),
                overtime: money("3.00"),
                subcontract: money("4.00"),
                penalty_per_unit_day: money("0.50"),
                selling_price: money("5.00"),
            },
            overtime_limit: 0,
            subcontract_limit: 0,
            customers: vec![VenId::from("client-1")],
            suppliers: vec![
                VenId::from("blister-1"),
                VenId::from("oring-1"),
                VenId::from("body-1"),
            ],
        }
    }

    fn blister_config(caps: &[(u32, u32)], sca_stock: Units) -> VenConfig {
        let start = Day(caps.iter().map(|(d, _)| *d).min().unwrap());
        let end = Day(caps.iter().map(|(d, _)| *d).max().unwrap());
        let overrides: Vec<(Day, Day, Units)> =
            caps.iter().map(|(d, u)| (Day(*d), Day(*d), *u)).collect();
        VenConfig {
            id: VenId::from("blister-1"),
            tier: TierId(2),
            products: vec![ProductId::from("SCA")],
            bom: vec![BomEdge {
                parent: ProductId::from("SCA"),
                child: ProductId::from("SCAA"),
                qty_per: 1,
                lead_offset: 1,
            }],
            stocks: [(ProductId::from("SCA"), sca_stock), (ProductId::from("SCAA"), 100)]
                .into_iter()
                .collect(),
            capacity: CapacityCalendar::new(start, end, 0, &overrides).unwrap(),
            costs: CostModel {
                unit_production: money("1.00"),
                overtime: money("1.50"),
                subcontract: money("2.00"),
                penalty_per_unit_day: money("0.20"),
                selling_price: money("2.00"),
            },
            overtime_limit: 0,
            subcontract_limit: 100,
            customers: vec![VenId::from("tap-plant")],
            suppliers: vec![VenId::from("cardboard-1")],
        }
    }

    fn line(product: &str, due: u32, qty: Units) -> DemandLine {
        DemandLine::new(product, Day(due), qty)
    }

    #[test]
    fn deliveries_become_usable_the_next_day() {
        let avail = avail_from_profile(5, &[(Day(148), 10)]);
        assert_eq!(avail(Day(148)), 5);
        assert_eq!(avail(Day(149)), 15);
    }

    #[test]
    fn earliest_loading_fills_front_to_back() {
        let cap = [(Day(149), 30), (Day(150), 30), (Day(151), 30), (Day(152), 30)];
        let r = earliest_loading(&cap, |_| UNBOUNDED, 0, &[line("PF", 152, 80)], 0, 0);
        assert!(r.feasible);
        let days: Vec<(u32, Units)> = r.schedule.iter().map(|l| (l.day.0, l.normal)).collect();
        assert_eq!(days, vec![(149, 30), (150, 30), (151, 20)]);
    }

    #[test]
    fn production_on_the_due_day_still_counts() {
        let cap = [(Day(148), 40)];
        let r = earliest_loading(&cap, |_| UNBOUNDED, 0, &[line("SCA", 148, 40)], 0, 0);
        assert!(r.feasible);
        assert_eq!(r.schedule, vec![PlanLine { day: Day(148), normal: 40, overtime: 0 }]);
    }

    #[test]
    fn component_availability_throttles_the_schedule() {
        // 40 units arrive on day 148, 20 on day 150; capacity would allow
        // more but production may not outrun what is on hand.
        let cap = [(Day(149), 30), (Day(150), 30), (Day(151), 30)];
        let avail = avail_from_profile(20, &[(Day(148), 40), (Day(150), 20)]);
        let r = earliest_loading(&cap, avail, 0, &[line("PF", 152, 80)], 0, 0);
        assert!(r.feasible);
        let days: Vec<(u32, Units)> = r.schedule.iter().map(|l| (l.day.0, l.normal)).collect();
        assert_eq!(days, vec![(149, 30), (150, 30), (151, 20)]);

        // Tighter capacity turns the same arrivals infeasible.
        let cap = [(Day(149), 40), (Day(150), 40)];
        let avail = avail_from_profile(20, &[(Day(148), 40), (Day(150), 20)]);
        let r = earliest_loading(&cap, avail, 0, &[line("PF", 152, 80)], 0, 0);
        assert!(!r.feasible);
        assert_eq!(r.deliverable_by(Day(152)), 60);
    }

    #[test]
    fn infeasible_demand_reports_by_due_and_completion() {
        let cap = [(Day(148), 40), (Day(150), 20)];
        let r = earliest_loading(&cap, |_| UNBOUNDED, 0, &[line("SCA", 148, 60)], 0, 0);
        assert!(!r.feasible);
        assert_eq!(r.deliverable_by(Day(148)), 40);
        assert_eq!(r.completion, Some(Day(150)));
    }

    #[test]
    fn overtime_pool_tops_up_a_short_deadline() {
        let cap = [(Day(10), 30), (Day(11), 30)];
        let r = earliest_loading(&cap, |_| UNBOUNDED, 0, &[line("X", 11, 70)], 10, 0);
        assert!(r.feasible);
        let normal: Units = r.schedule.iter().map(|l| l.normal).sum();
        let overtime: Units = r.schedule.iter().map(|l| l.overtime).sum();
        assert_eq!((normal, overtime), (60, 10));
        assert!(r.subcontracted.is_empty());
    }

    #[test]
    fn subcontracting_covers_what_overtime_cannot() {
        let cap = [(Day(10), 30)];
        let r = earliest_loading(&cap, |_| UNBOUNDED, 0, &[line("X", 10, 50)], 5, 100);
        assert!(r.feasible);
        assert_eq!(r.subcontracted, vec![(Day(10), 15)]);
        let produced: Units = r.schedule.iter().map(|l| l.total()).sum();
        assert_eq!(produced, 35);
    }

    #[test]
    fn plan_for_the_tap_order_nets_stock_and_dates_needs() {
        let pa = PaAgent::new(tap_config(&[(149, 30), (150, 30), (151, 30), (152, 30)]));
        // Net demand after the negotiation agent consumed 20 finished units.
        let outcome = pa.plan_new(&[line("PF", 152, 80)], PlanConditions::default()).unwrap();
        let PlanOutcome::Feasible(plan) = outcome else { panic!("expected a feasible plan") };
        let days: Vec<(u32, Units)> =
            plan.schedule.iter().map(|l| (l.day.0, l.normal)).collect();
        assert_eq!(days, vec![(149, 30), (150, 30), (151, 20)]);
        // Gross components 80, 160x2, 80; stock nets two of them to zero.
        assert_eq!(plan.needs, vec![line("SCA", 148, 60)]);
        assert_eq!(
            plan.comp_stock_used,
            [
                (ProductId::from("SCBBA"), 80),
                (ProductId::from("SCBA"), 160),
                (ProductId::from("SCA"), 20),
            ]
            .into_iter()
            .collect()
        );
        assert_eq!(plan.cost(&pa.config().costs), money("160.00"));
    }

    #[test]
    fn infeasible_order_yields_split_then_delayed_scenarios() {
        let pa = PaAgent::new(blister_config(&[(148, 40), (150, 20)], 0));
        let outcome = pa.plan_new(&[line("SCA", 148, 60)], PlanConditions::default()).unwrap();
        let PlanOutcome::Counter { scenarios, by_due } = outcome else {
            panic!("expected counter-proposals")
        };
        assert_eq!(by_due, 40);
        let labels: Vec<&str> = scenarios.iter().map(|(s, _)| s.label.as_str()).collect();
        assert_eq!(labels, vec!["s1", "s2"]);
        assert_eq!(scenarios[0].0.lines, vec![line("SCA", 148, 40), line("SCA", 150, 20)]);
        assert_eq!(scenarios[1].0.lines, vec![line("SCA", 150, 60)]);
        // Raw material stock covers both plans entirely.
        assert!(scenarios.iter().all(|(_, p)| p.needs.is_empty()));
    }

    #[test]
    fn evaluation_takes_the_first_scenario_that_still_schedules() {
        let mut pa = PaAgent::new(tap_config(&[(149, 30), (150, 30), (151, 30), (152, 30)]));
        let order = OrderId::from("o1");
        let sub = OrderId::from("o1:tap-plant:SCA");
        pa.handle(&Message::DPaN(PlanRequestPayload {
            order: order.clone(),
            lines: vec![line("PF", 152, 80)],
            conditions: PlanConditions::default(),
        }))
        .unwrap();
        pa.apply(&PaDirective::LinkSupply {
            sub_order: sub.clone(),
            parent: order.clone(),
            product: ProductId::from("SCA"),
        })
        .unwrap();

        let scenarios = vec![
            Scenario {
                label: "s1".into(),
                lines: vec![line("SCA", 148, 40), line("SCA", 150, 20)],
            },
            Scenario { label: "s2".into(), lines: vec![line("SCA", 150, 60)] },
        ];
        let replies = pa
            .handle(&Message::DPaA(EvaluatePayload { order: sub.clone(), scenarios }))
            .unwrap();
        let Message::RPaDs(reply) = &replies[0] else { panic!("expected an evaluation reply") };
        assert!(reply.feasible);
        assert_eq!(reply.scenario.as_deref(), Some("s1"));
        // The proposal's schedule moved to match the slower arrivals.
        let plan = pa.proposal(&order).unwrap().plan.as_ref().unwrap();
        let days: Vec<(u32, Units)> =
            plan.schedule.iter().map(|l| (l.day.0, l.normal)).collect();
        assert_eq!(days, vec![(149, 30), (150, 30), (151, 20)]);
    }

    #[test]
    fn evaluation_rejects_when_capacity_cannot_absorb_the_shift() {
        let mut pa = PaAgent::new(tap_config(&[(149, 40), (150, 40)]));
        let order = OrderId::from("o1");
        let sub = OrderId::from("o1:tap-plant:SCA");
        pa.handle(&Message::DPaN(PlanRequestPayload {
            order: order.clone(),
            lines: vec![line("PF", 152, 80)],
            conditions: PlanConditions::default(),
        }))
        .unwrap();
        pa.apply(&PaDirective::LinkSupply {
            sub_order: sub.clone(),
            parent: order.clone(),
            product: ProductId::from("SCA"),
        })
        .unwrap();

        let scenarios = vec![
            Scenario {
                label: "s1".into(),
                lines: vec![line("SCA", 148, 40), line("SCA", 150, 20)],
            },
            Scenario { label: "s2".into(), lines: vec![line("SCA", 150, 60)] },
        ];
        let replies =
            pa.handle(&Message::DPaA(EvaluatePayload { order: sub, scenarios })).unwrap();
        let Message::RPaDs(reply) = &replies[0] else { panic!("expected an evaluation reply") };
        assert!(!reply.feasible);
        assert_eq!(reply.scenario, None);
    }

    #[test]
    fn commitments_book_capacity_and_reserve_stock() {
        let mut pa = PaAgent::new(tap_config(&[(149, 30), (150, 30), (151, 30), (152, 30)]));
        let order = OrderId::from("o1");
        pa.handle(&Message::DPaN(PlanRequestPayload {
            order: order.clone(),
            lines: vec![line("PF", 152, 80)],
            conditions: PlanConditions::default(),
        }))
        .unwrap();
        pa.apply(&PaDirective::Commit { order: order.clone(), stock_served: 20 }).unwrap();

        assert_eq!(pa.available_stock(&ProductId::from("PF")), 0);
        assert_eq!(pa.available_stock(&ProductId::from("SCA")), 0);
        let (load, idle) = pa.load_snapshot();
        let load: Vec<(u32, Units)> = load.iter().map(|e| (e.day.0, e.units)).collect();
        assert_eq!(load, vec![(149, 30), (150, 30), (151, 20)]);
        let idle: Vec<(u32, Units)> = idle.iter().map(|e| (e.day.0, e.units)).collect();
        assert_eq!(idle, vec![(151, 10), (152, 30)]);
        assert!(pa.committed_plan(&order).is_some());
    }

    #[test]
    fn stock_only_service_books_no_capacity() {
        let mut pa = PaAgent::new(blister_config(&[(148, 40), (150, 20)], 60));
        let order = OrderId::from("o1:tap-plant:SCA");
        pa.apply(&PaDirective::CommitStock {
            order: order.clone(),
            lines: vec![line("SCA", 148, 60)],
        })
        .unwrap();
        assert_eq!(pa.available_stock(&ProductId::from("SCA")), 0);
        let (load, idle) = pa.load_snapshot();
        assert!(load.is_empty());
        assert_eq!(idle.len(), 2);
        let plan = pa.committed_plan(&order).unwrap();
        assert_eq!(plan.cost(&pa.config().costs), Money::ZERO);
    }

    #[test]
    fn replanning_releases_the_old_book_first() {
        let mut pa = PaAgent::new(blister_config(&[(148, 40), (150, 20)], 0));
        let order = OrderId::from("o1:tap-plant:SCA");
        pa.handle(&Message::DPaN(PlanRequestPayload {
            order: order.clone(),
            lines: vec![line("SCA", 148, 60)],
            conditions: PlanConditions::default(),
        }))
        .unwrap();

        // Trimmed down to the feasible share by the tier negotiator.
        let replies = pa
            .handle(&Message::DPaM(PlanRequestPayload {
                order: order.clone(),
                lines: vec![line("SCA", 148, 40)],
                conditions: PlanConditions::default(),
            }))
            .unwrap();
        let Message::RPaUs(reply) = &replies[0] else { panic!("expected a plan reply") };
        assert!(reply.feasible);
        assert!(reply.needs.is_empty());
        pa.apply(&PaDirective::Commit { order: order.clone(), stock_served: 0 }).unwrap();
        let plan = pa.committed_plan(&order).unwrap();
        assert_eq!(plan.schedule, vec![PlanLine { day: Day(148), normal: 40, overtime: 0 }]);
    }
}
