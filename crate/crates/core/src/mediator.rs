//! Network level mediation.
//!
//! When the tiers cannot place a shortfall, the mediator may buy the
//! missing units through a relaxation: overtime or subcontracting at the
//! responsible node, whichever mix is cheapest within that node's limits.
//! The grant is only made when the affected order chain still carries
//! nonnegative benefit for the network as a whole with the extra spend
//! included. The spend itself, the deficit, is then shared: nodes absorb
//! it water style, topping up those with the smallest absorbed history
//! first until all sit level.

use std::collections::BTreeMap;

use crate::domain::{Units, VenConfig, VenId};
use crate::money::Money;
use crate::protocol::PlanConditions;

/// Extra production bought at one node, priced at its configured rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relaxation {
    pub ven: VenId,
    pub overtime: Units,
    pub subcontract: Units,
    pub spend: Money,
}

impl Relaxation {
    pub fn conditions(&self) -> PlanConditions {
        PlanConditions {
            overtime_cap: self.overtime,
            subcontract_cap: self.subcontract,
            component_advance_days: 0,
        }
    }
}

/// The cheapest mix of overtime and subcontracting covering `units`,
/// within the node's declared limits. `None` when the limits cannot
/// cover it at all.
pub fn cheapest_relaxation(cfg: &VenConfig, units: Units) -> Option<Relaxation> {
    if units > cfg.overtime_limit + cfg.subcontract_limit {
        return None;
    }
    let mut pools = [
        (cfg.costs.overtime, cfg.overtime_limit, 0u32),
        (cfg.costs.subcontract, cfg.subcontract_limit, 0u32),
    ];
    if pools[1].0 < pools[0].0 {
        pools.swap(0, 1);
    }
    let mut left = units;
    for (_, limit, used) in pools.iter_mut() {
        *used = left.min(*limit);
        left -= *used;
    }
    let ot = if pools[0].0 == cfg.costs.overtime { pools[0].2 } else { pools[1].2 };
    let sub = units - ot;
    Some(Relaxation {
        ven: cfg.id.clone(),
        overtime: ot,
        subcontract: sub,
        spend: cfg.costs.overtime.times(ot) + cfg.costs.subcontract.times(sub),
    })
}

/// One node's exposure in a blocked order chain: what it would earn and
/// what its committed or held plan would cost, relaxation excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stake {
    pub ven: VenId,
    pub revenue: Money,
    pub cost: Money,
}

pub fn chain_benefit(stakes: &[Stake]) -> Money {
    stakes.iter().map(|s| s.revenue - s.cost).sum()
}

/// A node carrying part of a deficit: what it already absorbed, and the
/// most it can take on now.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participant {
    pub ven: VenId,
    pub history: Money,
    pub cap: Option<Money>,
}

/// Shares `deficit` so that histories end as level as whole cents allow:
/// everyone is raised toward a common water line, capped nodes stop at
/// their cap, and leftover cents go one each to the lowest. Allocates
/// less than `deficit` only when the caps cannot hold it.
pub fn water_fill(parts: &[Participant], deficit: Money) -> BTreeMap<VenId, Money> {
    let d = deficit.cents();
    let mut shares: BTreeMap<VenId, Money> =
        parts.iter().map(|p| (p.ven.clone(), Money::ZERO)).collect();
    if parts.is_empty() || d <= 0 {
        return shares;
    }

    let room_at = |p: &Participant, level: i64| -> i64 {
        let room = (level - p.history.cents()).max(0);
        match p.cap {
            Some(c) => room.min(c.cents()),
            None => room,
        }
    };
    let total_at = |level: i64| -> i64 { parts.iter().map(|p| room_at(p, level)).sum() };

    let mut lo = parts.iter().map(|p| p.history.cents()).min().unwrap();
    let mut hi = parts.iter().map(|p| p.history.cents()).max().unwrap() + d;
    if total_at(hi) < d {
        // Caps are the binder: everyone takes all they can hold.
        for p in parts {
            shares.insert(p.ven.clone(), Money::from_cents(room_at(p, hi)));
        }
        return shares;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if total_at(mid) >= d {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }

    // Base shares one cent below the line, then the remainder one cent
    // each to the lowest standing nodes.
    let base = hi - 1;
    let mut given = 0i64;
    for p in parts {
        let share = room_at(p, base);
        shares.insert(p.ven.clone(), Money::from_cents(share));
        given += share;
    }
    let mut order: Vec<&Participant> = parts.iter().collect();
    order.sort_by_key(|p| {
        (p.history.cents() + shares[&p.ven].cents(), p.ven.clone())
    });
    let mut left = d - given;
    for p in order {
        if left == 0 {
            break;
        }
        let share = shares[&p.ven];
        if let Some(c) = p.cap {
            if share.cents() >= c.cents() {
                continue;
            }
        }
        shares.insert(p.ven.clone(), share + Money::from_cents(1));
        left -= 1;
    }
    shares
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MediationOutcome {
    /// The relaxation pays for itself network wide: grant it and share
    /// the spend.
    Granted { relaxation: Relaxation, absorption: BTreeMap<VenId, Money> },
    /// No affordable relaxation keeps the chain's benefit nonnegative.
    Unsolvable,
}

/// The whole mediation decision for one blocked chain. `stakes` carries
/// each involved node's projected revenue and cost without the
/// relaxation; `absorbers` are the nodes available to soak up the spend.
pub fn mediate(
    responsible: &VenConfig,
    shortfall: Units,
    stakes: &[Stake],
    absorbers: &[Participant],
) -> MediationOutcome {
    let Some(relaxation) = cheapest_relaxation(responsible, shortfall) else {
        return MediationOutcome::Unsolvable;
    };
    if (chain_benefit(stakes) - relaxation.spend).is_negative() {
        return MediationOutcome::Unsolvable;
    }
    let absorption = water_fill(absorbers, relaxation.spend);
    MediationOutcome::Granted { relaxation, absorption }
}
