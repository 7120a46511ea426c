//! Reference scheduler that enumerates every reachable cumulative
//! production level day by day. No greedy argument, no shortcuts: small
//! instances only, but an answer that is right by construction.

use std::collections::BTreeSet;

use vennet_core::domain::{Day, DemandLine, Units};

pub struct Verdict {
    pub feasible: bool,
    pub completion: Option<Day>,
}

/// Solves the same question as the production scheduler with both extra
/// pools at zero: can the demand be met from days of bounded capacity when
/// cumulative output through each day may not pass what components allow.
pub fn solve(
    capacity: &[(Day, Units)],
    avail_cum: impl Fn(Day) -> Units,
    stock: Units,
    demand: &[DemandLine],
) -> Verdict {
    let total: Units = demand.iter().map(|l| l.qty).sum();

    let mut marks: Vec<(Day, Units)> = Vec::new();
    let mut cum = 0;
    for l in demand {
        cum += l.qty;
        marks.push((l.due, cum));
    }

    // States that some schedule prefix can reach while having met every
    // deadline passed so far, and states reachable ignoring deadlines.
    let mut held: BTreeSet<Units> = BTreeSet::new();
    let mut free: BTreeSet<Units> = BTreeSet::new();
    held.insert(0);
    free.insert(0);

    let mut completion: Option<Day> = None;
    let mut prev_day: Option<Day> = None;

    // A deadline between two capacity days (or before the first) pins the
    // cumulative output as of the earlier day.
    let check = |held: &mut BTreeSet<Units>, from: Option<Day>, to: Option<Day>| {
        for &(due, q) in &marks {
            let after_from = from.map_or(true, |f| due >= f);
            let before_to = to.map_or(true, |t| due < t);
            if after_from && before_to {
                held.retain(|&c| stock.saturating_add(c) >= q);
            }
        }
    };

    for &(day, cap) in capacity {
        check(&mut held, prev_day, Some(day));

        let step = |set: &BTreeSet<Units>| -> BTreeSet<Units> {
            let mut next = BTreeSet::new();
            for &c in set {
                for p in 0..=cap {
                    let n = c + p;
                    if n <= avail_cum(day) {
                        next.insert(n);
                    }
                }
            }
            next
        };
        held = step(&held);
        free = step(&free);

        let best = free.iter().max().copied().unwrap_or(0);
        if completion.is_none() && stock.saturating_add(best) >= total {
            completion = Some(day);
        }
        prev_day = Some(day);
    }
    check(&mut held, prev_day, None);

    if completion.is_none() && stock >= total {
        completion = demand.first().map(|l| l.due);
    }

    Verdict { feasible: !held.is_empty(), completion }
}
