//! Reference for deficit sharing: enumerate every split of the deficit on
//! a half-unit grid and report the best peak standing any of them reaches.

use vennet_core::Money;

const STEP: i64 = 50;

/// Minimum over all grid allocations of the highest resulting standing,
/// where a participant's standing is its history plus its share.
pub fn enumerated_min_peak(histories: &[Money], deficit: Money) -> Money {
    assert!(!histories.is_empty(), "someone has to absorb");
    assert!(deficit.cents() % STEP == 0, "deficit must sit on the grid");
    let steps = deficit.cents() / STEP;
    let mut best = i64::MAX;
    walk(histories, 0, steps, 0, &mut best);
    Money::from_cents(best)
}

fn walk(histories: &[Money], idx: usize, left: i64, peak_so_far: i64, best: &mut i64) {
    if peak_so_far >= *best {
        return;
    }
    if idx == histories.len() - 1 {
        let standing = histories[idx].cents() + left * STEP;
        let peak = peak_so_far.max(standing);
        if peak < *best {
            *best = peak;
        }
        return;
    }
    for take in 0..=left {
        let standing = histories[idx].cents() + take * STEP;
        walk(histories, idx + 1, left - take, peak_so_far.max(standing), best);
    }
}
