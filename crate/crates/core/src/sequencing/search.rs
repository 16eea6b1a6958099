//! Subset dynamic programming over `(lines served, bins waiting at the I/O
//! points)`.
//!
//! After `c` cycles the future cost depends only on which routed lines are
//! done and which bin sits at each I/O point, so a layered forward DP over
//! these states is exact. Restricting the next line to the prescription
//! order turns the same search into the stage-wise bin-selection DP.

use super::engine::CostContext;
use super::SequencingError;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineOrder {
    /// Any unserved line may come next.
    Free,
    /// Lines are served in prescription order.
    Fixed,
}

type Key = (u32, [u32; 2]);

#[derive(Clone, Copy)]
struct Entry {
    cost: f64,
    parent: Option<Key>,
    pick: (usize, usize),
}

/// Returns the cheapest sequence of `(routed line, node)` picks.
pub(crate) fn best_sequence(
    ctx: &CostContext<'_>,
    order: LineOrder,
    max_states: usize,
) -> Result<Vec<(usize, usize)>, SequencingError> {
    let n = ctx.routed.len();
    if n > 31 {
        return Err(SequencingError::TooLarge(format!(
            "{n} routed lines exceed the 31-line subset limit"
        )));
    }
    let w = ctx.window();
    let mut start_hist = [0u32; 2];
    for (s, h) in start_hist.iter_mut().enumerate().take(w) {
        *h = s as u32;
    }

    let mut layers: Vec<BTreeMap<Key, Entry>> = Vec::with_capacity(n + 1);
    let mut first = BTreeMap::new();
    first.insert(
        (0u32, start_hist),
        Entry {
            cost: 0.0,
            parent: None,
            pick: (usize::MAX, usize::MAX),
        },
    );
    layers.push(first);
    let mut total = 1usize;

    for c in 0..n {
        let slot = c % w;
        let mut next: BTreeMap<Key, Entry> = BTreeMap::new();
        for (&(mask, hist), entry) in &layers[c] {
            let ret = hist[slot] as usize;
            let lines: Box<dyn Iterator<Item = usize>> = match order {
                LineOrder::Free => Box::new((0..n).filter(move |r| mask & (1 << r) == 0)),
                LineOrder::Fixed => Box::new(std::iter::once(c)),
            };
            for r in lines {
                for &get in &ctx.line_nodes[r] {
                    let cost = entry.cost + ctx.weight(slot, ret, get);
                    let mut h = hist;
                    h[slot] = get as u32;
                    let key = (mask | (1 << r), h);
                    let candidate = Entry {
                        cost,
                        parent: Some((mask, hist)),
                        pick: (r, get),
                    };
                    next.entry(key)
                        .and_modify(|e| {
                            if cost < e.cost {
                                *e = candidate;
                            }
                        })
                        .or_insert(candidate);
                }
            }
        }
        total += next.len();
        if total > max_states {
            return Err(SequencingError::TooLarge(format!(
                "search exceeded {max_states} states"
            )));
        }
        layers.push(next);
    }

    let (mut key, _) = layers[n]
        .iter()
        .fold(None::<(Key, f64)>, |best, (k, e)| match best {
            Some((_, c)) if c <= e.cost => best,
            _ => Some((*k, e.cost)),
        })
        .expect("every routed line has a candidate");
    let mut picks = Vec::with_capacity(n);
    for c in (1..=n).rev() {
        let entry = layers[c][&key];
        picks.push(entry.pick);
        key = entry.parent.expect("non-root entries have parents");
    }
    picks.reverse();
    Ok(picks)
}
