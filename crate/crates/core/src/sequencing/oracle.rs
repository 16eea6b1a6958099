//! Exhaustive reference for the exact solver.

use super::SequencingError;
use crate::catalog::{Bin, Layout, SequencingInstance};
use crate::geometry::{dual_command_time, GridPosition, RackConfig};
use crate::stochastics::{expected_max, SortingModel};

/// Default cap on `(routed lines)! * prod |M_k|` enumerated plans.
pub const DEFAULT_ORACLE_CAP: u64 = 5_000_000;

/// Minimum expected order time over every drug permutation and every bin
/// choice, priced cycle by cycle straight from the geometry.
pub fn brute_force_oracle(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    cap: u64,
) -> Result<f64, SequencingError> {
    let w = inst.layout.io_count();
    if rack.io_points.len() != w {
        return Err(SequencingError::LayoutMismatch {
            layout: inst.layout,
            io_points: rack.io_points.len(),
        });
    }
    let groups: Vec<&[Bin]> = inst
        .lines
        .iter()
        .filter(|l| l.is_routed())
        .map(|l| l.candidates())
        .collect();
    let mut count: u64 = 1;
    for (i, g) in groups.iter().enumerate() {
        count = count
            .saturating_mul(i as u64 + 1)
            .saturating_mul(g.len() as u64);
    }
    if count > cap {
        return Err(SequencingError::TooLarge(format!(
            "{count} plans exceed the oracle cap {cap}"
        )));
    }

    let ios: Vec<GridPosition> = inst
        .trailing
        .slots
        .iter()
        .map(|s| rack.io_point(s.io))
        .collect();
    let start: Vec<GridPosition> = inst
        .trailing_bins
        .iter()
        .zip(&ios)
        .map(|(b, io)| b.as_ref().map_or(*io, |b| b.position))
        .collect();

    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..groups.len()).collect();
    permutations(&mut perm, 0, &mut |perm| {
        let mut choice = vec![0usize; perm.len()];
        loop {
            let mut waiting = start.clone();
            let mut total = 0.0;
            for (c, (&g, &pick)) in perm.iter().zip(&choice).enumerate() {
                let slot = c % w;
                let target = groups[g][pick].position;
                let t = dual_command_time(&ios[slot], &waiting[slot], &target, rack)
                    .expect("positions validated");
                total += match inst.layout {
                    Layout::A => expected_max(sorting, t).expect("travel is nonnegative"),
                    Layout::B => t + sorting.mu,
                };
                waiting[slot] = target;
            }
            best = best.min(total);
            // odometer over bin choices
            let mut i = 0;
            while i < perm.len() {
                choice[i] += 1;
                if choice[i] < groups[perm[i]].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == perm.len() {
                break;
            }
        }
    });
    Ok(if groups.is_empty() { 0.0 } else { best })
}

fn permutations(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}
