//! Retrieval plans for one prescription: the exact optimum over drug
//! sequence and bin choice, the three prescription-order baselines, a
//! brute-force oracle, a plan validator and an LP model exporter.
//!
//! Plans are priced by their executed cycles: each routed line costs one
//! dual-command cycle that returns the bin waiting at the cycle's I/O point
//! and retrieves the line's bin. Bins retrieved last stay at the I/O points
//! and are returned by the next order.

mod engine;
pub mod lp;
mod oracle;
mod search;
mod validate;

pub use engine::price_cycle;
pub use oracle::{brute_force_oracle, DEFAULT_ORACLE_CAP};
pub use validate::{validate_plan, ValidationReport, Violation};

use crate::catalog::{BinId, DrugId, Layout, OrderId, SequencingInstance, TrailingState};
use crate::geometry::{GeometryError, RackConfig};
use crate::stochastics::SortingModel;
use engine::CostContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use search::{best_sequence, LineOrder};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Upper bound on DP states explored by the exact solvers.
pub const DEFAULT_MAX_STATES: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum SequencingError {
    #[error("layout {layout} needs {} I/O points, rack has {io_points}", layout.io_count())]
    LayoutMismatch { layout: Layout, io_points: usize },
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One crane trip at an I/O point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Zero-based I/O point index.
    pub io_point: usize,
    /// Bin put back; `None` when nothing was waiting (single command).
    pub return_bin: Option<BinId>,
    /// Bin fetched; `None` for a pure return trip.
    pub retrieve_bin: Option<BinId>,
    /// Drug of the retrieved bin.
    pub drug: Option<DrugId>,
    pub travel_time: f64,
    pub expected_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPlan {
    pub layout: Layout,
    pub order: OrderId,
    pub cycles: Vec<Cycle>,
    /// Drugs served from a trailing bin without a retrieval.
    pub sorted_in_place: Vec<DrugId>,
    /// Sum of the cycles' expected times.
    pub objective: f64,
    /// Expected time the simulator charges to the order. Equal to
    /// `objective` because both count executed cycles only.
    pub executed_expected_time: f64,
    /// Bins left at the I/O points, oldest first.
    pub new_trailing: TrailingState,
}

impl RetrievalPlan {
    pub fn total_travel(&self) -> f64 {
        self.cycles.iter().map(|c| c.travel_time).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Optimal,
    Dp,
    Greedy,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Optimal,
        Strategy::Dp,
        Strategy::Greedy,
        Strategy::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::Dp => "dp",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" | "optimum" => Ok(Strategy::Optimal),
            "dp" | "dynamic" => Ok(Strategy::Dp),
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// Exact minimum over drug sequence and bin choice.
pub fn solve_optimal(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
) -> Result<RetrievalPlan, SequencingError> {
    let ctx = CostContext::new(inst, rack, sorting)?;
    let picks = best_sequence(&ctx, LineOrder::Free, DEFAULT_MAX_STATES)?;
    Ok(ctx.assemble(&picks))
}

/// Prescription drug sequence, bins chosen by exact stage-wise DP. The
/// stage state is the bin waiting at each I/O point, so the two-point
/// layout couples stage `k` with stage `k - 2`.
pub fn solve_dp(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
) -> Result<RetrievalPlan, SequencingError> {
    let ctx = CostContext::new(inst, rack, sorting)?;
    let picks = best_sequence(&ctx, LineOrder::Fixed, DEFAULT_MAX_STATES)?;
    Ok(ctx.assemble(&picks))
}

/// Prescription drug sequence; each stage takes the bin with the cheapest
/// cycle given the choices already made. Ties go to the shorter trip, then
/// the lowest bin id.
pub fn solve_greedy(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
) -> Result<RetrievalPlan, SequencingError> {
    let ctx = CostContext::new(inst, rack, sorting)?;
    let w = ctx.window();
    let mut hist: Vec<usize> = (0..w).collect();
    let mut picks = Vec::with_capacity(ctx.routed.len());
    for r in 0..ctx.routed.len() {
        let slot = r % w;
        // Equal expected times (e.g. both cycles shorter than a deterministic
        // sort) fall back to the shorter trip, then the lower bin id.
        let key = |get: usize| (ctx.weight(slot, hist[slot], get), ctx.travel(slot, hist[slot], get));
        let mut best = ctx.line_nodes[r][0];
        let mut best_key = key(best);
        for &get in &ctx.line_nodes[r][1..] {
            let k = key(get);
            if k < best_key {
                best = get;
                best_key = k;
            }
        }
        hist[slot] = best;
        picks.push((r, best));
    }
    Ok(ctx.assemble(&picks))
}

/// Prescription drug sequence, a uniformly random candidate bin per stage.
pub fn solve_random(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    seed: u64,
) -> Result<RetrievalPlan, SequencingError> {
    solve_random_with(inst, rack, sorting, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// As [`solve_random`] with a caller-owned random source.
pub fn solve_random_with<R: Rng + ?Sized>(
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    rng: &mut R,
) -> Result<RetrievalPlan, SequencingError> {
    let ctx = CostContext::new(inst, rack, sorting)?;
    let picks: Vec<_> = ctx
        .line_nodes
        .iter()
        .enumerate()
        .map(|(r, nodes)| (r, nodes[rng.random_range(0..nodes.len())]))
        .collect();
    Ok(ctx.assemble(&picks))
}

/// Dispatches on `strategy`; `seed` only matters for [`Strategy::Random`].
pub fn solve(
    strategy: Strategy,
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    seed: u64,
) -> Result<RetrievalPlan, SequencingError> {
    match strategy {
        Strategy::Optimal => solve_optimal(inst, rack, sorting),
        Strategy::Dp => solve_dp(inst, rack, sorting),
        Strategy::Greedy => solve_greedy(inst, rack, sorting),
        Strategy::Random => solve_random(inst, rack, sorting, seed),
    }
}

#[cfg(test)]
mod tests;
