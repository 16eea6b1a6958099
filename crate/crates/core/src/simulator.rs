//! First-come-first-served execution of an order stream.
//!
//! Orders are solved one at a time against the current stock and the bins
//! left at the I/O points by the previous order. An order is charged the
//! cycles it executes; the return of its last bins happens, and is timed,
//! inside the next order's first cycles.

use crate::catalog::{build_instance, BinId, CatalogError, Inventory, Layout, Order, OrderId, TrailingState};
use crate::geometry::{single_command_time, RackConfig};
use crate::sequencing::{
    price_cycle, solve_dp, solve_greedy, solve_optimal, solve_random_with, RetrievalPlan, SequencingError,
    Strategy,
};
use crate::stochastics::{sample_sorting, SortingModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Sequencing(#[from] SequencingError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Expected cycle times.
    #[default]
    Analytic,
    /// Sorting times drawn per cycle, averaged over replications.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// Every order starts from the bins the previous one left; the first
    /// order starts with free I/O points.
    #[default]
    Successive,
    /// The first order also returns its own last bins (single-command
    /// trips at both ends), then the stream continues successively from
    /// free I/O points.
    WarmupThenSuccessive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StockMode {
    /// Stock never runs out.
    #[default]
    Infinite,
    /// Every pick removes its dosage from the bin.
    Decrement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OnInfeasible {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub layout: Layout,
    pub strategy: Strategy,
    pub sorting: SortingModel,
    pub timing_mode: TimingMode,
    pub arrival_mode: ArrivalMode,
    pub stock_mode: StockMode,
    /// Seeds the random strategy and the Monte-Carlo draws.
    pub seed: u64,
    /// Monte-Carlo replications of the whole stream.
    pub replications: usize,
    pub on_infeasible: OnInfeasible,
    /// Leave orders served entirely from trailing bins out of the means.
    pub exclude_zero_cycle_orders: bool,
}

impl StreamConfig {
    pub fn new(layout: Layout, strategy: Strategy, sorting: SortingModel) -> Self {
        Self {
            layout,
            strategy,
            sorting,
            timing_mode: TimingMode::Analytic,
            arrival_mode: ArrivalMode::Successive,
            stock_mode: StockMode::Infinite,
            seed: 0,
            replications: 1,
            on_infeasible: OnInfeasible::Skip,
            exclude_zero_cycle_orders: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        SortingModel::new(self.sorting.mu, self.sorting.sigma)
            .map_err(|e| SimError::Config(e.to_string()))?;
        if self.timing_mode == TimingMode::MonteCarlo && self.replications == 0 {
            return Err(SimError::Config("Monte-Carlo mode needs at least one replication".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleOrder {
    pub order: OrderId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRecord {
    pub order: OrderId,
    /// Expected (analytic) or replication-averaged (Monte-Carlo) time.
    pub time: f64,
    pub cycles: usize,
    pub sorted_in_place: usize,
    /// Travel time of each executed cycle.
    #[serde(skip)]
    pub travel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub layout: Layout,
    pub strategy: Strategy,
    pub sorting: SortingModel,
    pub orders: Vec<OrderRecord>,
    /// Times of the orders counted in the means.
    pub per_order_times: Vec<f64>,
    /// `None` for an empty stream.
    pub mean_time: Option<f64>,
    pub total_cycles: usize,
    pub mean_cycles_per_order: Option<f64>,
    pub infeasible_orders: Vec<InfeasibleOrder>,
    /// Mean order time of each Monte-Carlo replication.
    pub replication_means: Vec<f64>,
    /// `(bin, quantity)` for every pick, in execution order.
    pub withdrawals: Vec<(BinId, u32)>,
    pub final_inventory: Vec<(BinId, u32)>,
}

impl SimReport {
    /// Standard error of the Monte-Carlo mean, if there are at least two
    /// replications.
    pub fn standard_error(&self) -> Option<f64> {
        mean_and_se(&self.replication_means).map(|(_, se)| se)
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

fn solve_with(
    strategy: Strategy,
    inst: &crate::catalog::SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
    rng: &mut ChaCha8Rng,
) -> Result<RetrievalPlan, SequencingError> {
    match strategy {
        Strategy::Optimal => solve_optimal(inst, rack, sorting),
        Strategy::Dp => solve_dp(inst, rack, sorting),
        Strategy::Greedy => solve_greedy(inst, rack, sorting),
        Strategy::Random => solve_random_with(inst, rack, sorting, rng),
    }
}

/// Runs `orders` in the given sequence (callers sort by arrival).
pub fn run_stream(
    orders: &[Order],
    inventory: &Inventory,
    rack: &RackConfig,
    cfg: &StreamConfig,
) -> Result<SimReport, SimError> {
    cfg.validate()?;
    if rack.io_points.len() != cfg.layout.io_count() {
        return Err(SequencingError::LayoutMismatch {
            layout: cfg.layout,
            io_points: rack.io_points.len(),
        }
        .into());
    }
    let mut stock = inventory.clone();
    let mut trailing = TrailingState::empty(cfg.layout);
    let mut strategy_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(orders.len());
    let mut infeasible = Vec::new();
    let mut withdrawals = Vec::new();

    for (n, order) in orders.iter().enumerate() {
        let inst = match build_instance(order, &stock, &trailing, cfg.layout) {
            Ok(inst) => inst,
            Err(e @ CatalogError::InfeasibleLine { .. }) => {
                if cfg.on_infeasible == OnInfeasible::Abort {
                    return Err(e.into());
                }
                infeasible.push(InfeasibleOrder {
                    order: order.id,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let plan = solve_with(cfg.strategy, &inst, rack, &cfg.sorting, &mut strategy_rng)?;

        let mut travel: Vec<f64> = plan.cycles.iter().map(|c| c.travel_time).collect();
        let mut picks: Vec<(BinId, u32)> = plan
            .cycles
            .iter()
            .filter_map(|c| {
                let bin = c.retrieve_bin?;
                let k = inst.line_of_candidate(bin)?;
                Some((bin, inst.lines[k].dosage))
            })
            .collect();
        for line in &inst.lines {
            if let crate::catalog::LineService::SortInPlace { bin, .. } = line.service {
                picks.push((bin, line.dosage));
            }
        }
        trailing = plan.new_trailing.clone();
        if n == 0 && cfg.arrival_mode == ArrivalMode::WarmupThenSuccessive {
            // put the last bins back with single-command trips
            for slot in &trailing.slots {
                if let Some(id) = slot.bin {
                    let bin = stock.get(id).ok_or(CatalogError::UnknownBin(id))?;
                    travel.push(single_command_time(&rack.io_point(slot.io), &bin.position, rack).map_err(SequencingError::from)?);
                }
            }
            trailing = TrailingState::empty(cfg.layout);
        }
        if cfg.stock_mode == StockMode::Decrement {
            for &(bin, qty) in &picks {
                stock.withdraw(bin, qty)?;
            }
        }
        withdrawals.extend(picks);
        let time = travel
            .iter()
            .map(|&t| price_cycle(cfg.layout, &cfg.sorting, t))
            .sum();
        records.push(OrderRecord {
            order: order.id,
            time,
            cycles: travel.len(),
            sorted_in_place: plan.sorted_in_place.len(),
            travel,
        });
    }

    let counted: Vec<usize> = (0..records.len())
        .filter(|&i| !(cfg.exclude_zero_cycle_orders && records[i].cycles == 0))
        .collect();
    let mut replication_means = Vec::new();
    if cfg.timing_mode == TimingMode::MonteCarlo && !counted.is_empty() {
        let totals: Vec<Vec<f64>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64 + 1);
                records
                    .iter()
                    .map(|rec| sampled_order_time(cfg.layout, &cfg.sorting, &rec.travel, &mut rng))
                    .collect()
            })
            .collect();
        let reps = cfg.replications as f64;
        for (i, rec) in records.iter_mut().enumerate() {
            rec.time = totals.iter().map(|t| t[i]).sum::<f64>() / reps;
        }
        replication_means = totals
            .iter()
            .map(|t| counted.iter().map(|&i| t[i]).sum::<f64>() / counted.len() as f64)
            .collect();
    }

    let per_order_times: Vec<f64> = counted.iter().map(|&i| records[i].time).collect();
    let total_cycles = records.iter().map(|r| r.cycles).sum();
    let (mean_time, mean_cycles_per_order) = if counted.is_empty() {
        (None, None)
    } else {
        let n = counted.len() as f64;
        (
            Some(per_order_times.iter().sum::<f64>() / n),
            Some(counted.iter().map(|&i| records[i].cycles as f64).sum::<f64>() / n),
        )
    };
    Ok(SimReport {
        layout: cfg.layout,
        strategy: cfg.strategy,
        sorting: cfg.sorting,
        orders: records,
        per_order_times,
        mean_time,
        total_cycles,
        mean_cycles_per_order,
        infeasible_orders: infeasible,
        replication_means,
        withdrawals,
        final_inventory: stock.bins().iter().map(|b| (b.id, b.stock)).collect(),
    })
}

/// One sampled realization of an order's picking time.
pub fn sampled_order_time(layout: Layout, sorting: &SortingModel, travel: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    travel
        .iter()
        .map(|&t| {
            let x = sample_sorting(sorting, rng);
            match layout {
                Layout::A => x.max(t),
                Layout::B => x + t,
            }
        })
        .sum()
}

/// Throughput gain of layout A over layout B, `(1/T_A - 1/T_B) / (1/T_B)`.
pub fn improvement(t_a: f64, t_b: f64) -> f64 {
    (1.0 / t_a - 1.0 / t_b) / (1.0 / t_b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub mu: f64,
    pub sigma: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub cycles_a: f64,
    pub cycles_b: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub strategy: Strategy,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// `(mu, improvement)` for one `sigma`, ascending in `mu`.
    pub fn improvement_series(&self, sigma: f64) -> Vec<(f64, f64)> {
        let mut s: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.sigma == sigma)
            .map(|r| (r.mu, r.improvement))
            .collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    }

    pub fn result_rows(&self) -> Vec<ResultRow> {
        let mut out = Vec::with_capacity(2 * self.rows.len());
        for r in &self.rows {
            for (layout, t, c) in [(Layout::A, r.t_a, r.cycles_a), (Layout::B, r.t_b, r.cycles_b)] {
                out.push(ResultRow {
                    mu: r.mu,
                    sigma: r.sigma,
                    layout,
                    strategy: self.strategy,
                    mean_time: t,
                    mean_cycles: c,
                    improvement: Some(r.improvement),
                });
            }
        }
        out
    }
}

/// True if the values rise (weakly) to a maximum and then fall (weakly).
pub fn is_single_peaked(values: &[f64]) -> bool {
    let Some(peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    values[..=peak].windows(2).all(|w| w[0] <= w[1]) && values[peak..].windows(2).all(|w| w[0] >= w[1])
}

fn mean_of(report: &SimReport) -> Result<(f64, f64), SimError> {
    match (report.mean_time, report.mean_cycles_per_order) {
        (Some(t), Some(c)) => Ok((t, c)),
        _ => Err(SimError::Config("stream has no timed order".into())),
    }
}

/// Runs both layouts on the same stream at every `(mu, sigma)`. `rack`
/// carries the two-point layout; the one-point rack keeps its first I/O
/// point. Layout and sorting in `template` are overridden.
pub fn compare_layouts(
    orders: &[Order],
    inventory: &Inventory,
    rack: &RackConfig,
    grid: &[(f64, f64)],
    template: &StreamConfig,
) -> Result<ComparisonTable, SimError> {
    if grid.is_empty() {
        return Err(SimError::Config("empty (mu, sigma) grid".into()));
    }
    let rack_b = rack.single_io();
    let rows = grid
        .par_iter()
        .map(|&(mu, sigma)| {
            let sorting = SortingModel::new(mu, sigma).map_err(|e| SimError::Config(e.to_string()))?;
            let run = |layout: Layout, rack: &RackConfig| {
                let cfg = StreamConfig {
                    layout,
                    sorting,
                    ..*template
                };
                run_stream(orders, inventory, rack, &cfg).and_then(|r| mean_of(&r))
            };
            let (t_a, cycles_a) = run(Layout::A, rack)?;
            let (t_b, cycles_b) = run(Layout::B, &rack_b)?;
            Ok(ComparisonRow {
                mu,
                sigma,
                t_a,
                t_b,
                cycles_a,
                cycles_b,
                improvement: improvement(t_a, t_b),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(ComparisonTable {
        strategy: template.strategy,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRow {
    pub mu: f64,
    pub sigma: f64,
    pub strategy: Strategy,
    pub mean_time: f64,
    pub mean_cycles: f64,
    /// Half-width of the 95% interval over seeds (random strategy only).
    pub ci95: Option<f64>,
    /// Per-seed means of the random strategy.
    pub seed_means: Vec<f64>,
}

/// Mean picking time of every strategy at every `(mu, sigma)` for one
/// layout; the random strategy is averaged over `seeds`.
pub fn compare_strategies(
    orders: &[Order],
    inventory: &Inventory,
    rack: &RackConfig,
    points: &[(f64, f64)],
    template: &StreamConfig,
    seeds: &[u64],
) -> Result<Vec<StrategyRow>, SimError> {
    if seeds.is_empty() {
        return Err(SimError::Config("the random strategy needs at least one seed".into()));
    }
    let jobs: Vec<(f64, f64, Strategy)> = points
        .iter()
        .flat_map(|&(mu, sigma)| Strategy::ALL.into_iter().map(move |s| (mu, sigma, s)))
        .collect();
    jobs.par_iter()
        .map(|&(mu, sigma, strategy)| {
            let sorting = SortingModel::new(mu, sigma).map_err(|e| SimError::Config(e.to_string()))?;
            let run = |seed: u64| {
                let cfg = StreamConfig {
                    strategy,
                    sorting,
                    seed,
                    ..*template
                };
                run_stream(orders, inventory, rack, &cfg).and_then(|r| mean_of(&r))
            };
            if strategy == Strategy::Random {
                let runs = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>, _>>()?;
                let times: Vec<f64> = runs.iter().map(|r| r.0).collect();
                let n = runs.len() as f64;
                Ok(StrategyRow {
                    mu,
                    sigma,
                    strategy,
                    mean_time: times.iter().sum::<f64>() / n,
                    mean_cycles: runs.iter().map(|r| r.1).sum::<f64>() / n,
                    ci95: mean_and_se(&times).map(|(_, se)| 1.96 * se),
                    seed_means: times,
                })
            } else {
                let (mean_time, mean_cycles) = run(template.seed)?;
                Ok(StrategyRow {
                    mu,
                    sigma,
                    strategy,
                    mean_time,
                    mean_cycles,
                    ci95: None,
                    seed_means: Vec::new(),
                })
            }
        })
        .collect()
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub mu: f64,
    pub sigma: f64,
    pub layout: Layout,
    pub strategy: Strategy,
    pub mean_time: f64,
    pub mean_cycles: f64,
    pub improvement: Option<f64>,
}

pub const RESULTS_HEADER: [&str; 7] = ["mu", "sigma", "layout", "strategy", "mean_time", "mean_cycles", "improvement"];

/// Formats `x` with six significant digits in positional notation.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.999995 -> 10.00000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs().log10().floor() as i32 > magnitude && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn write_results_csv<W: Write>(writer: W, rows: &[ResultRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            format_sig(r.mu),
            format_sig(r.sigma),
            r.layout.to_string(),
            r.strategy.to_string(),
            format_sig(r.mean_time),
            format_sig(r.mean_cycles),
            r.improvement.map(format_sig).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
