//! Shared cost tables and plan assembly for all solvers.
//!
//! Cycles of an order run at the I/O points of the trailing slots in turn:
//! cycle `c` uses slot `c % w` (`w` = number of I/O points), returns the bin
//! currently waiting there and retrieves the next bin to the same point.

use super::{Cycle, RetrievalPlan, SequencingError};
use crate::catalog::{BinId, DrugId, Layout, LineService, SequencingInstance, TrailingSlot, TrailingState};
use crate::geometry::{GridPosition, RackConfig};
use crate::stochastics::SortingModel;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub bin: Option<BinId>,
    /// `None` for an empty trailing slot: the return leg stays at the I/O point.
    pub position: Option<GridPosition>,
}

pub(crate) struct CostContext<'a> {
    pub inst: &'a SequencingInstance,
    pub layout: Layout,
    pub sorting: SortingModel,
    /// Instance line index of each routed line, prescription order.
    pub routed: Vec<usize>,
    /// Nodes `0..w` are the trailing slots, the rest candidate bins.
    pub nodes: Vec<Node>,
    /// Candidate node indices per routed line, ascending bin id.
    pub line_nodes: Vec<Vec<usize>>,
    pub slot_io: Vec<usize>,
    /// `travel[s][ret * n + get]`: dual-command time at slot `s`'s I/O point.
    travel: Vec<Vec<f64>>,
}

impl<'a> CostContext<'a> {
    pub fn new(
        inst: &'a SequencingInstance,
        rack: &RackConfig,
        sorting: &SortingModel,
    ) -> Result<Self, SequencingError> {
        let w = inst.layout.io_count();
        if rack.io_points.len() != w {
            return Err(SequencingError::LayoutMismatch {
                layout: inst.layout,
                io_points: rack.io_points.len(),
            });
        }
        rack.validate()?;
        inst.trailing
            .validate(inst.layout)
            .map_err(|e| SequencingError::Instance(e.to_string()))?;

        let mut nodes: Vec<Node> = inst
            .trailing_bins
            .iter()
            .map(|b| Node {
                bin: b.as_ref().map(|b| b.id),
                position: b.as_ref().map(|b| b.position),
            })
            .collect();
        for b in inst.trailing_bins.iter().flatten() {
            rack.check(&b.position)?;
        }
        let routed = inst.routed_lines();
        let mut line_nodes = Vec::with_capacity(routed.len());
        for &k in &routed {
            let cands = inst.lines[k].candidates();
            if cands.is_empty() {
                return Err(SequencingError::Instance(format!(
                    "line {k} (drug {}) has no candidate bin",
                    inst.lines[k].drug
                )));
            }
            let mut ids = Vec::with_capacity(cands.len());
            for b in cands {
                rack.check(&b.position)?;
                ids.push(nodes.len());
                nodes.push(Node {
                    bin: Some(b.id),
                    position: Some(b.position),
                });
            }
            line_nodes.push(ids);
        }
        let slot_io: Vec<usize> = inst.trailing.slots.iter().map(|s| s.io).collect();

        let n = nodes.len();
        let travel = slot_io
            .iter()
            .map(|&io| {
                let o = rack.io_point(io);
                let mut table = vec![0.0; n * n];
                for (r, ret) in nodes.iter().enumerate() {
                    let i = ret.position.unwrap_or(o);
                    for (g, get) in nodes.iter().enumerate().skip(w) {
                        let j = get.position.expect("candidate nodes have positions");
                        table[r * n + g] = rack.dual_command_unchecked(&o, &i, &j);
                    }
                }
                table
            })
            .collect();

        Ok(Self {
            inst,
            layout: inst.layout,
            sorting: *sorting,
            routed,
            nodes,
            line_nodes,
            slot_io,
            travel,
        })
    }

    #[inline]
    pub fn window(&self) -> usize {
        self.slot_io.len()
    }

    #[inline]
    pub fn travel(&self, slot: usize, ret: usize, get: usize) -> f64 {
        self.travel[slot][ret * self.nodes.len() + get]
    }

    #[inline]
    pub fn expected(&self, travel: f64) -> f64 {
        price_cycle(self.layout, &self.sorting, travel)
    }

    /// Quantity minimized per cycle. Every plan of an instance has the same
    /// number of cycles, so the sequential layout can drop the constant
    /// `E[X]` term and rank plans by travel alone.
    #[inline]
    pub fn weight(&self, slot: usize, ret: usize, get: usize) -> f64 {
        let t = self.travel(slot, ret, get);
        match self.layout {
            Layout::A => self.expected(t),
            Layout::B => t,
        }
    }

    /// Turns a sequence of `(routed line, node)` picks into a plan.
    pub fn assemble(&self, picks: &[(usize, usize)]) -> RetrievalPlan {
        let w = self.window();
        let mut hist: Vec<usize> = (0..w).collect();
        let mut cycles = Vec::with_capacity(picks.len());
        for (c, &(r, get)) in picks.iter().enumerate() {
            let slot = c % w;
            let ret = hist[slot];
            let t = self.travel(slot, ret, get);
            cycles.push(Cycle {
                io_point: self.slot_io[slot],
                return_bin: self.nodes[ret].bin,
                retrieve_bin: self.nodes[get].bin,
                drug: Some(self.inst.lines[self.routed[r]].drug),
                travel_time: t,
                expected_time: self.expected(t),
            });
            hist[slot] = get;
        }
        let n = picks.len();
        let new_trailing = TrailingState {
            slots: (0..w)
                .map(|i| {
                    let slot = (n + i) % w;
                    TrailingSlot {
                        io: self.slot_io[slot],
                        bin: self.nodes[hist[slot]].bin,
                    }
                })
                .collect(),
        };
        let objective: f64 = cycles.iter().map(|c| c.expected_time).sum();
        RetrievalPlan {
            layout: self.layout,
            order: self.inst.order.id,
            cycles,
            sorted_in_place: sorted_in_place(self.inst),
            objective,
            executed_expected_time: objective,
            new_trailing,
        }
    }
}

/// Expected picking time of one cycle with travel time `travel`:
/// `E[max(X, t)]` when sorting overlaps the crane, `t + E[X]` otherwise.
pub fn price_cycle(layout: Layout, sorting: &SortingModel, travel: f64) -> f64 {
    match layout {
        Layout::A => sorting.expected_max_unchecked(travel),
        Layout::B => travel + sorting.mean(),
    }
}

pub(crate) fn sorted_in_place(inst: &SequencingInstance) -> Vec<DrugId> {
    inst.lines
        .iter()
        .filter(|l| matches!(l.service, LineService::SortInPlace { .. }))
        .map(|l| l.drug)
        .collect()
}
