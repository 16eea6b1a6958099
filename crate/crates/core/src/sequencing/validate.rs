//! Structural and numerical checks of a retrieval plan against its instance.

use super::engine::{price_cycle, sorted_in_place};
use super::RetrievalPlan;
use crate::catalog::{BinId, DrugId, SequencingInstance, TrailingSlot, TrailingState};
use crate::geometry::{dual_command_time, RackConfig};
use crate::stochastics::SortingModel;
use serde::Serialize;
use std::collections::HashSet;
use std::fmt;

const TOLERANCE: f64 = 1e-9;

/// One failed check. Variant names follow the model constraint they guard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    LayoutMismatch,
    /// A routed line was never retrieved.
    LineNotCovered { drug: DrugId },
    /// A drug was retrieved more than once.
    DrugPickedTwice { drug: DrugId },
    /// The same location was visited twice.
    DuplicateVisit { bin: BinId },
    /// The retrieved bin is not in any candidate set of the order.
    NotACandidate { cycle: usize, bin: BinId },
    MissingRetrieval { cycle: usize },
    StockInsufficient { cycle: usize, bin: BinId, stock: u32, dosage: u32 },
    /// Return and retrieval inside the same candidate set.
    IntraSetArc { cycle: usize, from: BinId, to: BinId },
    /// The returned bin is not the one waiting at that I/O point.
    ReturnMismatch { cycle: usize, expected: Option<BinId>, found: Option<BinId> },
    AlternationBroken { cycle: usize, expected_io: usize, found_io: usize },
    CycleCountMismatch { expected: usize, found: usize },
    SortedInPlaceMismatch,
    TravelMismatch { cycle: usize, expected: f64, found: f64 },
    ExpectedTimeMismatch { cycle: usize, expected: f64, found: f64 },
    ObjectiveMismatch { expected: f64, found: f64 },
    TrailingMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

/// Checks a plan: one bin per candidate set, no repeated location or drug,
/// stock sufficiency, no intra-set arc, trailing bins returned first,
/// strict I/O alternation, cycle count and the recomputed objective.
/// Violations are collected, never thrown.
pub fn validate_plan(
    plan: &RetrievalPlan,
    inst: &SequencingInstance,
    rack: &RackConfig,
    sorting: &SortingModel,
) -> ValidationReport {
    let mut out = Vec::new();
    let w = inst.layout.io_count();
    if plan.layout != inst.layout || rack.io_points.len() != w {
        out.push(Violation::LayoutMismatch);
        return ValidationReport { violations: out };
    }

    let mut expected_in_place = sorted_in_place(inst);
    let mut found_in_place = plan.sorted_in_place.clone();
    expected_in_place.sort();
    found_in_place.sort();
    if expected_in_place != found_in_place {
        out.push(Violation::SortedInPlaceMismatch);
    }

    let slot_io: Vec<usize> = inst.trailing.slots.iter().map(|s| s.io).collect();
    // bin waiting at each I/O point
    let mut waiting: Vec<Option<BinId>> = vec![None; w];
    for slot in &inst.trailing.slots {
        waiting[slot.io] = slot.bin;
    }
    let mut covered = vec![0usize; inst.lines.len()];
    let mut visited = HashSet::new();
    let mut total = 0.0;

    for (c, cycle) in plan.cycles.iter().enumerate() {
        total += cycle.expected_time;
        let expected_io = slot_io[c % w];
        if cycle.io_point != expected_io {
            out.push(Violation::AlternationBroken {
                cycle: c,
                expected_io,
                found_io: cycle.io_point,
            });
        }
        let io = cycle.io_point.min(w - 1);
        if cycle.return_bin != waiting[io] {
            out.push(Violation::ReturnMismatch {
                cycle: c,
                expected: waiting[io],
                found: cycle.return_bin,
            });
        }
        let Some(get) = cycle.retrieve_bin else {
            out.push(Violation::MissingRetrieval { cycle: c });
            waiting[io] = None;
            continue;
        };
        if !visited.insert(get) {
            out.push(Violation::DuplicateVisit { bin: get });
        }
        match inst.line_of_candidate(get) {
            Some(k) => {
                let line = &inst.lines[k];
                covered[k] += 1;
                if covered[k] == 2 {
                    out.push(Violation::DrugPickedTwice { drug: line.drug });
                }
                let bin = line
                    .candidates()
                    .iter()
                    .find(|b| b.id == get)
                    .expect("bin found in this line");
                if bin.stock < line.dosage {
                    out.push(Violation::StockInsufficient {
                        cycle: c,
                        bin: get,
                        stock: bin.stock,
                        dosage: line.dosage,
                    });
                }
                if let Some(ret) = cycle.return_bin {
                    if line.candidates().iter().any(|b| b.id == ret) {
                        out.push(Violation::IntraSetArc {
                            cycle: c,
                            from: ret,
                            to: get,
                        });
                    }
                }
            }
            None => out.push(Violation::NotACandidate { cycle: c, bin: get }),
        }

        let o = rack.io_point(io);
        let from = cycle
            .return_bin
            .and_then(|id| inst.find_bin(id))
            .map_or(o, |b| b.position);
        if let Some(to) = inst.find_bin(get).map(|b| b.position) {
            if let Ok(t) = dual_command_time(&o, &from, &to, rack) {
                if (t - cycle.travel_time).abs() > TOLERANCE {
                    out.push(Violation::TravelMismatch {
                        cycle: c,
                        expected: t,
                        found: cycle.travel_time,
                    });
                }
            }
        }
        let priced = price_cycle(inst.layout, sorting, cycle.travel_time.max(0.0));
        if (priced - cycle.expected_time).abs() > TOLERANCE {
            out.push(Violation::ExpectedTimeMismatch {
                cycle: c,
                expected: priced,
                found: cycle.expected_time,
            });
        }
        waiting[io] = Some(get);
    }

    for (k, line) in inst.lines.iter().enumerate() {
        if line.is_routed() && covered[k] == 0 {
            out.push(Violation::LineNotCovered { drug: line.drug });
        }
    }
    let routed = inst.routed_count();
    if plan.cycles.len() != routed {
        out.push(Violation::CycleCountMismatch {
            expected: routed,
            found: plan.cycles.len(),
        });
    }
    for found in [plan.objective, plan.executed_expected_time] {
        if (found - total).abs() > TOLERANCE {
            out.push(Violation::ObjectiveMismatch {
                expected: total,
                found,
            });
        }
    }

    let n = plan.cycles.len();
    let expected_trailing = TrailingState {
        slots: (0..w)
            .map(|i| {
                let io = slot_io[(n + i) % w];
                TrailingSlot {
                    io,
                    bin: waiting[io],
                }
            })
            .collect(),
    };
    if plan.new_trailing != expected_trailing {
        out.push(Violation::TrailingMismatch);
    }

    ValidationReport { violations: out }
}
