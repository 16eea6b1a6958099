//! Inventory and prescription data model, plus construction of the
//! per-order sequencing instance.

mod generator;
mod io;

pub use generator::{generate_stream, GeneratorSpec, Popularity};
pub use io::{
    load_dataset, read_inventory, read_orders, write_inventory, write_orders, INVENTORY_HEADER,
    ORDERS_HEADER,
};

use crate::geometry::{GeometryError, GridPosition, RackConfig};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[repr(transparent)]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub const fn value(self) -> u32 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u32> for $name {
            fn from(value: u32) -> Self {
                Self(value)
            }
        }
    };
}

id_type!(DrugId);
id_type!(BinId);
id_type!(OrderId);

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("order {order}: no single bin of drug {drug} holds the dosage {dosage}")]
    InfeasibleLine {
        order: OrderId,
        drug: DrugId,
        dosage: u32,
    },
    #[error("order {0}: drug {1} appears more than once")]
    DuplicateDrug(OrderId, DrugId),
    #[error("order {0}: needs at least 2 lines, has {1}")]
    TooFewLines(OrderId, usize),
    #[error("order {0}: dosage must be positive")]
    ZeroDosage(OrderId),
    #[error("order {order}: unknown drug {drug}")]
    UnknownDrug { order: OrderId, drug: DrugId },
    #[error("duplicate bin id {0}")]
    DuplicateBin(BinId),
    #[error("bins {0} and {1} share cell {2}")]
    CellOccupied(BinId, BinId, GridPosition),
    #[error("unknown bin {0}")]
    UnknownBin(BinId),
    #[error("bin {0}: {1}")]
    BinBounds(BinId, GeometryError),
    #[error("trailing state does not match the layout: {0}")]
    Trailing(String),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: {message}")]
    Validation { file: String, message: String },
    #[error("generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A storage location holding a single drug type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub id: BinId,
    pub position: GridPosition,
    pub drug: DrugId,
    pub stock: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLine {
    pub drug: DrugId,
    pub dosage: u32,
}

/// A prescription. Lines keep the prescription's own drug sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub arrival_index: u64,
    pub lines: Vec<OrderLine>,
}

impl Order {
    pub fn new(id: OrderId, arrival_index: u64, lines: Vec<OrderLine>) -> Result<Self, CatalogError> {
        let order = Self {
            id,
            arrival_index,
            lines,
        };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.lines.len() < 2 {
            return Err(CatalogError::TooFewLines(self.id, self.lines.len()));
        }
        let mut seen = HashSet::new();
        for line in &self.lines {
            if line.dosage == 0 {
                return Err(CatalogError::ZeroDosage(self.id));
            }
            if !seen.insert(line.drug) {
                return Err(CatalogError::DuplicateDrug(self.id, line.drug));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// The set of bins in one rack, indexed by id and by drug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    bins: Vec<Bin>,
    by_id: HashMap<BinId, usize>,
    by_drug: BTreeMap<DrugId, Vec<usize>>,
}

impl Inventory {
    /// Builds an inventory, rejecting duplicate ids and double-booked cells.
    pub fn new(mut bins: Vec<Bin>) -> Result<Self, CatalogError> {
        bins.sort_by_key(|b| b.id);
        let mut by_id = HashMap::with_capacity(bins.len());
        let mut cells: HashMap<GridPosition, BinId> = HashMap::with_capacity(bins.len());
        let mut by_drug: BTreeMap<DrugId, Vec<usize>> = BTreeMap::new();
        for (idx, bin) in bins.iter().enumerate() {
            if by_id.insert(bin.id, idx).is_some() {
                return Err(CatalogError::DuplicateBin(bin.id));
            }
            if let Some(other) = cells.insert(bin.position, bin.id) {
                return Err(CatalogError::CellOccupied(other, bin.id, bin.position));
            }
            by_drug.entry(bin.drug).or_default().push(idx);
        }
        Ok(Self {
            bins,
            by_id,
            by_drug,
        })
    }

    pub fn check_bounds(&self, rack: &RackConfig) -> Result<(), CatalogError> {
        for bin in &self.bins {
            rack.check(&bin.position)
                .map_err(|e| CatalogError::BinBounds(bin.id, e))?;
        }
        Ok(())
    }

    /// Bins sorted by id.
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn get(&self, id: BinId) -> Option<&Bin> {
        self.by_id.get(&id).map(|&i| &self.bins[i])
    }

    pub fn contains_drug(&self, drug: DrugId) -> bool {
        self.by_drug.contains_key(&drug)
    }

    /// Bins holding `drug`, in ascending id order.
    pub fn bins_of(&self, drug: DrugId) -> impl Iterator<Item = &Bin> {
        self.by_drug
            .get(&drug)
            .into_iter()
            .flatten()
            .map(|&i| &self.bins[i])
    }

    /// Removes `qty` units from a bin, saturating at zero.
    pub fn withdraw(&mut self, id: BinId, qty: u32) -> Result<(), CatalogError> {
        let idx = *self.by_id.get(&id).ok_or(CatalogError::UnknownBin(id))?;
        let bin = &mut self.bins[idx];
        bin.stock = bin.stock.saturating_sub(qty);
        Ok(())
    }

    pub fn total_stock(&self) -> u64 {
        self.bins.iter().map(|b| u64::from(b.stock)).sum()
    }
}

/// Which rack layout an instance is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layout {
    /// Two I/O points; sorting overlaps the next retrieval.
    A,
    /// One I/O point; sorting and retrieval alternate.
    B,
}

impl Layout {
    pub fn io_count(self) -> usize {
        match self {
            Layout::A => 2,
            Layout::B => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Layout::A => "A",
            Layout::B => "B",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A bin (or nothing) waiting at one I/O point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailingSlot {
    /// Zero-based I/O point index into `RackConfig::io_points`.
    pub io: usize,
    pub bin: Option<BinId>,
}

/// Bins left at the I/O points by the previous order, oldest first.
///
/// The next order's first cycle runs at the I/O point of the oldest slot
/// and returns its bin; in the two-point layout cycles then alternate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailingState {
    pub slots: Vec<TrailingSlot>,
}

impl TrailingState {
    /// Start of a busy period: every I/O point is free.
    pub fn empty(layout: Layout) -> Self {
        Self {
            slots: (0..layout.io_count())
                .map(|io| TrailingSlot { io, bin: None })
                .collect(),
        }
    }

    /// Trailing bins given in I/O point order (index 0 oldest).
    pub fn from_bins(bins: &[Option<BinId>]) -> Self {
        Self {
            slots: bins
                .iter()
                .enumerate()
                .map(|(io, &bin)| TrailingSlot { io, bin })
                .collect(),
        }
    }

    pub fn validate(&self, layout: Layout) -> Result<(), CatalogError> {
        let n = layout.io_count();
        if self.slots.len() != n {
            return Err(CatalogError::Trailing(format!(
                "layout {layout} needs {n} slots, got {}",
                self.slots.len()
            )));
        }
        let mut ios: Vec<_> = self.slots.iter().map(|s| s.io).collect();
        ios.sort_unstable();
        if ios != (0..n).collect::<Vec<_>>() {
            return Err(CatalogError::Trailing(format!(
                "slots must cover I/O points 0..{n} once each, got {ios:?}"
            )));
        }
        let bins: Vec<_> = self.slots.iter().filter_map(|s| s.bin).collect();
        if bins.len() == 2 && bins[0] == bins[1] {
            return Err(CatalogError::Trailing(format!(
                "bin {} cannot wait at two I/O points",
                bins[0]
            )));
        }
        Ok(())
    }

    pub fn occupied(&self) -> impl Iterator<Item = BinId> + '_ {
        self.slots.iter().filter_map(|s| s.bin)
    }
}

/// How one order line is served.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineService {
    /// Retrieved from one of these bins (the candidate set), ascending id.
    Retrieve { candidates: Vec<Bin> },
    /// Sorted directly from the trailing bin in `slot`.
    SortInPlace { slot: usize, bin: BinId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLine {
    pub drug: DrugId,
    pub dosage: u32,
    pub service: LineService,
}

impl InstanceLine {
    pub fn candidates(&self) -> &[Bin] {
        match &self.service {
            LineService::Retrieve { candidates } => candidates,
            LineService::SortInPlace { .. } => &[],
        }
    }

    pub fn is_routed(&self) -> bool {
        matches!(self.service, LineService::Retrieve { .. })
    }
}

/// Everything a solver needs for one order: candidate sets per line,
/// the trailing bins to be returned first, and overlap flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencingInstance {
    pub layout: Layout,
    pub order: Order,
    /// One entry per order line, in prescription order.
    pub lines: Vec<InstanceLine>,
    pub trailing: TrailingState,
    /// Snapshot of each trailing slot's bin, parallel to `trailing.slots`.
    pub trailing_bins: Vec<Option<Bin>>,
}

impl SequencingInstance {
    /// Indices of the lines that need a retrieval, in prescription order.
    pub fn routed_lines(&self) -> Vec<usize> {
        (0..self.lines.len())
            .filter(|&k| self.lines[k].is_routed())
            .collect()
    }

    /// Number of retrieval cycles every plan for this instance executes.
    pub fn routed_count(&self) -> usize {
        self.lines.iter().filter(|l| l.is_routed()).count()
    }

    /// Overlap indicators as `(slot, line)` pairs.
    pub fn overlap_flags(&self) -> Vec<(usize, usize)> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(k, l)| match l.service {
                LineService::SortInPlace { slot, .. } => Some((slot, k)),
                LineService::Retrieve { .. } => None,
            })
            .collect()
    }

    /// Union of all candidate sets, ascending by bin id.
    pub fn candidate_union(&self) -> Vec<&Bin> {
        let mut all: Vec<&Bin> = self.lines.iter().flat_map(|l| l.candidates()).collect();
        all.sort_by_key(|b| b.id);
        all.dedup_by_key(|b| b.id);
        all
    }

    /// Looks up a bin among the candidates and trailing bins.
    pub fn find_bin(&self, id: BinId) -> Option<&Bin> {
        self.trailing_bins
            .iter()
            .flatten()
            .chain(self.lines.iter().flat_map(|l| l.candidates()))
            .find(|b| b.id == id)
    }

    /// Line index whose candidate set contains `id`.
    pub fn line_of_candidate(&self, id: BinId) -> Option<usize> {
        self.lines
            .iter()
            .position(|l| l.candidates().iter().any(|b| b.id == id))
    }
}

/// Builds the sequencing instance for `order` against the current stock.
///
/// A line whose drug sits in a trailing bin with enough stock is sorted in
/// place; every other line gets the candidate set of bins of its drug whose
/// stock covers the dosage. Bins waiting at an I/O point are never
/// candidates. Fails if some routed line has no candidate.
pub fn build_instance(
    order: &Order,
    inventory: &Inventory,
    trailing: &TrailingState,
    layout: Layout,
) -> Result<SequencingInstance, CatalogError> {
    order.validate()?;
    trailing.validate(layout)?;

    let trailing_bins = trailing
        .slots
        .iter()
        .map(|slot| {
            slot.bin
                .map(|id| inventory.get(id).cloned().ok_or(CatalogError::UnknownBin(id)))
                .transpose()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let at_io: HashSet<BinId> = trailing.occupied().collect();
    let mut slot_used = vec![false; trailing.slots.len()];

    let mut lines = Vec::with_capacity(order.lines.len());
    for line in &order.lines {
        let overlap = trailing_bins.iter().enumerate().find_map(|(slot, bin)| {
            bin.as_ref()
                .filter(|b| !slot_used[slot] && b.drug == line.drug && b.stock >= line.dosage)
                .map(|b| (slot, b.id))
        });
        let service = if let Some((slot, bin)) = overlap {
            slot_used[slot] = true;
            LineService::SortInPlace { slot, bin }
        } else {
            let candidates: Vec<Bin> = inventory
                .bins_of(line.drug)
                .filter(|b| b.stock >= line.dosage && !at_io.contains(&b.id))
                .cloned()
                .collect();
            if candidates.is_empty() {
                return Err(CatalogError::InfeasibleLine {
                    order: order.id,
                    drug: line.drug,
                    dosage: line.dosage,
                });
            }
            LineService::Retrieve { candidates }
        };
        lines.push(InstanceLine {
            drug: line.drug,
            dosage: line.dosage,
            service,
        });
    }

    Ok(SequencingInstance {
        layout,
        order: order.clone(),
        lines,
        trailing: trailing.clone(),
        trailing_bins,
    })
}
