//! Seeded synthetic inventory and prescription stream.

use super::{Bin, BinId, CatalogError, DrugId, Inventory, Order, OrderId, OrderLine};
use crate::geometry::GridPosition;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Drug demand law used when drawing the drugs of an order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Popularity {
    Uniform,
    /// Weight of the drug with rank `r` (1-based) is `r^-s`.
    Zipf { s: f64 },
}

/// Parameters of the synthetic dataset. Ranges are inclusive `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub rows: u32,
    pub cols: u32,
    #[serde(default = "default_sides")]
    pub sides: u8,
    pub drug_count: u32,
    pub bins_per_drug: [u32; 2],
    pub stock: [u32; 2],
    pub order_count: u32,
    pub lines_per_order: [u32; 2],
    pub popularity: Popularity,
    pub dosage: [u32; 2],
    /// Cells that never hold a bin (typically the I/O points).
    #[serde(default)]
    pub reserved: Vec<GridPosition>,
}

fn default_sides() -> u8 {
    2
}

impl GeneratorSpec {
    /// The default benchmark: 100 prescriptions of 2 to 6 drugs on the
    /// `paper-5` 17x17 double rack.
    pub fn benchmark() -> Self {
        Self {
            rows: 17,
            cols: 17,
            sides: 2,
            drug_count: 120,
            bins_per_drug: [1, 3],
            stock: [60, 200],
            order_count: 100,
            lines_per_order: [2, 6],
            popularity: Popularity::Zipf { s: 0.8 },
            dosage: [1, 10],
            reserved: vec![GridPosition::new(1, 10, 9), GridPosition::new(1, 10, 10)],
        }
    }

    /// Smallest initial stock for which replaying the whole stream with
    /// stock withdrawal (no replenishment) can never run a drug dry.
    ///
    /// With `b` bins of a drug, `n` orders and largest dosage `q`, every
    /// bin below `q` while `n - 1` picks of at most `q` were taken requires
    /// `b * floor - (n - 1) * q < b * q`.
    pub fn replay_safe_stock_floor(&self) -> u64 {
        let b = u64::from(self.bins_per_drug[0].max(1));
        let n = u64::from(self.order_count);
        let q = u64::from(self.dosage[1]);
        (q * (b + n.saturating_sub(1))).div_ceil(b)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let spec = |m: String| Err(CatalogError::Spec(m));
        let range_ok = |r: &[u32; 2]| r[0] <= r[1];
        if self.rows == 0 || self.cols == 0 || !(1..=2).contains(&self.sides) {
            return spec("rack needs rows, cols >= 1 and 1 or 2 sides".into());
        }
        for (name, r) in [
            ("bins_per_drug", &self.bins_per_drug),
            ("stock", &self.stock),
            ("lines_per_order", &self.lines_per_order),
            ("dosage", &self.dosage),
        ] {
            if !range_ok(r) {
                return spec(format!("{name} range {r:?} is empty"));
            }
        }
        if self.bins_per_drug[0] == 0 {
            return spec("every drug needs at least one bin".into());
        }
        if self.dosage[0] == 0 {
            return spec("dosages must be positive".into());
        }
        if self.lines_per_order[0] < 2 {
            return spec("orders need at least 2 lines".into());
        }
        if self.order_count > 0 && self.lines_per_order[1] > self.drug_count {
            return spec(format!(
                "orders of up to {} distinct drugs need at least that many drugs, have {}",
                self.lines_per_order[1], self.drug_count
            ));
        }
        if self.stock[0] < self.dosage[1] {
            return spec(format!(
                "minimum stock {} cannot cover the largest dosage {}",
                self.stock[0], self.dosage[1]
            ));
        }
        if let Popularity::Zipf { s } = self.popularity {
            if !(s >= 0.0 && s.is_finite()) {
                return spec(format!("zipf exponent must be >= 0, got {s}"));
            }
        }
        let reserved: HashSet<_> = self
            .reserved
            .iter()
            .filter(|p| self.cell_exists(p))
            .collect();
        let cells = u64::from(self.rows) * u64::from(self.cols) * u64::from(self.sides)
            - reserved.len() as u64;
        let needed = u64::from(self.drug_count) * u64::from(self.bins_per_drug[1]);
        if needed > cells {
            return spec(format!(
                "{} drugs x {} bins need {needed} cells, rack has {cells}",
                self.drug_count, self.bins_per_drug[1]
            ));
        }
        Ok(())
    }

    fn cell_exists(&self, p: &GridPosition) -> bool {
        (1..=self.sides).contains(&p.side)
            && (1..=self.rows).contains(&p.row)
            && (1..=self.cols).contains(&p.col)
    }
}

/// Generates an inventory and an order stream, deterministic per seed.
///
/// Every drug gets its bins on distinct random cells; every order draws a
/// uniform line count and distinct drugs by the popularity law. Each order
/// is feasible against the initial stock.
pub fn generate_stream(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<(Inventory, Vec<Order>), CatalogError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let reserved: HashSet<_> = spec.reserved.iter().copied().collect();
    let mut cells: Vec<GridPosition> = (1..=spec.sides)
        .flat_map(|side| {
            (1..=spec.rows)
                .flat_map(move |row| (1..=spec.cols).map(move |col| GridPosition::new(side, row, col)))
        })
        .filter(|p| !reserved.contains(p))
        .collect();
    cells.shuffle(&mut rng);
    let mut free = cells.into_iter();

    let mut bins = Vec::new();
    let mut next_bin = 1u32;
    for drug in 1..=spec.drug_count {
        let count = rng.random_range(spec.bins_per_drug[0]..=spec.bins_per_drug[1]);
        for _ in 0..count {
            let position = free.next().expect("cell count checked by validate");
            bins.push(Bin {
                id: BinId(next_bin),
                position,
                drug: DrugId(drug),
                stock: rng.random_range(spec.stock[0]..=spec.stock[1]),
            });
            next_bin += 1;
        }
    }
    let inventory = Inventory::new(bins)?;

    let drugs: Vec<(DrugId, f64)> = (1..=spec.drug_count)
        .map(|d| {
            let weight = match spec.popularity {
                Popularity::Uniform => 1.0,
                Popularity::Zipf { s } => f64::from(d).powf(-s),
            };
            (DrugId(d), weight)
        })
        .collect();

    let mut orders = Vec::with_capacity(spec.order_count as usize);
    for n in 0..spec.order_count {
        let k = rng.random_range(spec.lines_per_order[0]..=spec.lines_per_order[1]) as usize;
        let mut chosen: Vec<DrugId> = drugs
            .choose_multiple_weighted(&mut rng, k, |d| d.1)
            .map_err(|e| CatalogError::Spec(e.to_string()))?
            .map(|d| d.0)
            .collect();
        chosen.shuffle(&mut rng);
        let lines = chosen
            .into_iter()
            .map(|drug| OrderLine {
                drug,
                dosage: rng.random_range(spec.dosage[0]..=spec.dosage[1]),
            })
            .collect();
        orders.push(Order::new(OrderId(n + 1), u64::from(n), lines)?);
    }
    Ok((inventory, orders))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{write_inventory, write_orders};

    fn small() -> GeneratorSpec {
        GeneratorSpec {
            rows: 6,
            cols: 6,
            sides: 2,
            drug_count: 20,
            bins_per_drug: [1, 3],
            stock: [20, 40],
            order_count: 30,
            lines_per_order: [2, 5],
            popularity: Popularity::Uniform,
            dosage: [1, 5],
            reserved: vec![GridPosition::new(1, 3, 3)],
        }
    }

    fn bytes(inv: &Inventory, orders: &[Order]) -> (Vec<u8>, Vec<u8>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_inventory(&mut a, inv).unwrap();
        write_orders(&mut b, orders).unwrap();
        (a, b)
    }

    #[test]
    fn zero_orders() {
        let spec = GeneratorSpec {
            order_count: 0,
            ..small()
        };
        let (inv, orders) = generate_stream(&spec, 1).unwrap();
        assert!(orders.is_empty());
        assert!(inv.len() >= 20);
    }

    #[test]
    fn same_seed_same_bytes() {
        let (i1, o1) = generate_stream(&small(), 42).unwrap();
        let (i2, o2) = generate_stream(&small(), 42).unwrap();
        assert_eq!(bytes(&i1, &o1), bytes(&i2, &o2));
        let (i3, o3) = generate_stream(&small(), 43).unwrap();
        assert_ne!(bytes(&i1, &o1), bytes(&i3, &o3));
    }

    #[test]
    fn generated_data_respects_spec() {
        let spec = small();
        let (inv, orders) = generate_stream(&spec, 7).unwrap();
        assert!(inv
            .bins()
            .iter()
            .all(|b| b.position != GridPosition::new(1, 3, 3)));
        for order in &orders {
            assert!((2..=5).contains(&order.len()));
            for line in &order.lines {
                assert!(inv.bins_of(line.drug).any(|b| b.stock >= line.dosage));
            }
        }
    }

    #[test]
    fn unsatisfiable_specs() {
        let too_many_drugs = GeneratorSpec {
            drug_count: 100,
            ..small()
        };
        assert!(matches!(
            generate_stream(&too_many_drugs, 0),
            Err(CatalogError::Spec(_))
        ));
        let wide_orders = GeneratorSpec {
            lines_per_order: [2, 25],
            ..small()
        };
        assert!(generate_stream(&wide_orders, 0).is_err());
        let thin_stock = GeneratorSpec {
            stock: [2, 40],
            ..small()
        };
        assert!(generate_stream(&thin_stock, 0).is_err());
        let single_line = GeneratorSpec {
            lines_per_order: [1, 3],
            ..small()
        };
        assert!(generate_stream(&single_line, 0).is_err());
    }

    #[test]
    fn benchmark_spec_is_valid() {
        GeneratorSpec::benchmark().validate().unwrap();
    }
}
