//! CSV ingestion and export for inventories and order streams.

use super::{Bin, BinId, CatalogError, DrugId, Inventory, Order, OrderId, OrderLine};
use crate::geometry::{GridPosition, RackConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

pub const INVENTORY_HEADER: [&str; 6] = ["bin_id", "side", "row", "col", "drug_id", "stock"];
pub const ORDERS_HEADER: [&str; 5] = ["order_id", "arrival_index", "line_index", "drug_id", "dosage"];

#[derive(Debug, Serialize, Deserialize)]
struct InventoryRow {
    bin_id: u32,
    side: u8,
    row: u32,
    col: u32,
    drug_id: u32,
    stock: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct OrderRow {
    order_id: u32,
    arrival_index: u64,
    line_index: u32,
    drug_id: u32,
    dosage: u32,
}

fn parse_error(file: &str, line: u64, message: impl Into<String>) -> CatalogError {
    CatalogError::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads rows of `T`, checking the header and attaching line numbers.
fn read_rows<T, R>(reader: R, file: &str, header: &[&str]) -> Result<Vec<(u64, T)>, CatalogError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| parse_error(file, 1, e.to_string()))?
        .clone();
    if !headers.is_empty() && headers.iter().ne(header.iter().copied()) {
        return Err(parse_error(
            file,
            1,
            format!("expected header `{}`", header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(file, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_error(file, line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

/// Parses an inventory CSV and validates it against the rack bounds.
pub fn read_inventory<R: Read>(
    reader: R,
    file: &str,
    rack: &RackConfig,
) -> Result<Inventory, CatalogError> {
    let rows: Vec<(u64, InventoryRow)> = read_rows(reader, file, &INVENTORY_HEADER)?;
    let mut bins = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let position = GridPosition::new(row.side, row.row, row.col);
        rack.check(&position)
            .map_err(|e| parse_error(file, line, format!("bin {}: {e}", row.bin_id)))?;
        bins.push(Bin {
            id: BinId(row.bin_id),
            position,
            drug: DrugId(row.drug_id),
            stock: row.stock,
        });
    }
    Inventory::new(bins).map_err(|e| CatalogError::Validation {
        file: file.to_string(),
        message: e.to_string(),
    })
}

/// Parses an orders CSV into orders sorted by arrival index. Lines of an
/// order are sequenced by `line_index`.
pub fn read_orders<R: Read>(reader: R, file: &str) -> Result<Vec<Order>, CatalogError> {
    let rows: Vec<(u64, OrderRow)> = read_rows(reader, file, &ORDERS_HEADER)?;
    // order_id -> (first line, arrival, lines keyed by line_index)
    let mut grouped: BTreeMap<u32, (u64, u64, BTreeMap<u32, OrderLine>)> = BTreeMap::new();
    for (line, row) in rows {
        let entry = grouped
            .entry(row.order_id)
            .or_insert_with(|| (line, row.arrival_index, BTreeMap::new()));
        if entry.1 != row.arrival_index {
            return Err(parse_error(
                file,
                line,
                format!("order {} has conflicting arrival indices", row.order_id),
            ));
        }
        let previous = entry.2.insert(
            row.line_index,
            OrderLine {
                drug: DrugId(row.drug_id),
                dosage: row.dosage,
            },
        );
        if previous.is_some() {
            return Err(parse_error(
                file,
                line,
                format!("order {} repeats line {}", row.order_id, row.line_index),
            ));
        }
    }
    let mut orders = Vec::with_capacity(grouped.len());
    for (id, (line, arrival, lines)) in grouped {
        let order = Order {
            id: OrderId(id),
            arrival_index: arrival,
            lines: lines.into_values().collect(),
        };
        order
            .validate()
            .map_err(|e| parse_error(file, line, e.to_string()))?;
        orders.push(order);
    }
    orders.sort_by_key(|o| (o.arrival_index, o.id));
    Ok(orders)
}

/// Loads an inventory and an order stream, checking that every ordered drug
/// exists in the inventory.
pub fn load_dataset(
    inventory_file: &Path,
    orders_file: &Path,
    rack: &RackConfig,
) -> Result<(Inventory, Vec<Order>), CatalogError> {
    let inv_name = inventory_file.display().to_string();
    let ord_name = orders_file.display().to_string();
    let inventory = read_inventory(File::open(inventory_file)?, &inv_name, rack)?;
    let orders = read_orders(File::open(orders_file)?, &ord_name)?;
    for order in &orders {
        for line in &order.lines {
            if !inventory.contains_drug(line.drug) {
                return Err(CatalogError::Validation {
                    file: ord_name,
                    message: CatalogError::UnknownDrug {
                        order: order.id,
                        drug: line.drug,
                    }
                    .to_string(),
                });
            }
        }
    }
    Ok((inventory, orders))
}

pub fn write_inventory<W: Write>(writer: W, inventory: &Inventory) -> Result<(), CatalogError> {
    let mut csv = csv::Writer::from_writer(writer);
    for bin in inventory.bins() {
        csv.serialize(InventoryRow {
            bin_id: bin.id.0,
            side: bin.position.side,
            row: bin.position.row,
            col: bin.position.col,
            drug_id: bin.drug.0,
            stock: bin.stock,
        })
        .map_err(csv_io)?;
    }
    if inventory.is_empty() {
        csv.write_record(INVENTORY_HEADER).map_err(csv_io)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_orders<W: Write>(writer: W, orders: &[Order]) -> Result<(), CatalogError> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut wrote = false;
    for order in orders {
        for (idx, line) in order.lines.iter().enumerate() {
            csv.serialize(OrderRow {
                order_id: order.id.0,
                arrival_index: order.arrival_index,
                line_index: idx as u32,
                drug_id: line.drug.0,
                dosage: line.dosage,
            })
            .map_err(csv_io)?;
            wrote = true;
        }
    }
    if !wrote {
        csv.write_record(ORDERS_HEADER).map_err(csv_io)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CatalogError {
    CatalogError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rack() -> RackConfig {
        RackConfig::paper_preset()
    }

    #[test]
    fn empty_orders_file() {
        assert!(read_orders("".as_bytes(), "o.csv").unwrap().is_empty());
        let header_only = "order_id,arrival_index,line_index,drug_id,dosage\n";
        assert!(read_orders(header_only.as_bytes(), "o.csv").unwrap().is_empty());
    }

    #[test]
    fn row_out_of_bounds_names_the_line() {
        let text = "bin_id,side,row,col,drug_id,stock\n1,1,1,1,1,5\n2,1,18,1,2,5\n";
        match read_inventory(text.as_bytes(), "inv.csv", &rack()) {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "bin_id,side,row,col,drug_id,stock\n1,1,1,1,1,5\n2,1,x,1,2,5\n";
        let err = read_inventory(text.as_bytes(), "inv.csv", &rack()).unwrap_err();
        assert!(err.to_string().starts_with("inv.csv:3:"), "{err}");
    }

    #[test]
    fn comment_lines_are_skipped() {
        let text = "# generated\nbin_id,side,row,col,drug_id,stock\n# note\n1,1,2,3,4,50\n";
        let inv = read_inventory(text.as_bytes(), "inv.csv", &rack()).unwrap();
        assert_eq!(inv.len(), 1);
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "id,side,row,col,drug,stock\n1,1,1,1,1,5\n";
        assert!(read_inventory(text.as_bytes(), "inv.csv", &rack()).is_err());
    }

    #[test]
    fn duplicate_cell_rejected() {
        let text = "bin_id,side,row,col,drug_id,stock\n1,1,1,1,1,5\n2,1,1,1,2,5\n";
        assert!(matches!(
            read_inventory(text.as_bytes(), "inv.csv", &rack()),
            Err(CatalogError::Validation { .. })
        ));
    }

    #[test]
    fn orders_grouped_and_sequenced() {
        let text = "order_id,arrival_index,line_index,drug_id,dosage\n\
                    7,1,1,3,2\n7,1,0,5,1\n4,0,0,1,1\n4,0,1,2,1\n";
        let orders = read_orders(text.as_bytes(), "o.csv").unwrap();
        assert_eq!(orders.len(), 2);
        assert_eq!(orders[0].id, OrderId(4));
        assert_eq!(orders[1].lines[0].drug, DrugId(5));
        assert_eq!(orders[1].lines[1].drug, DrugId(3));
    }

    #[test]
    fn single_line_order_rejected() {
        let text = "order_id,arrival_index,line_index,drug_id,dosage\n1,0,0,1,1\n";
        assert!(read_orders(text.as_bytes(), "o.csv").is_err());
    }

    #[test]
    fn unknown_drug_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let inv = dir.path().join("inv.csv");
        let ord = dir.path().join("ord.csv");
        std::fs::write(&inv, "bin_id,side,row,col,drug_id,stock\n1,1,1,1,1,5\n2,1,1,2,2,5\n").unwrap();
        std::fs::write(
            &ord,
            "order_id,arrival_index,line_index,drug_id,dosage\n1,0,0,1,1\n1,0,1,9,1\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&inv, &ord, &rack()),
            Err(CatalogError::Validation { .. })
        ));
    }
}
