//! Rack coordinates and crane travel times.
//!
//! The arm travels horizontally and vertically at the same time, so a leg
//! between two cells costs the larger of the two axis times (Chebyshev
//! metric scaled per axis). The rack side is carried as metadata only: the
//! arm runs on a middle track and reaches both sides from the same `(row, col)`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("position {0} outside a {1}x{2} rack")]
    OutOfBounds(GridPosition, u32, u32),
    #[error("invalid rack configuration: {0}")]
    InvalidRack(String),
}

/// A cell on one side of the rack. Rows and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPosition {
    pub side: u8,
    pub row: u32,
    pub col: u32,
}

impl GridPosition {
    pub const fn new(side: u8, row: u32, col: u32) -> Self {
        Self { side, row, col }
    }
}

impl fmt::Display for GridPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(side {}, row {}, col {})", self.side, self.row, self.col)
    }
}

/// Physical rack description: grid size, cell dimensions, arm speed and
/// the I/O points. One I/O point means the sequential single-point layout,
/// two I/O points the overlapped dual-point layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RackConfig {
    pub rows: u32,
    pub cols: u32,
    /// Cell height in meters.
    pub cell_height: f64,
    /// Cell length in meters.
    pub cell_length: f64,
    /// Arm speed in meters per second.
    pub speed: f64,
    pub io_points: Vec<GridPosition>,
}

impl RackConfig {
    pub fn new(
        rows: u32,
        cols: u32,
        cell_height: f64,
        cell_length: f64,
        speed: f64,
        io_points: Vec<GridPosition>,
    ) -> Result<Self, GeometryError> {
        let rack = Self {
            rows,
            cols,
            cell_height,
            cell_length,
            speed,
            io_points,
        };
        rack.validate()?;
        Ok(rack)
    }

    /// The 17x17 double-sided rack with I/O points at (10,9) and (10,10).
    pub fn paper_preset() -> Self {
        Self {
            rows: 17,
            cols: 17,
            cell_height: 0.275,
            cell_length: 0.168,
            speed: 0.1486,
            io_points: vec![GridPosition::new(1, 10, 9), GridPosition::new(1, 10, 10)],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(GeometryError::InvalidRack(
                "rows and cols must be at least 1".into(),
            ));
        }
        for (name, value) in [
            ("cell_height", self.cell_height),
            ("cell_length", self.cell_length),
            ("speed", self.speed),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GeometryError::InvalidRack(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(1..=2).contains(&self.io_points.len()) {
            return Err(GeometryError::InvalidRack(format!(
                "expected 1 or 2 I/O points, got {}",
                self.io_points.len()
            )));
        }
        for io in &self.io_points {
            self.check(io)?;
        }
        Ok(())
    }

    /// The rack restricted to its first I/O point.
    pub fn single_io(&self) -> Self {
        Self {
            io_points: self.io_points[..1].to_vec(),
            ..self.clone()
        }
    }

    pub fn contains(&self, pos: &GridPosition) -> bool {
        (1..=2).contains(&pos.side)
            && (1..=self.rows).contains(&pos.row)
            && (1..=self.cols).contains(&pos.col)
    }

    pub fn check(&self, pos: &GridPosition) -> Result<(), GeometryError> {
        if self.contains(pos) {
            Ok(())
        } else {
            Err(GeometryError::OutOfBounds(*pos, self.rows, self.cols))
        }
    }

    pub fn io_point(&self, index: usize) -> GridPosition {
        self.io_points[index]
    }

    /// Travel time between two cells, without bounds checks.
    #[inline]
    pub(crate) fn leg_unchecked(&self, a: &GridPosition, b: &GridPosition) -> f64 {
        let vertical = f64::from(a.row.abs_diff(b.row)) * self.cell_height;
        let horizontal = f64::from(a.col.abs_diff(b.col)) * self.cell_length;
        vertical.max(horizontal) / self.speed
    }

    /// Dual-command route time `o -> i -> j -> o`, without bounds checks.
    #[inline]
    pub(crate) fn dual_command_unchecked(
        &self,
        o: &GridPosition,
        i: &GridPosition,
        j: &GridPosition,
    ) -> f64 {
        self.leg_unchecked(o, i) + self.leg_unchecked(i, j) + self.leg_unchecked(j, o)
    }
}

/// Single-leg travel time in seconds.
pub fn leg_time(a: &GridPosition, b: &GridPosition, cfg: &RackConfig) -> Result<f64, GeometryError> {
    cfg.check(a)?;
    cfg.check(b)?;
    Ok(cfg.leg_unchecked(a, b))
}

/// Time of the dual-command route `o -> i -> j -> o`: return a bin to `i`,
/// then fetch the bin at `j` back to the I/O point `o`.
pub fn dual_command_time(
    o: &GridPosition,
    i: &GridPosition,
    j: &GridPosition,
    cfg: &RackConfig,
) -> Result<f64, GeometryError> {
    cfg.check(o)?;
    cfg.check(i)?;
    cfg.check(j)?;
    Ok(cfg.dual_command_unchecked(o, i, j))
}

/// Single-command time `o -> i -> o`.
pub fn single_command_time(
    o: &GridPosition,
    i: &GridPosition,
    cfg: &RackConfig,
) -> Result<f64, GeometryError> {
    Ok(2.0 * leg_time(o, i, cfg)?)
}
