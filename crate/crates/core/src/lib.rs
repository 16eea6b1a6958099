//! Drug retrieval sequencing for automated drug dispensing racks.
//!
//! The crate covers the rack travel-time model ([`geometry`]), the
//! pharmacist sorting-time model ([`stochastics`]), inventory and order data
//! ([`catalog`]), exact and baseline retrieval sequencing ([`sequencing`]),
//! and first-come-first-served stream simulation ([`simulator`]).

pub mod catalog;
pub mod geometry;
pub mod sequencing;
pub mod simulator;
pub mod stochastics;
