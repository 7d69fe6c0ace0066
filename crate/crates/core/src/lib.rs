//! Slot-driven system-level simulator for flexible DL/UL carrier
//! aggregation: carrier association rules, cell activation, SSB-less SCell
//! eligibility, PDCCH blocking with multi-cell DCIs, UL transmitter
//! switching across up to four bands, and base-station energy accounting.

pub mod ids;
pub mod spectrum;
pub mod cell_config;
pub mod energy;
pub mod experiments;
pub mod pdcch;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod ssbless;
pub mod traffic;
pub mod tx_switching;
