//! Dual-engine toolkit for a two-relay energy-harvesting cooperative network
//! with opportunistic routing and maximal-ratio combining at the destination.
//!
//! The crate has two halves that mirror each other:
//!
//! * an analytic pipeline ([`chain`], [`closed_form`]) that computes the
//!   stationary transmitter-candidate distribution, the limiting energy-buffer
//!   PDFs, outage probability, throughput and per-packet timeslot cost from
//!   discretized Markov chains and Lambert-W closed forms, and
//! * a seeded slot simulator ([`montecarlo`]) that executes the routing
//!   protocol ([`protocol`]) and buffer dynamics ([`energy`]) exactly, so that
//!   every analytic quantity has an empirical counterpart.
//!
//! All SNRs are linear (never dB) internally, energies are in millijoules and
//! powers are converted dBm -> milliwatts at the [`scenario`] boundary.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded use.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod chain;
pub mod closed_form;
pub mod energy;
pub mod fading;
pub mod montecarlo;
pub mod protocol;
pub mod scenario;

pub use chain::{FixedPointResult, ScalarSet, Stm, TcDist};
pub use closed_form::BufferLaw;
pub use fading::BinPdf;
pub use montecarlo::{SimConfig, SimMode, SimStats};
pub use protocol::{SlotDraws, SlotOutcome, TcState, Transmitter};
pub use scenario::{DerivedRates, EnergyParams, NodeLayout, RadioParams, Scenario};
