//! Optimal channel-access policies for cognitive secondary users coexisting
//! with a primary link that runs Type-I HARQ retransmissions.
//!
//! Secondary receivers that decode the ongoing primary message cancel it
//! from later retransmissions, which makes access progressively cheaper over
//! a message's lifetime. The crate models the network as a constrained
//! average-reward decision process over `(ARQ slot, knowledge state)`,
//! computes exact centralized policies by occupation-measure linear
//! programming, computes decentralized per-user policies by best-response
//! iteration to an equilibrium, and validates everything with a slot-level
//! Monte Carlo simulator.
//!
//! Interchangeable end-to-end designs (centralized, decentralized, bounds,
//! no-cancelation baselines) live behind the [`scheme::AccessScheme`] trait
//! and are selected by name at runtime.

pub mod channel;
pub mod centralized;
pub mod config;
pub mod decentralized;
pub mod error;
pub mod lp;
pub mod markov;
pub mod policy_io;
pub mod scheme;
pub mod simulator;
pub mod validate;

pub use config::{RateGrid, ScenarioConfig};
pub use error::{Error, Result};
