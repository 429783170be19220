//! Secure resource allocation for PD-NOMA heterogeneous networks with
//! non-colluding eavesdroppers.
//!
//! The crate generates network instances, evaluates secrecy rates, and solves
//! the joint power and subcarrier allocation problem by alternating a
//! linearized convex power step with a discrete direct search over
//! assignments. A polyblock solver provides global optima on small instances,
//! and an experiment layer runs Monte Carlo sweeps.

pub mod asm;
pub mod convex;
pub mod error;
pub mod experiment;
#[doc(hidden)]
pub mod fixtures;
pub mod network;
pub mod polyblock;
pub mod power;
pub mod rates;
pub mod robust;
pub mod subcarrier;

pub use error::{Error, Result};
pub use network::{generate, NetworkConfig, NetworkInstance};
pub use rates::{Assignment, Coord, EaveDecoding, Gains, PowerAllocation, RateModel, SlackVars};
