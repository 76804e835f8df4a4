//! Behavioural circuit simulation for a dual-range flipped-voltage-follower
//! LDO: MNA netlists, DC/AC/loop-gain/transient engines, the regulator
//! model and its figures of merit.

pub mod ac;
pub mod dc;
pub mod error;
pub mod kv;
pub mod ldo;
pub mod linalg;
pub mod metrics;
pub mod mna;
pub mod netlist;
pub mod report;
pub mod transient;
pub mod units;

pub use error::{Error, Result};
