//! Discrete-event simulation of shopping sessions against a multi-tier
//! server farm: response times, utilization, session indicators and the
//! critical arrival rate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod config;
pub mod export;
pub mod farm;
pub mod kernel;
pub mod metrics;
pub mod planner;
pub mod reference;
pub mod sim;
pub mod workload;
