//! Lexical-ratio portfolio diversification toolkit.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod backtest;
pub mod cli;
pub mod corpus;
pub mod dates;
pub mod dependence;
pub mod error;
pub mod lexical;
pub mod market_data;
pub mod report;
pub mod risk_metrics;
pub mod synthetic;

pub use error::{Error, Result};
