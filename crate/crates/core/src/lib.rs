//! Limit order book reconstruction, arrival-rate extraction and
//! distribution fitting.

pub mod book;
pub mod cli;
pub mod dist;
pub mod feed;
pub mod rates;
pub mod stats;
pub mod synth;
