pub mod aggregate;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod ivw;
pub mod kde;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod seed;
pub mod sim;
pub mod stats;
