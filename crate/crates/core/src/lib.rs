pub mod generator;
pub mod judge;
pub mod model;
pub mod oracle;
pub mod provider;
pub mod travel;
pub mod harness;
pub mod metrics;
