pub mod diffcore;
pub mod nn;
pub mod plants;
pub mod tasks;
pub mod losses;
pub mod metrics;
pub mod trainer;
pub mod expcli;
