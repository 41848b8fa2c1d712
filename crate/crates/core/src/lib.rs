pub mod executor;
pub mod features;
pub mod kb;
pub mod mock;
pub mod problem;
pub mod scheduler;
pub mod scoring;
pub mod simulation;
