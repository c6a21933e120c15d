//! Terrain-aware planning of low-altitude surveillance sensor networks:
//! terrain and line-of-sight modelling, corridor flight schedules, the
//! detection-probability tensor, an exact integer-programming solver, and
//! the reliability, robustness and resiliency planners built on it.

pub mod artifacts;
pub mod config;
pub mod detection;
pub mod los;
pub mod reliability;
pub mod resiliency;
pub mod robustness;
pub mod schedule;
pub mod solver;
pub mod terrain;
