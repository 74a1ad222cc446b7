//! Simulation and analysis of periodic-lattice jump processes: the Arrhenius crystal
//! surface, zero-range and simple exclusion, with closed-form local-equilibrium
//! families and the diagnostics that compare them against ensembles of trajectories.

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod estimators;
pub mod gibbs;
pub mod io;
pub mod kmc;
pub mod lattice;
pub mod observable;
pub mod processes;
pub mod rate_index;
pub mod runner;
pub mod zero_range;
