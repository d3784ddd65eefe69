//! One module per CLI command; each writes its outputs and returns the computed results.

pub mod common;
pub mod gc;
pub mod landscape;
pub mod sweeps;
pub mod trace;
pub mod train;

pub use gc::cmd_gc_prob;
pub use landscape::cmd_landscape_audit;
pub use sweeps::{cmd_norm_hist, cmd_sweep_angle, cmd_sweep_width};
pub use trace::cmd_trace_dynamics;
pub use train::cmd_train;
