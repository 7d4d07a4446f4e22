//! Linearizability checking for snapshot objects.
//!
//! An execution of a snapshot object is linearizable iff, for every process
//! `i`, scans can be mapped to `p_i`-updates by a function obeying six local
//! properties. [`alpha`] searches for and checks such functions,
//! [`linearize`] turns one into a linearization, and [`oracle`] decides the
//! same question by brute force. [`sim`] runs snapshot algorithms step by
//! step, and [`simple`] hunts for incorrect runs among executions that only
//! ever write 0 and 1.

pub mod alpha;
pub mod cli;
pub mod linearize;
pub mod oracle;
pub mod sim;
pub mod simple;
pub mod trace;

pub use alpha::{check_properties, search_alpha, AlphaAssignment, PropertyViolation};
pub use linearize::{build_linearization, check_sequential_spec, TotalOrder};
pub use oracle::{oracle_linearizable, OracleConfig, OracleVerdict};
pub use sim::{model_by_name, run, Algorithm, OpScript, Schedule};
pub use simple::{check_reduction, hunt, simple_scripts, walk_executions, Bounds, HuntConfig, HuntReport};
pub use trace::{parse_trace, serialize_trace, EventId, Execution, Value};
