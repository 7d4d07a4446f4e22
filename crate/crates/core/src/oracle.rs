//! Brute-force linearizability, straight from the definition.
//!
//! For every subset of the pending events, the oracle searches the linear
//! extensions of real-time precedence over the complete events plus that
//! subset, replaying the snapshot object as it goes. The search places one
//! minimal event at a time and abandons a branch as soon as a scan disagrees
//! with the replayed state. Same-process updates are totally ordered, so the
//! replayed state depends only on which events have been placed; dead sets are
//! memoized.
//!
//! This module shares nothing with the assignment search beyond the trace model.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::linearize::TotalOrder;
use crate::trace::{EventId, Execution, Value};

pub const DEFAULT_BOUND: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Maximum number of non-initial events.
    pub bound: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { bound: DEFAULT_BOUND }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("execution has {events} non-initial events; the oracle bound is {bound}")]
    BoundExceeded { events: usize, bound: usize },
}

/// A chosen event set and its order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearizationCandidate {
    /// Complete events plus the pending events the linearization keeps, in execution order.
    pub chosen: Vec<EventId>,
    pub order: TotalOrder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Linearizable(LinearizationCandidate),
    NotLinearizable,
}

impl OracleVerdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, OracleVerdict::Linearizable(_))
    }
}

impl fmt::Display for OracleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleVerdict::Linearizable(c) => write!(f, "LINEARIZABLE\n{}", c.order),
            OracleVerdict::NotLinearizable => writeln!(f, "NOT_LINEARIZABLE"),
        }
    }
}

struct Extensions<'a> {
    exec: &'a Execution,
    /// Event indices taking part in this attempt.
    members: Vec<usize>,
    /// `preds[x]`: bitmask over `members` of events that precede member `x`.
    preds: Vec<u64>,
    dead: HashSet<u64>,
    order: Vec<usize>,
}

impl Extensions<'_> {
    fn state(&self, placed: u64) -> Vec<Option<Value>> {
        let mut current: Vec<(i64, Option<Value>)> = vec![(i64::MIN, None); self.exec.n()];
        for (x, &ev) in self.members.iter().enumerate() {
            let e = self.exec.event(ev);
            if placed & (1 << x) != 0 && e.is_update() && e.start > current[e.pid].0 {
                current[e.pid] = (e.start, e.arg());
            }
        }
        current.into_iter().map(|(_, v)| v).collect()
    }

    fn extend(&mut self, placed: u64) -> bool {
        let m = self.members.len();
        if placed.count_ones() as usize == m {
            return true;
        }
        if self.dead.contains(&placed) {
            return false;
        }
        let state = self.state(placed);
        for x in 0..m {
            if placed & (1 << x) != 0 || self.preds[x] & !placed != 0 {
                continue;
            }
            let e = self.exec.event(self.members[x]);
            if let Some(ret) = e.ret() {
                if ret.len() != state.len() || ret.iter().zip(&state).any(|(r, s)| Some(*r) != *s) {
                    continue;
                }
            }
            self.order.push(self.members[x]);
            if self.extend(placed | (1 << x)) {
                return true;
            }
            self.order.pop();
        }
        self.dead.insert(placed);
        false
    }
}

/// Decides linearizability by exhaustive search.
///
/// Pending subsets are tried in increasing bitmask order (bit `k` is the `k`-th
/// pending event by execution order) and the first order found is returned.
pub fn oracle_linearizable(exec: &Execution, config: &OracleConfig) -> Result<OracleVerdict, OracleError> {
    let events = exec.operations().len();
    let total = exec.events().len();
    if events > config.bound || total > 64 {
        return Err(OracleError::BoundExceeded { events, bound: config.bound.min(64 - exec.n()) });
    }
    let complete: Vec<usize> = (0..total).filter(|&x| exec.event(x).is_complete()).collect();
    let pending: Vec<usize> = (0..total).filter(|&x| !exec.event(x).is_complete()).collect();

    for subset in 0u64..(1 << pending.len()) {
        let mut members = complete.clone();
        members.extend(pending.iter().enumerate().filter(|(k, _)| subset & (1 << k) != 0).map(|(_, &p)| p));
        members.sort_unstable();
        let preds = members
            .iter()
            .map(|&b| {
                members
                    .iter()
                    .enumerate()
                    .filter(|&(_, &a)| exec.precedes(a, b))
                    .fold(0u64, |mask, (x, _)| mask | (1 << x))
            })
            .collect();
        let mut search = Extensions { exec, members, preds, dead: HashSet::new(), order: Vec::new() };
        if search.extend(0) {
            let id = |x: &usize| exec.event(*x).id;
            return Ok(OracleVerdict::Linearizable(LinearizationCandidate {
                chosen: search.members.iter().map(id).collect(),
                order: TotalOrder { sequence: search.order.iter().map(id).collect() },
            }));
        }
    }
    Ok(OracleVerdict::NotLinearizable)
}
