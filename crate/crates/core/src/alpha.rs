//! Correct-function witnesses for snapshot executions.
//!
//! An [`AlphaAssignment`] maps every complete scan `S` and process index `i` to
//! the `p_i`-update whose value `S` is claimed to return at entry `i`. An
//! execution is linearizable iff it admits an assignment with no
//! [`PropertyViolation`]; the six properties are:
//!
//! 1. `S` returns `val(alpha_i(S))` at entry `i`.
//! 2. `S` does not precede `alpha_i(S)`.
//! 3. No `p_i`-update lies strictly between `alpha_i(S)` and `S`.
//! 4. If `S1 < S2` then `alpha_i(S1) <= alpha_i(S2)`.
//! 5. No `p_i`-update lies strictly between `alpha_i(S)` and `alpha_j(S)`.
//! 6. `<_alpha` has no two-cycles, where `S1 <_alpha S2` iff some
//!    `alpha_i(S1) < alpha_i(S2)`.
//!
//! Here `<` is real-time precedence and `<=` is "equal or precedes".
//! Property 3 is checked for complete scans only, the domain of the assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::trace::{EventId, Execution};

/// Per-process maps from complete scans to update events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlphaAssignment {
    n: usize,
    map: BTreeMap<EventId, Vec<Option<EventId>>>,
}

impl AlphaAssignment {
    pub fn new(n: usize) -> Self {
        AlphaAssignment { n, map: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sets `alpha_i(scan) = update`. Panics if `i >= n`.
    pub fn set(&mut self, i: usize, scan: EventId, update: EventId) {
        assert!(i < self.n, "process index {i} out of range for n={}", self.n);
        self.map.entry(scan).or_insert_with(|| vec![None; self.n])[i] = Some(update);
    }

    pub fn get(&self, i: usize, scan: EventId) -> Option<EventId> {
        self.map.get(&scan)?.get(i).copied().flatten()
    }

    pub fn scans(&self) -> impl Iterator<Item = EventId> + '_ {
        self.map.keys().copied()
    }

    /// All `(i, scan, update)` entries, ordered by scan id then index.
    pub fn entries(&self) -> impl Iterator<Item = (usize, EventId, EventId)> + '_ {
        self.map.iter().flat_map(|(&s, row)| row.iter().enumerate().filter_map(move |(i, u)| u.map(|u| (i, s, u))))
    }

    /// Parses `alpha <i> <scan-id> <update-id>` lines; `#` starts a comment.
    pub fn parse(n: usize, text: &str) -> Result<Self, AlphaParseError> {
        let mut alpha = AlphaAssignment::new(n);
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| AlphaParseError { line: line_no, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [kw, i, scan, update] = fields[..] else {
                return Err(err("expected `alpha <i> <scan-id> <update-id>`".into()));
            };
            if kw != "alpha" {
                return Err(err(format!("unknown directive `{kw}`")));
            }
            let i: usize = i.parse().map_err(|_| err(format!("bad index `{i}`")))?;
            if i >= n {
                return Err(err(format!("index {i} out of range for n={n}")));
            }
            let scan = scan.parse().map_err(|e| err(format!("{e}")))?;
            let update = update.parse().map_err(|e| err(format!("{e}")))?;
            alpha.set(i, scan, update);
        }
        Ok(alpha)
    }
}

impl fmt::Display for AlphaAssignment {
    /// One `alpha <i> <scan-id> <update-id>` line per entry, grouped by index.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<_> = self.entries().collect();
        entries.sort();
        for (i, s, u) in entries {
            writeln!(f, "alpha {i} {s} {u}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("alpha file line {line}: {msg}")]
pub struct AlphaParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphaError {
    #[error("assignment is for {got} processes but the execution has {n}")]
    Arity { got: usize, n: usize },
    #[error("event {0} does not exist in the execution")]
    UnknownEvent(EventId),
    #[error("{0} is not a complete scan")]
    NotACompleteScan(EventId),
    #[error("alpha_{i}({scan}) = {update} is not an update of process {i}")]
    WrongTarget { i: usize, scan: EventId, update: EventId },
    #[error("alpha_{i}({scan}) is undefined")]
    Missing { i: usize, scan: EventId },
}

/// One failing instance of a property, with the events that witness it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PropertyViolation {
    pub property: u8,
    pub scan: EventId,
    pub scan2: Option<EventId>,
    pub i: usize,
    pub j: Option<usize>,
    pub update: Option<EventId>,
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{} scan={}", self.property, self.scan)?;
        if let Some(s2) = self.scan2 {
            write!(f, " scan2={s2}")?;
        }
        write!(f, " i={}", self.i)?;
        if let Some(j) = self.j {
            write!(f, " j={j}")?;
        }
        if let Some(u) = self.update {
            write!(f, " update={u}")?;
        }
        Ok(())
    }
}

/// An assignment resolved to event indices, rows ordered like `exec.complete_scans()`.
struct Resolved {
    scans: Vec<usize>,
    rows: Vec<Vec<usize>>,
}

fn resolve(exec: &Execution, alpha: &AlphaAssignment) -> Result<Resolved, AlphaError> {
    let n = exec.n();
    if alpha.n() != n {
        return Err(AlphaError::Arity { got: alpha.n(), n });
    }
    for s in alpha.scans() {
        let ev = exec.get(s).ok_or(AlphaError::UnknownEvent(s))?;
        if !(ev.is_scan() && ev.is_complete()) {
            return Err(AlphaError::NotACompleteScan(s));
        }
    }
    let scans = exec.complete_scans();
    let mut rows = Vec::with_capacity(scans.len());
    for &s in &scans {
        let sid = exec.event(s).id;
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let u = alpha.get(i, sid).ok_or(AlphaError::Missing { i, scan: sid })?;
            let idx = exec.index_of(u).ok_or(AlphaError::UnknownEvent(u))?;
            let ev = exec.event(idx);
            if !ev.is_update() || ev.pid != i {
                return Err(AlphaError::WrongTarget { i, scan: sid, update: u });
            }
            row.push(idx);
        }
        rows.push(row);
    }
    Ok(Resolved { scans, rows })
}

fn le(exec: &Execution, a: usize, b: usize) -> bool {
    a == b || exec.precedes(a, b)
}

/// `alpha_i(S1) < alpha_i(S2)` for some `i`.
pub fn alpha_less(exec: &Execution, alpha: &AlphaAssignment, s1: EventId, s2: EventId) -> bool {
    (0..exec.n()).any(|i| match (alpha.get(i, s1), alpha.get(i, s2)) {
        (Some(a), Some(b)) => match (exec.index_of(a), exec.index_of(b)) {
            (Some(a), Some(b)) => exec.precedes(a, b),
            _ => false,
        },
        _ => false,
    })
}

/// Lists every violated property instance, ordered by property then scan start.
///
/// An empty result means the assignment is correct.
pub fn check_properties(exec: &Execution, alpha: &AlphaAssignment) -> Result<Vec<PropertyViolation>, AlphaError> {
    let r = resolve(exec, alpha)?;
    let n = exec.n();
    let id = |idx: usize| exec.event(idx).id;
    let mut out = Vec::new();
    let v = |property: u8, scan: usize, scan2: Option<usize>, i: usize, j: Option<usize>, update: Option<usize>| {
        PropertyViolation { property, scan: id(scan), scan2: scan2.map(id), i, j, update: update.map(id) }
    };

    for (row, &s) in r.rows.iter().zip(&r.scans) {
        let ret = exec.event(s).ret().unwrap_or(&[]);
        for (i, &a) in row.iter().enumerate() {
            if ret.get(i) != exec.event(a).arg().as_ref() {
                out.push(v(1, s, None, i, None, Some(a)));
            }
            if exec.precedes(s, a) {
                out.push(v(2, s, None, i, None, Some(a)));
            }
            for u in exec.updates_of(i) {
                if exec.precedes(a, u) && exec.precedes(u, s) {
                    out.push(v(3, s, None, i, None, Some(u)));
                }
            }
            for (j, &b) in row.iter().enumerate() {
                if j == i {
                    continue;
                }
                for u in exec.updates_of(i) {
                    if exec.precedes(a, u) && exec.precedes(u, b) {
                        out.push(v(5, s, None, i, Some(j), Some(u)));
                    }
                }
            }
        }
    }

    for (x, (row1, &s1)) in r.rows.iter().zip(&r.scans).enumerate() {
        for (row2, &s2) in r.rows.iter().zip(&r.scans).skip(x + 1) {
            for (first, second, ra, rb) in [(s1, s2, row1, row2), (s2, s1, row2, row1)] {
                if exec.precedes(first, second) {
                    for i in 0..n {
                        if !le(exec, ra[i], rb[i]) {
                            out.push(v(4, first, Some(second), i, None, None));
                        }
                    }
                }
            }
            let fwd = (0..n).find(|&i| exec.precedes(row1[i], row2[i]));
            let back = (0..n).find(|&j| exec.precedes(row2[j], row1[j]));
            if let (Some(i), Some(j)) = (fwd, back) {
                out.push(v(6, s1, Some(s2), i, Some(j), None));
            }
        }
    }

    let start = |e: Option<EventId>| e.and_then(|e| exec.get(e)).map(|e| (e.start, e.pid));
    out.sort_by_key(|p| (p.property, start(Some(p.scan)), start(p.scan2), p.i, p.j, start(p.update)));
    Ok(out)
}

impl PropertyViolation {
    /// Re-evaluates only this instance against `exec` and `alpha`; true iff it still fails.
    pub fn replay(&self, exec: &Execution, alpha: &AlphaAssignment) -> bool {
        let idx = |e: EventId| exec.index_of(e);
        let Some(s) = idx(self.scan) else { return false };
        let a = |i: usize, scan: EventId| alpha.get(i, scan).and_then(idx);
        let i = self.i;
        match self.property {
            1 => match (a(i, self.scan), exec.event(s).ret()) {
                (Some(u), Some(ret)) => ret.get(i) != exec.event(u).arg().as_ref(),
                _ => false,
            },
            2 => a(i, self.scan).is_some_and(|u| exec.precedes(s, u)),
            3 => match (a(i, self.scan), self.update.and_then(idx)) {
                (Some(au), Some(u)) => {
                    exec.event(u).pid == i && exec.event(u).is_update() && exec.precedes(au, u) && exec.precedes(u, s)
                }
                _ => false,
            },
            4 => {
                let Some(s2) = self.scan2.and_then(idx) else { return false };
                match (a(i, self.scan), a(i, exec.event(s2).id)) {
                    (Some(x), Some(y)) => exec.precedes(s, s2) && !le(exec, x, y),
                    _ => false,
                }
            }
            5 => {
                let Some(j) = self.j else { return false };
                match (a(i, self.scan), a(j, self.scan), self.update.and_then(idx)) {
                    (Some(ai), Some(aj), Some(u)) => {
                        exec.event(u).pid == i
                            && exec.event(u).is_update()
                            && exec.precedes(ai, u)
                            && exec.precedes(u, aj)
                    }
                    _ => false,
                }
            }
            6 => {
                let (Some(s2), Some(j)) = (self.scan2, self.j) else { return false };
                let less = |k: usize, x: EventId, y: EventId| match (a(k, x), a(k, y)) {
                    (Some(p), Some(q)) => exec.precedes(p, q),
                    _ => false,
                };
                less(i, self.scan, s2) && less(j, s2, self.scan)
            }
            _ => false,
        }
    }
}

/// Which properties the backtracking search enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enforce {
    /// Property 1 only: every value-consistent assignment.
    ValuesOnly,
    /// All six properties.
    All,
}

struct Search<'a> {
    exec: &'a Execution,
    scans: Vec<usize>,
    /// `cands[scan_pos * n + i]`: candidate updates for that slot, by start.
    cands: Vec<Vec<usize>>,
    assign: Vec<usize>,
    enforce: Enforce,
}

const UNSET: usize = usize::MAX;

impl<'a> Search<'a> {
    fn new(exec: &'a Execution, enforce: Enforce) -> Self {
        let n = exec.n();
        let scans = exec.complete_scans();
        let mut cands = Vec::with_capacity(scans.len() * n);
        for &s in &scans {
            let ret = exec.event(s).ret().unwrap_or(&[]);
            for i in 0..n {
                let want = ret.get(i).copied();
                let c: Vec<usize> = exec
                    .updates_of(i)
                    .filter(|&u| exec.event(u).arg() == want)
                    .filter(|&u| {
                        enforce == Enforce::ValuesOnly
                            || (!exec.precedes(s, u)
                                && !exec.updates_of(i).any(|w| exec.precedes(u, w) && exec.precedes(w, s)))
                    })
                    .collect();
                cands.push(c);
            }
        }
        let slots = cands.len();
        Search { exec, scans, cands, assign: vec![UNSET; slots], enforce }
    }

    /// Checks properties 4-6 for slot `(sp, i)` against every assigned slot.
    fn consistent(&self, sp: usize, i: usize) -> bool {
        let exec = self.exec;
        let n = exec.n();
        let at = |p: usize, k: usize| self.assign[p * n + k];
        let a = at(sp, i);
        for j in 0..n {
            let b = at(sp, j);
            if j == i || b == UNSET {
                continue;
            }
            let between = |lo: usize, hi: usize, pid: usize| {
                exec.updates_of(pid).any(|u| exec.precedes(lo, u) && exec.precedes(u, hi))
            };
            if between(a, b, i) || between(b, a, j) {
                return false;
            }
        }
        let s = self.scans[sp];
        for (op, &s2) in self.scans.iter().enumerate() {
            if op == sp {
                continue;
            }
            let b = at(op, i);
            if b != UNSET {
                if exec.precedes(s2, s) && !le(exec, b, a) {
                    return false;
                }
                if exec.precedes(s, s2) && !le(exec, a, b) {
                    return false;
                }
            }
            let mut fwd = false;
            let mut back = false;
            for k in 0..n {
                let (x, y) = (at(sp, k), at(op, k));
                if x == UNSET || y == UNSET {
                    continue;
                }
                fwd |= exec.precedes(x, y);
                back |= exec.precedes(y, x);
            }
            if fwd && back {
                return false;
            }
        }
        true
    }

    fn run<B>(&mut self, slot: usize, visit: &mut impl FnMut(&Self) -> ControlFlow<B>) -> ControlFlow<B> {
        if slot == self.assign.len() {
            return visit(self);
        }
        let n = self.exec.n();
        for c in 0..self.cands[slot].len() {
            self.assign[slot] = self.cands[slot][c];
            if self.enforce == Enforce::ValuesOnly || self.consistent(slot / n, slot % n) {
                self.run(slot + 1, visit)?;
            }
        }
        self.assign[slot] = UNSET;
        ControlFlow::Continue(())
    }

    fn to_assignment(&self) -> AlphaAssignment {
        let n = self.exec.n();
        let mut alpha = AlphaAssignment::new(n);
        for (sp, &s) in self.scans.iter().enumerate() {
            for i in 0..n {
                alpha.set(i, self.exec.event(s).id, self.exec.event(self.assign[sp * n + i]).id);
            }
        }
        alpha
    }

    fn exhausted_slot(&self) -> bool {
        self.cands.iter().any(Vec::is_empty)
    }
}

/// Finds a correct assignment, or `None` if the execution admits none.
///
/// Slots are filled in `(scan start, process index)` order and candidates are
/// tried by increasing update start, so the witness is deterministic.
pub fn search_alpha(exec: &Execution) -> Option<AlphaAssignment> {
    let mut search = Search::new(exec, Enforce::All);
    if search.exhausted_slot() {
        return None;
    }
    match search.run(0, &mut |s| ControlFlow::Break(s.to_assignment())) {
        ControlFlow::Break(alpha) => Some(alpha),
        ControlFlow::Continue(()) => None,
    }
}

/// Enumerates every assignment satisfying the requested properties, in search order.
pub fn enumerate_alphas(exec: &Execution, enforce: Enforce) -> Vec<AlphaAssignment> {
    let mut search = Search::new(exec, enforce);
    let mut out = Vec::new();
    let _ = search.run::<()>(0, &mut |s| {
        out.push(s.to_assignment());
        ControlFlow::Continue(())
    });
    out
}
