//! From a correct assignment to a linearization.
//!
//! The triangle relation orders each complete scan `S` against each
//! `p_i`-update `U`: `U ◁ S` when `U <= alpha_i(S)`, otherwise `S ◁ U`. For a
//! correct assignment, real-time precedence together with `◁` is acyclic, and
//! any linear extension of it satisfies the snapshot sequential specification.
//!
//! The event domain is every complete event plus every update, pending ones
//! included. Pending scans never appear.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::alpha::{check_properties, AlphaAssignment, AlphaError, PropertyViolation};
use crate::trace::{EventId, Execution, Value};

/// The `◁` edges over the linearization domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriangleRelation {
    domain: Vec<EventId>,
    edges: BTreeSet<(EventId, EventId)>,
}

impl TriangleRelation {
    pub fn from_parts(domain: Vec<EventId>, edges: BTreeSet<(EventId, EventId)>) -> Self {
        TriangleRelation { domain, edges }
    }

    /// Complete events plus all updates, in execution order.
    pub fn domain(&self) -> &[EventId] {
        &self.domain
    }

    pub fn edges(&self) -> &BTreeSet<(EventId, EventId)> {
        &self.edges
    }

    pub fn contains(&self, from: EventId, to: EventId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Reverses the edge `from ◁ to`. Returns false if it is absent.
    pub fn flip(&mut self, from: EventId, to: EventId) -> bool {
        if self.edges.remove(&(from, to)) {
            self.edges.insert((to, from));
            true
        } else {
            false
        }
    }
}

/// A cycle `events[0] → events[1] → … → events[0]` in `< ∪ ◁`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub events: Vec<EventId>,
}

impl Cycle {
    /// Consecutive pairs, closing back to the first event.
    pub fn edges(&self) -> impl Iterator<Item = (EventId, EventId)> + '_ {
        let k = self.events.len();
        (0..k).map(move |x| (self.events[x], self.events[(x + 1) % k]))
    }
}

/// A sequence of events, serialized as one `LIN <id>` line each.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TotalOrder {
    pub sequence: Vec<EventId>,
}

impl fmt::Display for TotalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in &self.sequence {
            writeln!(f, "LIN {id}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error("assignment violates {} property instance(s)", .0.len())]
    Violations(Vec<PropertyViolation>),
    #[error("precedence and triangle relation contain a cycle of length {}", .0.events.len())]
    CyclicInput(Cycle),
}

fn domain_indices(exec: &Execution) -> Vec<usize> {
    (0..exec.events().len())
        .filter(|&i| {
            let e = exec.event(i);
            e.is_complete() || e.is_update()
        })
        .collect()
}

/// Builds `◁` for an assignment that has already passed [`check_properties`].
pub fn build_triangle(exec: &Execution, alpha: &AlphaAssignment) -> Result<TriangleRelation, LinearizeError> {
    let violations = check_properties(exec, alpha)?;
    if !violations.is_empty() {
        return Err(LinearizeError::Violations(violations));
    }
    let dom = domain_indices(exec);
    let mut edges = BTreeSet::new();
    for &s in dom.iter().filter(|&&s| exec.event(s).is_scan()) {
        let sid = exec.event(s).id;
        for &u in dom.iter().filter(|&&u| exec.event(u).is_update()) {
            let ue = exec.event(u);
            let target = alpha.get(ue.pid, sid).and_then(|a| exec.index_of(a)).expect("resolved by check_properties");
            if u == target || exec.precedes(u, target) {
                edges.insert((ue.id, sid));
            } else {
                edges.insert((sid, ue.id));
            }
        }
    }
    Ok(TriangleRelation { domain: dom.iter().map(|&i| exec.event(i).id).collect(), edges })
}

/// Adjacency of `< ∪ ◁` over the relation's domain, by domain position.
fn union_graph(exec: &Execution, tri: &TriangleRelation) -> Vec<Vec<bool>> {
    let idx: Vec<usize> = tri.domain.iter().map(|&id| exec.index_of(id).expect("domain event in execution")).collect();
    let pos = |id: EventId| tri.domain.iter().position(|&d| d == id);
    let m = idx.len();
    let mut adj = vec![vec![false; m]; m];
    for a in 0..m {
        for b in 0..m {
            adj[a][b] = exec.precedes(idx[a], idx[b]);
        }
    }
    for &(x, y) in &tri.edges {
        if let (Some(a), Some(b)) = (pos(x), pos(y)) {
            adj[a][b] = true;
        }
    }
    adj
}

/// Looks for a cycle in `< ∪ ◁`, returning a shortest one.
pub fn has_cycle(exec: &Execution, tri: &TriangleRelation) -> Option<Cycle> {
    let adj = union_graph(exec, tri);
    let m = adj.len();
    let mut best: Option<Vec<usize>> = None;
    for root in 0..m {
        // BFS for the shortest path root → … → root
        let mut parent = vec![usize::MAX; m];
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut closing = None;
        'bfs: while let Some(v) = queue.pop_front() {
            for w in 0..m {
                if !adj[v][w] {
                    continue;
                }
                if w == root {
                    closing = Some(v);
                    break 'bfs;
                }
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        if let Some(mut v) = closing {
            let mut path = vec![v];
            while v != root {
                v = parent[v];
                path.push(v);
            }
            path.reverse();
            if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                best = Some(path);
            }
        }
    }
    best.map(|p| Cycle { events: p.into_iter().map(|x| tri.domain[x]).collect() })
}

fn transitive_closure(mut r: Vec<Vec<bool>>) -> Vec<Vec<bool>> {
    let m = r.len();
    for k in 0..m {
        let via = r[k].clone();
        for row in r.iter_mut() {
            if row[k] {
                for (cell, &reach) in row.iter_mut().zip(&via) {
                    *cell |= reach;
                }
            }
        }
    }
    r
}

/// Linearizes the execution along `< ∪ ◁`, breaking ties by `(start, pid)`.
pub fn build_linearization(exec: &Execution, alpha: &AlphaAssignment) -> Result<TotalOrder, LinearizeError> {
    let tri = build_triangle(exec, alpha)?;
    let closure = transitive_closure(union_graph(exec, &tri));
    let m = closure.len();
    if (0..m).any(|x| closure[x][x]) {
        let cycle = has_cycle(exec, &tri).expect("closure found a cycle");
        return Err(LinearizeError::CyclicInput(cycle));
    }
    let key = |x: usize| {
        let e = exec.get(tri.domain[x]).expect("domain event");
        (e.start, e.pid)
    };
    let mut placed = vec![false; m];
    let mut sequence = Vec::with_capacity(m);
    for _ in 0..m {
        let next = (0..m)
            .filter(|&x| !placed[x] && (0..m).all(|y| placed[y] || !closure[y][x]))
            .min_by_key(|&x| key(x))
            .expect("acyclic relation always has a minimal element");
        placed[next] = true;
        sequence.push(tri.domain[next]);
    }
    Ok(TotalOrder { sequence })
}

/// Draws one linear extension of `< ∪ ◁` uniformly among the ready events at each step.
///
/// Returns `None` if the relation is cyclic.
pub fn sample_linear_extension(exec: &Execution, tri: &TriangleRelation, rng: &mut impl Rng) -> Option<TotalOrder> {
    let adj = union_graph(exec, tri);
    let m = adj.len();
    let mut indeg: Vec<usize> = (0..m).map(|b| (0..m).filter(|&a| adj[a][b]).count()).collect();
    let mut ready: Vec<usize> = (0..m).filter(|&x| indeg[x] == 0).collect();
    let mut sequence = Vec::with_capacity(m);
    while !ready.is_empty() {
        let v = ready.swap_remove(rng.gen_range(0..ready.len()));
        sequence.push(tri.domain[v]);
        for w in 0..m {
            if adj[v][w] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
    }
    (sequence.len() == m).then_some(TotalOrder { sequence })
}

/// Checks an order against the snapshot sequential specification.
///
/// The order must list each event at most once, include every complete event,
/// respect real-time precedence, start with the initial updates, and have each
/// scan return the value of the latest preceding update of every process.
pub fn check_sequential_spec(exec: &Execution, order: &TotalOrder) -> bool {
    let n = exec.n();
    let mut seen = vec![false; exec.events().len()];
    let mut idx = Vec::with_capacity(order.sequence.len());
    for &id in &order.sequence {
        let Some(x) = exec.index_of(id) else { return false };
        if seen[x] {
            return false;
        }
        seen[x] = true;
        idx.push(x);
    }
    if exec.events().iter().enumerate().any(|(x, e)| e.is_complete() && !seen[x]) {
        return false;
    }
    if idx.len() < n || (0..n).any(|p| !exec.event(idx[p]).is_initial()) {
        return false;
    }
    for a in 0..idx.len() {
        for b in 0..a {
            if exec.precedes(idx[a], idx[b]) {
                return false;
            }
        }
    }
    let mut current: Vec<Option<Value>> = vec![None; n];
    for &x in &idx {
        let e = exec.event(x);
        if let Some(arg) = e.arg() {
            current[e.pid] = Some(arg);
        } else if let Some(ret) = e.ret() {
            if ret.len() != n || (0..n).any(|i| current[i] != Some(ret[i])) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::search_alpha;
    use crate::trace::parse_trace;

    const GOLDEN: &str = "n=2\n1 update 0 2 arg=2\n0 update 1 4 arg=1\n1 update 3 7 arg=3\n0 scan 5 6 ret=1,2\n";

    fn id(s: &str) -> EventId {
        s.parse().unwrap()
    }

    fn ids(v: &[&str]) -> Vec<EventId> {
        v.iter().map(|s| id(s)).collect()
    }

    #[test]
    fn golden_triangle() {
        let x = parse_trace(GOLDEN).unwrap();
        let a = search_alpha(&x).unwrap();
        let tri = build_triangle(&x, &a).unwrap();
        let s = id("p0.2");
        for u in ["p0.0", "p1.0", "p0.1", "p1.1"] {
            assert!(tri.contains(id(u), s), "{u} ◁ S");
        }
        assert!(tri.contains(s, id("p1.2")));
        assert_eq!(tri.edges().len(), 5);
        assert_eq!(has_cycle(&x, &tri), None);
    }

    #[test]
    fn golden_linearization() {
        let x = parse_trace(GOLDEN).unwrap();
        let a = search_alpha(&x).unwrap();
        let order = build_linearization(&x, &a).unwrap();
        assert_eq!(order.sequence, ids(&["p0.0", "p1.0", "p1.1", "p0.1", "p0.2", "p1.2"]));
        assert!(check_sequential_spec(&x, &order));
        assert!(order.to_string().starts_with("LIN p0.0\nLIN p1.0\n"));
    }

    #[test]
    fn golden_scan_too_early_fails_spec() {
        let x = parse_trace(GOLDEN).unwrap();
        let bad = TotalOrder { sequence: ids(&["p0.0", "p1.0", "p0.1", "p0.2", "p1.1", "p1.2"]) };
        assert!(!check_sequential_spec(&x, &bad));
    }

    #[test]
    fn spec_rejects_malformed_orders() {
        let x = parse_trace(GOLDEN).unwrap();
        let missing = TotalOrder { sequence: ids(&["p0.0", "p1.0", "p1.1", "p0.1", "p0.2"]) };
        assert!(!check_sequential_spec(&x, &missing));
        let dup = TotalOrder { sequence: ids(&["p0.0", "p1.0", "p1.1", "p0.1", "p0.2", "p1.2", "p1.2"]) };
        assert!(!check_sequential_spec(&x, &dup));
        let late_init = TotalOrder { sequence: ids(&["p0.0", "p1.1", "p1.0", "p0.1", "p0.2", "p1.2"]) };
        assert!(!check_sequential_spec(&x, &late_init));
    }

    #[test]
    fn initial_only_scan() {
        let x = parse_trace("n=3\n2 scan 0 1 ret=0,0,0\n").unwrap();
        let order = TotalOrder { sequence: ids(&["p0.0", "p1.0", "p2.0", "p2.1"]) };
        assert!(check_sequential_spec(&x, &order));
        assert_eq!(build_linearization(&x, &search_alpha(&x).unwrap()).unwrap(), order);
    }

    #[test]
    fn no_scans_no_edges() {
        let x = parse_trace("n=2\n0 update 0 1 arg=3\n1 update 2 pending arg=4\n").unwrap();
        let a = search_alpha(&x).unwrap();
        let tri = build_triangle(&x, &a).unwrap();
        assert!(tri.edges().is_empty());
        assert_eq!(tri.domain().len(), 4);
        let order = build_linearization(&x, &a).unwrap();
        assert_eq!(order.sequence, ids(&["p0.0", "p1.0", "p0.1", "p1.1"]));
    }

    #[test]
    fn sequential_linearization_is_real_time() {
        let x = parse_trace("n=2\n0 update 0 1 arg=1\n1 scan 2 3 ret=1,0\n1 update 4 5 arg=2\n0 scan 6 7 ret=1,2\n")
            .unwrap();
        let order = build_linearization(&x, &search_alpha(&x).unwrap()).unwrap();
        assert_eq!(order.sequence, ids(&["p0.0", "p1.0", "p0.1", "p1.1", "p1.2", "p0.2"]));
    }

    #[test]
    fn two_cycle_witness() {
        let x = parse_trace(GOLDEN).unwrap();
        let a = search_alpha(&x).unwrap();
        let tri = build_triangle(&x, &a).unwrap();
        let mut edges = tri.edges().clone();
        edges.insert((id("p1.2"), id("p0.2")));
        let bad = TriangleRelation::from_parts(tri.domain().to_vec(), edges);
        let cycle = has_cycle(&x, &bad).unwrap();
        assert_eq!(cycle.events.len(), 2);
        assert!(cycle.edges().all(|(p, q)| bad.contains(p, q)));
    }

    #[test]
    fn rejects_incorrect_alpha() {
        let x = parse_trace("n=2\n0 scan 0 1 ret=0,1\n1 update 2 3 arg=1\n").unwrap();
        let mut a = AlphaAssignment::new(2);
        a.set(0, id("p0.1"), id("p0.0"));
        a.set(1, id("p0.1"), id("p1.1"));
        assert!(matches!(build_triangle(&x, &a), Err(LinearizeError::Violations(v)) if v.len() == 1));
        assert!(matches!(build_linearization(&x, &a), Err(LinearizeError::Violations(_))));
    }
}
