mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snapcheck::alpha::{alpha_less, search_alpha};
use snapcheck::linearize::{build_triangle, has_cycle};
use snapcheck::sim::{probe_schedule_based, run, AtomicMock, DoubleCollectSeq, SimilarityVariant, SingleCollect};
use snapcheck::simple::enumerate_skeletons;
use snapcheck::trace::{parse_trace, serialize_trace, EventId, Execution, Value};
use snapcheck::{Algorithm, Schedule};

use common::random_trace;

fn trace_from_seed(seed: u64) -> Execution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3);
    random_trace(&mut rng, n, 3, 3)
}

/// Edges of `<` plus `tri`, searched by plain DFS.
fn reachable_cycle(exec: &Execution, edges: &[(EventId, EventId)], domain: &[EventId]) -> bool {
    let m = domain.len();
    let idx = |id: EventId| domain.iter().position(|&d| d == id).unwrap();
    let mut adj = vec![Vec::new(); m];
    for a in 0..m {
        for b in 0..m {
            let (ea, eb) = (exec.index_of(domain[a]).unwrap(), exec.index_of(domain[b]).unwrap());
            if exec.precedes(ea, eb) {
                adj[a].push(b);
            }
        }
    }
    for &(a, b) in edges {
        adj[idx(a)].push(idx(b));
    }
    // 0 unvisited, 1 on stack, 2 done
    fn dfs(v: usize, adj: &[Vec<usize>], color: &mut [u8]) -> bool {
        color[v] = 1;
        for &w in &adj[v] {
            if color[w] == 1 || (color[w] == 0 && dfs(w, adj, color)) {
                return true;
            }
        }
        color[v] = 2;
        false
    }
    let mut color = vec![0u8; m];
    (0..m).any(|v| color[v] == 0 && dfs(v, &adj, &mut color))
}

proptest! {
    #[test]
    fn precedence_is_a_strict_partial_order(seed in any::<u64>()) {
        let x = trace_from_seed(seed);
        let m = x.events().len();
        for a in 0..m {
            prop_assert!(!x.precedes(a, a));
            for b in 0..m {
                if x.precedes(a, b) {
                    prop_assert!(!x.precedes(b, a));
                    for c in 0..m {
                        if x.precedes(b, c) {
                            prop_assert!(x.precedes(a, c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parse_inverts_serialize(seed in any::<u64>()) {
        let x = trace_from_seed(seed);
        let text = serialize_trace(&x);
        prop_assert_eq!(parse_trace(&text).unwrap(), x);
    }

    #[test]
    fn found_assignments_give_acyclic_relations(seed in any::<u64>()) {
        let x = trace_from_seed(seed);
        if let Some(a) = search_alpha(&x) {
            let tri = build_triangle(&x, &a).unwrap();
            prop_assert!(has_cycle(&x, &tri).is_none());
            // alpha_less is irreflexive and asymmetric on scans
            let scans: Vec<EventId> = a.scans().collect();
            for &s in &scans {
                prop_assert!(!alpha_less(&x, &a, s, s));
                for &t in &scans {
                    prop_assert!(!(alpha_less(&x, &a, s, t) && alpha_less(&x, &a, t, s)));
                }
            }
        }
    }

    #[test]
    fn cycle_detection_matches_dfs_after_flips(seed in any::<u64>(), flips in 1usize..4) {
        let x = trace_from_seed(seed);
        let Some(a) = search_alpha(&x) else { return Ok(()) };
        let mut tri = build_triangle(&x, &a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..flips {
            let edges: Vec<_> = tri.edges().iter().copied().collect();
            if edges.is_empty() {
                break;
            }
            let (f, t) = edges[rng.gen_range(0..edges.len())];
            tri.flip(f, t);
        }
        let edges: Vec<_> = tri.edges().iter().copied().collect();
        let expected = reachable_cycle(&x, &edges, tri.domain());
        let found = has_cycle(&x, &tri);
        prop_assert_eq!(found.is_some(), expected);
        if let Some(c) = found {
            for (f, t) in c.edges() {
                let (ef, et) = (x.index_of(f).unwrap(), x.index_of(t).unwrap());
                prop_assert!(tri.contains(f, t) || x.precedes(ef, et), "{f} -> {t} is not an edge");
            }
        }
    }

    #[test]
    fn revaluation_keeps_the_skeleton(seed in any::<u64>(), model in 0usize..3) {
        let models: [&dyn Algorithm; 3] = [&AtomicMock, &SingleCollect, &DoubleCollectSeq];
        let model = models[model];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let skeletons = enumerate_skeletons(2, 2);
        let sk = &skeletons[rng.gen_range(0..skeletons.len())];
        let scripts = sk.with_args(|_, _| Value(rng.gen_range(0..4)));
        let len = rng.gen_range(0..14);
        let sched = Schedule::new((0..len).map(|_| rng.gen_range(0..2)).collect());
        let variant = SimilarityVariant {
            args: (0..2).map(|p| (0..sk.updates(p)).map(|_| Value(rng.gen_range(0..4))).collect()).collect(),
        };
        prop_assert!(probe_schedule_based(model, &sched, &scripts, std::slice::from_ref(&variant)).unwrap());
        let base = run(model, &sched, &scripts).unwrap();
        let other = run(model, &sched, &variant.apply(&scripts).unwrap()).unwrap();
        let shape = |x: &Execution| -> Vec<_> { x.events().iter().map(|e| (e.id, e.kind(), e.start, e.end)).collect() };
        prop_assert_eq!(shape(&base), shape(&other));
    }
}
