#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use snapcheck::trace::{End, Execution, RawEvent, Value};

/// Random well-formed trace: `n` processes, up to `max_ops` each, update
/// arguments and scan results drawn from `0..values`. The last operation of a
/// process may be left pending.
pub fn random_trace(rng: &mut impl Rng, n: usize, max_ops: usize, values: u64) -> Execution {
    // one token per interval boundary; token order gives timestamps
    let mut tokens: Vec<usize> = Vec::new();
    let mut ops: Vec<Vec<bool>> = Vec::new();
    for pid in 0..n {
        let k = rng.gen_range(0..=max_ops);
        ops.push((0..k).map(|_| rng.gen_bool(0.5)).collect());
        let pending_last = k > 0 && rng.gen_bool(0.2);
        let boundaries = 2 * k - usize::from(pending_last);
        tokens.extend(std::iter::repeat_n(pid, boundaries));
    }
    tokens.shuffle(rng);

    let mut raw = Vec::new();
    let mut cursor = vec![0usize; n];
    let mut open: Vec<Option<i64>> = vec![None; n];
    for (t, &pid) in tokens.iter().enumerate() {
        let t = t as i64;
        match open[pid].take() {
            None => open[pid] = Some(t),
            Some(start) => {
                let is_scan = ops[pid][cursor[pid]];
                cursor[pid] += 1;
                raw.push(make(rng, pid, start, End::At(t), is_scan, n, values));
            }
        }
    }
    for pid in 0..n {
        if let Some(start) = open[pid] {
            let is_scan = ops[pid][cursor[pid]];
            raw.push(make(rng, pid, start, End::Pending, is_scan, n, values));
        }
    }
    Execution::new(n, raw).expect("pids in range")
}

fn make(rng: &mut impl Rng, pid: usize, start: i64, end: End, is_scan: bool, n: usize, values: u64) -> RawEvent {
    if !is_scan {
        return RawEvent::update(pid, start, end, rng.gen_range(0..values));
    }
    let ret = match end {
        End::At(_) => Some((0..n).map(|_| rng.gen_range(0..values)).collect()),
        End::Pending => None,
    };
    RawEvent::scan(pid, start, end, ret)
}

/// Linearizability by trying every permutation of every admissible event set.
/// No pruning, no memo; only usable on a handful of events.
pub fn reference_linearizable(exec: &Execution) -> bool {
    let all: Vec<usize> = (0..exec.events().len()).collect();
    let pending: Vec<usize> = all.iter().copied().filter(|&x| !exec.event(x).is_complete()).collect();
    for mask in 0u32..(1 << pending.len()) {
        let mut chosen: Vec<usize> = all.iter().copied().filter(|&x| exec.event(x).is_complete()).collect();
        chosen.extend(pending.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &p)| p));
        if permutations(&chosen).any(|p| legal(exec, &p)) {
            return true;
        }
    }
    false
}

fn permutations(items: &[usize]) -> impl Iterator<Item = Vec<usize>> {
    // Heap's algorithm, collected eagerly
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut out = Vec::new();
    heap(items.len(), &mut items.to_vec(), &mut out);
    out.into_iter()
}

fn legal(exec: &Execution, order: &[usize]) -> bool {
    for (x, &a) in order.iter().enumerate() {
        if order[..x].iter().any(|&b| exec.precedes(a, b)) {
            return false;
        }
    }
    let mut state: Vec<Option<Value>> = vec![None; exec.n()];
    for &x in order {
        let e = exec.event(x);
        if let Some(v) = e.arg() {
            state[e.pid] = Some(v);
        } else if let Some(ret) = e.ret() {
            if ret.iter().map(|&v| Some(v)).ne(state.iter().copied()) {
                return false;
            }
        }
    }
    true
}
