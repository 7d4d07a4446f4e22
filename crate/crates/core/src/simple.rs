//! Bounded-exhaustive counterexample hunting over simple executions.
//!
//! A script is `(i, j)`-simple when every update writes 0 except that process
//! `i` switches to writing 1 from its `r_i`-th update on (counting from 0), and
//! likewise `j` from its `r_j`-th. For schedule-based algorithms an incorrect
//! execution exists iff an incorrect simple one does, so [`hunt`] only walks
//! simple scripts. [`check_reduction`] tests that claim empirically by also
//! walking scripts with arbitrary values from a finite domain.
//!
//! Enumeration order is: operation-kind skeletons, then `(i, j)` pairs with
//! `i < j`, then `(r_i, r_j)`, then schedules in lexicographic order. Schedules
//! that would schedule a process with nothing left to do are skipped; removing
//! such a no-op step yields an execution with the same boundary order.

use std::collections::HashSet;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::alpha::search_alpha;
use crate::oracle::{oracle_linearizable, OracleConfig, OracleError, OracleVerdict};
use crate::sim::{format_sim_file, run, Algorithm, OpScript, Request, Schedule, SimError, Simulator};
use crate::trace::{serialize_trace, Execution, Value};

/// All pid sequences of length `<= max_steps`, in lexicographic order.
pub fn enumerate_schedules(n: usize, max_steps: usize) -> impl Iterator<Item = Schedule> {
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    std::iter::from_fn(move || {
        let steps = stack.pop()?;
        if steps.len() < max_steps {
            for pid in (0..n).rev() {
                let mut next = steps.clone();
                next.push(pid);
                stack.push(next);
            }
        }
        Some(Schedule::new(steps))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Scan,
    Update,
}

/// Operation kinds per process, arguments not yet chosen.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Skeleton {
    pub processes: Vec<Vec<OpKind>>,
}

impl Skeleton {
    pub fn updates(&self, pid: usize) -> usize {
        self.processes[pid].iter().filter(|&&k| k == OpKind::Update).count()
    }

    /// Fills update arguments per process, in order, from `args`.
    pub fn with_args(&self, mut args: impl FnMut(usize, usize) -> Value) -> OpScript {
        OpScript::new(
            self.processes
                .iter()
                .enumerate()
                .map(|(pid, kinds)| {
                    let mut r = 0;
                    kinds
                        .iter()
                        .map(|k| match k {
                            OpKind::Scan => Request::Scan,
                            OpKind::Update => {
                                r += 1;
                                Request::Update(args(pid, r - 1))
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Every skeleton with at most `max_ops` operations per process.
pub fn enumerate_skeletons(n: usize, max_ops: usize) -> Vec<Skeleton> {
    let mut per_process: Vec<Vec<OpKind>> = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_ops {
        let mut next = Vec::new();
        for seq in &frontier {
            for k in [OpKind::Scan, OpKind::Update] {
                let mut s: Vec<OpKind> = seq.clone();
                s.push(k);
                next.push(s);
            }
        }
        per_process.extend(next.iter().cloned());
        frontier = next;
    }
    let mut out = vec![Skeleton { processes: Vec::new() }];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|sk| {
                per_process.iter().map(move |seq| {
                    let mut p = sk.processes.clone();
                    p.push(seq.clone());
                    Skeleton { processes: p }
                })
            })
            .collect();
    }
    out
}

/// Switch points of an `(i, j)`-simple script.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SimpleParams {
    pub i: usize,
    pub j: usize,
    pub r_i: usize,
    pub r_j: usize,
}

impl SimpleParams {
    /// Argument of the `r`-th update (from 0) of `pid`.
    pub fn arg(&self, pid: usize, r: usize) -> Value {
        let switched = (pid == self.i && r >= self.r_i) || (pid == self.j && r >= self.r_j);
        Value(switched as u64)
    }

    pub fn apply(&self, skeleton: &Skeleton) -> OpScript {
        skeleton.with_args(|pid, r| self.arg(pid, r))
    }

    /// Whether the update arguments of `scripts` follow these switch points.
    pub fn matches(&self, scripts: &OpScript) -> bool {
        scripts.processes.iter().enumerate().all(|(pid, reqs)| {
            reqs.iter()
                .filter_map(|r| match r {
                    Request::Update(v) => Some(*v),
                    Request::Scan => None,
                })
                .enumerate()
                .all(|(r, v)| v == self.arg(pid, r))
        })
    }
}

impl fmt::Display for SimpleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i={} j={} r_i={} r_j={}", self.i, self.j, self.r_i, self.r_j)
    }
}

/// All `(r_i, r_j)` with `0 <= r_i <= #updates(i)` and `0 <= r_j <= #updates(j)`.
pub fn enumerate_simple_assignments(skeleton: &Skeleton, i: usize, j: usize) -> impl Iterator<Item = SimpleParams> {
    let (ui, uj) = (skeleton.updates(i), skeleton.updates(j));
    (0..=ui).flat_map(move |r_i| (0..=uj).map(move |r_j| SimpleParams { i, j, r_i, r_j }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub n: usize,
    pub max_steps: usize,
    pub max_ops: usize,
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} steps={} ops={}", self.n, self.max_steps, self.max_ops)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HuntConfig {
    pub bounds: Bounds,
    /// Cross-check every execution with the oracle.
    pub paranoid: bool,
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
    pub oracle: OracleConfig,
}

impl HuntConfig {
    pub fn new(bounds: Bounds) -> Self {
        HuntConfig { bounds, paranoid: false, jobs: 1, oracle: OracleConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub schedule: Schedule,
    pub scripts: OpScript,
    pub params: Option<SimpleParams>,
    pub execution: Execution,
    pub verdict: OracleVerdict,
}

impl Counterexample {
    /// Re-runs the schedule and checks that the same trace comes out.
    pub fn replays(&self, model: &dyn Algorithm) -> bool {
        run(model, &self.schedule, &self.scripts).is_ok_and(|x| x == self.execution)
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.params {
            writeln!(f, "# simple {p}")?;
        }
        for line in format_sim_file(&self.scripts, &self.schedule).lines().skip(1) {
            writeln!(f, "# {line}")?;
        }
        f.write_str(&serialize_trace(&self.execution))?;
        write!(f, "{}", self.verdict)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HuntOutcome {
    Counterexample(Box<Counterexample>),
    ExhaustedClean,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuntReport {
    pub model: &'static str,
    pub bounds: Bounds,
    pub outcome: HuntOutcome,
    /// Executions examined, up to and including a counterexample.
    pub checked: u64,
}

impl HuntReport {
    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.outcome {
            HuntOutcome::Counterexample(c) => Some(c),
            HuntOutcome::ExhaustedClean => None,
        }
    }
}

impl fmt::Display for HuntReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            HuntOutcome::ExhaustedClean => writeln!(f, "CLEAN count={}", self.checked),
            HuntOutcome::Counterexample(c) => {
                writeln!(f, "COUNTEREXAMPLE")?;
                writeln!(f, "# model={} {} checked={}", self.model, self.bounds, self.checked)?;
                write!(f, "{c}")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HuntError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("checker and oracle disagree on:\n{}", serialize_trace(.0))]
    Disagreement(Box<Execution>),
    #[error("bounds must allow at least 2 processes")]
    TooFewProcesses,
}

/// Walks every no-op-free schedule of length `<= max_steps` in lexicographic order.
fn explore<B>(
    sim: &Simulator<'_>,
    path: &mut Vec<usize>,
    max_steps: usize,
    visit: &mut impl FnMut(&[usize], Execution) -> ControlFlow<B>,
) -> ControlFlow<B> {
    if path.len() == max_steps {
        return ControlFlow::Continue(());
    }
    for pid in 0..sim.n() {
        if !sim.has_work(pid) {
            continue;
        }
        let mut next = sim.clone();
        next.step(pid);
        path.push(pid);
        visit(path, next.execution())?;
        explore(&next, path, max_steps, visit)?;
        path.pop();
    }
    ControlFlow::Continue(())
}

struct Job {
    scripts: OpScript,
    params: Option<SimpleParams>,
}

/// Executions checked, counterexamples found, and the first of them.
type JobResult = Result<(u64, u64, Option<Counterexample>), HuntError>;

/// Checks every schedule of one job; stops at its first counterexample.
fn run_job(model: &dyn Algorithm, job: &Job, cfg: &HuntConfig, stop_at_first: bool) -> JobResult {
    let mut checked = 0u64;
    let mut found = 0u64;
    let mut first: Option<Counterexample> = None;
    let mut error = None;
    let mut check = |path: &[usize], exec: Execution| -> ControlFlow<()> {
        checked += 1;
        let bad = search_alpha(&exec).is_none();
        if cfg.paranoid {
            match oracle_linearizable(&exec, &cfg.oracle) {
                Ok(v) if v.is_linearizable() == bad => {
                    error = Some(HuntError::Disagreement(Box::new(exec)));
                    return ControlFlow::Break(());
                }
                Ok(_) => {}
                Err(e) => {
                    error = Some(e.into());
                    return ControlFlow::Break(());
                }
            }
        }
        if !bad {
            return ControlFlow::Continue(());
        }
        found += 1;
        if first.is_none() {
            let verdict = match oracle_linearizable(&exec, &cfg.oracle) {
                Ok(v) => v,
                Err(e) => {
                    error = Some(e.into());
                    return ControlFlow::Break(());
                }
            };
            first = Some(Counterexample {
                schedule: Schedule::new(path.to_vec()),
                scripts: job.scripts.clone(),
                params: job.params,
                execution: exec,
                verdict,
            });
        }
        if stop_at_first {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let _ = walk_executions(model, &job.scripts, cfg.bounds.max_steps, &mut check)?;
    match error {
        Some(e) => Err(e),
        None => Ok((checked, found, first)),
    }
}

struct Sweep {
    checked: u64,
    found: u64,
    first: Option<Counterexample>,
}

/// Runs jobs in order, or in parallel with the same first-by-order result.
fn sweep(model: &dyn Algorithm, jobs: &[Job], cfg: &HuntConfig, stop_at_first: bool) -> Result<Sweep, HuntError> {
    if cfg.jobs <= 1 {
        let mut total = Sweep { checked: 0, found: 0, first: None };
        for job in jobs {
            let (checked, found, first) = run_job(model, job, cfg, stop_at_first)?;
            total.checked += checked;
            total.found += found;
            if total.first.is_none() {
                total.first = first;
            }
            if stop_at_first && total.first.is_some() {
                break;
            }
        }
        return Ok(total);
    }

    let best = AtomicUsize::new(usize::MAX);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().expect("thread pool");
    let results: Vec<Option<JobResult>> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(idx, job)| {
                if stop_at_first && idx > best.load(Ordering::Relaxed) {
                    return None;
                }
                let r = run_job(model, job, cfg, stop_at_first);
                if matches!(&r, Ok((_, _, Some(_))) | Err(_)) {
                    best.fetch_min(idx, Ordering::Relaxed);
                }
                Some(r)
            })
            .collect()
    });
    let mut total = Sweep { checked: 0, found: 0, first: None };
    for r in results {
        let Some(r) = r else { break };
        let (checked, found, first) = r?;
        total.checked += checked;
        total.found += found;
        if total.first.is_none() {
            total.first = first;
        }
        if stop_at_first && total.first.is_some() {
            break;
        }
    }
    Ok(total)
}

/// Distinct simple scripts within `n` processes and `max_ops` operations each,
/// in enumeration order, each with the first parameters that produce it.
pub fn simple_scripts(n: usize, max_ops: usize) -> Vec<(OpScript, SimpleParams)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for sk in enumerate_skeletons(n, max_ops) {
        for i in 0..n {
            for j in i + 1..n {
                for p in enumerate_simple_assignments(&sk, i, j) {
                    let scripts = p.apply(&sk);
                    if seen.insert(scripts.clone()) {
                        out.push((scripts, p));
                    }
                }
            }
        }
    }
    out
}

fn simple_jobs(n: usize, max_ops: usize) -> Vec<Job> {
    simple_scripts(n, max_ops).into_iter().map(|(scripts, p)| Job { scripts, params: Some(p) }).collect()
}

/// Visits the execution of every no-op-free schedule of length `<= max_steps`,
/// the empty one included, in lexicographic order.
pub fn walk_executions<B>(
    model: &dyn Algorithm,
    scripts: &OpScript,
    max_steps: usize,
    mut visit: impl FnMut(&[usize], Execution) -> ControlFlow<B>,
) -> Result<ControlFlow<B>, SimError> {
    let sim = Simulator::new(model, scripts)?;
    if let ControlFlow::Break(b) = visit(&[], sim.execution()) {
        return Ok(ControlFlow::Break(b));
    }
    Ok(explore(&sim, &mut Vec::new(), max_steps, &mut visit))
}

/// Searches the simple executions within `cfg.bounds` for one without a correct assignment.
pub fn hunt(model: &dyn Algorithm, cfg: &HuntConfig) -> Result<HuntReport, HuntError> {
    let b = cfg.bounds;
    if b.n < 2 {
        return Err(HuntError::TooFewProcesses);
    }
    let s = sweep(model, &simple_jobs(b.n, b.max_ops), cfg, true)?;
    let outcome = match s.first {
        Some(c) => HuntOutcome::Counterexample(Box::new(c)),
        None => HuntOutcome::ExhaustedClean,
    };
    Ok(HuntReport { model: model.name(), bounds: b, outcome, checked: s.checked })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionReport {
    pub model: &'static str,
    pub bounds: Bounds,
    pub domain: Vec<Value>,
    pub general_checked: u64,
    pub general_counterexamples: u64,
    pub first_general: Option<Counterexample>,
    pub simple: HuntReport,
}

impl ReductionReport {
    /// A general counterexample exists but no simple one does.
    pub fn breach(&self) -> bool {
        self.general_counterexamples > 0 && self.simple.counterexample().is_none()
    }
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let domain: Vec<String> = self.domain.iter().map(Value::to_string).collect();
        writeln!(f, "# model={} {} values={}", self.model, self.bounds, domain.join(","))?;
        writeln!(f, "GENERAL checked={} counterexamples={}", self.general_checked, self.general_counterexamples)?;
        match self.simple.counterexample() {
            Some(_) => writeln!(f, "SIMPLE COUNTEREXAMPLE checked={}", self.simple.checked)?,
            None => writeln!(f, "SIMPLE CLEAN count={}", self.simple.checked)?,
        }
        writeln!(f, "REDUCTION {}", if self.breach() { "BREACH" } else { "HOLDS" })?;
        if let Some(c) = &self.first_general {
            writeln!(f, "GENERAL_COUNTEREXAMPLE")?;
            write!(f, "{c}")?;
        }
        if let Some(c) = self.simple.counterexample() {
            writeln!(f, "SIMPLE_COUNTEREXAMPLE")?;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Compares general executions over `domain` with the simple hunt under the same bounds.
pub fn check_reduction(
    model: &dyn Algorithm,
    domain: &[Value],
    cfg: &HuntConfig,
) -> Result<ReductionReport, HuntError> {
    let b = cfg.bounds;
    if b.n < 2 {
        return Err(HuntError::TooFewProcesses);
    }
    let mut seen = HashSet::new();
    let mut jobs = Vec::new();
    for sk in enumerate_skeletons(b.n, b.max_ops) {
        let slots: Vec<(usize, usize)> = (0..b.n).flat_map(|pid| (0..sk.updates(pid)).map(move |r| (pid, r))).collect();
        let mut digits = vec![0usize; slots.len()];
        loop {
            let scripts = sk.with_args(|pid, r| {
                let k = slots.iter().position(|&s| s == (pid, r)).expect("slot");
                domain[digits[k]]
            });
            if seen.insert(scripts.clone()) {
                jobs.push(Job { scripts, params: None });
            }
            // odometer over domain^slots
            let mut k = 0;
            while k < digits.len() {
                digits[k] += 1;
                if digits[k] < domain.len() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }
    }
    let general = sweep(model, &jobs, cfg, false)?;
    let simple = hunt(model, cfg)?;
    Ok(ReductionReport {
        model: model.name(),
        bounds: b,
        domain: domain.to_vec(),
        general_checked: general.checked,
        general_counterexamples: general.found,
        first_general: general.first,
        simple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{AtomicMock, ParityToy, SingleCollect};

    #[test]
    fn schedule_counts() {
        let s: Vec<Vec<usize>> = enumerate_schedules(2, 1).map(|s| s.steps).collect();
        assert_eq!(s, vec![vec![], vec![0], vec![1]]);
        assert_eq!(enumerate_schedules(2, 2).count(), 7);
        assert_eq!(enumerate_schedules(3, 3).count(), 40);
        let two: Vec<Vec<usize>> = enumerate_schedules(2, 2).map(|s| s.steps).collect();
        assert_eq!(two, vec![vec![], vec![0], vec![0, 0], vec![0, 1], vec![1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn skeleton_counts() {
        // 1 + 2 + 4 kind sequences per process
        assert_eq!(enumerate_skeletons(2, 2).len(), 49);
        assert_eq!(enumerate_skeletons(3, 1).len(), 27);
        assert_eq!(enumerate_skeletons(2, 0).len(), 1);
    }

    fn sk(p: &[&[OpKind]]) -> Skeleton {
        Skeleton { processes: p.iter().map(|v| v.to_vec()).collect() }
    }

    #[test]
    fn simple_assignment_counts_and_boundaries() {
        use OpKind::*;
        let s = sk(&[&[Update, Scan, Update], &[Update], &[Update]]);
        let all: Vec<_> = enumerate_simple_assignments(&s, 0, 1).collect();
        assert_eq!(all.len(), 6);

        let first = SimpleParams { i: 0, j: 1, r_i: 0, r_j: 1 }.apply(&s);
        assert_eq!(first.processes[0], vec![Request::Update(Value(1)), Request::Scan, Request::Update(Value(1))]);
        assert_eq!(first.processes[1], vec![Request::Update(Value(0))]);
        assert_eq!(first.processes[2], vec![Request::Update(Value(0))]);

        let last = SimpleParams { i: 0, j: 1, r_i: 2, r_j: 0 }.apply(&s);
        assert_eq!(last.processes[0], vec![Request::Update(Value(0)), Request::Scan, Request::Update(Value(0))]);
        assert_eq!(last.processes[1], vec![Request::Update(Value(1))]);

        let mid = SimpleParams { i: 0, j: 1, r_i: 1, r_j: 1 };
        assert_eq!(mid.apply(&s).processes[0][2], Request::Update(Value(1)));
        for p in all {
            assert!(p.matches(&p.apply(&s)));
        }
        assert!(!mid.matches(&last));
    }

    #[test]
    fn atomic_mock_small_hunt_clean() {
        let cfg = HuntConfig::new(Bounds { n: 2, max_steps: 6, max_ops: 2 });
        let r = hunt(&AtomicMock, &cfg).unwrap();
        assert_eq!(r.outcome, HuntOutcome::ExhaustedClean);
        assert!(r.checked > 0);
        assert_eq!(r.to_string(), format!("CLEAN count={}\n", r.checked));
    }

    #[test]
    fn single_collect_three_processes() {
        let cfg = HuntConfig::new(Bounds { n: 3, max_steps: 7, max_ops: 1 });
        let r = hunt(&SingleCollect, &cfg).unwrap();
        let c = r.counterexample().expect("stale read across two ordered writes");
        assert_eq!(c.verdict, OracleVerdict::NotLinearizable);
        assert!(c.replays(&SingleCollect));
        assert!(c.params.unwrap().matches(&c.scripts));
        let text = r.to_string();
        assert!(text.starts_with("COUNTEREXAMPLE\n"));
        assert!(text.ends_with("NOT_LINEARIZABLE\n"));
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut cfg = HuntConfig::new(Bounds { n: 3, max_steps: 7, max_ops: 1 });
        let seq = hunt(&SingleCollect, &cfg).unwrap();
        cfg.jobs = 4;
        assert_eq!(hunt(&SingleCollect, &cfg).unwrap(), seq);
    }

    #[test]
    fn paranoid_mode_agrees() {
        let mut cfg = HuntConfig::new(Bounds { n: 2, max_steps: 6, max_ops: 2 });
        cfg.paranoid = true;
        assert!(hunt(&SingleCollect, &cfg).is_ok());
    }

    #[test]
    fn parity_toy_breaches_reduction() {
        let cfg = HuntConfig::new(Bounds { n: 2, max_steps: 4, max_ops: 2 });
        let r = check_reduction(&ParityToy, &[Value(0), Value(1), Value(2)], &cfg).unwrap();
        assert!(r.general_counterexamples > 0);
        assert!(r.breach());
        assert!(r.to_string().contains("REDUCTION BREACH"));
    }

    #[test]
    fn too_few_processes() {
        let cfg = HuntConfig::new(Bounds { n: 1, max_steps: 2, max_ops: 1 });
        assert_eq!(hunt(&AtomicMock, &cfg), Err(HuntError::TooFewProcesses));
    }
}
