//! Snapshot algorithms as deterministic transition systems over single-writer registers.
//!
//! A [`Schedule`] names the process that takes each low-level step. The step's
//! index is its timestamp, so an operation spans from the index of its first
//! action to the index of its last. Scheduling a process that has nothing left
//! to do records a no-op.
//!
//! Step granularity of the built-in models:
//!
//! | model            | update                     | scan                                   |
//! |------------------|----------------------------|----------------------------------------|
//! | AtomicMock       | invoke, write              | invoke, read all registers atomically  |
//! | SingleCollect    | invoke, write              | `n` reads in index order               |
//! | DoubleCollectSeq | bump sequence number, write| reads until two collects agree on seqs |
//! | ParityToy        | invoke, write              | like AtomicMock, but even non-zero     |
//! |                  |                            | values are reported as the old value   |

use std::fmt;

use thiserror::Error;

use crate::trace::{End, EventId, Execution, Op, RawEvent, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Request {
    Scan,
    Update(Value),
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Request::Scan => f.write_str("scan"),
            Request::Update(v) => write!(f, "update({v})"),
        }
    }
}

/// Operation requests per process, invoked in order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpScript {
    pub processes: Vec<Vec<Request>>,
}

impl OpScript {
    pub fn new(processes: Vec<Vec<Request>>) -> Self {
        OpScript { processes }
    }

    pub fn n(&self) -> usize {
        self.processes.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub steps: Vec<usize>,
}

impl Schedule {
    pub fn new(steps: Vec<usize>) -> Self {
        Schedule { steps }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.steps.iter().map(usize::to_string).collect();
        f.write_str(&s.join(" "))
    }
}

/// Contents of one shared register.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Register {
    pub value: Value,
    pub seq: u64,
    /// Value held before the latest write.
    pub prev: Value,
}

/// Shared memory: register `i` is written only by process `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    regs: Vec<Register>,
}

impl Memory {
    fn new(n: usize) -> Self {
        Memory { regs: vec![Register::default(); n] }
    }

    pub fn n(&self) -> usize {
        self.regs.len()
    }

    pub fn read(&self, i: usize) -> Register {
        self.regs[i]
    }

    pub fn read_all(&self) -> Vec<Register> {
        self.regs.clone()
    }

    pub fn write(&mut self, writer: usize, i: usize, reg: Register) {
        assert_eq!(writer, i, "process {writer} wrote register {i}");
        self.regs[i] = reg;
    }
}

/// Per-process state that survives across operations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Local {
    pub counter: u64,
}

/// State of the operation a process is executing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub request: Request,
    /// Number of actions already taken by this operation.
    pub pc: usize,
    pub collect: Vec<Register>,
    pub previous: Option<Vec<Register>>,
}

impl Frame {
    fn new(request: Request) -> Self {
        Frame { request, pc: 0, collect: Vec::new(), previous: None }
    }
}

pub enum Step {
    Continue,
    /// The operation returned at this action; scans carry their result.
    Return(Option<Vec<Value>>),
}

/// A snapshot implementation: one atomic action of process `pid` per call.
pub trait Algorithm: Sync {
    fn name(&self) -> &'static str;

    fn step(&self, pid: usize, local: &mut Local, frame: &mut Frame, mem: &mut Memory) -> Step;
}

impl fmt::Debug for dyn Algorithm + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn values(regs: &[Register]) -> Vec<Value> {
    regs.iter().map(|r| r.value).collect()
}

/// Two-step update whose second action writes the value.
fn plain_update(pid: usize, arg: Value, frame: &Frame, mem: &mut Memory) -> Step {
    if frame.pc == 0 {
        return Step::Continue;
    }
    let old = mem.read(pid);
    mem.write(pid, pid, Register { value: arg, seq: old.seq + 1, prev: old.value });
    Step::Return(None)
}

/// Scans read every register in a single action. Linearizable.
#[derive(Clone, Copy, Debug, Default)]
pub struct AtomicMock;

impl Algorithm for AtomicMock {
    fn name(&self) -> &'static str {
        "AtomicMock"
    }

    fn step(&self, pid: usize, _local: &mut Local, frame: &mut Frame, mem: &mut Memory) -> Step {
        match frame.request {
            Request::Update(arg) => plain_update(pid, arg, frame, mem),
            Request::Scan if frame.pc == 0 => Step::Continue,
            Request::Scan => Step::Return(Some(values(&mem.read_all()))),
        }
    }
}

/// Scans read the registers once, one per action.
#[derive(Clone, Copy, Debug, Default)]
pub struct SingleCollect;

impl Algorithm for SingleCollect {
    fn name(&self) -> &'static str {
        "SingleCollect"
    }

    fn step(&self, pid: usize, _local: &mut Local, frame: &mut Frame, mem: &mut Memory) -> Step {
        match frame.request {
            Request::Update(arg) => plain_update(pid, arg, frame, mem),
            Request::Scan => {
                frame.collect.push(mem.read(frame.pc));
                if frame.collect.len() == mem.n() {
                    Step::Return(Some(values(&frame.collect)))
                } else {
                    Step::Continue
                }
            }
        }
    }
}

/// Updates write `(seq, value)`; scans collect repeatedly until two
/// consecutive collects carry identical sequence numbers.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleCollectSeq;

impl Algorithm for DoubleCollectSeq {
    fn name(&self) -> &'static str {
        "DoubleCollectSeq"
    }

    fn step(&self, pid: usize, local: &mut Local, frame: &mut Frame, mem: &mut Memory) -> Step {
        match frame.request {
            Request::Update(_) if frame.pc == 0 => {
                local.counter += 1;
                Step::Continue
            }
            Request::Update(arg) => {
                let old = mem.read(pid);
                mem.write(pid, pid, Register { value: arg, seq: local.counter, prev: old.value });
                Step::Return(None)
            }
            Request::Scan => {
                let n = mem.n();
                frame.collect.push(mem.read(frame.collect.len()));
                if frame.collect.len() < n {
                    return Step::Continue;
                }
                let collect = std::mem::take(&mut frame.collect);
                let same =
                    frame.previous.as_ref().is_some_and(|prev| prev.iter().zip(&collect).all(|(a, b)| a.seq == b.seq));
                if same {
                    Step::Return(Some(values(&collect)))
                } else {
                    frame.previous = Some(collect);
                    Step::Continue
                }
            }
        }
    }
}

/// Not schedule-based: a scan reports the previous value of any register whose
/// current value is even and non-zero. Behaves like [`AtomicMock`] on 0/1 values.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParityToy;

impl Algorithm for ParityToy {
    fn name(&self) -> &'static str {
        "ParityToy"
    }

    fn step(&self, pid: usize, _local: &mut Local, frame: &mut Frame, mem: &mut Memory) -> Step {
        match frame.request {
            Request::Update(arg) => plain_update(pid, arg, frame, mem),
            Request::Scan if frame.pc == 0 => Step::Continue,
            Request::Scan => Step::Return(Some(
                mem.read_all()
                    .iter()
                    .map(|r| if r.value.0 != 0 && r.value.0 % 2 == 0 { r.prev } else { r.value })
                    .collect(),
            )),
        }
    }
}

static BUILTIN: [&(dyn Algorithm + 'static); 4] = [&AtomicMock, &SingleCollect, &DoubleCollectSeq, &ParityToy];

pub fn builtin_models() -> Vec<&'static dyn Algorithm> {
    BUILTIN.to_vec()
}

pub fn model_by_name(name: &str) -> Option<&'static dyn Algorithm> {
    BUILTIN.iter().copied().find(|m| m.name() == name)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("simulation needs at least 2 processes, got {0}")]
    TooFewProcesses(usize),
    #[error("schedule step {step} names process {pid}, but there are {n} processes")]
    PidOutOfRange { step: usize, pid: usize, n: usize },
    #[error("variant supplies {got} update arguments for process {pid}, script has {want}")]
    VariantShape { pid: usize, got: usize, want: usize },
}

#[derive(Clone, Debug)]
struct Proc {
    local: Local,
    next: usize,
    current: Option<(i64, Frame)>,
}

/// Incremental executor; cloning it forks the simulated system.
#[derive(Clone, Debug)]
pub struct Simulator<'a> {
    model: &'a dyn Algorithm,
    scripts: &'a OpScript,
    mem: Memory,
    procs: Vec<Proc>,
    events: Vec<RawEvent>,
    time: i64,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a dyn Algorithm, scripts: &'a OpScript) -> Result<Self, SimError> {
        let n = scripts.n();
        if n < 2 {
            return Err(SimError::TooFewProcesses(n));
        }
        Ok(Simulator {
            model,
            scripts,
            mem: Memory::new(n),
            procs: vec![Proc { local: Local::default(), next: 0, current: None }; n],
            events: Vec::new(),
            time: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.scripts.n()
    }

    /// Number of steps taken so far, no-ops included.
    pub fn time(&self) -> i64 {
        self.time
    }

    /// Whether `pid` still has an operation in flight or left to invoke.
    pub fn has_work(&self, pid: usize) -> bool {
        let p = &self.procs[pid];
        p.current.is_some() || p.next < self.scripts.processes[pid].len()
    }

    /// Lets `pid` take one action. Returns false if the step was a no-op.
    ///
    /// Panics if `pid` is out of range.
    pub fn step(&mut self, pid: usize) -> bool {
        let t = self.time;
        self.time += 1;
        let p = &mut self.procs[pid];
        if p.current.is_none() {
            let Some(&req) = self.scripts.processes[pid].get(p.next) else {
                return false;
            };
            p.next += 1;
            p.current = Some((t, Frame::new(req)));
        }
        let (start, frame) = p.current.as_mut().expect("operation in flight");
        let outcome = self.model.step(pid, &mut p.local, frame, &mut self.mem);
        frame.pc += 1;
        if let Step::Return(ret) = outcome {
            let op = match frame.request {
                Request::Update(arg) => Op::Update { arg },
                Request::Scan => Op::Scan { ret },
            };
            self.events.push(RawEvent { pid, start: *start, end: End::At(t), op });
            p.current = None;
        }
        true
    }

    /// The execution so far; operations still in flight are pending.
    pub fn execution(&self) -> Execution {
        let mut events = self.events.clone();
        for (pid, p) in self.procs.iter().enumerate() {
            if let Some((start, frame)) = &p.current {
                let op = match frame.request {
                    Request::Update(arg) => Op::Update { arg },
                    Request::Scan => Op::Scan { ret: None },
                };
                events.push(RawEvent { pid, start: *start, end: End::Pending, op });
            }
        }
        Execution::new(self.scripts.n(), events).expect("pids come from the script")
    }
}

/// Replays `sched` against `scripts`. Operations never reached simply do not appear.
pub fn run(model: &dyn Algorithm, sched: &Schedule, scripts: &OpScript) -> Result<Execution, SimError> {
    let mut sim = Simulator::new(model, scripts)?;
    let n = scripts.n();
    for (step, &pid) in sched.steps.iter().enumerate() {
        if pid >= n {
            return Err(SimError::PidOutOfRange { step, pid, n });
        }
        sim.step(pid);
    }
    Ok(sim.execution())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct SimFileError {
    pub line: usize,
    pub msg: String,
}

/// Parses a simulation file:
///
/// ```text
/// n=2
/// p0: update(1) scan
/// p1: update(2) update(3)
/// schedule: 1 0 1 1 0 0 0 1
/// ```
///
/// Processes without a `p<i>:` line do nothing. `#` starts a comment.
pub fn parse_sim_file(text: &str) -> Result<(OpScript, Schedule), SimFileError> {
    let mut n = None;
    let mut scripts: Vec<Vec<Request>> = Vec::new();
    let mut schedule = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let err = |msg: String| SimFileError { line, msg };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(v) = body.strip_prefix("n=") {
            let v: usize = v.trim().parse().map_err(|_| err(format!("bad process count `{v}`")))?;
            n = Some(v);
            scripts = vec![Vec::new(); v];
            continue;
        }
        let Some(n) = n else {
            return Err(err("expected `n=` before anything else".into()));
        };
        let (head, rest) = body.split_once(':').ok_or_else(|| err(format!("expected `<key>:` in `{body}`")))?;
        let head = head.trim();
        if head == "schedule" {
            let steps = rest
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad pid `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            schedule = Some(Schedule::new(steps));
            continue;
        }
        let pid: usize =
            head.strip_prefix('p').and_then(|p| p.parse().ok()).ok_or_else(|| err(format!("unknown key `{head}`")))?;
        if pid >= n {
            return Err(err(format!("process {pid} out of range for n={n}")));
        }
        for tok in rest.split_whitespace() {
            let req = if tok == "scan" {
                Request::Scan
            } else if let Some(v) = tok.strip_prefix("update(").and_then(|t| t.strip_suffix(')')) {
                Request::Update(Value(v.parse().map_err(|_| err(format!("bad update argument `{v}`")))?))
            } else {
                return Err(err(format!("unknown operation `{tok}`")));
            };
            scripts[pid].push(req);
        }
    }
    if n.is_none() {
        return Err(SimFileError { line: 0, msg: "missing `n=` header".into() });
    }
    Ok((OpScript::new(scripts), schedule.unwrap_or_default()))
}

/// Inverse of [`parse_sim_file`].
pub fn format_sim_file(scripts: &OpScript, sched: &Schedule) -> String {
    let mut out = format!("n={}\n", scripts.n());
    for (pid, reqs) in scripts.processes.iter().enumerate() {
        let ops: Vec<String> = reqs.iter().map(Request::to_string).collect();
        out.push_str(format!("p{pid}: {}", ops.join(" ")).trim_end());
        out.push('\n');
    }
    out.push_str(format!("schedule: {sched}").trim_end());
    out.push('\n');
    out
}

/// Replacement update arguments, per process in script order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilarityVariant {
    pub args: Vec<Vec<Value>>,
}

impl SimilarityVariant {
    /// The script with the same operation kinds and these update arguments.
    pub fn apply(&self, scripts: &OpScript) -> Result<OpScript, SimError> {
        let mut out = scripts.clone();
        for (pid, reqs) in out.processes.iter_mut().enumerate() {
            let args = self.args.get(pid).map(Vec::as_slice).unwrap_or(&[]);
            let want = reqs.iter().filter(|r| matches!(r, Request::Update(_))).count();
            if args.len() != want {
                return Err(SimError::VariantShape { pid, got: args.len(), want });
            }
            let mut it = args.iter();
            for r in reqs.iter_mut() {
                if let Request::Update(v) = r {
                    *v = *it.next().expect("length checked");
                }
            }
        }
        Ok(out)
    }
}

/// Tries to refute the schedule-based property on one schedule.
///
/// Returns false if some variant changes an event boundary or kind, or if no
/// choice of source updates explains every run's scan results at once. A true
/// result only means this variant set does not refute the property.
pub fn probe_schedule_based(
    model: &dyn Algorithm,
    sched: &Schedule,
    scripts: &OpScript,
    variants: &[SimilarityVariant],
) -> Result<bool, SimError> {
    let base = run(model, sched, scripts)?;
    let mut runs = vec![base];
    for v in variants {
        runs.push(run(model, sched, &v.apply(scripts)?)?);
    }
    let base = &runs[0];
    let skeleton = |x: &Execution| -> Vec<(EventId, usize, bool, i64, End)> {
        x.events().iter().map(|e| (e.id, e.pid, e.is_scan(), e.start, e.end)).collect()
    };
    let sk = skeleton(base);
    if runs.iter().any(|r| skeleton(r) != sk) {
        return Ok(false);
    }
    for s in base.complete_scans() {
        for i in 0..base.n() {
            let explained = base
                .updates_of(i)
                .any(|u| runs.iter().all(|r| r.event(s).ret().and_then(|ret| ret.get(i).copied()) == r.event(u).arg()));
            if !explained {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
