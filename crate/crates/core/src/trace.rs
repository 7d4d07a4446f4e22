//! Executions of snapshot objects as sets of high-level events.
//!
//! An [`Execution`] stores only the invocation and response boundaries of each
//! operation. Boundaries are global integer timestamps standing for the index
//! of a low-level action, so two high-level events are ordered exactly when one
//! returns before the other is invoked.
//!
//! Every execution carries one synthetic initial update per process. The
//! initial update of process `i` occupies `(-2n + 2i, -2n + 2i + 1)`, which puts
//! all of them before any event with a non-negative timestamp.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// An element of the value set written by updates and returned by scans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(pub u64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies an event by its process and its position among that process's events.
///
/// Sequence number 0 is the synthetic initial update; the `k`-th operation of
/// the process (ordered by invocation time) has sequence number `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId {
    pub pid: usize,
    pub seq: usize,
}

impl EventId {
    pub fn new(pid: usize, seq: usize) -> Self {
        EventId { pid, seq }
    }

    pub fn initial(pid: usize) -> Self {
        EventId { pid, seq: 0 }
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}.{}", self.pid, self.seq)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed event id `{0}` (expected p<pid>.<seq>)")]
pub struct EventIdError(String);

impl FromStr for EventId {
    type Err = EventIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || EventIdError(s.to_string());
        let rest = s.strip_prefix('p').ok_or_else(err)?;
        let (pid, seq) = rest.split_once('.').ok_or_else(err)?;
        Ok(EventId { pid: pid.parse().map_err(|_| err())?, seq: seq.parse().map_err(|_| err())? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Scan,
    Update,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Scan => "scan",
            Kind::Update => "update",
        })
    }
}

/// Response boundary of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum End {
    At(i64),
    Pending,
}

/// The operation an event performs, with its argument or return value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Update {
        arg: Value,
    },
    /// `ret` is `None` exactly when the scan is pending.
    Scan {
        ret: Option<Vec<Value>>,
    },
}

/// A high-level event as supplied to [`Execution::new`], before ids are assigned.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RawEvent {
    pub pid: usize,
    pub start: i64,
    pub end: End,
    pub op: Op,
}

impl RawEvent {
    pub fn update(pid: usize, start: i64, end: End, arg: u64) -> Self {
        RawEvent { pid, start, end, op: Op::Update { arg: Value(arg) } }
    }

    pub fn scan(pid: usize, start: i64, end: End, ret: Option<Vec<u64>>) -> Self {
        RawEvent { pid, start, end, op: Op::Scan { ret: ret.map(|r| r.into_iter().map(Value).collect()) } }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub id: EventId,
    pub pid: usize,
    pub start: i64,
    pub end: End,
    pub op: Op,
}

impl Event {
    pub fn kind(&self) -> Kind {
        match self.op {
            Op::Update { .. } => Kind::Update,
            Op::Scan { .. } => Kind::Scan,
        }
    }

    pub fn is_scan(&self) -> bool {
        self.kind() == Kind::Scan
    }

    pub fn is_update(&self) -> bool {
        self.kind() == Kind::Update
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.end, End::At(_))
    }

    pub fn is_initial(&self) -> bool {
        self.id.seq == 0
    }

    pub fn end_time(&self) -> Option<i64> {
        match self.end {
            End::At(t) => Some(t),
            End::Pending => None,
        }
    }

    pub fn arg(&self) -> Option<Value> {
        match self.op {
            Op::Update { arg } => Some(arg),
            Op::Scan { .. } => None,
        }
    }

    pub fn ret(&self) -> Option<&[Value]> {
        match &self.op {
            Op::Scan { ret: Some(r) } => Some(r),
            _ => None,
        }
    }
}

/// Real-time precedence: `a` returns before `b` is invoked.
///
/// A pending event precedes nothing.
pub fn precedes(a: &Event, b: &Event) -> bool {
    match a.end {
        End::At(t) => t < b.start,
        End::Pending => false,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("process count must be at least 1")]
    NoProcesses,
    #[error("event references pid {pid} but the execution has {n} processes")]
    PidOutOfRange { pid: usize, n: usize },
    #[error("{got} initial values given for {n} processes")]
    InitialArity { got: usize, n: usize },
}

/// A finite execution over `n` processes.
///
/// `events()[pid]` is the initial update of `pid`; the remaining events follow
/// ordered by `(start, pid)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Execution {
    n: usize,
    events: Vec<Event>,
    /// Per process, indices into `events` in sequence-number order.
    by_pid: Vec<Vec<usize>>,
}

impl Execution {
    /// Builds an execution with initial updates of value 0.
    pub fn new(n: usize, events: Vec<RawEvent>) -> Result<Self, TraceError> {
        Self::with_initial(n, vec![Value(0); n], events)
    }

    pub fn with_initial(n: usize, initial: Vec<Value>, mut raw: Vec<RawEvent>) -> Result<Self, TraceError> {
        if n == 0 {
            return Err(TraceError::NoProcesses);
        }
        if initial.len() != n {
            return Err(TraceError::InitialArity { got: initial.len(), n });
        }
        if let Some(e) = raw.iter().find(|e| e.pid >= n) {
            return Err(TraceError::PidOutOfRange { pid: e.pid, n });
        }
        let n_i = n as i64;
        let mut events: Vec<Event> = initial
            .into_iter()
            .enumerate()
            .map(|(pid, arg)| {
                let p = pid as i64;
                Event {
                    id: EventId::initial(pid),
                    pid,
                    start: -2 * n_i + 2 * p,
                    end: End::At(-2 * n_i + 2 * p + 1),
                    op: Op::Update { arg },
                }
            })
            .collect();
        raw.sort_by_key(|e| (e.start, e.pid));
        let mut next_seq = vec![1usize; n];
        let mut by_pid: Vec<Vec<usize>> = (0..n).map(|pid| vec![pid]).collect();
        for e in raw {
            let seq = next_seq[e.pid];
            next_seq[e.pid] += 1;
            by_pid[e.pid].push(events.len());
            events.push(Event { id: EventId::new(e.pid, seq), pid: e.pid, start: e.start, end: e.end, op: e.op });
        }
        Ok(Execution { n, events, by_pid })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, idx: usize) -> &Event {
        &self.events[idx]
    }

    /// The non-initial events.
    pub fn operations(&self) -> &[Event] {
        &self.events[self.n..]
    }

    pub fn initial_values(&self) -> Vec<Value> {
        self.events[..self.n].iter().map(|e| e.arg().unwrap_or_default()).collect()
    }

    pub fn index_of(&self, id: EventId) -> Option<usize> {
        self.by_pid.get(id.pid)?.get(id.seq).copied()
    }

    pub fn get(&self, id: EventId) -> Option<&Event> {
        self.index_of(id).map(|i| &self.events[i])
    }

    /// Indices of all events of `pid`, initial update first.
    pub fn process_events(&self, pid: usize) -> &[usize] {
        &self.by_pid[pid]
    }

    /// Indices of the update events of `pid`, in real-time order.
    pub fn updates_of(&self, pid: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_pid[pid].iter().copied().filter(move |&i| self.events[i].is_update())
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        precedes(&self.events[a], &self.events[b])
    }

    /// Indices of the complete events, initial updates included.
    pub fn complete_events(&self) -> Vec<usize> {
        (0..self.events.len()).filter(|&i| self.events[i].is_complete()).collect()
    }

    /// Indices of the complete scans ordered by invocation time.
    pub fn complete_scans(&self) -> Vec<usize> {
        (0..self.events.len()).filter(|&i| self.events[i].is_scan() && self.events[i].is_complete()).collect()
    }

    /// Returns the same skeleton with update arguments replaced by `revalue`.
    pub fn map_args(&self, mut revalue: impl FnMut(&Event) -> Value) -> Execution {
        let mut out = self.clone();
        for (e, orig) in out.events.iter_mut().zip(&self.events) {
            if let Op::Update { arg } = &mut e.op {
                *arg = revalue(orig);
            }
        }
        out
    }

    /// Checks every structural invariant and reports each violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();
        let n = self.n;

        for (pid, idxs) in self.by_pid.iter().enumerate() {
            match idxs.first().map(|&i| &self.events[i]) {
                Some(e) if e.is_initial() && e.is_update() && e.is_complete() => {}
                _ => findings.push(Finding::MissingInitial { pid }),
            }
            for w in idxs.windows(2) {
                let (a, b) = (&self.events[w[0]], &self.events[w[1]]);
                if !precedes(a, b) {
                    if a.is_complete() {
                        findings.push(Finding::IntraProcessOverlap { first: a.id, second: b.id });
                    } else {
                        findings.push(Finding::PendingNotLast { pending: a.id });
                    }
                }
            }
        }

        let last_initial = self.events[..n].iter().filter_map(|e| e.end_time()).max().unwrap_or(i64::MIN);
        for e in self.operations() {
            if e.start <= last_initial {
                findings.push(Finding::BeforeInitial { event: e.id });
            }
            if let End::At(t) = e.end {
                if t <= e.start {
                    findings.push(Finding::EmptyInterval { event: e.id });
                }
            }
            match (&e.op, e.is_complete()) {
                (Op::Scan { ret: Some(r) }, true) if r.len() != n => {
                    findings.push(Finding::ArityMismatch { event: e.id, got: r.len(), n })
                }
                (Op::Scan { ret: None }, true) => findings.push(Finding::MissingReturn { event: e.id }),
                (Op::Scan { ret: Some(_) }, false) => findings.push(Finding::UnexpectedReturn { event: e.id }),
                _ => {}
            }
        }

        let mut stamps: Vec<(i64, EventId)> = Vec::new();
        for e in &self.events {
            stamps.push((e.start, e.id));
            if let End::At(t) = e.end {
                if t != e.start {
                    stamps.push((t, e.id));
                }
            }
        }
        stamps.sort();
        for w in stamps.windows(2) {
            if w[0].0 == w[1].0 {
                findings.push(Finding::DuplicateTimestamp { time: w[0].0, first: w[0].1, second: w[1].1 });
            }
        }

        ValidationReport { findings }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Finding {
    MissingInitial { pid: usize },
    IntraProcessOverlap { first: EventId, second: EventId },
    PendingNotLast { pending: EventId },
    BeforeInitial { event: EventId },
    EmptyInterval { event: EventId },
    ArityMismatch { event: EventId, got: usize, n: usize },
    MissingReturn { event: EventId },
    UnexpectedReturn { event: EventId },
    DuplicateTimestamp { time: i64, first: EventId, second: EventId },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::MissingInitial { pid } => write!(f, "missing initial update for process {pid}"),
            Finding::IntraProcessOverlap { first, second } => {
                write!(f, "intra-process overlap between {first} and {second}")
            }
            Finding::PendingNotLast { pending } => {
                write!(f, "pending event {pending} is followed by another event of its process")
            }
            Finding::BeforeInitial { event } => {
                write!(f, "event {event} starts before the initial updates complete")
            }
            Finding::EmptyInterval { event } => write!(f, "event {event} does not start before it ends"),
            Finding::ArityMismatch { event, got, n } => {
                write!(f, "arity mismatch: scan {event} returns {got} values for {n} processes")
            }
            Finding::MissingReturn { event } => write!(f, "complete scan {event} has no return value"),
            Finding::UnexpectedReturn { event } => write!(f, "pending scan {event} carries a return value"),
            Finding::DuplicateTimestamp { time, first, second } => {
                write!(f, "duplicate timestamp {time} shared by {first} and {second}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `n=<int>` header")]
    MissingHeader,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn parse_values(line: usize, s: &str) -> Result<Vec<Value>, ParseError> {
    s.split(',')
        .map(|v| v.trim().parse::<u64>().map(Value).map_err(|_| syntax(line, format!("bad value `{v}`"))))
        .collect()
}

/// Parses the text trace format.
///
/// ```text
/// n=2
/// # optional; defaults to all zeros
/// init=0,0
/// 1 update 0 2 arg=2
/// 0 scan 5 6 ret=1,2
/// 1 update 3 pending arg=3
/// ```
///
/// Structural problems (overlaps, arity) are left for [`Execution::validate`].
pub fn parse_trace(text: &str) -> Result<Execution, ParseError> {
    let mut n: Option<(usize, usize)> = None;
    let mut initial: Option<(usize, Vec<Value>)> = None;
    let mut raw = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = line.strip_prefix("n=") {
            if n.is_some() {
                return Err(syntax(lineno, "duplicate `n=` header"));
            }
            let v: usize = v.trim().parse().map_err(|_| syntax(lineno, format!("bad process count `{v}`")))?;
            if v == 0 {
                return Err(syntax(lineno, "process count must be at least 1"));
            }
            n = Some((v, lineno));
            continue;
        }
        if let Some(v) = line.strip_prefix("init=") {
            initial = Some((lineno, parse_values(lineno, v)?));
            continue;
        }
        let Some((n, _)) = n else {
            return Err(syntax(lineno, "event before `n=` header"));
        };

        let mut fields = line.split_whitespace();
        let mut next = |what: &str| fields.next().ok_or_else(|| syntax(lineno, format!("missing {what}")));
        let pid_s = next("pid")?;
        let pid: usize = pid_s.parse().map_err(|_| syntax(lineno, format!("bad pid `{pid_s}`")))?;
        if pid >= n {
            return Err(syntax(lineno, format!("pid {pid} out of range for n={n}")));
        }
        let kind = match next("kind")? {
            "scan" => Kind::Scan,
            "update" => Kind::Update,
            other => return Err(syntax(lineno, format!("unknown kind `{other}`"))),
        };
        let start_s = next("start")?;
        let start: i64 = start_s.parse().map_err(|_| syntax(lineno, format!("bad start `{start_s}`")))?;
        let end = match next("end")? {
            "pending" => End::Pending,
            s => End::At(s.parse().map_err(|_| syntax(lineno, format!("bad end `{s}`")))?),
        };

        let mut arg = None;
        let mut ret = None;
        for field in fields {
            if let Some(v) = field.strip_prefix("arg=") {
                arg = Some(v.parse::<u64>().map(Value).map_err(|_| syntax(lineno, format!("bad arg `{v}`")))?);
            } else if let Some(v) = field.strip_prefix("ret=") {
                ret = Some(parse_values(lineno, v)?);
            } else {
                return Err(syntax(lineno, format!("unexpected field `{field}`")));
            }
        }
        let op = match kind {
            Kind::Update => {
                if ret.is_some() {
                    return Err(syntax(lineno, "update cannot carry ret="));
                }
                Op::Update { arg: arg.ok_or_else(|| syntax(lineno, "update requires arg="))? }
            }
            Kind::Scan => {
                if arg.is_some() {
                    return Err(syntax(lineno, "scan cannot carry arg="));
                }
                Op::Scan { ret }
            }
        };
        raw.push(RawEvent { pid, start, end, op });
    }

    let (n, _) = n.ok_or(ParseError::MissingHeader)?;
    let initial = match initial {
        Some((line, v)) if v.len() != n => {
            return Err(syntax(line, format!("init= lists {} values for n={n}", v.len())));
        }
        Some((_, v)) => v,
        None => vec![Value(0); n],
    };
    // pids were range-checked per line and the initial arity above
    Ok(Execution::with_initial(n, initial, raw).expect("checked during parsing"))
}

fn join_values(values: &[Value]) -> String {
    values.iter().map(Value::to_string).collect::<Vec<_>>().join(",")
}

/// Serializes an execution in the trace format, events sorted by start.
///
/// Initial updates are implicit; an `init=` line is written only when some
/// initial value differs from 0.
pub fn serialize_trace(exec: &Execution) -> String {
    let mut out = format!("n={}\n", exec.n());
    let init = exec.initial_values();
    if init.iter().any(|v| v.0 != 0) {
        out.push_str(&format!("init={}\n", join_values(&init)));
    }
    let mut ops: Vec<&Event> = exec.operations().iter().collect();
    ops.sort_by_key(|e| (e.start, e.pid, e.id.seq));
    for e in ops {
        let end = match e.end {
            End::At(t) => t.to_string(),
            End::Pending => "pending".to_string(),
        };
        out.push_str(&format!("{} {} {} {}", e.pid, e.kind(), e.start, end));
        match &e.op {
            Op::Update { arg } => out.push_str(&format!(" arg={arg}")),
            Op::Scan { ret: Some(r) } => out.push_str(&format!(" ret={}", join_values(r))),
            Op::Scan { ret: None } => {}
        }
        out.push('\n');
    }
    out
}
