use std::collections::{BTreeMap, HashSet};
use std::fmt;

use super::protocol::{authenticate, ErrorCode, Request, Response};
use super::scenario::{policy_artifact, program_artifact, Scenario, ScenarioError};
use crate::history::{EventKind, HistoryError, HistoryStore, Snapshot};
use crate::judgement::{
    judge, parse_prop, run_schedule, JudgeError, JudgementLog, Refusal, StateSource,
};
use crate::monitor::{
    check_interrupt_latency, check_resources, detect_suspected_loop, set_flag, CycleDetector,
    Finding, FindingKind, MonitorConfig,
};
use crate::trust::{
    check_snapshot, check_write, verify_launch, MeasurementLog, Mismatch, Policy, ReportKind,
    SecurityReport, SeverityTable, Target, TrustClass, TrustLedger, WriteEvent, Writer,
};
use crate::vm::{assemble, Program, VmState, FLAG_ADDR};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcStatus {
    Running,
    Halted,
    Faulted,
    Killed,
    /// Not launched: its artifacts failed attestation.
    Refused,
}

impl fmt::Display for ProcStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcStatus::Running => "running",
            ProcStatus::Halted => "halted",
            ProcStatus::Faulted => "faulted",
            ProcStatus::Killed => "killed",
            ProcStatus::Refused => "refused",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttestStatus {
    Verified,
    Mismatch,
    /// No golden manifest was configured.
    Unverified,
}

impl fmt::Display for AttestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttestStatus::Verified => "ok",
            AttestStatus::Mismatch => "mismatch",
            AttestStatus::Unverified => "unverified",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Process {
    pub pid: String,
    pub status: ProcStatus,
    pub program: Option<Program>,
    pub state: VmState,
    pub history: HistoryStore,
    pub policy: Policy,
    cycle: CycleDetector,
    /// Last out-of-range value reported per target.
    range_reported: BTreeMap<Target, u64>,
    nonresponsive_since: Option<u64>,
    divergence_reported: bool,
    loop_reported: bool,
    budget_reported: bool,
}

impl Process {
    fn severities(&self) -> &SeverityTable {
        &self.policy.severities
    }

    /// First 8 hex characters of the latest snapshot digest.
    pub fn confirm_token(&self) -> Option<String> {
        self.history
            .latest()
            .map(|s| s.state_digest.to_hex()[..8].to_string())
    }
}

/// Ordered log of everything the supervisor concluded, plus the trust ledger
/// those reports feed.
#[derive(Clone, Debug, Default)]
struct Journal {
    lines: Vec<String>,
    reports: Vec<SecurityReport>,
    findings: Vec<Finding>,
    ledger: TrustLedger,
}

impl Journal {
    fn event(&mut self, tick: u64, pid: &str, kind: EventKind) {
        self.lines
            .push(format!("EVENT tick={tick} pid={pid} kind={kind}"));
    }

    fn report(&mut self, report: SecurityReport) {
        self.lines.push(report.log_line());
        self.ledger.update(&report);
        self.reports.push(report);
    }

    fn finding(&mut self, finding: Finding, severities: &SeverityTable) {
        self.lines.push(finding.log_line());
        let report = SecurityReport::from_finding(&finding, severities);
        self.findings.push(finding);
        self.report(report);
    }

    fn refusal(&mut self, refusal: &Refusal) {
        self.lines.push(refusal.log_line());
    }
}

struct ProcTable<'a>(&'a [Process]);

impl StateSource for ProcTable<'_> {
    fn state_of(&self, pid: &str) -> Option<&VmState> {
        self.0
            .iter()
            .find(|p| p.pid == pid && p.status != ProcStatus::Refused)
            .map(|p| &p.state)
    }

    fn pids(&self) -> Vec<String> {
        self.0
            .iter()
            .filter(|p| p.status != ProcStatus::Refused)
            .map(|p| p.pid.clone())
            .collect()
    }
}

/// One request line, optionally pinned to the tick boundary it is served at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptLine {
    pub at: Option<u64>,
    pub text: String,
}

/// Parses a request script: one request per line, `@<tick> ` prefix to serve
/// it at that tick boundary, blank lines and `//` comments ignored.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, ScenarioError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with("//") {
            continue;
        }
        match line.strip_prefix('@') {
            Some(rest) => {
                let (tick, req) = rest.split_once(' ').unwrap_or((rest, ""));
                let at = tick.parse().map_err(|_| {
                    ScenarioError::Invalid(format!(
                        "request script line {}: bad tick {tick:?}",
                        i + 1
                    ))
                })?;
                out.push(ScriptLine {
                    at: Some(at),
                    text: req.to_string(),
                });
            }
            None => out.push(ScriptLine {
                at: None,
                text: line.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Runs every process in lockstep under monitoring, judgement and trust rating.
#[derive(Clone, Debug)]
pub struct Supervisor {
    scenario: Scenario,
    procs: Vec<Process>,
    tick: u64,
    judgements: JudgementLog,
    refusals_logged: usize,
    journal: Journal,
    launch: MeasurementLog,
    attestation: AttestStatus,
    mismatches: Vec<Mismatch>,
    transcript: Vec<String>,
}

impl Supervisor {
    pub fn new(scenario: Scenario) -> Result<Supervisor, ScenarioError> {
        scenario.validate()?;
        let artifacts = scenario.artifacts();
        let (launch, attestation, mismatches) = match &scenario.manifest {
            Some(manifest) => {
                let outcome =
                    verify_launch(Some(manifest), &artifacts).expect("manifest is present");
                let status = if outcome.is_ok() {
                    AttestStatus::Verified
                } else {
                    AttestStatus::Mismatch
                };
                (outcome.log, status, outcome.mismatches)
            }
            None => {
                let mut log = MeasurementLog::new();
                for (name, bytes) in &artifacts {
                    log.measure_and_extend(name, bytes);
                }
                (log, AttestStatus::Unverified, Vec::new())
            }
        };

        let program_names: HashSet<String> = scenario
            .programs
            .iter()
            .flat_map(|p| [program_artifact(&p.pid), policy_artifact(&p.pid)])
            .collect();
        let bad_names: Vec<&str> = mismatches
            .iter()
            .filter_map(|m| match m {
                Mismatch::Entry { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect();
        let refuse_all = mismatches
            .iter()
            .any(|m| matches!(m, Mismatch::Missing { .. }))
            || bad_names.iter().any(|n| !program_names.contains(*n))
            || (bad_names.is_empty() && !mismatches.is_empty());

        let mut journal = Journal::default();
        let mut procs = Vec::with_capacity(scenario.programs.len());
        for entry in &scenario.programs {
            let own: Vec<&str> = bad_names
                .iter()
                .copied()
                .filter(|n| *n == program_artifact(&entry.pid) || *n == policy_artifact(&entry.pid))
                .collect();
            if refuse_all || !own.is_empty() {
                let details = if own.is_empty() {
                    "artifact=supervisor-config".to_string()
                } else {
                    format!("artifact={}", own.join(","))
                };
                journal.report(SecurityReport::new(
                    ReportKind::AttestationMismatch,
                    0,
                    &entry.pid,
                    details,
                    &SeverityTable::default(),
                ));
                procs.push(Process {
                    pid: entry.pid.clone(),
                    status: ProcStatus::Refused,
                    program: None,
                    state: VmState::new(),
                    history: HistoryStore::new(scenario.history),
                    policy: Policy::default(),
                    cycle: CycleDetector::new(),
                    range_reported: BTreeMap::new(),
                    nonresponsive_since: None,
                    divergence_reported: false,
                    loop_reported: false,
                    budget_reported: false,
                });
                continue;
            }

            let policy = match &entry.policy {
                Some(bytes) => {
                    let text = std::str::from_utf8(bytes).map_err(|_| {
                        ScenarioError::Invalid(format!("{}: policy is not UTF-8", entry.pid))
                    })?;
                    Policy::from_json(text)
                        .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", entry.pid)))?
                }
                None => Policy::default(),
            };
            let source = std::str::from_utf8(&entry.source).map_err(|_| {
                ScenarioError::Invalid(format!("{}: program is not UTF-8", entry.pid))
            })?;
            let program = assemble(source)
                .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", entry.pid)))?;

            let mut proc = Process {
                pid: entry.pid.clone(),
                status: ProcStatus::Running,
                state: VmState::new(),
                history: HistoryStore::new(scenario.history),
                policy,
                cycle: CycleDetector::new(),
                range_reported: BTreeMap::new(),
                nonresponsive_since: None,
                divergence_reported: false,
                loop_reported: false,
                budget_reported: false,
                program: Some(program),
            };
            let snap = proc
                .history
                .record(&proc.state, proc.program.as_ref().expect("assembled"))
                .expect("first record")
                .clone();
            proc.history
                .record_event(0, EventKind::ProcessStarted)
                .expect("first event");
            journal.event(0, &proc.pid, EventKind::ProcessStarted);
            proc.cycle
                .detect_certified_divergence(&proc.pid, &snap, proc.history.events());
            check_ranges(&mut proc, &mut journal);
            procs.push(proc);
        }

        let mut sup = Supervisor {
            scenario,
            procs,
            tick: 0,
            judgements: JudgementLog::new(),
            refusals_logged: 0,
            journal,
            launch,
            attestation,
            mismatches,
            transcript: Vec::new(),
        };
        sup.run_judgements();
        Ok(sup)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn processes(&self) -> &[Process] {
        &self.procs
    }

    pub fn process(&self, pid: &str) -> Option<&Process> {
        self.procs.iter().find(|p| p.pid == pid)
    }

    pub fn judgements(&self) -> &JudgementLog {
        &self.judgements
    }

    pub fn reports(&self) -> &[SecurityReport] {
        &self.journal.reports
    }

    pub fn findings(&self) -> &[Finding] {
        &self.journal.findings
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.journal.ledger
    }

    pub fn launch(&self) -> &MeasurementLog {
        &self.launch
    }

    pub fn attestation(&self) -> AttestStatus {
        self.attestation
    }

    pub fn mismatches(&self) -> &[Mismatch] {
        &self.mismatches
    }

    pub fn any_refused(&self) -> bool {
        self.procs.iter().any(|p| p.status == ProcStatus::Refused)
    }

    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    /// True once the run limit is reached or no process is still running.
    pub fn is_finished(&self) -> bool {
        self.tick >= self.scenario.run_limit
            || self.procs.iter().all(|p| p.status != ProcStatus::Running)
    }

    /// Advances every running process by one tick, then runs due judgements.
    pub fn step(&mut self) {
        let t = self.tick;
        let Supervisor {
            scenario,
            procs,
            journal,
            ..
        } = self;
        for proc in procs.iter_mut().filter(|p| p.status == ProcStatus::Running) {
            advance(proc, t, scenario, journal);
        }
        self.tick = t + 1;
        self.run_judgements();
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step();
        }
    }

    /// Runs to completion, serving each script line at its tick boundary.
    /// Lines without a tick, or pinned past the end of the run, are served
    /// afterwards in script order. Returns the rendered response blocks.
    pub fn run(&mut self, script: &[ScriptLine]) -> Vec<String> {
        let mut served = vec![false; script.len()];
        let mut out = Vec::new();
        loop {
            for (i, line) in script.iter().enumerate() {
                if !served[i] && line.at == Some(self.tick) {
                    served[i] = true;
                    out.push(self.serve(&line.text));
                }
            }
            if self.is_finished() {
                break;
            }
            self.step();
        }
        for (i, line) in script.iter().enumerate() {
            if !served[i] {
                out.push(self.serve(&line.text));
            }
        }
        out
    }

    /// Handles one request line and records it in the transcript.
    pub fn serve(&mut self, line: &str) -> String {
        let response = self.handle(line);
        let block = response.render(self.scenario.mac_key.as_ref());
        self.transcript.push(format!("@{} > {line}", self.tick));
        self.transcript.extend(block.lines().map(str::to_string));
        block
    }

    pub fn handle(&mut self, line: &str) -> Response {
        let text = match authenticate(self.scenario.mac_key.as_ref(), line) {
            Ok(text) => text,
            Err(code) => {
                let claimed = line
                    .split(super::protocol::MAC_MARKER)
                    .next()
                    .unwrap_or(line);
                let pid = Request::parse(claimed)
                    .ok()
                    .and_then(|r| r.pid().map(str::to_string))
                    .filter(|p| self.process(p).is_some())
                    .unwrap_or_else(|| "supervisor".to_string());
                self.journal.report(SecurityReport::new(
                    ReportKind::MessageIntegrityFailure,
                    self.tick,
                    &pid,
                    "request tag did not verify",
                    &SeverityTable::default(),
                ));
                return Response::err(code);
            }
        };
        let request = match Request::parse(text) {
            Ok(r) => r,
            Err(code) => return Response::err(code),
        };
        if let Some(pid) = request.pid() {
            if self.process(pid).is_none() {
                return Response::err(ErrorCode::UnknownPid);
            }
        }
        match request {
            Request::Ask { pid, prop } => self.ask(&pid, &prop),
            Request::Status { pid } => {
                Response::ok(self.selected(pid.as_deref()).map(status_line).collect())
            }
            Request::History { pid, range } => self.history(&pid, range),
            Request::Reports { pid } => {
                let lines: Vec<String> = self
                    .journal
                    .reports
                    .iter()
                    .filter(|r| pid.as_ref().is_none_or(|p| *p == r.pid))
                    .map(SecurityReport::log_line)
                    .collect();
                let mut body = vec![format!("reports={}", lines.len())];
                body.extend(lines);
                Response::ok(body)
            }
            Request::Trust { pid } => Response::ok(
                self.selected(pid.as_deref())
                    .map(|p| self.trust_line(&p.pid))
                    .collect(),
            ),
            Request::Attest => Response::ok(self.attest_lines()),
            Request::Kill { pid, confirm } => self.kill(&pid, confirm.as_deref()),
            Request::List => Response::ok(
                self.procs
                    .iter()
                    .map(|p| format!("pid={} status={}", p.pid, p.status))
                    .collect(),
            ),
        }
    }

    fn selected<'a>(&'a self, pid: Option<&'a str>) -> impl Iterator<Item = &'a Process> + 'a {
        self.procs
            .iter()
            .filter(move |p| pid.is_none_or(|q| p.pid == q))
    }

    fn ask(&mut self, pid: &str, prop: &str) -> Response {
        let Ok(prop) = parse_prop(prop) else {
            return Response::err(ErrorCode::BadProp);
        };
        if self.process(pid).map(|p| p.status) == Some(ProcStatus::Refused) {
            return Response::err(ErrorCode::Refused);
        }
        let result = judge(pid, &prop, &mut self.judgements, &ProcTable(&self.procs));
        self.flush_refusals();
        match result {
            Ok(record) => Response::line(format!("{} id={}", record.verdict.as_str(), record.id)),
            Err(JudgeError::UnknownPid(_)) => Response::err(ErrorCode::UnknownPid),
            Err(JudgeError::Eval(_)) => Response::err(ErrorCode::BadProp),
        }
    }

    fn history(&self, pid: &str, range: Option<(u64, u64)>) -> Response {
        let proc = self.process(pid).expect("pid checked");
        if proc.status == ProcStatus::Refused {
            return Response::err(ErrorCode::Refused);
        }
        let text = match range {
            None => proc.history.export_all(),
            Some((from, to)) => match proc.history.export(from, to) {
                Ok(t) => t,
                Err(HistoryError::EmptyRange { .. }) => {
                    return Response::err(ErrorCode::EmptyRange)
                }
                Err(_) => return Response::err(ErrorCode::BadArgs),
            },
        };
        Response::ok(text.lines().map(str::to_string).collect())
    }

    fn kill(&mut self, pid: &str, confirm: Option<&str>) -> Response {
        let tick = self.tick;
        let proc = self
            .procs
            .iter_mut()
            .find(|p| p.pid == pid)
            .expect("pid checked");
        match proc.status {
            ProcStatus::Running => {}
            ProcStatus::Refused => return Response::err(ErrorCode::Refused),
            _ => return Response::err(ErrorCode::NotRunning),
        }
        let expected = proc.confirm_token();
        let confirmed = matches!(
            (confirm, expected.as_deref()),
            (Some(given), Some(want)) if given.eq_ignore_ascii_case(want)
        );
        if !confirmed {
            return Response::err(ErrorCode::ConfirmationRequired);
        }
        proc.status = ProcStatus::Killed;
        proc.history
            .record_event(tick, EventKind::ProcessKilled)
            .expect("supervisor ticks are monotonic");
        self.journal.event(tick, pid, EventKind::ProcessKilled);
        Response::line(format!("killed pid={pid} tick={tick}"))
    }

    pub fn trust_line(&self, pid: &str) -> String {
        let ledger = &self.journal.ledger;
        format!(
            "pid={pid} score={} class={} reports={}",
            ledger.score(pid),
            ledger.class(pid),
            ledger.report_count(pid)
        )
    }

    pub fn trust_class(&self, pid: &str) -> TrustClass {
        self.journal.ledger.class(pid)
    }

    pub fn attest_lines(&self) -> Vec<String> {
        let mut lines = self.launch.render();
        lines.push(format!("attestation={}", self.attestation));
        lines.extend(self.mismatches.iter().map(|m| format!("mismatch {m}")));
        lines
    }

    fn run_judgements(&mut self) {
        run_schedule(
            &self.scenario.schedule,
            self.tick,
            &mut self.judgements,
            &ProcTable(&self.procs),
        );
        self.flush_refusals();
    }

    fn flush_refusals(&mut self) {
        for r in &self.judgements.refusals()[self.refusals_logged..] {
            self.journal.refusal(r);
        }
        self.refusals_logged = self.judgements.refusals().len();
    }

    /// `reports.log`: events, findings, reports and refusals in the order they occurred.
    pub fn report_log(&self) -> String {
        lines_text(&self.journal.lines)
    }

    pub fn transcript_log(&self) -> String {
        lines_text(&self.transcript)
    }

    pub fn attest_log(&self) -> String {
        lines_text(&self.attest_lines())
    }

    pub fn summary(&self) -> String {
        let mut lines = vec![
            format!("tick={}", self.tick),
            format!("attestation={}", self.attestation),
            format!("pcr={}", self.launch.pcr),
        ];
        for p in &self.procs {
            lines.push(format!(
                "pid={} status={} tick={} {}",
                p.pid,
                p.status,
                p.state.tick,
                self.trust_line(&p.pid)
                    .split_once(' ')
                    .map_or("", |(_, rest)| rest)
            ));
        }
        lines.push(format!(
            "judgements={} refusals={}",
            self.judgements.records().len(),
            self.judgements.refusals().len()
        ));
        lines_text(&lines)
    }
}

fn lines_text(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

fn status_line(p: &Process) -> String {
    if p.status == ProcStatus::Refused {
        return format!("pid={} status=refused", p.pid);
    }
    let snap = p.history.latest();
    format!(
        "pid={} status={} tick={} pc={} flags={} snapshot_tick={} snapshot={}",
        p.pid,
        p.status,
        p.state.tick,
        p.state.pc,
        Snapshot::capture(&p.state, p.program.as_ref().expect("launched")).flags_text(),
        snap.map_or(0, |s| s.tick),
        snap.map_or_else(String::new, |s| s.state_digest.to_hex()),
    )
}

/// Reports each declared target the first time it holds a given out-of-range value.
fn check_ranges(proc: &mut Process, journal: &mut Journal) {
    let out_of_range: Vec<Target> = proc
        .policy
        .ranges
        .decls()
        .iter()
        .filter(|d| {
            let v = d.target.read(&proc.state);
            v < d.lo || v > d.hi
        })
        .map(|d| d.target)
        .collect();
    proc.range_reported.retain(|t, _| out_of_range.contains(t));
    let reports = check_snapshot(
        &proc.policy.ranges,
        &proc.pid,
        &proc.state,
        proc.severities(),
    );
    for (target, report) in out_of_range.into_iter().zip(reports) {
        let value = target.read(&proc.state);
        if proc.range_reported.insert(target, value) != Some(value) {
            journal.report(report);
        }
    }
}

fn advance(proc: &mut Process, t: u64, scenario: &Scenario, journal: &mut Journal) {
    let program = proc
        .program
        .as_ref()
        .expect("running process has a program");
    let config: &MonitorConfig = &scenario.monitor;

    for (_, pid) in scenario
        .interrupts
        .iter()
        .filter(|(tick, pid)| *tick == t && *pid == proc.pid)
    {
        if let Ok(next) = proc.state.inject_interrupt(t) {
            proc.state = next;
            proc.history
                .record_event(t, EventKind::InterruptInjected)
                .expect("supervisor ticks are monotonic");
            journal.event(t, pid, EventKind::InterruptInjected);
        }
    }

    let (next, write) = proc.state.step_traced(program);
    if let Some(w) = write {
        let event = WriteEvent {
            writer: Writer::Process(proc.pid.clone()),
            addr: w.addr,
            tick: w.tick,
        };
        if let Some(report) = check_write(&proc.policy.protected, &event, proc.severities()) {
            journal.report(report);
        }
    }
    proc.state = next;
    let now = t + 1;
    if proc.state.halted {
        proc.status = ProcStatus::Halted;
    } else if proc.state.faulted {
        proc.status = ProcStatus::Faulted;
    }

    let mut findings = Vec::new();
    if now.is_multiple_of(scenario.sampling_stride) || !proc.state.is_live() {
        let snap = proc
            .history
            .record(&proc.state, program)
            .expect("supervisor ticks are monotonic")
            .clone();
        let certificate =
            proc.cycle
                .detect_certified_divergence(&proc.pid, &snap, proc.history.events());
        if let Some(f) = certificate.filter(|_| !proc.divergence_reported) {
            proc.divergence_reported = true;
            findings.push(f);
        }
        check_ranges(proc, journal);
        if !proc.loop_reported {
            if let Some(f) = detect_suspected_loop(&proc.pid, &proc.history, config) {
                proc.loop_reported = true;
                findings.push(f);
            }
        }
    }
    if let Some(f) = check_interrupt_latency(&proc.pid, &proc.state, config, now) {
        if proc.nonresponsive_since != proc.state.interrupt_since {
            proc.nonresponsive_since = proc.state.interrupt_since;
            findings.push(f);
        }
    }
    if !proc.budget_reported {
        if let Some(f) = check_resources(&proc.pid, &proc.state, config) {
            proc.budget_reported = true;
            findings.push(f);
        }
    }

    for f in findings {
        let kind = f.kind;
        let severities = proc.policy.severities.clone();
        journal.finding(f, &severities);
        if kind != FindingKind::CertifiedDivergence
            && proc.status == ProcStatus::Running
            && proc.state.mem[FLAG_ADDR as usize] != 1
        {
            proc.state = set_flag(&proc.state).expect("running process is live");
            proc.history
                .record_event(now, EventKind::FlagSet)
                .expect("supervisor ticks are monotonic");
            journal.event(now, &proc.pid, EventKind::FlagSet);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup(source: &str, limit: u64) -> Supervisor {
        Supervisor::new(Scenario::new(limit).with_program("p1", source)).unwrap()
    }

    #[test]
    fn halting_program_is_trusted() {
        let mut s = sup("LOADI r0, 1\nHALT\n", 100);
        s.run_to_end();
        let p = s.process("p1").unwrap();
        assert_eq!(p.status, ProcStatus::Halted);
        assert!(s.reports().is_empty());
        assert_eq!(
            s.trust_line("p1"),
            "pid=p1 score=100 class=Trusted reports=0"
        );
        assert_eq!(s.tick(), 2);
    }

    #[test]
    fn tight_loop_is_certified_once() {
        let mut s = sup("loop: JMP loop\n", 100);
        s.run_to_end();
        assert_eq!(s.process("p1").unwrap().status, ProcStatus::Running);
        assert_eq!(s.tick(), 100);
        assert_eq!(s.findings().len(), 1);
        assert_eq!(s.findings()[0].evidence.to_string(), "(0,1)");
        assert_eq!(
            s.trust_line("p1"),
            "pid=p1 score=70 class=Suspect reports=1"
        );
    }

    #[test]
    fn ask_on_fresh_process() {
        let mut s = sup("HALT\n", 10);
        assert_eq!(s.handle("ASK p1 (reg(0) = 0)").lines, ["yes id=1"]);
        assert_eq!(s.handle("ASK p1 reg(0) = 1").lines, ["no id=2"]);
        assert_eq!(s.handle("ASK p9 true").lines, ["err unknown-pid"]);
        assert_eq!(s.handle("ASK p1 x = 0").lines, ["err bad-prop"]);
        assert_eq!(s.handle("ASK p1 (((").lines, ["err bad-prop"]);
        assert_eq!(s.judgements().records().len(), 2);
        assert!(s.report_log().contains("REFUSAL"));
    }

    #[test]
    fn kill_requires_confirmation() {
        let mut s = sup("loop: NOP\nLOADI r0, 1\nADD r1, r0\nJMP loop\n", 100);
        s.step();
        assert_eq!(s.handle("KILL p1").lines, ["err confirmation-required"]);
        assert_eq!(
            s.handle("KILL p1 confirm=00000000").lines,
            ["err confirmation-required"]
        );
        let token = s.process("p1").unwrap().confirm_token().unwrap();
        assert_eq!(
            s.handle(&format!("KILL p1 confirm={token}")).lines,
            ["killed pid=p1 tick=1"]
        );
        assert_eq!(s.process("p1").unwrap().status, ProcStatus::Killed);
        assert!(s.is_finished());
        assert_eq!(
            s.handle(&format!("KILL p1 confirm={token}")).lines,
            ["err not-running"]
        );
    }

    #[test]
    fn unknown_command() {
        let mut s = sup("HALT\n", 10);
        assert_eq!(s.handle("FROBNICATE").lines, ["err unknown-command"]);
        assert_eq!(s.serve("LIST"), "pid=p1 status=running\n#end\n");
    }

    #[test]
    fn protected_store_is_reported_at_its_tick() {
        let mut s = sup("NOP\nLOADI r0, 9\nSTORE r0, 3\nSTORE r0, 40\nHALT\n", 100);
        s.run_to_end();
        assert_eq!(s.reports().len(), 1);
        assert_eq!(s.reports()[0].kind, ReportKind::MemoryStructureViolation);
        assert_eq!(s.reports()[0].tick, 2);
        assert_eq!(
            s.trust_line("p1"),
            "pid=p1 score=60 class=Suspect reports=1"
        );
    }

    #[test]
    fn range_violation_reported_once_per_value() {
        let mut scenario = Scenario::new(100).with_program(
            "p1",
            "LOADI r1, 1\nLOADI r0, 20\nNOP\nLOADI r0, 5\nLOADI r0, 20\nLOADI r0, 21\nHALT\n",
        );
        scenario.programs[0].policy =
            Some(br#"{"ranges":[{"target":"r0","lo":0,"hi":10}]}"#.to_vec());
        let mut s = Supervisor::new(scenario).unwrap();
        s.run_to_end();
        let ticks: Vec<u64> = s.reports().iter().map(|r| r.tick).collect();
        assert_eq!(ticks, [2, 5, 6]);
    }

    #[test]
    fn missed_interrupt_flags_process() {
        let mut scenario =
            Scenario::new(40).with_program("p1", "loop: NOP\nLOADI r0, 1\nADD r1, r0\nJMP loop\n");
        scenario.monitor.interrupt_deadline = 5;
        scenario.interrupts.push((3, "p1".into()));
        let mut s = Supervisor::new(scenario).unwrap();
        s.run_to_end();
        let f: Vec<&Finding> = s
            .findings()
            .iter()
            .filter(|f| f.kind == FindingKind::NonResponsive)
            .collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].tick, 9);
        assert_eq!(s.process("p1").unwrap().state.mem[255], 1);
        assert!(s.report_log().contains("EVENT tick=9 pid=p1 kind=FlagSet"));
    }

    #[test]
    fn script_timing() {
        let script =
            parse_script("@0 ASK p1 pc = 0\n// note\n\nASK p1 pc = 0\n@1 ASK p1 pc = 1\n").unwrap();
        assert_eq!(script.len(), 3);
        let mut s = sup("NOP\nNOP\nHALT\n", 100);
        let out = s.run(&script);
        assert_eq!(
            out,
            ["yes id=1\n#end\n", "yes id=2\n#end\n", "no id=3\n#end\n"]
        );
        assert!(parse_script("@x LIST").is_err());
    }
}
