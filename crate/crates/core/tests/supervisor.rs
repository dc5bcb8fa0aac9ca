use std::fs;
use std::path::Path;

use warden::supervisor::{
    execute, replay, sign_request, verify_response, write_logs, ProcStatus, ReplayError, Scenario,
    ScenarioError, Supervisor,
};
use warden::trust::{GoldenManifest, MacKey, ReportKind, TrustClass};

const HALTS: &str = "LOADI r0, 1\nHALT\n";
const SPINS: &str = "loop: JMP loop\n";
const KEY_HEX: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// A two-program scenario on disk, with a manifest over its current bytes.
fn attested_dir(keyed: bool) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p1.asm", HALTS);
    write(d, "p2.asm", SPINS);
    write(
        d,
        "p1.policy.json",
        r#"{"ranges":[{"target":"r0","lo":0,"hi":3}]}"#,
    );
    write(d, "keys.json", &format!(r#"{{"mac_key_hex":"{KEY_HEX}"}}"#));
    let key = if keyed {
        r#","mac_key":"keys.json""#
    } else {
        ""
    };
    write(
        d,
        "scenario.json",
        &format!(
            r#"{{"programs":[{{"pid":"p1","source":"p1.asm","policy":"p1.policy.json"}},{{"pid":"p2","source":"p2.asm"}}],
"schedule":[{{"name":"r0-small","prop":"reg(0) <= 3","period":1,"category":"safety"}}],
"run_limit":50,"manifest":"manifest.json"{key}}}"#
        ),
    );
    let s = Scenario::load_without_manifest(&d.join("scenario.json")).unwrap();
    let arts = s.artifacts();
    let m = GoldenManifest::from_artifacts(arts.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
    write(d, "manifest.json", &m.to_json());
    dir
}

#[test]
fn halting_program_ends_trusted() {
    let mut sup = Supervisor::new(Scenario::new(100).with_program("p1", HALTS)).unwrap();
    sup.run_to_end();
    assert_eq!(sup.process("p1").unwrap().status, ProcStatus::Halted);
    assert_eq!(sup.trust_class("p1"), TrustClass::Trusted);
    assert!(sup.reports().is_empty());
}

#[test]
fn self_jump_is_certified_divergent() {
    let mut sup = Supervisor::new(Scenario::new(100).with_program("p1", SPINS)).unwrap();
    sup.run_to_end();
    assert_eq!(sup.reports().len(), 1);
    assert_eq!(sup.reports()[0].kind, ReportKind::CertifiedDivergence);
    assert_eq!(sup.reports()[0].details, "evidence=(0,1)");
    assert_eq!(sup.ledger().score("p1"), 70);
    assert_eq!(sup.trust_class("p1"), TrustClass::Suspect);
}

#[test]
fn protocol_examples() {
    let mut sup = Supervisor::new(Scenario::new(100).with_program("p1", HALTS)).unwrap();
    assert_eq!(sup.serve("ASK p1 (reg(0) = 0)"), "yes id=1\n#end\n");
    assert_eq!(sup.serve("KILL p1"), "err confirmation-required\n#end\n");
    assert_eq!(sup.serve("FROBNICATE"), "err unknown-command\n#end\n");
    assert_eq!(sup.transcript()[0], "@0 > ASK p1 (reg(0) = 0)");
}

#[test]
fn attested_launch_and_replay() {
    let dir = attested_dir(false);
    let path = dir.path().join("scenario.json");
    let (sup, responses, files) =
        execute(Scenario::load(&path).unwrap(), "@2 ASK p1 pc = 1\n").unwrap();
    assert!(!sup.any_refused());
    assert_eq!(responses, ["yes id=7\n#end\n"]);
    let logs = dir.path().join("logs");
    write_logs(&logs, &files).unwrap();
    assert_eq!(
        replay(Scenario::load(&path).unwrap(), &logs).unwrap(),
        files.len()
    );

    // editing the policy changes the launch measurements and the run
    write(
        dir.path(),
        "p1.policy.json",
        r#"{"ranges":[{"target":"r0","lo":0,"hi":0}]}"#,
    );
    let edited = Scenario::load(&path).unwrap();
    assert!(matches!(
        replay(edited.clone(), &logs),
        Err(ReplayError::DivergenceAt { .. })
    ));
    let sup = Supervisor::new(edited).unwrap();
    assert_eq!(sup.process("p1").unwrap().status, ProcStatus::Refused);
    assert_eq!(sup.process("p2").unwrap().status, ProcStatus::Running);
    assert_eq!(sup.trust_class("p1"), TrustClass::Untrusted);
}

#[test]
fn tampered_program_is_refused() {
    let dir = attested_dir(false);
    write(dir.path(), "p2.asm", "loop: JMP loop\nNOP\n");
    let mut sup =
        Supervisor::new(Scenario::load(&dir.path().join("scenario.json")).unwrap()).unwrap();
    assert!(sup.any_refused());
    assert_eq!(sup.process("p2").unwrap().status, ProcStatus::Refused);
    assert_eq!(sup.reports()[0].kind, ReportKind::AttestationMismatch);
    assert_eq!(sup.reports()[0].details, "artifact=p2/program");
    assert_eq!(sup.trust_class("p2"), TrustClass::Untrusted);
    assert_eq!(sup.serve("ASK p2 true"), "err process-refused\n#end\n");
    sup.run_to_end();
    assert_eq!(sup.process("p1").unwrap().status, ProcStatus::Halted);
}

#[test]
fn tampered_scenario_refuses_everything() {
    let dir = attested_dir(false);
    let path = dir.path().join("scenario.json");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("\"run_limit\":50", "\"run_limit\":51");
    fs::write(&path, text).unwrap();
    let sup = Supervisor::new(Scenario::load(&path).unwrap()).unwrap();
    assert!(sup
        .processes()
        .iter()
        .all(|p| p.status == ProcStatus::Refused));
}

#[test]
fn edited_judgement_log_fails_verification() {
    let dir = attested_dir(false);
    let path = dir.path().join("scenario.json");
    let (_, _, files) = execute(Scenario::load(&path).unwrap(), "").unwrap();
    let logs = dir.path().join("logs");
    write_logs(&logs, &files).unwrap();
    let log = logs.join("judgement.log");
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.lines().count() > 2);
    fs::write(&log, text.replacen("\tyes\t", "\tno\t", 1)).unwrap();
    assert!(matches!(
        replay(Scenario::load(&path).unwrap(), &logs),
        Err(ReplayError::Integrity(_))
    ));
}

#[test]
fn keyed_protocol() {
    let dir = attested_dir(true);
    let scenario = Scenario::load(&dir.path().join("scenario.json")).unwrap();
    let key = MacKey::from_hex(KEY_HEX).unwrap();
    let mut sup = Supervisor::new(scenario).unwrap();

    let block = sup.serve(&sign_request(&key, "ASK p1 reg(0) = 0"));
    let body = verify_response(&key, &block).unwrap();
    assert_eq!(body, ["yes id=3"]);

    let unsigned = sup.serve("ASK p1 reg(0) = 0");
    assert_eq!(
        verify_response(&key, &unsigned).unwrap(),
        ["err integrity-failure"]
    );
    let forged = sign_request(&key, "LIST").replace("LIST", "ATTEST");
    assert_eq!(
        verify_response(&key, &sup.serve(&forged)).unwrap(),
        ["err integrity-failure"]
    );
    let integrity: Vec<_> = sup
        .reports()
        .iter()
        .filter(|r| r.kind == ReportKind::MessageIntegrityFailure)
        .collect();
    assert_eq!(integrity.len(), 2);
    assert_eq!(integrity[0].pid, "p1");
    assert_eq!(integrity[1].pid, "supervisor");
}

#[test]
fn missing_key_is_scenario_invalid() {
    let dir = attested_dir(true);
    write(dir.path(), "keys.json", "{}");
    assert!(matches!(
        Scenario::load(&dir.path().join("scenario.json")),
        Err(ScenarioError::KeyMissing(_))
    ));
}

#[test]
fn bad_program_is_scenario_invalid() {
    let err = Supervisor::new(Scenario::new(10).with_program("p1", "FROB r0\n")).unwrap_err();
    assert!(matches!(err, ScenarioError::Invalid(_)));
}

#[test]
fn reconstruct_matches_recorded_snapshots_with_stride_and_events() {
    let mut scenario = Scenario::new(300).with_program(
        "p1",
        "LOADI r1, 1\nloop: ADD r0, r1\nLOAD r2, 255\nJNZ r2, out\nJMP loop\nout: ACK\nSTORE r0, 40\nHALT\n",
    );
    scenario.sampling_stride = 3;
    scenario.monitor.interrupt_deadline = 10;
    scenario.interrupts.push((7, "p1".into()));
    scenario.history.checkpoint_interval = 16;
    let mut sup = Supervisor::new(scenario).unwrap();
    sup.run_to_end();
    let p = sup.process("p1").unwrap();
    assert_eq!(p.status, ProcStatus::Halted);
    let program = p.program.as_ref().unwrap();
    for snap in p.history.snapshots() {
        let s = p.history.reconstruct(program, snap.tick).unwrap();
        assert_eq!(s.digest(), snap.state_digest, "tick {}", snap.tick);
    }
    assert_eq!(p.history.latest().unwrap().state_digest, p.state.digest());
}
