use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use warden::judgement::verify_log_text;
use warden::supervisor::{
    exit, log_files, parse_script, replay, sign_request, write_logs, ReplayError, Scenario,
    ScenarioError, Supervisor,
};
use warden::trust::GoldenManifest;

#[derive(Parser)]
#[command(
    name = "warden",
    version,
    about = "Supervise simulated register-machine processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, serving a request script at tick boundaries.
    Run {
        scenario: PathBuf,
        /// Request script: one request per line, `@<tick> ` to pin it to a tick.
        #[arg(long)]
        requests: Option<PathBuf>,
        /// After the run, answer requests read line by line from stdin.
        #[arg(long)]
        serve: bool,
        /// Directory to write logs into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask one proposition about a process.
    Ask {
        pid: String,
        prop: String,
        #[arg(long)]
        scenario: PathBuf,
        /// Tick boundary to ask at; defaults to the end of the run.
        #[arg(long)]
        at: Option<u64>,
    },
    /// Re-run a scenario and compare against a log directory.
    Replay { scenario: PathBuf, logdir: PathBuf },
    /// Show the launch measurements, or emit a golden manifest for them.
    Attest {
        scenario: PathBuf,
        /// Print a manifest file for the current artifacts instead.
        #[arg(long)]
        emit_manifest: bool,
    },
    /// Check the hash chain of a judgement log.
    VerifyLog { file: PathBuf },
    /// Append a request tag using the scenario's key.
    Sign { scenario: PathBuf, request: String },
}

fn scenario_failure(e: &ScenarioError) -> ExitCode {
    eprintln!("warden: {e}");
    match e {
        ScenarioError::Io { .. } => ExitCode::from(exit::ERROR as u8),
        _ => ExitCode::from(exit::SCENARIO_INVALID as u8),
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("warden: {msg}");
    ExitCode::from(exit::ERROR as u8)
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    Scenario::load(path).map_err(|e| scenario_failure(&e))
}

fn outcome(sup: &Supervisor) -> ExitCode {
    if sup.any_refused() {
        ExitCode::from(exit::ATTESTATION_MISMATCH as u8)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(scenario: &Path, requests: Option<&Path>, serve: bool, out: Option<&Path>) -> ExitCode {
    let scenario = match load(scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut script_text = match requests {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail(format!("{}: {e}", p.display())),
        },
        None => String::new(),
    };
    let script = match parse_script(&script_text) {
        Ok(s) => s,
        Err(e) => return scenario_failure(&e),
    };
    let mut sup = match Supervisor::new(scenario) {
        Ok(s) => s,
        Err(e) => return scenario_failure(&e),
    };
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    for block in sup.run(&script) {
        let _ = stdout.write_all(block.as_bytes());
    }
    if serve {
        let _ = stdout.flush();
        for line in io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            let block = sup.serve(&line);
            // Served requests are appended untimed so replay reproduces them.
            script_text.push_str(&line);
            script_text.push('\n');
            let _ = stdout.write_all(block.as_bytes());
            let _ = stdout.flush();
        }
    }
    eprint!("{}", sup.summary());
    if let Some(dir) = out {
        if let Err(e) = write_logs(dir, &log_files(&sup, &script_text)) {
            return fail(format!("{}: {e}", dir.display()));
        }
    }
    outcome(&sup)
}

fn ask(pid: &str, prop: &str, scenario: &Path, at: Option<u64>) -> ExitCode {
    let scenario = match load(scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut request = format!("ASK {pid} {prop}");
    if let Some(key) = &scenario.mac_key {
        request = sign_request(key, &request);
    }
    let mut sup = match Supervisor::new(scenario) {
        Ok(s) => s,
        Err(e) => return scenario_failure(&e),
    };
    let blocks = sup.run(&[warden::supervisor::ScriptLine { at, text: request }]);
    print!("{}", blocks.concat());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            requests,
            serve,
            out,
        } => run(&scenario, requests.as_deref(), serve, out.as_deref()),
        Command::Ask {
            pid,
            prop,
            scenario,
            at,
        } => ask(&pid, &prop, &scenario, at),
        Command::Replay { scenario, logdir } => {
            let scenario = match load(&scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match replay(scenario, &logdir) {
                Ok(n) => {
                    println!("ok files={n}");
                    ExitCode::SUCCESS
                }
                Err(ReplayError::Scenario(e)) => scenario_failure(&e),
                Err(e @ ReplayError::Io { .. }) => fail(e),
                Err(e) => {
                    println!("{e}");
                    ExitCode::from(exit::REPLAY_DIVERGENCE as u8)
                }
            }
        }
        Command::Attest {
            scenario,
            emit_manifest,
        } => {
            if emit_manifest {
                let scenario = match Scenario::load_without_manifest(&scenario) {
                    Ok(s) => s,
                    Err(e) => return scenario_failure(&e),
                };
                let artifacts = scenario.artifacts();
                let manifest = GoldenManifest::from_artifacts(
                    artifacts.iter().map(|(n, b)| (n.as_str(), b.as_slice())),
                );
                print!("{}", manifest.to_json());
                return ExitCode::SUCCESS;
            }
            let scenario = match load(&scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match Supervisor::new(scenario) {
                Ok(sup) => {
                    print!("{}", sup.attest_log());
                    outcome(&sup)
                }
                Err(e) => scenario_failure(&e),
            }
        }
        Command::VerifyLog { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", file.display())),
            };
            match verify_log_text(&text) {
                Ok(n) => {
                    println!("ok records={n}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    println!("integrity-failure {e}");
                    ExitCode::from(exit::REPLAY_DIVERGENCE as u8)
                }
            }
        }
        Command::Sign { scenario, request } => {
            let scenario = match load(&scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match &scenario.mac_key {
                Some(key) => {
                    println!("{}", sign_request(key, &request));
                    ExitCode::SUCCESS
                }
                None => fail("scenario has no mac_key"),
            }
        }
    }
}
