//! `cola run`: one session in the foreground, steered from stdin.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use cola_core::orchestrator::{Command, InteractionMode, Phase, Session};

use crate::config::ServiceConfig;
use crate::runtime::{Runtime, SessionSpec};

pub const EXIT_DONE: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HALTED: i32 = 2;

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// The task to solve.
    #[arg(long)]
    pub task: String,
    /// automatic, passive or active. Defaults to the configured mode.
    #[arg(long)]
    pub mode: Option<InteractionMode>,
    /// Simulated desktop scenario (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Scripted responses (JSON). Selects the scripted backend.
    #[arg(long)]
    pub playbook: Option<PathBuf>,
    /// Service configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Decision-step budget. Defaults to the configured budget.
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Where to write the event log as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses one operator line. An empty line resumes.
pub fn parse_command(line: &str) -> Result<Command, String> {
    let line = line.trim();
    let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match verb.to_ascii_lowercase().as_str() {
        "" | "resume" | "r" | "next" => Ok(Command::Resume),
        "guide" | "g" if !rest.is_empty() => Ok(Command::Guide { text: rest.to_string() }),
        "switch" | "s" if !rest.is_empty() => Ok(Command::SwitchRole { role: rest.to_string() }),
        "rollback" | "b" => rest
            .parse()
            .map(|step| Command::Rollback { step })
            .map_err(|_| format!("rollback needs a step number, got `{rest}`")),
        "abort" | "q" => Ok(Command::Abort),
        _ => Err(format!("unrecognized command `{line}` (resume, guide <text>, switch <role>, rollback <k>, abort)")),
    }
}

fn prompt(session: &Session, err: &mut impl Write) {
    let status = session.status();
    let role = session.phase().default_role().map(|r| r.id()).unwrap_or("-");
    let _ = write!(err, "[{} records, step {}/{}, {} {}] > ", status.records, status.step, status.budget, status.phase.name(), role);
    let _ = err.flush();
}

/// Runs a session to a stop and returns the exit code. `input` supplies
/// operator commands whenever the session waits for one.
pub fn run(args: &RunArgs, input: &mut impl BufRead, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let config = match ServiceConfig::from_env(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = config.ensure_dirs() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_FAILURE;
    }
    let spec = SessionSpec {
        task: args.task.clone(),
        mode: args.mode.unwrap_or(config.default_mode),
        budget: args.max_steps.unwrap_or(config.default_budget),
        scenario: Some(args.scenario.clone()),
        playbook: args.playbook.clone(),
    };
    let runtime = match Runtime::new(config) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let mut session = match runtime.start("cli", &spec) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    if spec.mode == InteractionMode::Passive {
        let _ = session.command(Command::Resume);
    }
    let code = drive(&mut session, input, err);
    if code.is_some() {
        write_log(args, &session, err);
        return EXIT_FAILURE;
    }
    if let Err(e) = session.commit_memories() {
        let _ = writeln!(err, "warning: {e}");
    }
    write_log(args, &session, err);
    match session.phase() {
        Phase::Done { answer, note } => {
            if let Some(note) = note {
                let _ = writeln!(err, "note: {note}");
            }
            let _ = writeln!(out, "{answer}");
            EXIT_DONE
        }
        Phase::Halted { reason } => {
            let _ = writeln!(err, "halted: {}", serde_json::to_string(reason).unwrap_or_default().trim_matches('"'));
            EXIT_HALTED
        }
        other => {
            let _ = writeln!(err, "stopped in phase {}", other.name());
            EXIT_HALTED
        }
    }
}

/// Steps until the session is finished. `Some(code)` on an unrecoverable
/// engine error.
fn drive(session: &mut Session, input: &mut impl BufRead, err: &mut impl Write) -> Option<i32> {
    loop {
        if let Some(e) = session.run_until_pause() {
            let _ = writeln!(err, "{e}");
            if session.can_advance() {
                return Some(EXIT_FAILURE);
            }
        }
        if session.phase().is_final() {
            return None;
        }
        // Automatic sessions halt instead of waiting; there is no one to ask.
        if session.state().mode == InteractionMode::Automatic && session.phase().is_terminal() {
            return None;
        }
        loop {
            prompt(session, err);
            let mut line = String::new();
            match input.read_line(&mut line) {
                Ok(0) | Err(_) => {
                    let _ = writeln!(err, "\nend of input; aborting");
                    let _ = session.command(Command::Abort);
                    return None;
                }
                Ok(_) => {}
            }
            match parse_command(&line) {
                Err(e) => {
                    let _ = writeln!(err, "{e}");
                }
                Ok(command) => match session.command(command) {
                    Ok(()) => break,
                    Err(e) => {
                        let _ = writeln!(err, "rejected: {e}");
                    }
                },
            }
        }
    }
}

fn write_log(args: &RunArgs, session: &Session, err: &mut impl Write) {
    let Some(path) = &args.out else { return };
    let mut bytes = Vec::new();
    for record in session.log() {
        serde_json::to_writer(&mut bytes, record).expect("records serialize");
        bytes.push(b'\n');
    }
    if let Err(e) = std::fs::write(path, bytes) {
        let _ = writeln!(err, "cannot write {}: {e}", path.display());
    }
}
