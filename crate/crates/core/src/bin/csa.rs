//! `csa`: lint resources, check barcodes, run and replay sessions, serve the API.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use csa_core::dsl::{
    check_digit, lint, parse_resource, select_instruction_set, validate_barcode, ProductResource, EAN13_LEN,
};
use csa_core::engine::Engine;
use csa_core::host::{
    parse_script, replay, Recorder, ReplayError, SessionAction, SessionHost, DEFAULT_LOAD_GRAMS, DEFAULT_LOAD_TEMP_C,
};
use csa_core::service::{serve, ServiceConfig, SessionConfig};
use csa_core::sim::SimConfig;

#[derive(Parser)]
#[command(name = "csa", version, about = "Community supported appliance tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lint a product resource document.
    Lint {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Validate a 13-digit barcode or compute the check digit of a 12-digit payload.
    Checksum { digits: String },
    /// Run a session against the simulated appliance.
    Run {
        path: PathBuf,
        /// Instruction set id to run.
        #[arg(long, conflicts_with = "ability")]
        set: Option<String>,
        /// Ability level used to pick the instruction set.
        #[arg(long, default_value_t = 1)]
        ability: u32,
        /// Read single-key commands from stdin.
        #[arg(long, conflicts_with = "script")]
        interactive: bool,
        /// Line-delimited action script.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Re-execute a transcript and check it reproduces byte for byte.
    Replay { transcript: PathBuf },
    /// Serve the repository and session API.
    Serve {
        #[arg(long, env = "CSA_PORT", default_value = "8080")]
        port: String,
        #[arg(long, env = "CSA_DATA_DIR", default_value = "csa-data")]
        data: PathBuf,
        /// Virtual milliseconds per wall millisecond; 0 disables the real-time pump.
        #[arg(long, env = "CSA_TIME_SCALE", default_value_t = 0.0)]
        time_scale: f64,
        #[arg(long, env = "CSA_MAX_SESSIONS", default_value_t = 64)]
        max_sessions: usize,
        #[arg(long, env = "CSA_IDLE_EXPIRY_SECS", default_value_t = 1800)]
        idle_expiry_secs: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Lint { path, format } => cmd_lint(&path, format),
        Command::Checksum { digits } => cmd_checksum(&digits),
        Command::Run { path, set, ability, interactive, script, transcript } => {
            cmd_run(&path, set.as_deref(), ability, interactive, script.as_deref(), transcript.as_deref())
        }
        Command::Replay { transcript } => cmd_replay(&transcript),
        Command::Serve { port, data, time_scale, max_sessions, idle_expiry_secs } => {
            cmd_serve(&port, data, time_scale, max_sessions, idle_expiry_secs)
        }
    }
}

fn load(path: &Path) -> Result<ProductResource, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_resource(&bytes).map_err(|e| format!("{}: {}: {e}", path.display(), e.code()))
}

fn cmd_lint(path: &Path, format: Format) -> ExitCode {
    let resource = match load(path) {
        Ok(r) => r,
        Err(message) => {
            eprintln!("{message}");
            return ExitCode::from(2);
        }
    };
    let report = lint(&resource);
    match format {
        Format::Text => {
            for d in &report.diagnostics {
                println!("{d}");
            }
            println!("{} error(s), {} warning(s)", report.errors().count(), report.warnings().count());
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize")),
    }
    if report.has_errors() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_checksum(digits: &str) -> ExitCode {
    let digits = digits.trim();
    if digits.len() == EAN13_LEN - 1 && digits.bytes().all(|b| b.is_ascii_digit()) {
        let payload: Vec<u8> = digits.bytes().map(|b| b - b'0').collect();
        let check = check_digit(&payload);
        println!("VALID payload, check digit {check} ({digits}{check})");
        return ExitCode::SUCCESS;
    }
    match validate_barcode(digits) {
        Ok(code) => {
            println!("VALID {code}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("INVALID: {e}");
            ExitCode::from(1)
        }
    }
}

fn render(host: &SessionHost) -> String {
    let s = host.snapshot();
    let a = &s.appliance;
    let mut out = format!("[{:>7.1}s] {}", s.clock_millis as f64 / 1000.0, s.phase);
    if let Some(i) = s.instruction_index {
        out.push_str(&format!(" #{i}"));
    }
    if let Some(r) = s.remaining_millis {
        out.push_str(&format!(" ({:.1}s left)", r as f64 / 1000.0));
    }
    out.push_str(&format!(
        "\n  door {} | load {} g | food {:.1} C | magnetron {} | carousel {} | light {}{}",
        if a.door_open { "open" } else { "closed" },
        a.load_grams,
        a.food_temp_c,
        on_off(a.magnetron_on),
        on_off(a.carousel_on),
        on_off(a.light_on),
        if a.smoke_active { " | SMOKE" } else { "" },
    ));
    if !s.instruction_text.is_empty() {
        out.push_str(&format!("\n  > {}", s.instruction_text));
    }
    for m in &s.pending_media {
        out.push_str(&format!("\n    [{}] {}", m.kind.as_str(), m.name));
    }
    if let Some(hint) = &s.suggestion {
        out.push_str(&format!("\n  ? {hint}"));
    }
    if let Some(alert) = s.alerts.last().filter(|a| a.at_millis == s.clock_millis) {
        out.push_str(&format!("\n  ! {}", alert.text));
    }
    out
}

fn on_off(on: bool) -> &'static str {
    if on {
        "on"
    } else {
        "off"
    }
}

const KEYS: &str =
    "keys: o open door, c close door, p place load, r remove load, y confirm, a abort, t wait 1 s, q quit";

fn key_action(key: char) -> Option<SessionAction> {
    Some(match key {
        'o' => SessionAction::OpenDoor,
        'c' => SessionAction::CloseDoor,
        'p' => SessionAction::PlaceLoad { grams: DEFAULT_LOAD_GRAMS, initial_temp_c: DEFAULT_LOAD_TEMP_C },
        'r' => SessionAction::RemoveLoad,
        'y' => SessionAction::Confirm,
        'a' => SessionAction::Abort,
        't' => SessionAction::Wait,
        _ => return None,
    })
}

fn cmd_run(
    path: &Path,
    set_id: Option<&str>,
    ability: u32,
    interactive: bool,
    script: Option<&Path>,
    transcript: Option<&Path>,
) -> ExitCode {
    let resource = match load(path) {
        Ok(r) => r,
        Err(message) => {
            eprintln!("{message}");
            return ExitCode::from(2);
        }
    };
    let report = lint(&resource);
    if report.has_errors() {
        for d in report.errors() {
            eprintln!("{d}");
        }
        eprintln!("refusing to run a resource with lint errors");
        return ExitCode::from(1);
    }
    let set_id = match set_id {
        Some(id) if resource.set_by_id(id).is_none() => {
            eprintln!("no instruction set `{id}`");
            return ExitCode::from(2);
        }
        Some(id) => id.to_owned(),
        None => select_instruction_set(&resource, ability).id.clone(),
    };
    let mut rec = match Recorder::start(&resource, &set_id, Engine::default(), SimConfig::default()) {
        Ok(rec) => rec,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    println!("{} ({}), set `{set_id}`", resource.product.name, resource.product.barcode);
    println!("{}", render(rec.host()));

    let mut code = ExitCode::SUCCESS;
    if let Some(script) = script {
        let text = match fs::read_to_string(script) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{}: {e}", script.display());
                return ExitCode::from(2);
            }
        };
        let lines = match parse_script(&text) {
            Ok(lines) => lines,
            Err(e) => {
                eprintln!("{}: {e}", script.display());
                return ExitCode::from(2);
            }
        };
        for line in lines {
            let step = rec.step(line.at_millis, &line.action);
            println!("{}", line.to_json());
            if let Some(why) = step.rejected {
                eprintln!("precondition violated: {why}");
                code = ExitCode::from(3);
                break;
            }
            println!("{}", render(rec.host()));
        }
    } else if interactive {
        println!("{KEYS}");
        let stdin = io::stdin();
        'input: for line in stdin.lock().lines() {
            let Ok(line) = line else { break };
            for key in line.chars().filter(|c| !c.is_whitespace()) {
                if key == 'q' {
                    break 'input;
                }
                let Some(action) = key_action(key) else {
                    println!("unknown key `{key}`; {KEYS}");
                    continue;
                };
                let now = rec.host().clock_millis();
                let at = if action == SessionAction::Wait { now + 1000 } else { now };
                if let Some(why) = rec.step(at, &action).rejected {
                    println!("  cannot do that: {why}");
                }
                println!("{}", render(rec.host()));
            }
            let _ = io::stdout().flush();
        }
    }
    println!("final phase: {}", rec.host().phase().name());

    if let Some(out) = transcript {
        if let Err(e) = fs::write(out, rec.text()) {
            eprintln!("{}: {e}", out.display());
            return ExitCode::from(2);
        }
    }
    code
}

fn cmd_replay(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    match replay(&text) {
        Ok(n) => {
            println!("{n} line(s) replayed identically");
            ExitCode::SUCCESS
        }
        Err(ReplayError::Diverged(d)) => {
            println!("line {}: transcript diverges", d.line);
            println!("- {}", d.expected);
            println!("+ {}", d.actual);
            ExitCode::from(1)
        }
        Err(e @ ReplayError::Malformed { .. }) => {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(2)
        }
    }
}

fn cmd_serve(port: &str, data: PathBuf, time_scale: f64, max_sessions: usize, idle_expiry_secs: u64) -> ExitCode {
    let Ok(port) = port.parse::<u16>() else {
        eprintln!("invalid port `{port}`");
        return ExitCode::from(1);
    };
    if !(time_scale.is_finite() && time_scale >= 0.0) {
        eprintln!("time scale must be a non-negative number");
        return ExitCode::from(1);
    }
    let config = ServiceConfig {
        data_dir: data,
        port,
        sessions: SessionConfig {
            max_sessions,
            idle_expiry: Duration::from_secs(idle_expiry_secs),
            time_scale,
            ..SessionConfig::default()
        },
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("serving on port {port}, data in {}", config.data_dir.display());
    match runtime.block_on(serve(config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("serve failed: {e}");
            ExitCode::from(1)
        }
    }
}
