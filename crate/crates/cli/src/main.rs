#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::FromArgMatches;

use args::{Cli, Command};

/// Failure reported as one line on stderr:
/// `error kind=<kind> [token=<token>] message=<text>`.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub token: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn usage(token: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            token: Some(token.into()),
            message: message.into(),
        }
    }

    fn line(&self) -> String {
        let mut s = format!("error kind={}", self.kind);
        if let Some(t) = &self.token {
            s.push_str(&format!(" token={t:?}"));
        }
        let msg: Vec<&str> = self.message.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        s.push_str(" message=");
        s.push_str(&msg.join("; "));
        s
    }

    fn exit_code(&self) -> u8 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }
}

impl From<kanspot_core::Error> for CliError {
    fn from(e: kanspot_core::Error) -> Self {
        use kanspot_core::Error as E;
        let (kind, token) = match &e {
            E::Dimension { .. } => ("dimension", None),
            E::Contract(_) => ("contract", None),
            E::Length { .. } => ("length", None),
            E::SampleRate { .. } => ("sample_rate", None),
            E::Io { path, .. } | E::Wav { path, .. } => {
                (if matches!(e, E::Io { .. }) { "io" } else { "wav" }, Some(path.display().to_string()))
            }
            E::Data { utterance, .. } => ("data", Some(utterance.clone())),
            E::Infeasible { variant, .. } => ("infeasible", Some(variant.clone())),
            E::Format { .. } => ("format", None),
        };
        CliError {
            kind,
            token,
            message: e.to_string(),
        }
    }
}

fn from_clap(e: clap::Error) -> CliError {
    let token = [ContextKind::InvalidArg, ContextKind::InvalidValue, ContextKind::InvalidSubcommand]
        .into_iter()
        .find_map(|k| match e.get(k) {
            Some(ContextValue::String(s)) => Some(s.clone()),
            Some(ContextValue::Strings(v)) => v.first().cloned(),
            _ => None,
        });
    let kind = e.kind();
    let message = e
        .render()
        .to_string()
        .lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_string();
    let mut err = CliError::usage(token.unwrap_or_default(), message);
    if matches!(kind, ErrorKind::InvalidValue | ErrorKind::ValueValidation) {
        if let Some(ContextValue::String(v)) = e.get(ContextKind::InvalidValue) {
            err.token = Some(v.clone());
        }
    }
    if err.token.as_deref() == Some("") {
        err.token = None;
    }
    err
}

/// Repeated flags keep the last value, so spliced config values lose to
/// explicit ones.
fn command() -> clap::Command {
    <Cli as clap::CommandFactory>::command().mut_subcommands(|s| s.args_override_self(true))
}

fn matches_to_cli(argv: &[OsString]) -> Result<Cli, clap::Error> {
    let m = command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&m)
}

/// Value of the last `--config` among `args`.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

/// Parses argv, splicing `--config` values in front of the explicit flags.
fn parse(argv: Vec<OsString>) -> Result<Option<Cli>, CliError> {
    let mut argv = argv;
    if let Some(at) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1) {
        if let Some(path) = config_path(&argv[at + 1..]) {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::from(kanspot_core::Error::Io { path: path.clone(), source: e }))?;
            let sub = argv[at].to_string_lossy().into_owned();
            let mut merged: Vec<OsString> = argv[..=at].to_vec();
            merged.extend(args::config_flags(&text, &sub)?);
            merged.extend(argv[at + 1..].iter().cloned());
            argv = merged;
        }
    }
    match matches_to_cli(&argv) {
        Ok(c) => Ok(Some(c)),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            Ok(None)
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            Err(CliError {
                kind: "usage",
                token: None,
                message: "a subcommand is required".into(),
            })
        }
        Err(e) => Err(from_clap(e)),
    }
}

impl Command {
    fn common(&self) -> &args::Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Eval(a) | Command::Det(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Paramcount(a) => &a.common,
        }
    }
}

fn run() -> Result<(), CliError> {
    let Some(cli) = parse(std::env::args_os().collect())? else {
        return Ok(());
    };
    let workers = cli.command.common().workers;
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::usage(workers.to_string(), e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a, false),
        Command::Det(a) => commands::eval(a, true),
        Command::Sweep(a) => commands::sweep(a),
        Command::Paramcount(a) => commands::paramcount(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}
