//! Command-line pipeline around the `puffscan` library.

pub mod args;
pub mod commands;
mod error;
pub mod manifest;
mod pipeline;
pub mod settings;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

pub use error::CliError;
use manifest::RunManifest;
use settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Eval,
    Detect,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Detect => "detect",
            Command::Sweep => "sweep",
        }
    }

    pub fn defaults(self) -> Vec<(&'static str, &'static str)> {
        match self {
            Command::Generate => commands::generate::defaults(),
            Command::Train => commands::train::defaults(),
            Command::Eval => commands::eval::defaults(),
            Command::Detect => commands::detect::defaults(),
            Command::Sweep => commands::sweep::defaults(),
        }
    }

    /// Fills derived settings (output paths, values read from inputs) and
    /// validates the rest.
    pub fn resolve(self, s: &mut Settings) -> Result<(), CliError> {
        match self {
            Command::Generate => commands::generate::resolve(s),
            Command::Train => commands::train::resolve(s),
            Command::Eval => commands::eval::resolve(s),
            Command::Detect => commands::detect::resolve(s),
            Command::Sweep => commands::sweep::resolve(s),
        }
    }

    fn execute(self, s: &Settings) -> Result<(), CliError> {
        match self {
            Command::Generate => commands::generate::run(s),
            Command::Train => commands::train::run(s),
            Command::Eval => commands::eval::run(s),
            Command::Detect => commands::detect::run(s),
            Command::Sweep => commands::sweep::run(s),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generate" => Ok(Command::Generate),
            "train" => Ok(Command::Train),
            "eval" => Ok(Command::Eval),
            "detect" => Ok(Command::Detect),
            "sweep" => Ok(Command::Sweep),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

/// Runs a command from fully merged settings and writes its manifest.
pub fn run_settings(command: Command, mut settings: Settings) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    command.resolve(&mut settings)?;
    command.execute(&settings)?;
    let manifest = RunManifest::new(command, settings);
    let path = manifest.settings.path("manifest")?;
    manifest.write(&path)?;
    manifest::write_timing(&path, started.elapsed())?;
    Ok(manifest)
}

/// Re-executes the run recorded in a manifest.
pub fn replay(path: &Path) -> Result<RunManifest, CliError> {
    let recorded = RunManifest::read(path)?;
    run_settings(recorded.command, recorded.settings)
}

/// Flags given explicitly on the command line, keyed by setting name.
fn explicit_flags(def: &clap::Command, matches: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for arg in def.get_arguments() {
        let id = arg.get_id().as_str();
        if id == "config" || matches.value_source(id) != Some(ValueSource::CommandLine) {
            continue;
        }
        if let Ok(Some(raw)) = matches.try_get_raw(id) {
            let joined: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            out.insert(id.to_string(), joined.join(","));
        }
    }
    out
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match args::Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match args::Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let def = args::Cli::command();
    let def = def.find_subcommand(name).expect("parsed subcommand exists");
    let result = match cli.command {
        args::CliCommand::Replay { manifest } => replay(&manifest),
        other => {
            let command = other.kind().expect("not replay");
            let config = other.config_path();
            (|| {
                let mut settings = Settings::from_defaults(&command.defaults());
                if let Some(path) = config {
                    settings.merge(settings::read_config(path)?, &path.display().to_string())?;
                }
                settings.merge(explicit_flags(def, sub), "flags")?;
                run_settings(command, settings)
            })()
        }
    };
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
