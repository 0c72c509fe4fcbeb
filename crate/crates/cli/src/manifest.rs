//! Run manifests: the command plus every resolved setting, enough to replay
//! the run. Wall-clock time goes to a `.timing` sidecar so the manifest
//! itself stays byte-identical across reruns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::settings::Settings;
use crate::{CliError, Command};

pub const MANIFEST_FORMAT: &str = "puffscan-manifest/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub tool_version: String,
    pub settings: Settings,
}

impl RunManifest {
    pub fn new(command: Command, settings: Settings) -> Self {
        Self {
            command,
            tool_version: TOOL_VERSION.to_string(),
            settings,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format={MANIFEST_FORMAT}");
        let _ = writeln!(out, "tool_version={}", self.tool_version);
        let _ = writeln!(out, "command={}", self.command.name());
        for (k, v) in self.settings.iter() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String, CliError> {
            let line = lines.next().unwrap_or("");
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| CliError::Parse(format!("manifest: expected `{key}=` line, found `{line}`")))
        };
        let format = header("format")?;
        if format != MANIFEST_FORMAT {
            return Err(CliError::Compat(format!("unsupported manifest format `{format}`")));
        }
        let tool_version = header("tool_version")?;
        let command: Command = header("command")?.parse().map_err(CliError::Parse)?;
        if tool_version != TOOL_VERSION {
            log::warn!("manifest written by version {tool_version}, replaying with {TOOL_VERSION}");
        }
        let mut values = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("manifest: bad line `{line}`")))?;
            values.insert(k.to_string(), v.to_string());
        }
        let mut settings = Settings::from_defaults(&command.defaults());
        settings.merge(values, "manifest")?;
        Ok(Self {
            command,
            tool_version,
            settings,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingFile(path.display().to_string()),
            _ => CliError::Io(format!("{}: {e}", path.display())),
        })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.to_text().as_bytes())
    }
}

pub fn timing_path(manifest: &Path) -> PathBuf {
    let mut s = manifest.as_os_str().to_owned();
    s.push(".timing");
    PathBuf::from(s)
}

pub fn write_timing(manifest: &Path, elapsed: Duration) -> Result<(), CliError> {
    write_file(&timing_path(manifest), format!("wall_clock_s={:.6}\n", elapsed.as_secs_f64()).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
