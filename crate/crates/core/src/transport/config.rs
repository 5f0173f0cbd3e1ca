use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;

use super::TransportError;

/// Default remote-copy template: a plain local copy, so off-node paths can be
/// exercised on one machine.
pub const DEFAULT_REMOTE_COPY: &str = "cp {file} {dir}/";
pub const REMOTE_COPY_ENV: &str = "FCM_REMOTE_COPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMode {
    /// Every rank sees one common mailbox root.
    SharedDir,
    /// Each node has its own root; off-node messages are staged locally and
    /// shipped with the remote-copy command.
    LocalDir,
}

impl FromStr for TransportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared-dir" => Ok(TransportMode::SharedDir),
            "local-dir" => Ok(TransportMode::LocalDir),
            other => Err(format!("unknown transport mode {other:?} (shared-dir|local-dir)")),
        }
    }
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportMode::SharedDir => "shared-dir",
            TransportMode::LocalDir => "local-dir",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportConfig {
    pub mode: TransportMode,
    pub mailbox_root: PathBuf,
    /// Command template with `{file}`, `{host}` and `{dir}` placeholders.
    pub remote_copy: String,
    pub poll_initial: Duration,
    pub poll_max: Duration,
    /// `None` blocks forever.
    pub recv_timeout: Option<Duration>,
    /// fsync buffer files before publishing them.
    pub fsync: bool,
}

impl TransportConfig {
    pub fn new(mode: TransportMode, mailbox_root: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            mailbox_root: mailbox_root.into(),
            remote_copy: DEFAULT_REMOTE_COPY.to_string(),
            poll_initial: Duration::from_millis(1),
            poll_max: Duration::from_millis(50),
            recv_timeout: None,
            fsync: false,
        }
    }

    pub fn shared(mailbox_root: impl Into<PathBuf>) -> Self {
        Self::new(TransportMode::SharedDir, mailbox_root)
    }

    pub fn with_polling(mut self, initial: Duration, max: Duration) -> Self {
        self.poll_initial = initial;
        self.poll_max = max;
        self
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.recv_timeout = timeout;
        self
    }

    pub fn with_remote_copy(mut self, template: impl Into<String>) -> Self {
        self.remote_copy = template.into();
        self
    }

    /// Overlays settings from a TOML file.
    ///
    /// Recognized keys: `mode`, `mailbox_root`, `remote_copy`,
    /// `poll_initial_us`, `poll_max_us`, `recv_timeout_ms`, `fsync`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), TransportError> {
        let text = std::fs::read_to_string(path).map_err(|e| TransportError::io(path, e))?;
        self.apply_toml(&text)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<(), TransportError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| TransportError::Config(e.to_string()))?;
        if let Some(mode) = file.mode {
            self.mode = mode;
        }
        if let Some(root) = file.mailbox_root {
            self.mailbox_root = root;
        }
        if let Some(t) = file.remote_copy {
            self.remote_copy = t;
        }
        if let Some(us) = file.poll_initial_us {
            self.poll_initial = Duration::from_micros(us);
        }
        if let Some(us) = file.poll_max_us {
            self.poll_max = Duration::from_micros(us);
        }
        if let Some(ms) = file.recv_timeout_ms {
            self.recv_timeout = Some(Duration::from_millis(ms));
        }
        if let Some(f) = file.fsync {
            self.fsync = f;
        }
        Ok(())
    }

    /// Checks the invariants and creates the mailbox root if needed.
    pub fn validate(&self) -> Result<(), TransportError> {
        if self.poll_initial > self.poll_max {
            return Err(TransportError::Config(format!(
                "poll-initial {:?} exceeds poll-max {:?}",
                self.poll_initial, self.poll_max
            )));
        }
        std::fs::create_dir_all(&self.mailbox_root)
            .map_err(|e| TransportError::io(&self.mailbox_root, e))?;
        let meta = std::fs::metadata(&self.mailbox_root)
            .map_err(|e| TransportError::io(&self.mailbox_root, e))?;
        if meta.permissions().readonly() {
            return Err(TransportError::Config(format!(
                "mailbox root {} is not writable",
                self.mailbox_root.display()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<TransportMode>,
    mailbox_root: Option<PathBuf>,
    remote_copy: Option<String>,
    poll_initial_us: Option<u64>,
    poll_max_us: Option<u64>,
    recv_timeout_ms: Option<u64>,
    fsync: Option<bool>,
}
