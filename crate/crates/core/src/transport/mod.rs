//! File-based message kernel.
//!
//! A message from `s` to `d` with tag `t` is a pair of files in `d`'s mailbox
//! directory `<root>/rank<d>/`:
//!
//! * `t<t>_s<s>_d<d>.buf` holds the encoded [`frame`];
//! * `t<t>_s<s>_d<d>.lock` is zero-length and appears only once the buffer
//!   file is complete.
//!
//! The buffer is written under a temporary name, closed, then renamed into
//! place before the lock is created, so a receiver that sees the lock always
//! finds a complete buffer. The sender never waits for the receiver.

pub mod config;
pub mod frame;

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use config::{TransportConfig, TransportMode};
pub use frame::{decode_payload, encode_payload, ArrayPayload, ElementType, Frame, FrameError, Payload, PayloadKind};

use crate::{Rank, Tag};

/// Exclusive upper bound on tags.
pub const TAG_LIMIT: Tag = 1 << 31;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("message {0} already pending (buffer file exists)")]
    DuplicateMessage(Envelope),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("remote copy `{command}` failed: {detail}")]
    RemoteCopy { command: String, detail: String },
    #[error("timed out after {waited:?} waiting for {envelope}")]
    Timeout { envelope: Envelope, waited: Duration },
    #[error("tag {0} out of range (must be < 2^31)")]
    InvalidTag(Tag),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl TransportError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        TransportError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, TransportError>;

/// Identifies one in-flight message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub source: Rank,
    pub dest: Rank,
    pub tag: Tag,
}

impl Envelope {
    pub fn new(source: Rank, dest: Rank, tag: Tag) -> Result<Self> {
        if tag >= TAG_LIMIT {
            return Err(TransportError::InvalidTag(tag));
        }
        Ok(Self { source, dest, tag })
    }

    fn stem(&self) -> String {
        format!("t{}_s{}_d{}", self.tag, self.source, self.dest)
    }

    pub fn buffer_name(&self) -> String {
        format!("{}.buf", self.stem())
    }

    pub fn lock_name(&self) -> String {
        format!("{}.lock", self.stem())
    }

    fn temp_name(&self) -> String {
        format!("{}.buf.tmp", self.stem())
    }
}

impl std::fmt::Display for Envelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(src={}, dst={}, tag={})", self.source, self.dest, self.tag)
    }
}

/// Where the destination mailbox lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestLocator {
    /// `Some` when the destination is on another node and, in local-dir mode,
    /// must be reached through the remote-copy command.
    pub remote_host: Option<String>,
    pub dir: PathBuf,
}

impl DestLocator {
    pub fn local(cfg: &TransportConfig, dest: Rank) -> Self {
        Self { remote_host: None, dir: mailbox_dir(&cfg.mailbox_root, dest) }
    }
}

pub fn mailbox_dir(root: &Path, rank: Rank) -> PathBuf {
    root.join(format!("rank{rank}"))
}

fn staging_dir(root: &Path, source: Rank) -> PathBuf {
    root.join(format!("staging{source}"))
}

fn write_file(path: &Path, bytes: &[u8], fsync: bool) -> Result<()> {
    let mut f = File::create(path).map_err(|e| TransportError::io(path, e))?;
    f.write_all(bytes).map_err(|e| TransportError::io(path, e))?;
    if fsync {
        f.sync_all().map_err(|e| TransportError::io(path, e))?;
    }
    Ok(())
}

fn create_lock(path: &Path) -> Result<()> {
    OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map(drop)
        .map_err(|e| TransportError::io(path, e))
}

fn exists(path: &Path) -> Result<bool> {
    path.try_exists().map_err(|e| TransportError::io(path, e))
}

/// Writes `frame` into the destination mailbox. One-sided: never waits on the
/// receiver.
pub fn deposit(
    cfg: &TransportConfig,
    envelope: &Envelope,
    frame: &[u8],
    dest: &DestLocator,
) -> Result<()> {
    let buf_path = dest.dir.join(envelope.buffer_name());
    let lock_path = dest.dir.join(envelope.lock_name());
    if exists(&buf_path)? || exists(&lock_path)? {
        return Err(TransportError::DuplicateMessage(*envelope));
    }
    match (&dest.remote_host, cfg.mode) {
        (Some(host), TransportMode::LocalDir) => deposit_remote(cfg, envelope, frame, host, &dest.dir),
        _ => {
            fs::create_dir_all(&dest.dir).map_err(|e| TransportError::io(&dest.dir, e))?;
            let tmp = dest.dir.join(envelope.temp_name());
            write_file(&tmp, frame, cfg.fsync)?;
            fs::rename(&tmp, &buf_path).map_err(|e| TransportError::io(&buf_path, e))?;
            create_lock(&lock_path)
        }
    }
}

fn deposit_remote(
    cfg: &TransportConfig,
    envelope: &Envelope,
    frame: &[u8],
    host: &str,
    dir: &Path,
) -> Result<()> {
    let stage = staging_dir(&cfg.mailbox_root, envelope.source);
    fs::create_dir_all(&stage).map_err(|e| TransportError::io(&stage, e))?;
    let buf = stage.join(envelope.buffer_name());
    let lock = stage.join(envelope.lock_name());
    write_file(&buf, frame, cfg.fsync)?;
    create_lock(&lock)?;
    let shipped = remote_copy(&cfg.remote_copy, &buf, host, dir)
        .and_then(|()| remote_copy(&cfg.remote_copy, &lock, host, dir));
    let _ = fs::remove_file(&buf);
    let _ = fs::remove_file(&lock);
    shipped
}

/// Substitutes `{file}`, `{host}` and `{dir}` into each word of `template`.
pub fn render_copy_command(template: &str, file: &Path, host: &str, dir: &Path) -> Result<Vec<String>> {
    let words = shlex::split(template)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| TransportError::Config(format!("cannot parse command template {template:?}")))?;
    let file = file.to_string_lossy();
    let dir = dir.to_string_lossy();
    Ok(words
        .into_iter()
        .map(|w| w.replace("{file}", &file).replace("{host}", host).replace("{dir}", &dir))
        .collect())
}

fn remote_copy(template: &str, file: &Path, host: &str, dir: &Path) -> Result<()> {
    let argv = render_copy_command(template, file, host, dir)?;
    let command = argv.join(" ");
    log::debug!("remote copy: {command}");
    let out = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| TransportError::RemoteCopy { command: command.clone(), detail: e.to_string() })?;
    if !out.status.success() {
        return Err(TransportError::RemoteCopy {
            command,
            detail: format!("{} {}", out.status, String::from_utf8_lossy(&out.stderr).trim()),
        });
    }
    Ok(())
}

/// Blocks until the message named by `envelope` is in the caller's mailbox,
/// then reads it and removes both files.
///
/// Polls for the lock file with exponential backoff from `poll_initial` up to
/// `poll_max`; a zero `poll_initial` spins with `yield_now`.
pub fn consume(cfg: &TransportConfig, envelope: &Envelope, timeout: Option<Duration>) -> Result<Vec<u8>> {
    let dir = mailbox_dir(&cfg.mailbox_root, envelope.dest);
    let lock = dir.join(envelope.lock_name());
    let buf = dir.join(envelope.buffer_name());
    let start = Instant::now();
    let mut delay = cfg.poll_initial;
    while !exists(&lock)? {
        let waited = start.elapsed();
        if let Some(limit) = timeout {
            if waited >= limit {
                return Err(TransportError::Timeout { envelope: *envelope, waited });
            }
        }
        if delay.is_zero() {
            std::thread::yield_now();
        } else {
            let nap = match timeout {
                Some(limit) => delay.min(limit.saturating_sub(waited)),
                None => delay,
            };
            std::thread::sleep(nap);
        }
        delay = (delay * 2).min(cfg.poll_max);
    }
    let bytes = fs::read(&buf).map_err(|e| TransportError::io(&buf, e))?;
    fs::remove_file(&buf).map_err(|e| TransportError::io(&buf, e))?;
    fs::remove_file(&lock).map_err(|e| TransportError::io(&lock, e))?;
    Ok(bytes)
}

/// True iff the message named by `envelope` is ready in the destination mailbox.
pub fn probe(cfg: &TransportConfig, envelope: &Envelope) -> Result<bool> {
    exists(&mailbox_dir(&cfg.mailbox_root, envelope.dest).join(envelope.lock_name()))
}

/// Deletes every message file (and stray temporaries) in `rank`'s mailbox
/// and in its local-dir staging area.
pub fn purge_mailbox(cfg: &TransportConfig, rank: Rank) -> Result<usize> {
    let mut removed = 0;
    for dir in [mailbox_dir(&cfg.mailbox_root, rank), staging_dir(&cfg.mailbox_root, rank)] {
        removed += purge_dir(&dir)?;
    }
    Ok(removed)
}

fn purge_dir(dir: &Path) -> Result<usize> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(TransportError::io(dir, e)),
    };
    let mut removed = 0;
    for entry in entries {
        let entry = entry.map_err(|e| TransportError::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.ends_with(".buf") || name.ends_with(".lock") || name.ends_with(".buf.tmp") {
            let path = entry.path();
            match fs::remove_file(&path) {
                Ok(()) => removed += 1,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(TransportError::io(&path, e)),
            }
        }
    }
    Ok(removed)
}
