//! MPI-style communicator over the file transport.
//!
//! User tags live in `[0, 2^30)`. The library draws its own tags from the
//! reserved range `[2^30, 2^31)`, one per collective call, so user traffic and
//! library traffic can never share a message file name.

pub mod topology;

use std::cell::Cell;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub use topology::{build_topology, cut_points, read_hostfile, NodeMap, NodeTopology, Triples};

use crate::transport::{self, DestLocator, Envelope, Payload, TransportConfig, TransportError, TransportMode};
use crate::{Rank, Tag};

pub const RESERVED_TAG_BASE: Tag = 1 << 30;

pub const ENV_RANK: &str = "FCM_RANK";
pub const ENV_SIZE: &str = "FCM_SIZE";
pub const ENV_ROOT: &str = "FCM_ROOT";
pub const ENV_MODE: &str = "FCM_MODE";
pub const ENV_NODEMAP: &str = "FCM_NODEMAP";
/// Optional TOML file with transport settings.
pub const ENV_CONFIG: &str = "FCM_CONFIG";

#[derive(Debug, Error)]
pub enum CommError {
    #[error("missing environment variable {0}")]
    MissingEnvironment(&'static str),
    #[error("bad value for {var}: {detail}")]
    BadEnvironment { var: &'static str, detail: String },
    #[error("inconsistent node map: {0}")]
    InconsistentNodeMap(String),
    #[error("destination rank {dest} out of range for size {size}")]
    InvalidDest { dest: Rank, size: usize },
    #[error("tag {0} is in the reserved range [2^30, 2^31)")]
    ReservedTag(Tag),
    #[error("unexpected payload: {0}")]
    UnexpectedPayload(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

impl From<transport::FrameError> for CommError {
    fn from(e: transport::FrameError) -> Self {
        CommError::Transport(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CommError>;

/// One rank's view of the SPMD world. Confined to the thread that owns it.
#[derive(Debug)]
pub struct CommContext {
    rank: Rank,
    size: usize,
    topology: NodeTopology,
    transport: TransportConfig,
    epoch: Cell<u32>,
}

impl CommContext {
    /// Builds a context and creates this rank's mailbox directory.
    pub fn new(rank: Rank, topology: NodeTopology, transport: TransportConfig) -> Result<Self> {
        let size = topology.size();
        if rank >= size {
            return Err(CommError::InconsistentNodeMap(format!(
                "rank {rank} outside topology of {size} ranks"
            )));
        }
        transport.validate()?;
        let mbox = transport::mailbox_dir(&transport.mailbox_root, rank);
        std::fs::create_dir_all(&mbox).map_err(|e| TransportError::Io { path: mbox, source: e })?;
        Ok(Self { rank, size, topology, transport, epoch: Cell::new(0) })
    }

    /// Reads `FCM_RANK`, `FCM_SIZE`, `FCM_ROOT`, `FCM_MODE`, `FCM_NODEMAP`
    /// and, when set, `FCM_CONFIG` and `FCM_REMOTE_COPY`.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn need(lookup: &impl Fn(&str) -> Option<String>, var: &'static str) -> Result<String> {
            lookup(var).ok_or(CommError::MissingEnvironment(var))
        }
        fn number(lookup: &impl Fn(&str) -> Option<String>, var: &'static str) -> Result<usize> {
            need(lookup, var)?
                .trim()
                .parse()
                .map_err(|e| CommError::BadEnvironment { var, detail: format!("{e}") })
        }
        let rank = number(&lookup, ENV_RANK)?;
        let size = number(&lookup, ENV_SIZE)?;
        let root = PathBuf::from(need(&lookup, ENV_ROOT)?);
        let mode: TransportMode = need(&lookup, ENV_MODE)?
            .parse()
            .map_err(|detail| CommError::BadEnvironment { var: ENV_MODE, detail })?;
        let node_map: NodeMap = need(&lookup, ENV_NODEMAP)?
            .parse()
            .map_err(|detail| CommError::BadEnvironment { var: ENV_NODEMAP, detail })?;
        if size == 0 {
            return Err(CommError::BadEnvironment { var: ENV_SIZE, detail: "size must be positive".into() });
        }
        if rank >= size {
            return Err(CommError::BadEnvironment {
                var: ENV_RANK,
                detail: format!("rank {rank} not below size {size}"),
            });
        }
        let topology = build_topology(&node_map, size)?;

        let mut cfg = TransportConfig::new(mode, root.clone());
        if let Some(path) = lookup(ENV_CONFIG) {
            cfg.apply_file(path.as_ref())?;
            // the environment decides where this job's mailboxes live
            cfg.mailbox_root = root;
            cfg.mode = mode;
        }
        if let Some(template) = lookup(transport::config::REMOTE_COPY_ENV) {
            cfg.remote_copy = template;
        }
        Self::new(rank, topology, cfg)
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn topology(&self) -> &NodeTopology {
        &self.topology
    }

    pub fn transport(&self) -> &TransportConfig {
        &self.transport
    }

    /// The configured receive timeout (`None` = wait forever).
    pub fn timeout(&self) -> Option<Duration> {
        self.transport.recv_timeout
    }

    /// Draws the next library-internal tag. Every rank must draw the same
    /// sequence, which holds as long as collectives are called in SPMD order.
    pub fn next_reserved_tag(&self) -> Tag {
        let e = self.epoch.get();
        self.epoch.set(e.wrapping_add(1));
        RESERVED_TAG_BASE + (e % RESERVED_TAG_BASE)
    }

    fn check_dest(&self, dest: Rank) -> Result<()> {
        if dest >= self.size {
            return Err(CommError::InvalidDest { dest, size: self.size });
        }
        Ok(())
    }

    fn locator(&self, dest: Rank) -> DestLocator {
        let mut loc = DestLocator::local(&self.transport, dest);
        if self.topology.node_of(dest) != self.topology.node_of(self.rank) {
            loc.remote_host = Some(self.topology.host_of(dest).to_string());
        }
        loc
    }

    /// Deposits already-encoded frame bytes. Any tag below 2^31 is accepted.
    pub(crate) fn send_frame(&self, dest: Rank, tag: Tag, frame: &[u8]) -> Result<()> {
        self.check_dest(dest)?;
        let env = Envelope::new(self.rank, dest, tag)?;
        transport::deposit(&self.transport, &env, frame, &self.locator(dest))?;
        Ok(())
    }

    pub(crate) fn recv_frame(&self, source: Rank, tag: Tag) -> Result<Vec<u8>> {
        self.check_dest(source)?;
        let env = Envelope::new(source, self.rank, tag)?;
        Ok(transport::consume(&self.transport, &env, self.timeout())?)
    }

    pub(crate) fn send_internal(&self, dest: Rank, tag: Tag, value: &Payload) -> Result<()> {
        self.send_frame(dest, tag, &value.encode())
    }

    pub(crate) fn recv_internal(&self, source: Rank, tag: Tag) -> Result<Payload> {
        Ok(Payload::decode(&self.recv_frame(source, tag)?)?)
    }

    /// Blocking one-sided send: returns as soon as the message is deposited.
    pub fn send(&self, dest: Rank, tag: Tag, value: &Payload) -> Result<()> {
        if tag >= RESERVED_TAG_BASE {
            return Err(CommError::ReservedTag(tag));
        }
        self.send_internal(dest, tag, value)
    }

    /// Blocks until the message `(source, tag)` arrives or `timeout` expires.
    /// `None` falls back to the configured receive timeout.
    pub fn recv(&self, source: Rank, tag: Tag, timeout: Option<Duration>) -> Result<Payload> {
        if tag >= RESERVED_TAG_BASE {
            return Err(CommError::ReservedTag(tag));
        }
        self.check_dest(source)?;
        let env = Envelope::new(source, self.rank, tag)?;
        let bytes = transport::consume(&self.transport, &env, timeout.or(self.timeout()))?;
        Ok(Payload::decode(&bytes)?)
    }

    /// Non-blocking check for a pending `(source, tag)` message to this rank.
    pub fn probe(&self, source: Rank, tag: Tag) -> Result<bool> {
        let env = Envelope::new(source, self.rank, tag)?;
        Ok(transport::probe(&self.transport, &env)?)
    }

    /// No rank returns before every rank has entered.
    pub fn barrier(&self) -> Result<()> {
        crate::collectives::barrier(self)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::array::DenseArray;

    fn ctx_pair(dir: &std::path::Path) -> (CommContext, CommContext) {
        let cfg = TransportConfig::shared(dir)
            .with_polling(Duration::from_micros(100), Duration::from_millis(2))
            .with_timeout(Some(Duration::from_secs(5)));
        let topo = NodeTopology::single_node(2);
        (
            CommContext::new(0, topo.clone(), cfg.clone()).unwrap(),
            CommContext::new(1, topo, cfg).unwrap(),
        )
    }

    #[test]
    fn send_recv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = ctx_pair(dir.path());
        let value = Payload::F64(DenseArray::from_vec(vec![1], vec![3.25]).unwrap());
        a.send(1, 0, &value).unwrap();
        assert!(b.probe(0, 0).unwrap());
        assert_eq!(b.recv(0, 0, Some(Duration::from_secs(1))).unwrap(), value);
        assert!(!b.probe(0, 0).unwrap());
    }

    #[test]
    fn send_argument_checks() {
        let dir = tempfile::tempdir().unwrap();
        let (a, _b) = ctx_pair(dir.path());
        assert!(matches!(
            a.send(2, 0, &Payload::empty()),
            Err(CommError::InvalidDest { dest: 2, size: 2 })
        ));
        assert!(matches!(
            a.send(1, RESERVED_TAG_BASE, &Payload::empty()),
            Err(CommError::ReservedTag(_))
        ));
        assert!(a.send(1, RESERVED_TAG_BASE - 1, &Payload::empty()).is_ok());
    }

    #[test]
    fn recv_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let (_a, b) = ctx_pair(dir.path());
        assert!(matches!(
            b.recv(0, 3, Some(Duration::from_millis(30))),
            Err(CommError::Transport(TransportError::Timeout { .. }))
        ));
    }

    #[test]
    fn reserved_tags_rotate() {
        let dir = tempfile::tempdir().unwrap();
        let (a, _b) = ctx_pair(dir.path());
        let t0 = a.next_reserved_tag();
        let t1 = a.next_reserved_tag();
        assert_eq!(t0, RESERVED_TAG_BASE);
        assert_eq!(t1, RESERVED_TAG_BASE + 1);
    }

    fn env_of(pairs: &[(&str, String)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn init_from_environment() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().display().to_string();
        let ctx = CommContext::from_lookup(env_of(&[
            (ENV_RANK, "3".into()),
            (ENV_SIZE, "4".into()),
            (ENV_ROOT, root.clone()),
            (ENV_MODE, "shared-dir".into()),
            (ENV_NODEMAP, "triples:2x2".into()),
        ]))
        .unwrap();
        assert_eq!(ctx.rank(), 3);
        assert_eq!(ctx.topology().node_map(), &[0, 0, 1, 1]);
        assert_eq!(ctx.topology().leaders(), vec![0, 2]);
        assert!(dir.path().join("rank3").is_dir());

        let single = CommContext::from_lookup(env_of(&[
            (ENV_RANK, "0".into()),
            (ENV_SIZE, "1".into()),
            (ENV_ROOT, root.clone()),
            (ENV_MODE, "local-dir".into()),
            (ENV_NODEMAP, "triples:1x1".into()),
        ]))
        .unwrap();
        assert_eq!(single.topology().leaders(), vec![0]);
        assert_eq!(single.transport().mode, TransportMode::LocalDir);
    }

    #[test]
    fn init_hostfile_block_fill() {
        let dir = tempfile::tempdir().unwrap();
        let hosts = dir.path().join("hosts");
        std::fs::write(&hosts, "a\nb\nc\n").unwrap();
        let ctx = CommContext::from_lookup(env_of(&[
            (ENV_RANK, "0".into()),
            (ENV_SIZE, "5".into()),
            (ENV_ROOT, dir.path().display().to_string()),
            (ENV_MODE, "shared-dir".into()),
            (ENV_NODEMAP, format!("hostfile:{}", hosts.display())),
        ]))
        .unwrap();
        assert_eq!(ctx.topology().node_map(), &[0, 1, 1, 2, 2]);
    }

    #[test]
    fn init_errors() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().display().to_string();
        assert!(matches!(
            CommContext::from_lookup(env_of(&[(ENV_RANK, "0".into())])),
            Err(CommError::MissingEnvironment(ENV_SIZE))
        ));
        assert!(matches!(
            CommContext::from_lookup(env_of(&[
                (ENV_RANK, "0".into()),
                (ENV_SIZE, "5".into()),
                (ENV_ROOT, root),
                (ENV_MODE, "shared-dir".into()),
                (ENV_NODEMAP, "triples:2x2".into()),
            ])),
            Err(CommError::InconsistentNodeMap(_))
        ));
    }
}
