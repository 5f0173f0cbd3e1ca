//! SPMD launch: one process per rank with the communicator environment set.
//!
//! Multi-node runs are emulated on one machine by default. A spawn-command
//! template can route ranks on other nodes through e.g. `ssh`.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::process::{Child, Command};
use std::str::FromStr;

use thiserror::Error;

use crate::comm::{
    build_topology, read_hostfile, CommContext, CommError, NodeMap, NodeTopology, Triples, ENV_MODE, ENV_NODEMAP,
    ENV_RANK, ENV_ROOT, ENV_SIZE,
};
use crate::transport::{self, TransportConfig, TransportError, TransportMode};
use crate::Rank;

/// Advisory socket index handed to pinned ranks.
pub const ENV_PIN_SOCKET: &str = "FCM_PIN_SOCKET";

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("failed to spawn rank {rank} ({command}): {source}")]
    Spawn { rank: Rank, command: String, source: std::io::Error },
    #[error("waiting for rank {rank}: {source}")]
    Wait { rank: Rank, source: std::io::Error },
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

pub type Result<T> = std::result::Result<T, LaunchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PinPolicy {
    #[default]
    None,
    /// Even local ranks on socket 0, odd local ranks on socket 1.
    AlternateSockets,
}

impl FromStr for PinPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(PinPolicy::None),
            "alternate-sockets" => Ok(PinPolicy::AlternateSockets),
            _ => Err(format!("unknown pin policy {s:?} (none|alternate-sockets)")),
        }
    }
}

impl fmt::Display for PinPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PinPolicy::None => "none",
            PinPolicy::AlternateSockets => "alternate-sockets",
        })
    }
}

/// Socket for a rank at `local_rank` among `ppn` ranks on its node, or `None`
/// when no pinning is requested.
pub fn pin_hint(local_rank: usize, ppn: usize, policy: PinPolicy) -> Option<usize> {
    match policy {
        PinPolicy::None => None,
        PinPolicy::AlternateSockets if ppn > 0 => Some(local_rank % 2),
        PinPolicy::AlternateSockets => None,
    }
}

/// Launcher inputs as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub program: Vec<String>,
    pub triples: Option<Triples>,
    pub hostfile: Option<PathBuf>,
    pub size: Option<usize>,
    pub root: PathBuf,
    pub mode: TransportMode,
    pub pin: PinPolicy,
    pub spawn_cmd: Option<String>,
}

impl PlanRequest {
    pub fn triples(t: Triples, root: impl Into<PathBuf>, program: Vec<String>) -> Self {
        Self {
            program,
            triples: Some(t),
            hostfile: None,
            size: None,
            root: root.into(),
            mode: TransportMode::SharedDir,
            pin: PinPolicy::None,
            spawn_cmd: None,
        }
    }
}

/// A fully resolved launch.
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchPlan {
    pub program: Vec<String>,
    pub node_map: NodeMap,
    pub topology: NodeTopology,
    pub root: PathBuf,
    pub mode: TransportMode,
    pub pin: PinPolicy,
    pub spawn_cmd: Option<String>,
    /// Thread count from the triples; recorded only.
    pub threads: usize,
}

/// Resolves the request into a plan.
pub fn plan(req: &PlanRequest) -> Result<LaunchPlan> {
    if req.program.is_empty() {
        return Err(LaunchError::Usage("no program given".into()));
    }
    let (node_map, size, threads) = match (&req.triples, &req.hostfile) {
        (Some(_), Some(_)) => return Err(LaunchError::Usage("--triples and --hostfile are exclusive".into())),
        (None, None) => return Err(LaunchError::Usage("one of --triples or --hostfile is required".into())),
        (Some(t), None) => {
            if let Some(n) = req.size {
                if n != t.size() {
                    return Err(LaunchError::Usage(format!("--size {n} conflicts with triples {t} ({} ranks)", t.size())));
                }
            }
            (NodeMap::Triples(*t), t.size(), t.threads)
        }
        (None, Some(path)) => {
            let path = std::path::absolute(path).map_err(|e| TransportError::Io { path: path.clone(), source: e })?;
            let hosts = read_hostfile(&path)?;
            let size = req.size.unwrap_or(hosts.len());
            (NodeMap::Hostfile(path), size, 1)
        }
    };
    if size == 0 {
        return Err(LaunchError::Usage("size must be positive".into()));
    }
    let topology = build_topology(&node_map, size).map_err(|e| LaunchError::Usage(e.to_string()))?;
    let root = std::path::absolute(&req.root).map_err(|e| TransportError::Io { path: req.root.clone(), source: e })?;
    Ok(LaunchPlan {
        program: req.program.clone(),
        node_map,
        topology,
        root,
        mode: req.mode,
        pin: req.pin,
        spawn_cmd: req.spawn_cmd.clone(),
        threads,
    })
}

impl LaunchPlan {
    pub fn size(&self) -> usize {
        self.topology.size()
    }

    /// Environment variables for `rank`, in a fixed order.
    pub fn rank_env(&self, rank: Rank) -> Vec<(String, String)> {
        let mut env = vec![
            (ENV_RANK.to_string(), rank.to_string()),
            (ENV_SIZE.to_string(), self.size().to_string()),
            (ENV_ROOT.to_string(), self.root.display().to_string()),
            (ENV_MODE.to_string(), self.mode.to_string()),
            (ENV_NODEMAP.to_string(), self.node_map.to_string()),
        ];
        if let Some(socket) = self.socket_of(rank) {
            env.push((ENV_PIN_SOCKET.to_string(), socket.to_string()));
        }
        env
    }

    fn socket_of(&self, rank: Rank) -> Option<usize> {
        let node = self.topology.node_of(rank);
        pin_hint(self.topology.local_rank(rank), self.topology.ranks_on(node).len(), self.pin)
    }

    /// Command line for `rank`. Ranks off the first node go through the
    /// spawn template when one is set.
    pub fn command_line(&self, rank: Rank) -> Result<Vec<String>> {
        let template = match &self.spawn_cmd {
            Some(t) if self.topology.node_of(rank) != 0 => t,
            _ => return Ok(self.program.clone()),
        };
        let tokens = shlex::split(template)
            .ok_or_else(|| LaunchError::Usage(format!("cannot parse spawn command {template:?}")))?;
        let socket = self.socket_of(rank).map(|s| s.to_string()).unwrap_or_default();
        let mut out = Vec::new();
        for tok in tokens {
            match tok.as_str() {
                "{env}" => out.extend(self.rank_env(rank).into_iter().map(|(k, v)| format!("{k}={v}"))),
                "{program}" => out.extend(self.program.iter().cloned()),
                _ => out.push(
                    tok.replace("{host}", self.topology.host_of(rank))
                        .replace("{rank}", &rank.to_string())
                        .replace("{socket}", &socket),
                ),
            }
        }
        if out.is_empty() {
            return Err(LaunchError::Usage("spawn command is empty".into()));
        }
        Ok(out)
    }

    /// Human-readable description printed by `--dry-run`.
    pub fn describe(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "size: {}", self.size());
        let _ = writeln!(s, "node-map: {}", self.node_map);
        let _ = writeln!(s, "node-of: {:?}", self.topology.node_map());
        let _ = writeln!(s, "hosts: {}", self.topology.hosts().join(" "));
        let _ = writeln!(s, "threads: {}", self.threads);
        let _ = writeln!(s, "root: {}", self.root.display());
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(s, "pin: {}", self.pin);
        for r in 0..self.size() {
            let env: Vec<String> = self.rank_env(r).into_iter().map(|(k, v)| format!("{k}={v}")).collect();
            let cmd = self.command_line(r)?.iter().map(|t| shlex::try_quote(t).map(|q| q.into_owned()).unwrap_or_else(|_| t.clone())).collect::<Vec<_>>();
            let _ = writeln!(s, "rank {r}: {} {}", env.join(" "), cmd.join(" "));
        }
        Ok(s)
    }

    /// A batch-script rendering of this launch for a Slurm-style scheduler.
    pub fn batch_script(&self, launcher: &str) -> String {
        let quote = |t: &str| shlex::try_quote(t).map(|q| q.into_owned()).unwrap_or_else(|_| t.to_string());
        let mut s = String::from("#!/bin/sh\n");
        let _ = writeln!(s, "#SBATCH --nodes={}", self.topology.node_count());
        let _ = writeln!(s, "#SBATCH --ntasks={}", self.size());
        let _ = writeln!(s, "#SBATCH --ntasks-per-node={}", self.topology.max_ppn());
        let _ = writeln!(s, "#SBATCH --cpus-per-task={}", self.threads);
        let mut cmd = vec![launcher.to_string()];
        match &self.node_map {
            NodeMap::Triples(t) => cmd.extend(["--triples".to_string(), t.to_string()]),
            NodeMap::Hostfile(p) => {
                cmd.extend(["--hostfile".to_string(), p.display().to_string(), "--size".into(), self.size().to_string()])
            }
            NodeMap::Hosts(_) => {}
        }
        cmd.extend(["--root".into(), self.root.display().to_string(), "--mode".into(), self.mode.to_string()]);
        cmd.extend(["--pin".into(), self.pin.to_string()]);
        if let Some(t) = &self.spawn_cmd {
            cmd.extend(["--spawn-cmd".into(), t.clone()]);
        }
        cmd.push("--".into());
        cmd.extend(self.program.iter().cloned());
        let line: Vec<String> = cmd.iter().map(|t| quote(t)).collect();
        let _ = writeln!(s, "exec {}", line.join(" "));
        s
    }

    fn transport_config(&self) -> TransportConfig {
        TransportConfig::new(self.mode, self.root.clone())
    }

    /// Creates every mailbox and removes stale message files.
    pub fn prepare_mailboxes(&self) -> Result<usize> {
        let cfg = self.transport_config();
        std::fs::create_dir_all(&self.root).map_err(|e| TransportError::Io { path: self.root.clone(), source: e })?;
        let mut removed = 0;
        for r in 0..self.size() {
            let dir = transport::mailbox_dir(&self.root, r);
            std::fs::create_dir_all(&dir).map_err(|e| TransportError::Io { path: dir, source: e })?;
            removed += transport::purge_mailbox(&cfg, r)?;
        }
        Ok(removed)
    }
}

#[cfg(unix)]
fn status_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status.code().or_else(|| status.signal().map(|s| 128 + s)).unwrap_or(1)
}

#[cfg(not(unix))]
fn status_code(status: std::process::ExitStatus) -> i32 {
    status.code().unwrap_or(1)
}

/// Spawns every rank, waits for all of them and returns their exit statuses
/// in rank order. A rank killed by signal `s` reports `128 + s`.
pub fn launch(plan: &LaunchPlan) -> Result<Vec<i32>> {
    plan.prepare_mailboxes()?;
    let mut children: Vec<(Rank, Child)> = Vec::with_capacity(plan.size());
    let mut spawn_error = None;
    for r in 0..plan.size() {
        let argv = plan.command_line(r)?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]).envs(plan.rank_env(r));
        log::debug!("spawning rank {r}: {argv:?}");
        match cmd.spawn() {
            Ok(child) => children.push((r, child)),
            Err(source) => {
                spawn_error = Some(LaunchError::Spawn { rank: r, command: argv.join(" "), source });
                break;
            }
        }
    }
    if let Some(err) = spawn_error {
        for (_, mut c) in children {
            let _ = c.kill();
            let _ = c.wait();
        }
        return Err(err);
    }
    let mut statuses = vec![0; plan.size()];
    for (r, mut child) in children {
        let status = child.wait().map_err(|source| LaunchError::Wait { rank: r, source })?;
        statuses[r] = status_code(status);
    }
    Ok(statuses)
}

/// Runs `f` once per rank on its own thread, each with its own context, and
/// returns the results in rank order. Mailboxes are purged first. Useful for
/// tests and for emulating a job inside one process.
pub fn run_threads<R, F>(topology: &NodeTopology, transport: &TransportConfig, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(CommContext) -> R + Sync,
{
    for r in 0..topology.size() {
        let _ = transport::purge_mailbox(transport, r);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..topology.size())
            .map(|r| {
                let f = &f;
                let topology = topology.clone();
                let transport = transport.clone();
                scope.spawn(move || {
                    let ctx = CommContext::new(r, topology, transport).expect("context for emulated rank");
                    f(ctx)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))).collect()
    })
}
