//! Launches one process per rank with the communicator environment set.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use fcm_core::launcher::{self, PinPolicy, PlanRequest};
use fcm_core::{TransportMode, Triples};

#[derive(Debug, Parser)]
#[command(name = "fcm-run", version, about = "Run an SPMD program over file-based message passing")]
struct Args {
    /// Launch geometry NODESxPPN[xTHREADS]; nodes are emulated locally.
    #[arg(long, conflicts_with = "hostfile", required_unless_present = "hostfile")]
    triples: Option<Triples>,
    /// One host name per line; ranks are block-filled over the hosts.
    #[arg(long)]
    hostfile: Option<PathBuf>,
    /// Rank count (defaults to the host count with --hostfile).
    #[arg(long)]
    size: Option<usize>,
    /// Mailbox root directory.
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value = "shared-dir")]
    mode: TransportMode,
    #[arg(long, default_value = "none")]
    pin: PinPolicy,
    /// Template for ranks on other nodes, e.g. `ssh {host} env {env} {program}`.
    #[arg(long)]
    spawn_cmd: Option<String>,
    /// Print the resolved plan and exit.
    #[arg(long)]
    dry_run: bool,
    /// Write a batch script for this launch to FILE and exit.
    #[arg(long, value_name = "FILE")]
    emit_batch: Option<PathBuf>,
    #[arg(last = true, required = true, num_args = 1..)]
    program: Vec<String>,
}

fn run(args: Args) -> Result<u8> {
    let req = PlanRequest {
        program: args.program,
        triples: args.triples,
        hostfile: args.hostfile,
        size: args.size,
        root: args.root,
        mode: args.mode,
        pin: args.pin,
        spawn_cmd: args.spawn_cmd,
    };
    let plan = launcher::plan(&req)?;
    if args.dry_run {
        print!("{}", plan.describe()?);
        return Ok(0);
    }
    if let Some(path) = args.emit_batch {
        std::fs::write(&path, plan.batch_script("fcm-run")).with_context(|| format!("writing {}", path.display()))?;
        return Ok(0);
    }
    let statuses = launcher::launch(&plan)?;
    for (rank, &s) in statuses.iter().enumerate() {
        if s != 0 {
            log::warn!("rank {rank} exited with status {s}");
        }
    }
    Ok(statuses.into_iter().max().unwrap_or(0).clamp(0, 255) as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fcm-run: {e:#}");
            ExitCode::from(2)
        }
    }
}
