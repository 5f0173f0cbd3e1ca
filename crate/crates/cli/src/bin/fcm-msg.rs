//! Small messaging utility for smoke tests and debugging. Run under
//! `fcm-run`, or set the rank environment by hand.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fcm_core::transport::{self, Payload};
use fcm_core::{CommContext, Tag};
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(name = "fcm-msg", version, about = "Send, receive and inspect file-based messages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print this rank's place in the job.
    Hello,
    /// Deposit bytes for another rank; prints their SHA-256.
    Send {
        #[arg(long)]
        to: usize,
        #[arg(long)]
        tag: Tag,
        /// Read the payload from FILE (`-` for stdin).
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        #[arg(long)]
        text: Option<String>,
    },
    /// Wait for a message; prints the SHA-256 of its bytes.
    Recv {
        #[arg(long)]
        from: usize,
        #[arg(long)]
        tag: Tag,
        /// Write the payload bytes here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout_ms: Option<u64>,
    },
    /// Exit 0 if the message is waiting, 1 otherwise.
    Probe {
        #[arg(long)]
        from: usize,
        #[arg(long)]
        tag: Tag,
    },
    /// Remove every message file from this rank's mailbox.
    Purge,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn run(cli: Cli) -> Result<u8> {
    let ctx = CommContext::from_env().context("reading the rank environment")?;
    match cli.command {
        Command::Hello => {
            let t = ctx.topology();
            println!(
                "rank {} of {} on {} (node {}, local rank {})",
                ctx.rank(),
                ctx.size(),
                t.host_of(ctx.rank()),
                t.node_of(ctx.rank()),
                t.local_rank(ctx.rank())
            );
        }
        Command::Send { to, tag, file, text } => {
            let bytes = match (file, text) {
                (Some(p), _) if p.as_os_str() == "-" => {
                    let mut buf = Vec::new();
                    std::io::stdin().read_to_end(&mut buf)?;
                    buf
                }
                (Some(p), _) => std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?,
                (None, Some(t)) => t.into_bytes(),
                (None, None) => Vec::new(),
            };
            ctx.send(to, tag, &Payload::Bytes(bytes.clone()))?;
            println!("{}", digest(&bytes));
        }
        Command::Recv { from, tag, out, timeout_ms } => {
            let payload = ctx.recv(from, tag, timeout_ms.map(Duration::from_millis))?;
            let bytes = match payload {
                Payload::Bytes(b) => b,
                other => other.encode(),
            };
            if let Some(p) = out {
                std::fs::write(&p, &bytes).with_context(|| format!("writing {}", p.display()))?;
            }
            println!("{}", digest(&bytes));
        }
        Command::Probe { from, tag } => {
            return Ok(if ctx.probe(from, tag)? { 0 } else { 1 });
        }
        Command::Purge => {
            let n = transport::purge_mailbox(ctx.transport(), ctx.rank())?;
            println!("removed {n} files");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fcm-msg: {e:#}");
            ExitCode::from(2)
        }
    }
}
