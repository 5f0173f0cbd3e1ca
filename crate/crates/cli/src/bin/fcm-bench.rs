//! Benchmark harness. Run the sweep commands under `fcm-run`; rank 0 writes
//! the CSV files.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args as ClapArgs, Parser, Subcommand};
use fcm_core::bench::{self, BenchOp, BenchRecord, SweepSpec};
use fcm_core::pgas::{DimDist, DistMap, GridOrder};
use fcm_core::{BcastVariant, CommContext};

#[derive(Debug, Parser)]
#[command(name = "fcm-bench", version, about = "Point-to-point, broadcast and aggregation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ping with acknowledgement between two ranks.
    P2p(Sweep),
    /// Broadcast from rank 0.
    Bcast {
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long, default_value = "tree")]
        bcast_variant: BcastVariant,
    },
    /// Aggregation of a block-distributed array onto rank 0.
    Agg(Sweep),
    /// Recompute the summary CSV from a raw CSV.
    Summarize {
        #[arg(long)]
        raw: PathBuf,
        /// Summary CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Also draw a bandwidth plot here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print the owned extent of every rank under a map.
    MapDump {
        /// Global dimensions, e.g. `10` or `6,6`.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Processor grid, e.g. `4` or `2,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        /// Per-dimension distributions: block[:overlap], cyclic, bc:<block>.
        #[arg(long, value_delimiter = ',')]
        dists: Option<Vec<DimDist>>,
        /// Processor list (defaults to 0..grid product).
        #[arg(long, value_delimiter = ',')]
        plist: Option<Vec<usize>>,
        #[arg(long, default_value = "row")]
        order: GridOrder,
    },
}

#[derive(Debug, ClapArgs)]
struct Sweep {
    /// Comma-separated message sizes in bytes; K, M and G suffixes allowed.
    #[arg(long)]
    sizes: Option<SizeList>,
    /// Largest size in the default p2p sweep.
    #[arg(long, default_value = "16M", value_parser = parse_one_size)]
    max_size: u64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmups: usize,
    /// Output directory for CSV (and SVG) files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write a log-log bandwidth plot.
    #[arg(long)]
    svg: bool,
    /// First polling interval in microseconds (0 spins).
    #[arg(long)]
    poll_initial_us: Option<u64>,
    /// Longest polling interval in microseconds.
    #[arg(long)]
    poll_max_us: Option<u64>,
    /// Receive timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long, hide = true)]
    inject_corruption: Option<usize>,
}

#[derive(Debug, Clone)]
struct SizeList(Vec<u64>);

impl std::str::FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        bench::parse_sizes(s).map(SizeList)
    }
}

fn parse_one_size(s: &str) -> std::result::Result<u64, String> {
    match bench::parse_sizes(s)?.as_slice() {
        [one] => Ok(*one),
        _ => Err(format!("expected one size, got {s:?}")),
    }
}

fn context(sweep: &Sweep) -> Result<CommContext> {
    let ctx = CommContext::from_env().context("reading the rank environment (run under fcm-run)")?;
    if sweep.poll_initial_us.is_none() && sweep.poll_max_us.is_none() && sweep.timeout_ms.is_none() {
        return Ok(ctx);
    }
    let mut cfg = ctx.transport().clone();
    let initial = sweep.poll_initial_us.map_or(cfg.poll_initial, Duration::from_micros);
    let max = sweep.poll_max_us.map_or(cfg.poll_max.max(initial), Duration::from_micros);
    cfg = cfg.with_polling(initial, max);
    if let Some(ms) = sweep.timeout_ms {
        cfg = cfg.with_timeout(Some(Duration::from_millis(ms)));
    }
    Ok(CommContext::new(ctx.rank(), ctx.topology().clone(), cfg)?)
}

fn spec(sweep: &Sweep, default_sizes: Vec<u64>) -> SweepSpec {
    SweepSpec {
        sizes: sweep.sizes.clone().map_or(default_sizes, |l| l.0),
        reps: sweep.reps,
        warmups: sweep.warmups,
        inject_corruption: sweep.inject_corruption,
    }
}

fn finish(ctx: &CommContext, sweep: &Sweep, stem: &str, records: Vec<BenchRecord>) -> Result<()> {
    if ctx.rank() != 0 {
        return Ok(());
    }
    let rows = bench::summarize(&records)?;
    let out = bench::emit(&records, &rows, &sweep.out, stem, sweep.svg)?;
    println!("op,msg_bytes,ranks,reps,elapsed_geomean_s,bandwidth_Bps");
    for r in &rows {
        println!("{},{},{},{},{:.6e},{:.6e}", r.op, r.msg_bytes, r.ranks, r.reps, r.elapsed_geomean_s, r.bandwidth_bps);
    }
    log::info!("wrote {} and {}", out.raw.display(), out.summary.display());
    Ok(())
}

fn map_dump(
    dims: Vec<usize>,
    grid: Vec<usize>,
    dists: Option<Vec<DimDist>>,
    plist: Option<Vec<usize>>,
    order: GridOrder,
) -> Result<()> {
    let plist = plist.unwrap_or_else(|| (0..grid.iter().product()).collect());
    let map = DistMap::new(grid, dists, plist, order)?;
    if dims.len() != map.ndim() {
        bail!("--dims has {} entries but the grid has {}", dims.len(), map.ndim());
    }
    print!("{}", map.dump_extents(&dims)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let collective_defaults = vec![8, 8 << 10, 8 << 20];
    match cli.command {
        Command::P2p(sweep) => {
            let ctx = context(&sweep)?;
            let records = bench::bench_p2p(&ctx, &spec(&sweep, bench::default_p2p_sizes(sweep.max_size)))?;
            finish(&ctx, &sweep, BenchOp::P2p.name(), records)
        }
        Command::Bcast { sweep, bcast_variant } => {
            let ctx = context(&sweep)?;
            let records = bench::bench_bcast(&ctx, &spec(&sweep, collective_defaults), bcast_variant)?;
            finish(&ctx, &sweep, BenchOp::for_variant(bcast_variant).name(), records)
        }
        Command::Agg(sweep) => {
            let ctx = context(&sweep)?;
            let records = bench::bench_agg(&ctx, &spec(&sweep, collective_defaults))?;
            finish(&ctx, &sweep, BenchOp::Agg.name(), records)
        }
        Command::Summarize { raw, out, svg } => {
            let records = bench::read_raw_csv(&raw)?;
            let rows = bench::summarize(&records)?;
            bench::write_summary_csv(&out, &rows)?;
            if let Some(path) = svg {
                if !rows.is_empty() {
                    bench::plot_bandwidth(&path, &rows)?;
                }
            }
            Ok(())
        }
        Command::MapDump { dims, grid, dists, plist, order } => map_dump(dims, grid, dists, plist, order),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fcm-bench: {e:#}");
            ExitCode::FAILURE
        }
    }
}
