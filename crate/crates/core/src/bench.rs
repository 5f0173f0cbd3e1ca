//! Benchmark harness: point-to-point, broadcast and aggregation sweeps,
//! geometric-mean summaries, CSV and SVG output.
//!
//! Every timed operation also checks the data it moved. A mismatch aborts the
//! sweep on all ranks with [`BenchError::Corrupted`] instead of producing a
//! record.
//!
//! Bytes moved per row: `msg_bytes` for p2p and broadcast, `ranks * msg_bytes`
//! for aggregation. The p2p time covers the message plus an 8-byte
//! acknowledgement from the receiver.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::DenseArray;
use crate::collectives::{bcast, gather_tree, BcastVariant};
use crate::comm::{CommContext, CommError};
use crate::pgas::{agg, DistArray, DistMap, PgasError};
use crate::transport::Payload;
use crate::Rank;

pub const RAW_HEADER: [&str; 8] = ["op", "msg_bytes", "ranks", "nodes", "ppn", "rep", "elapsed_s", "bandwidth_Bps"];
pub const SUMMARY_HEADER: [&str; 8] =
    ["op", "msg_bytes", "ranks", "nodes", "ppn", "reps", "elapsed_geomean_s", "bandwidth_Bps"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("data corrupted during timed {op}: {detail}")]
    Corrupted { op: BenchOp, detail: String },
    #[error("geometric mean of an empty group")]
    EmptyGroup,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Pgas(#[from] PgasError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchOp {
    #[serde(rename = "p2p")]
    P2p,
    #[serde(rename = "bcast-serial")]
    BcastSerial,
    #[serde(rename = "bcast-node-serial")]
    BcastNodeSerial,
    #[serde(rename = "bcast-tree")]
    BcastTree,
    #[serde(rename = "agg")]
    Agg,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::P2p => "p2p",
            BenchOp::BcastSerial => "bcast-serial",
            BenchOp::BcastNodeSerial => "bcast-node-serial",
            BenchOp::BcastTree => "bcast-tree",
            BenchOp::Agg => "agg",
        }
    }

    pub fn for_variant(v: BcastVariant) -> Self {
        match v {
            BcastVariant::Serial => BenchOp::BcastSerial,
            BcastVariant::NodeSerial => BenchOp::BcastNodeSerial,
            BcastVariant::Tree => BenchOp::BcastTree,
        }
    }

    /// Bytes credited to one operation of this kind.
    pub fn bytes_moved(self, msg_bytes: u64, ranks: usize) -> f64 {
        match self {
            BenchOp::Agg => msg_bytes as f64 * ranks as f64,
            _ => msg_bytes as f64,
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [BenchOp::P2p, BenchOp::BcastSerial, BenchOp::BcastNodeSerial, BenchOp::BcastTree, BenchOp::Agg]
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| format!("unknown benchmark op {s:?}"))
    }
}

/// One timed repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub op: BenchOp,
    pub msg_bytes: u64,
    pub ranks: usize,
    pub nodes: usize,
    pub ppn: usize,
    pub rep: usize,
    pub elapsed_s: f64,
    #[serde(rename = "bandwidth_Bps")]
    pub bandwidth_bps: f64,
}

impl BenchRecord {
    fn new(ctx: &CommContext, op: BenchOp, msg_bytes: u64, rep: usize, elapsed_s: f64) -> Self {
        let elapsed_s = elapsed_s.max(1e-9);
        let ranks = ctx.size();
        Self {
            op,
            msg_bytes,
            ranks,
            nodes: ctx.topology().node_count(),
            ppn: ctx.topology().max_ppn(),
            rep,
            elapsed_s,
            bandwidth_bps: op.bytes_moved(msg_bytes, ranks) / elapsed_s,
        }
    }
}

/// Geometric-mean row for one `(op, msg_bytes, ranks)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub op: BenchOp,
    pub msg_bytes: u64,
    pub ranks: usize,
    pub nodes: usize,
    pub ppn: usize,
    pub reps: usize,
    pub elapsed_geomean_s: f64,
    #[serde(rename = "bandwidth_Bps")]
    pub bandwidth_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sizes: Vec<u64>,
    pub reps: usize,
    pub warmups: usize,
    /// Rank whose received data is deliberately damaged, to exercise the
    /// correctness checks.
    pub inject_corruption: Option<Rank>,
}

impl SweepSpec {
    pub fn new(sizes: Vec<u64>) -> Self {
        Self { sizes, reps: 5, warmups: 1, inject_corruption: None }
    }

    pub fn with_reps(mut self, reps: usize, warmups: usize) -> Self {
        self.reps = reps;
        self.warmups = warmups;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(BenchError::InvalidSpec("no message sizes".into()));
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s == 0) {
            return Err(BenchError::InvalidSpec(format!("message size {s} must be at least 1")));
        }
        if self.reps == 0 {
            return Err(BenchError::InvalidSpec("reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Powers of four from 16 bytes up to `max_bytes`.
pub fn default_p2p_sizes(max_bytes: u64) -> Vec<u64> {
    std::iter::successors(Some(16u64), |&s| s.checked_mul(4)).take_while(|&s| s <= max_bytes).collect()
}

/// Parses `16,1K,8M,1G` style lists (binary multiples).
pub fn parse_sizes(s: &str) -> std::result::Result<Vec<u64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (num, mult) = match t.chars().last().map(|c| c.to_ascii_uppercase()) {
                Some('K') => (&t[..t.len() - 1], 1u64 << 10),
                Some('M') => (&t[..t.len() - 1], 1 << 20),
                Some('G') => (&t[..t.len() - 1], 1 << 30),
                _ => (t, 1),
            };
            num.parse::<u64>()
                .ok()
                .and_then(|n| n.checked_mul(mult))
                .ok_or_else(|| format!("bad size {t:?}"))
        })
        .collect()
}

/// Deterministic test bytes for one message.
pub fn pattern(len: u64, salt: u64) -> Vec<u8> {
    (0..len).map(|i| (i.wrapping_mul(31).wrapping_add(salt.wrapping_mul(7)) % 251) as u8).collect()
}

fn checksum(bytes: &[u8]) -> u64 {
    // FNV-1a
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn damage(bytes: &mut [u8]) {
    if let Some(b) = bytes.first_mut() {
        *b ^= 0xff;
    }
}

fn now_ns() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as i64).unwrap_or(0)
}

/// Rank 0 announces whether the repetition checked out; everyone fails
/// together so no rank is left waiting.
fn agree(ctx: &CommContext, op: BenchOp, verdict: Option<String>) -> Result<()> {
    let flag = Payload::Bytes(match &verdict {
        None => Vec::new(),
        Some(detail) => detail.clone().into_bytes(),
    });
    let out = bcast(ctx, BcastVariant::Tree, 0, flag)?;
    let bytes = out.into_bytes().unwrap_or_default();
    if bytes.is_empty() {
        Ok(())
    } else {
        Err(BenchError::Corrupted { op, detail: String::from_utf8_lossy(&bytes).into_owned() })
    }
}

/// Ping with acknowledgement between ranks 0 and 1. Records appear at rank 0.
pub fn bench_p2p(ctx: &CommContext, spec: &SweepSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    if ctx.size() != 2 {
        return Err(BenchError::InvalidSpec(format!("p2p needs exactly 2 ranks, have {}", ctx.size())));
    }
    let me = ctx.rank();
    let mut records = Vec::new();
    for &bytes in &spec.sizes {
        for it in 0..spec.warmups + spec.reps {
            let data_tag = ctx.next_reserved_tag();
            let ack_tag = ctx.next_reserved_tag();
            let expected = pattern(bytes, it as u64);
            ctx.barrier()?;
            let verdict = if me == 0 {
                let start = Instant::now();
                ctx.send_internal(1, data_tag, &Payload::Bytes(expected.clone()))?;
                let ack = ctx.recv_internal(1, ack_tag)?.into_bytes().unwrap_or_default();
                let elapsed = start.elapsed().as_secs_f64();
                let ok = ack.as_slice() == checksum(&expected).to_le_bytes();
                if ok && it >= spec.warmups {
                    records.push(BenchRecord::new(ctx, BenchOp::P2p, bytes, it - spec.warmups, elapsed));
                }
                (!ok).then(|| format!("{bytes}-byte message failed verification at rank 1"))
            } else {
                let mut got = ctx.recv_internal(0, data_tag)?.into_bytes().unwrap_or_default();
                if spec.inject_corruption == Some(me) {
                    damage(&mut got);
                }
                let sum = if got == expected { checksum(&got) } else { !checksum(&expected) };
                ctx.send_internal(0, ack_tag, &Payload::Bytes(sum.to_le_bytes().to_vec()))?;
                None
            };
            agree(ctx, BenchOp::P2p, verdict)?;
        }
    }
    Ok(records)
}

/// Broadcast from rank 0. Elapsed is the latest completion over all ranks
/// minus the root's start, using wall-clock timestamps gathered afterwards.
pub fn bench_bcast(ctx: &CommContext, spec: &SweepSpec, variant: BcastVariant) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    if ctx.size() < 2 {
        return Err(BenchError::InvalidSpec("broadcast benchmark needs at least 2 ranks".into()));
    }
    let op = BenchOp::for_variant(variant);
    let me = ctx.rank();
    let mut records = Vec::new();
    for &bytes in &spec.sizes {
        for it in 0..spec.warmups + spec.reps {
            let expected = pattern(bytes, it as u64);
            let value = if me == 0 { Payload::Bytes(expected.clone()) } else { Payload::empty() };
            ctx.barrier()?;
            let start = now_ns();
            let got = bcast(ctx, variant, 0, value)?;
            let end = now_ns();
            let mut got = got.into_bytes().unwrap_or_default();
            if spec.inject_corruption == Some(me) {
                damage(&mut got);
            }
            let ok = i64::from(got == expected);
            let stamp = DenseArray::from_vec(vec![2], vec![end, ok]).expect("two stamps");
            let verdict = match gather_tree(ctx, &Payload::I64(stamp))? {
                None => None,
                Some(all) => {
                    let mut latest = end;
                    let mut bad = Vec::new();
                    for (r, p) in all.into_iter().enumerate() {
                        match p {
                            Payload::I64(a) if a.len() == 2 => {
                                latest = latest.max(a.as_slice()[0]);
                                if a.as_slice()[1] != 1 {
                                    bad.push(r);
                                }
                            }
                            _ => bad.push(r),
                        }
                    }
                    if bad.is_empty() {
                        if it >= spec.warmups {
                            let elapsed = (latest - start) as f64 * 1e-9;
                            records.push(BenchRecord::new(ctx, op, bytes, it - spec.warmups, elapsed));
                        }
                        None
                    } else {
                        Some(format!("{bytes}-byte broadcast wrong at ranks {bad:?}"))
                    }
                }
            };
            agree(ctx, op, verdict)?;
        }
    }
    Ok(records)
}

/// Aggregation of a 1-D block-distributed `f64` array holding `msg_bytes` per
/// rank onto rank 0. `msg_bytes` must be a multiple of 8.
pub fn bench_agg(ctx: &CommContext, spec: &SweepSpec) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    if ctx.size() < 2 {
        return Err(BenchError::InvalidSpec("aggregation benchmark needs at least 2 ranks".into()));
    }
    if let Some(s) = spec.sizes.iter().find(|&&s| s % 8 != 0) {
        return Err(BenchError::InvalidSpec(format!("agg message size {s} is not a multiple of 8")));
    }
    let me = ctx.rank();
    let map = DistMap::block(vec![ctx.size()], (0..ctx.size()).collect())?;
    let mut records = Vec::new();
    for &bytes in &spec.sizes {
        let n = (bytes / 8) as usize * ctx.size();
        for it in 0..spec.warmups + spec.reps {
            let seed = bytes ^ ((it as u64) << 40);
            let mut darr = DistArray::<f64>::rand(&[n], map.clone(), me, seed)?;
            if spec.inject_corruption == Some(me) {
                darr.map_owned(|_, v| v + 1.0);
            }
            ctx.barrier()?;
            let start = Instant::now();
            let out = agg(ctx, &darr)?;
            let elapsed = start.elapsed().as_secs_f64();
            let verdict = match out {
                None => None,
                Some(global) => {
                    if global == DenseArray::rand(vec![n], seed) {
                        if it >= spec.warmups {
                            records.push(BenchRecord::new(ctx, BenchOp::Agg, bytes, it - spec.warmups, elapsed));
                        }
                        None
                    } else {
                        Some(format!("aggregated {bytes}-byte blocks differ from the serial array"))
                    }
                }
            };
            agree(ctx, BenchOp::Agg, verdict)?;
        }
    }
    Ok(records)
}

/// `exp(mean(ln x))`.
pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(BenchError::EmptyGroup);
    }
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// One row per distinct `(op, msg_bytes, ranks)`, sorted by that key.
pub fn summarize(records: &[BenchRecord]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(BenchOp, u64, usize), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.op, r.msg_bytes, r.ranks)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((op, msg_bytes, ranks), rs)| {
            let elapsed: Vec<f64> = rs.iter().map(|r| r.elapsed_s).collect();
            let g = geometric_mean(&elapsed)?;
            Ok(SummaryRow {
                op,
                msg_bytes,
                ranks,
                nodes: rs[0].nodes,
                ppn: rs[0].ppn,
                reps: rs.len(),
                elapsed_geomean_s: g,
                bandwidth_bps: op.bytes_moved(msg_bytes, ranks) / g,
            })
        })
        .collect()
}

fn write_csv<S: Serialize>(path: &Path, header: &[&str], rows: &[S]) -> Result<()> {
    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

/// Reads a raw CSV written by [`emit`].
pub fn read_raw_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<Vec<BenchRecord>, _>>().map_err(csv_err)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(path, &SUMMARY_HEADER, rows)
}

/// Files written by [`emit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub raw: PathBuf,
    pub summary: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Writes `<stem>.csv`, `<stem>_summary.csv` and, when asked and there is
/// data, `<stem>.svg` into `dir`.
pub fn emit(records: &[BenchRecord], summaries: &[SummaryRow], dir: &Path, stem: &str, svg: bool) -> Result<Emitted> {
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.to_path_buf(), source })?;
    let raw = dir.join(format!("{stem}.csv"));
    let summary = dir.join(format!("{stem}_summary.csv"));
    write_csv(&raw, &RAW_HEADER, records)?;
    write_summary_csv(&summary, summaries)?;
    let svg = if svg && !summaries.is_empty() {
        let path = dir.join(format!("{stem}.svg"));
        plot_bandwidth(&path, summaries)?;
        Some(path)
    } else {
        None
    };
    Ok(Emitted { raw, summary, svg })
}

/// Log-log plot of bandwidth against message size, one series per
/// `(op, ranks)`.
pub fn plot_bandwidth(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    use plotters::prelude::*;

    let plot_err = |e: &dyn std::fmt::Display| BenchError::Plot(e.to_string());
    let xs = rows.iter().map(|r| r.msg_bytes as f64);
    let ys = rows.iter().map(|r| r.bandwidth_bps.max(1e-3));
    let (xmin, xmax) = xs.fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (ymin, ymax) = ys.fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));

    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((xmin / 2.0..xmax * 2.0).log_scale(), (ymin / 2.0..ymax * 2.0).log_scale())
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("message bytes")
        .y_desc("bandwidth (B/s)")
        .draw()
        .map_err(|e| plot_err(&e))?;

    let mut series: BTreeMap<(BenchOp, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry((r.op, r.ranks)).or_default().push((r.msg_bytes as f64, r.bandwidth_bps.max(1e-3)));
    }
    for (i, ((op, ranks), mut pts)) in series.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(|e| plot_err(&e))?
            .label(format!("{op} ({ranks} ranks)"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| plot_err(&e))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(op: BenchOp, msg_bytes: u64, rep: usize, elapsed_s: f64) -> BenchRecord {
        BenchRecord {
            op,
            msg_bytes,
            ranks: 2,
            nodes: 1,
            ppn: 2,
            rep,
            elapsed_s,
            bandwidth_bps: op.bytes_moved(msg_bytes, 2) / elapsed_s,
        }
    }

    #[test]
    fn geometric_means() {
        assert_eq!(geometric_mean(&[1.0; 5]).unwrap(), 1.0);
        assert!((geometric_mean(&[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((geometric_mean(&[2.0, 8.0, 4.0]).unwrap() - 64f64.cbrt()).abs() < 1e-12);
        assert!(matches!(geometric_mean(&[]), Err(BenchError::EmptyGroup)));
    }

    #[test]
    fn summary_groups() {
        let records = vec![
            rec(BenchOp::P2p, 16, 0, 1.0),
            rec(BenchOp::P2p, 16, 1, 4.0),
            rec(BenchOp::P2p, 64, 0, 2.0),
            rec(BenchOp::Agg, 16, 0, 2.0),
        ];
        let rows = summarize(&records).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].op, rows[0].msg_bytes, rows[0].reps), (BenchOp::P2p, 16, 2));
        assert!((rows[0].elapsed_geomean_s - 2.0).abs() < 1e-12);
        assert!((rows[0].bandwidth_bps - 8.0).abs() < 1e-9);
        // agg counts every rank's block
        assert!((rows[2].bandwidth_bps - 16.0).abs() < 1e-9);
    }

    #[test]
    fn csv_output_and_resummary() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<BenchRecord> = (0..5).map(|i| rec(BenchOp::BcastTree, 8, i, 0.1 * (i + 1) as f64 / 3.0)).collect();
        let rows = summarize(&records).unwrap();
        let out = emit(&records, &rows, dir.path(), "bcast-tree", true).unwrap();
        let text = std::fs::read_to_string(&out.raw).unwrap();
        assert_eq!(text.lines().next().unwrap(), RAW_HEADER.join(","));
        assert_eq!(text.lines().count(), 6);
        let summary_text = std::fs::read_to_string(&out.summary).unwrap();
        assert_eq!(summary_text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
        assert!(out.svg.unwrap().exists());

        let again = read_raw_csv(&out.raw).unwrap();
        assert_eq!(again, records);
        let p = dir.path().join("re.csv");
        write_summary_csv(&p, &summarize(&again).unwrap()).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&out.summary).unwrap());
    }

    #[test]
    fn empty_output_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = emit(&[], &[], dir.path(), "p2p", true).unwrap();
        assert_eq!(std::fs::read_to_string(&out.raw).unwrap().trim_end(), RAW_HEADER.join(","));
        assert!(out.svg.is_none());
        assert!(!dir.path().join("p2p.svg").exists());
    }

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("16,1K,8M,1G").unwrap(), vec![16, 1024, 8 << 20, 1 << 30]);
        assert!(parse_sizes("12Q").is_err());
        assert_eq!(default_p2p_sizes(16 << 20).first(), Some(&16));
        assert_eq!(default_p2p_sizes(16 << 20).last(), Some(&(16 << 20)));
        assert_eq!(default_p2p_sizes(16 << 20).len(), 11);
        assert_eq!(default_p2p_sizes(1 << 30).last(), Some(&(1 << 30)));
    }

    #[test]
    fn op_names_round_trip() {
        for op in [BenchOp::P2p, BenchOp::BcastSerial, BenchOp::BcastNodeSerial, BenchOp::BcastTree, BenchOp::Agg] {
            assert_eq!(op.name().parse::<BenchOp>().unwrap(), op);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(vec![]).validate().is_err());
        assert!(SweepSpec::new(vec![0]).validate().is_err());
        assert!(SweepSpec::new(vec![8]).with_reps(0, 1).validate().is_err());
        assert!(SweepSpec::new(vec![8]).validate().is_ok());
    }
}
