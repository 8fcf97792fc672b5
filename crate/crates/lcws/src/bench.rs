//! Message-size sweep comparing sequential and pipelined totals on both
//! sides of the link.

use std::io::{self, Write};
use std::time::Duration;

use lcws_core::pipeline::ScheduleResult;
use lcws_core::policy::{AccessTree, AttributeSet};
use lcws_core::scheme::{keygen, setup, AttributePoints, EncryptionContext};
use lcws_core::synth::layered;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::executor::{encrypt_and_send, receive_and_decrypt, LinkModel, Mode, RunReport, StageFailure};
use crate::wire::MessageId;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Message sizes in bytes, strictly increasing.
    pub sizes: Vec<usize>,
    /// Tree shape, see [`layered`].
    pub levels: u32,
    pub leaves: u32,
    pub link: LinkModel,
    /// Repetitions per size; rows report medians.
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("message sizes must be nonzero and strictly increasing")]
    Sizes,
    #[error("no tree with {levels} levels and {leaves} leaves")]
    Shape { levels: u32, leaves: u32 },
    #[error("runs must be at least 1")]
    Runs,
    #[error(transparent)]
    Stage(#[from] StageFailure),
    #[error("decryption did not return the message")]
    RoundTrip,
}

/// Totals for one side at one size, medians over the runs, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideTotals {
    pub sequential: f64,
    pub pipelined: f64,
    /// Median of the per-run differences `sequential − pipelined`.
    pub delta: f64,
    /// Pipelined total predicted by the recurrence from the measured stage
    /// durations of the overlapped runs (median).
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub blocks: u32,
    pub enc: SideTotals,
    pub dec: SideTotals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Every run of one size, kept for inspection.
#[derive(Debug, Clone)]
pub struct SizeRuns {
    pub size: usize,
    pub enc_serial: Vec<RunReport>,
    pub enc_overlap: Vec<RunReport>,
    pub dec_serial: Vec<RunReport>,
    pub dec_overlap: Vec<RunReport>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn totals(serial: &[RunReport], overlap: &[RunReport]) -> SideTotals {
    let secs = |d: Duration| d.as_secs_f64();
    SideTotals {
        sequential: median(serial.iter().map(|r| secs(r.wall)).collect()),
        pipelined: median(overlap.iter().map(|r| secs(r.wall)).collect()),
        delta: median(serial.iter().zip(overlap).map(|(s, o)| secs(s.wall) - secs(o.wall)).collect()),
        predicted: median(
            overlap
                .iter()
                .map(|r| {
                    let side = r.schedule.side;
                    secs(lcws_core::pipeline::pipelined_total(&r.times, side).total_pipelined)
                })
                .collect(),
        ),
    }
}

/// Runs the sweep. `progress` is called after each size.
pub fn run_sweep(cfg: &BenchConfig, progress: &mut dyn FnMut(&BenchRow)) -> Result<(BenchReport, Vec<SizeRuns>), BenchError> {
    if cfg.sizes.is_empty() || cfg.sizes[0] == 0 || cfg.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Sizes);
    }
    if cfg.runs == 0 {
        return Err(BenchError::Runs);
    }
    let shape = BenchError::Shape {
        levels: cfg.levels,
        leaves: cfg.leaves,
    };
    let expr = layered(cfg.levels, cfg.leaves).ok_or(shape)?;
    let tree = AccessTree::from_expr(&expr).expect("synthetic policies are valid");
    let n = tree.depth();
    let points = AttributePoints::for_tree(&tree);

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let (pk, mk) = setup(&mut rng);
    let ctx = EncryptionContext::from_master(&mk);
    let attrs = AttributeSet::new(tree.nodes().iter().filter_map(|n| n.attribute()));
    let sk = keygen(&pk, &mk, &attrs, &mut rng).expect("tree has leaves");

    let mut all: Vec<SizeRuns> = cfg
        .sizes
        .iter()
        .map(|&size| SizeRuns {
            size,
            enc_serial: Vec::new(),
            enc_overlap: Vec::new(),
            dec_serial: Vec::new(),
            dec_overlap: Vec::new(),
        })
        .collect();
    // Within a round every size runs once per mode, one mode after another,
    // so runs compared across sizes sit close together in time.
    for _ in 0..cfg.runs {
        let mut round = Vec::with_capacity(all.len());
        for runs in &all {
            let mut message = vec![0u8; runs.size];
            rng.fill_bytes(&mut message);
            round.push((message, MessageId::random(&mut rng), Vec::<Vec<u8>>::new()));
        }
        for mode in [Mode::Serial, Mode::Overlap] {
            for (runs, (message, id, blocks)) in all.iter_mut().zip(&mut round) {
                blocks.clear();
                let mut sink = |_: u32, b: Vec<u8>| {
                    blocks.push(b);
                    Ok(())
                };
                let r = encrypt_and_send(&pk, &ctx, &tree, &points, message, *id, &cfg.link, mode, &mut rng, &mut sink)?;
                match mode {
                    Mode::Serial => runs.enc_serial.push(r),
                    Mode::Overlap => runs.enc_overlap.push(r),
                }
            }
        }
        for mode in [Mode::Serial, Mode::Overlap] {
            for (runs, (message, _, blocks)) in all.iter_mut().zip(&round) {
                let mut source = |i: u32| Ok(blocks[i as usize - 1].clone());
                let (r, out) = receive_and_decrypt(&sk, n, &cfg.link, mode, &mut source)?;
                if out.as_deref() != Some(&message[..]) {
                    return Err(BenchError::RoundTrip);
                }
                match mode {
                    Mode::Serial => runs.dec_serial.push(r),
                    Mode::Overlap => runs.dec_overlap.push(r),
                }
            }
        }
    }
    let rows: Vec<BenchRow> = all
        .iter()
        .map(|runs| BenchRow {
            size: runs.size,
            blocks: n,
            enc: totals(&runs.enc_serial, &runs.enc_overlap),
            dec: totals(&runs.dec_serial, &runs.dec_overlap),
        })
        .collect();
    for row in &rows {
        progress(row);
    }
    Ok((BenchReport { rows }, all))
}

const REPORT_COLUMNS: [&str; 10] = [
    "size_bytes",
    "blocks",
    "enc_sequential_s",
    "enc_pipelined_s",
    "enc_delta_s",
    "enc_predicted_s",
    "dec_sequential_s",
    "dec_pipelined_s",
    "dec_delta_s",
    "dec_predicted_s",
];

fn report_fields(r: &BenchRow) -> [String; 10] {
    let f = |x: f64| format!("{x:.6}");
    [
        r.size.to_string(),
        r.blocks.to_string(),
        f(r.enc.sequential),
        f(r.enc.pipelined),
        f(r.enc.delta),
        f(r.enc.predicted),
        f(r.dec.sequential),
        f(r.dec.pipelined),
        f(r.dec.delta),
        f(r.dec.predicted),
    ]
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record(report_fields(r))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated columns with a `#` header line, for gnuplot.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {}", REPORT_COLUMNS.join(" "))?;
        for r in &self.rows {
            writeln!(out, "{}", report_fields(r).join(" "))?;
        }
        Ok(())
    }
}

/// Writes a schedule as CSV; instants in seconds, empty for absent stages.
pub fn write_schedule_csv<W: Write>(schedule: &ScheduleResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "enc_start", "enc_end", "tx_start", "tx_end", "dec_start", "dec_end"])?;
    let pair = |s: Option<lcws_core::pipeline::Span>| match s {
        Some(s) => [
            format!("{:.9}", s.start.as_secs_f64()),
            format!("{:.9}", s.end.as_secs_f64()),
        ],
        None => [String::new(), String::new()],
    };
    for b in &schedule.blocks {
        let [es, ee] = pair(b.encrypt);
        let [ts, te] = pair(b.transmit);
        let [ds, de] = pair(b.decrypt);
        w.write_record([b.block.to_string(), es, ee, ts, te, ds, de])?;
    }
    w.flush()?;
    Ok(())
}
