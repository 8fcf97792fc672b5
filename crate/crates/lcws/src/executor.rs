//! Runs the real encrypt, transmit and decrypt stages as a two-stage
//! pipeline over a simulated link, measuring every stage.
//!
//! Overlap mode runs the first stage on its own thread and hands finished
//! blocks to the second through a bounded FIFO. Serial mode finishes the
//! first stage for every block before the second stage starts, which is the
//! sequential baseline.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use lcws_core::pipeline::{sequential_total, BlockSpans, ScheduleResult, Side, Span, StageTimes};
use lcws_core::policy::AccessTree;
use lcws_core::scheme::{AttributePoints, DecryptionState, EncryptionContext, Encryptor, PublicKey, SecretKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::wire::{MessageId, WireCtb};

/// Linear link: `TT = latency + bytes / bandwidth`, optionally plus a
/// seeded jitter of up to a tenth of the latency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    bandwidth: f64,
    latency: Duration,
    jitter_seed: Option<u64>,
}

impl LinkModel {
    /// `bandwidth` in bytes per second. `None` unless it is positive and finite.
    pub fn new(bandwidth: f64, latency: Duration) -> Option<Self> {
        (bandwidth.is_finite() && bandwidth > 0.0).then_some(LinkModel {
            bandwidth,
            latency,
            jitter_seed: None,
        })
    }

    /// A link that transmits instantly.
    pub fn unthrottled() -> Self {
        LinkModel {
            bandwidth: f64::INFINITY,
            latency: Duration::ZERO,
            jitter_seed: None,
        }
    }

    pub fn with_jitter(mut self, seed: u64) -> Self {
        self.jitter_seed = Some(seed);
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn latency(&self) -> Duration {
        self.latency
    }

    /// Transmission time for block `index` of `bytes` bytes.
    pub fn transmit_time(&self, index: u32, bytes: usize) -> Duration {
        let base = self.latency + Duration::from_secs_f64(bytes as f64 / self.bandwidth);
        match self.jitter_seed {
            None => base,
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(index).rotate_left(32));
                base + self.latency.mul_f64(rng.gen_range(0.0..0.1))
            }
        }
    }

    fn transmit(&self, index: u32, bytes: usize) {
        let t = self.transmit_time(index, bytes);
        if !t.is_zero() {
            thread::sleep(t);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Serial,
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encrypt,
    Transmit,
    Decrypt,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage:?} stage failed on block {block}: {message}")]
pub struct StageFailure {
    pub block: u32,
    pub stage: Stage,
    pub message: String,
}

/// Measured outcome of one run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    /// Measured per-block stage durations.
    pub times: StageTimes,
    /// Measured spans. `total_sequential` is the sum of measured stage
    /// durations, `total_pipelined` the wall-clock time of the run.
    pub schedule: ScheduleResult,
    pub wall: Duration,
}

type StageFn<'a, T> = dyn FnMut(u32) -> Result<T, String> + Send + 'a;

/// Runs `first` then `second` for blocks `1..=n`. Returns the spans of both
/// stages relative to the start of the run, and the wall time.
fn run_two_stage<T: Send>(
    n: u32,
    mode: Mode,
    stages: (Stage, Stage),
    first: &mut StageFn<'_, T>,
    second: &mut dyn FnMut(u32, T) -> Result<(), String>,
) -> Result<(Vec<(Span, Span)>, Duration), StageFailure> {
    let t0 = Instant::now();
    let since = |t: Instant| t.duration_since(t0);
    let fail = |block: u32, stage: Stage| move |message: String| StageFailure { block, stage, message };

    let mut spans = Vec::with_capacity(n as usize);
    match mode {
        Mode::Serial => {
            let mut done = Vec::with_capacity(n as usize);
            for i in 1..=n {
                let start = since(Instant::now());
                let item = first(i).map_err(fail(i, stages.0))?;
                done.push((item, Span { start, end: since(Instant::now()) }));
            }
            for (i, (item, s1)) in (1..=n).zip(done) {
                let start = since(Instant::now());
                second(i, item).map_err(fail(i, stages.1))?;
                spans.push((s1, Span { start, end: since(Instant::now()) }));
            }
        }
        Mode::Overlap => {
            let (tx, rx) = mpsc::sync_channel::<Result<(T, Span), StageFailure>>(n.max(1) as usize);
            thread::scope(|scope| -> Result<(), StageFailure> {
                scope.spawn(move || {
                    for i in 1..=n {
                        let start = since(Instant::now());
                        let out = first(i)
                            .map(|item| (item, Span { start, end: since(Instant::now()) }))
                            .map_err(fail(i, stages.0));
                        let failed = out.is_err();
                        if tx.send(out).is_err() || failed {
                            return;
                        }
                    }
                });
                for i in 1..=n {
                    let (item, s1) = rx
                        .recv()
                        .map_err(|_| fail(i, stages.0)(String::from("stage exited early")))??;
                    let start = since(Instant::now());
                    second(i, item).map_err(fail(i, stages.1))?;
                    spans.push((s1, Span { start, end: since(Instant::now()) }));
                }
                Ok(())
            })?;
        }
    }
    Ok((spans, since(Instant::now())))
}

fn report(mode: Mode, side: Side, spans: &[(Span, Span)], wall: Duration) -> RunReport {
    let firsts: Vec<Duration> = spans.iter().map(|(a, _)| a.len()).collect();
    let seconds: Vec<Duration> = spans.iter().map(|(_, b)| b.len()).collect();
    let zeros = vec![Duration::ZERO; spans.len()];
    let times = match side {
        Side::EncryptTransmit => StageTimes::new(firsts, seconds, zeros),
        Side::TransmitDecrypt => StageTimes::new(zeros, firsts, seconds),
    }
    .expect("equal lengths");
    let blocks = spans
        .iter()
        .enumerate()
        .map(|(i, (a, b))| match side {
            Side::EncryptTransmit => BlockSpans {
                block: i as u32 + 1,
                encrypt: Some(*a),
                transmit: Some(*b),
                decrypt: None,
            },
            Side::TransmitDecrypt => BlockSpans {
                block: i as u32 + 1,
                encrypt: None,
                transmit: Some(*a),
                decrypt: Some(*b),
            },
        })
        .collect();
    let schedule = ScheduleResult::new(side, blocks, sequential_total(&times, side), wall);
    RunReport {
        mode,
        times,
        schedule,
        wall,
    }
}

/// Encrypts `message` level by level and ships each serialized block over
/// `link` to `sink`. Block 1's encryption stage includes computing the
/// commitment and partitioning the message. `points` should cover the
/// attributes of `tree`; missing ones are hashed inside the encrypt stage.
#[allow(clippy::too_many_arguments)]
pub fn encrypt_and_send<R: RngCore + CryptoRng + Send>(
    pk: &PublicKey,
    ctx: &EncryptionContext,
    tree: &AccessTree,
    points: &AttributePoints,
    message: &[u8],
    id: MessageId,
    link: &LinkModel,
    mode: Mode,
    rng: &mut R,
    sink: &mut dyn FnMut(u32, Vec<u8>) -> Result<(), String>,
) -> Result<RunReport, StageFailure> {
    let n = tree.depth();
    let mut encryptor: Option<Encryptor<'_>> = None;
    let mut first = |i: u32| -> Result<Vec<u8>, String> {
        if encryptor.is_none() {
            encryptor = Some(Encryptor::with_points(pk, ctx, tree, points, message, rng).map_err(|e| e.to_string())?);
        }
        let enc = encryptor.as_mut().unwrap();
        let block = enc
            .encrypt_next(rng)
            .ok_or_else(|| String::from("no block left to encrypt"))?
            .map_err(|e| e.to_string())?;
        debug_assert_eq!(block.index, i);
        Ok(WireCtb { message: id, block }.to_bytes())
    };
    let mut second = |i: u32, bytes: Vec<u8>| -> Result<(), String> {
        link.transmit(i, bytes.len());
        sink(i, bytes)
    };
    let (spans, wall) = run_two_stage(n, mode, (Stage::Encrypt, Stage::Transmit), &mut first, &mut second)?;
    Ok(report(mode, Side::EncryptTransmit, &spans, wall))
}

/// Downloads `n` blocks through `source` over `link` and feeds them to a
/// decryption state. Returns the run and the assembled message, `None` when
/// the key does not satisfy the policy.
pub fn receive_and_decrypt(
    sk: &SecretKey,
    n: u32,
    link: &LinkModel,
    mode: Mode,
    source: &mut (dyn FnMut(u32) -> Result<Vec<u8>, String> + Send),
) -> Result<(RunReport, Option<Vec<u8>>), StageFailure> {
    let mut first = |i: u32| -> Result<Vec<u8>, String> {
        let bytes = source(i)?;
        link.transmit(i, bytes.len());
        Ok(bytes)
    };
    let mut state = DecryptionState::new(sk);
    let mut second = |i: u32, bytes: Vec<u8>| -> Result<(), String> {
        let ctb = WireCtb::from_bytes(&bytes).map_err(|e| e.to_string())?;
        if ctb.block.index != i || ctb.block.block_count != n {
            return Err(format!(
                "expected block {i} of {n}, got block {} of {}",
                ctb.block.index, ctb.block.block_count
            ));
        }
        state.receive(ctb.block).map_err(|e| e.to_string())
    };
    let (spans, wall) = run_two_stage(n, mode, (Stage::Transmit, Stage::Decrypt), &mut first, &mut second)?;
    let message = state.assemble();
    Ok((report(mode, Side::TransmitDecrypt, &spans, wall), message))
}
