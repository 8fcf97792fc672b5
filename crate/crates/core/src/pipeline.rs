//! Latency model for overlapping per-block computation with transmission.
//!
//! One compute worker and one FIFO link. On the sending side block `i`
//! leaves the encryptor at `E_i = E_{i-1} + ET_i` and finishes transmission
//! at `X_i = max(X_{i-1}, E_i) + TT_i`. On the receiving side it arrives at
//! `A_i = A_{i-1} + TT_i` and is decrypted by `D_i = max(D_{i-1}, A_i) + DT_i`.
//! The sequential baseline runs each stage over the whole file back to back.
//!
//! Durations are [`Duration`]s so that sums and maxima are exact.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineError {
    LengthMismatch { encrypt: usize, transmit: usize, decrypt: usize },
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::LengthMismatch {
                encrypt,
                transmit,
                decrypt,
            } => write!(
                f,
                "stage lists differ in length: encrypt {encrypt}, transmit {transmit}, decrypt {decrypt}"
            ),
        }
    }
}

impl core::error::Error for PipelineError {}

/// Per-block stage durations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StageTimes {
    encrypt: Vec<Duration>,
    transmit: Vec<Duration>,
    decrypt: Vec<Duration>,
}

impl StageTimes {
    pub fn new(
        encrypt: Vec<Duration>,
        transmit: Vec<Duration>,
        decrypt: Vec<Duration>,
    ) -> Result<Self, PipelineError> {
        if encrypt.len() != transmit.len() || decrypt.len() != transmit.len() {
            return Err(PipelineError::LengthMismatch {
                encrypt: encrypt.len(),
                transmit: transmit.len(),
                decrypt: decrypt.len(),
            });
        }
        Ok(StageTimes {
            encrypt,
            transmit,
            decrypt,
        })
    }

    pub fn uniform(n: usize, et: Duration, tt: Duration, dt: Duration) -> Self {
        StageTimes {
            encrypt: alloc::vec![et; n],
            transmit: alloc::vec![tt; n],
            decrypt: alloc::vec![dt; n],
        }
    }

    pub fn block_count(&self) -> usize {
        self.transmit.len()
    }

    pub fn encrypt(&self) -> &[Duration] {
        &self.encrypt
    }

    pub fn transmit(&self) -> &[Duration] {
        &self.transmit
    }

    pub fn decrypt(&self) -> &[Duration] {
        &self.decrypt
    }

    /// `ET_M`
    pub fn encrypt_total(&self) -> Duration {
        self.encrypt.iter().sum()
    }

    /// `TT_M`
    pub fn transmit_total(&self) -> Duration {
        self.transmit.iter().sum()
    }

    /// `DT_M`
    pub fn decrypt_total(&self) -> Duration {
        self.decrypt.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Data owner: encrypt, then transmit.
    EncryptTransmit,
    /// Data receiver: transmit (arrive), then decrypt.
    TransmitDecrypt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: Duration,
    pub end: Duration,
}

impl Span {
    pub fn len(&self) -> Duration {
        self.end.saturating_sub(self.start)
    }
}

/// Stage spans of one block. Stages not part of the schedule are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockSpans {
    pub block: u32,
    pub encrypt: Option<Span>,
    pub transmit: Option<Span>,
    pub decrypt: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleResult {
    pub side: Side,
    pub blocks: Vec<BlockSpans>,
    pub total_sequential: Duration,
    pub total_pipelined: Duration,
    /// `total_sequential − total_pipelined`
    pub delta_t: Duration,
}

impl ScheduleResult {
    pub fn new(side: Side, blocks: Vec<BlockSpans>, total_sequential: Duration, total_pipelined: Duration) -> Self {
        ScheduleResult {
            side,
            blocks,
            total_sequential,
            total_pipelined,
            delta_t: total_sequential.saturating_sub(total_pipelined),
        }
    }
}

/// `ET_M + TT_M`
pub fn sequential_total_enc(times: &StageTimes) -> Duration {
    times.encrypt_total() + times.transmit_total()
}

/// `TT_M + DT_M`
pub fn sequential_total_dec(times: &StageTimes) -> Duration {
    times.transmit_total() + times.decrypt_total()
}

pub fn sequential_total(times: &StageTimes, side: Side) -> Duration {
    match side {
        Side::EncryptTransmit => sequential_total_enc(times),
        Side::TransmitDecrypt => sequential_total_dec(times),
    }
}

/// Two-stage pipeline where stage one feeds stage two in FIFO order.
fn two_stage(first: &[Duration], second: &[Duration]) -> Vec<(Span, Span)> {
    let mut out = Vec::with_capacity(first.len());
    let mut first_end = Duration::ZERO;
    let mut second_end = Duration::ZERO;
    for (a, b) in first.iter().zip(second) {
        let s1 = Span {
            start: first_end,
            end: first_end + *a,
        };
        first_end = s1.end;
        let start = second_end.max(first_end);
        let s2 = Span { start, end: start + *b };
        second_end = s2.end;
        out.push((s1, s2));
    }
    out
}

pub fn pipelined_total_enc(times: &StageTimes) -> ScheduleResult {
    let spans = two_stage(&times.encrypt, &times.transmit);
    let total = spans.last().map(|(_, x)| x.end).unwrap_or_default();
    let blocks = spans
        .into_iter()
        .enumerate()
        .map(|(i, (e, x))| BlockSpans {
            block: i as u32 + 1,
            encrypt: Some(e),
            transmit: Some(x),
            decrypt: None,
        })
        .collect();
    ScheduleResult::new(Side::EncryptTransmit, blocks, sequential_total_enc(times), total)
}

pub fn pipelined_total_dec(times: &StageTimes) -> ScheduleResult {
    let spans = two_stage(&times.transmit, &times.decrypt);
    let total = spans.last().map(|(_, d)| d.end).unwrap_or_default();
    let blocks = spans
        .into_iter()
        .enumerate()
        .map(|(i, (x, d))| BlockSpans {
            block: i as u32 + 1,
            encrypt: None,
            transmit: Some(x),
            decrypt: Some(d),
        })
        .collect();
    ScheduleResult::new(Side::TransmitDecrypt, blocks, sequential_total_dec(times), total)
}

pub fn pipelined_total(times: &StageTimes, side: Side) -> ScheduleResult {
    match side {
        Side::EncryptTransmit => pipelined_total_enc(times),
        Side::TransmitDecrypt => pipelined_total_dec(times),
    }
}

pub fn delta_t(times: &StageTimes, side: Side) -> Duration {
    pipelined_total(times, side).delta_t
}

/// Closed-form totals for uniform per-block durations.
pub mod closed_form {
    use super::*;

    fn first(v: &[Duration]) -> Duration {
        v.first().copied().unwrap_or_default()
    }

    fn last(v: &[Duration]) -> Duration {
        v.last().copied().unwrap_or_default()
    }

    /// `ET_1 + TT_M` when transmission dominates, else `ET_M + TT_n`.
    pub fn pipelined_enc(times: &StageTimes) -> Duration {
        if first(&times.transmit) >= first(&times.encrypt) {
            first(&times.encrypt) + times.transmit_total()
        } else {
            times.encrypt_total() + last(&times.transmit)
        }
    }

    /// `TT_M + DT_n` when transmission dominates, else `TT_1 + DT_M`.
    pub fn pipelined_dec(times: &StageTimes) -> Duration {
        if first(&times.transmit) >= first(&times.decrypt) {
            times.transmit_total() + last(&times.decrypt)
        } else {
            first(&times.transmit) + times.decrypt_total()
        }
    }

    /// `ET_M − ET_1` or `TT_M − TT_n`.
    pub fn delta_enc(times: &StageTimes) -> Duration {
        if first(&times.transmit) >= first(&times.encrypt) {
            times.encrypt_total() - first(&times.encrypt)
        } else {
            times.transmit_total() - last(&times.transmit)
        }
    }

    /// `DT_M − DT_n` or `TT_M − TT_1`.
    pub fn delta_dec(times: &StageTimes) -> Duration {
        if first(&times.transmit) >= first(&times.decrypt) {
            times.decrypt_total() - last(&times.decrypt)
        } else {
            times.transmit_total() - first(&times.transmit)
        }
    }
}

/// Event-driven simulation of the same two-stage topology. Independent of
/// the recurrence; used to cross-check it.
pub fn simulate(times: &StageTimes, side: Side) -> ScheduleResult {
    let (first, second) = match side {
        Side::EncryptTransmit => (&times.encrypt, &times.transmit),
        Side::TransmitDecrypt => (&times.transmit, &times.decrypt),
    };
    let n = first.len();

    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Event {
        // ordering puts completions of stage two before stage one at equal times
        SecondDone(usize),
        FirstDone(usize),
    }

    let mut spans = alloc::vec![(Span::default(), Span::default()); n];
    let mut queue: BinaryHeap<Reverse<(Duration, Event)>> = BinaryHeap::new();
    let mut ready: alloc::collections::VecDeque<usize> = alloc::collections::VecDeque::new();
    let mut second_busy = false;
    let mut next_first = 0usize;
    let mut end = Duration::ZERO;

    if n > 0 {
        spans[0].0.start = Duration::ZERO;
        queue.push(Reverse((first[0], Event::FirstDone(0))));
        next_first = 1;
    }
    while let Some(Reverse((now, ev))) = queue.pop() {
        end = end.max(now);
        match ev {
            Event::FirstDone(i) => {
                spans[i].0.end = now;
                ready.push_back(i);
                if next_first < n {
                    spans[next_first].0.start = now;
                    queue.push(Reverse((now + first[next_first], Event::FirstDone(next_first))));
                    next_first += 1;
                }
            }
            Event::SecondDone(i) => {
                spans[i].1.end = now;
                second_busy = false;
            }
        }
        if !second_busy {
            if let Some(j) = ready.pop_front() {
                second_busy = true;
                spans[j].1.start = now;
                queue.push(Reverse((now + second[j], Event::SecondDone(j))));
            }
        }
    }

    let blocks = spans
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let mut s = BlockSpans {
                block: i as u32 + 1,
                ..Default::default()
            };
            match side {
                Side::EncryptTransmit => {
                    s.encrypt = Some(a);
                    s.transmit = Some(b);
                }
                Side::TransmitDecrypt => {
                    s.transmit = Some(a);
                    s.decrypt = Some(b);
                }
            }
            s
        })
        .collect();
    ScheduleResult::new(side, blocks, sequential_total(times, side), end)
}
