//! Die-to-die chip bridge.
//!
//! TX: 16 LVDS data lanes at 2 Gbit/s plus a 2-bit stream address, valid and
//! ready. One beat moves 16 bits, so a 32-bit word takes two beats (low half
//! first). At twice the 1 GHz NoC clock this matches the NoC's one word per
//! cycle exactly.
//!
//! RX: 8 TTL data lines at 100 Mbit/s plus a 1-bit address. One byte per
//! 10 ns, i.e. one byte every 20 beats; four bytes (low first) form a word.
//!
//! A bridge is also the NoC's monitor tap: every delivered packet is pushed
//! to TX, on the data stream if it was addressed to the bridge endpoint and
//! on the monitor stream otherwise.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noc::{NoCPacket, NodeId, TapSink};
use crate::seed;

pub const TX_LANES: u32 = 16;
pub const TX_LANE_BPS: f64 = 2e9;
pub const RX_LANES: u32 = 8;
pub const RX_LANE_BPS: f64 = 1e8;
pub const BEAT_HZ: u64 = 2_000_000_000;
pub const STREAMS: usize = 4;

pub const STREAM_MONITOR: u8 = 0;
pub const STREAM_DATA: u8 = 1;
pub const STREAM_CONTROL: u8 = 2;
pub const STREAM_DEBUG: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("bridge already connected to a peer")]
    AlreadyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxBeat {
    pub data: u16,
    pub addr: u8,
    pub valid: bool,
    pub cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxBeat {
    pub data: u8,
    pub addr: u8,
    pub valid: bool,
}

fn default_fifo() -> usize {
    16
}
fn default_rx_queue() -> usize {
    16
}
fn default_beats_per_byte() -> u64 {
    20
}
fn default_monitor_stream() -> u8 {
    STREAM_MONITOR
}
fn default_data_stream() -> u8 {
    STREAM_DATA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// TX FIFO capacity in beats.
    #[serde(default = "default_fifo")]
    pub tx_fifo_depth: usize,
    /// Inbound word queue capacity (words heading into the NoC).
    #[serde(default = "default_rx_queue")]
    pub rx_queue_words: usize,
    /// TTL RX pacing: 8 lines x 100 Mbit/s is one byte per 20 beats.
    #[serde(default = "default_beats_per_byte")]
    pub beats_per_rx_byte: u64,
    #[serde(default = "default_monitor_stream")]
    pub monitor_stream: u8,
    #[serde(default = "default_data_stream")]
    pub data_stream: u8,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            tx_fifo_depth: default_fifo(),
            rx_queue_words: default_rx_queue(),
            beats_per_rx_byte: default_beats_per_byte(),
            monitor_stream: default_monitor_stream(),
            data_stream: default_data_stream(),
        }
    }
}

pub fn split_word(word: u32) -> [u16; 2] {
    [word as u16, (word >> 16) as u16]
}

pub fn join_halves(lo: u16, hi: u16) -> u32 {
    u32::from(lo) | u32::from(hi) << 16
}

/// Far end of the TX lanes.
pub trait BeatSink {
    /// Level of the ready line on this beat.
    fn ready(&mut self, beat: u64) -> bool;
    /// Called only on beats where `ready` returned true.
    fn accept(&mut self, beat: TxBeat);
}

/// Rebuilds words from beat pairs, per stream address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reassembler {
    low: [Option<u16>; STREAMS],
}

impl Reassembler {
    pub fn push(&mut self, beat: &TxBeat) -> Option<(u8, u32)> {
        let slot = &mut self.low[usize::from(beat.addr) % STREAMS];
        match slot.take() {
            None => {
                *slot = Some(beat.data);
                None
            }
            Some(lo) => Some((beat.addr, join_halves(lo, beat.data))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReadyPattern {
    Always,
    Never,
    /// Ready on `num` out of every `den` beats.
    Ratio {
        num: u64,
        den: u64,
    },
    /// Ready with probability `p`, drawn independently per beat.
    Random {
        p: f64,
        seed: u64,
    },
}

impl ReadyPattern {
    pub fn level(&self, beat: u64) -> bool {
        match *self {
            Self::Always => true,
            Self::Never => false,
            Self::Ratio { num, den } => den > 0 && beat % den < num,
            Self::Random { p, seed } => {
                let r = seed::derive(&[seed, beat]);
                ((r >> 11) as f64 / (1u64 << 53) as f64) < p
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub beat: u64,
    pub stream: u8,
    pub word: u32,
}

/// External receiver on the TX lanes, capturing reassembled words.
#[derive(Debug, Clone)]
pub struct MonitorReceiver {
    pub pattern: ReadyPattern,
    reasm: Reassembler,
    pub captured: Vec<MonitorRecord>,
    pub beats_accepted: u64,
}

impl MonitorReceiver {
    pub fn new(pattern: ReadyPattern) -> Self {
        Self {
            pattern,
            reasm: Reassembler::default(),
            captured: Vec::new(),
            beats_accepted: 0,
        }
    }

    /// Captured words of one stream, in order.
    pub fn stream(&self, stream: u8) -> Vec<u32> {
        self.captured
            .iter()
            .filter(|r| r.stream == stream)
            .map(|r| r.word)
            .collect()
    }
}

impl BeatSink for MonitorReceiver {
    fn ready(&mut self, beat: u64) -> bool {
        self.pattern.level(beat)
    }

    fn accept(&mut self, beat: TxBeat) {
        self.beats_accepted += 1;
        if let Some((stream, word)) = self.reasm.push(&beat) {
            self.captured.push(MonitorRecord {
                beat: beat.cycle,
                stream,
                word,
            });
        }
    }
}

impl BeatSink for ReadyPattern {
    fn ready(&mut self, beat: u64) -> bool {
        self.level(beat)
    }

    fn accept(&mut self, _: TxBeat) {}
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeStats {
    pub tx_words: u64,
    pub tx_refused: u64,
    pub beats: u64,
    pub beats_transferred: u64,
    /// Beats with valid high but ready low.
    pub stall_beats: u64,
    pub monitor_words: u64,
    pub monitor_drops: u64,
    pub rx_bytes: u64,
    pub rx_refused: u64,
    pub inbound_words: u64,
}

#[derive(Debug, Clone)]
pub struct ChipBridge {
    config: BridgeConfig,
    /// Node of the bridge endpoint on the NoC; packets addressed here leave
    /// on the data stream.
    endpoint: Option<NodeId>,
    monitor_enabled: bool,
    fifo: VecDeque<TxBeat>,
    beat: u64,
    peer_reasm: Reassembler,
    rx_bytes: [Vec<u8>; 2],
    next_rx_beat: u64,
    inbound: VecDeque<(u8, u32)>,
    connected: bool,
    stats: BridgeStats,
}

impl ChipBridge {
    pub fn new(config: BridgeConfig, endpoint: Option<NodeId>) -> Self {
        Self {
            config,
            endpoint,
            monitor_enabled: true,
            fifo: VecDeque::new(),
            beat: 0,
            peer_reasm: Reassembler::default(),
            rx_bytes: [Vec::new(), Vec::new()],
            next_rx_beat: 0,
            inbound: VecDeque::new(),
            connected: false,
            stats: BridgeStats::default(),
        }
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    pub fn stats(&self) -> &BridgeStats {
        &self.stats
    }

    pub fn beat(&self) -> u64 {
        self.beat
    }

    pub fn fifo_len(&self) -> usize {
        self.fifo.len()
    }

    pub fn fifo(&self) -> impl Iterator<Item = &TxBeat> {
        self.fifo.iter()
    }

    pub fn set_monitor_enabled(&mut self, on: bool) {
        self.monitor_enabled = on;
    }

    pub fn monitor_drops(&self) -> u64 {
        self.stats.monitor_drops
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    fn free_beats(&self) -> usize {
        self.config.tx_fifo_depth.saturating_sub(self.fifo.len())
    }

    /// Queues a word as two beats, low half first. `false` if the FIFO
    /// cannot take both.
    pub fn tx_push(&mut self, word: u32, stream: u8) -> bool {
        if self.free_beats() < 2 {
            self.stats.tx_refused += 1;
            return false;
        }
        for data in split_word(word) {
            self.fifo.push_back(TxBeat {
                data,
                addr: stream & 0b11,
                valid: true,
                cycle: 0,
            });
        }
        self.stats.tx_words += 1;
        true
    }

    /// Runs the TX lanes for `beats` beats. A beat transfers the FIFO head
    /// exactly when the FIFO is non-empty (valid) and the sink is ready.
    pub fn advance_beats(&mut self, beats: u64, sink: &mut dyn BeatSink) -> u64 {
        let mut moved = 0;
        for _ in 0..beats {
            let ready = sink.ready(self.beat);
            if !self.fifo.is_empty() {
                if ready {
                    let mut b = self.fifo.pop_front().expect("non-empty");
                    b.cycle = self.beat;
                    sink.accept(b);
                    moved += 1;
                } else {
                    self.stats.stall_beats += 1;
                }
            }
            self.beat += 1;
        }
        self.stats.beats += beats;
        self.stats.beats_transferred += moved;
        moved
    }

    /// One byte from the TTL RX lines. Four bytes with the same address make
    /// a word, low byte first. `false` when bytes arrive faster than the
    /// lines can carry them or the inbound queue is full.
    pub fn rx_push(&mut self, byte: u8, addr: u8) -> bool {
        let addr = usize::from(addr & 1);
        let completes = self.rx_bytes[addr].len() == 3;
        if self.beat < self.next_rx_beat || (completes && self.inbound_full()) {
            self.stats.rx_refused += 1;
            return false;
        }
        self.next_rx_beat = self.beat + self.config.beats_per_rx_byte;
        self.stats.rx_bytes += 1;
        let buf = &mut self.rx_bytes[addr];
        buf.push(byte);
        if buf.len() == 4 {
            let word = u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]);
            buf.clear();
            self.push_inbound(addr as u8, word);
        }
        true
    }

    fn inbound_full(&self) -> bool {
        self.inbound.len() >= self.config.rx_queue_words
    }

    fn push_inbound(&mut self, stream: u8, word: u32) {
        self.inbound.push_back((stream, word));
        self.stats.inbound_words += 1;
    }

    /// Next word waiting to enter the NoC, with its stream address.
    pub fn peek_inbound(&self) -> Option<(u8, u32)> {
        self.inbound.front().copied()
    }

    pub fn pop_inbound(&mut self) -> Option<(u8, u32)> {
        self.inbound.pop_front()
    }

    pub fn inbound_len(&self) -> usize {
        self.inbound.len()
    }
}

/// A bridge receives its peer's TX beats into the inbound queue, holding
/// ready low while the queue is full.
impl BeatSink for ChipBridge {
    fn ready(&mut self, _: u64) -> bool {
        !self.inbound_full()
    }

    fn accept(&mut self, beat: TxBeat) {
        if let Some((stream, word)) = self.peer_reasm.push(&beat) {
            self.push_inbound(stream, word);
        }
    }
}

impl TapSink for ChipBridge {
    fn offer(&mut self, pkt: &NoCPacket) -> bool {
        if self.endpoint == Some(pkt.dst) {
            // gated by endpoint_ready, so this always fits
            return self.tx_push(pkt.payload, self.config.data_stream);
        }
        if !self.monitor_enabled {
            return true;
        }
        self.stats.monitor_words += 1;
        if self.tx_push(pkt.payload, self.config.monitor_stream) {
            true
        } else {
            self.stats.monitor_drops += 1;
            false
        }
    }

    fn endpoint_ready(&self) -> bool {
        self.free_beats() >= 2
    }
}

/// Marks two bridges as peers. The kernel then feeds each one's TX beats
/// into the other's inbound queue.
pub fn connect(a: &mut ChipBridge, b: &mut ChipBridge) -> Result<(), BridgeError> {
    if a.connected || b.connected {
        return Err(BridgeError::AlreadyConnected);
    }
    a.connected = true;
    b.connected = true;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn bridge() -> ChipBridge {
        ChipBridge::new(BridgeConfig::default(), Some(8))
    }

    #[test]
    fn split_low_half_first() {
        let mut b = bridge();
        assert!(b.tx_push(0xA5A5_5A5A, 2));
        let beats: Vec<u16> = b.fifo().map(|x| x.data).collect();
        assert_eq!(beats, vec![0x5A5A, 0xA5A5]);
        assert!(b.fifo().all(|x| x.addr == 2 && x.valid));
    }

    #[test]
    fn full_fifo_refuses_whole_word() {
        let mut b = bridge();
        for i in 0..8 {
            assert!(b.tx_push(i, 0));
        }
        assert!(!b.tx_push(99, 0));
        assert_eq!(b.fifo_len(), 16);
    }

    #[test]
    fn word_rate_matches_beat_rate() {
        let mut b = bridge();
        let mut rx = MonitorReceiver::new(ReadyPattern::Always);
        for w in 0..1000u32 {
            assert!(b.tx_push(w, 1), "stalled at word {w}");
            b.advance_beats(2, &mut rx);
        }
        assert_eq!(b.stats().beats_transferred, 2000);
        assert_eq!(b.stats().stall_beats, 0);
        assert_eq!(rx.stream(1), (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn no_ready_no_transfer() {
        let mut b = bridge();
        b.tx_push(7, 0);
        let before: Vec<TxBeat> = b.fifo().copied().collect();
        let mut never = ReadyPattern::Never;
        assert_eq!(b.advance_beats(10, &mut never), 0);
        assert_eq!(b.fifo().copied().collect::<Vec<_>>(), before);
        assert_eq!(b.stats().stall_beats, 10);
    }

    #[test]
    fn two_beats_one_word() {
        let mut b = bridge();
        let mut rx = MonitorReceiver::new(ReadyPattern::Always);
        b.tx_push(0xDEAD_BEEF, 3);
        assert_eq!(b.advance_beats(2, &mut rx), 2);
        assert_eq!(
            rx.captured,
            vec![MonitorRecord {
                beat: 1,
                stream: 3,
                word: 0xDEAD_BEEF
            }]
        );
    }

    #[test]
    fn random_ready_loopback() {
        let mut rng = seed::rng(&[5]);
        let mut b = bridge();
        let mut rx = MonitorReceiver::new(ReadyPattern::Random { p: 0.3, seed: 9 });
        let mut pushed: [Vec<u32>; 4] = Default::default();
        for _ in 0..2000 {
            let w: u32 = rng.random();
            let s: u8 = rng.random_range(0..4);
            while !b.tx_push(w, s) {
                b.advance_beats(1, &mut rx);
            }
            pushed[s as usize].push(w);
            b.advance_beats(rng.random_range(0..3), &mut rx);
        }
        b.advance_beats(100_000, &mut rx);
        for s in 0..4u8 {
            assert_eq!(rx.stream(s), pushed[s as usize]);
        }
    }

    #[test]
    fn rx_bytes_assemble_low_first() {
        let mut b = bridge();
        let mut idle = ReadyPattern::Always;
        for byte in [0x11, 0x22, 0x33, 0x44] {
            assert!(b.rx_push(byte, 0));
            b.advance_beats(20, &mut idle);
        }
        assert_eq!(b.pop_inbound(), Some((0, 0x4433_2211)));
        assert_eq!(b.pop_inbound(), None);
    }

    #[test]
    fn rx_rate_limited() {
        let mut b = bridge();
        let mut idle = ReadyPattern::Always;
        assert!(b.rx_push(1, 0));
        assert!(!b.rx_push(2, 0));
        b.advance_beats(19, &mut idle);
        assert!(!b.rx_push(2, 0));
        b.advance_beats(1, &mut idle);
        assert!(b.rx_push(2, 0));
        // 100 beats = 50 ns carry exactly 5 bytes at 0.8 Gbit/s
        let mut b = bridge();
        let mut accepted = 0;
        for _ in 0..100 {
            if b.rx_push(0, 1) {
                accepted += 1;
            }
            b.advance_beats(1, &mut idle);
        }
        assert_eq!(accepted, 5);
    }

    #[test]
    fn nothing_pushed_nothing_emitted() {
        let mut b = bridge();
        b.advance_beats(1000, &mut ReadyPattern::Always);
        assert_eq!(b.inbound_len(), 0);
    }

    #[test]
    fn connect_once() {
        let mut a = bridge();
        let mut b = bridge();
        connect(&mut a, &mut b).unwrap();
        assert_eq!(connect(&mut a, &mut b), Err(BridgeError::AlreadyConnected));
        let mut c = bridge();
        assert_eq!(connect(&mut c, &mut b), Err(BridgeError::AlreadyConnected));
    }

    #[test]
    fn peer_backpressure() {
        let cfg = BridgeConfig {
            rx_queue_words: 2,
            ..BridgeConfig::default()
        };
        let mut a = bridge();
        let mut b = ChipBridge::new(cfg, Some(8));
        for w in 0..5 {
            a.tx_push(w, 1);
        }
        a.advance_beats(100, &mut b);
        assert_eq!(b.inbound_len(), 2);
        assert_eq!(a.fifo_len(), 6);
        b.pop_inbound();
        b.pop_inbound();
        a.advance_beats(100, &mut b);
        let rest: Vec<u32> = std::iter::from_fn(|| b.pop_inbound())
            .map(|x| x.1)
            .collect();
        assert_eq!(rest, vec![2, 3]);
    }

    #[test]
    fn tap_streams() {
        let mut b = bridge();
        let mut rx = MonitorReceiver::new(ReadyPattern::Always);
        assert!(b.offer(&NoCPacket::new(0, 8, 1, 0)));
        assert!(b.offer(&NoCPacket::new(0, 7, 2, 0)));
        b.set_monitor_enabled(false);
        assert!(b.offer(&NoCPacket::new(0, 7, 3, 0)));
        b.advance_beats(10, &mut rx);
        assert_eq!(rx.stream(STREAM_DATA), vec![1]);
        assert_eq!(rx.stream(STREAM_MONITOR), vec![2]);
        assert_eq!(b.stats().monitor_words, 1);
    }

    #[test]
    fn ratio_pattern() {
        let p = ReadyPattern::Ratio { num: 1, den: 2 };
        let levels: Vec<bool> = (0..4).map(|b| p.level(b)).collect();
        assert_eq!(levels, vec![true, false, true, false]);
    }

    proptest! {
        #[test]
        fn split_join_inverse(w in any::<u32>()) {
            let [lo, hi] = split_word(w);
            prop_assert_eq!(join_halves(lo, hi), w);
        }
    }

    #[test]
    fn split_join_boundaries() {
        for w in [0, u32::MAX, 1, 0x8000_0000, 0xFFFF, 0xFFFF_0000] {
            let [lo, hi] = split_word(w);
            assert_eq!(join_halves(lo, hi), w);
        }
    }
}
