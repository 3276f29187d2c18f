//! Discrete-event CSMA/CA simulator with per-frame dynamic channel bonding.
//!
//! Time is integer microseconds. Each BSS is one AP sending downlink traffic
//! to one STA. Packets arrive as a Poisson process; a backlogged AP counts
//! down a uniform backoff in `[0, cw_fixed)` slots after DIFS while its
//! primary channel is idle, freezing whenever the primary is sensed busy. On
//! expiry it bonds the widest allowed idle block around the primary.
//!
//! AP `i` senses a transmission of AP `j` iff `bandwidth(j) <= matrix[i][j]`.
//! A frame of `i` is corrupted by a concurrent frame of `j` iff their channel
//! sets intersect and `i` senses `j` at `j`'s bandwidth. Frames corrupted at
//! their start (simultaneous expiry) cost only the RTS/CTS exchange; frames
//! hit later by a hidden transmitter run to completion and are lost. Lost
//! packets stay at the head of the queue.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::deployment::Deployment;
use crate::error::{Error, Result};
use crate::seed::{label_hash, rng_from};
use crate::spectrum::{dcb_select, Action, ChannelSet, InterferenceMatrix};

/// MAC timing and capacity constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    pub slot_us: u64,
    pub difs_us: u64,
    /// Gap before the block ACK, added to every successful frame.
    pub sifs_us: u64,
    pub cw_fixed: u32,
    pub max_aggregation: u32,
    pub per_channel_rate_mbps: f64,
    /// RTS + CTS exchange, paid by every frame and the whole cost of a collided one.
    pub rts_cts_overhead_us: u64,
    pub max_ppdu_us: u64,
    pub queue_capacity_packets: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot_us: 9,
            difs_us: 34,
            sifs_us: 16,
            cw_fixed: 16,
            max_aggregation: 64,
            per_channel_rate_mbps: 30.0,
            rts_cts_overhead_us: 110,
            max_ppdu_us: 5484,
            queue_capacity_packets: 1000,
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("slot_us", self.slot_us),
            ("difs_us", self.difs_us),
            ("sifs_us", self.sifs_us),
            ("cw_fixed", u64::from(self.cw_fixed)),
            ("max_aggregation", u64::from(self.max_aggregation)),
            ("rts_cts_overhead_us", self.rts_cts_overhead_us),
            ("max_ppdu_us", self.max_ppdu_us),
            ("queue_capacity_packets", u64::from(self.queue_capacity_packets)),
        ];
        for (name, v) in ints {
            if v == 0 {
                return Err(Error::validation(format!("mac.{name} must be > 0")));
            }
        }
        if !(self.per_channel_rate_mbps > 0.0) || !self.per_channel_rate_mbps.is_finite() {
            return Err(Error::validation("mac.per_channel_rate_mbps must be > 0"));
        }
        Ok(())
    }
}

/// One action per BSS, index-aligned with the deployment's BSS list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalConfig(pub Vec<Action>);

impl GlobalConfig {
    pub fn validate(&self, d: &Deployment) -> Result<()> {
        if self.0.len() != d.n_bss() {
            return Err(Error::validation(format!(
                "global configuration has {} actions for {} BSSs",
                self.0.len(),
                d.n_bss()
            )));
        }
        for a in &self.0 {
            a.validate(d.n_channels)?;
        }
        Ok(())
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub throughput_mbps: Vec<f64>,
    pub dropped: Vec<u64>,
    /// Fraction of the run each AP spent transmitting.
    pub airtime: Vec<f64>,
    pub generated_packets: Vec<u64>,
    pub delivered_packets: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxOutcome {
    Success,
    /// Lost to a simultaneous start; only the RTS/CTS exchange was spent.
    Collision,
    /// Hit mid-frame by a hidden transmitter.
    Corrupted,
    /// Still on the air when the run ended.
    Incomplete,
}

impl TxOutcome {
    fn as_str(self) -> &'static str {
        match self {
            TxOutcome::Success => "success",
            TxOutcome::Collision => "collision",
            TxOutcome::Corrupted => "corrupted",
            TxOutcome::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TxRecord {
    pub bss: usize,
    pub start_us: u64,
    pub end_us: u64,
    pub channels: ChannelSet,
    pub outcome: TxOutcome,
    pub packets: u32,
}

/// Every transmission of a run, in start order.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub duration_us: u64,
    pub matrix: InterferenceMatrix,
    pub n_channels: usize,
    pub records: Vec<TxRecord>,
}

impl Trace {
    /// CSV dump with header `time_us,bss,event,channels,outcome`, rows sorted by time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(u64, usize, u8, &TxRecord)> = Vec::with_capacity(self.records.len() * 2);
        for r in &self.records {
            rows.push((r.start_us, r.bss, 1, r));
            if r.outcome != TxOutcome::Incomplete {
                rows.push((r.end_us, r.bss, 0, r));
            }
        }
        // Ends before starts at equal times, matching event processing order.
        rows.sort_by_key(|&(t, bss, kind, _)| (t, kind, bss));
        writeln!(out, "time_us,bss,event,channels,outcome")?;
        for (t, bss, kind, r) in rows {
            let (event, outcome) = if kind == 1 {
                let o = if r.outcome == TxOutcome::Collision {
                    "collision"
                } else {
                    "clear"
                };
                ("tx_start", o)
            } else {
                ("tx_end", r.outcome.as_str())
            };
            writeln!(out, "{t},{bss},{event},{},{outcome}", r.channels)?;
        }
        Ok(())
    }
}

/// Per-channel fraction of the run during which `bss` sensed another AP's
/// transmission on that channel.
pub fn occupancy_observation(trace: Option<&Trace>, bss: usize) -> Result<Vec<f64>> {
    let trace = trace.ok_or_else(|| {
        Error::Unsupported("occupancy needs a simulation run with tracing enabled".into())
    })?;
    if bss >= trace.matrix.len() {
        return Err(Error::validation(format!("no bss at index {bss}")));
    }
    let total = trace.duration_us as f64;
    Ok((1..=trace.n_channels)
        .map(|c| {
            let mut spans: Vec<(u64, u64)> = trace
                .records
                .iter()
                .filter(|r| {
                    r.channels.contains(c)
                        && trace.matrix.reaches(bss, r.bss, r.channels.bandwidth_mhz())
                })
                .map(|r| (r.start_us, r.end_us.min(trace.duration_us)))
                .filter(|(s, e)| e > s)
                .collect();
            spans.sort_unstable();
            let mut busy = 0u64;
            let mut cursor = 0u64;
            for (s, e) in spans {
                let s = s.max(cursor);
                if e > s {
                    busy += e - s;
                    cursor = e;
                }
            }
            busy as f64 / total
        })
        .collect())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Phase {
    Idle,
    Contending,
    Transmitting,
}

struct Tx {
    channels: ChannelSet,
    bandwidth_mhz: u32,
    start: u64,
    end: u64,
    packets: u32,
    collided: bool,
    corrupted: bool,
    record: Option<usize>,
}

struct Node {
    action: Action,
    packet_bits: u32,
    queue: u32,
    next_arrival: f64,
    inter_arrival: Exp<f64>,
    arrival_rng: ChaCha8Rng,
    backoff_rng: ChaCha8Rng,
    phase: Phase,
    backoff: u32,
    /// Instant the primary was last seen idle while contending; `None` = frozen.
    resume_at: Option<u64>,
    tx: Option<Tx>,
    generated: u64,
    delivered: u64,
    dropped: u64,
    airtime_us: u64,
}

impl Node {
    fn advance_arrivals(&mut self, now: u64, capacity: u32) {
        while self.next_arrival <= now as f64 {
            self.generated += 1;
            if self.queue < capacity {
                self.queue += 1;
            } else {
                self.dropped += 1;
            }
            self.next_arrival += self.inter_arrival.sample(&mut self.arrival_rng);
        }
    }

    fn arrival_time(&self) -> u64 {
        self.next_arrival.ceil() as u64
    }

    fn expiry(&self, mac: &MacParams) -> Option<u64> {
        match (self.phase, self.resume_at) {
            (Phase::Contending, Some(r)) => Some(r + mac.difs_us + u64::from(self.backoff) * mac.slot_us),
            _ => None,
        }
    }

    fn start_contending(&mut self, cw: u32) {
        self.phase = Phase::Contending;
        self.backoff = self.backoff_rng.gen_range(0..cw);
        self.resume_at = None;
    }
}

/// A configured simulation run.
pub struct Simulation<'a> {
    deployment: &'a Deployment,
    config: &'a GlobalConfig,
    mac: &'a MacParams,
    duration_us: u64,
    seed: u64,
    trace: bool,
}

pub struct SimOutput {
    pub result: SimResult,
    pub trace: Option<Trace>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        deployment: &'a Deployment,
        config: &'a GlobalConfig,
        duration_s: f64,
        mac: &'a MacParams,
        seed: u64,
    ) -> Result<Self> {
        config.validate(deployment)?;
        mac.validate()?;
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::validation("simulation duration must be > 0"));
        }
        let duration_us = (duration_s * 1e6).round() as u64;
        if duration_us == 0 {
            return Err(Error::validation("simulation duration rounds to 0 us"));
        }
        Ok(Simulation {
            deployment,
            config,
            mac,
            duration_us,
            seed,
            trace: false,
        })
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn run(&self) -> SimOutput {
        Engine::new(self).run()
    }
}

/// Runs one simulation and returns per-BSS throughput.
pub fn simulate(
    d: &Deployment,
    g: &GlobalConfig,
    duration_s: f64,
    mac: &MacParams,
    seed: u64,
) -> Result<SimResult> {
    Ok(Simulation::new(d, g, duration_s, mac, seed)?.run().result)
}

struct Engine<'a> {
    mac: &'a MacParams,
    matrix: &'a InterferenceMatrix,
    all_channels: ChannelSet,
    duration_us: u64,
    nodes: Vec<Node>,
    records: Option<Vec<TxRecord>>,
    n_channels: usize,
}

impl<'a> Engine<'a> {
    fn new(sim: &Simulation<'a>) -> Self {
        let d = sim.deployment;
        let nodes = d
            .bss
            .iter()
            .zip(sim.config.actions())
            .map(|(b, &action)| {
                let label = label_hash(&b.id);
                let mut arrival_rng = rng_from(&[sim.seed, label, 0]);
                // Mean gap in microseconds: packet_bits / (bits per microsecond).
                let inter_arrival = Exp::new(b.load_mbps / f64::from(b.packet_bits)).expect("positive rate");
                let first = inter_arrival.sample(&mut arrival_rng);
                Node {
                    action,
                    packet_bits: b.packet_bits,
                    queue: 0,
                    next_arrival: first,
                    inter_arrival,
                    arrival_rng,
                    backoff_rng: rng_from(&[sim.seed, label, 1]),
                    phase: Phase::Idle,
                    backoff: 0,
                    resume_at: None,
                    tx: None,
                    generated: 0,
                    delivered: 0,
                    dropped: 0,
                    airtime_us: 0,
                }
            })
            .collect();
        Engine {
            mac: sim.mac,
            matrix: &d.matrix,
            all_channels: ChannelSet::full(d.n_channels),
            duration_us: sim.duration_us,
            nodes,
            records: sim.trace.then(Vec::new),
            n_channels: d.n_channels,
        }
    }

    /// Channels AP `i` currently senses as busy.
    fn sensed_busy(&self, i: usize) -> ChannelSet {
        let mut busy = ChannelSet::EMPTY;
        for (j, n) in self.nodes.iter().enumerate() {
            if let Some(tx) = &n.tx {
                if self.matrix.reaches(i, j, tx.bandwidth_mhz) {
                    busy = busy.union(tx.channels);
                }
            }
        }
        busy
    }

    fn next_event(&self) -> u64 {
        let mut t = u64::MAX;
        for n in &self.nodes {
            let candidate = match n.phase {
                Phase::Transmitting => n.tx.as_ref().map(|tx| tx.end),
                Phase::Contending => n.expiry(self.mac),
                Phase::Idle => Some(n.arrival_time()),
            };
            if let Some(c) = candidate {
                t = t.min(c);
            }
        }
        t
    }

    fn run(mut self) -> SimOutput {
        let cap = self.mac.queue_capacity_packets;
        let cw = self.mac.cw_fixed;
        loop {
            let now = self.next_event();
            if now >= self.duration_us {
                break;
            }

            // Frame completions.
            for i in 0..self.nodes.len() {
                let ends = matches!(&self.nodes[i].tx, Some(tx) if tx.end == now);
                if !ends {
                    continue;
                }
                let node = &mut self.nodes[i];
                node.advance_arrivals(now, cap);
                let tx = node.tx.take().expect("transmitting");
                let outcome = if tx.collided {
                    TxOutcome::Collision
                } else if tx.corrupted {
                    TxOutcome::Corrupted
                } else {
                    node.queue -= tx.packets;
                    node.delivered += u64::from(tx.packets);
                    TxOutcome::Success
                };
                if let (Some(records), Some(k)) = (self.records.as_mut(), tx.record) {
                    records[k].outcome = outcome;
                }
                if node.queue > 0 {
                    node.start_contending(cw);
                } else {
                    node.phase = Phase::Idle;
                }
            }

            // Wake idle APs whose next packet has arrived.
            for node in self.nodes.iter_mut() {
                if node.phase == Phase::Idle && node.arrival_time() <= now {
                    node.advance_arrivals(now, cap);
                    if node.queue > 0 {
                        node.start_contending(cw);
                    }
                }
            }

            // Contenders whose primary just cleared resume counting.
            for i in 0..self.nodes.len() {
                let n = &self.nodes[i];
                if n.phase == Phase::Contending && n.resume_at.is_none() {
                    let busy = self.sensed_busy(i);
                    if !busy.contains(n.action.primary) {
                        self.nodes[i].resume_at = Some(now);
                    }
                }
            }

            // Backoff expiries: everyone expiring at `now` decides on the
            // spectrum as sensed before any of them starts.
            let starters: Vec<(usize, ChannelSet)> = (0..self.nodes.len())
                .filter(|&i| self.nodes[i].expiry(self.mac) == Some(now))
                .map(|i| {
                    let idle = self.all_channels.difference(self.sensed_busy(i));
                    let a = self.nodes[i].action;
                    (i, dcb_select(a.primary, a.max_bandwidth, idle))
                })
                .collect();
            if starters.is_empty() {
                continue;
            }
            for &(i, channels) in &starters {
                debug_assert!(!channels.is_empty());
                self.start_tx(i, channels, now);
            }
            self.resolve_collisions(&starters, now);

            // Contenders that now sense a busy primary freeze.
            for i in 0..self.nodes.len() {
                if self.nodes[i].phase != Phase::Contending {
                    continue;
                }
                let Some(r) = self.nodes[i].resume_at else {
                    continue;
                };
                if self.sensed_busy(i).contains(self.nodes[i].action.primary) {
                    let node = &mut self.nodes[i];
                    let elapsed = now - r;
                    if elapsed > self.mac.difs_us {
                        let slots = (elapsed - self.mac.difs_us) / self.mac.slot_us;
                        node.backoff -= (slots as u32).min(node.backoff);
                    }
                    node.resume_at = None;
                }
            }
        }
        self.finish()
    }

    fn start_tx(&mut self, i: usize, channels: ChannelSet, now: u64) {
        let cap = self.mac.queue_capacity_packets;
        let mac = self.mac;
        let node = &mut self.nodes[i];
        node.advance_arrivals(now, cap);
        let rate = mac.per_channel_rate_mbps * channels.len() as f64;
        let bits = f64::from(node.packet_bits);
        let fit = ((mac.max_ppdu_us as f64 * rate) / bits).floor().max(1.0) as u32;
        let packets = node.queue.min(mac.max_aggregation).min(fit);
        node.phase = Phase::Transmitting;
        node.resume_at = None;
        node.tx = Some(Tx {
            channels,
            bandwidth_mhz: channels.bandwidth_mhz(),
            start: now,
            end: now,
            packets,
            collided: false,
            corrupted: false,
            record: None,
        });
    }

    fn resolve_collisions(&mut self, starters: &[(usize, ChannelSet)], now: u64) {
        let n = self.nodes.len();
        let is_starter = |j: usize| starters.iter().any(|&(s, _)| s == j);

        // Ongoing frames hit by a newly started hidden transmitter.
        for k in 0..n {
            if is_starter(k) {
                continue;
            }
            let Some(tx) = &self.nodes[k].tx else { continue };
            let hit = starters.iter().any(|&(j, ch)| {
                ch.intersects(tx.channels) && self.matrix.reaches(k, j, ch.bandwidth_mhz())
            });
            if hit {
                self.nodes[k].tx.as_mut().expect("on air").corrupted = true;
            }
        }

        // New frames: any sensed concurrent transmission on a shared channel
        // kills the RTS/CTS exchange.
        let collided: Vec<bool> = starters
            .iter()
            .map(|&(i, ch)| {
                (0..n).any(|j| {
                    j != i
                        && matches!(&self.nodes[j].tx, Some(o)
                            if o.channels.intersects(ch) && self.matrix.reaches(i, j, o.bandwidth_mhz))
                })
            })
            .collect();

        for (&(i, ch), &lost) in starters.iter().zip(&collided) {
            let mac = self.mac;
            let node = &mut self.nodes[i];
            let tx = node.tx.as_mut().expect("just started");
            let rate = mac.per_channel_rate_mbps * ch.len() as f64;
            let data_us = (f64::from(tx.packets) * f64::from(node.packet_bits) / rate).ceil() as u64;
            let length = if lost {
                mac.rts_cts_overhead_us
            } else {
                mac.rts_cts_overhead_us + data_us + mac.sifs_us
            };
            tx.collided = lost;
            tx.end = now + length;
            node.airtime_us += length.min(self.duration_us - now);
            if let Some(records) = self.records.as_mut() {
                tx.record = Some(records.len());
                records.push(TxRecord {
                    bss: i,
                    start_us: tx.start,
                    end_us: tx.end,
                    channels: ch,
                    outcome: TxOutcome::Incomplete,
                    packets: tx.packets,
                });
            }
        }
    }

    fn finish(mut self) -> SimOutput {
        let duration = self.duration_us;
        let cap = self.mac.queue_capacity_packets;
        for node in self.nodes.iter_mut() {
            // Count arrivals up to (excluding) the end of the run.
            node.advance_arrivals(duration - 1, cap);
        }
        let dur = duration as f64;
        let result = SimResult {
            throughput_mbps: self
                .nodes
                .iter()
                .map(|n| n.delivered as f64 * f64::from(n.packet_bits) / dur)
                .collect(),
            dropped: self.nodes.iter().map(|n| n.dropped).collect(),
            airtime: self.nodes.iter().map(|n| n.airtime_us as f64 / dur).collect(),
            generated_packets: self.nodes.iter().map(|n| n.generated).collect(),
            delivered_packets: self.nodes.iter().map(|n| n.delivered).collect(),
        };
        let trace = self.records.take().map(|records| Trace {
            duration_us: duration,
            matrix: self.matrix.clone(),
            n_channels: self.n_channels,
            records,
        });
        SimOutput { result, trace }
    }
}

/// Short human-readable summary, one line per BSS.
pub fn describe(d: &Deployment, g: &GlobalConfig, r: &SimResult) -> String {
    let mut s = String::new();
    for (w, b) in d.bss.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4} {} tput={:.3} Mbps load={:.3} airtime={:.3} dropped={}",
            b.id, g.0[w], r.throughput_mbps[w], b.load_mbps, r.airtime[w], r.dropped[w]
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(bss: usize, start_us: u64, end_us: u64, channels: &[usize], outcome: TxOutcome) -> TxRecord {
        TxRecord {
            bss,
            start_us,
            end_us,
            channels: channels.iter().copied().collect(),
            outcome,
            packets: 1,
        }
    }

    fn trace(m: Vec<Vec<u32>>, records: Vec<TxRecord>) -> Trace {
        Trace {
            duration_us: 1000,
            matrix: InterferenceMatrix::new(m).unwrap(),
            n_channels: 4,
            records,
        }
    }

    #[test]
    fn mac_defaults_are_valid() {
        assert!(MacParams::default().validate().is_ok());
        let bad = MacParams {
            cw_fixed: 0,
            ..MacParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = MacParams {
            per_channel_rate_mbps: f64::NAN,
            ..MacParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn occupancy_needs_trace() {
        assert!(matches!(occupancy_observation(None, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn occupancy_of_idle_system_is_zero() {
        let t = trace(vec![vec![0, 80], vec![80, 0]], vec![]);
        assert_eq!(occupancy_observation(Some(&t), 0).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn occupancy_half_busy_pair() {
        let t = trace(
            vec![vec![0, 80], vec![80, 0]],
            vec![
                rec(0, 0, 250, &[1, 2], TxOutcome::Success),
                rec(0, 500, 750, &[1, 2], TxOutcome::Success),
            ],
        );
        assert_eq!(occupancy_observation(Some(&t), 1).unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
        // Own frames are not counted.
        assert_eq!(occupancy_observation(Some(&t), 0).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn occupancy_merges_overlapping_spans_and_clips() {
        let t = trace(
            vec![vec![0, 80, 80], vec![80, 0, 80], vec![80, 80, 0]],
            vec![
                rec(0, 100, 300, &[1], TxOutcome::Success),
                rec(1, 200, 400, &[1, 2], TxOutcome::Success),
                rec(1, 900, 1200, &[3, 4], TxOutcome::Incomplete),
            ],
        );
        let occ = occupancy_observation(Some(&t), 2).unwrap();
        assert_eq!(occ, vec![0.3, 0.2, 0.1, 0.1]);
    }

    #[test]
    fn occupancy_respects_reach() {
        // BSS 1 hears BSS 0 only at 20 MHz.
        let t = trace(
            vec![vec![0, 20], vec![20, 0]],
            vec![
                rec(0, 0, 100, &[1], TxOutcome::Success),
                rec(0, 200, 400, &[1, 2], TxOutcome::Success),
            ],
        );
        assert_eq!(occupancy_observation(Some(&t), 1).unwrap(), vec![0.1, 0.0, 0.0, 0.0]);
        let deaf = trace(vec![vec![0, 0], vec![0, 0]], t.records.clone());
        assert_eq!(occupancy_observation(Some(&deaf), 1).unwrap(), vec![0.0; 4]);
        assert!(occupancy_observation(Some(&deaf), 2).is_err());
    }

    #[test]
    fn trace_csv_rows() {
        let t = trace(
            vec![vec![0, 80], vec![80, 0]],
            vec![
                rec(0, 10, 120, &[1, 2], TxOutcome::Collision),
                rec(1, 10, 120, &[1], TxOutcome::Collision),
                rec(0, 120, 900, &[1, 2], TxOutcome::Success),
                rec(1, 950, 1100, &[1], TxOutcome::Incomplete),
            ],
        );
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let want = "time_us,bss,event,channels,outcome\n\
                    10,0,tx_start,1-2,collision\n\
                    10,1,tx_start,1,collision\n\
                    120,0,tx_end,1-2,collision\n\
                    120,1,tx_end,1,collision\n\
                    120,0,tx_start,1-2,clear\n\
                    900,0,tx_end,1-2,success\n\
                    950,1,tx_start,1,clear\n";
        assert_eq!(text, want);
    }
}
