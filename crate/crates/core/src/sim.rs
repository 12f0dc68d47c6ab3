//! Seeded slot-by-slot Monte Carlo simulation.
//!
//! Uses the same event rules as [`crate::oracle`]: one ChaCha8 stream, the
//! five coins drawn in a fixed order every slot, then one Bernoulli draw per
//! active link in [`Link::ALL`] order.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::TrafficParams;
use crate::error::{Error, Result};
use crate::oracle::{Coins, Link, SlotEffect, SlotPlan, SlotSemantics};
use crate::phy::LinkBudget;
use crate::throughput::{Source, ThroughputReport};

pub const MIN_BATCHES: usize = 20;
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slots: u64,
    /// Slots discarded before statistics start; 1% of `slots` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub semantics: SlotSemantics,
    /// Number of batches for the batch-means intervals.
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    100
}

impl SimConfig {
    pub fn new(slots: u64, seed: u64) -> Self {
        SimConfig {
            slots,
            warmup: None,
            seed,
            semantics: SlotSemantics::Blocked,
            batches: default_batches(),
        }
    }

    pub fn warmup(&self) -> u64 {
        self.warmup.unwrap_or(self.slots / 100)
    }

    pub fn measured_slots(&self) -> u64 {
        self.slots.saturating_sub(self.warmup())
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots <= self.warmup() {
            return Err(Error::Config(format!(
                "slots ({}) must exceed warmup ({})",
                self.slots,
                self.warmup()
            )));
        }
        if self.batches < MIN_BATCHES {
            return Err(Error::TooFewBatches {
                got: self.batches,
                min: MIN_BATCHES,
            });
        }
        if self.measured_slots() < self.batches as u64 {
            return Err(Error::Config(format!(
                "{} measured slots cannot fill {} batches",
                self.measured_slots(),
                self.batches
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub delivered_direct: u64,
    pub delivered_relayed: u64,
    /// U1 packets that missed D but reached R.
    pub relay_arrivals: u64,
    pub accepted: u64,
    pub dropped_full: u64,
    pub u2_served: u64,
    /// Cache hits that found the relay busy with D.
    pub u2_blocked: u64,
}

/// 99% half-widths for each throughput, in [`ThroughputReport::metrics`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CiHalfwidths {
    pub t_direct: f64,
    pub t_relayed: f64,
    pub t_noncacheable: f64,
    pub t_cacheable: f64,
    pub t_network: f64,
}

impl CiHalfwidths {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.t_direct,
            self.t_relayed,
            self.t_noncacheable,
            self.t_cacheable,
            self.t_network,
        ]
    }
}

// Per-slot outcome flags kept for batch means.
const FLAG_DIRECT: u8 = 1;
const FLAG_ACCEPT: u8 = 2;
const FLAG_U2: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub empirical_pi: Vec<f64>,
    pub report: ThroughputReport,
    pub ci_halfwidth: CiHalfwidths,
    pub counters: Counters,
    /// Per starting queue length: counts of Δq = -1, 0, +1.
    pub transitions: Vec<[u64; 3]>,
    pub seed: u64,
    series: Vec<u8>,
}

impl SimResult {
    pub fn measured_slots(&self) -> usize {
        self.series.len()
    }

    /// `P(Q > k)` over the measured slots.
    pub fn tail(&self, k: usize) -> f64 {
        self.empirical_pi.iter().skip(k + 1).sum()
    }
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub coins: Coins,
    pub plan: SlotPlan,
    pub succeeded: u8,
    pub queue_before: usize,
    pub queue_after: usize,
    pub effect: SlotEffect,
    /// Sequence tag of the packet delivered by the relay.
    pub departed: Option<u64>,
    /// Sequence tag given to the packet the relay accepted.
    pub enqueued: Option<u64>,
    pub dropped: bool,
}

/// Stateful slot simulator with an FCFS relay queue.
pub struct Simulator {
    traffic: TrafficParams,
    queue_size: usize,
    /// `[coin bits][queue non-empty]` → plan and per-link success probabilities.
    plans: Vec<[(SlotPlan, [f64; 5]); 2]>,
    queue: VecDeque<u64>,
    next_seq: u64,
    slot: u64,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(
        budget: &LinkBudget,
        traffic: &TrafficParams,
        queue_size: usize,
        semantics: SlotSemantics,
        seed: u64,
    ) -> Result<Self> {
        traffic.validate()?;
        let plans = (0u8..32)
            .map(|bits| {
                let coins = Coins::from_bits(bits);
                let make = |nonempty| -> Result<(SlotPlan, [f64; 5])> {
                    let plan = SlotPlan::new(coins, nonempty, semantics);
                    let mut probs = [0.0; 5];
                    for link in plan.links() {
                        let (tx, rx) = link.endpoints();
                        probs[link as usize] = budget.success_prob(tx, rx, plan.active)?;
                    }
                    Ok((plan, probs))
                };
                Ok([make(false)?, make(true)?])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulator {
            traffic: *traffic,
            queue_size,
            plans,
            queue: VecDeque::with_capacity(queue_size),
            next_seq: 0,
            slot: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    fn flip(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    pub fn step(&mut self) -> SlotRecord {
        let t = self.traffic;
        let coins = Coins {
            u1_attempts: self.flip(t.q1),
            relay_picks_d: self.flip(t.q_r),
            u2_requests: self.flip(t.q_u),
            relay_hit: self.flip(t.p_h),
            dc_available: self.flip(t.alpha),
        };
        let bits = u8::from(coins.u1_attempts)
            | u8::from(coins.relay_picks_d) << 1
            | u8::from(coins.u2_requests) << 2
            | u8::from(coins.relay_hit) << 3
            | u8::from(coins.dc_available) << 4;
        let queue_before = self.queue.len();
        let (plan, probs) = self.plans[bits as usize][usize::from(queue_before > 0)];

        let mut succeeded = 0u8;
        for link in Link::ALL {
            if plan.has(link) && self.flip(probs[link as usize]) {
                succeeded |= link.bit();
            }
        }

        let effect = SlotEffect::resolve(succeeded, queue_before, self.queue_size);
        let departed = if effect.departure {
            self.queue.pop_front()
        } else {
            None
        };
        let enqueued = effect.accepted.then(|| {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.queue.push_back(seq);
            seq
        });
        let record = SlotRecord {
            slot: self.slot,
            coins,
            plan,
            succeeded,
            queue_before,
            queue_after: self.queue.len(),
            effect,
            departed,
            enqueued,
            dropped: effect.arrival && !effect.accepted,
        };
        self.slot += 1;
        record
    }
}

pub fn run(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    queue_size: usize,
    cfg: &SimConfig,
) -> Result<SimResult> {
    run_traced(budget, traffic, queue_size, cfg, None)
}

/// Like [`run`], optionally writing every measured slot to `trace` as CSV.
pub fn run_traced(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    queue_size: usize,
    cfg: &SimConfig,
    trace: Option<&mut dyn Write>,
) -> Result<SimResult> {
    cfg.validate()?;
    let mut sim = Simulator::new(budget, traffic, queue_size, cfg.semantics, cfg.seed)?;
    for _ in 0..cfg.warmup() {
        sim.step();
    }

    let mut trace = trace.map(csv::Writer::from_writer);
    if let Some(w) = trace.as_mut() {
        w.write_record(TRACE_HEADER).map_err(io_err)?;
    }

    let n = cfg.measured_slots() as usize;
    let mut visits = vec![0u64; queue_size + 1];
    let mut transitions = vec![[0u64; 3]; queue_size + 1];
    let mut counters = Counters::default();
    let mut series = Vec::with_capacity(n);
    for _ in 0..n {
        let rec = sim.step();
        let e = rec.effect;
        visits[rec.queue_before] += 1;
        transitions[rec.queue_before][(e.delta() + 1) as usize] += 1;
        counters.delivered_direct += u64::from(e.direct);
        counters.delivered_relayed += u64::from(e.departure);
        counters.relay_arrivals += u64::from(e.arrival);
        counters.accepted += u64::from(e.accepted);
        counters.dropped_full += u64::from(rec.dropped);
        counters.u2_served += u64::from(e.u2_served);
        counters.u2_blocked += u64::from(rec.plan.hit_while_busy);
        let mut flags = 0u8;
        if e.direct {
            flags |= FLAG_DIRECT;
        }
        if e.accepted {
            flags |= FLAG_ACCEPT;
        }
        if e.u2_served {
            flags |= FLAG_U2;
        }
        series.push(flags);
        if let Some(w) = trace.as_mut() {
            write_trace(w, &rec)?;
        }
    }
    if let Some(mut w) = trace {
        w.flush()
            .map_err(|e| Error::Config(format!("trace output: {e}")))?;
    }

    let total = n as f64;
    let empirical_pi = visits.iter().map(|&v| v as f64 / total).collect();
    let report = ThroughputReport::new(
        counters.delivered_direct as f64 / total,
        counters.accepted as f64 / total,
        counters.u2_served as f64 / total,
        Source::Simulated,
    );
    let mut result = SimResult {
        empirical_pi,
        report,
        ci_halfwidth: CiHalfwidths::default(),
        counters,
        transitions,
        seed: cfg.seed,
        series,
    };
    result.ci_halfwidth = batch_means_ci(n / cfg.batches, &result)?;
    Ok(result)
}

/// 99% batch-means half-widths over disjoint windows of `batch_len` slots.
///
/// Slots beyond the last full batch are ignored.
pub fn batch_means_ci(batch_len: usize, result: &SimResult) -> Result<CiHalfwidths> {
    let batches = result.series.len().checked_div(batch_len).unwrap_or(0);
    if batches < MIN_BATCHES {
        return Err(Error::TooFewBatches {
            got: batches,
            min: MIN_BATCHES,
        });
    }
    let mut means = vec![[0.0f64; 5]; batches];
    for (chunk, m) in result.series.chunks_exact(batch_len).zip(means.iter_mut()) {
        let mut c = [0u32; 3];
        for &f in chunk {
            c[0] += u32::from(f & FLAG_DIRECT != 0);
            c[1] += u32::from(f & FLAG_ACCEPT != 0);
            c[2] += u32::from(f & FLAG_U2 != 0);
        }
        let len = batch_len as f64;
        let [d, r, u] = c.map(|x| f64::from(x) / len);
        *m = [d, r, d + r, u, d + r + u];
    }

    let k = batches as f64;
    let t = StudentsT::new(0.0, 1.0, k - 1.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.5 + CONFIDENCE / 2.0);
    let mut half = [0.0; 5];
    for (i, h) in half.iter_mut().enumerate() {
        let mean = means.iter().map(|m| m[i]).sum::<f64>() / k;
        let var = means.iter().map(|m| (m[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
        *h = t * (var / k).sqrt();
    }
    Ok(CiHalfwidths {
        t_direct: half[0],
        t_relayed: half[1],
        t_noncacheable: half[2],
        t_cacheable: half[3],
        t_network: half[4],
    })
}

const TRACE_HEADER: [&str; 14] = [
    "slot",
    "c1",
    "cR",
    "request",
    "hit",
    "dc",
    "active",
    "links",
    "successes",
    "queue_before",
    "queue_after",
    "departed_seq",
    "enqueued_seq",
    "dropped",
];

fn link_names(mask: u8) -> String {
    let names: Vec<_> = Link::ALL
        .into_iter()
        .filter(|l| mask & l.bit() != 0)
        .map(|l| {
            let (tx, rx) = l.endpoints();
            format!("{tx}->{rx}")
        })
        .collect();
    names.join(";")
}

fn write_trace<W: Write>(w: &mut csv::Writer<W>, rec: &SlotRecord) -> Result<()> {
    let b = |x: bool| if x { "1" } else { "0" };
    let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
    w.write_record([
        rec.slot.to_string().as_str(),
        b(rec.coins.u1_attempts),
        b(rec.coins.relay_picks_d),
        b(rec.coins.u2_requests),
        b(rec.coins.relay_hit),
        b(rec.coins.dc_available),
        &rec.plan.active.to_string(),
        &link_names(rec.plan.links),
        &link_names(rec.succeeded),
        &rec.queue_before.to_string(),
        &rec.queue_after.to_string(),
        &opt(rec.departed),
        &opt(rec.enqueued),
        b(rec.dropped),
    ])
    .map_err(io_err)
}

fn io_err(e: csv::Error) -> Error {
    Error::Config(format!("trace output: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{build_link_budget, tests::reference_geometry};

    fn budget() -> LinkBudget {
        build_link_budget(&reference_geometry(5.0)).unwrap()
    }

    fn traffic(q1: f64, q_u: f64, p_h: f64) -> TrafficParams {
        TrafficParams {
            q1,
            q_r: 0.8,
            alpha: 0.7,
            q_u,
            p_h,
        }
    }

    #[test]
    fn idle_network() {
        let r = run(
            &budget(),
            &traffic(0.0, 0.0, 0.3),
            5,
            &SimConfig::new(20_000, 1),
        )
        .unwrap();
        assert_eq!(r.counters, Counters::default());
        assert_eq!(r.empirical_pi, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.ci_halfwidth, CiHalfwidths::default());
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = SimConfig::new(50_000, 42);
        let a = run(&budget(), &traffic(0.8, 1.0, 0.4), 4, &cfg).unwrap();
        let b = run(&budget(), &traffic(0.8, 1.0, 0.4), 4, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run(
            &budget(),
            &traffic(0.8, 1.0, 0.4),
            4,
            &SimConfig::new(50_000, 43),
        )
        .unwrap();
        assert_ne!(a.counters, c.counters);
    }

    #[test]
    fn counters_are_consistent() {
        let r = run(
            &budget(),
            &traffic(0.9, 1.0, 0.4),
            2,
            &SimConfig::new(100_000, 3),
        )
        .unwrap();
        let c = r.counters;
        assert_eq!(c.accepted + c.dropped_full, c.relay_arrivals);
        assert!(c.delivered_relayed <= c.accepted + 2);
        assert!(c.dropped_full > 0);
        assert!((r.empirical_pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fcfs_and_bounds() {
        let mut sim = Simulator::new(
            &budget(),
            &traffic(0.9, 1.0, 0.2),
            3,
            SlotSemantics::Blocked,
            9,
        )
        .unwrap();
        let mut last_departed = None;
        let mut drops = 0;
        for _ in 0..200_000 {
            let rec = sim.step();
            assert!(rec.queue_after <= 3);
            if let Some(seq) = rec.departed {
                assert!(last_departed.is_none_or(|l| seq > l));
                last_departed = Some(seq);
            }
            if rec.dropped {
                drops += 1;
                assert_eq!(rec.queue_before, 3);
                assert!(!rec.effect.departure);
            }
        }
        assert!(drops > 0);
    }

    #[test]
    fn trace_has_one_row_per_measured_slot() {
        let mut out = Vec::new();
        let cfg = SimConfig {
            warmup: Some(0),
            ..SimConfig::new(500, 5)
        };
        run_traced(&budget(), &traffic(0.5, 1.0, 0.3), 3, &cfg, Some(&mut out)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 501);
        assert!(lines[0].starts_with("slot,c1,cR"));
    }

    #[test]
    fn invalid_configs() {
        let cfg = SimConfig {
            warmup: Some(10),
            ..SimConfig::new(10, 1)
        };
        assert!(matches!(
            run(&budget(), &traffic(0.5, 1.0, 0.3), 3, &cfg),
            Err(Error::Config(_))
        ));
        let cfg = SimConfig {
            batches: 5,
            ..SimConfig::new(10_000, 1)
        };
        assert!(matches!(
            run(&budget(), &traffic(0.5, 1.0, 0.3), 3, &cfg),
            Err(Error::TooFewBatches { .. })
        ));
        let r = run(
            &budget(),
            &traffic(0.5, 1.0, 0.3),
            3,
            &SimConfig::new(10_000, 1),
        )
        .unwrap();
        assert!(matches!(
            batch_means_ci(1000, &r),
            Err(Error::TooFewBatches { got: 9, .. })
        ));
    }
}
