//! Exact per-slot enumeration of the network's random events.
//!
//! Each slot draws five independent coins: U1 attempts (`q1`), the relay
//! picks D (`qR`), U2 requests externally (`qU`), the request hits the relay
//! cache (`ph`), the data center is up (`α`). The coins fix the set of active
//! transmitters; every active link then succeeds independently with its
//! interference-conditioned probability. Summing over all outcomes gives the
//! exact queue transition probabilities and per-slot delivery rates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{self, BirthDeathChain, SteadyState, TrafficParams};
use crate::error::{Error, Result};
use crate::phy::{LinkBudget, Node, NodeSet, SuccessProbs};
use crate::throughput::{self, Source, ThroughputReport};

/// What happens when U2's request hits the relay cache while the relay is
/// serving D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotSemantics {
    /// The request goes unserved this slot.
    #[default]
    Blocked,
    /// The request falls back to the data center.
    DataCenter,
}

impl SlotSemantics {
    pub fn name(self) -> &'static str {
        match self {
            SlotSemantics::Blocked => "blocked",
            SlotSemantics::DataCenter => "data-center",
        }
    }
}

impl fmt::Display for SlotSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlotSemantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blocked" => Ok(SlotSemantics::Blocked),
            "data-center" | "data_center" => Ok(SlotSemantics::DataCenter),
            _ => Err(Error::Config(format!("unknown semantics '{s}'"))),
        }
    }
}

/// Links that can be active in a slot, in the fixed draw order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    U1ToD,
    U1ToR,
    RToD,
    RToU2,
    BsToU2,
}

impl Link {
    pub const ALL: [Link; 5] = [
        Link::U1ToD,
        Link::U1ToR,
        Link::RToD,
        Link::RToU2,
        Link::BsToU2,
    ];

    pub fn endpoints(self) -> (Node, Node) {
        match self {
            Link::U1ToD => (Node::U1, Node::D),
            Link::U1ToR => (Node::U1, Node::R),
            Link::RToD => (Node::R, Node::D),
            Link::RToU2 => (Node::R, Node::U2),
            Link::BsToU2 => (Node::BS, Node::U2),
        }
    }

    pub fn bit(self) -> u8 {
        1 << self as u8
    }
}

/// The five per-slot coins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Coins {
    pub u1_attempts: bool,
    pub relay_picks_d: bool,
    pub u2_requests: bool,
    pub relay_hit: bool,
    pub dc_available: bool,
}

impl Coins {
    pub fn from_bits(bits: u8) -> Self {
        Coins {
            u1_attempts: bits & 1 != 0,
            relay_picks_d: bits & 2 != 0,
            u2_requests: bits & 4 != 0,
            relay_hit: bits & 8 != 0,
            dc_available: bits & 16 != 0,
        }
    }

    pub fn weight(&self, t: &TrafficParams) -> f64 {
        let pick = |c: bool, p: f64| if c { p } else { 1.0 - p };
        pick(self.u1_attempts, t.q1)
            * pick(self.relay_picks_d, t.q_r)
            * pick(self.u2_requests, t.q_u)
            * pick(self.relay_hit, t.p_h)
            * pick(self.dc_available, t.alpha)
    }
}

/// Transmissions scheduled in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotPlan {
    pub active: NodeSet,
    /// Bitmask over [`Link::bit`].
    pub links: u8,
    /// A cache hit found the relay busy with D.
    pub hit_while_busy: bool,
}

impl SlotPlan {
    pub fn new(coins: Coins, queue_nonempty: bool, sem: SlotSemantics) -> Self {
        let mut active = NodeSet::EMPTY;
        let mut links = 0u8;
        let relay_busy = coins.relay_picks_d && queue_nonempty;
        if coins.u1_attempts {
            active.insert(Node::U1);
            links |= Link::U1ToD.bit() | Link::U1ToR.bit();
        }
        if relay_busy {
            active.insert(Node::R);
            links |= Link::RToD.bit();
        }
        let hit = coins.u2_requests && coins.relay_hit;
        if hit && !relay_busy {
            active.insert(Node::R);
            links |= Link::RToU2.bit();
        }
        let to_dc = match sem {
            SlotSemantics::Blocked => !coins.relay_hit,
            SlotSemantics::DataCenter => !coins.relay_hit || relay_busy,
        };
        if coins.u2_requests && coins.dc_available && to_dc {
            active.insert(Node::BS);
            links |= Link::BsToU2.bit();
        }
        SlotPlan {
            active,
            links,
            hit_while_busy: hit && relay_busy,
        }
    }

    pub fn has(&self, link: Link) -> bool {
        self.links & link.bit() != 0
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        Link::ALL.into_iter().filter(|l| self.has(*l))
    }
}

/// What the queue and the receivers see once link outcomes are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEffect {
    pub direct: bool,
    pub departure: bool,
    /// U1's packet missed D but reached R.
    pub arrival: bool,
    pub accepted: bool,
    pub u2_served: bool,
}

impl SlotEffect {
    /// `succeeded` is a bitmask over [`Link::bit`], restricted to active links.
    pub fn resolve(succeeded: u8, queue: usize, queue_size: usize) -> Self {
        let ok = |l: Link| succeeded & l.bit() != 0;
        let direct = ok(Link::U1ToD);
        let departure = ok(Link::RToD);
        let arrival = !direct && ok(Link::U1ToR);
        let accepted = arrival && (queue < queue_size || departure);
        SlotEffect {
            direct,
            departure,
            arrival,
            accepted,
            u2_served: ok(Link::RToU2) || ok(Link::BsToU2),
        }
    }

    pub fn delta(&self) -> i8 {
        i8::from(self.accepted) - i8::from(self.departure)
    }
}

/// Exact one-slot outcome probabilities for a given queue length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotOutcome {
    pub down: f64,
    pub stay: f64,
    pub up: f64,
    pub rate_direct: f64,
    pub rate_accept: f64,
    pub rate_depart: f64,
    pub rate_u2: f64,
}

pub fn enumerate_slot(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    sem: SlotSemantics,
    queue: usize,
    queue_size: usize,
) -> Result<SlotOutcome> {
    let mut out = SlotOutcome::default();
    for bits in 0u8..32 {
        let coins = Coins::from_bits(bits);
        let w = coins.weight(traffic);
        if w == 0.0 {
            continue;
        }
        let plan = SlotPlan::new(coins, queue > 0, sem);
        let links: Vec<(Link, f64)> = plan
            .links()
            .map(|l| {
                let (tx, rx) = l.endpoints();
                budget.success_prob(tx, rx, plan.active).map(|p| (l, p))
            })
            .collect::<Result<_>>()?;
        for pattern in 0u32..(1 << links.len()) {
            let mut p = w;
            let mut succeeded = 0u8;
            for (k, &(link, ps)) in links.iter().enumerate() {
                if pattern & (1 << k) != 0 {
                    p *= ps;
                    succeeded |= link.bit();
                } else {
                    p *= 1.0 - ps;
                }
            }
            let e = SlotEffect::resolve(succeeded, queue, queue_size);
            match e.delta() {
                -1 => out.down += p,
                1 => out.up += p,
                _ => out.stay += p,
            }
            if e.direct {
                out.rate_direct += p;
            }
            if e.accepted {
                out.rate_accept += p;
            }
            if e.departure {
                out.rate_depart += p;
            }
            if e.u2_served {
                out.rate_u2 += p;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAnalysis {
    /// Outcome probabilities indexed by queue length.
    pub outcomes: Vec<SlotOutcome>,
    pub steady_state: SteadyState,
    pub report: ThroughputReport,
}

impl OracleAnalysis {
    pub fn chain(&self) -> BirthDeathChain {
        BirthDeathChain {
            up: self.outcomes.iter().map(|o| o.up).collect(),
            down: self.outcomes.iter().map(|o| o.down).collect(),
        }
    }

    /// The exact counterparts of `(a1, b0, b2)`, read at queue length 1.
    pub fn coefficients(&self) -> (f64, Option<f64>, Option<f64>) {
        let b = self.outcomes.len() - 1;
        let a1 = self.outcomes[0].up;
        let b0 = (b >= 1).then(|| self.outcomes[1].down);
        let b2 = (b >= 2).then(|| self.outcomes[1].up);
        (a1, b0, b2)
    }

    /// Steady-state rate of relay deliveries to D.
    pub fn departure_rate(&self) -> f64 {
        weighted(&self.steady_state.pi, &self.outcomes, |o| o.rate_depart)
    }
}

fn weighted(pi: &[f64], outcomes: &[SlotOutcome], f: impl Fn(&SlotOutcome) -> f64) -> f64 {
    pi.iter().zip(outcomes).map(|(p, o)| p * f(o)).sum()
}

pub fn oracle_analysis(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    queue_size: usize,
    sem: SlotSemantics,
) -> Result<OracleAnalysis> {
    traffic.validate()?;
    let outcomes = (0..=queue_size)
        .map(|q| enumerate_slot(budget, traffic, sem, q, queue_size))
        .collect::<Result<Vec<_>>>()?;
    let chain = BirthDeathChain {
        up: outcomes.iter().map(|o| o.up).collect(),
        down: outcomes.iter().map(|o| o.down).collect(),
    };
    let steady_state = SteadyState::from_pi(chain.stationary()?);
    let pi = &steady_state.pi;
    let report = ThroughputReport::new(
        weighted(pi, &outcomes, |o| o.rate_direct),
        weighted(pi, &outcomes, |o| o.rate_accept),
        weighted(pi, &outcomes, |o| o.rate_u2),
        Source::Oracle,
    );
    Ok(OracleAnalysis {
        outcomes,
        steady_state,
        report,
    })
}

pub fn oracle_report(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    cache: &crate::content::CacheConfig,
    sem: SlotSemantics,
) -> Result<ThroughputReport> {
    Ok(oracle_analysis(budget, traffic, cache.queue_size, sem)?.report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyRow {
    pub quantity: &'static str,
    /// Queue length the quantity is read at, for chain coefficients.
    pub state: Option<usize>,
    pub paper: f64,
    pub oracle: f64,
}

impl DiscrepancyRow {
    pub fn delta(&self) -> f64 {
        self.paper - self.oracle
    }
}

/// Printed formulas against exhaustive enumeration, quantity by quantity.
pub fn discrepancy_report(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    queue_size: usize,
    sem: SlotSemantics,
) -> Result<Vec<DiscrepancyRow>> {
    let probs = SuccessProbs::from_budget(budget)?;
    let paper = throughput::analyze(&probs, traffic, queue_size)?;
    let exact = oracle_analysis(budget, traffic, queue_size, sem)?;
    let co = &paper.coefficients;
    let b = queue_size;

    // Without a queue there is no 0 -> 1 transition to compare.
    let mut rows = Vec::new();
    if b >= 1 {
        rows.push(DiscrepancyRow {
            quantity: "a1",
            state: Some(0),
            paper: co.a1,
            oracle: exact.outcomes[0].up,
        });
        rows.push(DiscrepancyRow {
            quantity: "b0",
            state: Some(1),
            paper: co.b0,
            oracle: exact.outcomes[1].down,
        });
    }
    if b >= 2 {
        rows.push(DiscrepancyRow {
            quantity: "b2",
            state: Some(1),
            paper: co.b2,
            oracle: exact.outcomes[1].up,
        });
        rows.push(DiscrepancyRow {
            quantity: "b0",
            state: Some(b),
            paper: co.b0,
            oracle: exact.outcomes[b].down,
        });
    }
    for (i, (p, o)) in paper
        .steady_state
        .pi
        .iter()
        .zip(&exact.steady_state.pi)
        .enumerate()
    {
        rows.push(DiscrepancyRow {
            quantity: "pi",
            state: Some(i),
            paper: *p,
            oracle: *o,
        });
    }
    for ((name, p), (_, o)) in paper
        .report
        .metrics()
        .into_iter()
        .zip(exact.report.metrics())
    {
        rows.push(DiscrepancyRow {
            quantity: name,
            state: None,
            paper: p,
            oracle: o,
        });
    }
    Ok(rows)
}

/// Paper-exact steady state for `traffic`, for callers comparing against the oracle.
pub fn paper_steady_state(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    queue_size: usize,
) -> Result<SteadyState> {
    let probs = SuccessProbs::from_budget(budget)?;
    let co = chain::coefficients(&probs, traffic)?;
    chain::steady_state(&co, queue_size)
}
