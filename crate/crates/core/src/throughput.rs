//! Closed-form throughputs at D (non-cacheable) and U2 (cacheable).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainCoefficients, SteadyState, TrafficParams};
use crate::error::Result;
use crate::phy::{LinkBudget, SuccessProbs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    PaperExact,
    Oracle,
    Simulated,
}

impl Source {
    pub fn tag(self) -> &'static str {
        match self {
            Source::PaperExact => "paper-exact",
            Source::Oracle => "oracle",
            Source::Simulated => "simulated",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Throughputs per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    /// U1 -> D directly.
    pub t_direct: f64,
    /// Packets carried through the relay queue.
    pub t_relayed: f64,
    /// Everything D receives: `t_direct + t_relayed`.
    pub t_noncacheable: f64,
    /// Files delivered to U2.
    pub t_cacheable: f64,
    /// `t_noncacheable + t_cacheable`.
    pub t_network: f64,
    pub source: Source,
}

impl ThroughputReport {
    pub fn new(t_direct: f64, t_relayed: f64, t_cacheable: f64, source: Source) -> Self {
        let t_noncacheable = t_direct + t_relayed;
        ThroughputReport {
            t_direct,
            t_relayed,
            t_noncacheable,
            t_cacheable,
            t_network: t_noncacheable + t_cacheable,
            source,
        }
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn metrics(&self) -> [(&'static str, f64); 5] {
        [
            ("T_1D", self.t_direct),
            ("T_R", self.t_relayed),
            ("T_D", self.t_noncacheable),
            ("T_2", self.t_cacheable),
            ("T", self.t_network),
        ]
    }
}

pub fn t_direct(p: &SuccessProbs, t: &TrafficParams, ss: &SteadyState) -> f64 {
    let (q1, qr, qu, ph, al) = (t.q1, t.q_r, t.q_u, t.p_h, t.alpha);
    let (nqu, nph, nal) = (1.0 - qu, 1.0 - ph, 1.0 - al);
    let busy = qr * ss.prob_nonempty;
    q1 * busy * (qu * nph * al * p.u1_d_r_bs + qu * nph * nal * p.u1_d_r + nqu * p.u1_d_r)
        + q1 * (1.0 - busy)
            * (nqu * p.u1_d
                + qu * ph * p.u1_d_r
                + qu * nph * al * p.u1_d_bs
                + qu * nph * nal * p.u1_d)
}

/// Rate at which packets enter the relay queue, which equals the relay's
/// delivery rate to D in steady state. Zero when the relay has no queue.
pub fn t_relayed(p: &SuccessProbs, t: &TrafficParams, ss: &SteadyState) -> f64 {
    if ss.queue_size() == 0 {
        return 0.0;
    }
    let (q1, qr, qu, ph, al) = (t.q1, t.q_r, t.q_u, t.p_h, t.alpha);
    let (nqr, nqu, nph, nal) = (1.0 - qr, 1.0 - qu, 1.0 - ph, 1.0 - al);

    let relay_free = nqu * (1.0 - p.u1_d) * p.u1_r
        + qu * ph * (1.0 - p.u1_d_r) * p.u1_r
        + qu * nph * al * (1.0 - p.u1_d_bs) * p.u1_r_bs
        + qu * nph * nal * (1.0 - p.u1_d) * p.u1_r;

    let empty = q1 * ss.prob_empty() * relay_free;

    let interior_busy = q1
        * ss.prob_interior
        * qr
        * (nqu * (1.0 - p.u1_d_r) * p.u1_r
            + qu * al * (1.0 - p.u1_d_r_bs) * p.u1_r_bs
            + qu * nal * (1.0 - p.u1_d_r) * p.u1_r);

    let interior_free = q1
        * ss.prob_interior
        * nqr
        * (nqu * (1.0 - p.u1_d) * p.u1_r
            + qu * ph * (1.0 - p.u1_d_r) * p.u1_r
            + qu * nph * (al * (1.0 - p.u1_d_bs) * p.u1_r_bs + nal * (1.0 - p.u1_d) * p.u1_r));

    let full = q1
        * ss.prob_full
        * qr
        * (nqu * p.r_d_u1 * (1.0 - p.u1_d_r) * p.u1_r
            + qu * al * p.r_d_u1_bs * (1.0 - p.u1_d_r_bs) * p.u1_r_bs
            + qu * nal * p.r_d_u1 * (1.0 - p.u1_d_r) * p.u1_r);

    empty + interior_busy + interior_free + full
}

pub fn t_cacheable(p: &SuccessProbs, t: &TrafficParams, ss: &SteadyState) -> f64 {
    let (q1, qr, qu, ph, al) = (t.q1, t.q_r, t.q_u, t.p_h, t.alpha);
    let (nq1, nph) = (1.0 - q1, 1.0 - ph);
    let busy = qr * ss.prob_nonempty;
    qu * busy * nph * al * (q1 * p.bs_u2_u1_r + nq1 * p.bs_u2_r)
        + qu * (1.0 - busy) * q1 * (ph * p.r_u2_u1 + nph * al * p.bs_u2_u1)
        + qu * (1.0 - busy) * nq1 * (ph * p.r_u2 + nph * al * p.bs_u2)
}

/// Coefficients, stationary distribution and throughputs of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub coefficients: ChainCoefficients,
    pub steady_state: SteadyState,
    pub report: ThroughputReport,
}

pub fn analyze(p: &SuccessProbs, traffic: &TrafficParams, queue_size: usize) -> Result<Analysis> {
    traffic.validate()?;
    let coefficients = chain::coefficients(p, traffic)?;
    let steady_state = chain::steady_state(&coefficients, queue_size)?;
    let report = ThroughputReport::new(
        t_direct(p, traffic, &steady_state),
        t_relayed(p, traffic, &steady_state),
        t_cacheable(p, traffic, &steady_state),
        Source::PaperExact,
    );
    Ok(Analysis {
        coefficients,
        steady_state,
        report,
    })
}

pub fn report(
    budget: &LinkBudget,
    traffic: &TrafficParams,
    cache: &crate::content::CacheConfig,
) -> Result<ThroughputReport> {
    let probs = SuccessProbs::from_budget(budget)?;
    Ok(analyze(&probs, traffic, cache.queue_size)?.report)
}
