//! The relay queue as a discrete-time birth–death chain on `0..=B`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::SuccessProbs;

/// Per-slot attempt and availability probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    /// U1 attempts a non-cacheable transmission.
    pub q1: f64,
    /// The relay is available to serve D.
    pub q_r: f64,
    /// The data center is available to U2.
    pub alpha: f64,
    /// U2 requests a file from external resources.
    pub q_u: f64,
    /// The request hits the relay cache.
    pub p_h: f64,
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q1", self.q1),
            ("qR", self.q_r),
            ("alpha", self.alpha),
            ("qU", self.q_u),
            ("ph", self.p_h),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCoefficients {
    /// Growth probability from the empty state.
    pub a1: f64,
    /// Departure probability from any non-empty state.
    pub b0: f64,
    pub b1: f64,
    /// Growth probability from a non-empty, non-full state.
    pub b2: f64,
    /// `b2 / b0`, undefined when `b0 = 0`.
    pub rho: Option<f64>,
    /// `a1 / b0`, undefined when `b0 = 0`.
    pub t0: Option<f64>,
}

impl ChainCoefficients {
    /// Builds the coefficient set, deriving `b1`, `rho` and `t0`.
    pub fn new(a1: f64, b0: f64, b2: f64) -> Result<Self> {
        let mut b1 = 1.0 - b0 - b2;
        if b1 < -1e-12 {
            return Err(Error::ModelInconsistency { sum: b0 + b2 });
        }
        b1 = b1.max(0.0);
        let (rho, t0) = if b0 > 0.0 {
            (Some(b2 / b0), Some(a1 / b0))
        } else {
            (None, None)
        };
        Ok(ChainCoefficients {
            a1,
            b0,
            b1,
            b2,
            rho,
            t0,
        })
    }
}

/// Transition coefficients of the relay queue, term by term as in the
/// reference analysis. Branches where U2's request hits the relay cache while
/// the relay serves D are absent from `b0` and `b2`; see `oracle` for the
/// exhaustive version.
pub fn coefficients(p: &SuccessProbs, t: &TrafficParams) -> Result<ChainCoefficients> {
    let (q1, qr, qu, ph, al) = (t.q1, t.q_r, t.q_u, t.p_h, t.alpha);
    let (nq1, nqr, nqu, nph, nal) = (1.0 - q1, 1.0 - qr, 1.0 - qu, 1.0 - ph, 1.0 - al);

    let a1 = q1 * nqu * (1.0 - p.u1_d) * p.u1_r
        + q1 * qu * ph * (1.0 - p.u1_d_r) * p.u1_r
        + q1 * qu * nph * al * (1.0 - p.u1_d_bs) * p.u1_r_bs
        + q1 * qu * nph * nal * (1.0 - p.u1_d) * p.u1_r;

    // Relay delivers to D while U1's packet either reaches D or misses R.
    let no_arrival_r = p.u1_d_r + (1.0 - p.u1_d_r) * (1.0 - p.u1_r);
    let no_arrival_r_bs = p.u1_d_r_bs + (1.0 - p.u1_d_r_bs) * (1.0 - p.u1_r_bs);
    let b0 = qr * nq1 * (nqu * p.r_d + qu * nph * (al * p.r_d_bs + nal * p.r_d))
        + qr * q1 * nqu * (p.r_d_u1 * no_arrival_r)
        + qr * q1
            * qu
            * nph
            * (al * (p.r_d_u1_bs * no_arrival_r_bs) + nal * (p.r_d_u1 * no_arrival_r));

    let b2 = q1 * qr * nqu * (1.0 - p.r_d_u1) * (1.0 - p.u1_d_r) * p.u1_r
        + q1 * qr * qu * nph * al * (1.0 - p.r_d_u1_bs) * (1.0 - p.u1_d_r_bs) * p.u1_r_bs
        + q1 * qr * qu * nph * nal * (1.0 - p.r_d_u1) * (1.0 - p.u1_d_r) * p.u1_r
        + q1 * nqr * (nqu * (1.0 - p.u1_d) * p.u1_r + qu * ph * (1.0 - p.u1_d_r) * p.u1_r)
        + q1 * nqr * qu * nph * al * (1.0 - p.u1_d_bs) * p.u1_r_bs
        + q1 * nqr * qu * nph * nal * (1.0 - p.u1_d) * p.u1_r;

    ChainCoefficients::new(a1, b0, b2)
}

/// Stationary distribution of the queue plus the aggregates the throughput
/// formulas consume.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    pub prob_nonempty: f64,
    pub prob_interior: f64,
    pub prob_full: f64,
}

impl SteadyState {
    pub fn from_pi(pi: Vec<f64>) -> Self {
        let b = pi.len() - 1;
        let prob_nonempty = pi[1..].iter().sum();
        let prob_interior = if b >= 2 { pi[1..b].iter().sum() } else { 0.0 };
        let prob_full = pi[b];
        SteadyState {
            pi,
            prob_nonempty,
            prob_interior,
            prob_full,
        }
    }

    pub fn queue_size(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn prob_empty(&self) -> f64 {
        self.pi[0]
    }

    /// `P(Q > k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.pi.iter().skip(k + 1).sum()
    }
}

/// `π_i = ρ^(i-1) t0 π_0` with the geometric normalization.
pub fn steady_state_closed(co: &ChainCoefficients, queue_size: usize) -> Result<SteadyState> {
    let (Some(rho), Some(t0)) = (co.rho, co.t0) else {
        return Err(Error::ZeroDeparture { b0: co.b0 });
    };
    if queue_size == 0 {
        return Err(Error::Config(
            "closed-form steady state needs B >= 1".into(),
        ));
    }
    let b = queue_size as i32;
    let geometric = if (1.0 - rho).abs() < 1e-9 {
        f64::from(b)
    } else {
        (1.0 - rho.powi(b)) / (1.0 - rho)
    };
    let pi0 = 1.0 / (1.0 + t0 * geometric);
    let pi = std::iter::once(pi0)
        .chain((1..=b).map(|i| rho.powi(i - 1) * t0 * pi0))
        .collect();
    Ok(SteadyState::from_pi(pi))
}

/// Solves `Pπ = π, Σπ = 1` on the chain built from `co`.
pub fn steady_state_numeric(co: &ChainCoefficients, queue_size: usize) -> Result<SteadyState> {
    let chain = BirthDeathChain::from_coefficients(co, queue_size);
    Ok(SteadyState::from_pi(chain.stationary()?))
}

/// Closed form when it applies, the linear solve otherwise.
pub fn steady_state(co: &ChainCoefficients, queue_size: usize) -> Result<SteadyState> {
    if queue_size == 0 {
        return Ok(SteadyState::from_pi(vec![1.0]));
    }
    match steady_state_closed(co, queue_size) {
        Err(Error::ZeroDeparture { .. }) => steady_state_numeric(co, queue_size),
        other => other,
    }
}

/// A birth–death chain on `0..=B` with state-dependent step probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChain {
    /// `up[q]`: probability of `q -> q + 1`; `up[B]` is 0.
    pub up: Vec<f64>,
    /// `down[q]`: probability of `q -> q - 1`; `down[0]` is 0.
    pub down: Vec<f64>,
}

impl BirthDeathChain {
    pub fn from_coefficients(co: &ChainCoefficients, queue_size: usize) -> Self {
        let b = queue_size;
        let up = (0..=b)
            .map(|q| match q {
                _ if q == b => 0.0,
                0 => co.a1,
                _ => co.b2,
            })
            .collect();
        let down = (0..=b).map(|q| if q == 0 { 0.0 } else { co.b0 }).collect();
        BirthDeathChain { up, down }
    }

    pub fn queue_size(&self) -> usize {
        self.up.len() - 1
    }

    /// Column-stochastic transition matrix: entry `(i, j)` is `P(j -> i)`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.up.len();
        let mut m = DMatrix::zeros(n, n);
        for q in 0..n {
            m[(q, q)] = 1.0 - self.up[q] - self.down[q];
            if q + 1 < n {
                m[(q + 1, q)] = self.up[q];
            }
            if q > 0 {
                m[(q - 1, q)] = self.down[q];
            }
        }
        m
    }

    /// `‖Pπ − π‖∞`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let p = self.transition_matrix();
        let v = DVector::from_column_slice(pi);
        (&p * &v - &v).amax()
    }

    /// Stationary distribution reached from an empty queue.
    ///
    /// States above the first one with `up = 0` are unreachable from 0 and
    /// get zero mass; on the reachable block exactly one class is closed, so
    /// the normalized balance system is nonsingular.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.up.len();
        let reach = self.up.iter().position(|&u| u <= 0.0).unwrap_or(n - 1) + 1;
        let p = self.transition_matrix();
        let mut a = p.view((0, 0), (reach, reach)) - DMatrix::identity(reach, reach);
        a.row_mut(reach - 1).fill(1.0);
        let mut rhs = DVector::zeros(reach);
        rhs[reach - 1] = 1.0;
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular balance system".into()))?;
        let mut pi = vec![0.0; n];
        for (dst, &x) in pi.iter_mut().zip(sol.iter()) {
            // Round-off can leave -1e-17 on states with no mass.
            *dst = x.max(0.0);
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        let res = self.residual(&pi);
        // NaN fails this check too.
        if res.is_nan() || res > 1e-10 {
            return Err(Error::Numerical(format!("stationary residual {res:e}")));
        }
        Ok(pi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn co(a1: f64, b0: f64, b2: f64) -> ChainCoefficients {
        ChainCoefficients::new(a1, b0, b2).unwrap()
    }

    #[test]
    fn no_arrivals_without_u1() {
        let probs = SuccessProbs::from_budget(
            &crate::phy::build_link_budget(&crate::phy::tests::reference_geometry(5.0)).unwrap(),
        )
        .unwrap();
        let t = TrafficParams {
            q1: 0.0,
            q_r: 0.8,
            alpha: 0.7,
            q_u: 0.9,
            p_h: 0.3,
        };
        let c = coefficients(&probs, &t).unwrap();
        assert_eq!((c.a1, c.b2), (0.0, 0.0));
        assert!((c.b1 - (1.0 - c.b0)).abs() < 1e-15);

        let t = TrafficParams {
            q1: 0.6,
            q_u: 1.0,
            p_h: 1.0,
            ..t
        };
        let c = coefficients(&probs, &t).unwrap();
        let want = 0.6 * (1.0 - probs.u1_d_r) * probs.u1_r;
        assert!((c.a1 - want).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_coefficients() {
        assert!(matches!(
            ChainCoefficients::new(0.1, 0.7, 0.4),
            Err(Error::ModelInconsistency { .. })
        ));
        let c = ChainCoefficients::new(0.1, 0.0, 0.4).unwrap();
        assert_eq!((c.rho, c.t0), (None, None));
        assert!(matches!(
            steady_state_closed(&c, 3),
            Err(Error::ZeroDeparture { .. })
        ));
    }

    #[test]
    fn closed_form_cases() {
        let s = steady_state_closed(&co(0.0, 0.3, 0.2), 4).unwrap();
        assert_eq!(s.pi, vec![1.0, 0.0, 0.0, 0.0, 0.0]);

        let c = co(0.3, 0.4, 0.1);
        let s = steady_state_closed(&c, 1).unwrap();
        let t0 = 0.75;
        assert!((s.pi[0] - 1.0 / (1.0 + t0)).abs() < 1e-15);
        assert!((s.pi[1] - t0 / (1.0 + t0)).abs() < 1e-15);

        let s = steady_state_closed(&co(0.25, 0.25, 0.25), 4).unwrap();
        for p in &s.pi {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_three_state_chain() {
        let c = co(0.2, 0.4, 0.2);
        let closed = steady_state_closed(&c, 2).unwrap();
        let numeric = steady_state_numeric(&c, 2).unwrap();
        let want = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (i, w) in want.iter().enumerate() {
            assert!((closed.pi[i] - w).abs() < 1e-15);
            assert!((numeric.pi[i] - w).abs() < 1e-14);
        }
        assert!((closed.prob_nonempty - 3.0 / 7.0).abs() < 1e-15);
        assert!((closed.prob_interior - 2.0 / 7.0).abs() < 1e-15);
        assert!((closed.prob_full - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_queue() {
        let s = steady_state_numeric(&co(0.3, 0.2, 0.1), 0).unwrap();
        assert_eq!(s.pi, vec![1.0]);
        assert_eq!(s.prob_nonempty, 0.0);
        assert_eq!(steady_state(&co(0.3, 0.2, 0.1), 0).unwrap().pi, vec![1.0]);
    }

    #[test]
    fn absorbing_boundary_fallback() {
        // No departures: everything piles up at B.
        let c = co(0.3, 0.0, 0.2);
        let s = steady_state(&c, 4).unwrap();
        assert_eq!(s.pi, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        // No departures and no growth past 1.
        let s = steady_state(&co(0.3, 0.0, 0.0), 4).unwrap();
        assert_eq!(s.pi, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        // Nothing moves at all: stays empty.
        let s = steady_state(&co(0.0, 0.0, 0.0), 4).unwrap();
        assert_eq!(s.pi, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn columns_are_stochastic() {
        let chain = BirthDeathChain::from_coefficients(&co(0.35, 0.25, 0.15), 5);
        let p = chain.transition_matrix();
        for j in 0..6 {
            assert!((p.column(j).sum() - 1.0).abs() < 1e-15);
        }
        assert!((p[(0, 0)] - 0.65).abs() < 1e-15);
        assert!((p[(5, 5)] - 0.75).abs() < 1e-15);
    }

    fn valid_coefficients() -> impl Strategy<Value = (ChainCoefficients, usize)> {
        (0.0f64..=1.0, 1e-3f64..=1.0, 0.0f64..=1.0, 1usize..=10).prop_map(|(a1, b0, frac, b)| {
            let b2 = frac * (1.0 - b0);
            (ChainCoefficients::new(a1, b0, b2).unwrap(), b)
        })
    }

    proptest! {
        #[test]
        fn closed_matches_numeric((c, b) in valid_coefficients()) {
            let closed = steady_state_closed(&c, b).unwrap();
            let numeric = steady_state_numeric(&c, b).unwrap();
            for (x, y) in closed.pi.iter().zip(&numeric.pi) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
            let chain = BirthDeathChain::from_coefficients(&c, b);
            prop_assert!(chain.residual(&numeric.pi) <= 1e-12);
            prop_assert!((numeric.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn detailed_balance((c, b) in valid_coefficients()) {
            let s = steady_state_closed(&c, b).unwrap();
            prop_assert!((c.a1 * s.pi[0] - c.b0 * s.pi[1]).abs() <= 1e-12);
            for i in 1..b {
                prop_assert!((c.b2 * s.pi[i] - c.b0 * s.pi[i + 1]).abs() <= 1e-12);
            }
        }
    }
}
