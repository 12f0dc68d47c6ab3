//! Zipf popularity and Collaborative Most Popular Content placement.
//!
//! U2 caches the `M_U` most popular files, the relay the next `F - B`, and the
//! data center holds the whole library.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Library size `N`.
    pub library_size: usize,
    /// Relay storage `F`, shared between queue and cache.
    pub relay_storage: usize,
    /// Relay queue size `B`.
    pub queue_size: usize,
    /// U2's local cache `M_U`.
    pub user_cache: usize,
    /// Zipf shape `δ`.
    pub zipf_shape: f64,
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        if self.library_size == 0 {
            return Err(Error::Config("library size must be >= 1".into()));
        }
        if self.queue_size > self.relay_storage {
            return Err(Error::Config(format!(
                "queue size {} exceeds relay storage {}",
                self.queue_size, self.relay_storage
            )));
        }
        if self.user_cache + self.relay_storage > self.library_size {
            return Err(Error::Config(format!(
                "user cache {} + relay storage {} exceed library size {}",
                self.user_cache, self.relay_storage, self.library_size
            )));
        }
        if !(self.zipf_shape >= 0.0 && self.zipf_shape.is_finite()) {
            return Err(Error::Config(format!(
                "zipf shape must be >= 0, got {}",
                self.zipf_shape
            )));
        }
        Ok(())
    }

    /// Number of files cached at the relay, `F - B`.
    pub fn relay_cache_slots(&self) -> usize {
        self.relay_storage.saturating_sub(self.queue_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    /// `pmf[i - 1]` is the request probability of the `i`-th most popular file.
    pub pmf: Vec<f64>,
    /// Normalization `Ω = 1 / Σ j^-δ`.
    pub normalization: f64,
}

pub fn zipf_pmf(cfg: &CacheConfig) -> Result<PopularityModel> {
    if cfg.library_size == 0 {
        return Err(Error::Config("library size must be >= 1".into()));
    }
    let weight = |j: usize| (j as f64).powf(-cfg.zipf_shape);
    // Smallest terms first.
    let total: f64 = (1..=cfg.library_size).rev().map(weight).sum();
    let normalization = total.recip();
    let pmf = (1..=cfg.library_size)
        .map(|i| normalization * weight(i))
        .collect();
    Ok(PopularityModel { pmf, normalization })
}

impl PopularityModel {
    /// Probability mass of the 1-based ranks in `ranks`, clamped to the library.
    fn mass(&self, ranks: RangeInclusive<usize>) -> f64 {
        let (lo, hi) = (*ranks.start(), (*ranks.end()).min(self.pmf.len()));
        if lo > hi || lo == 0 {
            return 0.0;
        }
        self.pmf[lo - 1..hi].iter().sum()
    }
}

/// `q_U`: probability that U2 asks external resources for a file.
pub fn external_request_prob(pm: &PopularityModel, cfg: &CacheConfig) -> f64 {
    (1.0 - pm.mass(1..=cfg.user_cache)).clamp(0.0, 1.0)
}

/// `p_h`: unconditional probability that a request targets a relay-cached file.
pub fn relay_hit_prob(pm: &PopularityModel, cfg: &CacheConfig) -> f64 {
    let first = cfg.user_cache + 1;
    let last = cfg.user_cache + cfg.relay_cache_slots();
    pm.mass(first..=last).clamp(0.0, 1.0)
}

/// File ranks (1-based) held by U2 and by the relay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub user: RangeInclusive<usize>,
    pub relay: RangeInclusive<usize>,
}

impl Placement {
    pub fn user_len(&self) -> usize {
        self.user.clone().count()
    }

    pub fn relay_len(&self) -> usize {
        self.relay.clone().count()
    }
}

#[allow(clippy::reversed_empty_ranges)]
pub fn cmpc_placement(cfg: &CacheConfig) -> Placement {
    let user_end = cfg.user_cache;
    let relay_end = cfg.user_cache + cfg.relay_cache_slots();
    Placement {
        user: 1..=user_end,
        relay: user_end + 1..=relay_end,
    }
}

/// `(q_U, p_h)` derived from the cache configuration.
pub fn derive_request_probs(cfg: &CacheConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let pm = zipf_pmf(cfg)?;
    Ok((external_request_prob(&pm, cfg), relay_hit_prob(&pm, cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n: usize, f: usize, b: usize, mu: usize, delta: f64) -> CacheConfig {
        CacheConfig {
            library_size: n,
            relay_storage: f,
            queue_size: b,
            user_cache: mu,
            zipf_shape: delta,
        }
    }

    // Independent summation in the opposite order.
    fn omega_oracle(n: usize, delta: f64) -> f64 {
        let mut s = 0.0;
        for j in 1..=n {
            s += 1.0 / (j as f64).powf(delta);
        }
        1.0 / s
    }

    #[test]
    fn flat_and_harmonic() {
        let pm = zipf_pmf(&cfg(4, 0, 0, 0, 0.0)).unwrap();
        assert_eq!(pm.pmf, vec![0.25; 4]);
        let pm = zipf_pmf(&cfg(2, 0, 0, 0, 1.0)).unwrap();
        assert!((pm.pmf[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pm.pmf[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn omega_for_reference_library() {
        let pm = zipf_pmf(&cfg(10_000, 10, 5, 0, 1.2)).unwrap();
        let oracle = omega_oracle(10_000, 1.2);
        assert!((pm.normalization - oracle).abs() < 1e-12);
        assert!((pm.normalization - 0.2084).abs() < 5e-4);
    }

    #[test]
    fn empty_library_rejected() {
        assert!(zipf_pmf(&cfg(0, 0, 0, 0, 1.0)).is_err());
    }

    #[test]
    fn external_request_cases() {
        let c = cfg(10_000, 10, 10, 0, 0.5);
        let pm = zipf_pmf(&c).unwrap();
        assert_eq!(external_request_prob(&pm, &c), 1.0);

        let c = cfg(10_000, 10, 10, 5, 0.5);
        let pm = zipf_pmf(&c).unwrap();
        let q_u = external_request_prob(&pm, &c);
        assert!((q_u - 0.984).abs() < 5e-4, "{q_u}");

        let c = cfg(8, 0, 0, 8, 0.9);
        let pm = zipf_pmf(&c).unwrap();
        assert!(external_request_prob(&pm, &c).abs() < 1e-15);
    }

    #[test]
    fn relay_hit_cases() {
        let c = cfg(10_000, 10, 10, 0, 1.2);
        let pm = zipf_pmf(&c).unwrap();
        assert_eq!(relay_hit_prob(&pm, &c), 0.0);

        let c = cfg(10_000, 10, 5, 0, 1.2);
        let pm = zipf_pmf(&c).unwrap();
        let omega = omega_oracle(10_000, 1.2);
        let oracle: f64 = (1..=5).map(|i| omega / (i as f64).powf(1.2)).sum();
        let p_h = relay_hit_prob(&pm, &c);
        assert!((p_h - oracle).abs() < 1e-12);
        assert!((p_h - 0.425).abs() < 2e-3, "{p_h}");

        let c = cfg(1000, 10, 3, 5, 0.0);
        let pm = zipf_pmf(&c).unwrap();
        assert!((relay_hit_prob(&pm, &c) - 7.0 / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn placements() {
        let p = cmpc_placement(&cfg(100, 10, 3, 5, 1.0));
        assert_eq!((p.user.clone(), p.relay.clone()), (1..=5, 6..=12));
        let p = cmpc_placement(&cfg(100, 10, 10, 0, 1.0));
        assert_eq!((p.user_len(), p.relay_len()), (0, 0));
        let p = cmpc_placement(&cfg(100, 10, 0, 5, 1.0));
        assert_eq!(p.relay, 6..=15);
    }

    #[test]
    fn validation() {
        assert!(cfg(100, 10, 11, 0, 1.0).validate().is_err());
        assert!(cfg(100, 10, 5, 91, 1.0).validate().is_err());
        assert!(cfg(100, 10, 5, 90, 1.0).validate().is_ok());
        assert!(cfg(100, 10, 5, 0, -0.1).validate().is_err());
    }

    #[test]
    fn q_u_decreases_with_shape() {
        let mut last = f64::INFINITY;
        for k in 0..=30 {
            let c = cfg(10_000, 10, 5, 5, k as f64 * 0.1);
            let pm = zipf_pmf(&c).unwrap();
            let q_u = external_request_prob(&pm, &c);
            assert!(q_u <= last + 1e-15);
            last = q_u;
        }
    }

    proptest! {
        #[test]
        fn pmf_is_normalized_and_sorted(n in 1usize..3000, delta in 0.0f64..3.0) {
            let pm = zipf_pmf(&cfg(n, 0, 0, 0, delta)).unwrap();
            let total: f64 = pm.pmf.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(pm.pmf.windows(2).all(|w| w[1] <= w[0]));
        }

        #[test]
        fn sets_match_scalars(n in 20usize..2000, f in 0usize..10, b_frac in 0.0f64..=1.0, mu in 0usize..10, delta in 0.0f64..2.0) {
            let b = (b_frac * f as f64).round() as usize;
            let c = cfg(n, f, b, mu, delta);
            let pm = zipf_pmf(&c).unwrap();
            let place = cmpc_placement(&c);
            let in_user: f64 = pm.pmf.iter().enumerate().filter(|(i, _)| place.user.contains(&(i + 1))).map(|(_, p)| p).sum();
            let in_relay: f64 = pm.pmf.iter().enumerate().filter(|(i, _)| place.relay.contains(&(i + 1))).map(|(_, p)| p).sum();
            let q_u = external_request_prob(&pm, &c);
            prop_assert!((in_user + q_u - 1.0).abs() < 1e-12);
            prop_assert!((in_relay - relay_hit_prob(&pm, &c)).abs() < 1e-12);
            prop_assert!(place.user.end() < place.relay.start());
        }

        #[test]
        fn hit_prob_shrinks_with_queue(mu in 0usize..10, delta in 0.0f64..2.0) {
            let mut last = f64::INFINITY;
            for b in 0..=10 {
                let c = cfg(5000, 10, b, mu, delta);
                let p_h = relay_hit_prob(&zipf_pmf(&c).unwrap(), &c);
                prop_assert!(p_h <= last);
                last = p_h;
            }
        }
    }
}
