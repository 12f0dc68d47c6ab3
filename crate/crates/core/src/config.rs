//! Experiment configuration files (JSON).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::TrafficParams;
use crate::content::{self, CacheConfig};
use crate::error::{Error, Result};
use crate::phy::{self, LinkBudget, NetworkGeometry, SuccessProbs};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub q1: f64,
    #[serde(rename = "qR")]
    pub q_r: f64,
    pub alpha: f64,
    /// Overrides the Zipf-derived external request probability.
    #[serde(rename = "qU", default, skip_serializing_if = "Option::is_none")]
    pub q_u: Option<f64>,
    /// Overrides the Zipf-derived relay hit probability.
    #[serde(rename = "ph", default, skip_serializing_if = "Option::is_none")]
    pub p_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    B,
    #[serde(rename = "q1")]
    Q1,
    #[serde(rename = "qR")]
    QR,
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "M_U")]
    UserCache,
    #[serde(rename = "theta_db")]
    ThetaDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::B => "B",
            SweepParam::Q1 => "q1",
            SweepParam::QR => "qR",
            SweepParam::Delta => "delta",
            SweepParam::UserCache => "M_U",
            SweepParam::ThetaDb => "theta_db",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepParam::B,
            SweepParam::Q1,
            SweepParam::QR,
            SweepParam::Delta,
            SweepParam::UserCache,
            SweepParam::ThetaDb,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep parameter '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: NetworkGeometry,
    pub traffic: TrafficSection,
    pub cache: CacheConfig,
    #[serde(default = "default_sim")]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_sim() -> SimConfig {
    SimConfig::new(1_000_000, 1)
}

/// Whether a request probability came from the Zipf model or the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Derived,
    Override,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Derived => "derived",
            Origin::Override => "override",
        }
    }
}

/// A sweep point (absent without a sweep) and the configuration at it.
pub type Point = (Option<(SweepParam, f64)>, ExperimentConfig);

/// A fully resolved configuration point, ready to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub budget: LinkBudget,
    pub probs: SuccessProbs,
    pub traffic: TrafficParams,
    pub cache: CacheConfig,
    pub q_u_origin: Origin,
    pub p_h_origin: Origin,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every section, including the sweep domain, without evaluating anything.
    pub fn validate(&self) -> Result<()> {
        self.resolve()?;
        self.sim.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
            for &v in &sweep.values {
                self.with_param(sweep.parameter, v)?.resolve()?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let budget = phy::build_link_budget(&self.geometry)?;
        let probs = SuccessProbs::from_budget(&budget)?;
        self.cache.validate()?;
        let (q_u_zipf, p_h_zipf) = content::derive_request_probs(&self.cache)?;
        let pick = |o: Option<f64>, derived: f64| match o {
            Some(v) => (v, Origin::Override),
            None => (derived, Origin::Derived),
        };
        let (q_u, q_u_origin) = pick(self.traffic.q_u, q_u_zipf);
        let (p_h, p_h_origin) = pick(self.traffic.p_h, p_h_zipf);
        let traffic = TrafficParams {
            q1: self.traffic.q1,
            q_r: self.traffic.q_r,
            alpha: self.traffic.alpha,
            q_u,
            p_h,
        };
        traffic.validate()?;
        Ok(Scenario {
            budget,
            probs,
            traffic,
            cache: self.cache.clone(),
            q_u_origin,
            p_h_origin,
        })
    }

    /// Copy of this config with one parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{param} must be a non-negative integer, got {v}"
                )))
            }
        };
        let prob = |v: f64| -> Result<f64> {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::Config(format!("{param} must lie in [0,1], got {v}")))
            }
        };
        let mut c = self.clone();
        match param {
            SweepParam::B => c.cache.queue_size = count(value)?,
            SweepParam::Q1 => c.traffic.q1 = prob(value)?,
            SweepParam::QR => c.traffic.q_r = prob(value)?,
            SweepParam::Delta => c.cache.zipf_shape = value,
            SweepParam::UserCache => c.cache.user_cache = count(value)?,
            SweepParam::ThetaDb => {
                c.geometry.sinr_threshold_db = value;
                c.geometry.sinr_threshold_linear = None;
            }
        }
        Ok(c)
    }

    /// The configuration at each sweep value, or just this one without a sweep.
    pub fn points(&self) -> Result<Vec<Point>> {
        match &self.sweep {
            None => Ok(vec![(None, self.clone())]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some((s.parameter, v)), self.with_param(s.parameter, v)?)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = include_str!("../configs/throughput_q1-0.4_delta1.2_mu0.json");

    #[test]
    fn reference_config_resolves() {
        let c = ExperimentConfig::from_json(REFERENCE).unwrap();
        c.validate().unwrap();
        let s = c.resolve().unwrap();
        assert_eq!(s.traffic.q_u, 1.0);
        assert_eq!(s.q_u_origin, Origin::Derived);
        assert_eq!(c.sweep.as_ref().unwrap().values.len(), 11);
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_json(REFERENCE).unwrap();
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = ExperimentConfig::from_json(REFERENCE).unwrap();
        c.traffic.p_h = Some(0.0);
        let s = c.resolve().unwrap();
        assert_eq!(s.traffic.p_h, 0.0);
        assert_eq!(
            (s.q_u_origin, s.p_h_origin),
            (Origin::Derived, Origin::Override)
        );
    }

    #[test]
    fn sweep_domain_is_checked() {
        let mut c = ExperimentConfig::from_json(REFERENCE).unwrap();
        c.sweep = Some(Sweep {
            parameter: SweepParam::B,
            values: vec![3.0, 11.0],
        });
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.sweep = Some(Sweep {
            parameter: SweepParam::B,
            values: vec![2.5],
        });
        assert!(c.validate().is_err());
        c.sweep = Some(Sweep {
            parameter: SweepParam::Q1,
            values: vec![0.2, 1.2],
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = REFERENCE.replacen("\"q1\"", "\"q_one\"", 1);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn theta_sweep_clears_linear_override() {
        let mut c = ExperimentConfig::from_json(REFERENCE).unwrap();
        c.geometry.sinr_threshold_linear = Some(3.16);
        let p = c.with_param(SweepParam::ThetaDb, 0.0).unwrap();
        assert_eq!(p.geometry.theta_linear(), 1.0);
    }
}
