//! Link success probabilities under Rayleigh fading.
//!
//! A transmission `i -> j` succeeds when its SINR clears the threshold. With
//! unit-mean exponential fades on every link the success probability has the
//! closed form
//!
//! ```text
//! P(i->j | T) = exp(-θ n / h(i,j)) · Π_{k ∈ T \ {i,j}} 1 / (1 + θ h(k,j) / h(i,j))
//! ```
//!
//! where `h(i,j) = P_tx(i) / r(i,j)^p` is the mean received power.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five nodes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    /// Source of non-cacheable traffic.
    U1,
    /// Full-duplex relay with a split queue/cache.
    R,
    /// Base station fronting the data center.
    BS,
    /// Destination of non-cacheable traffic.
    D,
    /// User requesting cacheable files.
    U2,
}

impl Node {
    pub const ALL: [Node; 5] = [Node::U1, Node::R, Node::BS, Node::D, Node::U2];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Node::U1 => "U1",
            Node::R => "R",
            Node::BS => "BS",
            Node::D => "D",
            Node::U2 => "U2",
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Node::ALL
            .into_iter()
            .find(|n| n.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown node '{s}'")))
    }
}

/// A set of nodes, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct NodeSet(u8);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u8) -> Self {
        NodeSet(bits & 0b1_1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, node: Node) -> bool {
        self.0 & (1 << node.index()) != 0
    }

    pub fn with(self, node: Node) -> Self {
        NodeSet(self.0 | (1 << node.index()))
    }

    pub fn without(self, node: Node) -> Self {
        NodeSet(self.0 & !(1 << node.index()))
    }

    pub fn insert(&mut self, node: Node) {
        *self = self.with(node);
    }

    pub fn iter(self) -> impl Iterator<Item = Node> {
        Node::ALL.into_iter().filter(move |n| self.contains(*n))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<Node> for NodeSet {
    fn from_iter<I: IntoIterator<Item = Node>>(iter: I) -> Self {
        iter.into_iter().fold(NodeSet::EMPTY, NodeSet::with)
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Node::name).collect();
        f.write_str(&names.join(","))
    }
}

/// Distance between two nodes. Undirected entries apply to both orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub from: Node,
    pub to: Node,
    pub meters: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub directed: bool,
}

/// Ordered (transmitter, receiver) pairs whose received-power factor the
/// network model needs: every served link plus every interferer at D, R and U2.
pub const MODEL_PAIRS: [(Node, Node); 8] = [
    (Node::U1, Node::D),
    (Node::R, Node::D),
    (Node::BS, Node::D),
    (Node::U1, Node::R),
    (Node::BS, Node::R),
    (Node::R, Node::U2),
    (Node::BS, Node::U2),
    (Node::U1, Node::U2),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    /// Transmit power in watts, measured 1 m from the antenna.
    pub tx_power_w: BTreeMap<Node, f64>,
    pub distances: Vec<DistanceEntry>,
    pub path_loss_exp: f64,
    /// Noise power in watts, shared by every receiver.
    pub noise_power_w: f64,
    pub sinr_threshold_db: f64,
    /// Overrides the dB threshold with a linear value when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr_threshold_linear: Option<f64>,
}

impl NetworkGeometry {
    /// Distance `from -> to`; directed entries win over undirected ones.
    pub fn distance(&self, from: Node, to: Node) -> Option<f64> {
        let directed = self
            .distances
            .iter()
            .find(|e| e.directed && e.from == from && e.to == to);
        directed
            .or_else(|| {
                self.distances.iter().find(|e| {
                    !e.directed
                        && ((e.from == from && e.to == to) || (e.from == to && e.to == from))
                })
            })
            .map(|e| e.meters)
    }

    pub fn theta_linear(&self) -> f64 {
        self.sinr_threshold_linear
            .unwrap_or_else(|| 10f64.powf(self.sinr_threshold_db / 10.0))
    }

    pub fn validate(&self) -> Result<()> {
        for (node, &p) in &self.tx_power_w {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!(
                    "tx power of {node} must be > 0, got {p}"
                )));
            }
        }
        for e in &self.distances {
            if !(e.meters >= 1.0 && e.meters.is_finite()) {
                return Err(Error::Config(format!(
                    "distance {}-{} must be >= 1 m, got {}",
                    e.from, e.to, e.meters
                )));
            }
            if e.from == e.to {
                return Err(Error::Config(format!("distance from {} to itself", e.from)));
            }
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(Error::Config(format!(
                "noise power must be > 0, got {}",
                self.noise_power_w
            )));
        }
        if !(self.path_loss_exp > 0.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::Config(format!(
                "path-loss exponent must be > 0, got {}",
                self.path_loss_exp
            )));
        }
        if !self.sinr_threshold_db.is_finite() {
            return Err(Error::Config("SINR threshold must be finite".into()));
        }
        if let Some(t) = self.sinr_threshold_linear {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "linear SINR threshold must be >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Mean received powers `h(i,j)` and the linear SINR threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    h: [[Option<f64>; 5]; 5],
    theta_linear: f64,
    noise_power_w: f64,
}

/// Computes `h(i,j)` for every pair the geometry defines.
///
/// Fails if the geometry is invalid or lacks a pair in [`MODEL_PAIRS`].
pub fn build_link_budget(geom: &NetworkGeometry) -> Result<LinkBudget> {
    geom.validate()?;
    for &(from, to) in &MODEL_PAIRS {
        if geom.distance(from, to).is_none() {
            return Err(Error::MissingDistance { from, to });
        }
        if !geom.tx_power_w.contains_key(&from) {
            return Err(Error::MissingPower(from));
        }
    }
    let mut h = [[None; 5]; 5];
    for tx in Node::ALL {
        let Some(&power) = geom.tx_power_w.get(&tx) else {
            continue;
        };
        for rx in Node::ALL {
            if let Some(r) = geom.distance(tx, rx) {
                h[tx.index()][rx.index()] = Some(power / r.powf(geom.path_loss_exp));
            }
        }
    }
    Ok(LinkBudget {
        h,
        theta_linear: geom.theta_linear(),
        noise_power_w: geom.noise_power_w,
    })
}

impl LinkBudget {
    pub fn h(&self, tx: Node, rx: Node) -> Result<f64> {
        self.h[tx.index()][rx.index()].ok_or(Error::MissingDistance { from: tx, to: rx })
    }

    pub fn theta_linear(&self) -> f64 {
        self.theta_linear
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise_power_w
    }

    /// Success probability of `tx -> rx` while every node in `active` transmits.
    ///
    /// The receiver may itself be in `active` (the relay is full duplex); it
    /// never counts as its own interferer.
    pub fn success_prob(&self, tx: Node, rx: Node, active: NodeSet) -> Result<f64> {
        if !active.contains(tx) {
            return Err(Error::InactiveTransmitter(tx));
        }
        let signal = self.h(tx, rx)?;
        let theta = self.theta_linear;
        let mut p = (-theta * self.noise_power_w / signal).exp();
        for k in active.without(tx).without(rx).iter() {
            p /= 1.0 + theta * self.h(k, rx)? / signal;
        }
        Ok(p)
    }
}

/// One row of the link table: a link and the extra transmitters around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRow {
    pub tx: Node,
    pub rx: Node,
    pub interferers: NodeSet,
    pub probability: f64,
}

impl LinkRow {
    /// Label such as `U1->D/R,BS`.
    pub fn label(&self) -> String {
        if self.interferers.is_empty() {
            format!("{}->{}", self.tx, self.rx)
        } else {
            format!("{}->{}/{}", self.tx, self.rx, self.interferers)
        }
    }
}

const TABLE_LINKS: [(Node, Node, &[Node]); 16] = [
    (Node::U1, Node::D, &[]),
    (Node::U1, Node::D, &[Node::R]),
    (Node::U1, Node::D, &[Node::BS]),
    (Node::U1, Node::D, &[Node::R, Node::BS]),
    (Node::U1, Node::R, &[]),
    (Node::U1, Node::R, &[Node::BS]),
    (Node::R, Node::D, &[]),
    (Node::R, Node::D, &[Node::U1]),
    (Node::R, Node::D, &[Node::BS]),
    (Node::R, Node::D, &[Node::U1, Node::BS]),
    (Node::BS, Node::U2, &[]),
    (Node::BS, Node::U2, &[Node::U1]),
    (Node::BS, Node::U2, &[Node::R]),
    (Node::BS, Node::U2, &[Node::U1, Node::R]),
    (Node::R, Node::U2, &[]),
    (Node::R, Node::U2, &[Node::U1]),
];

/// Every link/interferer combination the throughput analysis uses, in the
/// order of the reference link table.
pub fn success_table(budget: &LinkBudget) -> Result<Vec<LinkRow>> {
    TABLE_LINKS
        .iter()
        .map(|&(tx, rx, others)| {
            let interferers: NodeSet = others.iter().copied().collect();
            let probability = budget.success_prob(tx, rx, interferers.with(tx))?;
            Ok(LinkRow {
                tx,
                rx,
                interferers,
                probability,
            })
        })
        .collect()
}

/// The sixteen success probabilities, by name. Field suffixes list the
/// interferers, e.g. `u1_d_r_bs` is `P(U1->D | R, BS also transmit)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbs {
    pub u1_d: f64,
    pub u1_d_r: f64,
    pub u1_d_bs: f64,
    pub u1_d_r_bs: f64,
    pub u1_r: f64,
    pub u1_r_bs: f64,
    pub r_d: f64,
    pub r_d_u1: f64,
    pub r_d_bs: f64,
    pub r_d_u1_bs: f64,
    pub bs_u2: f64,
    pub bs_u2_u1: f64,
    pub bs_u2_r: f64,
    pub bs_u2_u1_r: f64,
    pub r_u2: f64,
    pub r_u2_u1: f64,
}

impl SuccessProbs {
    pub fn from_budget(budget: &LinkBudget) -> Result<Self> {
        let t = success_table(budget)?;
        let p = |i: usize| t[i].probability;
        Ok(SuccessProbs {
            u1_d: p(0),
            u1_d_r: p(1),
            u1_d_bs: p(2),
            u1_d_r_bs: p(3),
            u1_r: p(4),
            u1_r_bs: p(5),
            r_d: p(6),
            r_d_u1: p(7),
            r_d_bs: p(8),
            r_d_u1_bs: p(9),
            bs_u2: p(10),
            bs_u2_u1: p(11),
            bs_u2_r: p(12),
            bs_u2_u1_r: p(13),
            r_u2: p(14),
            r_u2_u1: p(15),
        })
    }
}
