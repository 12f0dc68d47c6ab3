//! Sweeps, comparisons and CSV output.

use std::io::Write;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Origin, Scenario, SweepParam};
use crate::error::{Error, Result};
use crate::oracle::{self, SlotSemantics};
use crate::phy::{self, LinkRow};
use crate::sim::{self, CiHalfwidths, SimConfig, SimResult};
use crate::throughput::{self, Source, ThroughputReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    Oracle,
    Simulate,
    All,
}

impl Mode {
    fn sources(self) -> &'static [Source] {
        match self {
            Mode::Analytic => &[Source::PaperExact],
            Mode::Oracle => &[Source::Oracle],
            Mode::Simulate => &[Source::Simulated],
            Mode::All => &[Source::PaperExact, Source::Oracle, Source::Simulated],
        }
    }
}

/// One output row: a configuration point evaluated by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point: Option<(SweepParam, f64)>,
    pub source: Source,
    pub semantics: Option<SlotSemantics>,
    pub seed: Option<u64>,
    pub q_u: f64,
    pub q_u_origin: Origin,
    pub p_h: f64,
    pub p_h_origin: Origin,
    /// `a1, b0, b1, b2`; missing where the queue is too short to define them.
    pub coefficients: [Option<f64>; 4],
    pub pi: Vec<f64>,
    pub report: ThroughputReport,
    pub ci: Option<CiHalfwidths>,
}

fn row(scn: &Scenario, point: Option<(SweepParam, f64)>, source: Source) -> ReportRow {
    ReportRow {
        point,
        source,
        semantics: None,
        seed: None,
        q_u: scn.traffic.q_u,
        q_u_origin: scn.q_u_origin,
        p_h: scn.traffic.p_h,
        p_h_origin: scn.p_h_origin,
        coefficients: [None; 4],
        pi: Vec::new(),
        report: ThroughputReport::new(0.0, 0.0, 0.0, source),
        ci: None,
    }
}

fn evaluate_point(
    cfg: &ExperimentConfig,
    point: Option<(SweepParam, f64)>,
    source: Source,
) -> Result<ReportRow> {
    let scn = cfg.resolve()?;
    let b = scn.cache.queue_size;
    let mut r = row(&scn, point, source);
    match source {
        Source::PaperExact => {
            let a = throughput::analyze(&scn.probs, &scn.traffic, b)?;
            let c = a.coefficients;
            r.coefficients = [Some(c.a1), Some(c.b0), Some(c.b1), Some(c.b2)];
            r.pi = a.steady_state.pi;
            r.report = a.report;
        }
        Source::Oracle => {
            let sem = cfg.sim.semantics;
            let a = oracle::oracle_analysis(&scn.budget, &scn.traffic, b, sem)?;
            let (a1, b0, b2) = a.coefficients();
            let b1 = b0.zip(b2).map(|(d, u)| 1.0 - d - u);
            r.coefficients = [Some(a1), b0, b1, b2];
            r.semantics = Some(sem);
            r.pi = a.steady_state.pi;
            r.report = a.report;
        }
        Source::Simulated => {
            let s = sim::run(&scn.budget, &scn.traffic, b, &cfg.sim)?;
            return Ok(ReportRow {
                point,
                ..simulated_row(&scn, &cfg.sim, s)
            });
        }
    }
    Ok(r)
}

/// Report row for a simulation the caller has already run.
pub fn simulated_row(scn: &Scenario, sim: &SimConfig, s: SimResult) -> ReportRow {
    let mut r = row(scn, None, Source::Simulated);
    r.semantics = Some(sim.semantics);
    r.seed = Some(sim.seed);
    r.pi = s.empirical_pi;
    r.report = s.report;
    r.ci = Some(s.ci_halfwidth);
    r
}

/// Evaluates every sweep point (or the single configuration) with the sources
/// `mode` asks for. The whole sweep domain is validated before any work starts.
/// Rows come back in sweep order, sources in analytic/oracle/simulated order.
pub fn evaluate(cfg: &ExperimentConfig, mode: Mode) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let jobs: Vec<_> = cfg
        .points()?
        .into_iter()
        .flat_map(|(point, c)| mode.sources().iter().map(move |&s| (point, c.clone(), s)))
        .collect();
    jobs.into_par_iter()
        .map(|(point, c, s)| evaluate_point(&c, point, s))
        .collect()
}

/// Formats with 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub const METRIC_COLUMNS: [&str; 5] = ["T_1D", "T_R", "T_D", "T_2", "T"];

/// Writes report rows. `pi` columns are padded to the longest queue in `rows`.
pub fn write_reports<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let width = rows.iter().map(|r| r.pi.len()).max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "swept_param",
        "value",
        "source",
        "semantics",
        "seed",
        "qU",
        "qU_origin",
        "ph",
        "ph_origin",
        "a1",
        "b0",
        "b1",
        "b2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..width).map(|i| format!("pi_{i}")));
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(METRIC_COLUMNS.iter().map(|s| format!("ci_{s}")));
    w.write_record(&header).map_err(csv_err)?;

    for r in rows {
        let mut rec = vec![
            r.point
                .map(|(p, _)| p.name().to_string())
                .unwrap_or_default(),
            r.point.map(|(_, v)| fmt_float(v)).unwrap_or_default(),
            r.source.tag().to_string(),
            r.semantics
                .map(|s| s.name().to_string())
                .unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt_float(r.q_u),
            r.q_u_origin.name().to_string(),
            fmt_float(r.p_h),
            r.p_h_origin.name().to_string(),
        ];
        rec.extend(r.coefficients.iter().map(|c| opt(*c)));
        rec.extend((0..width).map(|i| opt(r.pi.get(i).copied())));
        rec.extend(r.report.metrics().iter().map(|(_, v)| fmt_float(*v)));
        match r.ci {
            Some(ci) => rec.extend(ci.as_array().iter().map(|v| fmt_float(*v))),
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_links<W: Write>(rows: &[LinkRow], theta_db: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["link", "interferers", "theta_db", "probability"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("{}->{}", r.tx, r.rx),
            r.interferers.to_string(),
            fmt_float(theta_db),
            fmt_float(r.probability),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn links(cfg: &ExperimentConfig) -> Result<Vec<LinkRow>> {
    let budget = phy::build_link_budget(&cfg.geometry)?;
    phy::success_table(&budget)
}

/// One quantity seen three ways.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub quantity: &'static str,
    pub state: Option<usize>,
    pub paper: f64,
    pub oracle: f64,
    pub sim: Option<f64>,
    pub sim_ci: Option<f64>,
}

impl CompareRow {
    pub fn paper_delta(&self) -> f64 {
        self.paper - self.oracle
    }

    pub fn sim_delta(&self) -> Option<f64> {
        self.sim.map(|s| s - self.oracle)
    }

    /// Whether the oracle value lies inside the simulation's 99% interval.
    pub fn consistent(&self) -> Option<bool> {
        self.sim_delta()
            .zip(self.sim_ci)
            .map(|(d, ci)| d.abs() <= ci)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub semantics: SlotSemantics,
    pub seed: u64,
}

/// Empirical transition frequency out of state `q` and its 99% normal half-width.
fn empirical_step(s: &SimResult, q: usize, dir: usize) -> Option<(f64, f64)> {
    let counts = s.transitions.get(q)?;
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return None;
    }
    let p = counts[dir] as f64 / n as f64;
    Some((p, 2.576 * (p * (1.0 - p) / n as f64).sqrt()))
}

/// Printed formulas vs. enumeration vs. simulation for the base configuration.
pub fn compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    cfg.sim.validate()?;
    let scn = cfg.resolve()?;
    let b = scn.cache.queue_size;
    let sem = cfg.sim.semantics;
    let (disc, simulated) = rayon::join(
        || oracle::discrepancy_report(&scn.budget, &scn.traffic, b, sem),
        || sim::run(&scn.budget, &scn.traffic, b, &cfg.sim),
    );
    let (disc, simulated) = (disc?, simulated?);
    let ci = simulated.ci_halfwidth.as_array();
    let metrics = simulated.report.metrics();

    let rows = disc
        .into_iter()
        .map(|d| {
            let step = match (d.quantity, d.state) {
                ("a1", Some(q)) | ("b2", Some(q)) => empirical_step(&simulated, q, 2),
                ("b0", Some(q)) => empirical_step(&simulated, q, 0),
                _ => None,
            };
            let (sim, sim_ci) = match d.quantity {
                "pi" => (d.state.map(|i| simulated.empirical_pi[i]), None),
                "a1" | "b0" | "b2" => (step.map(|s| s.0), step.map(|s| s.1)),
                name => {
                    let i = METRIC_COLUMNS.iter().position(|m| *m == name);
                    (i.map(|i| metrics[i].1), i.map(|i| ci[i]))
                }
            };
            CompareRow {
                quantity: d.quantity,
                state: d.state,
                paper: d.paper,
                oracle: d.oracle,
                sim,
                sim_ci,
            }
        })
        .collect();
    Ok(Comparison {
        rows,
        semantics: sem,
        seed: cfg.sim.seed,
    })
}

pub fn write_comparison<W: Write>(cmp: &Comparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "quantity",
        "state",
        "paper",
        "oracle",
        "sim",
        "sim_ci",
        "paper_minus_oracle",
        "sim_minus_oracle",
        "consistent",
        "semantics",
        "seed",
    ])
    .map_err(csv_err)?;
    for r in &cmp.rows {
        w.write_record([
            r.quantity.to_string(),
            r.state.map(|s| s.to_string()).unwrap_or_default(),
            fmt_float(r.paper),
            fmt_float(r.oracle),
            opt(r.sim),
            opt(r.sim_ci),
            fmt_float(r.paper_delta()),
            opt(r.sim_delta()),
            match r.consistent() {
                Some(true) => "consistent".into(),
                Some(false) => "inconsistent".into(),
                None => String::new(),
            },
            cmp.semantics.name().to_string(),
            cmp.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Short plain-text digest of a comparison.
pub fn summarize(cmp: &Comparison) -> String {
    let mismatched: Vec<_> = cmp
        .rows
        .iter()
        .filter(|r| r.paper_delta().abs() > 1e-12)
        .collect();
    let worst = cmp
        .rows
        .iter()
        .max_by(|a, b| a.paper_delta().abs().total_cmp(&b.paper_delta().abs()));
    let checked = cmp.rows.iter().filter(|r| r.consistent().is_some()).count();
    let consistent = cmp
        .rows
        .iter()
        .filter(|r| r.consistent() == Some(true))
        .count();
    let mut s = format!(
        "closed form vs oracle ({} semantics): {} of {} quantities differ by more than 1e-12\n",
        cmp.semantics,
        mismatched.len(),
        cmp.rows.len()
    );
    if let Some(w) = worst.filter(|w| w.paper_delta().abs() > 1e-12) {
        let state = w.state.map(|q| format!(" at Q={q}")).unwrap_or_default();
        s += &format!(
            "largest gap: {}{state}: closed form {} vs oracle {} (delta {})\n",
            w.quantity,
            fmt_float(w.paper),
            fmt_float(w.oracle),
            fmt_float(w.paper_delta())
        );
    }
    s += &format!(
        "simulation (seed {}): oracle inside the 99% interval for {consistent} of {checked} quantities\n",
        cmp.seed
    );
    s
}
