//! Experiment configuration, named presets and the multi-seed runner.
//!
//! A run resolves a configuration (preset plus overrides), validates it
//! against every module precondition, runs one simulation per seed, and
//! writes:
//!
//! - `seed-<seed>.csv`: the metric series of one seed at log-spaced horizons;
//! - `mean.csv`: the seed-averaged series at the same horizons;
//! - `report.json`: resolved config, fingerprint, fitted slopes, theorem rate
//!   exponents and invariant counters.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Engine, EngineConfig, InitRule, InvariantCounters, InvariantMode, Variant};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_round, fit_series_slope, solve_offline_comparator, BoundId, ComparatorOptions,
    MetricSeries,
};
use crate::network::{validate_joint_connectivity, GraphSchedule};
use crate::oracle::ProblemBounds;
use crate::problems::{RegressionProblem, RegressionProblemSpec};
use crate::schedule::{default_gamma0, table2_preset, ScheduleMode, ScheduleParams};

pub const PRESETS: [&str; 4] = [
    "paper-sec4",
    "desk-convex-c05",
    "desk-strongly-convex-t4",
    "desk-slater-margin-sweep",
];

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 6] = [
    "T",
    "net_regret",
    "net_ccv",
    "cum_loss",
    "mean_step_norm",
    "mean_dual_norm",
];

/// Rounds checked for joint connectivity before a run.
const CONNECTIVITY_CHECK_ROUNDS: usize = 1000;

/// The regression benchmark without its seed, which comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub p: usize,
    pub q_rows: usize,
    pub m_rows: usize,
    pub half_width: f64,
    pub b_offset: f64,
    #[serde(default)]
    pub ridge: f64,
}

impl ProblemConfig {
    pub fn spec(&self, seed: u64) -> RegressionProblemSpec {
        RegressionProblemSpec {
            n: self.n,
            p: self.p,
            q_rows: self.q_rows,
            m_rows: self.m_rows,
            half_width: self.half_width,
            b_offset: self.b_offset,
            ridge: self.ridge,
            seed,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `γ₀` defaults to the admissible bound `1/(4(p²+1)G₂²)`.
    Theorem1 {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma0: Option<f64>,
        #[serde(default = "yes")]
        theorem_compliant: bool,
    },
    Theorem4 {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma0: Option<f64>,
        #[serde(default = "yes")]
        theorem_compliant: bool,
    },
    /// A named parameter preset such as `paper-alg1`.
    Preset { name: String },
    /// Explicit scales, `α = a/t^e`, `ξ = min(s/t^e, 1)`, `δ = d/t^e`.
    Custom {
        alpha_scale: f64,
        xi_scale: f64,
        delta_scale: f64,
        exponent: f64,
        gamma0: f64,
    },
}

impl ScheduleConfig {
    pub fn resolve(
        &self,
        p: usize,
        inner_radius: f64,
        bounds: &ProblemBounds,
    ) -> Result<ScheduleParams> {
        let gamma0 = |g: Option<f64>| match g {
            Some(g) => Ok(g),
            None => default_gamma0(p, bounds.constraint_lipschitz),
        };
        let params = match self {
            ScheduleConfig::Theorem1 {
                c,
                gamma0: g,
                theorem_compliant,
            } => ScheduleParams {
                theorem_compliant: *theorem_compliant,
                ..ScheduleParams::theorem1(*c, gamma0(*g)?, inner_radius)
            },
            ScheduleConfig::Theorem4 {
                mu,
                gamma0: g,
                theorem_compliant,
            } => ScheduleParams {
                theorem_compliant: *theorem_compliant,
                ..ScheduleParams::theorem4(*mu, gamma0(*g)?, inner_radius)
            },
            ScheduleConfig::Preset { name } => table2_preset(name, inner_radius)?,
            ScheduleConfig::Custom {
                alpha_scale,
                xi_scale,
                delta_scale,
                exponent,
                gamma0,
            } => ScheduleParams {
                mode: ScheduleMode::Custom {
                    alpha_scale: *alpha_scale,
                    xi_scale: *xi_scale,
                    delta_scale: *delta_scale,
                    exponent: *exponent,
                },
                gamma0: *gamma0,
                inner_radius,
                theorem_compliant: false,
            },
        };
        params.validate(p, Some(bounds.constraint_lipschitz))?;
        Ok(params)
    }

    /// Rate statements matching the schedule: (regret, CCV, CCV under Slater).
    pub fn theorem_rates(&self) -> Option<(BoundId, BoundId, BoundId)> {
        match self {
            ScheduleConfig::Theorem1 { .. } => {
                Some((BoundId::T1Reg, BoundId::T1Ccv, BoundId::T2Ccv))
            }
            ScheduleConfig::Theorem4 { .. } => {
                Some((BoundId::T4Reg, BoundId::T4Ccv, BoundId::T4CcvSlater))
            }
            ScheduleConfig::Preset { .. } | ScheduleConfig::Custom { .. } => None,
        }
    }

    fn tradeoff(&self) -> f64 {
        match self {
            ScheduleConfig::Theorem1 { c, .. } => *c,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub edge_prob: f64,
    #[serde(default = "yes")]
    pub backbone: bool,
    /// Joint-connectivity window `B`.
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Compute network regret against the offline comparator.
    pub regret: bool,
    #[serde(default)]
    pub comparator: ComparatorOptions,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    pub graph: GraphConfig,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub init: InitRule,
    #[serde(default)]
    pub check_invariants: InvariantMode,
    #[serde(default)]
    pub parallel_agents: bool,
    pub metrics: MetricsConfig,
    pub output_dir: PathBuf,
}

const DESK_PROBLEM: ProblemConfig = ProblemConfig {
    n: 10,
    p: 5,
    q_rows: 4,
    m_rows: 2,
    half_width: 5.0,
    b_offset: 0.01,
    ridge: 0.0,
};

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let desk =
            |name: &str, problem: ProblemConfig, schedule: ScheduleConfig| ExperimentConfig {
                name: name.to_string(),
                problem,
                schedule,
                graph: GraphConfig {
                    edge_prob: 0.3,
                    backbone: true,
                    window: 4,
                },
                horizon: 10_000,
                seeds: vec![1, 2, 3, 4, 5],
                variant: Variant::Paper,
                init: InitRule::Zeros,
                check_invariants: InvariantMode::Strict,
                parallel_agents: false,
                metrics: MetricsConfig {
                    regret: true,
                    comparator: ComparatorOptions::default(),
                    tail_fraction: 0.5,
                },
                output_dir: PathBuf::from("out").join(name),
            };
        let theorem1 = ScheduleConfig::Theorem1 {
            c: 0.5,
            gamma0: None,
            theorem_compliant: true,
        };
        match name {
            "paper-sec4" => Ok(ExperimentConfig {
                problem: ProblemConfig {
                    n: 100,
                    p: 10,
                    q_rows: 4,
                    m_rows: 2,
                    half_width: 5.0,
                    b_offset: 0.01,
                    ridge: 0.0,
                },
                graph: GraphConfig {
                    edge_prob: 0.1,
                    backbone: true,
                    window: 4,
                },
                horizon: 1000,
                metrics: MetricsConfig {
                    regret: false,
                    comparator: ComparatorOptions::default(),
                    tail_fraction: 0.5,
                },
                ..desk(
                    name,
                    DESK_PROBLEM,
                    ScheduleConfig::Preset {
                        name: "paper-alg1".into(),
                    },
                )
            }),
            "desk-convex-c05" => Ok(desk(name, DESK_PROBLEM, theorem1)),
            "desk-strongly-convex-t4" => Ok(desk(
                name,
                ProblemConfig {
                    ridge: 1.0,
                    ..DESK_PROBLEM
                },
                ScheduleConfig::Theorem4 {
                    mu: 1.0,
                    gamma0: None,
                    theorem_compliant: true,
                },
            )),
            "desk-slater-margin-sweep" => Ok(desk(
                name,
                ProblemConfig {
                    b_offset: 1.0,
                    ..DESK_PROBLEM
                },
                theorem1,
            )),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}`, known: {PRESETS:?}"),
            )),
        }
    }

    /// Parses a TOML document. A top-level `preset` key selects the base
    /// configuration that the remaining keys override; without it every
    /// required key must be present. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string()))?;
        let base = match doc.remove("preset") {
            Some(toml::Value::String(name)) => Some(Self::preset(&name)?),
            Some(_) => return Err(Error::config("preset", "must be a string")),
            None => None,
        };
        let merged = match base {
            Some(base) => {
                let mut table = toml::Table::try_from(&base)
                    .map_err(|e| Error::config("<preset>", e.to_string()))?;
                merge_tables(&mut table, doc);
                table
            }
            None => doc,
        };
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(error_key(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Checks every precondition the run depends on.
    pub fn validate(&self) -> Result<()> {
        let spec = self.problem.spec(0);
        spec.validate()
            .map_err(|e| Error::config("problem", e.to_string()))?;
        let set = spec
            .decision_set()
            .map_err(|e| Error::config("problem.half_width", e.to_string()))?;
        let bounds = spec
            .compute_bounds()
            .map_err(|e| Error::config("problem", e.to_string()))?;
        self.schedule
            .resolve(self.problem.p, set.half_width, &bounds)
            .map_err(|e| Error::config("schedule", e.to_string()))?;
        GraphSchedule::new(self.problem.n, self.graph.edge_prob, self.graph.backbone, 0)
            .map_err(|e| Error::config("graph.edge_prob", e.to_string()))?;
        if self.graph.window == 0 {
            return Err(Error::config("graph.window", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.horizon >= 1 << 32 {
            return Err(Error::config("horizon", "must be below 2^32"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        let tf = self.metrics.tail_fraction;
        if !(tf > 0.0 && tf <= 1.0) {
            return Err(Error::config(
                "metrics.tail_fraction",
                format!("must lie in (0, 1], got {tf}"),
            ));
        }
        let opts = &self.metrics.comparator;
        if !(opts.tol > 0.0 && opts.dykstra_tol > 0.0)
            || opts.max_iter == 0
            || opts.dykstra_max_iter == 0
        {
            return Err(Error::config(
                "metrics.comparator",
                "tolerances and iteration caps must be positive",
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the resolved config.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn merge_tables(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                // Switching the schedule mode replaces the whole table.
                if key == "schedule" && o.get("mode").is_some() && o.get("mode") != b.get("mode") {
                    *b = o;
                } else {
                    merge_tables(b, o);
                }
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn error_key(e: &toml::de::Error) -> String {
    // toml reports unknown fields as "unknown field `x`, expected ...".
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "<document>".to_string()
}

/// Comparator diagnostics of one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorSummary {
    pub objective: f64,
    pub converged: bool,
    pub max_violation: f64,
    pub gradient_mapping_norm: f64,
    pub iterations: usize,
    pub working_set_size: usize,
}

/// Everything one seed produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub series: MetricSeries,
    pub counters: InvariantCounters,
    pub comparator: Option<ComparatorSummary>,
    pub jointly_connected: Option<bool>,
}

/// Runs one seed: comparator first (when regret is on), then the
/// simulation with a streaming metrics pass.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let spec = cfg.problem.spec(seed);
    let problem = RegressionProblem::new(spec)?;
    let set = spec.decision_set()?;
    let bounds = spec.compute_bounds()?;
    let schedule = cfg.schedule.resolve(spec.p, set.half_width, &bounds)?;
    let graph = GraphSchedule::new(spec.n, cfg.graph.edge_prob, cfg.graph.backbone, seed)?;
    let rounds = cfg.horizon - 1;

    let check_rounds = rounds.min(CONNECTIVITY_CHECK_ROUNDS);
    let jointly_connected = if check_rounds >= cfg.graph.window {
        let graphs: Vec<_> = (1..=check_rounds)
            .map(|t| graph.generate_round_graph(t))
            .collect();
        Some(validate_joint_connectivity(
            &graphs,
            spec.n,
            cfg.graph.window,
        )?)
    } else {
        None
    };

    let comparator = if cfg.metrics.regret && rounds > 0 {
        let c = solve_offline_comparator(&spec, rounds, &cfg.metrics.comparator)?;
        if !c.converged {
            return Err(Error::ComparatorNotConverged(format!(
                "seed {seed}: max violation {:.3e}, gradient mapping {:.3e} after {} iterations",
                c.max_violation, c.gradient_mapping_norm, c.iterations
            )));
        }
        Some(c)
    } else {
        None
    };

    let engine_cfg = EngineConfig {
        set,
        schedule,
        graph,
        variant: cfg.variant,
        init: cfg.init,
        seed,
        bounds: Some(bounds),
        invariants: cfg.check_invariants,
        parallel_agents: cfg.parallel_agents,
    };
    let mut engine = Engine::new(&problem, engine_cfg)?;
    let mut series = MetricSeries::new(cfg.metrics.regret);
    let x_star = comparator.as_ref().map(|c| c.x_star.clone());
    let counters = engine.run_streaming(cfg.horizon, |record| {
        series.push(&evaluate_round(&problem, record, x_star.as_ref()));
    })?;

    Ok(SeedOutcome {
        seed,
        series,
        counters,
        comparator: comparator.map(|c| ComparatorSummary {
            objective: c.objective,
            converged: c.converged,
            max_violation: c.max_violation,
            gradient_mapping_norm: c.gradient_mapping_norm,
            iterations: c.iterations,
            working_set_size: c.working_set_size,
        }),
        jointly_connected,
    })
}

/// A fitted slope, or why it could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SlopeFit {
    fn of(series: &[f64], tail_fraction: f64) -> Self {
        match fit_series_slope(series, tail_fraction) {
            Ok(s) => SlopeFit {
                slope: Some(s),
                error: None,
            },
            Err(e) => SlopeFit {
                slope: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub final_horizon: Option<usize>,
    pub net_regret: Option<f64>,
    pub net_ccv: Option<f64>,
    pub cum_loss: Option<f64>,
    pub regret_slope: Option<SlopeFit>,
    pub ccv_slope: Option<SlopeFit>,
}

impl SeriesSummary {
    fn of(s: &MetricSeries, tail_fraction: f64) -> Self {
        let fit = !s.is_empty();
        SeriesSummary {
            final_horizon: s.t.last().copied(),
            net_regret: s.net_regret.as_ref().and_then(|r| r.last().copied()),
            net_ccv: s.net_ccv.last().copied(),
            cum_loss: s.cum_loss.last().copied(),
            regret_slope: s
                .net_regret
                .as_ref()
                .filter(|_| fit)
                .map(|r| SlopeFit::of(r, tail_fraction)),
            ccv_slope: fit.then(|| SlopeFit::of(&s.net_ccv, tail_fraction)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateExponent {
    pub id: String,
    /// Power-law exponent, absent for logarithmic rates.
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremRates {
    pub regret: RateExponent,
    pub ccv: RateExponent,
    pub ccv_slater: RateExponent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub invariant_violations: InvariantCounters,
    pub comparator: Option<ComparatorSummary>,
    pub jointly_connected: Option<bool>,
    pub summary: SeriesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub fingerprint: String,
    pub theorem_rates: Option<TheoremRates>,
    pub invariant_violations: InvariantCounters,
    pub mean: SeriesSummary,
    pub seeds: Vec<SeedReport>,
}

/// Results of a run, kept in memory alongside the written files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub outcomes: Vec<SeedOutcome>,
    pub mean: MetricSeries,
}

/// `round(10^(k/100))` for `k = 0, 1, …` up to `last`, deduplicated, plus
/// `last` itself.
pub fn checkpoints(last: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(k as f64 / 100.0).round() as usize;
        if t > last {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if last >= 1 && out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Writes `series` at the log-spaced checkpoints. A disabled regret column
/// is left empty.
pub fn write_series_csv(path: &Path, series: &MetricSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(CSV_COLUMNS)
        .map_err(|e| Error::Io(e.to_string()))?;
    let last = series.t.last().copied().unwrap_or(0);
    for t in checkpoints(last) {
        // Series start at t = 1 and are consecutive.
        let k = t - 1;
        let regret = series
            .net_regret
            .as_ref()
            .map(|r| fmt_f64(r[k]))
            .unwrap_or_default();
        w.write_record([
            t.to_string(),
            regret,
            fmt_f64(series.net_ccv[k]),
            fmt_f64(series.cum_loss[k]),
            fmt_f64(series.mean_step_norm[k]),
            fmt_f64(series.mean_dual_norm[k]),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Worker threads requested through `BANDITPD_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("BANDITPD_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::config(
                    "BANDITPD_THREADS",
                    format!("expected a positive integer, got `{v}`"),
                )
            }),
        Err(_) => Ok(None),
    }
}

/// Runs every seed (concurrently), computes metrics and writes the outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let run_all = || -> Vec<Result<SeedOutcome>> {
        cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect()
    };
    let results = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("BANDITPD_THREADS", e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let series: Vec<MetricSeries> = outcomes.iter().map(|o| o.series.clone()).collect();
    let mean = MetricSeries::average(&series)?;

    fs::create_dir_all(&cfg.output_dir)?;
    for o in &outcomes {
        write_series_csv(
            &cfg.output_dir.join(format!("seed-{}.csv", o.seed)),
            &o.series,
        )?;
    }
    write_series_csv(&cfg.output_dir.join("mean.csv"), &mean)?;

    let tf = cfg.metrics.tail_fraction;
    let c = cfg.schedule.tradeoff();
    let rate = |id: BoundId| RateExponent {
        id: id.to_string(),
        exponent: id.shape(c).exponent(),
    };
    let mut total = InvariantCounters::default();
    for o in &outcomes {
        total.merge(&o.counters);
    }
    let report = ExperimentReport {
        config: cfg.clone(),
        fingerprint: cfg.fingerprint(),
        theorem_rates: cfg.schedule.theorem_rates().map(|(r, v, s)| TheoremRates {
            regret: rate(r),
            ccv: rate(v),
            ccv_slater: rate(s),
        }),
        invariant_violations: total,
        mean: SeriesSummary::of(&mean, tf),
        seeds: outcomes
            .iter()
            .map(|o| SeedReport {
                seed: o.seed,
                invariant_violations: o.counters,
                comparator: o.comparator.clone(),
                jointly_connected: o.jointly_connected,
                summary: SeriesSummary::of(&o.series, tf),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(cfg.output_dir.join("report.json"), json + "\n")?;

    if total.total() > 0 {
        return Err(Error::InvariantViolation {
            round: 0,
            agent: 0,
            what: format!(
                "{} violations recorded across seeds: {total:?}",
                total.total()
            ),
        });
    }
    Ok(ExperimentOutput {
        report,
        outcomes,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn paper_preset_matches_the_experiment_settings() {
        let cfg = ExperimentConfig::preset("paper-sec4").unwrap();
        let p = cfg.problem;
        assert_eq!((p.n, p.q_rows, p.p, p.m_rows), (100, 4, 10, 2));
        assert_eq!((p.half_width, p.b_offset), (5.0, 0.01));
        assert_eq!(cfg.graph.edge_prob, 0.1);
        let spec = p.spec(1);
        let bounds = spec.compute_bounds().unwrap();
        let s = cfg.schedule.resolve(p.p, 5.0, &bounds).unwrap();
        assert!(!s.theorem_compliant);
        assert_eq!(s.gamma0, 0.15);
        assert!(matches!(s.mode, ScheduleMode::Custom { .. }));
    }

    #[test]
    fn toml_overrides_and_errors() {
        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"desk-convex-c05\"\nhorizon = 50\n[problem]\nb_offset = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.horizon, 50);
        assert_eq!(cfg.problem.b_offset, 1.0);
        assert_eq!(cfg.problem.n, 10);

        let err =
            ExperimentConfig::from_toml_str("preset = \"desk-convex-c05\"\n[schedule]\nc = 1.5\n")
                .unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "schedule"),
            "{err}"
        );

        let err = ExperimentConfig::from_toml_str("preset = \"desk-convex-c05\"\nseeds = []\n")
            .unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "seeds"),
            "{err}"
        );

        let err = ExperimentConfig::from_toml_str("preset = \"desk-convex-c05\"\nbogus = 1\n")
            .unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "bogus"),
            "{err}"
        );

        let err =
            ExperimentConfig::from_toml_str("preset = \"desk-convex-c05\"\n[graph]\nwindoww = 3\n")
                .unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "windoww"),
            "{err}"
        );

        let err = ExperimentConfig::from_toml_str("horizon = 5\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }));

        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"desk-convex-c05\"\n[schedule]\nmode = \"theorem4\"\nmu = 2.0\n",
        )
        .unwrap();
        assert!(matches!(cfg.schedule, ScheduleConfig::Theorem4 { mu, .. } if mu == 2.0));

        let custom = "preset = \"desk-convex-c05\"\n[schedule]\nmode = \"custom\"\nalpha_scale = 1.0\nxi_scale = 1.0\ndelta_scale = 0.01\nexponent = 1.0\ngamma0 = 0.15\n";
        let cfg = ExperimentConfig::from_toml_str(custom).unwrap();
        assert!(matches!(cfg.schedule, ScheduleConfig::Custom { gamma0, .. } if gamma0 == 0.15));
        let err = ExperimentConfig::from_toml_str(&custom.replace("0.01", "9.0")).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "schedule"),
            "{err}"
        );
    }

    #[test]
    fn full_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::preset("desk-strongly-convex-t4").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn checkpoint_spacing() {
        assert!(checkpoints(0).is_empty());
        assert_eq!(checkpoints(1), vec![1]);
        let c = checkpoints(10_000);
        assert_eq!(c.first(), Some(&1));
        assert_eq!(c.last(), Some(&10_000));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        // At most 100 points per decade.
        assert!(c.iter().filter(|&&t| (1000..10_000).contains(&t)).count() <= 100);
        assert_eq!(*checkpoints(9_999).last().unwrap(), 9_999);
    }
}
