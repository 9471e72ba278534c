//! Network regret, network cumulative constraint violation, the offline
//! comparator and rate diagnostics.
//!
//! With `f_t = (1/n) Σ_j f_{j,t}` and `g_t = col(g_{1,t}, …, g_{n,t})`:
//!
//! - `Net-Reg(T) = (1/n) Σ_i Σ_{t≤T} (f_t(x_{i,t}) − f_t(x*))`
//! - `Net-CCV(T) = (1/n) Σ_i Σ_{t≤T} ‖[g_t(x_{i,t})]₊‖`
//!
//! Both need every agent's functions evaluated at every agent's decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{RoundRecord, RunTrace};
use crate::error::{Error, Result};
use crate::geometry::{
    project_intersection, BallBounded, BoxSet, Halfspace, DYKSTRA_MAX_ITER, DYKSTRA_TOL,
};
use crate::oracle::{Adversary, LocalFunctions};
use crate::problems::{QuadraticObjective, RegressionProblemSpec};
use crate::Vector;

/// `‖[col(g_1, …, g_n)]₊‖` computed from the parts.
pub fn stacked_clipped_norm<'a, I: IntoIterator<Item = &'a Vector>>(parts: I) -> f64 {
    parts
        .into_iter()
        .map(|g| g.iter().map(|c| c.max(0.0).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Network-level quantities of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundEvaluation {
    pub t: usize,
    /// `(1/n) Σ_i f_t(x_{i,t})`.
    pub mean_loss: f64,
    /// `(1/n) Σ_i ‖[g_t(x_{i,t})]₊‖`.
    pub mean_violation: f64,
    /// `f_t(x*)` when a comparator is supplied.
    pub comparator_loss: Option<f64>,
    pub mean_step_norm: f64,
    pub mean_dual_norm: f64,
}

/// Evaluates every agent's round-`t` functions at every agent's decision.
pub fn evaluate_round<A: Adversary>(
    adversary: &A,
    record: &RoundRecord,
    x_star: Option<&Vector>,
) -> RoundEvaluation {
    let n = record.agents.len();
    let nf = n as f64;
    let mut loss_sum = vec![0.0; n];
    let mut viol_sq = vec![0.0; n];
    let mut comparator = 0.0;
    for j in 0..adversary.num_agents() {
        let local = adversary.local(j, record.t);
        for (i, a) in record.agents.iter().enumerate() {
            loss_sum[i] += local.loss(&a.x);
            viol_sq[i] += local
                .constraint(&a.x)
                .iter()
                .map(|c| c.max(0.0).powi(2))
                .sum::<f64>();
        }
        if let Some(xs) = x_star {
            comparator += local.loss(xs);
        }
    }
    let m = adversary.num_agents() as f64;
    RoundEvaluation {
        t: record.t,
        mean_loss: loss_sum.iter().map(|s| s / m).sum::<f64>() / nf,
        mean_violation: viol_sq.iter().map(|s| s.sqrt()).sum::<f64>() / nf,
        comparator_loss: x_star.map(|_| comparator / m),
        mean_step_norm: record.agents.iter().map(|a| a.step_norm).sum::<f64>() / nf,
        mean_dual_norm: record.agents.iter().map(|a| a.dual_norm).sum::<f64>() / nf,
    }
}

/// Cumulative series over the executed rounds; entry `k` is horizon
/// `T = t[k]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSeries {
    pub t: Vec<usize>,
    pub net_regret: Option<Vec<f64>>,
    pub net_ccv: Vec<f64>,
    pub cum_loss: Vec<f64>,
    pub mean_step_norm: Vec<f64>,
    pub mean_dual_norm: Vec<f64>,
}

impl MetricSeries {
    pub fn new(with_regret: bool) -> Self {
        Self {
            net_regret: with_regret.then(Vec::new),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends one round, accumulating the running sums.
    pub fn push(&mut self, e: &RoundEvaluation) {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        self.t.push(e.t);
        self.net_ccv.push(last(&self.net_ccv) + e.mean_violation);
        self.cum_loss.push(last(&self.cum_loss) + e.mean_loss);
        self.mean_step_norm.push(e.mean_step_norm);
        self.mean_dual_norm.push(e.mean_dual_norm);
        if let Some(reg) = self.net_regret.as_mut() {
            let prev = reg.last().copied().unwrap_or(0.0);
            reg.push(prev + e.mean_loss - e.comparator_loss.unwrap_or(f64::NAN));
        }
    }

    /// Elementwise average of equally long series.
    pub fn average(runs: &[MetricSeries]) -> Result<MetricSeries> {
        let first = runs
            .first()
            .ok_or_else(|| Error::invalid("runs", "need at least one series"))?;
        if runs
            .iter()
            .any(|r| r.t != first.t || r.net_regret.is_some() != first.net_regret.is_some())
        {
            return Err(Error::invalid("runs", "series cover different horizons"));
        }
        let k = runs.len() as f64;
        let mean = |get: &dyn Fn(&MetricSeries) -> &Vec<f64>| -> Vec<f64> {
            (0..first.len())
                .map(|i| runs.iter().map(|r| get(r)[i]).sum::<f64>() / k)
                .collect()
        };
        Ok(MetricSeries {
            t: first.t.clone(),
            net_regret: first
                .net_regret
                .as_ref()
                .map(|_| mean(&|r| r.net_regret.as_ref().expect("checked above"))),
            net_ccv: mean(&|r| &r.net_ccv),
            cum_loss: mean(&|r| &r.cum_loss),
            mean_step_norm: mean(&|r| &r.mean_step_norm),
            mean_dual_norm: mean(&|r| &r.mean_dual_norm),
        })
    }
}

pub fn network_ccv<A: Adversary>(trace: &RunTrace, adversary: &A) -> Vec<f64> {
    let mut series = MetricSeries::new(false);
    for r in &trace.rounds {
        series.push(&evaluate_round(adversary, r, None));
    }
    series.net_ccv
}

pub fn network_regret<A: Adversary>(
    trace: &RunTrace,
    adversary: &A,
    comparator: &ComparatorResult,
) -> Result<Vec<f64>> {
    if !comparator.converged {
        return Err(Error::ComparatorNotConverged(format!(
            "max violation {:.3e}, gradient mapping {:.3e}",
            comparator.max_violation, comparator.gradient_mapping_norm
        )));
    }
    let mut series = MetricSeries::new(true);
    for r in &trace.rounds {
        series.push(&evaluate_round(adversary, r, Some(&comparator.x_star)));
    }
    Ok(series.net_regret.expect("regret enabled"))
}

/// A smooth convex objective for the comparator.
pub trait SmoothObjective {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant of the gradient.
    fn smoothness(&self) -> f64;
}

impl SmoothObjective for QuadraticObjective {
    fn value(&self, x: &Vector) -> f64 {
        QuadraticObjective::value(self, x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        QuadraticObjective::gradient(self, x)
    }

    fn smoothness(&self) -> f64 {
        self.hessian
            .symmetric_eigenvalues()
            .max()
            .max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparatorOptions {
    /// Stop once the projected-gradient mapping norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub dykstra_tol: f64,
    pub dykstra_max_iter: usize,
}

impl Default for ComparatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100_000,
            dykstra_tol: DYKSTRA_TOL,
            dykstra_max_iter: DYKSTRA_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorResult {
    pub x_star: Vector,
    pub objective: f64,
    pub converged: bool,
    pub max_violation: f64,
    pub gradient_mapping_norm: f64,
    pub iterations: usize,
    /// Halfspaces that ended up in the working set.
    pub working_set_size: usize,
}

/// Constraints added to the working set per outer pass.
const WORKING_SET_BATCH: usize = 16;

fn most_violated(
    halfspaces: &[Halfspace],
    in_working: &[bool],
    x: &Vector,
    tol: f64,
    limit: usize,
) -> Vec<usize> {
    let mut viol: Vec<(f64, usize)> = halfspaces
        .iter()
        .enumerate()
        .filter(|(k, _)| !in_working[*k])
        .map(|(k, h)| (h.violation(x), k))
        .filter(|(v, _)| *v > tol)
        .collect();
    viol.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    viol.into_iter().take(limit).map(|(_, k)| k).collect()
}

/// Minimizes `objective` over `set ∩ halfspaces` by projected gradient
/// descent with step `1/L`, projecting with Dykstra's method.
///
/// Halfspaces enter a working set lazily: the descent runs over the working
/// set, and the most violated remaining halfspaces are added whenever an
/// iterate leaves the full feasible set. The result is therefore optimal for
/// the full intersection once no halfspace outside the working set is
/// violated.
pub fn minimize_over_polytope<O: SmoothObjective>(
    objective: &O,
    set: &BoxSet,
    halfspaces: &[Halfspace],
    start: &Vector,
    opts: &ComparatorOptions,
) -> Result<ComparatorResult> {
    let step = 1.0 / objective.smoothness();
    let mut in_working = vec![false; halfspaces.len()];
    let mut working: Vec<Halfspace> = Vec::new();
    let feas_tol = opts.dykstra_tol;

    let project = |x: &Vector, working: &[Halfspace]| {
        project_intersection(x, set, working, opts.dykstra_tol, opts.dykstra_max_iter)
    };

    let mut x = project(start, &working)?.point;
    let mut iterations = 0;
    let mut mapping_norm = f64::INFINITY;
    let mut projections_ok = true;

    while iterations < opts.max_iter {
        let added = most_violated(halfspaces, &in_working, &x, feas_tol, WORKING_SET_BATCH);
        if !added.is_empty() {
            for k in added {
                in_working[k] = true;
                working.push(halfspaces[k].clone());
            }
            let proj = project(&x, &working)?;
            projections_ok &= proj.converged;
            x = proj.point;
            continue;
        }

        iterations += 1;
        let grad = objective.gradient(&x);
        let proj = project(&(&x - &grad * step), &working)?;
        let y = proj.point;
        mapping_norm = (&x - &y).norm() / step;
        let y_feasible = most_violated(halfspaces, &in_working, &y, feas_tol, 1).is_empty();
        if y_feasible {
            projections_ok = proj.converged;
        }
        x = y;
        if mapping_norm <= opts.tol && y_feasible && proj.converged {
            break;
        }
    }

    let max_violation = halfspaces
        .iter()
        .map(|h| h.violation(&x))
        .chain(x.iter().map(|c| (c.abs() - set.half_width).max(0.0)))
        .fold(0.0, f64::max);
    let converged = mapping_norm <= opts.tol && projections_ok && max_violation <= feas_tol;
    Ok(ComparatorResult {
        objective: objective.value(&x),
        x_star: x,
        converged,
        max_violation,
        gradient_mapping_norm: mapping_norm,
        iterations,
        working_set_size: working.len(),
    })
}

/// Best fixed decision in hindsight over `X ∩ {g_t <= 0, t <= T}` for the
/// regression benchmark. The objective is `Σ_t f_t / T`, which has the same
/// minimizer as the cumulative loss; the reported objective is rescaled back
/// to the cumulative value.
pub fn solve_offline_comparator(
    spec: &RegressionProblemSpec,
    horizon: usize,
    opts: &ComparatorOptions,
) -> Result<ComparatorResult> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let set = spec.decision_set()?;
    let mut objective = spec.cumulative_objective(horizon);
    let scale = 1.0 / horizon as f64;
    objective.hessian *= scale;
    objective.linear *= scale;
    objective.constant *= scale;
    let halfspaces = spec.pooled_halfspaces(horizon);
    let start = spec
        .slater_certificate()
        .map(|c| c.point)
        .unwrap_or_else(|_| Vector::zeros(set.dim()));
    let mut result = minimize_over_polytope(&objective, &set, &halfspaces, &start, opts)?;
    result.objective /= scale;
    Ok(result)
}

/// Least-squares slope of `log y` against `log T` over the last
/// `tail_fraction` of the points.
pub fn fit_loglog_slope(horizons: &[f64], values: &[f64], tail_fraction: f64) -> Result<f64> {
    if horizons.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: horizons.len(),
            got: values.len(),
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::invalid(
            "tail_fraction",
            format!("must lie in (0, 1], got {tail_fraction}"),
        ));
    }
    let n = horizons.len();
    let start = ((1.0 - tail_fraction) * n as f64).floor() as usize;
    let window = start.min(n)..n;
    if window.len() < 2 {
        return Err(Error::invalid(
            "series",
            "need at least two points in the tail window",
        ));
    }
    let mut pts = Vec::with_capacity(window.len());
    for k in window {
        let (t, y) = (horizons[k], values[k]);
        if !(t > 0.0 && y > 0.0) {
            return Err(Error::invalid(
                "series",
                format!("nonpositive value {y} at horizon {t} in the tail window"),
            ));
        }
        pts.push((t.ln(), y.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Slope of a series indexed by `T = 1, 2, …`.
pub fn fit_series_slope(series: &[f64], tail_fraction: f64) -> Result<f64> {
    let horizons: Vec<f64> = (1..=series.len()).map(|t| t as f64).collect();
    fit_loglog_slope(&horizons, series, tail_fraction)
}

/// Rate statements for regret and constraint violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "T1-reg")]
    T1Reg,
    #[serde(rename = "T1-ccv")]
    T1Ccv,
    #[serde(rename = "T2-ccv")]
    T2Ccv,
    #[serde(rename = "T3-reg")]
    T3Reg,
    #[serde(rename = "T3-ccv")]
    T3Ccv,
    #[serde(rename = "T3-ccv-slater")]
    T3CcvSlater,
    #[serde(rename = "T4-reg")]
    T4Reg,
    #[serde(rename = "T4-ccv")]
    T4Ccv,
    #[serde(rename = "T4-ccv-slater")]
    T4CcvSlater,
}

const BOUND_NAMES: [(BoundId, &str); 9] = [
    (BoundId::T1Reg, "T1-reg"),
    (BoundId::T1Ccv, "T1-ccv"),
    (BoundId::T2Ccv, "T2-ccv"),
    (BoundId::T3Reg, "T3-reg"),
    (BoundId::T3Ccv, "T3-ccv"),
    (BoundId::T3CcvSlater, "T3-ccv-slater"),
    (BoundId::T4Reg, "T4-reg"),
    (BoundId::T4Ccv, "T4-ccv"),
    (BoundId::T4CcvSlater, "T4-ccv-slater"),
];

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BOUND_NAMES
            .iter()
            .find(|(_, name)| *name == s)
            .map(|(id, _)| *id)
            .ok_or_else(|| Error::invalid("bound", format!("unknown bound id `{s}`")))
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = BOUND_NAMES
            .iter()
            .find(|(id, _)| id == self)
            .map(|(_, n)| *n)
            .unwrap_or("?");
        f.write_str(name)
    }
}

/// Shape of a rate, without constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateShape {
    Power(f64),
    Log,
    SqrtTLogT,
}

impl RateShape {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            RateShape::Power(e) => t.powf(e),
            RateShape::Log => t.ln(),
            RateShape::SqrtTLogT => (t * t.ln()).sqrt(),
        }
    }

    /// Power-law exponent, when the shape is one.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            RateShape::Power(e) => Some(e),
            _ => None,
        }
    }
}

impl BoundId {
    /// Rate shape for trade-off exponent `c` (ignored by the log rates).
    pub fn shape(&self, c: f64) -> RateShape {
        match self {
            BoundId::T1Reg => RateShape::Power(c.max(1.0 - c)),
            BoundId::T1Ccv | BoundId::T3Ccv => RateShape::Power(1.0 - c / 2.0),
            BoundId::T2Ccv | BoundId::T3Reg | BoundId::T3CcvSlater => RateShape::Power(1.0 - c),
            BoundId::T4Reg | BoundId::T4CcvSlater => RateShape::Log,
            BoundId::T4Ccv => RateShape::SqrtTLogT,
        }
    }
}

/// `shape(T)` for `T = 1..=t_max`, for overlaying on measured curves.
pub fn bound_envelope(id: BoundId, c: f64, t_max: usize) -> Vec<f64> {
    let shape = id.shape(c);
    (1..=t_max).map(|t| shape.eval(t as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentRecord;
    use crate::rng::{stream, Purpose};
    use crate::schedule::RoundParams;
    use rand::Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// `f_{j,t}(x) = Σ_k (x_k − c_j)²`, `g_{j,t}(x) = x − limit_j` per agent.
    struct Toy {
        centers: Vec<f64>,
        limits: Vec<f64>,
    }

    struct ToyLocal {
        center: f64,
        limit: f64,
    }

    impl LocalFunctions for ToyLocal {
        fn loss(&self, x: &Vector) -> f64 {
            x.iter().map(|c| (c - self.center).powi(2)).sum()
        }
        fn constraint(&self, x: &Vector) -> Vector {
            x.map(|c| c - self.limit)
        }
    }

    impl Adversary for Toy {
        type Local = ToyLocal;
        fn num_agents(&self) -> usize {
            self.centers.len()
        }
        fn dim(&self) -> usize {
            1
        }
        fn constraint_dim(&self, _: usize) -> usize {
            1
        }
        fn local(&self, agent: usize, _: usize) -> ToyLocal {
            ToyLocal {
                center: self.centers[agent],
                limit: self.limits[agent],
            }
        }
    }

    fn trace(points: &[Vec<f64>]) -> RunTrace {
        let rounds = points
            .iter()
            .enumerate()
            .map(|(k, xs)| RoundRecord {
                t: k + 1,
                params: RoundParams {
                    alpha: 1.0,
                    gamma: 1.0,
                    xi: 1.0,
                    delta: 1.0,
                },
                agents: xs
                    .iter()
                    .map(|&x| AgentRecord {
                        x: v(&[x]),
                        loss: 0.0,
                        clipped_constraint: v(&[0.0]),
                        direction_norm: 0.0,
                        step_norm: 0.0,
                        dual_norm: 0.0,
                    })
                    .collect(),
            })
            .collect();
        RunTrace {
            rounds,
            ..RunTrace::default()
        }
    }

    fn fixed(x: f64) -> ComparatorResult {
        ComparatorResult {
            x_star: v(&[x]),
            objective: 0.0,
            converged: true,
            max_violation: 0.0,
            gradient_mapping_norm: 0.0,
            iterations: 0,
            working_set_size: 0,
        }
    }

    #[test]
    fn ccv_examples() {
        let toy = Toy {
            centers: vec![0.0],
            limits: vec![0.0],
        };
        assert_eq!(
            network_ccv(&trace(&[vec![1.0], vec![2.0]]), &toy),
            vec![1.0, 3.0]
        );
        assert_eq!(
            network_ccv(&trace(&[vec![-1.0], vec![-2.0]]), &toy),
            vec![0.0, 0.0]
        );

        // Two agents with limits 0 and 1: at x = 3 the parts are 3 and 2.
        let toy = Toy {
            centers: vec![0.0, 0.0],
            limits: vec![0.0, 1.0],
        };
        let ccv = network_ccv(&trace(&[vec![3.0, 3.0]]), &toy);
        assert!((ccv[0] - (9.0f64 + 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stacked_norm_matches_concatenation() {
        let mut rng = stream(1, 0, 0, Purpose::Test);
        for _ in 0..200 {
            let parts: Vec<Vector> = (0..5)
                .map(|_| Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let flat = Vector::from_iterator(15, parts.iter().flat_map(|p| p.iter().copied()));
            let direct = crate::geometry::clip_nonneg(&flat).norm();
            assert!((stacked_clipped_norm(&parts) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn regret_examples() {
        let toy = Toy {
            centers: vec![0.0],
            limits: vec![10.0],
        };
        let reg = network_regret(
            &trace(&[vec![1.0], vec![1.0], vec![1.0]]),
            &toy,
            &fixed(0.0),
        )
        .unwrap();
        assert_eq!(reg, vec![1.0, 2.0, 3.0]);

        let reg = network_regret(
            &trace(&[vec![0.5, 0.5], vec![0.5, 0.5]]),
            &Toy {
                centers: vec![0.0, 1.0],
                limits: vec![10.0, 10.0],
            },
            &fixed(0.5),
        )
        .unwrap();
        assert_eq!(reg, vec![0.0, 0.0]);

        let mut bad = fixed(0.0);
        bad.converged = false;
        assert!(network_regret(&trace(&[vec![1.0]]), &toy, &bad).is_err());
    }

    #[test]
    fn regret_telescopes() {
        let toy = Toy {
            centers: vec![0.3, -1.0, 2.0],
            limits: vec![10.0; 3],
        };
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|k| vec![k as f64 * 0.1, -0.5, 1.0 / (k + 1) as f64])
            .collect();
        let tr = trace(&pts);
        let xs = 0.4;
        let reg = network_regret(&tr, &toy, &fixed(xs)).unwrap();
        let ft = |x: f64| toy.centers.iter().map(|c| (x - c).powi(2)).sum::<f64>() / 3.0;
        for k in 1..reg.len() {
            let inc: f64 = pts[k].iter().map(|&x| ft(x) - ft(xs)).sum::<f64>() / 3.0;
            assert!((reg[k] - reg[k - 1] - inc).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_examples() {
        let pow = |e: f64, s: f64| {
            (1..=1000)
                .map(|t| s * (t as f64).powf(e))
                .collect::<Vec<_>>()
        };
        assert!((fit_series_slope(&pow(0.75, 1.0), 0.5).unwrap() - 0.75).abs() < 1e-9);
        assert!(fit_series_slope(&vec![2.0; 100], 0.5).unwrap().abs() < 1e-12);
        assert!((fit_series_slope(&pow(0.5, 3.0), 0.5).unwrap() - 0.5).abs() < 1e-9);
        let mut neg = pow(0.5, 1.0);
        neg[900] = -1.0;
        assert!(fit_series_slope(&neg, 0.5).is_err());
        // Nonpositive values before the tail window are fine.
        neg[900] = 1.0;
        neg[10] = 0.0;
        assert!(fit_series_slope(&neg, 0.5).is_ok());
        assert!(fit_series_slope(&neg, 0.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let e = bound_envelope("T1-reg".parse().unwrap(), 0.5, 100);
        assert!((e[99] - 10.0).abs() < 1e-12);
        assert_eq!(BoundId::T4Reg.shape(0.5), RateShape::Log);
        assert!((bound_envelope(BoundId::T4Reg, 0.5, 10)[9] - 10f64.ln()).abs() < 1e-15);
        assert_eq!(BoundId::T2Ccv.shape(0.5).exponent(), Some(0.5));
        assert_eq!(BoundId::T1Ccv.shape(0.5).exponent(), Some(0.75));
        assert!("T9-reg".parse::<BoundId>().is_err());
        for (id, name) in BOUND_NAMES {
            assert_eq!(id.to_string(), name);
            assert_eq!(name.parse::<BoundId>().unwrap(), id);
        }
    }

    /// `‖x − a‖²` as a quadratic objective.
    fn shifted_square(a: &Vector) -> QuadraticObjective {
        let p = a.len();
        QuadraticObjective {
            hessian: crate::Matrix::identity(p, p) * 2.0,
            linear: a * 2.0,
            constant: a.norm_squared(),
        }
    }

    #[test]
    fn comparator_interior_minimizer() {
        let set = BoxSet::new(5.0, 2).unwrap();
        let a = v(&[1.0, -2.0]);
        let hs = vec![Halfspace::new(v(&[1.0, 1.0]), 3.0).unwrap()];
        let r = minimize_over_polytope(
            &shifted_square(&a),
            &set,
            &hs,
            &Vector::zeros(2),
            &ComparatorOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x_star - a).norm() < 1e-6);
    }

    #[test]
    fn comparator_ignores_redundant_halfspace() {
        let set = BoxSet::new(5.0, 2).unwrap();
        let a = v(&[3.0, 3.0]);
        let base = vec![Halfspace::new(v(&[1.0, 1.0]), 1.0).unwrap()];
        let mut extra = base.clone();
        extra.push(Halfspace::new(v(&[1.0, 1.0]), 2.0).unwrap());
        let opts = ComparatorOptions::default();
        let r1 = minimize_over_polytope(&shifted_square(&a), &set, &base, &Vector::zeros(2), &opts)
            .unwrap();
        let r2 =
            minimize_over_polytope(&shifted_square(&a), &set, &extra, &Vector::zeros(2), &opts)
                .unwrap();
        assert!(r1.converged && r2.converged);
        assert!((r1.x_star.clone() - v(&[0.5, 0.5])).norm() < 1e-6);
        assert!((r1.x_star - r2.x_star).norm() < 1e-6);
    }

    #[test]
    fn regression_comparator_is_feasible() {
        let spec = RegressionProblemSpec {
            n: 3,
            p: 3,
            q_rows: 4,
            m_rows: 2,
            half_width: 5.0,
            b_offset: 0.01,
            ridge: 0.0,
            seed: 3,
        };
        let r = solve_offline_comparator(&spec, 50, &ComparatorOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.max_violation <= 1e-8);
        assert!(r.gradient_mapping_norm <= 1e-6);
        let direct: f64 = (1..=50)
            .map(|t| {
                (0..3)
                    .map(|i| spec.materialize(i, t).loss(&r.x_star))
                    .sum::<f64>()
                    / 3.0
            })
            .sum();
        assert!((direct - r.objective).abs() <= 1e-9 * direct);
    }
}
