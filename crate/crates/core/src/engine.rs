//! The distributed bandit primal-dual iteration.
//!
//! Each round `t` every agent
//! 1. mixes its neighbours' primal copies, `x_i = Σ_j W_ij z_j`;
//! 2. draws a unit direction `u_i` and observes `f_i, g_i` at `x_i` and
//!    `x_i + δ_t u_i`;
//! 3. sets its dual to `q_i = γ_t [g_i(x_i)]₊`;
//! 4. forms `ω_i = ∂̂f_i + ∂̂g_i q_i` from the two-point estimators;
//! 5. moves to `z_i ← P_{(1−ξ_{t+1})X}(x_i − α_t ω_i)`.
//!
//! Rounds are bulk-synchronous: every agent reads the previous round's
//! snapshot and writes only its own next state, so parallel and sequential
//! evaluation give bitwise-identical results.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{clip_nonneg, BallBounded, BoxSet};
use crate::network::{build_mixing, GraphSchedule, MixingMatrix};
use crate::oracle::{
    estimate_constraint_jacobian, estimate_loss_grad, sample_unit_sphere, Adversary,
    FeedbackValues, ProblemBounds, TwoPointSample,
};
use crate::rng::{stream, Purpose};
use crate::schedule::{RoundParams, ScheduleParams};
use crate::{Matrix, Vector};

/// Slack used by every membership and bound check.
pub const INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Dual from the raw constraint values, as in the algorithm.
    #[default]
    Paper,
    /// Ablation: the Jacobian estimator sees `[g]₊` instead of `g`.
    ClippedPrimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitRule {
    #[default]
    Zeros,
    /// Uniform in the shrunk box `(1−ξ₁)X`.
    UniformShrunkBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InvariantMode {
    /// Abort on the first violation.
    #[default]
    Strict,
    /// Count violations and keep going.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub set: BoxSet,
    pub schedule: ScheduleParams,
    pub graph: GraphSchedule,
    pub variant: Variant,
    pub init: InitRule,
    pub seed: u64,
    /// Enables the displacement-bound diagnostic.
    pub bounds: Option<ProblemBounds>,
    pub invariants: InvariantMode,
    pub parallel_agents: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub z: Vector,
    /// Consensus point of the last executed round.
    pub x: Vector,
    pub q: Vector,
    /// `‖z_{t+1} − x_t‖` of the last executed round.
    pub last_step_norm: f64,
}

/// What one agent did in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub x: Vector,
    pub loss: f64,
    pub clipped_constraint: Vector,
    pub direction_norm: f64,
    pub step_norm: f64,
    pub dual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub params: RoundParams,
    pub agents: Vec<AgentRecord>,
}

/// Per-invariant violation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InvariantCounters {
    pub dual_nonnegativity: u64,
    pub shrunk_set_membership: u64,
    pub query_membership: u64,
    pub step_bound: u64,
    pub displacement_bound: u64,
}

impl InvariantCounters {
    pub fn total(&self) -> u64 {
        self.dual_nonnegativity
            + self.shrunk_set_membership
            + self.query_membership
            + self.step_bound
            + self.displacement_bound
    }

    pub fn merge(&mut self, other: &InvariantCounters) {
        self.dual_nonnegativity += other.dual_nonnegativity;
        self.shrunk_set_membership += other.shrunk_set_membership;
        self.query_membership += other.query_membership;
        self.step_bound += other.step_bound;
        self.displacement_bound += other.displacement_bound;
    }
}

/// SHA-256 over the bit patterns of every recorded query point and loss.
pub fn trace_fingerprint(rounds: &[RoundRecord]) -> String {
    let mut h = Sha256::new();
    for r in rounds {
        h.update((r.t as u64).to_le_bytes());
        for a in &r.agents {
            for v in a.x.iter().chain(std::iter::once(&a.loss)) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// Executed rounds of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
    pub counters: InvariantCounters,
    pub fingerprint: String,
}

pub fn init_agents(
    n: usize,
    set: &BoxSet,
    xi_first: f64,
    rule: InitRule,
    m: &[usize],
    seed: u64,
) -> Result<Vec<AgentState>> {
    if !(xi_first > 0.0 && xi_first <= 1.0) {
        return Err(Error::invalid(
            "xi",
            format!("must lie in (0, 1], got {xi_first}"),
        ));
    }
    if m.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.len(),
        });
    }
    let h = (1.0 - xi_first) * set.half_width;
    Ok((0..n)
        .map(|i| {
            let z = match rule {
                InitRule::Zeros => Vector::zeros(set.dim),
                InitRule::UniformShrunkBox if h > 0.0 => {
                    let mut rng = stream(seed, i, 0, Purpose::Init);
                    Vector::from_fn(set.dim, |_, _| rng.random_range(-h..=h))
                }
                InitRule::UniformShrunkBox => Vector::zeros(set.dim),
            };
            AgentState {
                x: z.clone(),
                z,
                q: Vector::zeros(m[i]),
                last_step_norm: 0.0,
            }
        })
        .collect())
}

fn mix_one(weights: &Matrix, i: usize, z: &[Vector]) -> Vector {
    let mut x = Vector::zeros(z[0].len());
    for (j, zj) in z.iter().enumerate() {
        x.axpy(weights[(i, j)], zj, 1.0);
    }
    x
}

/// `x_i = Σ_j W_ij z_j` for every agent; `z` is left untouched.
pub fn consensus_step(states: &mut [AgentState], mix: &MixingMatrix) -> Result<()> {
    if mix.n() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: mix.n(),
        });
    }
    let z: Vec<Vector> = states.iter().map(|s| s.z.clone()).collect();
    for (i, s) in states.iter_mut().enumerate() {
        s.x = mix_one(&mix.weights, i, &z);
    }
    Ok(())
}

/// Closed-form maximizer of the regularized Lagrangian over `q >= 0`:
/// `γ [g]₊`.
pub fn dual_update(g_at_x: &Vector, gamma: f64) -> Vector {
    clip_nonneg(g_at_x) * gamma
}

/// `ω = ∂̂f + ∂̂g q` with `∂̂g` of shape `p × m`.
pub fn assemble_direction(grad_f: &Vector, jac_g: &Matrix, q: &Vector) -> Result<Vector> {
    if jac_g.nrows() != grad_f.len() {
        return Err(Error::DimensionMismatch {
            expected: grad_f.len(),
            got: jac_g.nrows(),
        });
    }
    if jac_g.ncols() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: jac_g.ncols(),
        });
    }
    Ok(grad_f + jac_g * q)
}

/// `z ← P_{(1−ξ)X}(x − αω)` and records the step length.
pub fn primal_step(
    state: &mut AgentState,
    omega: &Vector,
    alpha: f64,
    xi_next: f64,
    set: &BoxSet,
) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must be positive, got {alpha}"),
        ));
    }
    let raw = &state.x - omega * alpha;
    let z = set.project_scaled(&raw, xi_next)?;
    state.last_step_norm = (&z - &state.x).norm();
    state.z = z;
    Ok(())
}

struct AgentOutcome {
    state: AgentState,
    record: AgentRecord,
    counters: InvariantCounters,
    first_violation: Option<String>,
}

/// Runs the iteration against an adversary.
pub struct Engine<'a, A: Adversary> {
    adversary: &'a A,
    config: EngineConfig,
    states: Vec<AgentState>,
    next_round: usize,
    counters: InvariantCounters,
}

impl<'a, A: Adversary> Engine<'a, A> {
    pub fn new(adversary: &'a A, config: EngineConfig) -> Result<Self> {
        let n = adversary.num_agents();
        let p = adversary.dim();
        if config.set.dim != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: config.set.dim,
            });
        }
        if config.graph.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: config.graph.n,
            });
        }
        if config.schedule.inner_radius > config.set.inner_radius() {
            return Err(Error::invalid(
                "inner_radius",
                "schedule inner radius exceeds the decision set's inner radius",
            ));
        }
        config
            .schedule
            .validate(p, config.bounds.map(|b| b.constraint_lipschitz))?;
        let first = config.schedule.round(1)?;
        let m: Vec<usize> = (0..n).map(|i| adversary.constraint_dim(i)).collect();
        let states = init_agents(n, &config.set, first.xi, config.init, &m, config.seed)?;
        Ok(Self {
            adversary,
            config,
            states,
            next_round: 1,
            counters: InvariantCounters::default(),
        })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn counters(&self) -> InvariantCounters {
        self.counters
    }

    pub fn next_round(&self) -> usize {
        self.next_round
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn agent_round(
        &self,
        i: usize,
        t: usize,
        mix: &MixingMatrix,
        z: &[Vector],
        params: &RoundParams,
        xi_next: f64,
    ) -> Result<AgentOutcome> {
        let cfg = &self.config;
        let set = &cfg.set;
        let p = set.dim;
        let mut counters = InvariantCounters::default();
        let mut first_violation: Option<String> = None;
        let mut flag = |counter: &mut u64, what: String| {
            *counter += 1;
            first_violation.get_or_insert(what);
        };

        if !set.contains_scaled(&z[i], params.xi, INVARIANT_TOL) {
            flag(
                &mut counters.shrunk_set_membership,
                format!("z outside (1-ξ)X with ξ = {}", params.xi),
            );
        }

        let mut state = self.states[i].clone();
        state.x = mix_one(&mix.weights, i, z);

        let mut rng = stream(cfg.seed, i, t, Purpose::Direction);
        let sample = TwoPointSample::new(sample_unit_sphere(&mut rng, p), params.delta)?;
        let probe = sample.probe(&state.x);
        if !set.contains(&state.x, INVARIANT_TOL) || !set.contains(&probe, INVARIANT_TOL) {
            flag(
                &mut counters.query_membership,
                "query point outside X".to_string(),
            );
        }

        let local = self.adversary.local(i, t);
        let mut fb = FeedbackValues::observe(&local, &state.x, &sample);
        let clipped_at_x = clip_nonneg(&fb.g_at_x);

        state.q = dual_update(&fb.g_at_x, params.gamma);
        if state.q.iter().any(|&c| c < 0.0) {
            flag(
                &mut counters.dual_nonnegativity,
                "negative dual".to_string(),
            );
        }

        let grad = estimate_loss_grad(&fb, &sample);
        if cfg.variant == Variant::ClippedPrimal {
            fb.g_at_x = clipped_at_x.clone();
            fb.g_at_probe = clip_nonneg(&fb.g_at_probe);
        }
        let jac = estimate_constraint_jacobian(&fb, &sample)?;
        let omega = assemble_direction(&grad, &jac, &state.q)?;
        let direction_norm = omega.norm();

        let x = state.x.clone();
        primal_step(&mut state, &omega, params.alpha, xi_next, set)?;

        if state.last_step_norm > params.alpha * direction_norm + INVARIANT_TOL {
            flag(&mut counters.step_bound, "step exceeds α‖ω‖".to_string());
        }
        if let Some(b) = cfg.bounds {
            let pf = p as f64;
            let bound = params.alpha
                * (pf * b.loss_lipschitz
                    + pf * b.constraint_lipschitz * params.gamma * clipped_at_x.norm());
            if state.last_step_norm > bound + INVARIANT_TOL {
                flag(
                    &mut counters.displacement_bound,
                    format!(
                        "step {} exceeds displacement bound {bound}",
                        state.last_step_norm
                    ),
                );
            }
        }

        let record = AgentRecord {
            x,
            loss: fb.f_at_x,
            clipped_constraint: clipped_at_x,
            direction_norm,
            step_norm: state.last_step_norm,
            dual_norm: state.q.norm(),
        };
        Ok(AgentOutcome {
            state,
            record,
            counters,
            first_violation,
        })
    }

    /// Executes the next round.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let t = self.next_round;
        let n = self.states.len();
        let params = self.config.schedule.round(t)?;
        let xi_next = self.config.schedule.round(t + 1)?.xi;
        let mix = build_mixing(&self.config.graph.generate_round_graph(t), n);
        let z: Vec<Vector> = self.states.iter().map(|s| s.z.clone()).collect();

        let outcomes: Vec<Result<AgentOutcome>> = if self.config.parallel_agents {
            (0..n)
                .into_par_iter()
                .map(|i| self.agent_round(i, t, &mix, &z, &params, xi_next))
                .collect()
        } else {
            (0..n)
                .map(|i| self.agent_round(i, t, &mix, &z, &params, xi_next))
                .collect()
        };

        let mut agents = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for (i, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome?;
            self.counters.merge(&outcome.counters);
            if let (InvariantMode::Strict, Some(what)) =
                (self.config.invariants, outcome.first_violation)
            {
                return Err(Error::InvariantViolation {
                    round: t,
                    agent: i,
                    what,
                });
            }
            agents.push(outcome.record);
            states.push(outcome.state);
        }
        self.states = states;
        self.next_round += 1;
        Ok(RoundRecord { t, params, agents })
    }

    /// Runs rounds `1..T` (that is, `T − 1` rounds), handing each record to
    /// `hook` instead of retaining it.
    pub fn run_streaming<F: FnMut(&RoundRecord)>(
        &mut self,
        horizon: usize,
        mut hook: F,
    ) -> Result<InvariantCounters> {
        while self.next_round < horizon {
            let record = self.run_round()?;
            hook(&record);
        }
        Ok(self.counters)
    }

    /// Runs rounds `1..T` and keeps the full trace.
    pub fn run_horizon(&mut self, horizon: usize) -> Result<RunTrace> {
        let mut rounds = Vec::with_capacity(horizon.saturating_sub(1));
        let counters = self.run_streaming(horizon, |r| rounds.push(r.clone()))?;
        Ok(RunTrace {
            fingerprint: trace_fingerprint(&rounds),
            rounds,
            counters,
        })
    }
}
