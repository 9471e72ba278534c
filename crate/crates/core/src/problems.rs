//! Seeded online linear regression with time-varying linear constraints.
//!
//! At round `t` agent `i` faces
//! `f(x) = ½‖A x − ϑ‖² + (μ/2)‖x‖²` and `g(x) = B x − b` with
//! `A ∈ U[−1, 1]^{q×p}`, `ϑ = A·1 + ζ`, `ζ` standard normal clipped to
//! `[−6, 6]`, `B ∈ U[0, 2]^{m×p}` and `b ∈ U[b₀, b₀ + 1]^m`. Parameters are
//! regenerated from `(seed, i, t)` on demand.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxSet, Halfspace};
use crate::oracle::{Adversary, LocalFunctions, ProblemBounds};
use crate::rng::{stream, Purpose};
use crate::{Matrix, Vector};

/// Noise entries are clipped to `[−NOISE_CLIP, NOISE_CLIP]` so the loss is
/// uniformly bounded on the box.
pub const NOISE_CLIP: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionProblemSpec {
    pub n: usize,
    pub p: usize,
    /// Rows of `A`.
    pub q_rows: usize,
    /// Rows of `B`, i.e. constraints per agent.
    pub m_rows: usize,
    pub half_width: f64,
    /// Lower end `b₀` of the offset range.
    pub b_offset: f64,
    /// Ridge weight `μ`; zero gives the plain least-squares loss.
    #[serde(default)]
    pub ridge: f64,
    pub seed: u64,
}

impl RegressionProblemSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("p", self.p),
            ("q_rows", self.q_rows),
            ("m_rows", self.m_rows),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.half_width > 0.0) {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        if !(self.b_offset > 0.0 && self.b_offset.is_finite()) {
            return Err(Error::invalid("b_offset", "must be positive and finite"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid("ridge", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn decision_set(&self) -> Result<BoxSet> {
        BoxSet::new(self.half_width, self.p)
    }

    pub fn materialize(&self, agent: usize, t: usize) -> ProblemInstanceAt {
        let mut rng = stream(self.seed, agent, t, Purpose::Problem);
        let (q, m, p) = (self.q_rows, self.m_rows, self.p);
        let a = Matrix::from_fn(q, p, |_, _| rng.random_range(-1.0..=1.0));
        let noise = Vector::from_fn(q, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z.clamp(-NOISE_CLIP, NOISE_CLIP)
        });
        let theta = &a * Vector::from_element(p, 1.0) + noise;
        let b_mat = Matrix::from_fn(m, p, |_, _| rng.random_range(0.0..=2.0));
        let b_vec = Vector::from_fn(m, |_, _| {
            rng.random_range(self.b_offset..=self.b_offset + 1.0)
        });
        ProblemInstanceAt {
            a,
            theta,
            b_mat,
            b_vec,
            ridge: self.ridge,
        }
    }

    /// Analytic bounds over the box and the entry ranges:
    /// `‖A‖ <= √(qp)`, `‖B‖ <= 2√(mp)`, and on the box
    /// `‖A x − ϑ‖ = ‖A(x − 1) − ζ‖ <= √(qp)·√p(h + 1) + 6√q =: ρ`, so
    /// `G₁ = √(qp)·ρ + μR`, `F = ρ²/2 + μR²/2`, `G₂ = 2√(mp)`.
    pub fn compute_bounds(&self) -> Result<ProblemBounds> {
        let (p, q, m) = (self.p as f64, self.q_rows as f64, self.m_rows as f64);
        let outer = self.half_width * p.sqrt();
        let a_norm = (q * p).sqrt();
        let residual = a_norm * p.sqrt() * (self.half_width + 1.0) + NOISE_CLIP * q.sqrt();
        ProblemBounds::new(
            0.5 * residual * residual + 0.5 * self.ridge * outer * outer,
            a_norm * residual + self.ridge * outer,
            2.0 * (m * p).sqrt(),
        )
    }

    /// The origin with margin `b₀`: `g(0) = −b <= −b₀·1`.
    pub fn slater_certificate(&self) -> Result<SlaterCertificate> {
        if !(self.b_offset > 0.0) {
            return Err(Error::invalid(
                "b_offset",
                format!(
                    "no strictly feasible point without a positive offset, got {}",
                    self.b_offset
                ),
            ));
        }
        Ok(SlaterCertificate {
            point: Vector::zeros(self.p),
            margin: self.b_offset,
        })
    }

    /// `Σ_{t ≤ T} f_t` with `f_t = (1/n) Σ_i f_{i,t}`, as an explicit quadratic.
    pub fn cumulative_objective(&self, horizon: usize) -> QuadraticObjective {
        let p = self.p;
        let mut hessian = Matrix::zeros(p, p);
        let mut linear = Vector::zeros(p);
        let mut constant = 0.0;
        let w = 1.0 / self.n as f64;
        for t in 1..=horizon {
            for i in 0..self.n {
                let inst = self.materialize(i, t);
                hessian += inst.a.transpose() * &inst.a * w;
                linear += inst.a.transpose() * &inst.theta * w;
                constant += 0.5 * inst.theta.norm_squared() * w;
            }
        }
        hessian += Matrix::identity(p, p) * (self.ridge * horizon as f64);
        QuadraticObjective {
            hessian,
            linear,
            constant,
        }
    }

    /// Every constraint row generated in rounds `1..=horizon`, as halfspaces.
    pub fn pooled_halfspaces(&self, horizon: usize) -> Vec<Halfspace> {
        let mut out = Vec::with_capacity(self.n * self.m_rows * horizon);
        for t in 1..=horizon {
            for i in 0..self.n {
                let inst = self.materialize(i, t);
                out.extend(Halfspace::from_rows(&inst.b_mat, &inst.b_vec));
            }
        }
        out
    }
}

/// `½ xᵀ H x − lᵀ x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub hessian: Matrix,
    pub linear: Vector,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) - self.linear.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.hessian * x - &self.linear
    }
}

/// A point strictly feasible for every generated constraint, with margin.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterCertificate {
    pub point: Vector,
    pub margin: f64,
}

/// Parameters of one agent at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstanceAt {
    pub a: Matrix,
    pub theta: Vector,
    pub b_mat: Matrix,
    pub b_vec: Vector,
    pub ridge: f64,
}

impl ProblemInstanceAt {
    pub fn eval_loss(&self, x: &Vector) -> Result<f64> {
        if x.len() != self.a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.a.ncols(),
                got: x.len(),
            });
        }
        Ok(self.loss(x))
    }

    pub fn eval_constraint(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.b_mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.b_mat.ncols(),
                got: x.len(),
            });
        }
        Ok(self.constraint(x))
    }

    pub fn loss_gradient(&self, x: &Vector) -> Vector {
        self.a.transpose() * (&self.a * x - &self.theta) + x * self.ridge
    }
}

impl LocalFunctions for ProblemInstanceAt {
    fn loss(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x - &self.theta).norm_squared() + 0.5 * self.ridge * x.norm_squared()
    }

    fn constraint(&self, x: &Vector) -> Vector {
        &self.b_mat * x - &self.b_vec
    }
}

/// The regression family as a bandit adversary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionProblem {
    pub spec: RegressionProblemSpec,
}

impl RegressionProblem {
    pub fn new(spec: RegressionProblemSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl Adversary for RegressionProblem {
    type Local = ProblemInstanceAt;

    fn num_agents(&self) -> usize {
        self.spec.n
    }

    fn dim(&self) -> usize {
        self.spec.p
    }

    fn constraint_dim(&self, _agent: usize) -> usize {
        self.spec.m_rows
    }

    fn local(&self, agent: usize, round: usize) -> ProblemInstanceAt {
        self.spec.materialize(agent, round)
    }
}

/// `‖∂g‖` of a linear constraint is the spectral norm of `B`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    m.singular_values().max()
}
