//! Bandit feedback: value-only access to the private local functions and the
//! two-point estimators built on top of it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// The local loss `f_{i,t}` and constraint `g_{i,t}` of one agent at one
/// round. Only values are exposed.
pub trait LocalFunctions {
    fn loss(&self, x: &Vector) -> f64;
    fn constraint(&self, x: &Vector) -> Vector;
}

/// Source of the time-varying local functions. Implementations must be
/// deterministic in `(agent, round)` so that replays and the metrics pass see
/// the same functions as the algorithm did.
pub trait Adversary: Sync {
    type Local: LocalFunctions;

    fn num_agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn constraint_dim(&self, agent: usize) -> usize;
    /// Agents are 0-based, rounds start at 1.
    fn local(&self, agent: usize, round: usize) -> Self::Local;
}

/// Uniform and Lipschitz bounds of the loss and constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemBounds {
    /// `|f| <= loss_bound`.
    pub loss_bound: f64,
    /// `||∂f|| <= loss_lipschitz` on the decision set.
    pub loss_lipschitz: f64,
    /// `||∂g|| <= constraint_lipschitz` on the decision set.
    pub constraint_lipschitz: f64,
}

impl ProblemBounds {
    pub fn new(loss_bound: f64, loss_lipschitz: f64, constraint_lipschitz: f64) -> Result<Self> {
        for (name, v) in [
            ("loss_bound", loss_bound),
            ("loss_lipschitz", loss_lipschitz),
            ("constraint_lipschitz", constraint_lipschitz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(Self {
            loss_bound,
            loss_lipschitz,
            constraint_lipschitz,
        })
    }
}

/// A unit direction together with the exploration radius it is used with.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointSample {
    direction: Vector,
    radius: f64,
}

impl TwoPointSample {
    pub fn new(direction: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(
                "radius",
                format!("must be positive, got {radius}"),
            ));
        }
        let norm = direction.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "direction",
                format!("must be a unit vector, norm is {norm}"),
            ));
        }
        Ok(Self { direction, radius })
    }

    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `x + δu`.
    pub fn probe(&self, x: &Vector) -> Vector {
        x + &self.direction * self.radius
    }
}

/// Function values observed at `x` and at the probe `x + δu`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackValues {
    pub f_at_x: f64,
    pub f_at_probe: f64,
    pub g_at_x: Vector,
    pub g_at_probe: Vector,
}

impl FeedbackValues {
    /// Queries `local` at `x` and at the probe of `sample`.
    pub fn observe<L: LocalFunctions>(local: &L, x: &Vector, sample: &TwoPointSample) -> Self {
        let probe = sample.probe(x);
        Self {
            f_at_x: local.loss(x),
            f_at_probe: local.loss(&probe),
            g_at_x: local.constraint(x),
            g_at_probe: local.constraint(&probe),
        }
    }
}

/// Uniform draw from the unit sphere of `R^p`, by normalizing a standard
/// Gaussian vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, p: usize) -> Vector {
    assert!(p >= 1, "sphere dimension must be at least 1");
    loop {
        let g = Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Uniform draw from the unit ball of `R^p`.
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, p: usize) -> Vector {
    let dir = sample_unit_sphere(rng, p);
    let u: f64 = rng.random();
    dir * u.powf(1.0 / p as f64)
}

/// `(p/δ)(f(x + δu) - f(x)) u`.
pub fn estimate_loss_grad(fb: &FeedbackValues, sample: &TwoPointSample) -> Vector {
    let p = sample.direction.len() as f64;
    sample.direction() * (p / sample.radius * (fb.f_at_probe - fb.f_at_x))
}

/// The scaled constraint difference `d = (p/δ)(g(x + δu) - g(x))`. The
/// Jacobian estimate is the rank-one matrix `u dᵀ`.
pub fn constraint_difference(fb: &FeedbackValues, sample: &TwoPointSample) -> Result<Vector> {
    if fb.g_at_x.len() != fb.g_at_probe.len() {
        return Err(Error::DimensionMismatch {
            expected: fb.g_at_x.len(),
            got: fb.g_at_probe.len(),
        });
    }
    let p = sample.direction.len() as f64;
    Ok((&fb.g_at_probe - &fb.g_at_x) * (p / sample.radius))
}

/// `p × m` estimate `u dᵀ` of the constraint Jacobian (transposed), whose
/// column `k` is the loss estimator applied to constraint component `k`.
pub fn estimate_constraint_jacobian(
    fb: &FeedbackValues,
    sample: &TwoPointSample,
) -> Result<Matrix> {
    let d = constraint_difference(fb, sample)?;
    Ok(sample.direction() * d.transpose())
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Estimates the smoothed value `E_{v ~ U(B)}[f(x + δv)]`.
pub fn smoothed_value_mc<F, R>(
    f: F,
    x: &Vector,
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate>
where
    F: Fn(&Vector) -> f64,
    R: Rng + ?Sized,
{
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    if delta == 0.0 {
        return Ok(MonteCarloEstimate {
            mean: f(x),
            std_error: 0.0,
        });
    }
    let p = x.len();
    // Welford.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n_samples {
        let v = sample_unit_ball(rng, p);
        let y = f(&(x + v * delta));
        let d = y - mean;
        mean += d / k as f64;
        m2 += d * (y - mean);
    }
    let var = if n_samples > 1 {
        m2 / (n_samples - 1) as f64
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n_samples as f64).sqrt(),
    })
}
