//! Stepsize, dual-scale, shrinkage and exploration sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which family of sequences to generate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// `α = t^{-c}`, `ξ = α`, `δ = r·α`.
    Theorem1 { c: f64 },
    /// `α = 1/(μt)`, `ξ = min(α, 1)`, `δ = r·ξ`.
    Theorem4 { mu: f64 },
    /// `α = a/t^e`, `ξ = min(s/t^e, 1)`, `δ = d/t^e`; the exploration radius
    /// does not scale with the inner radius.
    Custom {
        alpha_scale: f64,
        xi_scale: f64,
        delta_scale: f64,
        exponent: f64,
    },
}

/// Parameters of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundParams {
    pub alpha: f64,
    pub gamma: f64,
    pub xi: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub mode: ScheduleMode,
    /// `γ_t = γ₀ / α_t`.
    pub gamma0: f64,
    /// Inner radius `r` of the decision set.
    pub inner_radius: f64,
    /// Whether `γ₀` must respect `γ₀ <= 1/(4(p²+1)G₂²)`.
    pub theorem_compliant: bool,
}

/// Largest admissible dual scale `1/(4(p²+1)G₂²)`.
pub fn default_gamma0(p: usize, constraint_lipschitz: f64) -> Result<f64> {
    if !(constraint_lipschitz > 0.0) {
        return Err(Error::invalid(
            "constraint_lipschitz",
            format!("must be positive, got {constraint_lipschitz}"),
        ));
    }
    let p = p as f64;
    Ok(1.0 / (4.0 * (p * p + 1.0) * constraint_lipschitz * constraint_lipschitz))
}

fn check_round(t: usize) -> Result<()> {
    if t < 1 {
        return Err(Error::invalid("t", "rounds start at 1"));
    }
    Ok(())
}

pub fn theorem1_round(c: f64, gamma0: f64, inner_radius: f64, t: usize) -> Result<RoundParams> {
    check_round(t)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid("c", format!("must lie in (0, 1), got {c}")));
    }
    let alpha = (t as f64).powf(-c);
    Ok(RoundParams {
        alpha,
        gamma: gamma0 / alpha,
        xi: alpha,
        delta: inner_radius * alpha,
    })
}

pub fn theorem4_round(mu: f64, gamma0: f64, inner_radius: f64, t: usize) -> Result<RoundParams> {
    check_round(t)?;
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
    }
    let alpha = 1.0 / (mu * t as f64);
    let xi = alpha.min(1.0);
    Ok(RoundParams {
        alpha,
        gamma: gamma0 / alpha,
        xi,
        delta: inner_radius * xi,
    })
}

/// Named parameter presets. Only `paper-alg1` is known:
/// `α = 1/t`, `γ = 0.15/α`, `ξ = 1/t`, `δ = 0.01/t`.
pub fn table2_preset(name: &str, inner_radius: f64) -> Result<ScheduleParams> {
    match name {
        "paper-alg1" => Ok(ScheduleParams {
            mode: ScheduleMode::Custom {
                alpha_scale: 1.0,
                xi_scale: 1.0,
                delta_scale: 0.01,
                exponent: 1.0,
            },
            gamma0: 0.15,
            inner_radius,
            theorem_compliant: false,
        }),
        other => Err(Error::invalid(
            "preset",
            format!("unknown schedule preset `{other}`"),
        )),
    }
}

impl ScheduleParams {
    pub fn theorem1(c: f64, gamma0: f64, inner_radius: f64) -> Self {
        Self {
            mode: ScheduleMode::Theorem1 { c },
            gamma0,
            inner_radius,
            theorem_compliant: true,
        }
    }

    pub fn theorem4(mu: f64, gamma0: f64, inner_radius: f64) -> Self {
        Self {
            mode: ScheduleMode::Theorem4 { mu },
            gamma0,
            inner_radius,
            theorem_compliant: true,
        }
    }

    /// Checks the mode parameters, and the `γ₀` bound when the schedule is
    /// flagged theorem-compliant and `G₂` is known.
    pub fn validate(&self, p: usize, constraint_lipschitz: Option<f64>) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::invalid(
                "gamma0",
                format!("must be positive, got {}", self.gamma0),
            ));
        }
        if !(self.inner_radius > 0.0) {
            return Err(Error::invalid("inner_radius", "must be positive"));
        }
        match self.mode {
            ScheduleMode::Theorem1 { c } if !(c > 0.0 && c < 1.0) => {
                return Err(Error::invalid("c", format!("must lie in (0, 1), got {c}")));
            }
            ScheduleMode::Theorem4 { mu } if !(mu > 0.0) => {
                return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
            }
            ScheduleMode::Custom {
                alpha_scale,
                xi_scale,
                delta_scale,
                exponent,
            } => {
                if !(alpha_scale > 0.0 && xi_scale > 0.0 && delta_scale > 0.0) {
                    return Err(Error::invalid("custom", "scales must be positive"));
                }
                if !(exponent >= 0.0) {
                    return Err(Error::invalid("exponent", "must be nonnegative"));
                }
                // δ_t <= r ξ_t for every t. Once ξ is capped at 1 the ratio
                // only improves, so checking the uncapped scales suffices
                // together with the first round.
                if delta_scale > self.inner_radius * xi_scale.min(1.0) {
                    return Err(Error::invalid(
                        "delta_scale",
                        format!(
                            "exploration radius {delta_scale} exceeds inner radius times shrinkage {}",
                            self.inner_radius * xi_scale.min(1.0)
                        ),
                    ));
                }
            }
            _ => {}
        }
        if self.theorem_compliant {
            if let Some(g2) = constraint_lipschitz {
                let bound = default_gamma0(p, g2)?;
                if self.gamma0 > bound * (1.0 + 1e-12) {
                    return Err(Error::invalid(
                        "gamma0",
                        format!("{} exceeds the admissible bound {bound}", self.gamma0),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn round(&self, t: usize) -> Result<RoundParams> {
        match self.mode {
            ScheduleMode::Theorem1 { c } => theorem1_round(c, self.gamma0, self.inner_radius, t),
            ScheduleMode::Theorem4 { mu } => theorem4_round(mu, self.gamma0, self.inner_radius, t),
            ScheduleMode::Custom {
                alpha_scale,
                xi_scale,
                delta_scale,
                exponent,
            } => {
                check_round(t)?;
                let decay = (t as f64).powf(-exponent);
                let alpha = alpha_scale * decay;
                Ok(RoundParams {
                    alpha,
                    gamma: self.gamma0 / alpha,
                    xi: (xi_scale * decay).min(1.0),
                    delta: delta_scale * decay,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn theorem1_examples() {
        let r = theorem1_round(0.5, 0.1, 5.0, 4).unwrap();
        assert!(
            close(r.alpha, 0.5) && close(r.gamma, 0.2) && close(r.xi, 0.5) && close(r.delta, 2.5)
        );
        let r = theorem1_round(0.3, 0.1, 5.0, 1).unwrap();
        assert_eq!((r.alpha, r.xi, r.delta), (1.0, 1.0, 5.0));
        assert!(theorem1_round(0.5, 0.1, 5.0, 0).is_err());
        assert!(theorem1_round(1.0, 0.1, 5.0, 3).is_err());
    }

    #[test]
    fn theorem4_examples() {
        let r = theorem4_round(2.0, 0.1, 5.0, 10).unwrap();
        assert!(close(r.alpha, 0.05));
        let r = theorem4_round(1.0, 0.1, 5.0, 1).unwrap();
        assert_eq!((r.alpha, r.xi), (1.0, 1.0));
        // μ < 1: the shrinkage is capped at one while α is not.
        let r = theorem4_round(0.25, 0.1, 5.0, 1).unwrap();
        assert_eq!((r.alpha, r.xi, r.delta), (4.0, 1.0, 5.0));
        assert!(theorem4_round(0.0, 0.1, 5.0, 1).is_err());
    }

    #[test]
    fn paper_preset_examples() {
        let s = table2_preset("paper-alg1", 5.0).unwrap();
        assert!(!s.theorem_compliant);
        let r = s.round(1).unwrap();
        assert_eq!((r.alpha, r.gamma, r.xi, r.delta), (1.0, 0.15, 1.0, 0.01));
        let r = s.round(10).unwrap();
        assert!(close(r.alpha, 0.1) && close(r.gamma, 1.5) && close(r.delta, 0.001));
        assert!(table2_preset("yi2023", 5.0).is_err());
        s.validate(10, Some(1.0)).unwrap();
    }

    #[test]
    fn default_gamma0_examples() {
        assert!(close(default_gamma0(1, 0.5).unwrap(), 0.5));
        assert!(close(default_gamma0(10, 1.0).unwrap(), 1.0 / 404.0));
        assert!(default_gamma0(10, 2.0).unwrap() < default_gamma0(10, 1.0).unwrap());
        assert!(default_gamma0(3, 0.0).is_err());
    }

    #[test]
    fn validation_rejects_bad_modes() {
        let bound = default_gamma0(5, 2.0).unwrap();
        assert!(ScheduleParams::theorem1(0.5, bound, 5.0)
            .validate(5, Some(2.0))
            .is_ok());
        assert!(ScheduleParams::theorem1(0.5, 2.0 * bound, 5.0)
            .validate(5, Some(2.0))
            .is_err());
        assert!(ScheduleParams::theorem1(1.5, bound, 5.0)
            .validate(5, None)
            .is_err());
        assert!(ScheduleParams::theorem4(-1.0, bound, 5.0)
            .validate(5, None)
            .is_err());
        let mut s = table2_preset("paper-alg1", 5.0).unwrap();
        s.inner_radius = 0.001;
        assert!(s.validate(10, None).is_err());
    }

    #[test]
    fn sequences_respect_the_input_contract() {
        let schedules = [
            ScheduleParams::theorem1(0.5, 0.01, 5.0),
            ScheduleParams::theorem1(0.9, 0.01, 0.3),
            ScheduleParams::theorem4(1.0, 0.01, 5.0),
            ScheduleParams::theorem4(0.3, 0.01, 2.0),
            table2_preset("paper-alg1", 5.0).unwrap(),
        ];
        for s in schedules {
            let mut prev: Option<RoundParams> = None;
            for t in 1..=100_000 {
                let r = s.round(t).unwrap();
                assert!(r.alpha > 0.0 && r.gamma > 0.0 && r.delta > 0.0);
                assert!(r.xi > 0.0 && r.xi <= 1.0);
                assert!(r.delta <= s.inner_radius * r.xi);
                assert!((r.gamma * r.alpha - s.gamma0).abs() <= 4.0 * f64::EPSILON * s.gamma0);
                if let Some(p) = prev {
                    assert!(r.alpha <= p.alpha && r.gamma >= p.gamma && r.xi <= p.xi);
                }
                prev = Some(r);
            }
        }
    }
}
