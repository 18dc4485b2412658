//! Sampling-based estimators and falsifiers for the nonlinearity conditions:
//! the two-parameter angle condition on gradients, balancing across the
//! solution, weak/strong tangential cone constants, radial monotonicity,
//! Lipschitz constants, and the linear gradient-growth bound.
//!
//! Estimators report one-sided sample extremes. For a sup-type constant the
//! returned value is a lower-bound estimate of the true constant; a witness
//! is produced only when a condition is outright falsified at its tested
//! threshold. Every estimator is deterministic given `(seed, samples)` and
//! reduces in sample-index order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::{FunctionalModel, NoisyFunctional, OperatorModel, PhiBound};
use crate::sampling::BallSampler;
use crate::space::{inner, norm, BallSpec, Vector};

/// The gamma parameter of the angle condition. `Infinite` makes the premise
/// tautological (all pairs admissible); `Finite(0.0)` restricts the first
/// point to the global minimum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub fn admits(&self, j1: f64, j2: f64) -> bool {
        match self {
            Gamma::Finite(g) => j1 <= g * j2,
            Gamma::Infinite => true,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Gamma::Finite(g) => *g,
            Gamma::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Gamma::Finite(g) => s.serialize_f64(*g),
            Gamma::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(g) if g.is_finite() && g >= 0.0 => Ok(Gamma::Finite(g)),
            Raw::Num(g) => Err(serde::de::Error::custom(format!(
                "gamma must be finite and nonnegative or \"infinity\", got {g}"
            ))),
            Raw::Str(s) if s == "infinity" => Ok(Gamma::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "unknown gamma marker {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("inconclusive: no admissible sample for {estimator} (all below threshold)")]
    Inconclusive { estimator: &'static str },
    #[error("{param} must lie in {range}, got {value}")]
    BadParameter {
        param: &'static str,
        range: &'static str,
        value: f64,
    },
}

/// A point (or pair) at which a condition failed its tested threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub condition: String,
    pub x1: Vector,
    pub x2: Option<Vector>,
    pub measured: f64,
    pub threshold: f64,
}

/// Outcome of a pass/fail condition check with falsification witnesses.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub witnesses: Vec<ConditionWitness>,
}

/// Sampled estimate of the gradient's Lipschitz constant: the maximum of
/// `||grad(x1) - grad(x2)|| / ||x1 - x2||` over random pairs, short-distance
/// pairs (`~1e-3 * rho`), and short pairs whose direction is sharpened by a
/// few power iterations on finite gradient differences. The power-iteration
/// pairs matter in higher dimensions, where random directions systematically
/// miss the top curvature direction.
pub fn estimate_lipschitz(
    model: &FunctionalModel,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut sampler = BallSampler::new(ball, seed);
    let mut best: f64 = 0.0;
    {
        let mut ratio = |x1: &Vector, x2: &Vector| {
            let d = crate::space::dist(x1, x2);
            if d > 1e-300 {
                let g = crate::space::dist(&model.gradient(x1), &model.gradient(x2)) / d;
                if g > best {
                    best = g;
                }
            }
        };
        let pair_rounds = samples / 2;
        for i in 0..pair_rounds {
            let x1 = sampler.uniform_point();
            if i % 2 == 0 {
                let x2 = sampler.uniform_point();
                ratio(&x1, &x2);
            } else {
                let dir = sampler.unit_direction();
                let x2 = x1.add_scaled(1e-3 * ball.radius(), &dir);
                ratio(&x1, &x2);
            }
        }
    }

    // local curvature probe: power iteration on v -> grad(x + eps v) - grad(x)
    let probe_points = (samples / 40).clamp(4, 64);
    let eps = 1e-4 * ball.radius();
    for _ in 0..probe_points {
        let x = sampler.uniform_point();
        let g0 = model.gradient(&x);
        let mut v = sampler.unit_direction();
        for _ in 0..10 {
            let w = model.gradient(&x.add_scaled(eps, &v)).sub(&g0);
            let n = norm(&w);
            if n <= 1e-300 {
                break;
            }
            v = w.scale(1.0 / n);
        }
        let g = norm(&model.gradient(&x.add_scaled(eps, &v)).sub(&g0)) / eps;
        best = best.max(g);
    }
    best
}

/// Smallest `beta` consistent with the sampled pairs for the angle condition
/// at the given `gamma`: the maximum of `-<grad(x2), x2-x1> / ||grad(x2)||^2`
/// over admissible pairs with `||grad(x2)|| >= grad_floor`.
pub fn estimate_beta(
    model: &FunctionalModel,
    ball: &BallSpec,
    gamma: Gamma,
    samples: usize,
    grad_floor: f64,
    seed: u64,
) -> Result<f64, ConditionError> {
    if !grad_floor.is_finite() || grad_floor <= 0.0 {
        return Err(ConditionError::BadParameter {
            param: "grad_floor",
            range: "(0, inf)",
            value: grad_floor,
        });
    }
    // gamma = 0 pins the first point to the global minimum
    let pin_to_center = matches!(gamma, Gamma::Finite(g) if g == 0.0);
    let mut sampler = BallSampler::new(ball, seed);
    let center = ball.center().clone();
    let dim = ball.dim();
    let mut best: Option<f64> = None;

    let mut consider = |x1: &Vector, x2: &Vector| {
        let g2 = model.gradient(x2);
        let gn2 = inner(&g2, &g2);
        if gn2 < grad_floor * grad_floor {
            return;
        }
        if !gamma.admits(model.value(x1), model.value(x2)) {
            return;
        }
        let r = -inner(&g2, &x2.sub(x1)) / gn2;
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    };

    // structured: rays through the center along coordinate axes, both signs,
    // a few radii; extremal ratios often sit on rays.
    let ray_radii = [0.25, 0.5, 0.9, 1.0];
    for i in 0..dim.min(32) {
        for &t in &ray_radii {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = sign * t * ball.radius();
                let x2 = center.add(&Vector::new(e).expect("finite"));
                consider(&center, &x2);
                if !pin_to_center {
                    let mirrored = center.sub(&x2.sub(&center));
                    consider(&mirrored, &x2);
                }
            }
        }
    }

    for _ in 0..samples {
        let x2 = sampler.uniform_point();
        if pin_to_center {
            consider(&center, &x2);
        } else {
            let x1 = sampler.uniform_point();
            consider(&x1, &x2);
            consider(&center, &x2);
        }
    }
    best.ok_or(ConditionError::Inconclusive {
        estimator: "estimate_beta",
    })
}

/// Smallest weak-cone constant consistent with the samples: maximum over
/// sampled `x` (residual above the floor) of
/// `<F(x) - F(x*) - F'(x)(x - x*), F(x) - F(x*)> / ||F(x) - F(x*)||^2`,
/// clamped at zero.
pub fn estimate_eta_weak(
    op: &OperatorModel,
    ball: &BallSpec,
    samples: usize,
    residual_floor: f64,
    seed: u64,
) -> Result<f64, ConditionError> {
    let mut sampler = BallSampler::new(ball, seed);
    let center = ball.center();
    let f_star = op.apply(center);
    let mut best: Option<f64> = None;
    let mut consider = |x: &Vector| {
        let fx = op.apply(x);
        let r = fx.sub(&f_star);
        let rn2 = inner(&r, &r);
        if rn2 < residual_floor * residual_floor {
            return;
        }
        let remainder = r.sub(&op.jacobian_apply(x, &x.sub(center)));
        let ratio = inner(&remainder, &r) / rn2;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    };
    for i in 0..samples {
        let x = if i % 4 == 0 {
            sampler.shell_point(0.9, 1.0)
        } else {
            sampler.uniform_point()
        };
        consider(&x);
    }
    best.map(|b| b.max(0.0)).ok_or(ConditionError::Inconclusive {
        estimator: "estimate_eta_weak",
    })
}

/// Draws the `i`-th pair of the strong-cone sampling schedule: antipodal
/// shell pairs (extremal for one-signed curvature), short-distance pairs,
/// and independent uniform pairs. Shared by [`estimate_eta_strong`] and
/// [`check_cone_implications`] so that, with equal `(seed, samples)`, the
/// two operate on the same pair set and the implication check at the
/// estimated constant holds by construction.
fn cone_pair(sampler: &mut BallSampler, ball: &BallSpec, i: usize) -> (Vector, Vector) {
    let center = ball.center();
    match i % 3 {
        0 => {
            let x = sampler.shell_point(0.8, 1.0);
            let mirrored = center.sub(&x.sub(center));
            (x, mirrored)
        }
        1 => {
            let x = sampler.uniform_point();
            let dir = sampler.unit_direction();
            let xt = x.add_scaled(1e-3 * ball.radius(), &dir);
            (x, xt)
        }
        _ => (sampler.uniform_point(), sampler.uniform_point()),
    }
}

/// Smallest strong-cone constant consistent with sampled pairs: maximum of
/// `||F(x) - F(xt) - F'(x)(x - xt)|| / ||F(x) - F(xt)||`.
pub fn estimate_eta_strong(
    op: &OperatorModel,
    ball: &BallSpec,
    samples: usize,
    residual_floor: f64,
    seed: u64,
) -> Result<f64, ConditionError> {
    let mut sampler = BallSampler::new(ball, seed);
    let mut best: Option<f64> = None;
    for i in 0..samples {
        let (x, xt) = cone_pair(&mut sampler, ball, i);
        let d = op.apply(&x).sub(&op.apply(&xt));
        let dn = norm(&d);
        if dn < residual_floor {
            continue;
        }
        let remainder = d.sub(&op.jacobian_apply(&x, &x.sub(&xt)));
        let ratio = norm(&remainder) / dn;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| b.max(0.0)).ok_or(ConditionError::Inconclusive {
        estimator: "estimate_eta_strong",
    })
}

/// Verifies, on sampled pairs, the two-sided linearization estimate
/// `||F'(x)(xt - x)|| / (1 + eta) <= ||F(xt) - F(x)|| <= ||F'(x)(xt - x)|| / (1 - eta)`
/// and its expanded quadratic form
/// `<F'(x)(x - z), F(x) - F(z)> >= (1 - eta^2)/2 ||F(x) - F(z)||^2 + 1/2 ||F'(x)(x - z)||^2`.
pub fn check_cone_implications(
    eta: f64,
    op: &OperatorModel,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<CheckOutcome, ConditionError> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(ConditionError::BadParameter {
            param: "eta",
            range: "(0, 1)",
            value: eta,
        });
    }
    let mut sampler = BallSampler::new(ball, seed);
    let mut witnesses = Vec::new();
    for i in 0..samples {
        let (x, xt) = cone_pair(&mut sampler, ball, i);
        let diff = op.apply(&xt).sub(&op.apply(&x));
        let dn = norm(&diff);
        let jn = norm(&op.jacobian_apply(&x, &xt.sub(&x)));
        let tol = 1e-9 * dn.max(jn).max(1.0);
        if jn / (1.0 + eta) > dn + tol {
            witnesses.push(ConditionWitness {
                condition: "two-sided-lower".into(),
                x1: x.clone(),
                x2: Some(xt.clone()),
                measured: jn / (1.0 + eta),
                threshold: dn,
            });
        }
        if dn > jn / (1.0 - eta) + tol {
            witnesses.push(ConditionWitness {
                condition: "two-sided-upper".into(),
                x1: x.clone(),
                x2: Some(xt.clone()),
                measured: dn,
                threshold: jn / (1.0 - eta),
            });
        }
        // expanded form, with (x, z) = (x, xt)
        let lhs = inner(&op.jacobian_apply(&x, &x.sub(&xt)), &op.apply(&x).sub(&op.apply(&xt)));
        let rhs = 0.5 * (1.0 - eta * eta) * dn * dn + 0.5 * jn * jn;
        let tol2 = 1e-9 * lhs.abs().max(rhs.abs()).max(1.0);
        if lhs < rhs - tol2 {
            witnesses.push(ConditionWitness {
                condition: "expanded-quadratic".into(),
                x1: x,
                x2: Some(xt),
                measured: lhs,
                threshold: rhs,
            });
        }
    }
    Ok(CheckOutcome {
        passed: witnesses.is_empty(),
        witnesses,
    })
}

/// For sampled annulus offsets `z`, binary-searches the largest
/// `tau in (0, 1]` with `J(x* - tau z) <= gamma J(x* + z)` and returns the
/// minimum over samples (0, with a witness, if some `z` admits none).
pub fn estimate_tau_balancing(
    model: &FunctionalModel,
    ball: &BallSpec,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, Vec<ConditionWitness>), ConditionError> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(ConditionError::BadParameter {
            param: "gamma",
            range: "(0, inf)",
            value: gamma,
        });
    }
    if ball.inner_radius() <= 0.0 {
        return Err(ConditionError::BadParameter {
            param: "ball.inner_radius",
            range: "(0, radius)",
            value: ball.inner_radius(),
        });
    }
    let mut sampler = BallSampler::new(ball, seed);
    let center = ball.center();
    let mut tau_min: f64 = 1.0;
    let mut witnesses = Vec::new();
    for _ in 0..samples {
        let z = sampler.annulus_offset();
        let rhs = gamma * model.value(&center.add(&z));
        let feasible = |tau: f64| model.value(&center.add_scaled(-tau, &z)) <= rhs;
        let tau = if feasible(1.0) {
            1.0
        } else {
            // bisection on the feasibility boundary; `lo` is only ever moved
            // to a tau that tested feasible
            let mut lo = 0.0_f64;
            let mut hi = 1.0_f64;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if tau == 0.0 {
            witnesses.push(ConditionWitness {
                condition: "balancing".into(),
                x1: center.add(&z),
                x2: Some(center.sub(&z)),
                measured: 0.0,
                threshold: rhs,
            });
            tau_min = 0.0;
        } else {
            tau_min = tau_min.min(tau);
        }
    }
    Ok((tau_min, witnesses))
}

/// Checks, per sampled `x`, that `t -> t^(-2(1-eta)) * J_ls(x* + t(x - x*))`
/// is nondecreasing on a grid of `t in (0, 1]`, where
/// `J_ls(x) = 1/2 ||F(x) - F(x*)||^2`. Equivalent to the weak cone condition
/// at that `eta`.
pub fn check_radial_monotonicity(
    op: &OperatorModel,
    ball: &BallSpec,
    eta: f64,
    samples: usize,
    grid: usize,
    seed: u64,
) -> Result<CheckOutcome, ConditionError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ConditionError::BadParameter {
            param: "eta",
            range: "[0, 1]",
            value: eta,
        });
    }
    if grid < 3 {
        return Err(ConditionError::BadParameter {
            param: "grid",
            range: "[3, inf)",
            value: grid as f64,
        });
    }
    let mut sampler = BallSampler::new(ball, seed);
    let center = ball.center();
    let f_star = op.apply(center);
    let exponent = -2.0 * (1.0 - eta);
    let mut witnesses = Vec::new();
    for _ in 0..samples {
        let x = sampler.uniform_point();
        let offset = x.sub(center);
        let mut prev: Option<f64> = None;
        let mut scale: f64 = 1.0;
        for i in 1..=grid {
            let t = i as f64 / grid as f64;
            let p = center.add_scaled(t, &offset);
            let r = op.apply(&p).sub(&f_star);
            let val = t.powf(exponent) * 0.5 * inner(&r, &r);
            scale = scale.max(val.abs());
            if let Some(pv) = prev {
                if val < pv - 1e-10 * scale {
                    witnesses.push(ConditionWitness {
                        condition: "radial-monotonicity".into(),
                        x1: x.clone(),
                        x2: Some(p.clone()),
                        measured: val,
                        threshold: pv,
                    });
                    break;
                }
            }
            prev = Some(val);
        }
    }
    Ok(CheckOutcome {
        passed: witnesses.is_empty(),
        witnesses,
    })
}

/// Admissible angle-condition parameters implied by a strong cone constant
/// `eta < 1` for the associated least-squares functional:
/// `gamma` at 90% of its supremum `(sqrt(1-eta^2)/(1+sqrt(1-eta^2)))^2` and
/// `beta = -[(1-eta^2)(1-sqrt(gamma))^2 - gamma] / (2 jac_sup^2) < 0`.
pub fn derive_ncgb_from_cone(eta: f64, jac_sup: f64) -> Result<(f64, f64), ConditionError> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(ConditionError::BadParameter {
            param: "eta",
            range: "(0, 1)",
            value: eta,
        });
    }
    if !jac_sup.is_finite() || jac_sup <= 0.0 {
        return Err(ConditionError::BadParameter {
            param: "jac_sup",
            range: "(0, inf)",
            value: jac_sup,
        });
    }
    let s = (1.0 - eta * eta).sqrt();
    let gamma_sup = (s / (1.0 + s)).powi(2);
    let gamma = 0.9 * gamma_sup;
    let beta = -((1.0 - eta * eta) * (1.0 - gamma.sqrt()).powi(2) - gamma)
        / (2.0 * jac_sup * jac_sup);
    Ok((gamma, beta))
}

/// Calibrates the linear gradient-growth bound from samples:
/// `coefficient = 1.05 * max ||grad Jd(x)||^2 / Jd(x)`, excluding samples
/// with `Jd(x) < 1e-14`.
pub fn calibrate_phi(
    noisy: &NoisyFunctional,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<PhiBound, ConditionError> {
    let mut sampler = BallSampler::new(ball, seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let x = sampler.uniform_point();
        let v = noisy.model().value(&x);
        if v < 1e-14 {
            continue;
        }
        let g = noisy.model().gradient(&x);
        let ratio = inner(&g, &g) / v;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| PhiBound {
        coefficient: 1.05 * b,
    })
    .ok_or(ConditionError::Inconclusive {
        estimator: "calibrate_phi",
    })
}

/// Default gradient floor for [`estimate_beta`], scaled to the problem.
pub fn default_grad_floor(lipschitz_hat: f64, radius: f64) -> f64 {
    1e-8 * (1.0 + lipschitz_hat * radius)
}

/// Diagnostic summary of the ratio `J(x* + d) / J(x* - d)` along sampled
/// rays with shrinking offsets. Values bounded away from zero support the
/// balancing hypothesis; this is reported, never asserted.
#[derive(Clone, Debug, Serialize)]
pub struct RayRatioSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub samples: usize,
}

pub fn ray_ratio_summary(
    model: &FunctionalModel,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Option<RayRatioSummary> {
    let mut sampler = BallSampler::new(ball, seed);
    let center = ball.center();
    let mut ratios = Vec::new();
    let magnitudes = [0.5, 0.1, 0.02];
    for _ in 0..samples {
        let dir = sampler.unit_direction();
        for &m in &magnitudes {
            let d = dir.scale(m * ball.radius());
            let plus = model.value(&center.add(&d));
            let minus = model.value(&center.sub(&d));
            if minus > 1e-300 {
                ratios.push(plus / minus);
            }
        }
    }
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    Some(RayRatioSummary {
        min: ratios[0],
        median: ratios[ratios.len() / 2],
        max: ratios[ratios.len() - 1],
        samples: ratios.len(),
    })
}

/// Aggregated condition estimates for one problem, as emitted by the
/// diagnose command.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    /// Gamma at which `beta_hat` was estimated.
    pub gamma: Gamma,
    /// Smallest beta consistent with the samples at `gamma` (lower-bound
    /// estimate), when any pair was admissible.
    pub beta_hat: Option<f64>,
    /// Beta estimate at gamma = 0 (the variant the stopping constants use).
    pub beta_gamma_zero_hat: Option<f64>,
    pub eta_weak_hat: Option<f64>,
    pub eta_strong_hat: Option<f64>,
    /// Minimum balancing tau over samples at `gamma`.
    pub tau_hat: Option<f64>,
    pub lipschitz_hat: f64,
    pub phi_coefficient_hat: Option<f64>,
    pub samples: usize,
    pub witnesses: Vec<ConditionWitness>,
    /// Angle-condition parameters derived from the strong cone estimate when
    /// it is below 1, together with the balancing lower bound
    /// `(1 - eta) gamma / (1 + eta)` and a confirmation estimate at the
    /// derived gamma.
    pub derived_from_cone: Option<DerivedConeParams>,
    /// Ratio diagnostics along rays through the solution.
    pub ray_ratios: Option<RayRatioSummary>,
    /// Direction labels: sample extremes only bound sup-type constants from
    /// below; a condition is refuted only via a witness.
    pub estimate_kind: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivedConeParams {
    pub eta: f64,
    pub jac_sup: f64,
    pub gamma: f64,
    pub beta: f64,
    pub tau_lower_bound: f64,
    pub beta_hat_at_gamma: Option<f64>,
}
