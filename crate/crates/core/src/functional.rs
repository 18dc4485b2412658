//! Functional and operator models.
//!
//! A [`FunctionalModel`] bundles the objective `J`, its gradient, a declared
//! Lipschitz constant for the gradient, and the ball it is defined on. The
//! stepsize of the descent iteration is folded into the functional as a
//! multiplicative `step_scale`, so the iteration itself is always
//! `x_{k+1} = x_k - grad(x_k)`.
//!
//! [`NoisyFunctional`] wraps a perturbed functional together with validated
//! noise metadata: `delta` bounds the gradient gap and `psi_delta` the value
//! gap against the exact functional, uniformly over the ball.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::sampling::{unit_direction_from_seed, BallSampler};
use crate::space::{dist, inner, norm, BallSpec, Vector};

/// Samples used when estimating suprema (`sup ||F'||`, `sup ||F - y||`,
/// Lipschitz constants) at construction time.
pub const SUPREMUM_SAMPLES: usize = 1000;
/// Fixed seed for construction-time supremum estimation, independent of the
/// noise seed so that repeated builds agree.
pub const SUPREMUM_SEED: u64 = 0x5EED_0001;
/// Safety inflation applied to sampled suprema: sample maxima are lower
/// bounds, the noise metadata must be upper bounds.
pub const SUPREMUM_INFLATION: f64 = 1.05;
/// Sample pairs for the construction-time noise-bound verification pass.
pub const NOISE_VERIFY_SAMPLES: usize = 200;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step_scale must be positive and finite, got {0}")]
    BadStepScale(f64),
    #[error("data noise level must be positive and finite, got {0}")]
    BadNoiseLevel(f64),
    #[error(
        "point is too close to the ball boundary for a width-{h} stencil \
         (distance to boundary {margin})"
    )]
    TooCloseToBoundary { h: f64, margin: f64 },
    #[error(
        "sampled noise bound violated: {quantity} = {observed} exceeds declared {declared} \
         at a test point"
    )]
    NoiseBoundViolated {
        quantity: &'static str,
        observed: f64,
        declared: f64,
    },
}

type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MapFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type BilinFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Differentiable nonnegative objective on a ball, with the descent stepsize
/// already folded in.
#[derive(Clone)]
pub struct FunctionalModel {
    value_fn: ValueFn,
    grad_fn: GradFn,
    lipschitz: f64,
    step_scale: f64,
    domain: BallSpec,
}

impl FunctionalModel {
    pub fn new(
        value_fn: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad_fn: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        lipschitz: f64,
        step_scale: f64,
        domain: BallSpec,
    ) -> Self {
        FunctionalModel {
            value_fn: Arc::new(value_fn),
            grad_fn: Arc::new(grad_fn),
            lipschitz,
            step_scale,
            domain,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value_fn)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.grad_fn)(x)
    }

    /// Declared Lipschitz constant of the gradient over the ball.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn domain(&self) -> &BallSpec {
        &self.domain
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    /// Multiplies the functional (and with it the folded-in stepsize) by a
    /// positive factor: values, gradients, the Lipschitz constant, and
    /// `step_scale` all scale linearly.
    pub fn rescaled(&self, factor: f64) -> Self {
        assert!(
            factor.is_finite() && factor > 0.0,
            "rescale factor must be positive and finite"
        );
        let value_inner = Arc::clone(&self.value_fn);
        let grad_inner = Arc::clone(&self.grad_fn);
        FunctionalModel {
            value_fn: Arc::new(move |x: &Vector| factor * value_inner(x)),
            grad_fn: Arc::new(move |x: &Vector| grad_inner(x).scale(factor)),
            lipschitz: factor * self.lipschitz,
            step_scale: factor * self.step_scale,
            domain: self.domain.clone(),
        }
    }

    /// Checks that the ball center is an exact global minimum: value 0 and
    /// vanishing gradient, both within `tol`. Holds for exact-data models,
    /// not for noisy ones.
    pub fn verify_exact_at_center(&self, tol: f64) -> bool {
        let c = self.domain.center();
        self.value(c).abs() <= tol && norm(&self.gradient(c)) <= tol
    }
}

impl std::fmt::Debug for FunctionalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionalModel")
            .field("lipschitz", &self.lipschitz)
            .field("step_scale", &self.step_scale)
            .field("dim", &self.domain.dim())
            .finish()
    }
}

/// Forward operator `F` with analytic Jacobian action and adjoint action,
/// plus the exact data `y = F(x*)`.
#[derive(Clone)]
pub struct OperatorModel {
    apply_fn: MapFn,
    jac_fn: BilinFn,
    jac_adj_fn: BilinFn,
    data: Vector,
    domain: BallSpec,
}

impl OperatorModel {
    pub fn new(
        apply_fn: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac_fn: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        jac_adj_fn: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        data: Vector,
        domain: BallSpec,
    ) -> Self {
        OperatorModel {
            apply_fn: Arc::new(apply_fn),
            jac_fn: Arc::new(jac_fn),
            jac_adj_fn: Arc::new(jac_adj_fn),
            data,
            domain,
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.apply_fn)(x)
    }

    /// F'(x) h
    pub fn jacobian_apply(&self, x: &Vector, h: &Vector) -> Vector {
        (self.jac_fn)(x, h)
    }

    /// F'(x)^* w
    pub fn jacobian_adjoint_apply(&self, x: &Vector, w: &Vector) -> Vector {
        (self.jac_adj_fn)(x, w)
    }

    pub fn data(&self) -> &Vector {
        &self.data
    }

    pub fn domain(&self) -> &BallSpec {
        &self.domain
    }

    /// Largest relative defect of `<F'(x)h, w> = <h, F'(x)^* w>` over sampled
    /// triples.
    pub fn adjoint_defect(&self, triples: usize, seed: u64) -> f64 {
        let mut sampler = BallSampler::new(&self.domain, seed);
        let data_ball =
            BallSpec::new(Vector::zeros(self.data.dim()), 1.0).expect("unit data ball");
        let mut data_sampler = BallSampler::new(&data_ball, seed.wrapping_add(1));
        let mut worst: f64 = 0.0;
        for _ in 0..triples {
            let x = sampler.uniform_point();
            let h = sampler.unit_direction();
            let w = data_sampler.unit_direction();
            let lhs = inner(&self.jacobian_apply(&x, &h), &w);
            let rhs = inner(&h, &self.jacobian_adjoint_apply(&x, &w));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        worst
    }

    /// Sampled supremum of the Jacobian operator norm over the ball, via
    /// power iteration on F'(x)^* F'(x) at each sampled point.
    pub fn jacobian_norm_sup(&self, samples: usize, seed: u64) -> f64 {
        let mut sampler = BallSampler::new(&self.domain, seed);
        let mut sup: f64 = 0.0;
        for _ in 0..samples {
            let x = sampler.uniform_point();
            let mut v = sampler.unit_direction();
            for _ in 0..30 {
                let w = self.jacobian_adjoint_apply(&x, &self.jacobian_apply(&x, &v));
                let n = norm(&w);
                if n <= 1e-300 {
                    break;
                }
                v = w.scale(1.0 / n);
            }
            sup = sup.max(norm(&self.jacobian_apply(&x, &v)));
        }
        sup
    }

    /// Sampled supremum of the residual norm `||F(x) - data||` over the ball.
    pub fn residual_sup(&self, samples: usize, seed: u64) -> f64 {
        let mut sampler = BallSampler::new(&self.domain, seed);
        let mut sup: f64 = 0.0;
        for _ in 0..samples {
            let x = sampler.uniform_point();
            sup = sup.max(norm(&self.apply(&x).sub(&self.data)));
        }
        sup
    }
}

impl std::fmt::Debug for OperatorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorModel")
            .field("dim", &self.domain.dim())
            .field("data_dim", &self.data.dim())
            .finish()
    }
}

/// Perturbed functional with validated noise metadata.
#[derive(Clone, Debug)]
pub struct NoisyFunctional {
    model: FunctionalModel,
    delta: f64,
    psi_delta: f64,
    lipschitz_noisy: f64,
}

impl NoisyFunctional {
    /// Wraps an already-built perturbed functional with caller-supplied
    /// noise metadata. No gap verification is performed; synthetic and
    /// adversarial models use this, [`make_noisy`] is the validated path.
    pub fn from_parts(
        model: FunctionalModel,
        delta: f64,
        psi_delta: f64,
        lipschitz_noisy: f64,
    ) -> Self {
        NoisyFunctional {
            model,
            delta,
            psi_delta,
            lipschitz_noisy,
        }
    }

    pub fn model(&self) -> &FunctionalModel {
        &self.model
    }

    /// Uniform bound on the gradient gap over the ball.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Uniform bound on the value gap over the ball.
    pub fn psi_delta(&self) -> f64 {
        self.psi_delta
    }

    /// Declared Lipschitz constant of the noisy gradient.
    pub fn lipschitz_noisy(&self) -> f64 {
        self.lipschitz_noisy
    }

    /// Re-runs the sampled gap verification against an exact functional.
    pub fn verify_bounds(
        &self,
        exact: &FunctionalModel,
        samples: usize,
        seed: u64,
    ) -> Result<(), FunctionalError> {
        let mut sampler = BallSampler::new(self.model.domain(), seed);
        for _ in 0..samples {
            let x = sampler.uniform_point();
            let ggap = dist(&self.model.gradient(&x), &exact.gradient(&x));
            if ggap > self.delta {
                return Err(FunctionalError::NoiseBoundViolated {
                    quantity: "gradient gap",
                    observed: ggap,
                    declared: self.delta,
                });
            }
            let vgap = (self.model.value(&x) - exact.value(&x)).abs();
            if vgap > self.psi_delta {
                return Err(FunctionalError::NoiseBoundViolated {
                    quantity: "value gap",
                    observed: vgap,
                    declared: self.psi_delta,
                });
            }
        }
        Ok(())
    }
}

/// Linear gradient-growth bound `||grad J(x)||^2 <= coefficient * J(x)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhiBound {
    pub coefficient: f64,
}

impl PhiBound {
    /// phi(s) = coefficient * s; monotone, positive, continuous, phi(0) = 0.
    pub fn phi(&self, s: f64) -> f64 {
        self.coefficient * s
    }
}

/// Builds `J(x) = step_scale * 1/2 ||F(x) - observed||^2` with its analytic
/// gradient `step_scale * F'(x)^*(F(x) - observed)`. The declared Lipschitz
/// constant is `step_scale` times a sampled (and safety-inflated) estimate of
/// the unscaled gradient's Lipschitz constant over the ball.
pub fn least_squares_functional(
    op: &OperatorModel,
    observed: &Vector,
    step_scale: f64,
) -> Result<FunctionalModel, FunctionalError> {
    if !(step_scale.is_finite() && step_scale > 0.0) {
        return Err(FunctionalError::BadStepScale(step_scale));
    }
    if observed.dim() != op.data().dim() {
        return Err(FunctionalError::DimensionMismatch {
            expected: op.data().dim(),
            got: observed.dim(),
        });
    }
    let raw = least_squares_unchecked(op, observed, step_scale, f64::NAN);
    let unscaled = least_squares_unchecked(op, observed, 1.0, f64::NAN);
    let lip_unscaled = crate::conditions::estimate_lipschitz(
        &unscaled,
        op.domain(),
        SUPREMUM_SAMPLES / 2,
        SUPREMUM_SEED,
    );
    Ok(raw.with_lipschitz(step_scale * SUPREMUM_INFLATION * lip_unscaled))
}

/// Least-squares functional with the Lipschitz field left to the caller.
fn least_squares_unchecked(
    op: &OperatorModel,
    observed: &Vector,
    step_scale: f64,
    lipschitz: f64,
) -> FunctionalModel {
    let op_v = op.clone();
    let obs_v = observed.clone();
    let value_fn = move |x: &Vector| {
        let r = op_v.apply(x).sub(&obs_v);
        0.5 * step_scale * inner(&r, &r)
    };
    let op_g = op.clone();
    let obs_g = observed.clone();
    let grad_fn = move |x: &Vector| {
        let r = op_g.apply(x).sub(&obs_g);
        op_g.jacobian_adjoint_apply(x, &r).scale(step_scale)
    };
    FunctionalModel::new(value_fn, grad_fn, lipschitz, step_scale, op.domain().clone())
}

/// Synthesizes noisy data `y^delta = y + level * e` with a deterministic
/// unit direction `e` drawn from `seed`, builds the corresponding
/// least-squares functional with the same `step_scale` as `exact`, and
/// attaches validated noise metadata:
///
/// * `delta     = inflation * step_scale * sup||F'|| * level`
/// * `psi_delta = inflation * step_scale * (sup||F - y|| * level + level^2 / 2)`
/// * `lipschitz_noisy = exact.lipschitz + delta`
///
/// The suprema are sampled over the ball with a fixed internal seed. The
/// declared gaps are verified against `exact` on 200 sampled points before
/// the value is returned.
pub fn make_noisy(
    op: &OperatorModel,
    exact: &FunctionalModel,
    data_noise_level: f64,
    seed: u64,
) -> Result<NoisyFunctional, FunctionalError> {
    if !(data_noise_level.is_finite() && data_noise_level > 0.0) {
        return Err(FunctionalError::BadNoiseLevel(data_noise_level));
    }
    let step_scale = exact.step_scale();
    let direction = unit_direction_from_seed(op.data().dim(), seed);
    let observed = op.data().add_scaled(data_noise_level, &direction);

    let jac_sup = op.jacobian_norm_sup(SUPREMUM_SAMPLES, SUPREMUM_SEED);
    let res_sup = op.residual_sup(SUPREMUM_SAMPLES, SUPREMUM_SEED.wrapping_add(1));

    let delta = SUPREMUM_INFLATION * step_scale * jac_sup * data_noise_level;
    let psi_delta = SUPREMUM_INFLATION
        * step_scale
        * (res_sup * data_noise_level + 0.5 * data_noise_level * data_noise_level);
    let lipschitz_noisy = exact.lipschitz() + delta;

    let model = least_squares_unchecked(op, &observed, step_scale, lipschitz_noisy);
    let noisy = NoisyFunctional {
        model,
        delta,
        psi_delta,
        lipschitz_noisy,
    };
    noisy.verify_bounds(exact, NOISE_VERIFY_SAMPLES, seed.wrapping_add(0x9E37_79B9))?;
    Ok(noisy)
}

/// Maximum over coordinates of the gap between the analytic gradient and a
/// central finite-difference stencil of width `h`, relative to the gradient
/// norm (floored at 1e-12 to guard stationary points).
pub fn gradient_check(
    model: &FunctionalModel,
    x: &Vector,
    h: f64,
) -> Result<f64, FunctionalError> {
    let margin = model.domain().radius() - dist(x, model.domain().center());
    if margin <= h {
        return Err(FunctionalError::TooCloseToBoundary { h, margin });
    }
    let analytic = model.gradient(x);
    let scale = norm(&analytic).max(1e-12);
    let mut worst: f64 = 0.0;
    for i in 0..x.dim() {
        let mut hi: Vec<f64> = x.as_slice().to_vec();
        let mut lo = hi.clone();
        hi[i] += h;
        lo[i] -= h;
        let fd = (model.value(&Vector::new(hi).expect("finite"))
            - model.value(&Vector::new(lo).expect("finite")))
            / (2.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / scale);
    }
    Ok(worst)
}
