//! Benchmark instances with known exact solutions: an ill-conditioned
//! quadratic, a scalar quadratic operator with hand-derivable cone
//! constants, discretized auto-convolution, and one-dimensional coefficient
//! identification in a two-point boundary-value problem.
//!
//! Problems other than the quadratic fold a stepsize into the functional:
//! `step_scale = 0.9 / (inflated Lipschitz estimate of the unscaled
//! gradient)`, so the declared Lipschitz constant is 0.9 and the contraction
//! factor `|1 - L|` in the per-iteration bounds stays well conditioned.

use std::f64::consts::PI;

use thiserror::Error;

use crate::functional::{
    least_squares_functional, FunctionalModel, FunctionalError, OperatorModel,
};
use crate::space::{BallSpec, SpaceError, Vector};

/// Target for the declared (scaled) Lipschitz constant.
pub const TARGET_LIPSCHITZ: f64 = 0.9;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("spectrum entry {value} at index {index} must lie in (0, 1)")]
    SpectrumOutOfRange { index: usize, value: f64 },
    #[error("spectrum length {got} must equal dimension {expected}")]
    SpectrumLength { expected: usize, got: usize },
    #[error("scalar problem radius must lie in (0, 0.25), got {0}")]
    ScalarRadiusTooLarge(f64),
    #[error("grid size {0} must be at least 8")]
    GridTooSmall(usize),
    #[error("signal length {got} must equal grid size {expected}")]
    SignalLength { expected: usize, got: usize },
    #[error("coefficient entries must be nonnegative, found {value} at index {index}")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("tridiagonal solve hit a vanishing pivot at row {0}")]
    SingularSystem(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Closed-form constants attached to a problem when derivable by hand.
#[derive(Clone, Debug, Default)]
pub struct AnalyticFacts {
    pub lipschitz: Option<f64>,
    pub eta_weak: Option<f64>,
    pub eta_strong: Option<f64>,
    /// Angle-condition beta at gamma = 0.
    pub beta_gamma_zero: Option<f64>,
    /// Balancing constant as a function of gamma, when known.
    pub tau_rule: Option<TauRule>,
}

#[derive(Clone, Copy, Debug)]
pub enum TauRule {
    /// Quadratic functionals: `J(x* - tau z) = tau^2 J(x* + z)`, so the
    /// largest admissible tau is `sqrt(gamma)` (capped at 1).
    SqrtGamma,
    /// Lower bound `(1 - eta) gamma / (1 + eta)` implied by a strong cone
    /// constant below one.
    ConeLowerBound { eta: f64 },
}

impl TauRule {
    pub fn tau(&self, gamma: f64) -> f64 {
        match self {
            TauRule::SqrtGamma => gamma.sqrt().min(1.0),
            TauRule::ConeLowerBound { eta } => (1.0 - eta) * gamma / (1.0 + eta),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub name: String,
    pub operator: OperatorModel,
    pub exact_functional: FunctionalModel,
    pub ball: BallSpec,
    pub analytic_facts: AnalyticFacts,
    /// Offset from the solution used as the default start.
    pub default_x0_offset: Vector,
}

impl ProblemInstance {
    pub fn default_x0(&self) -> Vector {
        self.ball.center().add(&self.default_x0_offset)
    }
}

fn validate_instance(instance: &ProblemInstance) -> Result<(), ProblemError> {
    debug_assert!(instance.exact_functional.verify_exact_at_center(1e-10));
    debug_assert!(instance.operator.adjoint_defect(10, 0xADC0) < 1e-10);
    debug_assert!(instance.ball.contains(&instance.default_x0()));
    Ok(())
}

/// `F(x) = A^(1/2) x` with `A = diag(spectrum)`, so `J(x) = 1/2 x^T A x`,
/// `grad J = A x`, solution at the origin, `L = max(spectrum)`. No extra
/// scaling: the spectrum constraint already gives `L < 1`.
pub fn build_quadratic(
    dimension: usize,
    spectrum: &[f64],
    radius: f64,
) -> Result<ProblemInstance, ProblemError> {
    if spectrum.len() != dimension {
        return Err(ProblemError::SpectrumLength {
            expected: dimension,
            got: spectrum.len(),
        });
    }
    for (index, &value) in spectrum.iter().enumerate() {
        if !(0.0 < value && value < 1.0) {
            return Err(ProblemError::SpectrumOutOfRange { index, value });
        }
    }
    let ball = BallSpec::with_inner_radius(Vector::zeros(dimension), radius, 0.1 * radius)?;
    let sqrt_spec: Vec<f64> = spectrum.iter().map(|l| l.sqrt()).collect();
    let spec = spectrum.to_vec();
    let lambda_max = spec.iter().cloned().fold(0.0, f64::max);

    let s_apply = sqrt_spec.clone();
    let s_jac = sqrt_spec.clone();
    let s_adj = sqrt_spec;
    let operator = OperatorModel::new(
        move |x: &Vector| Vector::from_fn(x.dim(), |i| s_apply[i] * x[i]),
        move |_x: &Vector, h: &Vector| Vector::from_fn(h.dim(), |i| s_jac[i] * h[i]),
        move |_x: &Vector, w: &Vector| Vector::from_fn(w.dim(), |i| s_adj[i] * w[i]),
        Vector::zeros(dimension),
        ball.clone(),
    );

    let spec_v = spec.clone();
    let spec_g = spec.clone();
    let exact_functional = FunctionalModel::new(
        move |x: &Vector| {
            0.5 * x
                .iter()
                .zip(&spec_v)
                .map(|(xi, li)| li * xi * xi)
                .sum::<f64>()
        },
        move |x: &Vector| Vector::from_fn(x.dim(), |i| spec_g[i] * x[i]),
        lambda_max,
        1.0,
        ball.clone(),
    );

    let instance = ProblemInstance {
        name: "quadratic".into(),
        operator,
        exact_functional,
        ball,
        analytic_facts: AnalyticFacts {
            lipschitz: Some(lambda_max),
            eta_weak: Some(0.0),
            eta_strong: Some(0.0),
            beta_gamma_zero: Some(-1.0 / lambda_max),
            tau_rule: Some(TauRule::SqrtGamma),
        },
        // equal mass on all coordinates, unit norm
        default_x0_offset: Vector::from_fn(dimension, |_| 1.0 / (dimension as f64).sqrt()),
    };
    validate_instance(&instance)?;
    Ok(instance)
}

/// Default ill-conditioned spectrum: geometric decay from 0.5 to 0.01.
pub fn default_spectrum(dimension: usize) -> Vec<f64> {
    if dimension == 1 {
        return vec![0.5];
    }
    let ratio = (0.01f64 / 0.5).powf(1.0 / (dimension as f64 - 1.0));
    (0..dimension).map(|i| 0.5 * ratio.powi(i as i32)).collect()
}

/// Scalar `F(x) = x + x^2` with data 0 and solution 0. The linearization
/// remainder is exactly `-(x - xt)^2`, which gives the strong cone bound
/// `eta <= 2 radius / (1 - 2 radius)`; the radius cap keeps that below 1.
pub fn build_scalar_quadratic_operator(radius: f64) -> Result<ProblemInstance, ProblemError> {
    if !(radius > 0.0 && radius < 0.25) {
        return Err(ProblemError::ScalarRadiusTooLarge(radius));
    }
    let ball = BallSpec::with_inner_radius(Vector::zeros(1), radius, 0.1 * radius)?;
    let operator = OperatorModel::new(
        |x: &Vector| Vector::from_fn(1, |_| x[0] + x[0] * x[0]),
        |x: &Vector, h: &Vector| Vector::from_fn(1, |_| (1.0 + 2.0 * x[0]) * h[0]),
        |x: &Vector, w: &Vector| Vector::from_fn(1, |_| (1.0 + 2.0 * x[0]) * w[0]),
        Vector::zeros(1),
        ball.clone(),
    );
    let exact_functional = scaled_least_squares(&operator)?;
    let eta_bound = 2.0 * radius / (1.0 - 2.0 * radius);
    let instance = ProblemInstance {
        name: "scalar-quadratic".into(),
        operator,
        exact_functional,
        ball,
        analytic_facts: AnalyticFacts {
            lipschitz: Some(TARGET_LIPSCHITZ),
            eta_weak: Some(eta_bound),
            eta_strong: Some(eta_bound),
            beta_gamma_zero: None,
            tau_rule: Some(TauRule::ConeLowerBound { eta: eta_bound }),
        },
        default_x0_offset: Vector::from_fn(1, |_| 0.5 * radius),
    };
    validate_instance(&instance)?;
    Ok(instance)
}

/// Rectangle-rule discretization of auto-convolution on [0, 1]:
/// `F(x)_i = 1/n * sum_{j <= i} x_{i-j} x_j`. The map is quadratic in `x`,
/// with Jacobian action `(F'(x) h)_i = 2/n * sum_{k <= i} x_{i-k} h_k`.
pub fn build_autoconvolution(
    grid_size: usize,
    true_signal: &Vector,
    radius: f64,
) -> Result<ProblemInstance, ProblemError> {
    if grid_size < 8 {
        return Err(ProblemError::GridTooSmall(grid_size));
    }
    if true_signal.dim() != grid_size {
        return Err(ProblemError::SignalLength {
            expected: grid_size,
            got: true_signal.dim(),
        });
    }
    let n = grid_size;
    let ball = BallSpec::with_inner_radius(true_signal.clone(), radius, 0.1 * radius)?;

    let apply = move |x: &Vector| {
        let scale = 1.0 / n as f64;
        Vector::from_fn(n, |i| {
            scale * (0..=i).map(|j| x[i - j] * x[j]).sum::<f64>()
        })
    };
    let jac = move |x: &Vector, h: &Vector| {
        let scale = 2.0 / n as f64;
        Vector::from_fn(n, |i| {
            scale * (0..=i).map(|k| x[i - k] * h[k]).sum::<f64>()
        })
    };
    let jac_adj = move |x: &Vector, w: &Vector| {
        let scale = 2.0 / n as f64;
        Vector::from_fn(n, |k| {
            scale * (k..n).map(|i| x[i - k] * w[i]).sum::<f64>()
        })
    };
    let data = apply(true_signal);
    let operator = OperatorModel::new(apply, jac, jac_adj, data, ball.clone());
    let exact_functional = scaled_least_squares(&operator)?;
    let offset_shape = Vector::from_fn(n, |i| (PI * (i as f64 + 0.5) / n as f64).sin());
    let offset = normalize_to(&offset_shape, 0.4 * radius);
    let instance = ProblemInstance {
        name: "autoconv".into(),
        operator,
        exact_functional,
        ball,
        analytic_facts: AnalyticFacts {
            lipschitz: Some(TARGET_LIPSCHITZ),
            ..AnalyticFacts::default()
        },
        default_x0_offset: offset,
    };
    validate_instance(&instance)?;
    Ok(instance)
}

/// Default auto-convolution signal: `1 + 0.5 sin(2 pi t)` at the rectangle
/// nodes, positive and smooth.
pub fn default_autoconv_signal(grid_size: usize) -> Vector {
    Vector::from_fn(grid_size, |i| {
        let t = (i as f64 + 0.5) / grid_size as f64;
        1.0 + 0.5 * (2.0 * PI * t).sin()
    })
}

/// Solves the tridiagonal system with subdiagonal `a`, diagonal `b`,
/// superdiagonal `c` (Thomas algorithm). For the stiffness-plus-diagonal
/// matrices here the diagonal dominates, so no pivoting is needed, but a
/// vanishing pivot is still reported rather than propagated as NaN.
fn solve_tridiagonal(
    sub: f64,
    diag: &[f64],
    sup: f64,
    rhs: &[f64],
) -> Result<Vec<f64>, ProblemError> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < 1e-300 {
        return Err(ProblemError::SingularSystem(0));
    }
    c_prime[0] = sup / pivot;
    d_prime[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub * c_prime[i - 1];
        if pivot.abs() < 1e-300 {
            return Err(ProblemError::SingularSystem(i));
        }
        c_prime[i] = sup / pivot;
        d_prime[i] = (rhs[i] - sub * d_prime[i - 1]) / pivot;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    Ok(x)
}

/// Coefficient identification for `-u'' + c u = f` on (0, 1) with
/// homogeneous Dirichlet conditions, discretized by second-order central
/// differences on `grid_size` interior nodes. `F(c) = u(c)`, and
/// `F'(c) h = -A(c)^{-1} (h .* u(c))` with `A(c)` the stiffness-plus-diagonal
/// matrix; the adjoint uses the symmetry of `A`.
pub fn build_ode_parameter_id(
    grid_size: usize,
    true_coefficient: &Vector,
    source: &Vector,
    radius: f64,
) -> Result<ProblemInstance, ProblemError> {
    if grid_size < 8 {
        return Err(ProblemError::GridTooSmall(grid_size));
    }
    if true_coefficient.dim() != grid_size {
        return Err(ProblemError::SignalLength {
            expected: grid_size,
            got: true_coefficient.dim(),
        });
    }
    if source.dim() != grid_size {
        return Err(ProblemError::SignalLength {
            expected: grid_size,
            got: source.dim(),
        });
    }
    for (index, &value) in true_coefficient.iter().enumerate() {
        if value < 0.0 {
            return Err(ProblemError::NegativeCoefficient { index, value });
        }
    }
    let n = grid_size;
    let h = 1.0 / (n as f64 + 1.0);
    let off_diag = -1.0 / (h * h);
    let main_diag = 2.0 / (h * h);
    let ball = BallSpec::with_inner_radius(true_coefficient.clone(), radius, 0.1 * radius)?;

    let solve = move |c: &Vector, rhs: &[f64]| -> Vec<f64> {
        let diag: Vec<f64> = c.iter().map(|ci| main_diag + ci).collect();
        solve_tridiagonal(off_diag, &diag, off_diag, rhs)
            .expect("diagonally dominant system cannot be singular for c bounded below")
    };

    let f_rhs: Vec<f64> = source.as_slice().to_vec();
    let solve_u = solve;
    let apply = move |c: &Vector| {
        Vector::new(solve_u(c, &f_rhs)).expect("solution entries are finite")
    };
    let apply_jac = apply.clone();
    let jac = move |c: &Vector, v: &Vector| {
        let u = apply_jac(c);
        let rhs: Vec<f64> = (0..u.dim()).map(|i| v[i] * u[i]).collect();
        Vector::new(solve(c, &rhs)).expect("finite").scale(-1.0)
    };
    let apply_adj = apply.clone();
    let jac_adj = move |c: &Vector, w: &Vector| {
        let u = apply_adj(c);
        let a_inv_w = Vector::new(solve(c, w.as_slice())).expect("finite");
        u.hadamard(&a_inv_w).scale(-1.0)
    };
    let data = apply(true_coefficient);
    let operator = OperatorModel::new(apply, jac, jac_adj, data, ball.clone());
    let exact_functional = scaled_least_squares(&operator)?;

    // two lowest sine modes: the fast-contracting one shows the early
    // decay, the slow one sets a ladder the stopping index walks down
    let s1 = sine_mode(n, 1);
    let s2 = sine_mode(n, 2);
    let offset = normalize_to(&s1, 0.4 * radius).add(&normalize_to(&s2, 0.3 * radius));

    let instance = ProblemInstance {
        name: "ode-param".into(),
        operator,
        exact_functional,
        ball,
        analytic_facts: AnalyticFacts {
            lipschitz: Some(TARGET_LIPSCHITZ),
            ..AnalyticFacts::default()
        },
        default_x0_offset: offset,
    };
    validate_instance(&instance)?;
    Ok(instance)
}

/// Default true coefficient `1 + 4 t (1 - t)` on the interior nodes.
pub fn default_ode_coefficient(grid_size: usize) -> Vector {
    Vector::from_fn(grid_size, |i| {
        let t = (i as f64 + 1.0) / (grid_size as f64 + 1.0);
        1.0 + 4.0 * t * (1.0 - t)
    })
}

/// Default source `200 sin(pi t)`: large enough that `sup ||F'|| > 1`, which
/// keeps the functional-level noise below the data-level noise.
pub fn default_ode_source(grid_size: usize) -> Vector {
    Vector::from_fn(grid_size, |i| {
        let t = (i as f64 + 1.0) / (grid_size as f64 + 1.0);
        200.0 * (PI * t).sin()
    })
}

fn sine_mode(n: usize, mode: usize) -> Vector {
    Vector::from_fn(n, |i| {
        let t = (i as f64 + 1.0) / (n as f64 + 1.0);
        (mode as f64 * PI * t).sin()
    })
}

fn normalize_to(v: &Vector, target_norm: f64) -> Vector {
    let n = crate::space::norm(v);
    v.scale(target_norm / n)
}

/// Least-squares functional rescaled so the declared Lipschitz constant is
/// [`TARGET_LIPSCHITZ`].
fn scaled_least_squares(op: &OperatorModel) -> Result<FunctionalModel, ProblemError> {
    let unscaled = least_squares_functional(op, op.data(), 1.0)?;
    let step_scale = TARGET_LIPSCHITZ / unscaled.lipschitz();
    let scaled = least_squares_functional(op, op.data(), step_scale)?;
    // the rescale is exact by construction; pin the declared constant
    Ok(scaled.with_lipschitz(TARGET_LIPSCHITZ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::gradient_check;
    use crate::sampling::BallSampler;
    use crate::space::norm;

    #[test]
    fn quadratic_closed_forms() {
        let p = build_quadratic(1, &[0.5], 2.0).unwrap();
        let x = Vector::new(vec![1.0]).unwrap();
        assert_eq!(p.exact_functional.value(&x), 0.25);
        assert_eq!(p.exact_functional.gradient(&x)[0], 0.5);
        // 1-balanced with tau = 1 by symmetry
        let z = Vector::new(vec![0.7]).unwrap();
        let plus = p.exact_functional.value(&z);
        let minus = p.exact_functional.value(&z.scale(-1.0));
        assert_eq!(plus, minus);
    }

    #[test]
    fn quadratic_rejects_bad_spectrum() {
        assert!(build_quadratic(2, &[0.5, 1.0], 1.0).is_err());
        assert!(build_quadratic(2, &[0.5], 1.0).is_err());
        assert!(build_quadratic(2, &[0.5, 0.0], 1.0).is_err());
    }

    #[test]
    fn scalar_remainder_identity() {
        let p = build_scalar_quadratic_operator(0.2).unwrap();
        let cases = [(0.1, -0.1), (0.15, 0.02), (0.05, 0.05)];
        for (a, b) in cases {
            let x = Vector::new(vec![a]).unwrap();
            let xt = Vector::new(vec![b]).unwrap();
            let rem = p
                .operator
                .apply(&x)
                .sub(&p.operator.apply(&xt))
                .sub(&p.operator.jacobian_apply(&x, &x.sub(&xt)));
            let expect = -(a - b) * (a - b);
            assert!((rem[0] - expect).abs() < 1e-15, "remainder {}", rem[0]);
        }
    }

    #[test]
    fn scalar_radius_guard() {
        assert!(build_scalar_quadratic_operator(0.25).is_err());
        assert!(build_scalar_quadratic_operator(0.1).is_ok());
        let p = build_scalar_quadratic_operator(0.1).unwrap();
        assert!((p.analytic_facts.eta_strong.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn autoconvolution_structure() {
        let n = 8;
        let signal = default_autoconv_signal(n);
        let p = build_autoconvolution(n, &signal, 0.5).unwrap();
        // bilinearity: F(0) = 0
        assert_eq!(norm(&p.operator.apply(&Vector::zeros(n))), 0.0);
        // degree-2 homogeneity: F(2x) = 4 F(x)
        let x = Vector::from_fn(n, |i| 0.1 * (i as f64 + 1.0));
        let f2 = p.operator.apply(&x.scale(2.0));
        let f = p.operator.apply(&x);
        for i in 0..n {
            assert!((f2[i] - 4.0 * f[i]).abs() < 1e-14);
        }
        assert!(p.operator.adjoint_defect(50, 1) < 1e-10);
    }

    #[test]
    fn ode_exact_solution_and_zero_source() {
        let n = 8;
        let c = default_ode_coefficient(n);
        let f = default_ode_source(n);
        let p = build_ode_parameter_id(n, &c, &f, 1.0).unwrap();
        assert!(p.exact_functional.value(&c) < 1e-20);

        // zero source: u = 0 for every coefficient, so the gradient vanishes
        let p0 = build_ode_parameter_id(n, &c, &Vector::zeros(n), 1.0);
        // the constant-zero operator has Lipschitz estimate 0; scaling fails
        // with a non-finite step, so construct the pieces directly instead
        assert!(p0.is_err() || {
            let p0 = p0.unwrap();
            let mut s = BallSampler::new(&p0.ball, 5);
            (0..10).all(|_| norm(&p0.exact_functional.gradient(&s.uniform_point())) == 0.0)
        });
    }

    #[test]
    fn ode_jacobian_matches_finite_differences() {
        let n = 12;
        let c = default_ode_coefficient(n);
        let f = default_ode_source(n);
        let p = build_ode_parameter_id(n, &c, &f, 1.0).unwrap();
        let mut sampler = BallSampler::new(&p.ball, 3);
        for _ in 0..5 {
            let x = sampler.shell_point(0.0, 0.5);
            let h = sampler.unit_direction();
            let eps = 1e-6;
            let fd = p
                .operator
                .apply(&x.add_scaled(eps, &h))
                .sub(&p.operator.apply(&x.add_scaled(-eps, &h)))
                .scale(1.0 / (2.0 * eps));
            let an = p.operator.jacobian_apply(&x, &h);
            let rel = norm(&fd.sub(&an)) / norm(&an).max(1e-12);
            assert!(rel < 1e-6, "relative defect {rel}");
        }
    }

    #[test]
    fn all_problems_pass_gradient_check_at_interior_points() {
        let problems = vec![
            build_quadratic(4, &default_spectrum(4), 2.0).unwrap(),
            build_scalar_quadratic_operator(0.1).unwrap(),
            build_autoconvolution(8, &default_autoconv_signal(8), 0.5).unwrap(),
            build_ode_parameter_id(8, &default_ode_coefficient(8), &default_ode_source(8), 1.0)
                .unwrap(),
        ];
        for p in problems {
            let mut sampler = BallSampler::new(&p.ball, 42);
            for _ in 0..20 {
                let x = sampler.shell_point(0.0, 0.8);
                let err = gradient_check(&p.exact_functional, &x, 1e-5).unwrap();
                assert!(err < 1e-6, "{}: gradient defect {err}", p.name);
            }
        }
    }

    #[test]
    fn scaled_problems_declare_target_lipschitz() {
        let p = build_scalar_quadratic_operator(0.1).unwrap();
        assert_eq!(p.exact_functional.lipschitz(), TARGET_LIPSCHITZ);
        let q = build_ode_parameter_id(
            8,
            &default_ode_coefficient(8),
            &default_ode_source(8),
            1.0,
        )
        .unwrap();
        assert_eq!(q.exact_functional.lipschitz(), TARGET_LIPSCHITZ);
        // step scale inverts the inflated unscaled estimate
        assert!(q.exact_functional.step_scale() > 0.0);
    }

    #[test]
    fn default_x0_lies_in_ball() {
        let p = build_ode_parameter_id(
            16,
            &default_ode_coefficient(16),
            &default_ode_source(16),
            1.0,
        )
        .unwrap();
        assert!(p.ball.contains(&p.default_x0()));
        assert!((norm(&p.default_x0_offset) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_solver_agrees_with_dense_reference() {
        // -u'' with u = t(1-t): A u should equal the constant 2 source
        let n = 16;
        let h = 1.0 / (n as f64 + 1.0);
        let diag = vec![2.0 / (h * h); n];
        let rhs = vec![2.0; n];
        let u = solve_tridiagonal(-1.0 / (h * h), &diag, -1.0 / (h * h), &rhs).unwrap();
        for (i, ui) in u.iter().enumerate() {
            let t = (i as f64 + 1.0) * h;
            assert!((ui - t * (1.0 - t)).abs() < 1e-10);
        }
    }
}
