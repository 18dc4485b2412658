//! Trace-level checks of the per-iteration inequalities behind the
//! convergence results: monotone descent, cumulative gradient bounds,
//! uniform error bounds, the noisy recursion and its uniform consequence,
//! summability of `<grad_k, e_k>`, and the noisy/exact divergence recursion.
//!
//! Each check compares real-valued quantities that are exact in
//! infinite precision, so every inequality carries a relative slack of
//! `1e-9 * max(1, |lhs|, |rhs|)` to absorb floating-point accumulation.

use serde::Serialize;

use crate::engine::IterationTrace;
use crate::functional::FunctionalModel;
use crate::space::{dist, BallSpec, Vector};
use crate::stopping::StopConstants;

pub const RELATIVE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// Preconditions not met (escaped trace, missing tracking, mismatched
    /// lengths); distinct from a failure.
    Inapplicable,
}

/// Constants a check was evaluated with, echoed for reproducibility.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckContext {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_noisy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaCheckResult {
    pub lemma_id: &'static str,
    pub status: CheckStatus,
    /// Most negative normalized slack `(rhs - lhs) / max(1, |lhs|, |rhs|)`
    /// observed across all compared inequalities.
    pub worst_margin: Option<f64>,
    /// Step index `k` of the first violated inequality (indices refer to
    /// the `k` in each inequality as documented per check).
    pub witness_step: Option<usize>,
    pub context: CheckContext,
}

impl LemmaCheckResult {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Passed
    }

    fn inapplicable(lemma_id: &'static str, reason: &str, context: CheckContext) -> Self {
        let mut context = context;
        context.reason = Some(reason.to_string());
        LemmaCheckResult {
            lemma_id,
            status: CheckStatus::Inapplicable,
            worst_margin: None,
            witness_step: None,
            context,
        }
    }
}

/// Accumulates `lhs <= rhs` comparisons over steps.
struct InequalityRun {
    worst_margin: f64,
    witness_step: Option<usize>,
}

impl InequalityRun {
    fn new() -> Self {
        InequalityRun {
            worst_margin: f64::INFINITY,
            witness_step: None,
        }
    }

    fn assert_le(&mut self, step: usize, lhs: f64, rhs: f64) {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let margin = (rhs - lhs) / scale;
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
        // record the first violation even if a later one is worse
        if margin < -RELATIVE_SLACK && self.witness_step.is_none() {
            self.witness_step = Some(step);
        }
    }

    fn finish(self, lemma_id: &'static str, context: CheckContext) -> LemmaCheckResult {
        let passed = self.worst_margin >= -RELATIVE_SLACK;
        LemmaCheckResult {
            lemma_id,
            status: if passed {
                CheckStatus::Passed
            } else {
                CheckStatus::Failed
            },
            worst_margin: if self.worst_margin.is_finite() {
                Some(self.worst_margin)
            } else {
                None
            },
            witness_step: if passed { None } else { self.witness_step },
            context,
        }
    }
}

/// Monotone descent of the exact values: per step
/// `J(x_{k+1}) - J(x_k) <= (L - 1) ||grad_k||^2` (witness step is `k`), and
/// cumulatively `sum_{k<N} ||grad_k||^2 <= J(x_0) / |1 - L|`.
pub fn check_descent(trace: &IterationTrace, lipschitz: f64) -> LemmaCheckResult {
    let context = CheckContext {
        lipschitz: Some(lipschitz),
        ..CheckContext::default()
    };
    if trace.escaped() {
        return LemmaCheckResult::inapplicable("descent", "trace escaped the ball", context);
    }
    if trace.noisy {
        return LemmaCheckResult::inapplicable("descent", "exact trace required", context);
    }
    if lipschitz >= 1.0 {
        return LemmaCheckResult::inapplicable("descent", "requires L < 1", context);
    }
    let mut run = InequalityRun::new();
    let mut grad_sq_sum = 0.0;
    for k in 0..trace.stopped_at {
        let g2 = trace.grad_norms[k] * trace.grad_norms[k];
        run.assert_le(k, trace.values[k + 1] - trace.values[k], (lipschitz - 1.0) * g2);
        grad_sq_sum += g2;
    }
    run.assert_le(
        trace.stopped_at,
        grad_sq_sum,
        trace.values[0] / (1.0 - lipschitz).abs(),
    );
    run.finish("descent", context)
}

/// Monotone descent of the noisy values under `L_delta < 1`:
/// `Jd(x_{k+1}) - Jd(x_k) <= (L_delta - 1) ||grad_k||^2` per step, plus the
/// cumulative gradient bound with `Jd(x_0)`.
pub fn check_noisy_descent(trace: &IterationTrace, lipschitz_noisy: f64) -> LemmaCheckResult {
    let context = CheckContext {
        lipschitz_noisy: Some(lipschitz_noisy),
        ..CheckContext::default()
    };
    if trace.escaped() {
        return LemmaCheckResult::inapplicable("noisy-descent", "trace escaped the ball", context);
    }
    if !trace.noisy {
        return LemmaCheckResult::inapplicable("noisy-descent", "noisy trace required", context);
    }
    if lipschitz_noisy >= 1.0 {
        return LemmaCheckResult::inapplicable("noisy-descent", "requires L_delta < 1", context);
    }
    let mut run = InequalityRun::new();
    let mut grad_sq_sum = 0.0;
    for k in 0..trace.stopped_at {
        let g2 = trace.grad_norms[k] * trace.grad_norms[k];
        run.assert_le(
            k,
            trace.values[k + 1] - trace.values[k],
            (lipschitz_noisy - 1.0) * g2,
        );
        grad_sq_sum += g2;
    }
    run.assert_le(
        trace.stopped_at,
        grad_sq_sum,
        trace.values[0] / (1.0 - lipschitz_noisy).abs(),
    );
    run.finish("noisy-descent", context)
}

/// Uniform error bound from the gamma = 0 angle condition:
/// `||e_k||^2 <= ||e_0||^2 + (1 + 2 beta)^+ / |1 - L| * J(x_0)` at every step.
pub fn check_error_bound(trace: &IterationTrace, beta: f64, lipschitz: f64) -> LemmaCheckResult {
    let context = CheckContext {
        lipschitz: Some(lipschitz),
        beta: Some(beta),
        ..CheckContext::default()
    };
    if trace.escaped() {
        return LemmaCheckResult::inapplicable("error-bound", "trace escaped the ball", context);
    }
    if trace.noisy {
        return LemmaCheckResult::inapplicable("error-bound", "exact trace required", context);
    }
    let bound = trace.errors[0] * trace.errors[0]
        + (1.0 + 2.0 * beta).max(0.0) / (1.0 - lipschitz).abs() * trace.values[0];
    let mut run = InequalityRun::new();
    for k in 1..trace.len() {
        run.assert_le(k, trace.errors[k] * trace.errors[k], bound);
    }
    run.finish("error-bound", context)
}

/// The start-quality condition guaranteeing all exact iterates stay in the
/// ball: `||x_0 - x*||^2 + (1 + 2 beta)^+ / |1 - L| * J(x_0) < rho^2`.
pub fn check_init_condition(
    x0: &Vector,
    model: &FunctionalModel,
    beta: f64,
    ball: &BallSpec,
) -> bool {
    let e0 = dist(x0, ball.center());
    let lhs = e0 * e0
        + (1.0 + 2.0 * beta).max(0.0) / (1.0 - model.lipschitz()).abs() * model.value(x0);
    lhs < ball.radius() * ball.radius()
}

/// Per-step recursion for the noisy error:
/// `||e_{k+1}||^2 <= ||e_k||^2 + theta ||grad_k||^2 + 2 delta ||e_k||
///  + 4 beta^+ delta^2` (witness step is `k`).
pub fn check_noisy_recursion(
    trace: &IterationTrace,
    constants: &StopConstants,
    delta: f64,
) -> LemmaCheckResult {
    let context = CheckContext {
        delta: Some(delta),
        beta: Some(constants.beta),
        theta: Some(constants.theta),
        ..CheckContext::default()
    };
    if !trace.noisy {
        return LemmaCheckResult::inapplicable("noisy-recursion", "noisy trace required", context);
    }
    if trace.exact_values.is_none() {
        return LemmaCheckResult::inapplicable(
            "noisy-recursion",
            "exact tracking disabled",
            context,
        );
    }
    let beta_plus = constants.beta.max(0.0);
    let mut run = InequalityRun::new();
    for k in 0..trace.stopped_at {
        let lhs = trace.errors[k + 1] * trace.errors[k + 1];
        let rhs = trace.errors[k] * trace.errors[k]
            + constants.theta * trace.grad_norms[k] * trace.grad_norms[k]
            + 2.0 * delta * trace.errors[k]
            + 4.0 * beta_plus * delta * delta;
        run.assert_le(k, lhs, rhs);
    }
    run.finish("noisy-recursion", context)
}

/// Uniform consequence of the recursion: for every `k`,
/// `||e_{k+1}||^2 + theta/|1-L_delta| Jd(x_0) - theta sum_{l<=k} ||grad_l||^2
///  <= (sqrt(||e_0||^2 + theta/|1-L_delta| Jd(x_0)) + xi delta k)^2`.
pub fn check_noisy_uniform(
    trace: &IterationTrace,
    constants: &StopConstants,
    delta: f64,
    lipschitz_noisy: f64,
    noisy_value_at_start: f64,
) -> LemmaCheckResult {
    let context = CheckContext {
        delta: Some(delta),
        beta: Some(constants.beta),
        theta: Some(constants.theta),
        xi: Some(constants.xi),
        lipschitz_noisy: Some(lipschitz_noisy),
        ..CheckContext::default()
    };
    if !trace.noisy {
        return LemmaCheckResult::inapplicable("noisy-uniform", "noisy trace required", context);
    }
    if trace.exact_values.is_none() {
        return LemmaCheckResult::inapplicable("noisy-uniform", "exact tracking disabled", context);
    }
    if lipschitz_noisy >= 1.0 {
        return LemmaCheckResult::inapplicable("noisy-uniform", "requires L_delta < 1", context);
    }
    let head = constants.theta / (1.0 - lipschitz_noisy).abs() * noisy_value_at_start;
    let base = (trace.errors[0] * trace.errors[0] + head).sqrt();
    let mut run = InequalityRun::new();
    let mut grad_sq_sum = 0.0;
    for k in 0..trace.stopped_at {
        grad_sq_sum += trace.grad_norms[k] * trace.grad_norms[k];
        let lhs =
            trace.errors[k + 1] * trace.errors[k + 1] + head - constants.theta * grad_sq_sum;
        let reach = base + constants.xi * delta * k as f64;
        run.assert_le(k, lhs, reach * reach);
    }
    run.finish("noisy-uniform", context)
}

/// Summability of the gradient/error inner products on exact traces:
/// `2 sum_{k<N} |<grad_k, e_k>| <= ||e_0||^2 + (1 + 4 beta^+)/|1-L| J(x_0)`.
pub fn check_summability(trace: &IterationTrace, beta: f64, lipschitz: f64) -> LemmaCheckResult {
    let context = CheckContext {
        lipschitz: Some(lipschitz),
        beta: Some(beta),
        ..CheckContext::default()
    };
    if trace.escaped() {
        return LemmaCheckResult::inapplicable("summability", "trace escaped the ball", context);
    }
    if trace.noisy {
        return LemmaCheckResult::inapplicable("summability", "exact trace required", context);
    }
    let total: f64 = trace.inner_products[..trace.stopped_at]
        .iter()
        .map(|ip| ip.abs())
        .sum();
    let bound = trace.errors[0] * trace.errors[0]
        + (1.0 + 4.0 * beta.max(0.0)) / (1.0 - lipschitz).abs() * trace.values[0];
    let mut run = InequalityRun::new();
    run.assert_le(trace.stopped_at, 2.0 * total, bound);
    run.finish("summability", context)
}

/// Coupling of the noisy and exact trajectories started at the same point:
/// per step `||xd_{k+1} - x_{k+1}|| <= (1 + L) ||xd_k - x_k|| + delta` and in
/// closed form `||xd_k - x_k|| <= delta ((1 + L)^k - 1) / L`.
pub fn check_divergence_recursion(
    noisy_trace: &IterationTrace,
    exact_trace: &IterationTrace,
    lipschitz: f64,
    delta: f64,
) -> LemmaCheckResult {
    let context = CheckContext {
        lipschitz: Some(lipschitz),
        delta: Some(delta),
        ..CheckContext::default()
    };
    if noisy_trace.len() != exact_trace.len() {
        return LemmaCheckResult::inapplicable(
            "divergence-recursion",
            "traces have mismatched lengths",
            context,
        );
    }
    if !noisy_trace.noisy || exact_trace.noisy {
        return LemmaCheckResult::inapplicable(
            "divergence-recursion",
            "requires one noisy and one exact trace",
            context,
        );
    }
    if dist(&noisy_trace.iterates[0], &exact_trace.iterates[0]) > 0.0 {
        return LemmaCheckResult::inapplicable(
            "divergence-recursion",
            "traces do not share the initial guess",
            context,
        );
    }
    let mut run = InequalityRun::new();
    let mut previous_gap = 0.0;
    for k in 0..noisy_trace.stopped_at {
        let gap = dist(&noisy_trace.iterates[k + 1], &exact_trace.iterates[k + 1]);
        run.assert_le(k, gap, (1.0 + lipschitz) * previous_gap + delta);
        let closed_form = delta * ((1.0 + lipschitz).powi(k as i32 + 1) - 1.0) / lipschitz;
        run.assert_le(k, gap, closed_form);
        previous_gap = gap;
    }
    run.finish("divergence-recursion", context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_exact, IterationTrace};
    use crate::space::BallSpec;
    use crate::stopping::stop_constants;

    fn quadratic_model(lambda: f64, radius: f64) -> FunctionalModel {
        let ball = BallSpec::new(Vector::zeros(1), radius).unwrap();
        FunctionalModel::new(
            move |x: &Vector| 0.5 * lambda * x[0] * x[0],
            move |x: &Vector| Vector::new(vec![lambda * x[0]]).unwrap(),
            lambda,
            1.0,
            ball,
        )
    }

    fn quadratic_trace(steps: usize) -> IterationTrace {
        let model = quadratic_model(0.5, 2.0);
        run_exact(&model, &Vector::new(vec![1.0]).unwrap(), steps).unwrap()
    }

    #[test]
    fn descent_passes_with_geometric_sum_margin() {
        // sum of squared gradients is 1/3, bound is J(x0)/(1-L) = 0.5
        let trace = quadratic_trace(60);
        let result = check_descent(&trace, 0.5);
        assert!(result.passed(), "{result:?}");
        assert!(result.worst_margin.unwrap() > 0.0);
    }

    #[test]
    fn descent_vacuous_on_length_one_trace() {
        let trace = quadratic_trace(0);
        let result = check_descent(&trace, 0.5);
        assert!(result.passed());
    }

    #[test]
    fn descent_flags_injected_uphill_step() {
        let mut trace = quadratic_trace(10);
        trace.values[5] += 1.0;
        let result = check_descent(&trace, 0.5);
        assert_eq!(result.status, CheckStatus::Failed);
        assert_eq!(result.witness_step, Some(4));
    }

    #[test]
    fn error_bound_quadratic_cases() {
        let trace = quadratic_trace(40);
        // beta = -2: positive part vanishes, bound collapses to ||e_0||^2
        assert!(check_error_bound(&trace, -2.0, 0.5).passed());
        // beta = 0: weaker bound 1 + 0.25/0.5 = 1.5
        assert!(check_error_bound(&trace, 0.0, 0.5).passed());
        // stationary run: all errors zero
        let model = quadratic_model(0.5, 2.0);
        let stationary = run_exact(&model, &Vector::zeros(1), 5).unwrap();
        assert!(check_error_bound(&stationary, -2.0, 0.5).passed());
    }

    #[test]
    fn error_bound_flags_inflated_error() {
        let mut trace = quadratic_trace(10);
        trace.errors[7] = 10.0;
        let result = check_error_bound(&trace, -2.0, 0.5);
        assert_eq!(result.status, CheckStatus::Failed);
        assert_eq!(result.witness_step, Some(7));
    }

    #[test]
    fn init_condition_cases() {
        let model = quadratic_model(0.5, 2.0);
        let ball = model.domain().clone();
        // 1 + 0 < 4 with beta = -2
        assert!(check_init_condition(
            &Vector::new(vec![1.0]).unwrap(),
            &model,
            -2.0,
            &ball
        ));
        assert!(check_init_condition(&Vector::zeros(1), &model, -2.0, &ball));
        // boundary start with beta >= 0 and positive value: left side >= rho^2
        assert!(!check_init_condition(
            &Vector::new(vec![2.0]).unwrap(),
            &model,
            0.0,
            &ball
        ));
    }

    #[test]
    fn summability_quadratic_closed_form() {
        // 2 sum <grad, e> = 4/3 <= 1 + 0.5 = 1.5
        let trace = quadratic_trace(200);
        let result = check_summability(&trace, -2.0, 0.5);
        assert!(result.passed());
        let total: f64 = trace.inner_products[..trace.stopped_at]
            .iter()
            .map(|ip| ip.abs())
            .sum();
        assert!((2.0 * total - 4.0 / 3.0).abs() < 1e-12);
        // partial sums settle: increments beyond k = 100 are below 1e-12
        assert!(trace.inner_products[101..trace.stopped_at]
            .iter()
            .all(|ip| ip.abs() < 1e-12));
    }

    #[test]
    fn summability_flags_corrupted_inner_products() {
        let mut trace = quadratic_trace(20);
        trace.inner_products[3] = 100.0;
        assert_eq!(
            check_summability(&trace, -2.0, 0.5).status,
            CheckStatus::Failed
        );
    }

    #[test]
    fn escaped_traces_are_inapplicable_not_failed() {
        let mut trace = quadratic_trace(10);
        trace.escaped_at = Some(10);
        assert_eq!(check_descent(&trace, 0.5).status, CheckStatus::Inapplicable);
        assert_eq!(
            check_error_bound(&trace, -2.0, 0.5).status,
            CheckStatus::Inapplicable
        );
        assert_eq!(
            check_summability(&trace, -2.0, 0.5).status,
            CheckStatus::Inapplicable
        );
    }

    #[test]
    fn noisy_recursion_delta_zero_reduces_to_exact_estimate() {
        // a noisy-flagged replica of the exact quadratic trace with delta 0
        let exact = quadratic_trace(20);
        let noisy = IterationTrace::from_raw(
            exact.iterates.clone(),
            exact.errors.clone(),
            exact.values.clone(),
            Some(exact.values.clone()),
            exact.grad_norms.clone(),
            exact.inner_products.clone(),
            None,
            true,
        );
        let constants = stop_constants(-2.0);
        assert!(check_noisy_recursion(&noisy, &constants, 0.0).passed());
        // delta = 0 collapses the uniform bound's reach term
        assert!(check_noisy_uniform(&noisy, &constants, 0.0, 0.5, noisy.values[0]).passed());
    }

    #[test]
    fn noisy_recursion_flags_corrupted_step() {
        let exact = quadratic_trace(20);
        let mut errors = exact.errors.clone();
        errors[11] = 5.0;
        let noisy = IterationTrace::from_raw(
            exact.iterates.clone(),
            errors,
            exact.values.clone(),
            Some(exact.values.clone()),
            exact.grad_norms.clone(),
            exact.inner_products.clone(),
            None,
            true,
        );
        let constants = stop_constants(-2.0);
        let result = check_noisy_recursion(&noisy, &constants, 0.0);
        assert_eq!(result.status, CheckStatus::Failed);
        assert_eq!(result.witness_step, Some(10));
    }

    #[test]
    fn divergence_recursion_identical_traces_pass() {
        let exact = quadratic_trace(10);
        let noisy = IterationTrace::from_raw(
            exact.iterates.clone(),
            exact.errors.clone(),
            exact.values.clone(),
            Some(exact.values.clone()),
            exact.grad_norms.clone(),
            exact.inner_products.clone(),
            None,
            true,
        );
        // delta = 0 and the same functional: gaps identically zero
        let result = check_divergence_recursion(&noisy, &exact, 0.5, 0.0);
        assert!(result.passed(), "{result:?}");
    }

    #[test]
    fn divergence_recursion_flags_shifted_iterate() {
        let exact = quadratic_trace(10);
        let mut iterates = exact.iterates.clone();
        iterates[6] = iterates[6].add(&Vector::new(vec![1.0]).unwrap());
        let noisy = IterationTrace::from_raw(
            iterates,
            exact.errors.clone(),
            exact.values.clone(),
            Some(exact.values.clone()),
            exact.grad_norms.clone(),
            exact.inner_products.clone(),
            None,
            true,
        );
        let result = check_divergence_recursion(&noisy, &exact, 0.5, 1e-6);
        assert_eq!(result.status, CheckStatus::Failed);
        assert_eq!(result.witness_step, Some(5));
    }

    #[test]
    fn divergence_recursion_length_mismatch_inapplicable() {
        let exact = quadratic_trace(10);
        let shorter = quadratic_trace(5);
        let noisy = IterationTrace::from_raw(
            shorter.iterates.clone(),
            shorter.errors.clone(),
            shorter.values.clone(),
            Some(shorter.values.clone()),
            shorter.grad_norms.clone(),
            shorter.inner_products.clone(),
            None,
            true,
        );
        assert_eq!(
            check_divergence_recursion(&noisy, &exact, 0.5, 0.0).status,
            CheckStatus::Inapplicable
        );
    }

    #[test]
    fn results_are_pure_in_their_inputs() {
        let trace = quadratic_trace(30);
        let a = check_descent(&trace, 0.5);
        let b = check_descent(&trace, 0.5);
        assert_eq!(
            a.worst_margin.unwrap().to_bits(),
            b.worst_margin.unwrap().to_bits()
        );
        assert_eq!(a.status, b.status);
    }
}
