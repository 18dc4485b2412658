//! Exact and noisy gradient iterations with full trace recording.
//!
//! Iterates are defined only while they remain in the ball; on escape the
//! offending iterate is recorded, `escaped_at` is set, and the run stops.
//! Projection back into the ball would change the iteration being analyzed,
//! so it is never applied.

use serde::Serialize;
use thiserror::Error;

use crate::functional::{FunctionalModel, NoisyFunctional};
use crate::space::{dist, inner, norm, Vector};
use crate::stopping::StoppingPolicy;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("initial guess lies outside the ball (distance {dist} > radius {radius})")]
    StartOutsideBall { dist: f64, radius: f64 },
    #[error(
        "noisy Lipschitz constant {0} >= 1: monotone descent of the noisy values is not \
         guaranteed, refusing to iterate"
    )]
    NoisyLipschitzTooLarge(f64),
    #[error("iterate became non-finite at step {0}")]
    NonFiniteIterate(usize),
}

/// Per-step record of a gradient descent run. All lists have length
/// `stopped_at + 1`; entry `k` belongs to the iterate `x_k`.
#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace {
    pub iterates: Vec<Vector>,
    /// `||x_k - x*||`
    pub errors: Vec<f64>,
    /// Values of the driving functional: `J(x_k)` for exact runs,
    /// `Jd(x_k)` for noisy runs.
    pub values: Vec<f64>,
    /// Exact values `J(x_k)` along a noisy trajectory, when tracked.
    pub exact_values: Option<Vec<f64>>,
    /// `||grad_k||` of the driving functional.
    pub grad_norms: Vec<f64>,
    /// `<grad_k, x_k - x*>`
    pub inner_products: Vec<f64>,
    /// First index whose iterate left the ball, if any.
    pub escaped_at: Option<usize>,
    /// Last completed iteration index.
    pub stopped_at: usize,
    /// True for noisy runs.
    pub noisy: bool,
}

impl IterationTrace {
    /// Assembles a trace from raw columns. Exists for fault-injection
    /// fixtures and deserialization; performs only length checks.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        iterates: Vec<Vector>,
        errors: Vec<f64>,
        values: Vec<f64>,
        exact_values: Option<Vec<f64>>,
        grad_norms: Vec<f64>,
        inner_products: Vec<f64>,
        escaped_at: Option<usize>,
        noisy: bool,
    ) -> Self {
        let n = iterates.len();
        assert!(n > 0, "trace must contain at least the initial iterate");
        assert_eq!(errors.len(), n);
        assert_eq!(values.len(), n);
        assert_eq!(grad_norms.len(), n);
        assert_eq!(inner_products.len(), n);
        if let Some(ev) = &exact_values {
            assert_eq!(ev.len(), n);
        }
        IterationTrace {
            iterates,
            errors,
            values,
            exact_values,
            grad_norms,
            inner_products,
            escaped_at,
            stopped_at: n - 1,
            noisy,
        }
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }

    /// Final error `||x_N - x*||`.
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("nonempty trace")
    }

    /// Smallest error along the run and the step attaining it; shows the
    /// semiconvergence dip even when the stopping index misses it.
    pub fn min_error(&self) -> (f64, usize) {
        let (k, e) = self
            .errors
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite errors"))
            .expect("nonempty trace");
        (*e, k)
    }

    /// Writes the per-step CSV (`k, err, J, Jdelta, grad_norm, inner_ek`).
    /// For exact runs the `Jdelta` column is empty; for noisy runs the `J`
    /// column holds the tracked exact values when present.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,err,J,Jdelta,grad_norm,inner_ek")?;
        for k in 0..self.len() {
            let (j_exact, j_noisy) = if self.noisy {
                (
                    self.exact_values
                        .as_ref()
                        .map(|ev| ev[k].to_string())
                        .unwrap_or_default(),
                    self.values[k].to_string(),
                )
            } else {
                (self.values[k].to_string(), String::new())
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                k, self.errors[k], j_exact, j_noisy, self.grad_norms[k], self.inner_products[k]
            )?;
        }
        Ok(())
    }
}

fn record_step(
    trace: &mut IterationTrace,
    model: &FunctionalModel,
    exact: Option<&FunctionalModel>,
    x: &Vector,
    grad: &Vector,
) {
    let center = model.domain().center();
    let e = x.sub(center);
    trace.iterates.push(x.clone());
    trace.errors.push(norm(&e));
    trace.values.push(model.value(x));
    if let (Some(ev), Some(exact)) = (trace.exact_values.as_mut(), exact) {
        ev.push(exact.value(x));
    }
    trace.grad_norms.push(norm(grad));
    trace.inner_products.push(inner(grad, &e));
}

fn run_iteration(
    model: &FunctionalModel,
    exact: Option<&FunctionalModel>,
    x0: &Vector,
    max_steps: usize,
    noisy: bool,
    track_exact: bool,
) -> Result<IterationTrace, EngineError> {
    let ball = model.domain();
    let d0 = dist(x0, ball.center());
    if d0 > ball.radius() {
        return Err(EngineError::StartOutsideBall {
            dist: d0,
            radius: ball.radius(),
        });
    }
    let mut trace = IterationTrace {
        iterates: Vec::with_capacity(max_steps + 1),
        errors: Vec::with_capacity(max_steps + 1),
        values: Vec::with_capacity(max_steps + 1),
        exact_values: (noisy && track_exact).then(|| Vec::with_capacity(max_steps + 1)),
        grad_norms: Vec::with_capacity(max_steps + 1),
        inner_products: Vec::with_capacity(max_steps + 1),
        escaped_at: None,
        stopped_at: 0,
        noisy,
    };
    let mut x = x0.clone();
    let mut grad = model.gradient(&x);
    record_step(&mut trace, model, exact, &x, &grad);
    for step in 0..max_steps {
        let next = x.sub(&grad);
        if !next.is_finite() {
            return Err(EngineError::NonFiniteIterate(step + 1));
        }
        x = next;
        grad = model.gradient(&x);
        record_step(&mut trace, model, exact, &x, &grad);
        if ball.strictly_outside(&x) {
            trace.escaped_at = Some(step + 1);
            break;
        }
    }
    trace.stopped_at = trace.iterates.len() - 1;
    Ok(trace)
}

/// Runs `x_{k+1} = x_k - grad J(x_k)` for up to `max_iter` steps or until
/// the iterate leaves the ball.
pub fn run_exact(
    model: &FunctionalModel,
    x0: &Vector,
    max_iter: usize,
) -> Result<IterationTrace, EngineError> {
    run_iteration(model, None, x0, max_iter, false, false)
}

/// Runs the noisy iteration for exactly the stopping index of
/// `policy` at `noisy.delta()` (or until escape). Requires the declared
/// noisy Lipschitz constant to be below 1. When `track_exact` is set, the
/// exact functional is evaluated along the noisy trajectory.
pub fn run_noisy(
    noisy: &NoisyFunctional,
    exact: &FunctionalModel,
    x0: &Vector,
    policy: &StoppingPolicy,
    track_exact: bool,
) -> Result<IterationTrace, EngineError> {
    if noisy.lipschitz_noisy() >= 1.0 {
        return Err(EngineError::NoisyLipschitzTooLarge(noisy.lipschitz_noisy()));
    }
    let steps = policy.stopping_index(noisy.delta());
    run_iteration(noisy.model(), Some(exact), x0, steps, true, track_exact)
}

/// Noisy iteration with an explicit step budget, used when comparing against
/// an exact trace of matched length.
pub fn run_noisy_steps(
    noisy: &NoisyFunctional,
    exact: &FunctionalModel,
    x0: &Vector,
    steps: usize,
    track_exact: bool,
) -> Result<IterationTrace, EngineError> {
    if noisy.lipschitz_noisy() >= 1.0 {
        return Err(EngineError::NoisyLipschitzTooLarge(noisy.lipschitz_noisy()));
    }
    run_iteration(noisy.model(), Some(exact), x0, steps, true, track_exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::BallSpec;

    fn quadratic_1d(lambda: f64, radius: f64) -> FunctionalModel {
        let ball = BallSpec::new(Vector::zeros(1), radius).unwrap();
        FunctionalModel::new(
            move |x: &Vector| 0.5 * lambda * x[0] * x[0],
            move |x: &Vector| Vector::new(vec![lambda * x[0]]).unwrap(),
            lambda,
            1.0,
            ball,
        )
    }

    #[test]
    fn quadratic_iterates_follow_closed_form() {
        let model = quadratic_1d(0.5, 2.0);
        let x0 = Vector::new(vec![1.0]).unwrap();
        let trace = run_exact(&model, &x0, 10).unwrap();
        assert_eq!(trace.stopped_at, 10);
        for k in 0..=10 {
            let expect = 0.5f64.powi(k as i32);
            assert_eq!(trace.iterates[k][0], expect, "iterate {k}");
            assert_eq!(trace.values[k], 0.25 * expect * expect);
        }
        assert!(!trace.escaped());
    }

    #[test]
    fn stationary_start_stays_put() {
        let model = quadratic_1d(0.5, 2.0);
        let trace = run_exact(&model, &Vector::zeros(1), 5).unwrap();
        assert!(trace.grad_norms.iter().all(|&g| g == 0.0));
        assert!(trace.iterates.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn zero_max_iter_records_only_start() {
        let model = quadratic_1d(0.5, 2.0);
        let x0 = Vector::new(vec![1.0]).unwrap();
        let trace = run_exact(&model, &x0, 0).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.stopped_at, 0);
    }

    #[test]
    fn start_outside_ball_is_refused() {
        let model = quadratic_1d(0.5, 2.0);
        let x0 = Vector::new(vec![3.0]).unwrap();
        assert!(matches!(
            run_exact(&model, &x0, 10),
            Err(EngineError::StartOutsideBall { .. })
        ));
    }

    #[test]
    fn outward_gradient_escape_is_detected() {
        // gradient pushing outward from the boundary: one step exits
        let ball = BallSpec::new(Vector::zeros(1), 1.0).unwrap();
        let model = FunctionalModel::new(
            |x: &Vector| 0.5 * x[0] * x[0],
            |x: &Vector| Vector::new(vec![-0.5 * x[0]]).unwrap(),
            0.5,
            1.0,
            ball,
        );
        let x0 = Vector::new(vec![1.0]).unwrap();
        let trace = run_exact(&model, &x0, 10).unwrap();
        assert_eq!(trace.escaped_at, Some(1));
        assert_eq!(trace.stopped_at, 1);
        assert_eq!(trace.len(), 2);
        assert!(trace.iterates[1][0] > 1.0);
    }

    #[test]
    fn replays_are_bitwise_identical() {
        let model = quadratic_1d(0.3, 2.0);
        let x0 = Vector::new(vec![1.5]).unwrap();
        let a = run_exact(&model, &x0, 50).unwrap();
        let b = run_exact(&model, &x0, 50).unwrap();
        for k in 0..a.len() {
            assert_eq!(a.iterates[k][0].to_bits(), b.iterates[k][0].to_bits());
            assert_eq!(a.values[k].to_bits(), b.values[k].to_bits());
        }
    }

    #[test]
    fn noisy_run_with_zero_noise_matches_exact_run() {
        use crate::functional::NoisyFunctional;
        use crate::stopping::StoppingPolicy;
        let model = quadratic_1d(0.5, 2.0);
        let noisy = NoisyFunctional::from_parts(model.clone(), 1e-3, 0.0, 0.5);
        let x0 = Vector::new(vec![1.0]).unwrap();
        let policy = StoppingPolicy::new(10.0, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(policy.stopping_index(1e-3), 316);
        let noisy_trace = run_noisy(&noisy, &model, &x0, &policy, true).unwrap();
        let exact_trace = run_exact(&model, &x0, noisy_trace.stopped_at).unwrap();
        assert!(noisy_trace.noisy);
        assert!(!noisy_trace.escaped());
        for k in 0..exact_trace.len() {
            assert_eq!(
                noisy_trace.iterates[k][0].to_bits(),
                exact_trace.iterates[k][0].to_bits()
            );
        }
        // exact values tracked along the (here identical) noisy trajectory
        assert_eq!(
            noisy_trace.exact_values.as_ref().unwrap(),
            &exact_trace.values
        );
    }

    #[test]
    fn noisy_run_stops_at_the_policy_index() {
        use crate::functional::NoisyFunctional;
        use crate::stopping::StoppingPolicy;
        let model = quadratic_1d(0.5, 2.0);
        let noisy = NoisyFunctional::from_parts(model.clone(), 1e-2, 1e-4, 0.51);
        let x0 = Vector::new(vec![1.0]).unwrap();
        // c0 = 1, kappa = 0.5, delta = 1e-2: N = min(10, 99) = 10
        let policy = StoppingPolicy::new(1.0, 0.5, 2.0, 1.0).unwrap();
        let trace = run_noisy(&noisy, &model, &x0, &policy, true).unwrap();
        assert_eq!(trace.stopped_at, 10);
        assert!(!trace.escaped());
    }

    #[test]
    fn noisy_run_refuses_large_lipschitz() {
        use crate::functional::NoisyFunctional;
        use crate::stopping::StoppingPolicy;
        let model = quadratic_1d(0.5, 2.0);
        let noisy = NoisyFunctional::from_parts(model.clone(), 0.6, 0.1, 1.1);
        let policy = StoppingPolicy::new(1.0, 0.5, 2.0, 1.0).unwrap();
        assert!(matches!(
            run_noisy(&noisy, &model, &Vector::zeros(1), &policy, false),
            Err(EngineError::NoisyLipschitzTooLarge(_))
        ));
    }

    #[test]
    fn noisy_boundary_start_with_outward_gradient_escapes_at_one() {
        use crate::functional::NoisyFunctional;
        use crate::stopping::StoppingPolicy;
        // perturbed gradient points outward at the boundary point x0 = 1
        let exact = quadratic_1d(0.5, 1.0);
        let ball = BallSpec::new(Vector::zeros(1), 1.0).unwrap();
        let perturbed = FunctionalModel::new(
            |x: &Vector| 0.25 * x[0] * x[0] + 0.6 * x[0],
            |x: &Vector| Vector::new(vec![0.5 * x[0] + 0.6]).unwrap(),
            0.5,
            1.0,
            ball,
        );
        let noisy = NoisyFunctional::from_parts(perturbed, 0.6, 0.7, 0.5);
        let x0 = Vector::new(vec![-1.0]).unwrap();
        let policy = StoppingPolicy::new(100.0, 0.5, 20.0, 1.0).unwrap();
        let trace = run_noisy(&noisy, &exact, &x0, &policy, true).unwrap();
        // first step: x1 = -1 - (0.5 * -1 + 0.6) = -1.1, outside the ball
        assert_eq!(trace.escaped_at, Some(1));
        assert_eq!(trace.stopped_at, 1);
        assert!((trace.iterates[1][0] + 1.1).abs() < 1e-15);
    }

    #[test]
    fn csv_has_expected_columns() {
        let model = quadratic_1d(0.5, 2.0);
        let x0 = Vector::new(vec![1.0]).unwrap();
        let trace = run_exact(&model, &x0, 2).unwrap();
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,err,J,Jdelta,grad_norm,inner_ek");
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("0,1,0.25,,"));
    }
}
