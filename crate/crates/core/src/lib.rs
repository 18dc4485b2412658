//! Gradient-descent iterations for ill-posed minimization.
//!
//! The solution of an ill-posed problem is characterized as the global
//! minimum of a nonnegative functional `J` on a ball around the exact
//! solution, with a Lipschitz-continuous gradient whose constant is below 1
//! (the stepsize being folded into `J`). Iteration runs on a noisy stand-in
//! `Jd` whose gradient and values deviate from `J` by at most `delta` and
//! `psi(delta)`, and is stopped by an a-priori index `N_delta`.
//!
//! The crate provides:
//!
//! * [`space`] — finite-dimensional Hilbert-space kernel (vectors, ball);
//! * [`functional`] — functional/operator models, least-squares
//!   construction, synthetic noise with validated bounds, gradient checks;
//! * [`problems`] — benchmark instances with known solutions;
//! * [`engine`] — the exact and noisy iterations with trace recording and
//!   ball-escape detection;
//! * [`stopping`] — the a-priori stopping index and its derived constants;
//! * [`conditions`] — sampling estimators and falsifiers for the
//!   nonlinearity conditions (angle condition, balancing, tangential cone,
//!   radial monotonicity, Lipschitz and gradient-growth constants);
//! * [`lemmas`] — per-iteration inequality checks over recorded traces.

pub mod conditions;
pub mod engine;
pub mod functional;
pub mod lemmas;
pub mod problems;
pub mod sampling;
pub mod space;
pub mod stopping;

pub use conditions::{ConditionReport, Gamma};
pub use engine::{run_exact, run_noisy, IterationTrace};
pub use functional::{FunctionalModel, NoisyFunctional, OperatorModel, PhiBound};
pub use problems::ProblemInstance;
pub use space::{BallSpec, Vector};
pub use stopping::{stop_constants, StopConstants, StoppingPolicy};
