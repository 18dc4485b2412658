//! The four commands: run, study, diagnose, verify.
//!
//! Sweep cells (noise level x seed) are computed in parallel; all files are
//! written afterwards in a fixed cell order with no timestamps, so repeated
//! executions produce byte-identical artifacts regardless of worker count.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use illposed_core::conditions::{
    calibrate_phi, check_cone_implications, check_radial_monotonicity, default_grad_floor,
    derive_ncgb_from_cone, estimate_beta, estimate_eta_strong, estimate_eta_weak,
    estimate_lipschitz, estimate_tau_balancing, ray_ratio_summary, ConditionReport,
    DerivedConeParams, Gamma,
};
use illposed_core::engine::{run_exact, run_noisy_steps, IterationTrace};
use illposed_core::functional::{make_noisy, FunctionalError, NoisyFunctional};
use illposed_core::lemmas::{
    check_descent, check_divergence_recursion, check_error_bound, check_init_condition,
    check_noisy_descent, check_noisy_recursion, check_noisy_uniform, check_summability,
    CheckStatus, LemmaCheckResult,
};
use illposed_core::stopping::{stop_constants, StopConstants, StoppingPolicy};

use crate::artifacts::{self, write_json, write_text};
use crate::config::Experiment;
use crate::error::CliError;

/// Internal seeds for the condition estimates driven by the commands; fixed
/// so that results depend only on the user-facing config.
const SEED_BETA: u64 = 0xBE7A_0001;
const SEED_LIPSCHITZ: u64 = 0x11B5_0001;
const SEED_ETA: u64 = 0xE7A0_0001;
const SEED_TAU: u64 = 0x7A00_0001;
const SEED_PHI: u64 = 0xF100_0001;

/// Beta estimates are inflated by 5% toward zero-from-below (weaker, hence
/// safe for the derived constants).
fn inflate_beta(beta: f64) -> f64 {
    beta + 0.05 * beta.abs()
}

/// The beta the stopping constants use: analytic when the problem carries
/// one, otherwise the sampled estimate at gamma = 0; inflated either way.
fn resolve_beta(exp: &Experiment) -> Result<f64, CliError> {
    let raw = match exp.problem.analytic_facts.beta_gamma_zero {
        Some(beta) => beta,
        None => {
            let lipschitz_hat = exp.problem.exact_functional.lipschitz();
            estimate_beta(
                &exp.problem.exact_functional,
                &exp.problem.ball,
                Gamma::Finite(0.0),
                exp.condition_samples.max(500),
                default_grad_floor(lipschitz_hat, exp.problem.ball.radius()),
                SEED_BETA,
            )
            .map_err(|e| CliError::runtime(format!("beta estimation failed: {e}")))?
        }
    };
    Ok(inflate_beta(raw))
}

fn policy_for(exp: &Experiment, constants: &StopConstants) -> Result<StoppingPolicy, CliError> {
    StoppingPolicy::new(
        exp.stop.c0,
        exp.stop.kappa,
        exp.problem.ball.radius(),
        constants.xi,
    )
    .map_err(|e| CliError::invalid_config(e.to_string()))
}

pub struct CellKey {
    pub level: f64,
    pub seed: u64,
}

pub struct CellData {
    pub key: CellKey,
    pub noisy: NoisyFunctional,
    pub stop_index: usize,
    pub trace: IterationTrace,
}

pub enum CellOutcome {
    Ran(Box<CellData>),
    /// The declared noisy Lipschitz constant reached 1; the monotonicity
    /// lemma's precondition fails and the run is refused, not attempted.
    Refused { key: CellKey, reason: String },
}

#[derive(Serialize)]
pub struct CellSummary {
    pub data_noise_level: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_noisy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_value_noisy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_value_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_error_step: Option<usize>,
    pub escaped: bool,
    pub zero_iterations: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
}

fn summarize_cell(outcome: &CellOutcome) -> CellSummary {
    match outcome {
        CellOutcome::Ran(cell) => {
            let (min_error, min_step) = cell.trace.min_error();
            CellSummary {
                data_noise_level: cell.key.level,
                seed: cell.key.seed,
                delta: Some(cell.noisy.delta()),
                psi_delta: Some(cell.noisy.psi_delta()),
                lipschitz_noisy: Some(cell.noisy.lipschitz_noisy()),
                stop_index: Some(cell.stop_index),
                final_error: Some(cell.trace.final_error()),
                final_value_noisy: cell.trace.values.last().copied(),
                final_value_exact: cell
                    .trace
                    .exact_values
                    .as_ref()
                    .and_then(|ev| ev.last().copied()),
                min_error: Some(min_error),
                min_error_step: Some(min_step),
                escaped: cell.trace.escaped(),
                zero_iterations: cell.stop_index == 0,
                refused: None,
            }
        }
        CellOutcome::Refused { key, reason } => CellSummary {
            data_noise_level: key.level,
            seed: key.seed,
            delta: None,
            psi_delta: None,
            lipschitz_noisy: None,
            stop_index: None,
            final_error: None,
            final_value_noisy: None,
            final_value_exact: None,
            min_error: None,
            min_error_step: None,
            escaped: false,
            zero_iterations: false,
            refused: Some(reason.clone()),
        },
    }
}

/// Builds the noisy functional and runs one sweep cell.
fn run_cell(
    exp: &Experiment,
    policy: &StoppingPolicy,
    level: f64,
    seed: u64,
) -> Result<CellOutcome, CliError> {
    let key = CellKey { level, seed };
    let noisy = match make_noisy(
        &exp.problem.operator,
        &exp.problem.exact_functional,
        level,
        seed,
    ) {
        Ok(noisy) => noisy,
        Err(e @ FunctionalError::NoiseBoundViolated { .. }) => {
            return Err(CliError::runtime(e.to_string()))
        }
        Err(e) => return Err(CliError::invalid_config(e.to_string())),
    };
    if noisy.lipschitz_noisy() >= 1.0 {
        return Ok(CellOutcome::Refused {
            key,
            reason: format!(
                "noisy Lipschitz constant {:.6} >= 1 at data noise {level}",
                noisy.lipschitz_noisy()
            ),
        });
    }
    let stop_index = policy
        .try_stopping_index(noisy.delta())
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let trace = run_noisy_steps(
        &noisy,
        &exp.problem.exact_functional,
        &exp.x0,
        stop_index,
        exp.track_exact,
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(CellOutcome::Ran(Box::new(CellData {
        key,
        noisy,
        stop_index,
        trace,
    })))
}

fn run_sweep(
    exp: &Experiment,
    policy: &StoppingPolicy,
) -> Result<Vec<CellOutcome>, CliError> {
    let keys: Vec<(f64, u64)> = exp
        .noise_levels
        .iter()
        .flat_map(|&level| exp.seeds.iter().map(move |&seed| (level, seed)))
        .collect();
    keys.par_iter()
        .map(|&(level, seed)| run_cell(exp, policy, level, seed))
        .collect()
}

fn default_exact_iterations(
    exp: &Experiment,
    policy: &StoppingPolicy,
    cells: &[CellOutcome],
) -> usize {
    if let Some(cap) = exp.max_exact_iter {
        return cap;
    }
    let smallest_delta = cells
        .iter()
        .filter_map(|c| match c {
            CellOutcome::Ran(cell) => Some(cell.noisy.delta()),
            CellOutcome::Refused { .. } => None,
        })
        .fold(f64::INFINITY, f64::min);
    if smallest_delta.is_finite() {
        (10 * policy.stopping_index(smallest_delta)).clamp(10, 1_000_000)
    } else {
        1000
    }
}

/// The smallness requirements that the strong-noise theorems place on each
/// noise level; reported, never enforced.
#[derive(Serialize)]
pub struct SmallnessReport {
    pub data_noise_level: f64,
    pub delta: f64,
    pub psi_delta: f64,
    /// `delta < (1 - L) / 2`
    pub noise_below_half_gap: bool,
    /// `phi(J(x0) + psi) <= phi(J(x0)) + rho^2 / (8 theta)` for the
    /// calibrated linear phi
    pub phi_shift_ok: bool,
    /// `2 theta / |1 - L| * psi <= rho^2 / 8`
    pub psi_budget_ok: bool,
    /// `||e0||^2 + 2 theta / |1 - L| * J(x0) + theta phi(J(x0)) <= rho^2 / 16`
    pub start_quality_ok: bool,
    pub phi_coefficient: Option<f64>,
}

fn smallness_for_cell(
    exp: &Experiment,
    constants: &StopConstants,
    cell: &CellData,
) -> SmallnessReport {
    let model = &exp.problem.exact_functional;
    let lipschitz = model.lipschitz();
    let rho = exp.problem.ball.radius();
    let theta = constants.theta;
    let j0 = model.value(&exp.x0);
    let e0 = illposed_core::space::dist(&exp.x0, exp.problem.ball.center());
    let phi = calibrate_phi(&cell.noisy, &exp.problem.ball, 500, SEED_PHI).ok();
    let (phi_shift_ok, start_quality_ok, coefficient) = match phi {
        Some(phi) => (
            phi.phi(j0 + cell.noisy.psi_delta())
                <= phi.phi(j0) + rho * rho / (8.0 * theta),
            e0 * e0 + 2.0 * theta / (1.0 - lipschitz).abs() * j0 + theta * phi.phi(j0)
                <= rho * rho / 16.0,
            Some(phi.coefficient),
        ),
        None => (false, false, None),
    };
    SmallnessReport {
        data_noise_level: cell.key.level,
        delta: cell.noisy.delta(),
        psi_delta: cell.noisy.psi_delta(),
        noise_below_half_gap: cell.noisy.delta() < (1.0 - lipschitz) / 2.0,
        phi_shift_ok,
        psi_budget_ok: 2.0 * theta / (1.0 - lipschitz).abs() * cell.noisy.psi_delta()
            <= rho * rho / 8.0,
        start_quality_ok,
        phi_coefficient: coefficient,
    }
}

#[derive(Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub dimension: usize,
    pub lipschitz: f64,
    pub step_scale: f64,
    pub beta: f64,
    pub theta: f64,
    pub xi: f64,
    pub stop_c0: f64,
    pub stop_kappa: f64,
    /// `||x0 - x*||^2 + (1 + 2 beta)^+ / |1 - L| J(x0) < rho^2`
    pub start_in_ball_condition: bool,
    pub exact_steps: usize,
    pub exact_final_error: f64,
    pub exact_final_value: f64,
    pub exact_escaped: bool,
    pub cells: Vec<CellSummary>,
    pub smallness: Vec<SmallnessReport>,
}

pub fn cmd_run(exp: &Experiment, out_dir: &Path, gnuplot: bool) -> Result<i32, CliError> {
    let beta = resolve_beta(exp)?;
    let constants = stop_constants(beta);
    let policy = policy_for(exp, &constants)?;
    let cells = run_sweep(exp, &policy)?;

    let exact_iterations = default_exact_iterations(exp, &policy, &cells);
    let exact_trace = run_exact(&exp.problem.exact_functional, &exp.x0, exact_iterations)
        .map_err(|e| CliError::invalid_config(e.to_string()))?;

    let init_ok = check_init_condition(
        &exp.x0,
        &exp.problem.exact_functional,
        beta,
        &exp.problem.ball,
    );

    let smallness: Vec<SmallnessReport> = cells
        .iter()
        .filter_map(|outcome| match outcome {
            CellOutcome::Ran(cell) if cell.key.seed == exp.seeds[0] => {
                Some(smallness_for_cell(exp, &constants, cell))
            }
            _ => None,
        })
        .collect();

    let summary = RunSummary {
        problem: exp.problem.name.clone(),
        dimension: exp.problem.ball.dim(),
        lipschitz: exp.problem.exact_functional.lipschitz(),
        step_scale: exp.problem.exact_functional.step_scale(),
        beta,
        theta: constants.theta,
        xi: constants.xi,
        stop_c0: exp.stop.c0,
        stop_kappa: exp.stop.kappa,
        start_in_ball_condition: init_ok,
        exact_steps: exact_trace.stopped_at,
        exact_final_error: exact_trace.final_error(),
        exact_final_value: *exact_trace.values.last().expect("nonempty"),
        exact_escaped: exact_trace.escaped(),
        cells: cells.iter().map(summarize_cell).collect(),
        smallness,
    };

    artifacts::write_trace_files(out_dir, &exp.problem.name, None, &exact_trace)?;
    for outcome in &cells {
        if let CellOutcome::Ran(cell) = outcome {
            artifacts::write_trace_files(out_dir, &exp.problem.name, Some(cell), &cell.trace)?;
        }
    }
    write_json(&out_dir.join("summary.json"), &summary)?;
    if gnuplot {
        write_text(
            &out_dir.join("plots.gp"),
            &artifacts::gnuplot_run_script(&cells),
        )?;
    }

    println!(
        "problem {} (dim {}), L = {}, step_scale = {}",
        summary.problem, summary.dimension, summary.lipschitz, summary.step_scale
    );
    println!(
        "beta = {beta}, theta = {}, xi = {}; start condition holds: {init_ok}",
        constants.theta, constants.xi
    );
    for report in &summary.smallness {
        println!(
            "level {:>9}: delta {:.3e}  noise_below_half_gap {}  phi_shift_ok {}  \
             psi_budget_ok {}  start_quality_ok {}",
            format!("{:e}", report.data_noise_level),
            report.delta,
            report.noise_below_half_gap,
            report.phi_shift_ok,
            report.psi_budget_ok,
            report.start_quality_ok
        );
    }
    for cell in &summary.cells {
        match &cell.refused {
            Some(reason) => println!(
                "cell level={:e} seed={}: refused ({reason})",
                cell.data_noise_level, cell.seed
            ),
            None => println!(
                "cell level={:e} seed={}: N={} final_err={:.6e} min_err={:.6e}{}",
                cell.data_noise_level,
                cell.seed,
                cell.stop_index.unwrap_or(0),
                cell.final_error.unwrap_or(f64::NAN),
                cell.min_error.unwrap_or(f64::NAN),
                if cell.escaped { " ESCAPED" } else { "" }
            ),
        }
    }
    Ok(0)
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    Decreasing,
    NonMonotone,
    Inconclusive,
}

#[derive(Serialize)]
pub struct MedianRow {
    pub data_noise_level: f64,
    pub median_final_error: f64,
}

#[derive(Serialize)]
pub struct StudySummary {
    pub problem: String,
    pub rows: Vec<CellSummary>,
    pub medians: Vec<MedianRow>,
    pub trend_verdict: TrendVerdict,
}

/// Per-rung slack on the strict decrease of the medians.
const TREND_SLACK: f64 = 0.05;

fn judge_trend(medians: &[MedianRow], escape_at_tail: bool) -> TrendVerdict {
    if escape_at_tail {
        return TrendVerdict::Inconclusive;
    }
    let decreasing = medians.windows(2).all(|pair| {
        pair[1].median_final_error.is_finite()
            && pair[0].median_final_error.is_finite()
            && pair[1].median_final_error < pair[0].median_final_error * (1.0 + TREND_SLACK)
    });
    if decreasing {
        TrendVerdict::Decreasing
    } else {
        TrendVerdict::NonMonotone
    }
}

pub fn cmd_study(exp: &Experiment, out_dir: &Path, gnuplot: bool) -> Result<i32, CliError> {
    if exp.noise_levels.len() < 3 {
        return Err(CliError::invalid_config(format!(
            "a convergence study needs at least 3 noise levels, got {}",
            exp.noise_levels.len()
        )));
    }
    if !exp
        .noise_levels
        .windows(2)
        .all(|pair| pair[1] < pair[0])
    {
        return Err(CliError::invalid_config(
            "noise_levels must be strictly decreasing for a study",
        ));
    }
    let beta = resolve_beta(exp)?;
    let constants = stop_constants(beta);
    let policy = policy_for(exp, &constants)?;
    let cells = run_sweep(exp, &policy)?;

    let mut medians = Vec::new();
    for &level in &exp.noise_levels {
        let mut finals: Vec<f64> = cells
            .iter()
            .filter_map(|outcome| match outcome {
                CellOutcome::Ran(cell) if cell.key.level == level => {
                    Some(cell.trace.final_error())
                }
                _ => None,
            })
            .collect();
        finals.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        let median = if finals.is_empty() {
            f64::NAN
        } else if finals.len() % 2 == 1 {
            finals[finals.len() / 2]
        } else {
            0.5 * (finals[finals.len() / 2 - 1] + finals[finals.len() / 2])
        };
        medians.push(MedianRow {
            data_noise_level: level,
            median_final_error: median,
        });
    }

    // escapes at the two smallest levels make the trend unreadable
    let smallest_two: Vec<f64> = exp.noise_levels.iter().rev().take(2).cloned().collect();
    let escape_at_tail = cells.iter().any(|outcome| match outcome {
        CellOutcome::Ran(cell) => {
            cell.trace.escaped() && smallest_two.contains(&cell.key.level)
        }
        CellOutcome::Refused { key, .. } => smallest_two.contains(&key.level),
    });
    let trend_verdict = judge_trend(&medians, escape_at_tail);

    let summary = StudySummary {
        problem: exp.problem.name.clone(),
        rows: cells.iter().map(summarize_cell).collect(),
        medians,
        trend_verdict,
    };
    write_json(&out_dir.join("study.json"), &summary)?;
    if gnuplot {
        write_text(
            &out_dir.join("study.gp"),
            &artifacts::gnuplot_study_script(),
        )?;
        // flat file the plot script reads
        let mut csv = String::from("data_noise_level,median_final_error\n");
        for row in &summary.medians {
            csv.push_str(&format!(
                "{},{}\n",
                row.data_noise_level, row.median_final_error
            ));
        }
        write_text(&out_dir.join("study_medians.csv"), &csv)?;
    }

    println!("study on {} over {} levels:", summary.problem, exp.noise_levels.len());
    for row in &summary.medians {
        println!(
            "  level {:>9}: median final error {:.6e}",
            format!("{:e}", row.data_noise_level),
            row.median_final_error
        );
    }
    let verdict_text = match summary.trend_verdict {
        TrendVerdict::Decreasing => "decreasing",
        TrendVerdict::NonMonotone => "non-monotone",
        TrendVerdict::Inconclusive => "inconclusive",
    };
    println!("trend verdict: {verdict_text}");
    Ok(0)
}

pub fn cmd_diagnose(exp: &Experiment, out_dir: &Path) -> Result<i32, CliError> {
    if exp.condition_samples == 0 {
        return Err(CliError::invalid_config(
            "condition_samples must be positive for diagnose",
        ));
    }
    let samples = exp.condition_samples;
    let model = &exp.problem.exact_functional;
    let ball = &exp.problem.ball;
    let op = &exp.problem.operator;

    let lipschitz_hat = estimate_lipschitz(model, ball, samples, SEED_LIPSCHITZ);
    let grad_floor = default_grad_floor(lipschitz_hat, ball.radius());
    let residual_floor = 1e-9 * (1.0 + illposed_core::space::norm(op.data()));

    let beta_gamma_zero =
        estimate_beta(model, ball, Gamma::Finite(0.0), samples, grad_floor, SEED_BETA).ok();
    let gamma = Gamma::Finite(exp.condition_gamma);
    let beta_hat = estimate_beta(model, ball, gamma, samples, grad_floor, SEED_BETA).ok();
    let eta_weak_hat = estimate_eta_weak(op, ball, samples, residual_floor, SEED_ETA).ok();
    let eta_strong_hat =
        estimate_eta_strong(op, ball, samples, residual_floor, SEED_ETA.wrapping_add(1)).ok();

    let mut witnesses = Vec::new();
    let tau_hat = match estimate_tau_balancing(model, ball, exp.condition_gamma, samples, SEED_TAU)
    {
        Ok((tau, mut tau_witnesses)) => {
            witnesses.append(&mut tau_witnesses);
            Some(tau)
        }
        Err(_) => None,
    };

    // radial monotonicity at the estimated weak constant (capped below 1)
    if let Some(eta) = eta_weak_hat {
        let eta_test = eta.min(1.0);
        if let Ok(outcome) =
            check_radial_monotonicity(op, ball, eta_test, samples.min(500), 16, SEED_ETA)
        {
            witnesses.extend(outcome.witnesses);
        }
    }

    // noisy functional at the smallest configured level for phi calibration
    let smallest_level = exp
        .noise_levels
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let phi_coefficient_hat = make_noisy(op, model, smallest_level, exp.seeds[0])
        .ok()
        .and_then(|noisy| calibrate_phi(&noisy, ball, samples, SEED_PHI).ok())
        .map(|phi| phi.coefficient);

    let derived_from_cone = match eta_strong_hat {
        Some(eta) if eta < 1.0 && eta > 0.0 => {
            let jac_sup = op.jacobian_norm_sup(samples.min(1000), SEED_ETA.wrapping_add(2));
            let jac_sup_scaled = model.step_scale().sqrt() * jac_sup;
            derive_ncgb_from_cone(eta, jac_sup_scaled).ok().map(|(gamma, beta)| {
                let beta_hat_at_gamma = estimate_beta(
                    model,
                    ball,
                    Gamma::Finite(gamma),
                    samples,
                    grad_floor,
                    SEED_BETA.wrapping_add(1),
                )
                .ok();
                // internal consistency of the cone implications on the
                // estimator's own sample set
                if let Ok(outcome) = check_cone_implications(
                    eta,
                    op,
                    ball,
                    samples,
                    SEED_ETA.wrapping_add(1),
                ) {
                    witnesses.extend(outcome.witnesses);
                }
                DerivedConeParams {
                    eta,
                    jac_sup: jac_sup_scaled,
                    gamma,
                    beta,
                    tau_lower_bound: (1.0 - eta) * gamma / (1.0 + eta),
                    beta_hat_at_gamma,
                }
            })
        }
        Some(eta) if eta >= 1.0 => {
            witnesses.push(illposed_core::conditions::ConditionWitness {
                condition: "strong-cone-constant-at-least-one".into(),
                x1: ball.center().clone(),
                x2: None,
                measured: eta,
                threshold: 1.0,
            });
            None
        }
        _ => None,
    };

    let report = ConditionReport {
        gamma,
        beta_hat,
        beta_gamma_zero_hat: beta_gamma_zero,
        eta_weak_hat,
        eta_strong_hat,
        tau_hat,
        lipschitz_hat,
        phi_coefficient_hat,
        samples,
        witnesses,
        derived_from_cone,
        ray_ratios: ray_ratio_summary(model, ball, samples.min(200), SEED_TAU.wrapping_add(1)),
        estimate_kind: "sample extremes: lower-bound estimates unless witnessed",
    };

    write_json(&out_dir.join("report.json"), &report)?;

    println!("condition report for {} ({} samples):", exp.problem.name, samples);
    println!("  lipschitz_hat      = {}", report.lipschitz_hat);
    println!("  beta_hat(gamma=0)  = {:?}", report.beta_gamma_zero_hat);
    println!(
        "  beta_hat(gamma={}) = {:?}",
        exp.condition_gamma, report.beta_hat
    );
    println!("  eta_weak_hat       = {:?}", report.eta_weak_hat);
    println!("  eta_strong_hat     = {:?}", report.eta_strong_hat);
    println!(
        "  tau_hat(gamma={}) = {:?}",
        exp.condition_gamma, report.tau_hat
    );
    println!("  phi_coefficient    = {:?}", report.phi_coefficient_hat);
    if let Some(derived) = &report.derived_from_cone {
        println!(
            "  derived from cone: gamma = {}, beta = {}, tau >= {} (beta_hat at gamma: {:?})",
            derived.gamma, derived.beta, derived.tau_lower_bound, derived.beta_hat_at_gamma
        );
    }
    println!("  witnesses: {}", report.witnesses.len());
    Ok(0)
}

#[derive(Serialize)]
pub struct ScopedCheck {
    pub scope: String,
    #[serde(flatten)]
    pub result: LemmaCheckResult,
}

fn inject_fault(target: &str, exact: &mut IterationTrace, cells: &mut [CellOutcome]) {
    let mid = (exact.len() / 2).max(1);
    match target {
        "descent" => exact.values[mid] += 1.0,
        "error-bound" => {
            exact.errors[mid] = 2.0 * (exact.errors[0] + 1.0) * (exact.errors[0] + 1.0);
        }
        "summability" => exact.inner_products[mid - 1] += 100.0,
        _ => {
            for outcome in cells.iter_mut() {
                if let CellOutcome::Ran(cell) = outcome {
                    let trace = &mut cell.trace;
                    if trace.len() < 2 {
                        continue;
                    }
                    let k = (trace.len() / 2).max(1);
                    match target {
                        "noisy-recursion" => {
                            // smallest bump that breaks the recursion at
                            // k-1 without touching the uniform bound's slack
                            let rhs = trace.errors[k - 1] * trace.errors[k - 1]
                                + trace.grad_norms[k - 1] * trace.grad_norms[k - 1]
                                + 2.0 * cell.noisy.delta() * trace.errors[k - 1];
                            trace.errors[k] = (rhs + 1e-4 * (1.0 + rhs)).sqrt();
                        }
                        "noisy-uniform" => {
                            trace.errors[k] =
                                2.0 * (trace.errors[0] + cell.noisy.delta() * k as f64 + 10.0);
                        }
                        "divergence-recursion" => {
                            let dim = trace.iterates[k].dim();
                            let bump = illposed_core::space::Vector::from_fn(dim, |_| 1.0);
                            trace.iterates[k] = trace.iterates[k].add(&bump);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
}

pub fn cmd_verify(exp: &Experiment, out_dir: &Path) -> Result<i32, CliError> {
    let beta = resolve_beta(exp)?;
    let constants = stop_constants(beta);
    let policy = policy_for(exp, &constants)?;
    let mut cells = run_sweep(exp, &policy)?;

    let lipschitz = exp.problem.exact_functional.lipschitz();
    let exact_iterations = default_exact_iterations(exp, &policy, &cells);
    let mut exact_trace = run_exact(&exp.problem.exact_functional, &exp.x0, exact_iterations)
        .map_err(|e| CliError::invalid_config(e.to_string()))?;

    // matched-length exact traces for the divergence comparison, computed
    // before any fault injection
    let mut matched_exact: Vec<Option<IterationTrace>> = Vec::with_capacity(cells.len());
    for outcome in &cells {
        matched_exact.push(match outcome {
            CellOutcome::Ran(cell) => Some(
                run_exact(&exp.problem.exact_functional, &exp.x0, cell.trace.stopped_at)
                    .map_err(|e| CliError::runtime(e.to_string()))?,
            ),
            CellOutcome::Refused { .. } => None,
        });
    }

    if let Some(target) = &exp.fault_injection {
        inject_fault(target, &mut exact_trace, &mut cells);
    }

    let mut results: Vec<ScopedCheck> = Vec::new();
    let mut push = |scope: String, result: LemmaCheckResult| {
        results.push(ScopedCheck { scope, result });
    };

    push("exact".into(), check_descent(&exact_trace, lipschitz));
    push(
        "exact".into(),
        check_error_bound(&exact_trace, beta, lipschitz),
    );
    push(
        "exact".into(),
        check_summability(&exact_trace, beta, lipschitz),
    );

    for (outcome, matched) in cells.iter().zip(&matched_exact) {
        if let CellOutcome::Ran(cell) = outcome {
            let scope = format!("noisy level={:e} seed={}", cell.key.level, cell.key.seed);
            push(
                scope.clone(),
                check_noisy_descent(&cell.trace, cell.noisy.lipschitz_noisy()),
            );
            push(
                scope.clone(),
                check_noisy_recursion(&cell.trace, &constants, cell.noisy.delta()),
            );
            push(
                scope.clone(),
                check_noisy_uniform(
                    &cell.trace,
                    &constants,
                    cell.noisy.delta(),
                    cell.noisy.lipschitz_noisy(),
                    cell.trace.values[0],
                ),
            );
            if let Some(exact_matched) = matched {
                push(
                    scope,
                    check_divergence_recursion(
                        &cell.trace,
                        exact_matched,
                        lipschitz,
                        cell.noisy.delta(),
                    ),
                );
            }
        }
    }

    write_json(&out_dir.join("verify.json"), &results)?;

    let mut any_failed = false;
    println!(
        "{:<34} {:<22} {:>10} {:>14} {:>8}",
        "scope", "lemma", "status", "worst_margin", "witness"
    );
    for check in &results {
        let status = match check.result.status {
            CheckStatus::Passed => "passed",
            CheckStatus::Failed => {
                any_failed = true;
                "FAILED"
            }
            CheckStatus::Inapplicable => "n/a",
        };
        println!(
            "{:<34} {:<22} {:>10} {:>14} {:>8}",
            check.scope,
            check.result.lemma_id,
            status,
            check
                .result
                .worst_margin
                .map(|m| format!("{m:.3e}"))
                .unwrap_or_else(|| "-".into()),
            check
                .result
                .witness_step
                .map(|w| w.to_string())
                .unwrap_or_else(|| "-".into()),
        );
    }
    if any_failed {
        let failed: Vec<&str> = results
            .iter()
            .filter(|c| c.result.status == CheckStatus::Failed)
            .map(|c| c.result.lemma_id)
            .collect();
        println!("failing lemmas: {failed:?}");
    }
    Ok(if any_failed { 1 } else { 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(errs: &[f64]) -> Vec<MedianRow> {
        errs.iter()
            .enumerate()
            .map(|(i, &e)| MedianRow {
                data_noise_level: 10f64.powi(-(i as i32) - 1),
                median_final_error: e,
            })
            .collect()
    }

    #[test]
    fn trend_verdicts() {
        assert!(matches!(
            judge_trend(&rows(&[0.3, 0.2, 0.1]), false),
            TrendVerdict::Decreasing
        ));
        // within the 5% slack a marginal uptick still counts as decreasing
        assert!(matches!(
            judge_trend(&rows(&[0.3, 0.2, 0.205]), false),
            TrendVerdict::Decreasing
        ));
        assert!(matches!(
            judge_trend(&rows(&[0.3, 0.2, 0.4]), false),
            TrendVerdict::NonMonotone
        ));
        assert!(matches!(
            judge_trend(&rows(&[0.3, 0.2, 0.1]), true),
            TrendVerdict::Inconclusive
        ));
        assert!(matches!(
            judge_trend(&rows(&[0.3, f64::NAN, 0.1]), false),
            TrendVerdict::NonMonotone
        ));
    }

    #[test]
    fn beta_inflation_moves_toward_zero_from_below() {
        assert_eq!(inflate_beta(-2.0), -1.9);
        assert_eq!(inflate_beta(0.0), 0.0);
        assert_eq!(inflate_beta(1.0), 1.05);
    }
}
