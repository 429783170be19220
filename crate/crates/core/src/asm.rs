//! Alternating optimization of powers and subcarrier assignments.
//!
//! Joint mode first runs the uniform-power iteration from the macro-cell
//! initialization. The direct search can then grow the schedule, since every
//! candidate gets a fresh even split of the budgets. From that point it
//! alternates linearized power steps with searches at fixed power. Uniform
//! mode stops after the first stage. Both stages only accept non-decreasing
//! objectives, so the trace is monotone, and joint mode can never end below
//! uniform mode on the same instance and budget.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::power::{solve_power_subproblem, PowerOptions};
use crate::rates::{Assignment, EaveDecoding, Gains, PowerAllocation, RateModel, Residuals, SlackVars};
use crate::subcarrier::{mads_with, score, uniform_split, PowerRule, SearchBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsmMode {
    Joint,
    UniformPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsmOptions {
    /// Stopping threshold on the Euclidean power change in watts; `None`
    /// selects `1e-3 * sqrt(total budget)`.
    pub theta: Option<f64>,
    pub max_iters: usize,
    pub power_tol: f64,
    pub budget: SearchBudget,
    pub mode: AsmMode,
}

impl Default for AsmOptions {
    fn default() -> Self {
        Self {
            theta: None,
            max_iters: 50,
            power_tol: 1e-6,
            budget: SearchBudget::default(),
            mode: AsmMode::Joint,
        }
    }
}

impl AsmOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta {
            if !(t > 0.0) {
                return Err(Error::Config(format!("theta must be positive, got {t}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::Config("power_tol must be positive".into()));
        }
        self.budget.validate()
    }

    pub fn theta_for(&self, inst: &NetworkInstance) -> f64 {
        self.theta
            .unwrap_or_else(|| 1e-3 * inst.config.total_budget().sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub mode: AsmMode,
    /// Epigraph objective (bits/s/Hz) after initialization and after every
    /// iteration.
    pub objective_trace: Vec<f64>,
    /// Euclidean power change of every iteration, watts.
    pub step_trace: Vec<f64>,
    pub iterations: usize,
    /// Iterations spent in the uniform-power stage.
    pub uniform_iterations: usize,
    pub power: PowerAllocation,
    pub assignment: Assignment,
    /// Tight slacks at the final point, bits/s/Hz.
    pub upsilon: SlackVars,
    pub residuals: Residuals,
    /// Sum secrecy rate with every term clamped at zero, bits/s/Hz.
    pub objective: f64,
    /// Final epigraph objective (unclamped terms), bits/s/Hz.
    pub epigraph: f64,
    pub terminated_by_theta: bool,
    /// Power change of the last iteration, watts.
    pub last_step: f64,
    pub wall_ms: f64,
}

/// Macro-cell start: small cells silent, and every subcarrier given to the
/// macro user with the best secrecy rate at an even power split. Ties go to
/// the lowest user index.
pub fn initialize_with(model: &RateModel) -> (PowerAllocation, Assignment) {
    let inst = model.inst;
    let mut p = PowerAllocation::zeros(inst);
    let mut rho = Assignment::empty(inst);
    let share = inst.config.p_max[0] / inst.subcarriers() as f64;
    for n in 0..inst.subcarriers() {
        let mut best: Option<(usize, f64)> = None;
        for m in 0..inst.users_in(0) {
            let mut trial_p = PowerAllocation::zeros(inst);
            let mut trial_rho = Assignment::empty(inst);
            trial_p.p[0][m][n] = share;
            trial_rho.rho[0][m][n] = true;
            let s = model.secrecy_rate(&trial_p, &trial_rho, 0, m, n);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((m, s));
            }
        }
        if let Some((m, _)) = best {
            rho.rho[0][m][n] = true;
            p.p[0][m][n] = share;
        }
    }
    (p, rho)
}

pub fn initialize(inst: &NetworkInstance) -> (PowerAllocation, Assignment) {
    initialize_with(&RateModel::new(inst, Gains::True))
}

/// Longest multiple of `to - from` that keeps every power non-negative and
/// every budget respected.
fn max_stretch(model: &RateModel, rho: &Assignment, from: &PowerAllocation, to: &PowerAllocation) -> f64 {
    let inst = model.inst;
    let mut t_max = f64::INFINITY;
    for c in rho.scheduled() {
        let d = to.get(c) - from.get(c);
        if d < 0.0 {
            t_max = t_max.min(from.get(c) / -d);
        }
    }
    for f in 0..inst.bs_count() {
        let (a, b) = (from.bs_load(rho, f), to.bs_load(rho, f));
        if b > a {
            t_max = t_max.min((inst.config.p_max[f] - a) / (b - a));
        }
    }
    t_max
}

/// Moves further along the direction of a power step while the objective
/// keeps improving. Returns `to` itself when no multiple beyond one helps.
pub(crate) fn extrapolate(model: &RateModel, rho: &Assignment, from: &PowerAllocation, to: PowerAllocation) -> PowerAllocation {
    let t_max = max_stretch(model, rho, from, &to);
    if !(t_max > 1.0) {
        return to;
    }
    let at = |t: f64| {
        let mut p = to.clone();
        for c in rho.scheduled() {
            let v = from.get(c) + t * (to.get(c) - from.get(c));
            p.set(c, v.max(0.0));
        }
        p
    };
    let mut best = score(model, rho, &to);
    let mut best_p = to.clone();
    let mut t = 1.0;
    while t < t_max {
        t = (2.0 * t).min(t_max);
        let p = at(t);
        let value = score(model, rho, &p);
        if !(value > best) {
            break;
        }
        best = value;
        best_p = p;
    }
    best_p
}

/// Runs the alternating solver with the given evaluation model.
pub fn run_model(model: &RateModel, options: &AsmOptions) -> Result<SolverReport> {
    options.validate()?;
    let started = Instant::now();
    let inst = model.inst;
    let theta = options.theta_for(inst);

    let (_, mut rho) = initialize_with(model);
    let mut p = uniform_split(inst, &rho);
    let mut trace = vec![model.epigraph_objective(&p, &rho)];
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut steps = Vec::new();
    let mut converged = false;

    // uniform-power stage
    while iterations < options.max_iters {
        iterations += 1;
        let budget = SearchBudget {
            seed: options.budget.seed.wrapping_add(iterations as u64),
            ..options.budget
        };
        let found = mads_with(model, PowerRule::Uniform, &rho, &budget);
        rho = found.assignment;
        let next = uniform_split(inst, &rho);
        last_step = next.distance(&p);
        steps.push(last_step);
        p = next;
        trace.push(model.epigraph_objective(&p, &rho));
        if last_step <= theta {
            converged = true;
            break;
        }
    }
    let uniform_iterations = iterations;

    if options.mode == AsmMode::Joint && converged {
        converged = false;
        let power_options = PowerOptions {
            tol: options.power_tol,
            ..PowerOptions::default()
        };
        while iterations < options.max_iters {
            iterations += 1;
            let step = solve_power_subproblem(model, &rho, &p, &power_options).map_err(|e| Error::AtIteration {
                iteration: iterations,
                source: Box::new(e),
            })?;
            let budget = SearchBudget {
                seed: options.budget.seed.wrapping_add(iterations as u64),
                ..options.budget
            };
            let stepped = if step.moved {
                extrapolate(model, &rho, &p, step.power)
            } else {
                step.power
            };
            let found = mads_with(model, PowerRule::Fixed(&stepped), &rho, &budget);
            rho = found.assignment;
            let next = stepped.masked(&rho);
            last_step = next.distance(&p);
            steps.push(last_step);
            p = next;
            trace.push(model.epigraph_objective(&p, &rho));
            if last_step <= theta {
                converged = true;
                break;
            }
        }
    }

    Ok(SolverReport {
        mode: options.mode,
        iterations,
        uniform_iterations,
        upsilon: model.tight_slacks(&p, &rho),
        residuals: model.residuals(&p, &rho, model.decoding == EaveDecoding::NoSic),
        objective: model.sum_secrecy(&p, &rho),
        epigraph: *trace.last().unwrap(),
        objective_trace: trace,
        step_trace: steps,
        power: p,
        assignment: rho,
        terminated_by_theta: converged,
        last_step,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn run(inst: &NetworkInstance, options: &AsmOptions, gains: Gains) -> Result<SolverReport> {
    run_model(&RateModel::new(inst, gains), options)
}

/// Same pipeline against eavesdroppers that perform SIC, without the
/// avoidance constraints. Evaluated with the true gains.
pub fn run_baseline_sic_eve(inst: &NetworkInstance, options: &AsmOptions) -> Result<SolverReport> {
    run_model(&RateModel::new(inst, Gains::True).with_decoding(EaveDecoding::Sic), options)
}
