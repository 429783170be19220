//! Binary subcarrier assignment for a given power rule.
//!
//! The search is a discrete poll-based direct search on the hypercube of
//! assignments. Polls at radius 1 try every single-bit flip and every swap of
//! a scheduled user for an unscheduled one on the same subcarrier; polls at
//! radius 2 try every pair of flips. The radius grows after a successful poll
//! and shrinks after a failed one, and the search stops once both radii have
//! failed in a row. Infeasible assignments score `-inf`.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::rates::{coords, Assignment, Coord, EaveDecoding, Gains, PowerAllocation, RateModel};

/// Largest number of binary variables the exhaustive search accepts.
pub const EXHAUSTIVE_CAP: usize = 20;

/// Relative slack allowed on the power budget.
const BUDGET_TOL: f64 = 1e-9;
/// Normalized slack allowed on the SIC constraints.
const SIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub max_evals: usize,
    /// Poll radius of the first poll, 1 or 2.
    pub initial_poll_size: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            initial_poll_size: 1,
            seed: 0,
        }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 {
            return Err(Error::Config("search budget needs max_evals >= 1".into()));
        }
        if !(1..=2).contains(&self.initial_poll_size) {
            return Err(Error::Config("initial_poll_size must be 1 or 2".into()));
        }
        Ok(())
    }
}

/// How candidate assignments obtain their powers.
#[derive(Debug, Clone, Copy)]
pub enum PowerRule<'a> {
    /// Every candidate is scored with the same allocation.
    Fixed(&'a PowerAllocation),
    /// Each BS splits its budget evenly over its scheduled pairs.
    Uniform,
}

impl PowerRule<'_> {
    pub fn power_for<'p>(&'p self, inst: &NetworkInstance, rho: &Assignment) -> Cow<'p, PowerAllocation> {
        match self {
            PowerRule::Fixed(p) => Cow::Borrowed(*p),
            PowerRule::Uniform => Cow::Owned(uniform_split(inst, rho)),
        }
    }
}

/// `p_max[f] / (number of scheduled pairs of f)` on every scheduled pair.
pub fn uniform_split(inst: &NetworkInstance, rho: &Assignment) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(inst);
    for f in 0..inst.bs_count() {
        let count = rho.rho[f].iter().flatten().filter(|&&on| on).count();
        if count == 0 {
            continue;
        }
        let share = inst.config.p_max[f] / count as f64;
        for (m, row) in rho.rho[f].iter().enumerate() {
            for (n, &on) in row.iter().enumerate() {
                if on {
                    p.p[f][m][n] = share;
                }
            }
        }
    }
    p
}

/// Epigraph objective with tight slacks (bits/s/Hz), or `-inf` when `rho`
/// violates the budget, the per-subcarrier user limit, or a SIC constraint.
pub fn score(model: &RateModel, rho: &Assignment, p: &PowerAllocation) -> f64 {
    let inst = model.inst;
    for f in 0..inst.bs_count() {
        for n in 0..inst.subcarriers() {
            if rho.load_on(f, n) > inst.config.ell {
                return f64::NEG_INFINITY;
            }
        }
        if p.bs_load(rho, f) > inst.config.p_max[f] * (1.0 + BUDGET_TOL) {
            return f64::NEG_INFINITY;
        }
    }
    let r = model.residuals(p, rho, model.decoding == EaveDecoding::NoSic);
    if r.c5 > SIC_TOL || r.c6 > SIC_TOL || r.c4 > 0.0 {
        return f64::NEG_INFINITY;
    }
    model.epigraph_objective(p, rho)
}

pub fn objective_at(inst: &NetworkInstance, rho: &Assignment, p: &PowerAllocation, gains: Gains) -> f64 {
    score(&RateModel::new(inst, gains), rho, p)
}

fn evaluate(model: &RateModel, rule: PowerRule, rho: &Assignment) -> f64 {
    let p = rule.power_for(model.inst, rho);
    score(model, rho, &p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub assignment: Assignment,
    pub objective: f64,
    pub evaluations: usize,
    pub polls: usize,
}

fn assignment_from_mask(inst: &NetworkInstance, all: &[Coord], mask: u32) -> Assignment {
    let mut rho = Assignment::empty(inst);
    for (k, &c) in all.iter().enumerate() {
        if mask >> k & 1 == 1 {
            rho.set(c, true);
        }
    }
    rho
}

/// Global optimum over all assignments by enumeration. Ties resolve to the
/// lowest bit mask in coordinate order.
pub fn exhaustive_with(model: &RateModel, rule: PowerRule) -> Result<SearchOutcome> {
    let inst = model.inst;
    let all = coords(inst);
    if all.len() > EXHAUSTIVE_CAP {
        return Err(Error::TooLarge(format!(
            "{} binary variables exceed the enumeration cap of {EXHAUSTIVE_CAP}",
            all.len()
        )));
    }
    let total: u32 = 1 << all.len();
    let (best_mask, best) = (0..total)
        .into_par_iter()
        .map(|mask| {
            let rho = assignment_from_mask(inst, &all, mask);
            (mask, evaluate(model, rule, &rho))
        })
        .reduce(
            || (u32::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(SearchOutcome {
        assignment: assignment_from_mask(inst, &all, best_mask),
        objective: best,
        evaluations: total as usize,
        polls: 0,
    })
}

pub fn exhaustive_search(inst: &NetworkInstance, p: &PowerAllocation, gains: Gains) -> Result<SearchOutcome> {
    exhaustive_with(&RateModel::new(inst, gains), PowerRule::Fixed(p))
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Flip(usize),
    Pair(usize, usize),
}

fn apply(rho: &Assignment, all: &[Coord], mv: Move) -> Assignment {
    let mut out = rho.clone();
    let mut flip = |k: usize| {
        let c = all[k];
        out.set(c, !rho.get(c));
    };
    match mv {
        Move::Flip(k) => flip(k),
        Move::Pair(a, b) => {
            flip(a);
            flip(b);
        }
    }
    out
}

fn poll_set(rho: &Assignment, all: &[Coord], radius: usize) -> Vec<Move> {
    let k = all.len();
    if radius == 1 {
        let mut moves: Vec<Move> = (0..k).map(Move::Flip).collect();
        for a in 0..k {
            for b in 0..k {
                let (ca, cb) = (all[a], all[b]);
                if ca.f == cb.f && ca.n == cb.n && rho.get(ca) && !rho.get(cb) {
                    moves.push(Move::Pair(a, b));
                }
            }
        }
        moves
    } else {
        (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| Move::Pair(a, b)))
            .collect()
    }
}

/// Direct search from `start`. The incumbent never gets worse, and the result
/// is deterministic for a fixed budget seed.
pub fn mads_with(model: &RateModel, rule: PowerRule, start: &Assignment, budget: &SearchBudget) -> SearchOutcome {
    let inst = model.inst;
    let all = coords(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut incumbent = start.clone();
    let mut best = evaluate(model, rule, &incumbent);
    let mut evals = 1;
    let mut polls = 0;
    let mut radius = budget.initial_poll_size.clamp(1, 2);
    let mut failed_radii = [false; 2];

    'search: while evals < budget.max_evals {
        polls += 1;
        let mut moves = poll_set(&incumbent, &all, radius);
        moves.shuffle(&mut rng);
        let mut success = false;
        for mv in moves {
            if evals >= budget.max_evals {
                break 'search;
            }
            let candidate = apply(&incumbent, &all, mv);
            let value = evaluate(model, rule, &candidate);
            evals += 1;
            if value > best + 1e-12 * best.abs().max(1.0) {
                incumbent = candidate;
                best = value;
                success = true;
                break;
            }
        }
        if success {
            failed_radii = [false; 2];
            radius = 2;
        } else {
            failed_radii[radius - 1] = true;
            if failed_radii.iter().all(|&f| f) {
                break;
            }
            radius = 3 - radius;
        }
    }
    SearchOutcome {
        assignment: incumbent,
        objective: best,
        evaluations: evals,
        polls,
    }
}

/// Direct search for fixed powers starting from the empty assignment.
pub fn mads_search(inst: &NetworkInstance, p: &PowerAllocation, gains: Gains, budget: &SearchBudget) -> SearchOutcome {
    let model = RateModel::new(inst, gains);
    mads_with(&model, PowerRule::Fixed(p), &Assignment::empty(inst), budget)
}
