//! Power allocation for a fixed subcarrier assignment.
//!
//! Each scheduled term `ln(1 + SINR) - upsilon` is written as `G - H` with
//! `G = ln(B + p h) - upsilon` and `H = ln(B)`, both concave. The eavesdropper
//! bound `ln(D + p d) - ln(D) <= upsilon` is written as `Im - upsilon - Phi <= 0`
//! with `Im = -ln(D)` and `Phi = -ln(D + p d)`, both convex. Replacing `H` and
//! `Phi` by their tangents at the anchor gives a convex program whose optimum
//! is a feasible ascent step for the original problem.
//!
//! Logarithms are natural here; reported objectives are converted to bits.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::convex::{BarrierOptions, ConvexProgram, LogLinear, SparseAffine};
use crate::error::{Error, Result};
use crate::rates::{Affine, Assignment, Coord, EaveDecoding, PowerAllocation, RateModel, SlackVars};

/// Fraction of the budget every scheduled power is raised to before the
/// barrier solve, so that the start point is interior.
pub const INTERIOR_NUDGE: f64 = 1e-6;

fn add_own(mut a: Affine, c: Coord, gain: f64) -> Affine {
    a.terms.push((c, gain));
    a
}

fn ln(v: f64) -> f64 {
    v.ln()
}

/// `G = ln(B + p h) - upsilon` for scheduled coordinate `c`.
pub fn eval_g(model: &RateModel, p: &PowerAllocation, rho: &Assignment, upsilon: f64, c: Coord) -> f64 {
    let b = model.user_denominator(rho, c.f, c.m, c.n);
    ln(add_own(b, c, model.h(c.f, c.m, c.n)).eval(p)) - upsilon
}

/// `H = ln(B)`, the interference-plus-noise seen by the user at `c`.
pub fn eval_h(model: &RateModel, p: &PowerAllocation, rho: &Assignment, c: Coord) -> f64 {
    ln(model.user_denominator(rho, c.f, c.m, c.n).eval(p))
}

/// `Im = -ln(D)` for eavesdropper `e` listening to coordinate `c`.
pub fn eval_im(model: &RateModel, p: &PowerAllocation, rho: &Assignment, c: Coord, e: usize) -> f64 {
    -ln(model.eave_denominator(rho, c.f, e, c.m, c.n).eval(p))
}

/// `Phi = -ln(D + p d)`.
pub fn eval_phi(model: &RateModel, p: &PowerAllocation, rho: &Assignment, c: Coord, e: usize) -> f64 {
    -ln(phi_argument(model, rho, c, e).eval(p))
}

fn phi_argument(model: &RateModel, rho: &Assignment, c: Coord, e: usize) -> Affine {
    let d = model.eave_denominator(rho, c.f, e, c.m, c.n);
    add_own(d, c, model.eave_direct(c.f, e, c.n))
}

/// Gradient of `ln(a(p))` at `p`.
fn log_gradient(a: &Affine, p: &PowerAllocation) -> Vec<(Coord, f64)> {
    let v = a.eval(p);
    let mut acc: HashMap<Coord, f64> = HashMap::new();
    for &(c, coef) in &a.terms {
        *acc.entry(c).or_default() += coef / v;
    }
    let mut out: Vec<_> = acc.into_iter().collect();
    out.sort_by_key(|(c, _)| *c);
    out
}

fn tangent(value: f64, grad: &[(Coord, f64)], anchor: &PowerAllocation, p: &PowerAllocation) -> f64 {
    value
        + grad
            .iter()
            .map(|&(c, g)| g * (p.get(c) - anchor.get(c)))
            .sum::<f64>()
}

/// First-order expansions of `H` and `Phi` at an anchor.
#[derive(Debug, Clone)]
pub struct DcLinearization {
    pub anchor: PowerAllocation,
    /// Per scheduled coordinate: `H(anchor)` and its gradient.
    pub h: Vec<(Coord, f64, Vec<(Coord, f64)>)>,
    /// Per scheduled coordinate and eavesdropper: `Phi(anchor)` and its gradient.
    pub phi: Vec<(Coord, usize, f64, Vec<(Coord, f64)>)>,
}

impl DcLinearization {
    pub fn new(model: &RateModel, rho: &Assignment, anchor: &PowerAllocation) -> Self {
        let mut h = Vec::new();
        let mut phi = Vec::new();
        for c in rho.scheduled() {
            let b = model.user_denominator(rho, c.f, c.m, c.n);
            // d ln(B)/dp = coef/B, and H does not involve the user's own power
            h.push((c, ln(b.eval(anchor)), log_gradient(&b, anchor)));
            for e in 0..model.eave_count() {
                let a = phi_argument(model, rho, c, e);
                let grad = log_gradient(&a, anchor).into_iter().map(|(k, g)| (k, -g)).collect();
                phi.push((c, e, -ln(a.eval(anchor)), grad));
            }
        }
        Self {
            anchor: anchor.clone(),
            h,
            phi,
        }
    }

    pub fn grad_h(&self, c: Coord) -> Option<&[(Coord, f64)]> {
        self.h.iter().find(|t| t.0 == c).map(|t| t.2.as_slice())
    }

    pub fn grad_phi(&self, c: Coord, e: usize) -> Option<&[(Coord, f64)]> {
        self.phi.iter().find(|t| t.0 == c && t.1 == e).map(|t| t.3.as_slice())
    }

    /// Tangent of `H` at the anchor evaluated at `p`; an upper bound on `H`.
    pub fn h_tilde(&self, c: Coord, p: &PowerAllocation) -> Option<f64> {
        let (_, v, g) = self.h.iter().find(|t| t.0 == c)?;
        Some(tangent(*v, g, &self.anchor, p))
    }

    /// Tangent of `Phi` at the anchor evaluated at `p`; a lower bound on `Phi`.
    pub fn phi_tilde(&self, c: Coord, e: usize, p: &PowerAllocation) -> Option<f64> {
        let (_, _, v, g) = self.phi.iter().find(|t| t.0 == c && t.1 == e)?;
        Some(tangent(*v, g, &self.anchor, p))
    }
}

/// Barrier-solver parameters of a power step.
#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_newton: 200,
        }
    }
}

/// Result of one linearized power step.
#[derive(Debug, Clone)]
pub struct PowerStep {
    pub power: PowerAllocation,
    /// Slack values returned by the convex program, in nats.
    pub slack: SlackVars,
    /// Epigraph objective of `power` under the model, bits/s/Hz.
    pub objective: f64,
    /// Value of the convex surrogate objective at the solution, nats.
    pub surrogate: f64,
    /// Value of the convex surrogate objective at the anchor, nats.
    pub surrogate_at_anchor: f64,
    pub newton_steps: usize,
    /// False when the anchor was returned because no ascent step was found.
    pub moved: bool,
}

/// The convex program solved in one power step, in normalized variables
/// `x = p / p_max[f]` followed by one slack per scheduled coordinate.
#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub coords: Vec<Coord>,
    pub program: ConvexProgram,
    scale: Vec<f64>,
    has_slack: bool,
}

impl ConvexSubproblem {
    pub fn build(model: &RateModel, rho: &Assignment, lin: &DcLinearization) -> Self {
        let inst = model.inst;
        let coords: Vec<Coord> = rho.scheduled().collect();
        let index: HashMap<Coord, usize> = coords.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let k_count = coords.len();
        let has_slack = model.eave_count() > 0;
        let dim = if has_slack { 2 * k_count } else { k_count };
        let scale: Vec<f64> = coords.iter().map(|c| inst.config.p_max[c.f]).collect();
        let s2 = model.sigma2();

        // affine form in p -> sparse affine form in x, divided by `div`
        let to_x = |a: &Affine, div: f64| SparseAffine {
            constant: a.constant / div,
            coef: a
                .terms
                .iter()
                .filter_map(|&(c, v)| index.get(&c).map(|&k| (k, v * scale[k] / div)))
                .collect(),
        };
        let grad_to_x = |g: &[(Coord, f64)], sign: f64| -> Vec<(usize, f64)> {
            g.iter()
                .filter_map(|&(c, v)| index.get(&c).map(|&k| (k, sign * v * scale[k])))
                .collect()
        };

        let mut objective = LogLinear::default();
        for (k, &c) in coords.iter().enumerate() {
            let g_arg = add_own(model.user_denominator(rho, c.f, c.m, c.n), c, model.h(c.f, c.m, c.n));
            objective.logs.push(to_x(&g_arg, s2));
            if has_slack {
                objective.linear.push((k_count + k, 1.0));
            }
            let (_, h0, grad) = &lin.h[lin.h.iter().position(|t| t.0 == c).expect("linearized")];
            objective.linear.extend(grad_to_x(grad, 1.0));
            // constant part of the tangent, shifted by ln(sigma^2) from the log scaling
            let at_anchor: f64 = grad.iter().map(|&(q, g)| g * lin.anchor.get(q)).sum();
            objective.constant += h0 - at_anchor - s2.ln();
        }

        let mut constraints = Vec::new();
        for k in 0..k_count {
            constraints.push(LogLinear::linear(vec![(k, -1.0)], 0.0));
        }
        for f in 0..inst.bs_count() {
            let row: Vec<(usize, f64)> = (0..k_count).filter(|&k| coords[k].f == f).map(|k| (k, 1.0)).collect();
            if !row.is_empty() {
                constraints.push(LogLinear::linear(row, -1.0));
            }
        }
        for row in sic_rows(model, rho) {
            let a = to_x(&row, 1.0);
            if let Some(c) = normalized_row(a) {
                constraints.push(c);
            }
        }
        if has_slack {
            for (c, e, phi0, grad) in &lin.phi {
                let k = index[c];
                let d = model.eave_denominator(rho, c.f, *e, c.m, c.n);
                let at_anchor: f64 = grad.iter().map(|&(q, g)| g * lin.anchor.get(q)).sum();
                // -ln(D/s2) - upsilon - Phi_tilde(x) - ln(s2) <= 0
                let mut linear = grad_to_x(grad, -1.0);
                linear.push((k_count + k, -1.0));
                constraints.push(LogLinear {
                    logs: vec![to_x(&d, s2)],
                    linear,
                    constant: -(phi0 - at_anchor) - s2.ln(),
                });
            }
        }

        Self {
            coords,
            program: ConvexProgram {
                dim,
                objective,
                constraints,
            },
            scale,
            has_slack,
        }
    }

    pub fn to_point(&self, p: &PowerAllocation, upsilon: &[f64]) -> DVector<f64> {
        let k = self.coords.len();
        let mut x = DVector::zeros(self.program.dim);
        for (j, c) in self.coords.iter().enumerate() {
            x[j] = p.get(*c) / self.scale[j];
        }
        if self.has_slack {
            for j in 0..k {
                x[k + j] = upsilon[j];
            }
        }
        x
    }

    fn write_power(&self, x: &DVector<f64>, p: &mut PowerAllocation) {
        for (j, c) in self.coords.iter().enumerate() {
            p.set(*c, x[j].max(0.0) * self.scale[j]);
        }
    }

    /// Smallest slack values satisfying the surrogate eavesdropper rows at `x`.
    fn tight_slack(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        let k = self.coords.len();
        let mut ups = vec![0.0; k];
        if !self.has_slack {
            return Some(ups);
        }
        let mut probe = x.clone();
        for j in 0..k {
            probe[k + j] = 0.0;
        }
        for c in &self.program.constraints {
            if let Some(&(j, _)) = c.linear.iter().find(|&&(j, v)| j >= k && v == -1.0) {
                ups[j - k] = ups[j - k].max(c.eval(&probe)?);
            }
        }
        Some(ups)
    }

    /// Surrogate objective `sum (G - H_tilde)` in nats (the program minimizes
    /// its negative).
    pub fn surrogate(&self, x: &DVector<f64>) -> Option<f64> {
        self.program.objective.eval(x).map(|v| -v)
    }
}

/// SIC-feasibility rows (`<= 0`) active under `rho`: `Q` for every scheduled
/// ordered pair and `-Psi` for every applicable eavesdropper. Rows are only
/// generated for avoidance when the eavesdropper does not perform SIC.
pub fn sic_rows(model: &RateModel, rho: &Assignment) -> Vec<Affine> {
    let inst = model.inst;
    let mut rows = Vec::new();
    for f in 0..inst.bs_count() {
        for n in 0..inst.subcarriers() {
            let users: Vec<usize> = rho.users_on(f, n).collect();
            if users.len() < 2 {
                continue;
            }
            for &m in &users {
                for &i in &users {
                    if i != m && model.outranks(f, m, i, n) {
                        rows.push(model.q_affine(rho, f, m, i, n));
                    }
                }
            }
            if model.decoding == EaveDecoding::NoSic {
                for &i in &users {
                    for e in 0..model.eave_count() {
                        if model.avoidance_applies(f, i, n, e) {
                            let psi = model.psi_affine(rho, f, i, n, e);
                            rows.push(Affine {
                                constant: -psi.constant,
                                terms: psi.terms.into_iter().map(|(c, v)| (c, -v)).collect(),
                            });
                        }
                    }
                }
            }
        }
    }
    rows
}

/// Rescales a linear row to unit largest coefficient. Rows without variable
/// terms are dropped; a violated constant row cannot be repaired by power.
fn normalized_row(a: SparseAffine) -> Option<LogLinear> {
    let mut merged: HashMap<usize, f64> = HashMap::new();
    for (k, v) in a.coef {
        *merged.entry(k).or_default() += v;
    }
    let big = merged.values().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 {
        return None;
    }
    let mut coef: Vec<(usize, f64)> = merged.into_iter().map(|(k, v)| (k, v / big)).collect();
    coef.sort_by_key(|t| t.0);
    Some(LogLinear::linear(coef, a.constant / big))
}

/// Most violated C1/C5/C6 family at `p`, if any exceeds `tol`.
fn anchor_violation(model: &RateModel, p: &PowerAllocation, rho: &Assignment, tol: f64) -> Option<String> {
    let r = model.residuals(p, rho, model.decoding == EaveDecoding::NoSic);
    let worst = [("C1", r.c1), ("C4", r.c4), ("C5", r.c5), ("C6", r.c6)]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    (worst.1 > tol).then(|| format!("{} violated by {:.3e}", worst.0, worst.1))
}

/// One linearized power step for fixed `rho` around `anchor`.
///
/// The returned allocation is zero outside the schedule. When the convex
/// program has no strictly interior point, or its solution would lower the
/// true objective, the anchor is returned with `moved == false`.
pub fn solve_power_subproblem(
    model: &RateModel,
    rho: &Assignment,
    anchor: &PowerAllocation,
    options: &PowerOptions,
) -> Result<PowerStep> {
    let anchor = anchor.masked(rho);
    if let Some(msg) = anchor_violation(model, &anchor, rho, options.tol) {
        return Err(Error::InfeasibleAnchor(msg));
    }
    let base_objective = model.epigraph_objective(&anchor, rho);
    let unchanged = |sub: Option<&ConvexSubproblem>, steps| {
        let sur = sub.and_then(|s| {
            let ups = s.tight_slack(&s.to_point(&anchor, &vec![0.0; s.coords.len()]))?;
            s.surrogate(&s.to_point(&anchor, &ups))
        });
        PowerStep {
            power: anchor.clone(),
            slack: model.tight_slacks(&anchor, rho),
            objective: base_objective,
            surrogate: sur.unwrap_or(f64::NAN),
            surrogate_at_anchor: sur.unwrap_or(f64::NAN),
            newton_steps: steps,
            moved: false,
        }
    };
    if rho.count() == 0 {
        return Ok(unchanged(None, 0));
    }

    let lin = DcLinearization::new(model, rho, &anchor);
    let sub = ConvexSubproblem::build(model, rho, &lin);
    let k = sub.coords.len();

    let mut start = sub.to_point(&anchor, &vec![0.0; k]);
    let at_anchor = {
        let ups = sub.tight_slack(&start).expect("anchor inside log domain");
        sub.surrogate(&sub.to_point(&anchor, &ups)).expect("anchor inside log domain")
    };
    for j in 0..k {
        start[j] = start[j].max(INTERIOR_NUDGE);
    }
    for f in 0..model.inst.bs_count() {
        let total: f64 = (0..k).filter(|&j| sub.coords[j].f == f).map(|j| start[j]).sum();
        if total >= 1.0 - INTERIOR_NUDGE {
            let shrink = (1.0 - 2.0 * INTERIOR_NUDGE) / total;
            for j in (0..k).filter(|&j| sub.coords[j].f == f) {
                start[j] *= shrink;
            }
        }
    }
    let ups = sub.tight_slack(&start).expect("nudged start inside log domain");
    for j in 0..ups.len() {
        if sub.has_slack {
            start[k + j] = ups[j] + 1.0;
        }
    }

    let opts = BarrierOptions {
        tol: options.tol,
        max_newton: options.max_newton,
        ..BarrierOptions::default()
    };
    let Some(start) = sub.program.phase_one(&start, &opts) else {
        return Ok(unchanged(Some(&sub), 0));
    };
    let result = sub.program.solve(start, &opts)?;

    let mut power = PowerAllocation::zeros(model.inst);
    sub.write_power(&result.x, &mut power);
    let objective = model.epigraph_objective(&power, rho);
    let feasible = anchor_violation(model, &power, rho, options.tol).is_none();
    if !feasible || objective < base_objective {
        return Ok(unchanged(Some(&sub), result.newton_steps));
    }

    let mut slack = model.tight_slacks(&power, rho);
    if sub.has_slack {
        for (j, c) in sub.coords.iter().enumerate() {
            slack.upsilon[c.f][c.m][c.n] = result.x[k + j];
        }
    }
    Ok(PowerStep {
        power,
        slack,
        objective,
        surrogate: -result.objective,
        surrogate_at_anchor: at_anchor,
        newton_steps: result.newton_steps,
        moved: true,
    })
}
