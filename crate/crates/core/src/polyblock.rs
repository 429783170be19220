//! Global optimization of the two-user-per-subcarrier problem by monotonic
//! optimization.
//!
//! Problems are written over a box `[0, upper]` with an increasing objective,
//! a normal feasible set (closed downwards) and a conormal one (closed
//! upwards). Every non-monotone quantity is split into a difference of two
//! increasing functions and tied together with one auxiliary variable:
//! `plus(x) <= minus(x)` becomes `plus(x) + t <= plus(upper)` (normal) together
//! with `minus(x) + t >= plus(upper)` (conormal), `t in [0, plus(upper) - plus(0)]`.
//!
//! [`canonicalize`] builds the full power-only form with one slack per
//! eavesdropper bound and one auxiliary per constraint and objective term.
//! [`global_optimum`] is the optimality-gap oracle: it enumerates the
//! subcarrier supports, builds a much smaller canonical problem for each one
//! and runs [`polyblock_solve`] on it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::asm::extrapolate;
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::power::{solve_power_subproblem, PowerOptions};
use crate::rates::{coords, Affine, Assignment, Coord, EaveDecoding, Gains, PowerAllocation, RateModel};
use crate::subcarrier::uniform_split;

/// Largest number of power coordinates a canonical problem may have.
pub const POWER_COORD_CAP: usize = 12;

/// A user counts as scheduled when its power exceeds this fraction of its
/// BS budget.
pub const ACTIVE_FRACTION: f64 = 1e-9;

const MEMBERSHIP_TOL: f64 = 1e-12;

/// `constant + sum(a_j * x_j)` with non-negative coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lin {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Lin {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(j: usize) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(j, 1.0)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, a)| a == 0.0)
    }

    fn plus(mut self, j: usize, a: f64) -> Self {
        self.terms.push((j, a));
        self
    }
}

/// Increasing functions on the non-negative orthant.
#[derive(Debug, Clone, PartialEq)]
pub enum Mono {
    Linear(Lin),
    /// Natural log of a strictly positive linear form.
    Log(Lin),
    /// `x_a * x_b * lin(x)`.
    Pair(usize, usize, Lin),
    /// `x_a * x_b * x_c`.
    Triple(usize, usize, usize),
    Sum(Vec<Mono>),
}

impl Mono {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Mono::Linear(l) => l.eval(x),
            Mono::Log(l) => l.eval(x).ln(),
            Mono::Pair(a, b, l) => x[*a] * x[*b] * l.eval(x),
            Mono::Triple(a, b, c) => x[*a] * x[*b] * x[*c],
            Mono::Sum(parts) => parts.iter().map(|m| m.eval(x)).sum(),
        }
    }
}

/// Splits an affine form into increasing parts, `aff = pos - neg`, over the
/// variables that `index` maps. Coordinates without an index are held at zero.
fn split(aff: &Affine, index: &dyn Fn(Coord) -> Option<usize>) -> (Lin, Lin) {
    let mut pos = Lin::constant(aff.constant.max(0.0));
    let mut neg = Lin::constant((-aff.constant).max(0.0));
    for &(c, a) in &aff.terms {
        let Some(j) = index(c) else { continue };
        if a > 0.0 {
            pos.terms.push((j, a));
        } else if a < 0.0 {
            neg.terms.push((j, -a));
        }
    }
    (pos, neg)
}

/// Restricts an affine form with non-negative coefficients to indexed
/// coordinates.
fn restrict(aff: &Affine, index: &dyn Fn(Coord) -> Option<usize>) -> Lin {
    let mut lin = Lin::constant(aff.constant);
    for &(c, a) in &aff.terms {
        if let Some(j) = index(c) {
            lin.terms.push((j, a));
        }
    }
    lin
}

/// One monotone inequality `expr(x) + z[aux] <= bound` (normal side) or
/// `>= bound` (conormal side).
#[derive(Debug, Clone, PartialEq)]
pub struct Side {
    pub expr: Mono,
    pub aux: Option<usize>,
    pub bound: f64,
}

impl Side {
    fn value(&self, z: &[f64]) -> f64 {
        self.expr.eval(z) + self.aux.map_or(0.0, |k| z[k])
    }

    fn slack_tol(&self) -> f64 {
        MEMBERSHIP_TOL * (1.0 + self.bound.abs())
    }
}

/// Which family an auxiliary variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxKind {
    /// SIC feasibility at a legitimate user.
    Sic,
    /// SIC avoidance at an eavesdropper.
    Avoidance,
    /// Eavesdropper rate bound.
    Eave,
    /// Objective term.
    Objective,
}

/// Auxiliary variable metadata: its position in the point and its range
/// `[0, range]`, where `range = plus(upper) - plus(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aux {
    pub kind: AuxKind,
    pub index: usize,
    pub range: f64,
    plus: Mono,
    plus_at_upper: f64,
}

/// Monotonic optimization problem in canonical form.
///
/// A point `z` lists the primal variables `x` first and the auxiliaries
/// after them. The objective is `offset + sum(objective) + sum(z[aux])` over
/// objective auxiliaries.
#[derive(Debug, Clone)]
pub struct CanonicalProblem {
    /// Number of primal variables (powers first, then any slacks).
    pub primal: usize,
    /// Number of power coordinates among the primal variables.
    pub powers: usize,
    /// Box of the search space. Warped coordinates live in `[0, 1]`.
    pub upper: Vec<f64>,
    /// Box of the primal variables before warping.
    pub x_upper: Vec<f64>,
    /// Per primal coordinate `s`: the search coordinate `u` maps to
    /// `x = x_upper * ((1 + s)^u - 1) / s`, a log-like scale. Zero leaves the
    /// coordinate linear.
    pub warp: Vec<f64>,
    pub normal: Vec<Side>,
    pub conormal: Vec<Side>,
    pub objective: Vec<Mono>,
    pub objective_aux: Vec<usize>,
    pub offset: f64,
    pub aux: Vec<Aux>,
}

/// Box-constrained monotonic problem consumed by [`polyblock_solve`].
pub trait MonotoneProblem {
    fn upper(&self) -> &[f64];
    /// Increasing in every coordinate.
    fn objective(&self, z: &[f64]) -> f64;
    /// Membership in the normal set.
    fn in_normal(&self, z: &[f64]) -> bool;
    /// Membership in the conormal set.
    fn in_conormal(&self, z: &[f64]) -> bool;
}

impl MonotoneProblem for CanonicalProblem {
    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let x = self.to_x(z);
        self.offset
            + self.objective.iter().map(|m| m.eval(&x)).sum::<f64>()
            + self.objective_aux.iter().map(|&k| x[k]).sum::<f64>()
    }

    fn in_normal(&self, z: &[f64]) -> bool {
        let x = self.to_x(z);
        self.normal.iter().all(|s| s.value(&x) <= s.bound + s.slack_tol())
    }

    fn in_conormal(&self, z: &[f64]) -> bool {
        let x = self.to_x(z);
        self.conormal.iter().all(|s| s.value(&x) >= s.bound - s.slack_tol())
    }
}

/// Accumulates primal variables, constraints and difference-of-increasing
/// pieces before the auxiliaries are laid out.
#[derive(Debug, Default)]
struct Builder {
    upper: Vec<f64>,
    warp: Vec<f64>,
    powers: usize,
    normal: Vec<(Mono, f64)>,
    conormal: Vec<(Mono, f64)>,
    rows: Vec<(AuxKind, Mono, Mono)>,
    objective: Vec<(Mono, Mono)>,
}

impl Builder {
    /// Adds `pos(x) <= neg(x)` using the cheapest monotone encoding.
    fn affine_row(&mut self, kind: AuxKind, pos: Lin, neg: Lin) -> bool {
        match (pos.is_constant(), neg.is_constant()) {
            (true, true) => pos.constant <= neg.constant,
            (false, true) => {
                let bound = neg.constant - pos.constant;
                let mut pos = pos;
                pos.constant = 0.0;
                self.normal.push((Mono::Linear(pos), bound));
                true
            }
            (true, false) => {
                let bound = pos.constant - neg.constant;
                let mut neg = neg;
                neg.constant = 0.0;
                self.conormal.push((Mono::Linear(neg), bound));
                true
            }
            _ => {
                self.rows.push((kind, Mono::Linear(pos), Mono::Linear(neg)));
                true
            }
        }
    }

    fn finish(self, aggregate: bool) -> CanonicalProblem {
        let primal = self.upper.len();
        let x_upper = self.upper.clone();
        let zeros = vec![0.0; primal];
        let mut warp = self.warp;
        warp.resize(primal, 0.0);
        let mut upper = self.upper;
        let mut aux = Vec::new();
        let mut normal: Vec<Side> = self
            .normal
            .into_iter()
            .map(|(expr, bound)| Side { expr, aux: None, bound })
            .collect();
        let mut conormal: Vec<Side> = self
            .conormal
            .into_iter()
            .map(|(expr, bound)| Side { expr, aux: None, bound })
            .collect();
        let mut push_aux = |kind, plus: Mono, minus: Option<Mono>, upper: &mut Vec<f64>| {
            let top = plus.eval(&x_upper);
            let range = (top - plus.eval(&zeros)).max(0.0);
            let index = upper.len();
            upper.push(range);
            normal.push(Side {
                expr: plus.clone(),
                aux: Some(index),
                bound: top,
            });
            if let Some(minus) = minus {
                conormal.push(Side {
                    expr: minus,
                    aux: Some(index),
                    bound: top,
                });
            }
            aux.push(Aux {
                kind,
                index,
                range,
                plus,
                plus_at_upper: top,
            });
            index
        };
        for (kind, plus, minus) in self.rows {
            push_aux(kind, plus, Some(minus), &mut upper);
        }
        let pieces = if aggregate && self.objective.len() > 1 {
            let (gain, loss): (Vec<Mono>, Vec<Mono>) = self.objective.into_iter().unzip();
            vec![(Mono::Sum(gain), Mono::Sum(loss))]
        } else {
            self.objective
        };
        let mut objective = Vec::new();
        let mut objective_aux = Vec::new();
        let mut offset = 0.0;
        for (gain, loss) in pieces {
            offset -= loss.eval(&x_upper);
            objective_aux.push(push_aux(AuxKind::Objective, loss, None, &mut upper));
            objective.push(gain);
        }
        let x_full = upper.clone();
        for (u, &s) in upper.iter_mut().zip(&warp) {
            if s > 0.0 {
                *u = 1.0;
            }
        }
        CanonicalProblem {
            primal,
            powers: self.powers,
            upper,
            x_upper: x_full,
            warp,
            normal,
            conormal,
            objective,
            objective_aux,
            offset,
            aux,
        }
    }
}

impl CanonicalProblem {
    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    /// Unwarps a search point into primal and auxiliary values.
    pub fn to_x(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        for (j, &s) in self.warp.iter().enumerate() {
            if s > 0.0 {
                let full = s.ln_1p();
                x[j] = self.x_upper[j] * (z[j] * full).exp_m1() / full.exp_m1();
            }
        }
        x
    }

    /// Inverse of [`CanonicalProblem::to_x`].
    pub fn to_z(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        for (j, &s) in self.warp.iter().enumerate() {
            if s > 0.0 {
                z[j] = (s * x[j] / self.x_upper[j]).ln_1p() / s.ln_1p();
            }
        }
        z
    }

    /// Search point for primal values, with the largest admissible
    /// auxiliaries. At a feasible `x` the result lies in both sets and its
    /// objective equals [`CanonicalProblem::value`].
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut full = x[..self.primal].to_vec();
        full.resize(self.dim(), 0.0);
        for a in &self.aux {
            full[a.index] = (a.plus_at_upper - a.plus.eval(&full)).clamp(0.0, a.range);
        }
        self.to_z(&full)
    }

    /// Objective in nats of a primal point with tight auxiliaries.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective(&self.lift(x))
    }

    pub fn feasible(&self, z: &[f64]) -> bool {
        z.iter().zip(&self.upper).all(|(&v, &u)| v >= 0.0 && v <= u * (1.0 + MEMBERSHIP_TOL))
            && self.in_normal(z)
            && self.in_conormal(z)
    }

    pub fn aux_of(&self, kind: AuxKind) -> impl Iterator<Item = &Aux> {
        self.aux.iter().filter(move |a| a.kind == kind)
    }
}

/// Received SNR of a user at full power, the warp scale of its coordinate.
fn snr_scale(model: &RateModel, c: Coord, top: f64) -> f64 {
    top * model.h(c.f, c.m, c.n) / model.sigma2()
}

fn check_shape(inst: &NetworkInstance) -> Result<()> {
    if inst.config.ell != 2 {
        return Err(Error::Unsupported(format!(
            "monotonic reformulation needs at most two users per subcarrier, got ell = {}",
            inst.config.ell
        )));
    }
    let count = coords(inst).len();
    if count > POWER_COORD_CAP {
        return Err(Error::TooLarge(format!(
            "{count} power coordinates exceed the cap of {POWER_COORD_CAP}"
        )));
    }
    Ok(())
}

/// Per-coordinate budget of every BS, the default spectral mask.
pub fn default_mask(inst: &NetworkInstance) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(inst);
    for c in coords(inst) {
        p.set(c, inst.config.p_max[c.f]);
    }
    p
}

/// Largest eavesdropper rate at the mask without interference, in nats.
pub fn default_upsilon_max(inst: &NetworkInstance, mask: &PowerAllocation) -> f64 {
    let model = RateModel::new(inst, Gains::True);
    let mut best: f64 = 0.0;
    for c in coords(inst) {
        for e in 0..inst.eavesdroppers() {
            let snr = mask.get(c) * model.eave_direct(c.f, e, c.n) / inst.sigma2();
            best = best.max(snr.ln_1p());
        }
    }
    best
}

fn every_user(inst: &NetworkInstance) -> Assignment {
    let mut rho = Assignment::empty(inst);
    for c in coords(inst) {
        rho.set(c, true);
    }
    rho
}

/// Primal point of [`canonicalize`]: every power followed by the tight
/// slack (best eavesdropper rate in nats) of every coordinate.
pub fn canonical_point(inst: &NetworkInstance, p: &PowerAllocation) -> Vec<f64> {
    let model = RateModel::new(inst, Gains::True);
    let mut rho = Assignment::empty(inst);
    for c in coords(inst) {
        rho.set(c, p.get(c) > 0.0);
    }
    let mut x: Vec<f64> = coords(inst).into_iter().map(|c| p.get(c)).collect();
    for c in coords(inst) {
        let rate = if rho.get(c) { model.eave_rate_max(p, &rho, c.f, c.m, c.n) * LN_2 } else { 0.0 };
        x.push(rate);
    }
    x
}

/// Power-only canonical form of the perfect-CSI problem.
///
/// Primal variables are every power coordinate (in [`coords`] order) and
/// then one slack `upsilon` per coordinate. Scheduling is implied by
/// positive power; the three-user exclusion enforces two users per
/// subcarrier.
pub fn canonicalize(inst: &NetworkInstance, mask: &PowerAllocation, upsilon_max: f64) -> Result<CanonicalProblem> {
    check_shape(inst)?;
    let model = RateModel::new(inst, Gains::True);
    let all = coords(inst);
    let k = all.len();
    let index = |c: Coord| all.iter().position(|&d| d == c);
    let slack = |c: Coord| k + index(c).expect("coordinate exists");
    let rho = every_user(inst);
    let mut b = Builder {
        powers: k,
        ..Builder::default()
    };
    b.upper = all.iter().map(|&c| mask.get(c)).collect();
    b.warp = all.iter().map(|&c| snr_scale(&model, c, mask.get(c))).collect();
    let upsilon_cap = if inst.eavesdroppers() == 0 { 0.0 } else { upsilon_max };
    b.upper.extend(std::iter::repeat_n(upsilon_cap, k));

    for f in 0..inst.bs_count() {
        let mut load = Lin::default();
        for (j, c) in all.iter().enumerate() {
            if c.f == f {
                load = load.plus(j, 1.0);
            }
        }
        b.normal.push((Mono::Linear(load), inst.config.p_max[f]));
        for n in 0..inst.subcarriers() {
            let users = inst.users_in(f);
            let at = |m: usize| index(Coord::new(f, m, n)).expect("coordinate exists");
            for m in 0..users {
                for i in m + 1..users {
                    for w in i + 1..users {
                        b.normal.push((Mono::Triple(at(m), at(i), at(w)), 0.0));
                    }
                }
            }
            for m in 0..users {
                for i in (0..users).filter(|&i| i != m) {
                    if model.outranks(f, m, i, n) {
                        let (pos, neg) = split(&model.q_affine(&rho, f, m, i, n), &index);
                        b.rows.push((AuxKind::Sic, Mono::Pair(at(m), at(i), pos), Mono::Pair(at(m), at(i), neg)));
                    }
                    for e in 0..inst.eavesdroppers() {
                        if model.avoidance_applies(f, i, n, e) {
                            let (pos, neg) = split(&model.psi_affine(&rho, f, i, n, e), &index);
                            b.rows.push((
                                AuxKind::Avoidance,
                                Mono::Pair(at(m), at(i), neg),
                                Mono::Pair(at(m), at(i), pos),
                            ));
                        }
                    }
                }
            }
        }
    }
    for (j, &c) in all.iter().enumerate() {
        let den = restrict(&model.user_denominator(&rho, c.f, c.m, c.n), &index);
        let signal = den.clone().plus(j, model.h(c.f, c.m, c.n));
        let mut loss = vec![Mono::Log(den)];
        if inst.eavesdroppers() > 0 {
            loss.push(Mono::Linear(Lin::var(slack(c))));
        }
        b.objective.push((Mono::Log(signal), Mono::Sum(loss)));
        for e in 0..inst.eavesdroppers() {
            let den = restrict(&model.eave_denominator(&rho, c.f, e, c.m, c.n), &index);
            let heard = den.clone().plus(j, model.eave_direct(c.f, e, c.n));
            b.rows.push((
                AuxKind::Eave,
                Mono::Log(heard),
                Mono::Sum(vec![Mono::Log(den), Mono::Linear(Lin::var(slack(c)))]),
            ));
        }
    }
    Ok(b.finish(false))
}

/// Canonical problem restricted to the coordinates scheduled in `rho`, with
/// the objective folded into a single auxiliary. Returns `None` when a
/// power-independent SIC condition already rules the support out.
///
/// With at most one eavesdropper its rate enters the objective directly;
/// otherwise each scheduled coordinate gets a slack bounded by every
/// eavesdropper rate.
pub fn support_problem(model: &RateModel, rho: &Assignment, upsilon_max: f64) -> Option<CanonicalProblem> {
    let inst = model.inst;
    let active: Vec<Coord> = rho.scheduled().collect();
    let index = |c: Coord| active.iter().position(|&d| d == c);
    let mut b = Builder {
        powers: active.len(),
        ..Builder::default()
    };
    b.upper = active.iter().map(|c| inst.config.p_max[c.f]).collect();
    b.warp = active.iter().map(|&c| snr_scale(model, c, inst.config.p_max[c.f])).collect();
    let with_slack = inst.eavesdroppers() > 1;
    if with_slack {
        b.upper.extend(std::iter::repeat_n(upsilon_max, active.len()));
    }
    for f in 0..inst.bs_count() {
        let mut load = Lin::default();
        for (j, c) in active.iter().enumerate() {
            if c.f == f {
                load = load.plus(j, 1.0);
            }
        }
        if !load.terms.is_empty() {
            b.normal.push((Mono::Linear(load), inst.config.p_max[f]));
        }
        for n in 0..inst.subcarriers() {
            let users: Vec<usize> = rho.users_on(f, n).collect();
            for &m in &users {
                for &i in users.iter().filter(|&&i| i != m) {
                    if model.outranks(f, m, i, n) {
                        let (pos, neg) = split(&model.q_affine(rho, f, m, i, n), &index);
                        if !b.affine_row(AuxKind::Sic, pos, neg) {
                            return None;
                        }
                    }
                    if model.decoding == EaveDecoding::NoSic {
                        for e in 0..inst.eavesdroppers() {
                            if model.avoidance_applies(f, i, n, e) {
                                let (pos, neg) = split(&model.psi_affine(rho, f, i, n, e), &index);
                                if !b.affine_row(AuxKind::Avoidance, neg, pos) {
                                    return None;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (j, &c) in active.iter().enumerate() {
        let den = restrict(&model.user_denominator(rho, c.f, c.m, c.n), &index);
        let signal = den.clone().plus(j, model.h(c.f, c.m, c.n));
        let mut gain = vec![Mono::Log(signal)];
        let mut loss = vec![Mono::Log(den)];
        for e in 0..inst.eavesdroppers() {
            let den = restrict(&model.eave_denominator(rho, c.f, e, c.m, c.n), &index);
            let heard = den.clone().plus(j, model.eave_direct(c.f, e, c.n));
            if with_slack {
                let slack = Mono::Linear(Lin::var(active.len() + j));
                b.rows.push((AuxKind::Eave, Mono::Log(heard), Mono::Sum(vec![Mono::Log(den), slack])));
            } else {
                gain.push(Mono::Log(den));
                loss.push(Mono::Log(heard));
            }
        }
        if with_slack {
            loss.push(Mono::Linear(Lin::var(active.len() + j)));
        }
        b.objective.push((Mono::Sum(gain), Mono::Sum(loss)));
    }
    Some(b.finish(true))
}

/// Bisection tolerance on the scaling factor, as used by the outer loop.
pub const BISECTION_TOL: f64 = 1e-3;

/// Relative bisection tolerance of the box reduction.
const REDUCTION_TOL: f64 = 1e-7;

/// Moves from `from` (inside the normal set) towards `to` until the segment
/// leaves the normal set. Returns `(inside, outside)` factors along the
/// segment with `outside - inside < tol`; no point dominating the `outside`
/// point is in the normal set. Both equal one when `to` is inside.
fn segment_factors<P: MonotoneProblem + ?Sized>(problem: &P, from: &[f64], to: &[f64], tol: f64) -> (f64, f64) {
    if problem.in_normal(to) {
        return (1.0, 1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut point = from.to_vec();
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        for ((p, a), b) in point.iter_mut().zip(from).zip(to) {
            *p = a + mid * (b - a);
        }
        if problem.in_normal(&point) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

fn along(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Scales `vertex` towards the origin until it meets the upper boundary of
/// the normal set. Returns `(inside, outside)` factors with
/// `outside - inside < tol`; `inside * vertex` is in the normal set and no
/// point dominating `outside * vertex` is. Both equal one when the vertex
/// itself is inside.
pub fn bisection_factors<P: MonotoneProblem + ?Sized>(problem: &P, vertex: &[f64], tol: f64) -> Result<(f64, f64)> {
    let origin = vec![0.0; vertex.len()];
    if !problem.in_normal(&origin) {
        return Err(Error::Precondition("the origin is outside the normal set".into()));
    }
    Ok(segment_factors(problem, &origin, vertex, tol))
}

/// Point on the upper boundary of the normal set along the ray to `vertex`.
pub fn bisection_project<P: MonotoneProblem + ?Sized>(problem: &P, vertex: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (lo, _) = bisection_factors(problem, vertex, tol)?;
    Ok(vertex.iter().map(|v| lo * v).collect())
}

/// Bisection on one coordinate for the threshold of a monotone predicate
/// that fails at `lo` and holds at `hi` (or the reverse). Returns the end of
/// the final bracket on the side where `holds_at_lo` says it fails.
fn threshold(mut lo: f64, mut hi: f64, tol: f64, holds_at_lo: bool, holds: impl Fn(f64) -> bool) -> f64 {
    let span = (hi - lo).abs();
    while hi - lo > tol * span {
        let mid = 0.5 * (lo + hi);
        if holds(mid) == holds_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if holds_at_lo {
        hi
    } else {
        lo
    }
}

/// Shrinks the box `[0, vertex]` to `[lower, upper]`, dropping only points
/// that are infeasible or cannot beat `target`. Returns `None` when nothing
/// useful is left.
fn reduce<P: MonotoneProblem + ?Sized>(problem: &P, vertex: &[f64], target: f64, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let useful = |z: &[f64]| problem.in_conormal(z) && problem.objective(z) > target;
    if !useful(vertex) {
        return None;
    }
    let mut lower = vec![0.0; vertex.len()];
    let mut probe = vertex.to_vec();
    for k in 0..vertex.len() {
        probe[k] = 0.0;
        if !useful(&probe) {
            lower[k] = threshold(0.0, vertex[k], tol, false, |s| {
                let mut z = vertex.to_vec();
                z[k] = s;
                useful(&z)
            });
        }
        probe[k] = vertex[k];
    }
    if !problem.in_normal(&lower) {
        return None;
    }
    let mut upper = vertex.to_vec();
    for k in 0..vertex.len() {
        let mut z = lower.clone();
        z[k] = vertex[k];
        if !problem.in_normal(&z) {
            upper[k] = threshold(lower[k], vertex[k], tol, true, |s| {
                let mut z = lower.clone();
                z[k] = s;
                problem.in_normal(&z)
            });
        }
    }
    Some((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyblockOptions {
    /// Stop once the upper bound is within `eta` of the best value.
    pub eta: f64,
    pub max_iters: usize,
    pub bisection_tol: f64,
}

impl Default for PolyblockOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            max_iters: 100_000,
            bisection_tol: BISECTION_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyblockOutcome {
    /// Best feasible point found by the run.
    pub best: Option<Vec<f64>>,
    /// Current best value, at least the incumbent.
    pub cbv: f64,
    /// Certified upper bound on the optimum.
    pub upper_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(upper bound, cbv)` after every iteration.
    pub trace: Vec<(f64, f64)>,
}

struct Vertex {
    value: f64,
    point: Vec<f64>,
}

impl PartialEq for Vertex {
    fn eq(&self, other: &Self) -> bool {
        self.value.total_cmp(&other.value) == Ordering::Equal
    }
}

impl Eq for Vertex {}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value)
    }
}

/// Polyblock outer approximation starting from the box corner.
///
/// Each selected vertex is first reduced to the part of its box that can
/// still hold a feasible point better than the current best, then projected
/// onto the normal set along the segment from the reduced lower corner.
///
/// `incumbent` is a value already known to be attainable (use `-inf` for
/// none); vertices that cannot beat it by more than `eta` are discarded.
/// `best` only holds points found by this run.
pub fn polyblock_solve<P: MonotoneProblem + ?Sized>(
    problem: &P,
    options: &PolyblockOptions,
    incumbent: f64,
) -> Result<PolyblockOutcome> {
    let mut best = None;
    let mut cbv = incumbent;
    let mut heap = BinaryHeap::new();
    // Highest objective over boxes discarded by the `eta` rule.
    let mut pruned = f64::NEG_INFINITY;
    let corner = problem.upper().to_vec();
    if problem.in_conormal(&corner) {
        heap.push(Vertex {
            value: problem.objective(&corner),
            point: corner,
        });
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let bound = |heap: &BinaryHeap<Vertex>, pruned: f64, cbv: f64| {
        heap.peek().map_or(f64::NEG_INFINITY, |v| v.value).max(pruned).max(cbv)
    };
    loop {
        let Some(top) = heap.peek() else {
            converged = true;
            break;
        };
        if top.value <= cbv + options.eta {
            pruned = pruned.max(top.value);
            heap.clear();
            converged = true;
            break;
        }
        if iterations >= options.max_iters {
            break;
        }
        iterations += 1;
        let Vertex { value, point } = heap.pop().expect("peeked");
        let Some((lower, point)) = reduce(problem, &point, cbv + options.eta, REDUCTION_TOL) else {
            pruned = pruned.max(value.min(cbv + options.eta));
            trace.push((bound(&heap, pruned, cbv), cbv));
            continue;
        };
        let value = problem.objective(&point).min(value);
        if value <= cbv + options.eta {
            pruned = pruned.max(value);
            trace.push((bound(&heap, pruned, cbv), cbv));
            continue;
        }
        let (lo, hi) = segment_factors(problem, &lower, &point, options.bisection_tol);
        let inside = along(&lower, &point, lo);
        if problem.in_conormal(&inside) {
            let v = problem.objective(&inside);
            if v > cbv {
                cbv = v;
                best = Some(inside);
            }
        }
        if hi < 1.0 {
            let outside = along(&lower, &point, hi);
            for k in 0..point.len() {
                if outside[k] >= point[k] {
                    continue;
                }
                let mut child = point.clone();
                child[k] = outside[k];
                if !problem.in_conormal(&child) {
                    continue;
                }
                let v = problem.objective(&child).min(value);
                if v <= cbv + options.eta {
                    pruned = pruned.max(v);
                } else {
                    heap.push(Vertex { value: v, point: child });
                }
            }
        }
        trace.push((bound(&heap, pruned, cbv), cbv));
    }
    let upper_bound = bound(&heap, pruned, cbv);
    Ok(PolyblockOutcome {
        best,
        cbv,
        upper_bound,
        gap: upper_bound - cbv,
        iterations,
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalOptions {
    /// Target gap in bits/s/Hz.
    pub eta: f64,
    /// Polyblock iterations allowed per support.
    pub max_iters: usize,
    pub bisection_tol: f64,
    /// Power steps used to polish each support before and after the polyblock.
    pub polish_steps: usize,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            max_iters: 20_000,
            bisection_tol: BISECTION_TOL,
            polish_steps: 500,
        }
    }
}

/// Global solution of the perfect-CSI problem with its certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalReport {
    /// Best value found (epigraph form), bits/s/Hz.
    pub objective: f64,
    /// Certified upper bound on the optimum, bits/s/Hz.
    pub upper_bound: f64,
    pub gap: f64,
    pub power: PowerAllocation,
    pub assignment: Assignment,
    pub iterations: usize,
    pub supports: usize,
    /// False when some support hit the iteration cap.
    pub converged: bool,
}

/// Every assignment with at most two users on each BS and subcarrier.
fn supports(inst: &NetworkInstance) -> Vec<Assignment> {
    let mut out = vec![Assignment::empty(inst)];
    for f in 0..inst.bs_count() {
        for n in 0..inst.subcarriers() {
            let m_count = inst.users_in(f);
            let mut choices: Vec<Vec<usize>> = vec![vec![]];
            for m in 0..m_count {
                choices.push(vec![m]);
                for i in m + 1..m_count {
                    choices.push(vec![m, i]);
                }
            }
            out = out
                .into_iter()
                .flat_map(|rho| {
                    choices.iter().map(move |users| {
                        let mut next = rho.clone();
                        for &m in users {
                            next.set(Coord::new(f, m, n), true);
                        }
                        next
                    })
                })
                .collect();
        }
    }
    out
}

/// Primal point of a [`support_problem`] for the given powers.
pub fn support_point(model: &RateModel, rho: &Assignment, problem: &CanonicalProblem, p: &PowerAllocation) -> Vec<f64> {
    let mut x: Vec<f64> = rho.scheduled().map(|c| p.get(c)).collect();
    if problem.primal > problem.powers {
        for c in rho.scheduled() {
            x.push(model.eave_rate_max(p, rho, c.f, c.m, c.n) * LN_2);
        }
    }
    x
}

fn powers_of(inst: &NetworkInstance, rho: &Assignment, z: &[f64]) -> (PowerAllocation, Assignment) {
    let mut p = PowerAllocation::zeros(inst);
    let mut active = Assignment::empty(inst);
    for (c, &v) in rho.scheduled().zip(z) {
        if v > ACTIVE_FRACTION * inst.config.p_max[c.f] {
            p.set(c, v);
            active.set(c, true);
        }
    }
    (p, active)
}

/// Epigraph value in bits, or `None` when the point breaks a constraint.
fn checked_value(model: &RateModel, rho: &Assignment, p: &PowerAllocation) -> Option<f64> {
    let residuals = model.residuals(p, rho, true);
    residuals.feasible(1e-9).then(|| model.epigraph_objective(p, rho))
}

fn budget_scale(model: &RateModel) -> f64 {
    model.inst.config.p_max.iter().copied().fold(0.0, f64::max)
}

/// Repeated convex power steps from `start` on a fixed support.
fn polish(model: &RateModel, rho: &Assignment, start: &PowerAllocation, steps: usize) -> Option<(PowerAllocation, f64)> {
    let mut p = start.masked(rho);
    let mut value = checked_value(model, rho, &p)?;
    for _ in 0..steps {
        let Ok(step) = solve_power_subproblem(model, rho, &p, &PowerOptions::default()) else {
            break;
        };
        let next = if step.moved {
            extrapolate(model, rho, &p, step.power)
        } else {
            step.power
        };
        let moved = next.distance(&p);
        match checked_value(model, rho, &next) {
            Some(v) if v >= value => {
                value = v;
                p = next;
            }
            _ => break,
        }
        if !step.moved || moved < 1e-12 * budget_scale(model) {
            break;
        }
    }
    Some((p, value))
}

/// Globally optimal power and subcarrier allocation for small instances with
/// two users per subcarrier, certified to within `options.eta`.
pub fn global_optimum(inst: &NetworkInstance, options: &GlobalOptions) -> Result<GlobalReport> {
    check_shape(inst)?;
    let model = RateModel::new(inst, Gains::True);
    let upsilon_max = default_upsilon_max(inst, &default_mask(inst));
    let inner = PolyblockOptions {
        eta: options.eta * LN_2,
        max_iters: options.max_iters,
        bisection_tol: options.bisection_tol,
    };

    let mut candidates = Vec::new();
    for rho in supports(inst) {
        let Some(problem) = support_problem(&model, &rho, upsilon_max) else {
            continue;
        };
        let seed = polish(&model, &rho, &uniform_split(inst, &rho), options.polish_steps);
        candidates.push((rho, problem, seed));
    }
    candidates.sort_by(|a, b| {
        let value = |s: &Option<(PowerAllocation, f64)>| s.as_ref().map_or(f64::NEG_INFINITY, |s| s.1);
        value(&b.2).total_cmp(&value(&a.2))
    });

    let mut best_value = 0.0;
    let mut best = (PowerAllocation::zeros(inst), Assignment::empty(inst));
    for (rho, _, seed) in &candidates {
        if let Some((p, v)) = seed {
            if *v > best_value {
                best_value = *v;
                best = (p.clone(), rho.clone());
            }
        }
    }

    let mut upper = best_value;
    let mut iterations = 0;
    let mut converged = true;
    let count = candidates.len();
    for (rho, problem, _) in candidates {
        let outcome = polyblock_solve(&problem, &inner, best_value * LN_2)?;
        iterations += outcome.iterations;
        converged &= outcome.converged;
        upper = upper.max(outcome.upper_bound / LN_2);
        let Some(z) = outcome.best else { continue };
        let (p, _) = powers_of(inst, &rho, &problem.to_x(&z));
        let refined = polish(&model, &rho, &p, options.polish_steps);
        for (p, v) in [checked_value(&model, &rho, &p).map(|v| (p, v)), refined].into_iter().flatten() {
            if v > best_value {
                best_value = v;
                let (p, active) = powers_of(inst, &rho, &rho.scheduled().map(|c| p.get(c)).collect::<Vec<_>>());
                best = (p, active);
            }
        }
    }
    let upper_bound = upper.max(best_value);
    Ok(GlobalReport {
        objective: best_value,
        upper_bound,
        gap: upper_bound - best_value,
        power: best.0,
        assignment: best.1,
        iterations,
        supports: count,
        converged,
    })
}
