//! Closed-form rate quantities: SINRs, secrecy rates, the SIC-feasibility
//! value `Q` and the SIC-avoidance value `Psi`.
//!
//! Rates are reported in bits/s/Hz. Channel-ordering ties between two users
//! of a cell are broken by index: the lower index counts as stronger.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::robust::RobustView;

/// Gain table indexed `[bs][eavesdropper][subcarrier]`.
pub type EaveTable = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub f: usize,
    pub m: usize,
    pub n: usize,
}

impl Coord {
    pub fn new(f: usize, m: usize, n: usize) -> Self {
        Self { f, m, n }
    }
}

/// All (BS, user, subcarrier) coordinates in lexicographic order.
pub fn coords(inst: &NetworkInstance) -> Vec<Coord> {
    let mut out = Vec::with_capacity(inst.config.coordinate_count());
    for f in 0..inst.bs_count() {
        for m in 0..inst.users_in(f) {
            for n in 0..inst.subcarriers() {
                out.push(Coord::new(f, m, n));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// `p[f][m][n]` in watts.
    pub p: Vec<Vec<Vec<f64>>>,
}

impl PowerAllocation {
    pub fn zeros(inst: &NetworkInstance) -> Self {
        Self {
            p: (0..inst.bs_count())
                .map(|f| vec![vec![0.0; inst.subcarriers()]; inst.users_in(f)])
                .collect(),
        }
    }

    pub fn get(&self, c: Coord) -> f64 {
        self.p[c.f][c.m][c.n]
    }

    pub fn set(&mut self, c: Coord, v: f64) {
        self.p[c.f][c.m][c.n] = v;
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.p.iter().flatten().flatten().copied()
    }

    /// Euclidean distance between two allocations of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Power of BS `f` spent on scheduled coordinates.
    pub fn bs_load(&self, rho: &Assignment, f: usize) -> f64 {
        let mut total = 0.0;
        for (m, row) in self.p[f].iter().enumerate() {
            for (n, &p) in row.iter().enumerate() {
                if rho.rho[f][m][n] {
                    total += p;
                }
            }
        }
        total
    }

    /// Copy with unscheduled coordinates zeroed.
    pub fn masked(&self, rho: &Assignment) -> Self {
        let mut out = self.clone();
        for (f, cell) in out.p.iter_mut().enumerate() {
            for (m, row) in cell.iter_mut().enumerate() {
                for (n, p) in row.iter_mut().enumerate() {
                    if !rho.rho[f][m][n] {
                        *p = 0.0;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub rho: Vec<Vec<Vec<bool>>>,
}

impl Assignment {
    pub fn empty(inst: &NetworkInstance) -> Self {
        Self {
            rho: (0..inst.bs_count())
                .map(|f| vec![vec![false; inst.subcarriers()]; inst.users_in(f)])
                .collect(),
        }
    }

    pub fn get(&self, c: Coord) -> bool {
        self.rho[c.f][c.m][c.n]
    }

    pub fn set(&mut self, c: Coord, v: bool) {
        self.rho[c.f][c.m][c.n] = v;
    }

    /// Users of BS `f` scheduled on subcarrier `n`.
    pub fn users_on(&self, f: usize, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.rho[f]
            .iter()
            .enumerate()
            .filter(move |(_, row)| row[n])
            .map(|(m, _)| m)
    }

    pub fn load_on(&self, f: usize, n: usize) -> usize {
        self.users_on(f, n).count()
    }

    pub fn scheduled(&self) -> impl Iterator<Item = Coord> + '_ {
        self.rho.iter().enumerate().flat_map(|(f, cell)| {
            cell.iter().enumerate().flat_map(move |(m, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &on)| on)
                    .map(move |(n, _)| Coord::new(f, m, n))
            })
        })
    }

    pub fn count(&self) -> usize {
        self.scheduled().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackVars {
    /// `upsilon[f][m][n]`, bound on the best eavesdropper rate.
    pub upsilon: Vec<Vec<Vec<f64>>>,
}

/// Which eavesdropper gain table an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gains {
    True,
    Est,
    WorstCase,
}

impl std::str::FromStr for Gains {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "true" => Ok(Gains::True),
            "est" => Ok(Gains::Est),
            "worst_case" => Ok(Gains::WorstCase),
            other => Err(format!("unknown gain table `{other}`")),
        }
    }
}

/// How eavesdroppers decode. `Sic` models the conventional eavesdropper that
/// cancels every co-channel user whose channel is at least as strong as its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EaveDecoding {
    NoSic,
    Sic,
}

/// `constant + sum(coef * p[coord])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(Coord, f64)>,
}

impl Affine {
    pub fn eval(&self, p: &PowerAllocation) -> f64 {
        self.constant + self.terms.iter().map(|&(c, a)| a * p.get(c)).sum::<f64>()
    }
}

/// Rate evaluator bound to one instance, one eavesdropper gain view, and one
/// eavesdropper decoding model.
#[derive(Debug, Clone)]
pub struct RateModel<'a> {
    pub inst: &'a NetworkInstance,
    direct: Cow<'a, EaveTable>,
    interf: Cow<'a, EaveTable>,
    pub decoding: EaveDecoding,
}

impl<'a> RateModel<'a> {
    pub fn new(inst: &'a NetworkInstance, gains: Gains) -> Self {
        match gains {
            Gains::True => Self::with_tables(
                inst,
                Cow::Borrowed(&inst.g_eave_true),
                Cow::Borrowed(&inst.g_eave_true),
            ),
            Gains::Est => Self::with_tables(
                inst,
                Cow::Borrowed(&inst.g_eave_est),
                Cow::Borrowed(&inst.g_eave_est),
            ),
            Gains::WorstCase => Self::from_view(inst, RobustView::build(inst)),
        }
    }

    /// Worst-case model: direct eavesdropper links use the upper bound and
    /// eavesdropper-side interference uses the lower bound.
    pub fn from_view(inst: &'a NetworkInstance, view: RobustView) -> Self {
        Self::with_tables(inst, Cow::Owned(view.g_plus), Cow::Owned(view.g_minus))
    }

    pub fn with_tables(
        inst: &'a NetworkInstance,
        direct: Cow<'a, EaveTable>,
        interf: Cow<'a, EaveTable>,
    ) -> Self {
        Self {
            inst,
            direct,
            interf,
            decoding: EaveDecoding::NoSic,
        }
    }

    pub fn with_decoding(mut self, decoding: EaveDecoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn sigma2(&self) -> f64 {
        self.inst.sigma2()
    }

    pub fn eave_count(&self) -> usize {
        self.inst.eavesdroppers()
    }

    /// `|h^f_{m,n}|^2`.
    pub fn h(&self, f: usize, m: usize, n: usize) -> f64 {
        self.inst.own_gain(f, m, n)
    }

    /// Eavesdropper gain applied to the signal it tries to decode.
    pub fn eave_direct(&self, b: usize, e: usize, n: usize) -> f64 {
        self.direct[b][e][n]
    }

    /// Eavesdropper gain applied to interfering signals.
    pub fn eave_interf(&self, b: usize, e: usize, n: usize) -> f64 {
        self.interf[b][e][n]
    }

    /// True when user `a` precedes user `m` in the decoding order of cell `f`
    /// on subcarrier `n`, i.e. `|h_m|^2 <= |h_a|^2` with ties broken by index.
    pub fn outranks(&self, f: usize, a: usize, m: usize, n: usize) -> bool {
        if a == m {
            return false;
        }
        let (ha, hm) = (self.h(f, a, n), self.h(f, m, n));
        ha > hm || (ha == hm && a < m)
    }

    fn cell_load(&self, p: &PowerAllocation, rho: &Assignment, b: usize, n: usize) -> f64 {
        rho.users_on(b, n).map(|i| p.p[b][i][n]).sum()
    }

    /// Cross-BS interference `I^f_{m,n}` at a user.
    pub fn user_cross(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        (0..self.inst.bs_count())
            .filter(|&b| b != f)
            .map(|b| self.inst.g_user[f][m][b][n] * self.cell_load(p, rho, b, n))
            .sum()
    }

    /// Cross-BS interference at an eavesdropper listening to cell `f`.
    pub fn eave_cross(&self, p: &PowerAllocation, rho: &Assignment, f: usize, e: usize, n: usize) -> f64 {
        (0..self.inst.bs_count())
            .filter(|&b| b != f)
            .map(|b| self.eave_interf(b, e, n) * self.cell_load(p, rho, b, n))
            .sum()
    }

    /// Intra-cell power that user `m` cannot cancel.
    pub fn stronger_load(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        rho.users_on(f, n)
            .filter(|&i| self.outranks(f, i, m, n))
            .map(|i| p.p[f][i][n])
            .sum()
    }

    pub fn user_sinr(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        let h = self.h(f, m, n);
        let power = p.p[f][m][n];
        if power == 0.0 {
            return 0.0;
        }
        power * h
            / (h * self.stronger_load(p, rho, f, m, n) + self.user_cross(p, rho, f, m, n) + self.sigma2())
    }

    /// Whether co-channel user `i` interferes at eavesdropper `e` while it
    /// decodes user `m`.
    pub fn eave_hears(&self, f: usize, e: usize, m: usize, i: usize, n: usize) -> bool {
        i != m
            && match self.decoding {
                EaveDecoding::NoSic => true,
                EaveDecoding::Sic => self.eave_direct(f, e, n) <= self.h(f, i, n),
            }
    }

    fn eave_intra_load(&self, p: &PowerAllocation, rho: &Assignment, f: usize, e: usize, m: usize, n: usize) -> f64 {
        rho.users_on(f, n)
            .filter(|&i| self.eave_hears(f, e, m, i, n))
            .map(|i| p.p[f][i][n])
            .sum()
    }

    pub fn eave_sinr(&self, p: &PowerAllocation, rho: &Assignment, f: usize, e: usize, m: usize, n: usize) -> f64 {
        let power = p.p[f][m][n];
        if power == 0.0 {
            return 0.0;
        }
        power * self.eave_direct(f, e, n)
            / (self.eave_interf(f, e, n) * self.eave_intra_load(p, rho, f, e, m, n)
                + self.eave_cross(p, rho, f, e, n)
                + self.sigma2())
    }

    pub fn user_rate(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        self.user_sinr(p, rho, f, m, n).ln_1p() / std::f64::consts::LN_2
    }

    pub fn eave_rate(&self, p: &PowerAllocation, rho: &Assignment, f: usize, e: usize, m: usize, n: usize) -> f64 {
        self.eave_sinr(p, rho, f, e, m, n).ln_1p() / std::f64::consts::LN_2
    }

    /// Best eavesdropper rate on (f, m, n); zero without eavesdroppers.
    pub fn eave_rate_max(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        (0..self.eave_count())
            .map(|e| self.eave_rate(p, rho, f, e, m, n))
            .fold(0.0, f64::max)
    }

    /// Unclamped per-term secrecy `r_user - max_e r_eave`.
    pub fn secrecy_term(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        self.user_rate(p, rho, f, m, n) - self.eave_rate_max(p, rho, f, m, n)
    }

    pub fn secrecy_rate(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, n: usize) -> f64 {
        self.secrecy_term(p, rho, f, m, n).max(0.0)
    }

    /// Sum of unclamped secrecy terms over scheduled coordinates (the
    /// epigraph objective with tight slacks).
    pub fn epigraph_objective(&self, p: &PowerAllocation, rho: &Assignment) -> f64 {
        rho.scheduled()
            .map(|c| self.secrecy_term(p, rho, c.f, c.m, c.n))
            .sum()
    }

    /// Reported sum secrecy rate, clamped per term.
    pub fn sum_secrecy(&self, p: &PowerAllocation, rho: &Assignment) -> f64 {
        rho.scheduled()
            .map(|c| self.secrecy_rate(p, rho, c.f, c.m, c.n))
            .sum()
    }

    /// Tight slack values: the best eavesdropper rate for every coordinate.
    pub fn tight_slacks(&self, p: &PowerAllocation, rho: &Assignment) -> SlackVars {
        SlackVars {
            upsilon: (0..self.inst.bs_count())
                .map(|f| {
                    (0..self.inst.users_in(f))
                        .map(|m| {
                            (0..self.inst.subcarriers())
                                .map(|n| {
                                    if rho.rho[f][m][n] {
                                        self.eave_rate_max(p, rho, f, m, n)
                                    } else {
                                        0.0
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Terms of `Q^f_{m,i,n}` (feasible iff the sum is `<= 0`).
    fn q_terms(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, i: usize, n: usize) -> [f64; 6] {
        let (hm, hi, s2) = (self.h(f, m, n), self.h(f, i, n), self.sigma2());
        let (im, ii) = (self.user_cross(p, rho, f, m, n), self.user_cross(p, rho, f, i, n));
        let load_i = self.stronger_load(p, rho, f, i, n);
        let load_m: f64 = rho
            .users_on(f, n)
            .filter(|&l| l != i && (l == m || self.outranks(f, l, m, n)))
            .map(|l| p.p[f][l][n])
            .sum();
        [-hm * s2, hi * s2, hi * im, -hm * ii, -hm * hi * load_i, hi * hm * load_m]
    }

    /// SIC feasibility value; user `m` can cancel user `i` iff it is `<= 0`.
    pub fn sic_q(&self, p: &PowerAllocation, rho: &Assignment, f: usize, m: usize, i: usize, n: usize) -> Result<f64> {
        if i == m || !self.outranks(f, m, i, n) {
            return Err(Error::Precondition(format!(
                "Q requires user {m} to be stronger than user {i} on bs {f}, subcarrier {n}"
            )));
        }
        Ok(self.q_terms(p, rho, f, m, i, n).iter().sum())
    }

    /// Whether eavesdropper `e` is constrained on user `i`'s signal, i.e.
    /// `|h_i|^2 <= |h_e|^2` with the direct-link gain of this view.
    pub fn avoidance_applies(&self, f: usize, i: usize, n: usize, e: usize) -> bool {
        self.h(f, i, n) <= self.eave_direct(f, e, n)
    }

    fn psi_terms(&self, p: &PowerAllocation, rho: &Assignment, f: usize, i: usize, n: usize, e: usize) -> [f64; 6] {
        let (hi, s2) = (self.h(f, i, n), self.sigma2());
        let (d, x) = (self.eave_direct(f, e, n), self.eave_interf(f, e, n));
        let ii = self.user_cross(p, rho, f, i, n);
        let ie = self.eave_cross(p, rho, f, e, n);
        let load_i = self.stronger_load(p, rho, f, i, n);
        let load_all: f64 = rho.users_on(f, n).filter(|&l| l != i).map(|l| p.p[f][l][n]).sum();
        [-d * s2, hi * s2, -d * ii, hi * ie, -d * hi * load_i, hi * x * load_all]
    }

    /// SIC-avoidance value for eavesdropper `e` on user `i`'s signal (in the
    /// presence of co-channel user `m`); avoidance holds iff it is `>= 0`.
    pub fn sic_psi(
        &self,
        p: &PowerAllocation,
        rho: &Assignment,
        f: usize,
        m: usize,
        i: usize,
        n: usize,
        e: usize,
    ) -> Result<f64> {
        if i == m {
            return Err(Error::Precondition("Psi requires two distinct users".into()));
        }
        if !self.avoidance_applies(f, i, n, e) {
            return Err(Error::Precondition(format!(
                "Psi requires |h_i|^2 <= |h_e|^2 (bs {f}, user {i}, subcarrier {n}, eave {e})"
            )));
        }
        Ok(self.psi_terms(p, rho, f, i, n, e).iter().sum())
    }

    /// Normalized constraint violations of C1, C2, C5 and C6 (all `<= 0`
    /// when feasible). C5/C6 values are scaled by the magnitude of their terms.
    pub fn residuals(&self, p: &PowerAllocation, rho: &Assignment, check_avoidance: bool) -> Residuals {
        let inst = self.inst;
        let mut r = Residuals::default();
        for f in 0..inst.bs_count() {
            let budget = inst.config.p_max[f];
            r.c1 = r.c1.max((p.bs_load(rho, f) - budget) / budget);
            for n in 0..inst.subcarriers() {
                let users: Vec<usize> = rho.users_on(f, n).collect();
                r.c2 = r.c2.max(users.len() as f64 - inst.config.ell as f64);
                for &m in &users {
                    for &i in &users {
                        if i == m {
                            continue;
                        }
                        if self.outranks(f, m, i, n) {
                            let t = self.q_terms(p, rho, f, m, i, n);
                            r.c5 = r.c5.max(normalized(&t));
                        }
                        if check_avoidance {
                            for e in 0..self.eave_count() {
                                if self.avoidance_applies(f, i, n, e) {
                                    let t = self.psi_terms(p, rho, f, i, n, e).map(|v| -v);
                                    r.c6 = r.c6.max(normalized(&t));
                                }
                            }
                        }
                    }
                }
            }
        }
        r.c4 = p.values().fold(0.0, |acc, v| acc.max(-v));
        r
    }

    /// `|h_m|^2 * stronger + I + sigma^2` as an affine form in the powers.
    pub fn user_denominator(&self, rho: &Assignment, f: usize, m: usize, n: usize) -> Affine {
        let h = self.h(f, m, n);
        let mut terms = Vec::new();
        for i in rho.users_on(f, n) {
            if self.outranks(f, i, m, n) {
                terms.push((Coord::new(f, i, n), h));
            }
        }
        for b in (0..self.inst.bs_count()).filter(|&b| b != f) {
            let g = self.inst.g_user[f][m][b][n];
            for i in rho.users_on(b, n) {
                terms.push((Coord::new(b, i, n), g));
            }
        }
        Affine {
            constant: self.sigma2(),
            terms,
        }
    }

    /// `Q^f_{m,i,n}` as an affine form in the powers for fixed `rho`.
    pub fn q_affine(&self, rho: &Assignment, f: usize, m: usize, i: usize, n: usize) -> Affine {
        let (hm, hi, s2) = (self.h(f, m, n), self.h(f, i, n), self.sigma2());
        let mut terms = Vec::new();
        for b in (0..self.inst.bs_count()).filter(|&b| b != f) {
            let coef = hi * self.inst.g_user[f][m][b][n] - hm * self.inst.g_user[f][i][b][n];
            terms.extend(rho.users_on(b, n).map(|l| (Coord::new(b, l, n), coef)));
        }
        for l in rho.users_on(f, n).filter(|&l| l != i) {
            let mut coef = 0.0;
            if self.outranks(f, l, i, n) {
                coef -= hm * hi;
            }
            if l == m || self.outranks(f, l, m, n) {
                coef += hi * hm;
            }
            if coef != 0.0 {
                terms.push((Coord::new(f, l, n), coef));
            }
        }
        Affine {
            constant: (hi - hm) * s2,
            terms,
        }
    }

    /// `Psi` for eavesdropper `e` on user `i`'s signal as an affine form in
    /// the powers for fixed `rho`.
    pub fn psi_affine(&self, rho: &Assignment, f: usize, i: usize, n: usize, e: usize) -> Affine {
        let (hi, s2) = (self.h(f, i, n), self.sigma2());
        let (d, x) = (self.eave_direct(f, e, n), self.eave_interf(f, e, n));
        let mut terms = Vec::new();
        for b in (0..self.inst.bs_count()).filter(|&b| b != f) {
            let coef = hi * self.eave_interf(b, e, n) - d * self.inst.g_user[f][i][b][n];
            terms.extend(rho.users_on(b, n).map(|l| (Coord::new(b, l, n), coef)));
        }
        for l in rho.users_on(f, n).filter(|&l| l != i) {
            let mut coef = hi * x;
            if self.outranks(f, l, i, n) {
                coef -= d * hi;
            }
            if coef != 0.0 {
                terms.push((Coord::new(f, l, n), coef));
            }
        }
        Affine {
            constant: (hi - d) * s2,
            terms,
        }
    }

    /// Eavesdropper interference-plus-noise while decoding user `m` as an
    /// affine form in the powers.
    pub fn eave_denominator(&self, rho: &Assignment, f: usize, e: usize, m: usize, n: usize) -> Affine {
        let x = self.eave_interf(f, e, n);
        let mut terms = Vec::new();
        for i in rho.users_on(f, n) {
            if self.eave_hears(f, e, m, i, n) {
                terms.push((Coord::new(f, i, n), x));
            }
        }
        for b in (0..self.inst.bs_count()).filter(|&b| b != f) {
            let g = self.eave_interf(b, e, n);
            for i in rho.users_on(b, n) {
                terms.push((Coord::new(b, i, n), g));
            }
        }
        Affine {
            constant: self.sigma2(),
            terms,
        }
    }
}

fn normalized(terms: &[f64; 6]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        0.0
    } else {
        terms.iter().sum::<f64>() / scale
    }
}

/// Largest violation per constraint family; `<= 0` means satisfied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.c1, self.c2, self.c4, self.c5, self.c6]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.c2 <= 0.0 && self.c1 <= tol && self.c4 <= tol && self.c5 <= tol && self.c6 <= tol
    }
}

fn check_indices(inst: &NetworkInstance, f: usize, m: usize, n: usize) -> Result<()> {
    if f >= inst.bs_count() || m >= inst.users_in(f) || n >= inst.subcarriers() {
        return Err(Error::Index(format!("(f={f}, m={m}, n={n})")));
    }
    Ok(())
}

fn check_eave(inst: &NetworkInstance, e: usize) -> Result<()> {
    if e >= inst.eavesdroppers() {
        return Err(Error::Index(format!("eavesdropper {e}")));
    }
    Ok(())
}

pub fn user_sinr(
    inst: &NetworkInstance,
    p: &PowerAllocation,
    rho: &Assignment,
    f: usize,
    m: usize,
    n: usize,
) -> Result<f64> {
    check_indices(inst, f, m, n)?;
    Ok(RateModel::new(inst, Gains::True).user_sinr(p, rho, f, m, n))
}

#[allow(clippy::too_many_arguments)]
pub fn eave_sinr(
    inst: &NetworkInstance,
    p: &PowerAllocation,
    rho: &Assignment,
    f: usize,
    e: usize,
    m: usize,
    n: usize,
    gains: Gains,
) -> Result<f64> {
    check_indices(inst, f, m, n)?;
    check_eave(inst, e)?;
    Ok(RateModel::new(inst, gains).eave_sinr(p, rho, f, e, m, n))
}

pub fn secrecy_rate(
    inst: &NetworkInstance,
    p: &PowerAllocation,
    rho: &Assignment,
    f: usize,
    m: usize,
    n: usize,
    gains: Gains,
) -> Result<f64> {
    check_indices(inst, f, m, n)?;
    Ok(RateModel::new(inst, gains).secrecy_rate(p, rho, f, m, n))
}

/// Optimizer objective `sum rho (r_user - r_eave_max)` in bits/s/Hz.
pub fn sum_secrecy_objective(inst: &NetworkInstance, p: &PowerAllocation, rho: &Assignment, gains: Gains) -> f64 {
    RateModel::new(inst, gains).epigraph_objective(p, rho)
}

#[allow(clippy::too_many_arguments)]
pub fn sic_feasibility_q(
    inst: &NetworkInstance,
    p: &PowerAllocation,
    rho: &Assignment,
    f: usize,
    m: usize,
    i: usize,
    n: usize,
) -> Result<f64> {
    check_indices(inst, f, m, n)?;
    check_indices(inst, f, i, n)?;
    RateModel::new(inst, Gains::True).sic_q(p, rho, f, m, i, n)
}

#[allow(clippy::too_many_arguments)]
pub fn sic_avoidance_psi(
    inst: &NetworkInstance,
    p: &PowerAllocation,
    rho: &Assignment,
    f: usize,
    m: usize,
    i: usize,
    n: usize,
    e: usize,
    gains: Gains,
) -> Result<f64> {
    check_indices(inst, f, m, n)?;
    check_indices(inst, f, i, n)?;
    check_eave(inst, e)?;
    RateModel::new(inst, gains).sic_psi(p, rho, f, m, i, n, e)
}
