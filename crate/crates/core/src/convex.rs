//! Log-barrier path following for the small convex programs produced by the
//! DC linearization.
//!
//! Every function handled here has the form
//! `-sum_j ln(a_j(x)) + c^T x + c0` with affine `a_j`, which covers both the
//! linearized power objective and all of its constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseAffine {
    pub constant: f64,
    pub coef: Vec<(usize, f64)>,
}

impl SparseAffine {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.coef.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// `-sum ln(logs_j(x)) + linear^T x + constant`; convex on its domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogLinear {
    pub logs: Vec<SparseAffine>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LogLinear {
    pub fn linear(coef: Vec<(usize, f64)>, constant: f64) -> Self {
        Self {
            logs: Vec::new(),
            linear: coef,
            constant,
        }
    }

    /// `None` outside the domain (some log argument non-positive).
    pub fn eval(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = self.constant + self.linear.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        for arg in &self.logs {
            let a = arg.eval(x);
            if !(a > 0.0) {
                return None;
            }
            v -= a.ln();
        }
        Some(v)
    }

    fn gradient(&self, x: &DVector<f64>, grad: &mut DVector<f64>) {
        grad.fill(0.0);
        for &(j, a) in &self.linear {
            grad[j] += a;
        }
        for arg in &self.logs {
            let a = arg.eval(x);
            for &(j, c) in &arg.coef {
                grad[j] -= c / a;
            }
        }
    }

    /// Adds `weight * hessian` into `hess`.
    fn add_hessian(&self, x: &DVector<f64>, weight: f64, hess: &mut DMatrix<f64>) {
        for arg in &self.logs {
            let a = arg.eval(x);
            let w = weight / (a * a);
            for &(j, cj) in &arg.coef {
                for &(k, ck) in &arg.coef {
                    hess[(j, k)] += w * cj * ck;
                }
            }
        }
    }

    fn is_linear(&self) -> bool {
        self.logs.is_empty()
    }
}

/// `minimize objective(x) s.t. constraints_i(x) <= 0`.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub dim: usize,
    pub objective: LogLinear,
    pub constraints: Vec<LogLinear>,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Target duality measure `m / t`.
    pub tol: f64,
    /// Newton steps allowed per centering.
    pub max_newton: usize,
    pub t0: f64,
    pub growth: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_newton: 200,
            t0: 1.0,
            growth: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub x: DVector<f64>,
    pub objective: f64,
    pub newton_steps: usize,
    pub duality_gap: f64,
}

impl ConvexProgram {
    /// Largest constraint value at `x`; `None` if outside some log domain.
    pub fn max_violation(&self, x: &DVector<f64>) -> Option<f64> {
        let mut worst = f64::NEG_INFINITY;
        for c in &self.constraints {
            worst = worst.max(c.eval(x)?);
        }
        Some(worst)
    }

    pub fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.objective.eval(x).is_some() && self.max_violation(x).is_some_and(|v| v < 0.0)
    }

    fn barrier_value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = t * self.objective.eval(x)?;
        for c in &self.constraints {
            let ci = c.eval(x)?;
            if ci >= 0.0 {
                return None;
            }
            v -= (-ci).ln();
        }
        Some(v)
    }

    fn barrier_derivatives(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut tmp = DVector::zeros(n);

        self.objective.gradient(x, &mut tmp);
        g.axpy(t, &tmp, 1.0);
        self.objective.add_hessian(x, t, &mut h);

        for c in &self.constraints {
            let ci = c.eval(x).expect("iterate stays in the domain");
            let slack = -ci;
            c.gradient(x, &mut tmp);
            g.axpy(1.0 / slack, &tmp, 1.0);
            h.ger(1.0 / (slack * slack), &tmp, &tmp, 1.0);
            if !c.is_linear() {
                c.add_hessian(x, 1.0 / slack, &mut h);
            }
        }
        (g, h)
    }

    /// Path following from a strictly feasible `x0`.
    pub fn solve(&self, x0: DVector<f64>, opts: &BarrierOptions) -> Result<BarrierResult> {
        if !self.strictly_feasible(&x0) {
            return Err(Error::InfeasibleAnchor(format!(
                "barrier start not strictly feasible (max constraint {:?})",
                self.max_violation(&x0)
            )));
        }
        let m = self.constraints.len().max(1) as f64;
        let mut x = x0;
        let mut t = opts.t0;
        let mut steps = 0;
        loop {
            steps += self.center(&mut x, t, opts.max_newton, None)?;
            if m / t < opts.tol {
                break;
            }
            t *= opts.growth;
        }
        Ok(BarrierResult {
            objective: self.objective.eval(&x).unwrap(),
            x,
            newton_steps: steps,
            duality_gap: m / t,
        })
    }

    /// Newton centering at barrier weight `t`. Returns the number of steps.
    /// `stop` allows early exit once a predicate on the iterate holds.
    fn center(
        &self,
        x: &mut DVector<f64>,
        t: f64,
        budget: usize,
        stop: Option<&dyn Fn(&DVector<f64>) -> bool>,
    ) -> Result<usize> {
        let mut steps = 0;
        loop {
            if let Some(pred) = stop {
                if pred(x) {
                    return Ok(steps);
                }
            }
            let (g, h) = self.barrier_derivatives(x, t);
            let d = newton_direction(&g, &h);
            let decrement = -g.dot(&d);
            if !(decrement > 1e-8) {
                return Ok(steps);
            }
            if steps >= budget {
                if decrement < 1e-6 {
                    return Ok(steps);
                }
                return Err(Error::NonConvergence {
                    iterations: steps,
                    residual: decrement,
                });
            }
            steps += 1;
            let phi = self.barrier_value(x, t).unwrap();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = &*x + alpha * &d;
                if let Some(v) = self.barrier_value(&trial, t) {
                    if v <= phi - 0.25 * alpha * decrement {
                        *x = trial;
                        accepted = phi - v > 1e-15 * phi.abs();
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No representable progress left at this barrier weight.
                return Ok(steps);
            }
        }
    }

    /// Searches for a strictly feasible point starting from `x0`, which must
    /// lie in the domain of every log term. Returns `None` when the minimal
    /// achievable constraint value is not negative.
    pub fn phase_one(&self, x0: &DVector<f64>, opts: &BarrierOptions) -> Option<DVector<f64>> {
        if self.strictly_feasible(x0) {
            return Some(x0.clone());
        }
        let start = self.max_violation(x0)?;
        let n = self.dim;
        let s = n;
        let mut constraints: Vec<LogLinear> = self
            .constraints
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.linear.push((s, -1.0));
                c
            })
            .collect();
        // keep the auxiliary problem bounded below
        constraints.push(LogLinear::linear(vec![(s, -1.0)], -1.0));
        let aux = ConvexProgram {
            dim: n + 1,
            objective: LogLinear::linear(vec![(s, 1.0)], 0.0),
            constraints,
        };
        let mut x = x0.clone().insert_row(n, start.abs().max(1e-3) + start);
        if !aux.strictly_feasible(&x) {
            x[s] = start + 1.0;
        }
        let done = |y: &DVector<f64>| y[s] < 0.0 && self.strictly_feasible(&y.rows(0, n).into_owned());
        let m = aux.constraints.len() as f64;
        let mut t = opts.t0;
        loop {
            if aux.center(&mut x, t, opts.max_newton, Some(&done)).is_err() {
                return None;
            }
            if done(&x) {
                return Some(x.rows(0, n).into_owned());
            }
            if m / t < opts.tol * 1e-3 {
                return None;
            }
            t *= opts.growth;
        }
    }
}

/// Solves `H d = -g` with Jacobi scaling and diagonal jitter on failure.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let n = g.len();
    let scale: DVector<f64> = DVector::from_iterator(
        n,
        h.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 }),
    );
    let mut hs = h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= scale[i] * scale[j];
        }
    }
    let gs = g.component_mul(&scale);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut m = hs.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return chol.solve(&(-&gs)).component_mul(&scale);
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 100.0 };
    }
    -g.component_mul(&scale).component_mul(&scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(coef: &[(usize, f64)], c: f64) -> LogLinear {
        LogLinear::linear(coef.to_vec(), c)
    }

    #[test]
    fn maximizes_log_on_box() {
        // minimize -ln(1 + x0) - ln(1 + 2 x1) s.t. x0 + x1 <= 1, x >= 0
        let objective = LogLinear {
            logs: vec![
                SparseAffine { constant: 1.0, coef: vec![(0, 1.0)] },
                SparseAffine { constant: 1.0, coef: vec![(1, 2.0)] },
            ],
            linear: vec![],
            constant: 0.0,
        };
        let prog = ConvexProgram {
            dim: 2,
            objective,
            constraints: vec![lin(&[(0, 1.0), (1, 1.0)], -1.0), lin(&[(0, -1.0)], 0.0), lin(&[(1, -1.0)], 0.0)],
        };
        let res = prog
            .solve(DVector::from_vec(vec![0.2, 0.2]), &BarrierOptions::default())
            .unwrap();
        // water-filling: 1 + x0 = 0.5 + x1 (times multiplier) -> x0 = 0.25, x1 = 0.75
        assert!((res.x[0] - 0.25).abs() < 1e-4, "{}", res.x);
        assert!((res.x[1] - 0.75).abs() < 1e-4, "{}", res.x);
        assert!(res.duality_gap < 1e-6);
    }

    #[test]
    fn phase_one_finds_interior_point() {
        // x0 >= 2, x0 <= 3 from start 0
        let prog = ConvexProgram {
            dim: 1,
            objective: lin(&[(0, 1.0)], 0.0),
            constraints: vec![lin(&[(0, -1.0)], 2.0), lin(&[(0, 1.0)], -3.0)],
        };
        let x = prog
            .phase_one(&DVector::from_vec(vec![0.0]), &BarrierOptions::default())
            .unwrap();
        assert!(x[0] > 2.0 && x[0] < 3.0);
        let res = prog.solve(x, &BarrierOptions::default()).unwrap();
        assert!((res.x[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn phase_one_reports_empty_interior() {
        // x0 <= 1 and x0 >= 1: no strictly feasible point
        let prog = ConvexProgram {
            dim: 1,
            objective: lin(&[(0, 1.0)], 0.0),
            constraints: vec![lin(&[(0, 1.0)], -1.0), lin(&[(0, -1.0)], 1.0)],
        };
        assert!(prog
            .phase_one(&DVector::from_vec(vec![0.0]), &BarrierOptions::default())
            .is_none());
    }

    #[test]
    fn rejects_infeasible_start() {
        let prog = ConvexProgram {
            dim: 1,
            objective: lin(&[(0, 1.0)], 0.0),
            constraints: vec![lin(&[(0, -1.0)], 0.0)],
        };
        assert!(matches!(
            prog.solve(DVector::from_vec(vec![-1.0]), &BarrierOptions::default()),
            Err(Error::InfeasibleAnchor(_))
        ));
    }
}
