//! Worst-case treatment of bounded eavesdropper CSI errors.
//!
//! The inner minimization over admissible errors has a closed form: the
//! eavesdropper's direct link is replaced by `estimate + bound` and every
//! interfering link it hears by `max(estimate - bound, 0)`. The outer problem
//! is then the perfect-CSI problem on these tables, solved by the same
//! alternating pipeline.

use serde::{Deserialize, Serialize};

use crate::asm::{self, AsmOptions, SolverReport};
use crate::error::Result;
use crate::network::NetworkInstance;
use crate::rates::{EaveTable, Gains, RateModel};

#[derive(Debug, Clone, PartialEq)]
pub struct RobustView {
    pub epsilon: f64,
    /// Upper bound on direct eavesdropper gains.
    pub g_plus: EaveTable,
    /// Lower bound on interfering eavesdropper gains, clipped at zero.
    pub g_minus: EaveTable,
}

impl RobustView {
    pub fn build(inst: &NetworkInstance) -> Self {
        Self::with_epsilon(inst, inst.config.epsilon)
    }

    /// The bound on link (b, e) is `epsilon` times its path loss: the error
    /// bound applies to the small-scale fading, which is dimensionless.
    pub fn with_epsilon(inst: &NetworkInstance, epsilon: f64) -> Self {
        let mut g_plus = inst.g_eave_est.clone();
        let mut g_minus = inst.g_eave_est.clone();
        for b in 0..inst.bs_count() {
            for e in 0..inst.eavesdroppers() {
                let bound = epsilon * inst.eave_path_loss(b, e);
                for n in 0..inst.subcarriers() {
                    let est = inst.g_eave_est[b][e][n];
                    g_plus[b][e][n] = est + bound;
                    g_minus[b][e][n] = (est - bound).max(0.0);
                }
            }
        }
        Self {
            epsilon,
            g_plus,
            g_minus,
        }
    }
}

pub fn build_robust_view(inst: &NetworkInstance) -> RobustView {
    RobustView::build(inst)
}

/// Outcome of a robust solve: the solver report on the worst-case surrogate
/// together with the secrecy the allocation actually achieves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustReport {
    pub report: SolverReport,
    /// Epigraph objective of the final allocation under worst-case gains.
    pub surrogate_objective: f64,
    /// Epigraph objective of the final allocation under the true gains.
    pub realized_objective: f64,
    /// Clamped sum secrecy under the true gains.
    pub realized_secrecy: f64,
}

pub fn solve_robust(inst: &NetworkInstance, options: &AsmOptions) -> Result<RobustReport> {
    let report = asm::run(inst, options, Gains::WorstCase)?;
    let truth = RateModel::new(inst, Gains::True);
    let realized_objective = truth.epigraph_objective(&report.power, &report.assignment);
    let realized_secrecy = truth.sum_secrecy(&report.power, &report.assignment);
    Ok(RobustReport {
        surrogate_objective: report.objective,
        realized_objective,
        realized_secrecy,
        report,
    })
}
