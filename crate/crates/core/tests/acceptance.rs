//! Acceptance suite. Every criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.
//!
//! Run with `cargo test -p secnoma --test acceptance`.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use secnoma::asm::{self, initialize, AsmOptions};
use secnoma::experiment::{paired_t_test, run_experiment, Axis, DetailRow, ExperimentSpec, SolverKind};
use secnoma::fixtures::single_cell;
use secnoma::polyblock::{global_optimum, GlobalOptions};
use secnoma::power::{eval_h, eval_phi, DcLinearization};
use secnoma::subcarrier::{exhaustive_with, mads_with, PowerRule, SearchBudget};
use secnoma::{generate, Assignment, Coord, Gains, NetworkConfig, NetworkInstance, PowerAllocation, RateModel};

const TRIALS: u64 = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn options(seed: u64) -> AsmOptions {
    let mut o = AsmOptions::default();
    o.budget.seed = seed;
    o
}

fn default_instance(seed: u64) -> NetworkInstance {
    generate(&NetworkConfig {
        seed,
        ..NetworkConfig::default()
    })
    .unwrap()
}

/// Runs a sweep through the experiment pipeline and returns the objective of
/// every ok row keyed by (value, solver, trial).
fn sweep(network: NetworkConfig, axis: Axis, values: Vec<f64>, solvers: Vec<SolverKind>, eps: Vec<f64>) -> BTreeMap<(u64, String, usize), f64> {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        network,
        axis,
        values,
        trials: TRIALS as usize,
        solvers,
        output_dir: dir.path().to_path_buf(),
        robust_epsilon: eps,
        base_seed: Some(0),
        workers: 0,
        timing: false,
        trace_trial: 0,
        asm: AsmOptions::default(),
        global: GlobalOptions::default(),
    };
    let result = run_experiment(&spec).unwrap();
    let failed: Vec<&DetailRow> = result.detail.iter().filter(|r| r.status != "ok").collect();
    assert!(failed.is_empty(), "solver failures: {failed:?}");
    result
        .detail
        .into_iter()
        .map(|r| ((r.value.to_bits(), r.solver, r.trial), r.objective_bps_hz.unwrap()))
        .collect()
}

fn column(rows: &BTreeMap<(u64, String, usize), f64>, value: f64, solver: &str) -> Vec<f64> {
    (0..TRIALS as usize)
        .map(|t| rows[&(value.to_bits(), solver.to_string(), t)])
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn asm_runs() -> Vec<asm::SolverReport> {
    (0..TRIALS)
        .into_par_iter()
        .map(|s| asm::run(&default_instance(s), &options(s), Gains::True).unwrap())
        .collect()
}

fn monotone_traces(runs: &[asm::SolverReport]) -> Verdict {
    let worst = runs
        .iter()
        .flat_map(|r| r.objective_trace.windows(2).map(|w| w[0] - w[1]))
        .fold(f64::NEG_INFINITY, f64::max);
    let bad = runs
        .iter()
        .filter(|r| r.objective_trace.windows(2).any(|w| w[1] < w[0] - 1e-6))
        .count();
    verdict(bad == 0, format!("{bad}/{} traces decrease by more than 1e-6 (largest drop {worst:.2e})", runs.len()))
}

fn fast_termination(runs: &[asm::SolverReport]) -> Verdict {
    let fast = runs.iter().filter(|r| r.terminated_by_theta && r.iterations <= 20).count();
    let share = fast as f64 / runs.len() as f64;
    verdict(share >= 0.9, format!("{fast}/{} runs stop by the threshold rule within 20 iterations", runs.len()))
}

fn baseline_dominance() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for e in [4usize, 6] {
        let network = NetworkConfig {
            eavesdroppers: e,
            ..NetworkConfig::default()
        };
        let rows = sweep(
            network,
            Axis::N,
            vec![2.0, 4.0, 6.0],
            vec![SolverKind::Asm, SolverKind::AsmBaselineSic],
            vec![],
        );
        for n in [2.0, 4.0, 6.0] {
            let ours = column(&rows, n, "asm");
            let base = column(&rows, n, "asm_baseline_sic");
            let dominated = ours.iter().zip(&base).filter(|(a, b)| **a >= **b - 1e-6).count();
            let ok = mean(&ours) > mean(&base) && dominated as f64 >= 0.95 * TRIALS as f64;
            pass &= ok;
            lines.push(format!(
                "E={e} N={n}: mean {:.3} vs {:.3}, dominance {dominated}/{TRIALS}{}",
                mean(&ours),
                mean(&base),
                if ok { "" } else { " (short)" }
            ));
        }
    }
    verdict(pass, lines.join("; "))
}

fn robust_ordering() -> Verdict {
    let eps = [0.0, 0.1, 0.3, 0.5];
    let rows = sweep(NetworkConfig::default(), Axis::N, vec![2.0, 4.0], vec![SolverKind::Robust], eps.to_vec());
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [2.0, 4.0] {
        let cols: Vec<Vec<f64>> = eps.iter().map(|e| column(&rows, n, &format!("robust_eps_{e}"))).collect();
        let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
        let mut worst_p: f64 = 0.0;
        for k in 0..3 {
            let t = paired_t_test(&cols[k], &cols[k + 1]).unwrap();
            worst_p = worst_p.max(t.p_greater);
            pass &= means[k] > means[k + 1] && t.p_greater < 0.05;
        }
        lines.push(format!(
            "N={n}: means {:.3} > {:.3} > {:.3} > {:.3}, largest one-sided p {worst_p:.1e}",
            means[0], means[1], means[2], means[3]
        ));
    }
    verdict(pass, lines.join("; "))
}

fn eavesdropper_trend() -> Verdict {
    let values = [1.0, 2.0, 3.0, 4.0];
    let rows = sweep(NetworkConfig::default(), Axis::E, values.to_vec(), vec![SolverKind::Asm], vec![]);
    let means: Vec<f64> = values.iter().map(|&e| mean(&column(&rows, e, "asm"))).collect();
    let pass = means.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    verdict(pass, format!("means over E = 1..4: {}", shown.join(", ")))
}

fn capped_instance(seed: u64) -> NetworkInstance {
    let base = NetworkConfig::default();
    generate(&NetworkConfig {
        bs_count: 1,
        users_per_bs: vec![2],
        eavesdroppers: 1,
        subcarriers: 1 + (seed as usize % 2),
        p_max: vec![base.p_max[0]],
        seed,
        ..base
    })
    .unwrap()
}

/// Best epigraph value on one subcarrier of a one-BS, two-user instance for
/// every power level `b * p_max / k`, b = 0..=k, over a uniform power grid.
/// The result is non-decreasing in `b`.
fn subcarrier_profile(inst: &NetworkInstance, n: usize, k: usize) -> Vec<f64> {
    let p_max = inst.config.p_max[0];
    let h = vec![vec![inst.g_user[0][0][0][n]], vec![inst.g_user[0][1][0][n]]];
    let he = vec![vec![inst.g_eave_true[0][0][n]]];
    let one = single_cell(h, he, p_max, inst.sigma2(), 2);
    let model = RateModel::new(&one, Gains::True);
    let step = p_max / k as f64;
    let mut exact = vec![f64::NEG_INFINITY; k + 1];
    exact[0] = 0.0;
    let mut p = PowerAllocation::zeros(&one);
    let mut rho = Assignment::empty(&one);
    for a in 0..=k {
        for b in 0..=(k - a) {
            p.p[0][0][0] = a as f64 * step;
            p.p[0][1][0] = b as f64 * step;
            rho.rho[0][0][0] = a > 0;
            rho.rho[0][1][0] = b > 0;
            if !model.residuals(&p, &rho, true).feasible(1e-12) {
                continue;
            }
            let v = model.epigraph_objective(&p, &rho);
            exact[a + b] = exact[a + b].max(v);
        }
    }
    for s in 1..=k {
        exact[s] = exact[s].max(exact[s - 1]);
    }
    exact
}

/// Grid optimum of a capped instance: the subcarriers share the budget, so
/// the per-subcarrier profiles are combined by a budget split.
fn grid_optimum(inst: &NetworkInstance, k: usize) -> f64 {
    let profiles: Vec<Vec<f64>> = (0..inst.subcarriers()).map(|n| subcarrier_profile(inst, n, k)).collect();
    match profiles.as_slice() {
        [one] => one[k],
        [a, b] => (0..=k).map(|s| a[s] + b[k - s]).fold(f64::NEG_INFINITY, f64::max),
        _ => unreachable!("capped instances have one or two subcarriers"),
    }
}

fn optimality_gap() -> Verdict {
    let results: Vec<(f64, f64, f64)> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let inst = capped_instance(seed);
            let g = global_optimum(&inst, &GlobalOptions::default()).unwrap();
            let a = asm::run(&inst, &options(seed), Gains::True).unwrap();
            // 1000 levels per subcarrier: 5e5 points for N = 1, 1e6 for N = 2.
            (g.objective, a.epigraph, grid_optimum(&inst, 1000))
        })
        .collect();
    let below = results.iter().filter(|(cbv, asm, _)| *cbv < asm - 1e-6).count();
    let within = results
        .iter()
        .filter(|(cbv, asm, _)| *cbv <= 0.0 || (cbv - asm) / cbv <= 0.2)
        .count();
    let worst_grid = results.iter().map(|(cbv, _, grid)| (cbv - grid).abs()).fold(0.0, f64::max);
    let mean_gap = mean(&results.iter().map(|(c, a, _)| if *c > 0.0 { (c - a) / c } else { 0.0 }).collect::<Vec<_>>());
    let pass = below == 0 && within as f64 >= 0.8 * 30.0 && worst_grid <= 1e-2;
    verdict(
        pass,
        format!(
            "CBV below ASM on {below}/30, ASM within 20% on {within}/30 (mean gap {:.2}%), largest |CBV - grid| {worst_grid:.2e}",
            100.0 * mean_gap
        ),
    )
}

fn full_assignment(inst: &NetworkInstance) -> Assignment {
    let mut rho = Assignment::empty(inst);
    for f in 0..inst.bs_count() {
        for n in 0..inst.subcarriers() {
            for m in 0..inst.users_in(f).min(inst.config.ell) {
                rho.set(Coord::new(f, m, n), true);
            }
        }
    }
    rho
}

fn random_box_point(inst: &NetworkInstance, rho: &Assignment, rng: &mut ChaCha8Rng) -> PowerAllocation {
    let mut p = PowerAllocation::zeros(inst);
    for c in rho.scheduled() {
        p.set(c, rng.random_range(0.0..1.0) * inst.config.p_max[c.f]);
    }
    p
}

/// Central difference of `f` along coordinate `q`. H and Phi are logarithms
/// of affine functions, so the step is sized for a change of about 1e-5 in
/// the function value, which keeps both rounding and truncation error small
/// even for the tiny cross-cell derivatives.
fn central(f: impl Fn(&PowerAllocation) -> f64, anchor: &PowerAllocation, q: Coord, pilot_step: f64) -> f64 {
    let diff = |step: f64| {
        let mut hi = anchor.clone();
        let mut lo = anchor.clone();
        hi.set(q, anchor.get(q) + step);
        lo.set(q, anchor.get(q) - step);
        (f(&hi) - f(&lo)) / (2.0 * step)
    };
    let pilot = diff(pilot_step);
    if pilot == 0.0 {
        return 0.0;
    }
    diff(1e-5 / pilot.abs())
}

fn gradients() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let inst = default_instance(1000 + seed);
        let model = RateModel::new(&inst, Gains::True);
        let rho = full_assignment(&inst);
        let coords: Vec<Coord> = rho.scheduled().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let anchor = random_box_point(&inst, &rho, &mut rng);
            let lin = DcLinearization::new(&model, &rho, &anchor);
            let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(fd.abs()).max(1e-300);
            for &q in &coords {
                let pilot = 1e-6 * inst.config.p_max[q.f];
                for &c in &coords {
                    let fd = central(|p| eval_h(&model, p, &rho, c), &anchor, q, pilot);
                    let an = lin.grad_h(c).unwrap().iter().find(|t| t.0 == q).map_or(0.0, |t| t.1);
                    if fd != 0.0 || an != 0.0 {
                        worst = worst.max(rel(fd, an));
                    }
                    for e in 0..inst.eavesdroppers() {
                        let fd = central(|p| eval_phi(&model, p, &rho, c, e), &anchor, q, pilot);
                        let an = lin.grad_phi(c, e).unwrap().iter().find(|t| t.0 == q).map_or(0.0, |t| t.1);
                        if fd != 0.0 || an != 0.0 {
                            worst = worst.max(rel(fd, an));
                        }
                    }
                }
            }
        }
    }
    verdict(worst < 1e-4, format!("largest relative error {worst:.2e} over 10 instances x 50 points"))
}

fn dc_bounds() -> Verdict {
    let inst = default_instance(77);
    let model = RateModel::new(&inst, Gains::True);
    let rho = full_assignment(&inst);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let anchor = random_box_point(&inst, &rho, &mut rng);
    let lin = DcLinearization::new(&model, &rho, &anchor);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_box_point(&inst, &rho, &mut rng);
        for c in rho.scheduled() {
            worst = worst.max(eval_h(&model, &p, &rho, c) - lin.h_tilde(c, &p).unwrap());
            for e in 0..inst.eavesdroppers() {
                worst = worst.max(lin.phi_tilde(c, e, &p).unwrap() - eval_phi(&model, &p, &rho, c, e));
            }
        }
    }
    verdict(worst <= 1e-9, format!("largest bound violation {worst:.2e} over 1000 points"))
}

fn constraint_semantics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut q_checked, mut psi_checked, mut disagree) = (0, 0, 0);
    for _ in 0..1000 {
        // Two cells, three users, one subcarrier, two eavesdroppers, gains of order one.
        let mut g = || rng.random_range(0.01..5.0);
        let users: Vec<Vec<Vec<Vec<f64>>>> = (0..2)
            .map(|_| (0..3).map(|_| (0..2).map(|_| vec![g()]).collect()).collect())
            .collect();
        let eaves: Vec<Vec<Vec<f64>>> = (0..2).map(|_| (0..2).map(|_| vec![g()]).collect()).collect();
        let inst = secnoma::fixtures::instance(users, eaves, vec![10.0, 2.0], 0.5, 3);
        let model = RateModel::new(&inst, Gains::True);
        let mut rho = Assignment::empty(&inst);
        let mut p = PowerAllocation::zeros(&inst);
        for f in 0..2 {
            for m in 0..3 {
                let on = rng.random_bool(0.7);
                rho.set(Coord::new(f, m, 0), on);
                if on {
                    p.set(Coord::new(f, m, 0), rng.random_range(0.01..3.0));
                }
            }
        }
        let s2 = inst.sigma2();
        for f in 0..2 {
            let on: Vec<usize> = rho.users_on(f, 0).collect();
            let h = |m: usize| model.h(f, m, 0);
            // Inter-cell interference at user m.
            let inter = |m: usize| -> f64 {
                (0..2)
                    .filter(|&b| b != f)
                    .map(|b| inst.g_user[f][m][b][0] * rho.users_on(b, 0).map(|l| p.p[b][l][0]).sum::<f64>())
                    .sum()
            };
            // Own-signal SINR of user i: co-channel users at least as strong stay as noise.
            let own = |i: usize| {
                let load: f64 = on.iter().filter(|&&l| l != i && h(l) >= h(i)).map(|&l| p.p[f][l][0]).sum();
                p.p[f][i][0] * h(i) / (h(i) * load + inter(i) + s2)
            };
            for &m in &on {
                for &i in &on {
                    if i == m || h(i) > h(m) {
                        continue;
                    }
                    let load: f64 = on.iter().filter(|&&l| l != i && h(l) >= h(m)).map(|&l| p.p[f][l][0]).sum();
                    let cross = p.p[f][i][0] * h(m) / (h(m) * load + inter(m) + s2);
                    let q = model.sic_q(&p, &rho, f, m, i, 0).unwrap();
                    if q != 0.0 {
                        q_checked += 1;
                        disagree += ((q <= 0.0) != (cross >= own(i))) as usize;
                    }
                    for e in 0..2 {
                        let he = inst.g_eave_true[f][e][0];
                        if h(i) > he {
                            continue;
                        }
                        let eave_inter: f64 = (0..2)
                            .filter(|&b| b != f)
                            .map(|b| inst.g_eave_true[b][e][0] * rho.users_on(b, 0).map(|l| p.p[b][l][0]).sum::<f64>())
                            .sum();
                        let others: f64 = on.iter().filter(|&&l| l != i).map(|&l| p.p[f][l][0]).sum();
                        let eave = p.p[f][i][0] * he / (he * others + eave_inter + s2);
                        let psi = model.sic_psi(&p, &rho, f, m, i, 0, e).unwrap();
                        if psi != 0.0 {
                            psi_checked += 1;
                            disagree += ((psi >= 0.0) != (eave <= own(i))) as usize;
                        }
                    }
                }
            }
        }
    }
    verdict(
        disagree == 0 && q_checked > 0 && psi_checked > 0,
        format!("{disagree} sign disagreements over {q_checked} Q and {psi_checked} Psi evaluations"),
    )
}

fn search_quality() -> Verdict {
    let results: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let inst = default_instance(500 + seed);
            let model = RateModel::new(&inst, Gains::True);
            let exact = exhaustive_with(&model, PowerRule::Uniform).unwrap();
            let (_, start) = initialize(&inst);
            let budget = SearchBudget {
                seed,
                ..SearchBudget::default()
            };
            let found = mads_with(&model, PowerRule::Uniform, &start, &budget);
            (found.objective, exact.objective)
        })
        .collect();
    let tol = |e: f64| 1e-9 * (1.0 + e.abs());
    let matched = results.iter().filter(|(f, e)| (f - e).abs() <= tol(*e)).count();
    let above = results.iter().filter(|(f, e)| *f > e + tol(*e)).count();
    verdict(
        matched >= 40 && above == 0,
        format!("search matches enumeration on {matched}/50, exceeds it on {above}"),
    )
}

fn uniform_mode() -> Verdict {
    let rows = sweep(
        NetworkConfig::default(),
        Axis::Mode,
        vec![0.0, 1.0],
        vec![SolverKind::Asm],
        vec![],
    );
    let joint = column(&rows, 0.0, "asm");
    let uniform = column(&rows, 1.0, "asm");
    let losses = joint.iter().zip(&uniform).filter(|(j, u)| **j < **u - 1e-6).count();
    let gap = mean(&joint.iter().zip(&uniform).map(|(j, u)| (j - u) / j).collect::<Vec<_>>());
    let pass = losses == 0 && gap > 0.0 && gap < 0.25;
    verdict(
        pass,
        format!("joint below uniform on {losses}/{TRIALS} seeds, mean relative gap {:.2}%", 100.0 * gap),
    )
}

fn main() {
    let started = Instant::now();
    let runs = asm_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 ASM traces are non-decreasing", Box::new(|| monotone_traces(&runs))),
        ("2 ASM stops within 20 iterations", Box::new(|| fast_termination(&runs))),
        ("3 SIC avoidance beats the SIC-capable baseline", Box::new(baseline_dominance)),
        ("4 robust objective ordered in epsilon", Box::new(robust_ordering)),
        ("5 objective non-increasing in E", Box::new(eavesdropper_trend)),
        ("6 optimality gap against polyblock and grid", Box::new(optimality_gap)),
        ("7 DC gradients match finite differences", Box::new(gradients)),
        ("8 DC tangent bounds hold", Box::new(dc_bounds)),
        ("9 Q and Psi signs match the SINR inequalities", Box::new(constraint_semantics)),
        ("10 direct search against enumeration", Box::new(search_quality)),
        ("11 joint power beats uniform power", Box::new(uniform_mode)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let v = check();
        failed += (!v.pass) as usize;
        println!(
            "{} criterion {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
