//! Acceptance criteria for the Rosenbrock experiment suite.
//!
//! Each test prints one `[PASS]`/`[FAIL]` line per criterion; run with
//! `cargo test -p rosenbench-core --test acceptance -- --nocapture` to see
//! them. All runs use `epsilon = 1e-3` on the gradient norm unless noted.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosenbench_core::linesearch::{golden_section, quadratic_fit_step, restrict, select_variable};
use rosenbench_core::{
    compare_sd_variants, emit_results_csv, finite_diff_gradient, finite_diff_hessian,
    fletcher_reeves_cg, newton_raphson, run_matrix, ExperimentMatrix, Matrix, Method, Objective,
    QuadraticObjective, RealVector, ResultRow, Rosenbrock, RunStatus, SdVariant, StepRule,
    TerminationPolicy,
};

const STARTS: [[f64; 2]; 2] = [[2.0, 2.0], [5.0, 5.0]];

fn matrix_rows() -> &'static [ResultRow] {
    static ROWS: OnceLock<Vec<ResultRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_matrix(&ExperimentMatrix::default()).expect("default matrix runs"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Expect {
    Converges,
    Diverges,
}

fn fixed_row<'a>(
    rows: &'a [ResultRow],
    method: &str,
    alpha: f64,
    kappa: f64,
    start: [f64; 2],
) -> &'a ResultRow {
    rows.iter()
        .find(|r| {
            r.method_label() == method
                && r.method.rule() == Some(&StepRule::Fixed { alpha })
                && r.kappa == kappa
                && r.start == start
        })
        .unwrap_or_else(|| {
            panic!("missing row {method} fixed:{alpha} kappa={kappa} start={start:?}")
        })
}

/// Checks every listed cell, prints one line per cell and a verdict line.
fn check_cells(criterion: &str, alpha: f64, cells: &[(&str, f64, [f64; 2], Expect)]) {
    let rows = matrix_rows();
    let mut failures = Vec::new();
    for &(method, kappa, start, expect) in cells {
        let row = fixed_row(rows, method, alpha, kappa, start);
        let ok = match expect {
            Expect::Converges => row.status.is_converged(),
            Expect::Diverges => row.status.is_diverged(),
        };
        println!(
            "    {method} alpha={alpha} kappa={kappa} start={start:?}: {} ({} iterations), expected {expect:?}",
            row.status_label(),
            row.iterations
        );
        if !ok {
            failures.push(format!(
                "{method} kappa={kappa} start={start:?}: got {}",
                row.status
            ));
        }
    }
    report(criterion, &failures);
}

fn report(criterion: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("[PASS] {criterion}");
    } else {
        println!("[FAIL] {criterion}: {}", failures.join("; "));
        panic!("{criterion} failed: {failures:?}");
    }
}

#[test]
fn criterion_01_step_0_124() {
    use Expect::*;
    let mut cells = vec![
        ("sd", 1.0, [2.0, 2.0], Converges),
        ("sd", 1.0, [5.0, 5.0], Diverges),
        ("cg", 1.0, [2.0, 2.0], Diverges),
        ("cg", 1.0, [5.0, 5.0], Diverges),
    ];
    for m in ["sd", "cg"] {
        for s in STARTS {
            cells.push((m, 100.0, s, Diverges));
        }
    }
    check_cells("criterion 1: fixed alpha=0.124 verdicts", 0.124, &cells);
}

#[test]
fn criterion_02_step_0_0124() {
    let mut cells = Vec::new();
    for m in ["sd", "cg"] {
        for s in STARTS {
            cells.push((m, 1.0, s, Expect::Converges));
            cells.push((m, 100.0, s, Expect::Diverges));
        }
    }
    check_cells("criterion 2: fixed alpha=0.0124 verdicts", 0.0124, &cells);
}

#[test]
fn criterion_03_step_0_00124() {
    let mut cells = Vec::new();
    for m in ["sd", "cg"] {
        for s in STARTS {
            cells.push((m, 1.0, s, Expect::Converges));
        }
    }
    cells.push(("sd", 100.0, [2.0, 2.0], Expect::Converges));
    cells.push(("sd", 100.0, [5.0, 5.0], Expect::Diverges));
    for s in STARTS {
        let row = fixed_row(matrix_rows(), "cg", 0.00124, 100.0, s);
        println!(
            "    (recorded) cg alpha=0.00124 kappa=100 start={s:?}: {} ({} iterations)",
            row.status_label(),
            row.iterations
        );
    }
    check_cells("criterion 3: fixed alpha=0.00124 verdicts", 0.00124, &cells);
}

#[test]
fn criterion_04_step_0_000124() {
    assert_eq!(
        ExperimentMatrix::default().policy.max_iterations,
        10_000_000
    );
    let mut cells = Vec::new();
    for m in ["sd", "cg"] {
        for kappa in [1.0, 100.0] {
            for s in STARTS {
                cells.push((m, kappa, s, Expect::Converges));
            }
        }
    }
    check_cells(
        "criterion 4: fixed alpha=0.000124 converges everywhere",
        0.000124,
        &cells,
    );
}

#[test]
fn criterion_05_newton() {
    let mut failures = Vec::new();
    for row in matrix_rows().iter().filter(|r| r.method == Method::Newton) {
        println!(
            "    newton kappa={} start={:?}: {} ({} iterations)",
            row.kappa,
            row.start,
            row.status_label(),
            row.iterations
        );
        match row.status {
            RunStatus::Converged { iterations } if iterations <= 50 => {}
            other => failures.push(format!(
                "kappa={} start={:?}: {other}",
                row.kappa, row.start
            )),
        }
    }
    let f = Rosenbrock::new(1.0).unwrap();
    let run = newton_raphson(
        &f,
        &RealVector::from_slice(&[0.0, 0.0]).unwrap(),
        &TerminationPolicy::default(),
    )
    .unwrap();
    let fp = run.final_point.to_vec();
    println!("    newton kappa=1 start=(0,0): {} at {:?}", run.status, fp);
    if run.status != (RunStatus::Converged { iterations: 2 }) {
        failures.push(format!("(0,0) run: {}", run.status));
    }
    if fp.iter().any(|c| (c - 1.0).abs() > 1e-10) {
        failures.push(format!("(0,0) run ended at {fp:?}"));
    }
    report(
        "criterion 5: Newton converges in <= 50 iterations; (0,0) in exactly 2",
        &failures,
    );
}

#[test]
fn criterion_06_golden_fastest_for_unit_kappa() {
    let rows = matrix_rows();
    let mut failures = Vec::new();
    for start in STARTS {
        let order =
            compare_sd_variants(rows, 1.0, start).expect("all SD variants converge for kappa=1");
        println!("    kappa=1 start={start:?}: {}", describe(&order));
        let golden = order
            .iter()
            .find(|(v, _)| *v == SdVariant::GoldenSection)
            .unwrap()
            .1;
        let rivals: Vec<_> = order
            .iter()
            .filter(|(v, _)| *v != SdVariant::GoldenSection)
            .collect();
        if let Some((v, n)) = rivals.iter().find(|(_, n)| *n <= golden) {
            failures.push(format!(
                "start={start:?}: golden-section took {golden} iterations, {v} took {n}"
            ));
        }
    }
    for start in STARTS {
        match compare_sd_variants(rows, 100.0, start) {
            Ok(order) => println!(
                "    (recorded) kappa=100 start={start:?}: {}",
                describe(&order)
            ),
            Err(e) => println!("    (recorded) kappa=100 start={start:?}: {e}"),
        }
    }
    report(
        "criterion 6: golden section strictly fastest SD variant for kappa=1",
        &failures,
    );
}

fn describe(order: &[(SdVariant, usize)]) -> String {
    order
        .iter()
        .map(|(v, n)| format!("{v}={n}"))
        .collect::<Vec<_>>()
        .join(" < ")
}

#[test]
fn criterion_07_variable_step_converges() {
    let rows = matrix_rows();
    let mut failures = Vec::new();
    for kappa in [1.0, 100.0] {
        for start in STARTS {
            let row = rows
                .iter()
                .find(|r| {
                    r.method == Method::SteepestDescent(StepRule::default_variable())
                        && r.kappa == kappa
                        && r.start == start
                })
                .expect("variable row");
            println!(
                "    sd variable kappa={kappa} start={start:?}: {} ({} iterations)",
                row.status_label(),
                row.iterations
            );
            if !row.status.is_converged() {
                failures.push(format!("kappa={kappa} start={start:?}: {}", row.status));
            }
        }
    }
    report(
        "criterion 7: variable step {0.000124, 0.0124, 0.124} converges",
        &failures,
    );
}

/// Relative error, or absolute error when the analytic value is near zero.
fn derivative_error_ok(analytic: f64, numeric: f64) -> (bool, f64) {
    let err = (analytic - numeric).abs();
    if analytic.abs() < 1e-3 {
        (err <= 1e-7, err)
    } else {
        let rel = err / analytic.abs();
        (rel <= 1e-5, rel)
    }
}

#[test]
fn criterion_08_derivatives_match_finite_differences() {
    let mut failures = Vec::new();
    let probes: Vec<f64> = (0..5).map(|i| -2.0 + i as f64).collect();
    for kappa in [1.0, 100.0] {
        let f = Rosenbrock::new(kappa).unwrap();
        let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
        for &x1 in &probes {
            for &x2 in &probes {
                let p = RealVector::from_slice(&[x1, x2]).unwrap();
                let g = f.gradient(&p).unwrap();
                let fg = finite_diff_gradient(&f, &p, 1e-6).unwrap();
                for i in 0..2 {
                    let (ok, e) = derivative_error_ok(g[i], fg[i]);
                    worst_g = worst_g.max(e);
                    if !ok {
                        failures.push(format!(
                            "kappa={kappa} p=({x1},{x2}) grad[{i}]: {} vs {}",
                            g[i], fg[i]
                        ));
                    }
                }
                let h = f.hessian(&p).unwrap();
                let fh = finite_diff_hessian(&f, &p, 1e-4).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        let (ok, e) = derivative_error_ok(h[(i, j)], fh[(i, j)]);
                        worst_h = worst_h.max(e);
                        if !ok {
                            failures.push(format!(
                                "kappa={kappa} p=({x1},{x2}) hess[{i},{j}]: {} vs {}",
                                h[(i, j)],
                                fh[(i, j)]
                            ));
                        }
                    }
                }
            }
        }
        println!("    kappa={kappa}: worst gradient error {worst_g:.3e}, worst Hessian error {worst_h:.3e}");
    }
    report(
        "criterion 8: analytic derivatives match central differences",
        &failures,
    );
}

#[test]
fn criterion_09_line_search_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = rng.random_range(0.01..100.0);
        let vertex = rng.random_range(0.001..10.0);
        let c = rng.random_range(-10.0..10.0);
        let mut samples = [0.0f64; 3];
        loop {
            samples = samples.map(|_| rng.random_range(0.0..20.0));
            let gaps: [f64; 3] = [
                samples[0] - samples[1],
                samples[0] - samples[2],
                samples[1] - samples[2],
            ];
            if gaps.iter().all(|g| g.abs() > 1e-3) {
                break;
            }
        }
        let got = quadratic_fit_step(|t| a * (t - vertex) * (t - vertex) + c, &samples).unwrap();
        let rel = ((got - vertex) / vertex).abs();
        worst = worst.max(rel);
        if rel > 1e-10 {
            failures.push(format!(
                "quadfit vertex {vertex} (a={a}, samples {samples:?}) recovered as {got}"
            ));
        }
    }
    println!("    quadratic fit: worst vertex relative error {worst:.3e} over 200 parabolas");

    let golden = golden_section(|t| (t - 1.0) * (t - 1.0), 0.0, 2.0, 1e-6)
        .unwrap()
        .midpoint();
    println!("    golden section on (a-1)^2, [0,2]: {golden}");
    if (golden - 1.0).abs() > 1e-6 {
        failures.push(format!("golden returned {golden}"));
    }

    let f = Rosenbrock::new(1.0).unwrap();
    for trial in 0..100 {
        let x = RealVector::from_slice(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .unwrap();
        let d = RealVector::from_slice(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .unwrap();
        let n = rng.random_range(1..=5);
        let candidates: Vec<f64> = (0..n).map(|_| rng.random_range(1e-4..0.5)).collect();
        let line = restrict(&f, &x, &d).unwrap();
        let chosen = select_variable(&line, &candidates).unwrap();
        // brute force: smallest value, then smallest step
        let mut best = candidates[0];
        for &c in &candidates[1..] {
            let (vc, vb) = (line.phi(c), line.phi(best));
            if vc < vb || (vc == vb && c < best) {
                best = c;
            }
        }
        if chosen != best {
            failures.push(format!(
                "trial {trial}: variable chose {chosen}, brute force {best}"
            ));
        }
    }
    report(
        "criterion 9: quadratic-fit, golden-section and variable-step oracles",
        &failures,
    );
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
    // exact symmetry
    (&q + q.transpose()) * 0.5
}

#[test]
fn criterion_10_conjugate_gradient_theory() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let policy = TerminationPolicy::default().with_epsilon(1e-8);
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;
    for n in [2usize, 5] {
        for trial in 0..25 {
            let q = random_spd(&mut rng, n);
            let b =
                RealVector::from_dvector(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
                    .unwrap();
            let x0 =
                RealVector::from_dvector(DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0)))
                    .unwrap();
            let obj = QuadraticObjective::new(q.clone(), b).unwrap();
            let q_norm = q.clone().symmetric_eigen().eigenvalues.amax();

            let run =
                fletcher_reeves_cg(&obj, &x0, &StepRule::ExactQuadratic, &policy, None).unwrap();
            match run.status {
                RunStatus::Converged { iterations } if iterations <= n => {}
                other => failures.push(format!("n={n} trial {trial}: CG {other}")),
            }
            let dirs: Vec<DVector<f64>> = run
                .trajectory
                .windows(2)
                .map(|w| (w[1].point.as_dvector() - w[0].point.as_dvector()) / w[1].alpha_used)
                .collect();
            for i in 0..dirs.len() {
                for j in 0..dirs.len() {
                    if i == j {
                        continue;
                    }
                    let bound = dirs[i].norm() * dirs[j].norm() * q_norm;
                    let dot = dirs[i].dot(&(&q * &dirs[j])).abs();
                    worst_ratio = worst_ratio.max(dot / bound);
                    if dot > 1e-6 * bound {
                        failures.push(format!(
                            "n={n} trial {trial}: |d{i}^T Q d{j}| = {dot:.3e} > {:.3e}",
                            1e-6 * bound
                        ));
                    }
                }
            }

            let newton = newton_raphson(&obj, &x0, &policy).unwrap();
            if newton.status != (RunStatus::Converged { iterations: 1 }) {
                failures.push(format!("n={n} trial {trial}: Newton {}", newton.status));
            }
        }
    }
    println!("    worst |d_i^T Q d_j| / (|d_i||d_j||Q|) = {worst_ratio:.3e}");
    report(
        "criterion 10: FR-CG finite termination, Q-conjugacy, one-step Newton",
        &failures,
    );
}

fn csv_without_wall_clock(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    emit_results_csv(rows, &mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_11_deterministic_matrix() {
    let first = csv_without_wall_clock(matrix_rows());
    let again = run_matrix(&ExperimentMatrix::default()).unwrap();
    let second = csv_without_wall_clock(&again);
    let failures = if first == second {
        vec![]
    } else {
        vec!["CSV output differs between runs".to_string()]
    };
    println!("    {} data lines compared", first.lines().count() - 1);
    report(
        "criterion 11: repeated bench runs give identical CSV (excluding wall_ms)",
        &failures,
    );
}

#[test]
fn converged_rows_reverify_gradient_norm() {
    let rows = matrix_rows();
    assert_eq!(rows.len(), 48);
    for row in rows.iter().filter(|r| r.status.is_converged()) {
        let g = Rosenbrock::new(row.kappa)
            .unwrap()
            .gradient(&row.final_point)
            .unwrap();
        assert!(g.norm() <= 1e-3);
        assert!((g.norm() - row.final_grad_norm).abs() <= 1e-12);
    }
}
