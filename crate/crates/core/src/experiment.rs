//! The Rosenbrock experiment matrix: every optimizer and step rule against
//! both `kappa` values and both starting points, with CSV output for result
//! tables, trajectories and level-curve grids.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linesearch::StepRule;
use crate::objective::Rosenbrock;
use crate::optimize::{
    fletcher_reeves_cg, newton_raphson, steepest_descent, DivergenceReason, RunResult, RunStatus,
    TerminationPolicy,
};
use crate::vector::RealVector;

pub const DEFAULT_KAPPAS: [f64; 2] = [1.0, 100.0];
pub const DEFAULT_STARTS: [[f64; 2]; 2] = [[2.0, 2.0], [5.0, 5.0]];
pub const DEFAULT_FIXED_ALPHAS: [f64; 4] = [0.124, 0.0124, 0.00124, 0.000124];

pub const RESULTS_HEADER: [&str; 10] = [
    "method",
    "step_rule",
    "kappa",
    "x0_1",
    "x0_2",
    "status",
    "iterations",
    "final_f",
    "final_grad_norm",
    "wall_ms",
];

/// A fully specified optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    SteepestDescent(StepRule),
    Newton,
    FletcherReeves {
        rule: StepRule,
        restart_period: Option<usize>,
    },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::SteepestDescent(_) => "sd",
            Method::Newton => "newton",
            Method::FletcherReeves { .. } => "cg",
        }
    }

    pub fn rule(&self) -> Option<&StepRule> {
        match self {
            Method::SteepestDescent(rule) | Method::FletcherReeves { rule, .. } => Some(rule),
            Method::Newton => None,
        }
    }

    /// Step-rule text for the results table; `none` for Newton.
    pub fn rule_label(&self) -> String {
        self.rule()
            .map_or_else(|| "none".to_string(), StepRule::to_string)
    }

    pub fn run(
        &self,
        objective: &Rosenbrock,
        x0: &RealVector,
        policy: &TerminationPolicy,
    ) -> Result<RunResult> {
        match self {
            Method::SteepestDescent(rule) => steepest_descent(objective, x0, rule, policy),
            Method::Newton => newton_raphson(objective, x0, policy),
            Method::FletcherReeves {
                rule,
                restart_period,
            } => fletcher_reeves_cg(objective, x0, rule, policy, *restart_period),
        }
    }
}

/// A method entry in the matrix. The fixed-step families expand over
/// [`ExperimentMatrix::fixed_alphas`].
#[derive(Debug, Clone, PartialEq)]
pub enum MethodFamily {
    SteepestDescentFixed,
    SteepestDescent(StepRule),
    Newton,
    FletcherReevesFixed { restart_period: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrix {
    pub kappas: Vec<f64>,
    pub starts: Vec<[f64; 2]>,
    pub fixed_alphas: Vec<f64>,
    pub methods: Vec<MethodFamily>,
    pub policy: TerminationPolicy,
}

impl Default for ExperimentMatrix {
    /// Both kappas, both starts, the four fixed step sizes, and every method:
    /// SD with fixed/variable/quadratic-fit/golden steps, Newton, and FR-CG
    /// with fixed steps; `epsilon = 1e-3`.
    fn default() -> Self {
        ExperimentMatrix {
            kappas: DEFAULT_KAPPAS.to_vec(),
            starts: DEFAULT_STARTS.to_vec(),
            fixed_alphas: DEFAULT_FIXED_ALPHAS.to_vec(),
            methods: vec![
                MethodFamily::SteepestDescentFixed,
                MethodFamily::SteepestDescent(StepRule::default_variable()),
                MethodFamily::SteepestDescent(StepRule::default_quadratic_fit()),
                MethodFamily::SteepestDescent(StepRule::default_golden()),
                MethodFamily::Newton,
                MethodFamily::FletcherReevesFixed {
                    restart_period: None,
                },
            ],
            policy: TerminationPolicy::default(),
        }
    }
}

impl ExperimentMatrix {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        for &k in &self.kappas {
            Rosenbrock::new(k)?;
        }
        for s in &self.starts {
            RealVector::from_slice(s)?;
        }
        for &a in &self.fixed_alphas {
            StepRule::fixed(a)?;
        }
        for m in &self.methods {
            if let MethodFamily::SteepestDescent(rule) = m {
                if matches!(rule, StepRule::ExactQuadratic) {
                    return Err(Error::InvalidRule(
                        "exact line minimization needs a quadratic objective".into(),
                    ));
                }
                rule.validate()?;
            }
            if let MethodFamily::FletcherReevesFixed {
                restart_period: Some(0),
            } = m
            {
                return Err(Error::InvalidInput(
                    "restart period must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Concrete methods in matrix order.
    pub fn expanded_methods(&self) -> Vec<Method> {
        let fixed = |a: f64| StepRule::Fixed { alpha: a };
        self.methods
            .iter()
            .flat_map(|family| -> Vec<Method> {
                match family {
                    MethodFamily::SteepestDescentFixed => self
                        .fixed_alphas
                        .iter()
                        .map(|&a| Method::SteepestDescent(fixed(a)))
                        .collect(),
                    MethodFamily::SteepestDescent(rule) => {
                        vec![Method::SteepestDescent(rule.clone())]
                    }
                    MethodFamily::Newton => vec![Method::Newton],
                    MethodFamily::FletcherReevesFixed { restart_period } => self
                        .fixed_alphas
                        .iter()
                        .map(|&a| Method::FletcherReeves {
                            rule: fixed(a),
                            restart_period: *restart_period,
                        })
                        .collect(),
                }
            })
            .collect()
    }

    /// Every `(method, kappa, start)` cell: methods outermost, then kappa,
    /// then start.
    pub fn cells(&self) -> Vec<(Method, f64, [f64; 2])> {
        let mut cells = Vec::new();
        for method in self.expanded_methods() {
            for &kappa in &self.kappas {
                for &start in &self.starts {
                    cells.push((method.clone(), kappa, start));
                }
            }
        }
        cells
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub kappa: f64,
    pub start: [f64; 2],
    pub status: RunStatus,
    pub iterations: usize,
    pub final_point: RealVector,
    pub final_value: f64,
    pub final_grad_norm: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    pub fn method_label(&self) -> &'static str {
        self.method.label()
    }

    pub fn step_rule_label(&self) -> String {
        self.method.rule_label()
    }

    pub fn status_label(&self) -> &'static str {
        status_label(&self.status)
    }
}

pub fn status_label(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::Converged { .. } => "converged",
        RunStatus::Diverged {
            reason: DivergenceReason::IterateBlowup,
            ..
        } => "diverged_blowup",
        RunStatus::Diverged {
            reason: DivergenceReason::NonFiniteValue,
            ..
        } => "diverged_nonfinite",
        RunStatus::Diverged {
            reason: DivergenceReason::SingularHessian,
            ..
        } => "diverged_singular_hessian",
        RunStatus::MaxIterationsExceeded => "max_iter",
    }
}

pub fn run_cell(
    method: &Method,
    kappa: f64,
    start: [f64; 2],
    policy: &TerminationPolicy,
) -> Result<ResultRow> {
    let objective = Rosenbrock::new(kappa)?;
    let x0 = RealVector::from_slice(&start)?;
    let clock = Instant::now();
    let run = method.run(&objective, &x0, policy)?;
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(ResultRow {
        method: method.clone(),
        kappa,
        start,
        status: run.status,
        iterations: run.iterations(),
        final_point: run.final_point,
        final_value: run.final_value,
        final_grad_norm: run.final_grad_norm,
        wall_ms,
    })
}

/// Runs every cell (in parallel) and returns rows in matrix order.
pub fn run_matrix(matrix: &ExperimentMatrix) -> Result<Vec<ResultRow>> {
    matrix.validate()?;
    matrix
        .cells()
        .par_iter()
        .map(|(method, kappa, start)| run_cell(method, *kappa, *start, &matrix.policy))
        .collect()
}

/// Steepest-descent step-rule families compared by iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SdVariant {
    Fixed,
    GoldenSection,
    QuadraticFit,
    Variable,
}

impl SdVariant {
    pub const ALL: [SdVariant; 4] = [
        SdVariant::Fixed,
        SdVariant::Variable,
        SdVariant::QuadraticFit,
        SdVariant::GoldenSection,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SdVariant::Fixed => "fixed",
            SdVariant::GoldenSection => "golden-section",
            SdVariant::QuadraticFit => "quadratic-fit",
            SdVariant::Variable => "variable",
        }
    }

    fn of(rule: &StepRule) -> Option<SdVariant> {
        match rule {
            StepRule::Fixed { .. } => Some(SdVariant::Fixed),
            StepRule::VariableCandidates { .. } => Some(SdVariant::Variable),
            StepRule::QuadraticFit { .. } => Some(SdVariant::QuadraticFit),
            StepRule::GoldenSection { .. } => Some(SdVariant::GoldenSection),
            StepRule::ExactQuadratic => None,
        }
    }
}

impl fmt::Display for SdVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Orders the four steepest-descent variants for one `(kappa, start)` by
/// iteration count, ties broken by label.
///
/// The fixed variant is the fixed-step row with the smallest `alpha`. If a
/// family has several rows, the first one in `rows` is used.
pub fn compare_sd_variants(
    rows: &[ResultRow],
    kappa: f64,
    start: [f64; 2],
) -> Result<Vec<(SdVariant, usize)>> {
    let mut picked: Vec<(SdVariant, &ResultRow)> = Vec::new();
    for row in rows.iter().filter(|r| r.kappa == kappa && r.start == start) {
        let Method::SteepestDescent(rule) = &row.method else {
            continue;
        };
        let Some(variant) = SdVariant::of(rule) else {
            continue;
        };
        match picked.iter_mut().find(|(v, _)| *v == variant) {
            Some((_, current)) => {
                if let (StepRule::Fixed { alpha: new }, Some(StepRule::Fixed { alpha: old })) =
                    (rule, current.method.rule())
                {
                    if new < old {
                        *current = row;
                    }
                }
            }
            None => picked.push((variant, row)),
        }
    }
    let mut ordering = Vec::with_capacity(4);
    for variant in SdVariant::ALL {
        let row = picked
            .iter()
            .find(|(v, _)| *v == variant)
            .map(|(_, r)| *r)
            .ok_or_else(|| {
                Error::Incomparable(format!(
                    "no {variant} row for kappa={kappa}, start={start:?}"
                ))
            })?;
        match row.status {
            RunStatus::Converged { iterations } => ordering.push((variant, iterations)),
            other => {
                return Err(Error::Incomparable(format!(
                    "{variant} did not converge for kappa={kappa}, start={start:?}: {other}"
                )))
            }
        }
    }
    ordering.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.label().cmp(b.0.label())));
    Ok(ordering)
}

/// Rosenbrock values on a uniform grid, endpoints included.
/// `values[i][j]` is the value at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub kappa: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
    pub values: Vec<Vec<f64>>,
}

fn axis(range: (f64, f64), resolution: usize) -> Vec<f64> {
    let (lo, hi) = range;
    let last = resolution - 1;
    (0..resolution)
        .map(|i| {
            if i == last {
                hi
            } else {
                lo + (hi - lo) * i as f64 / last as f64
            }
        })
        .collect()
}

impl ContourGrid {
    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_range, self.resolution)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.y_range, self.resolution)
    }

    /// Grid indices and value of the smallest entry (first in row-major order
    /// on ties).
    pub fn argmin(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }
}

pub fn contour_grid(
    kappa: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<ContourGrid> {
    let f = Rosenbrock::new(kappa)?;
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    for (name, (lo, hi)) in [("x", x_range), ("y", y_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "degenerate {name} range [{lo}, {hi}]"
            )));
        }
    }
    let xs = axis(x_range, resolution);
    let ys = axis(y_range, resolution);
    let values = xs
        .iter()
        .map(|&x| ys.iter().map(|&y| f.eval(x, y)).collect())
        .collect();
    Ok(ContourGrid {
        kappa,
        x_range,
        y_range,
        resolution,
        values,
    })
}

/// Reals in output files: 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

pub fn emit_results_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(RESULTS_HEADER)?;
    for row in rows {
        w.write_record([
            row.method_label().to_string(),
            row.step_rule_label(),
            format_real(row.kappa),
            format_real(row.start[0]),
            format_real(row.start[1]),
            row.status_label().to_string(),
            row.iterations.to_string(),
            format_real(row.final_value),
            format_real(row.final_grad_norm),
            format_real(row.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `k,x1,...,xn,f,grad_norm,alpha`; for the two-dimensional
/// objectives this is `k,x1,x2,f,grad_norm,alpha`.
pub fn emit_trajectory_csv<W: Write>(result: &RunResult, sink: W) -> Result<()> {
    let n = result.final_point.dim();
    let mut w = writer(sink);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(["f", "grad_norm", "alpha"].map(String::from));
    w.write_record(&header)?;
    for rec in &result.trajectory {
        let mut line = vec![rec.k.to_string()];
        line.extend(rec.point.as_slice().iter().map(|&c| format_real(c)));
        line.extend([
            format_real(rec.value),
            format_real(rec.grad_norm),
            format_real(rec.alpha_used),
        ]);
        w.write_record(&line)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `x,y,f`, then one line per grid point in row-major order.
pub fn emit_grid_csv<W: Write>(grid: &ContourGrid, sink: W) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["x", "y", "f"])?;
    let ys = grid.ys();
    for (x, row) in grid.xs().iter().zip(&grid.values) {
        for (y, v) in ys.iter().zip(row) {
            w.write_record([format_real(*x), format_real(*y), format_real(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}
