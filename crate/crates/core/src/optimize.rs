//! Iteration drivers: steepest descent, Newton-Raphson and Fletcher-Reeves
//! conjugate gradient, sharing one termination policy and trajectory format.
//!
//! Convergence is tested on the gradient norm before every step, so a start at
//! a stationary point converges after zero iterations. Divergence is data, not
//! an error: it comes back as [`RunStatus::Diverged`].

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linesearch::{restrict, StepRule};
use crate::objective::Objective;
use crate::vector::RealVector;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;
pub const DEFAULT_BLOWUP_NORM: f64 = 1e8;

/// Relative determinant threshold below which a Hessian counts as singular.
const SINGULAR_DET_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationPolicy {
    /// Stop once `||grad f|| <= epsilon`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Declare divergence once `||x|| > blowup_norm`.
    pub blowup_norm: f64,
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        TerminationPolicy {
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            blowup_norm: DEFAULT_BLOWUP_NORM,
        }
    }
}

impl TerminationPolicy {
    pub fn new(epsilon: f64, max_iterations: usize, blowup_norm: f64) -> Result<Self> {
        let policy = TerminationPolicy {
            epsilon,
            max_iterations,
            blowup_norm,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        TerminationPolicy { epsilon, ..self }
    }

    pub fn with_max_iterations(self, max_iterations: usize) -> Self {
        TerminationPolicy {
            max_iterations,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.blowup_norm.is_nan() || self.blowup_norm <= self.epsilon {
            return Err(Error::InvalidInput(format!(
                "blowup_norm ({}) must exceed epsilon ({})",
                self.blowup_norm, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceReason {
    IterateBlowup,
    NonFiniteValue,
    SingularHessian,
}

impl fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceReason::IterateBlowup => "iterate-blowup",
            DivergenceReason::NonFiniteValue => "non-finite-value",
            DivergenceReason::SingularHessian => "singular-hessian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged {
        iterations: usize,
    },
    /// `iteration` is the index of the iterate that was rejected (or, for a
    /// singular Hessian, of the iterate whose Hessian could not be solved).
    Diverged {
        iteration: usize,
        reason: DivergenceReason,
    },
    MaxIterationsExceeded,
}

impl RunStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, RunStatus::Converged { .. })
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Converged { iterations } => {
                write!(f, "converged after {iterations} iterations")
            }
            RunStatus::Diverged { iteration, reason } => {
                write!(f, "diverged ({reason}) at iteration {iteration}")
            }
            RunStatus::MaxIterationsExceeded => write!(f, "iteration cap exceeded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub point: RealVector,
    pub value: f64,
    pub grad_norm: f64,
    /// Step size that produced this iterate; 0 for the start and for Newton.
    pub alpha_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub status: RunStatus,
    pub final_point: RealVector,
    pub final_value: f64,
    pub final_grad_norm: f64,
    /// `trajectory[0]` is the start; on divergence the rejected iterate is
    /// not included.
    pub trajectory: Vec<IterateRecord>,
}

impl RunResult {
    /// Iteration count for reporting: steps to convergence, the index at
    /// which divergence was detected, or the number of steps taken before
    /// hitting the cap.
    pub fn iterations(&self) -> usize {
        match self.status {
            RunStatus::Converged { iterations } => iterations,
            RunStatus::Diverged { iteration, .. } => iteration,
            RunStatus::MaxIterationsExceeded => self.trajectory.last().map_or(0, |r| r.k),
        }
    }
}

/// `||grad|| <= epsilon`, inclusive.
pub fn check_convergence(grad: &RealVector, epsilon: f64) -> bool {
    grad.norm() <= epsilon
}

/// Non-finite components or value first, then the iterate-norm guard.
pub fn detect_divergence(
    x: &[f64],
    value: f64,
    policy: &TerminationPolicy,
) -> Option<DivergenceReason> {
    if !value.is_finite() || x.iter().any(|c| !c.is_finite()) {
        return Some(DivergenceReason::NonFiniteValue);
    }
    let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > policy.blowup_norm {
        return Some(DivergenceReason::IterateBlowup);
    }
    None
}

/// Fletcher-Reeves search-direction state.
#[derive(Debug, Clone, PartialEq)]
pub struct CgState {
    /// Gradient at the current iterate.
    pub g: RealVector,
    /// Current search direction.
    pub d: RealVector,
    /// Most recent beta; 0 after a reset.
    pub beta: f64,
}

/// `beta = g_new^T g_new / g_old^T g_old`.
pub fn fletcher_reeves_beta(g_old: &RealVector, g_new: &RealVector) -> f64 {
    g_new.dot(g_new) / g_old.dot(g_old)
}

impl CgState {
    pub fn reset(g: RealVector) -> Self {
        let d = negate(&g);
        CgState { g, d, beta: 0.0 }
    }

    /// Moves to the next iterate's gradient, either resetting to steepest
    /// descent or applying `d <- -g_new + beta d`. Fails if the new direction
    /// overflows.
    pub fn advance(&mut self, g_new: RealVector, restart: bool) -> Result<()> {
        if restart {
            *self = CgState::reset(g_new);
            return Ok(());
        }
        let beta = fletcher_reeves_beta(&self.g, &g_new);
        let d = RealVector::from_dvector(-g_new.as_dvector() + self.d.as_dvector() * beta)?;
        *self = CgState { g: g_new, d, beta };
        Ok(())
    }
}

fn negate(v: &RealVector) -> RealVector {
    RealVector::from_dvector(-v.as_dvector()).expect("negation keeps components finite")
}

/// Bookkeeping shared by the three drivers.
struct Tracker<'p> {
    policy: &'p TerminationPolicy,
    trajectory: Vec<IterateRecord>,
    x: RealVector,
    value: f64,
    grad: RealVector,
    grad_norm: f64,
}

enum Advance {
    Accepted,
    Rejected(DivergenceReason),
}

impl<'p> Tracker<'p> {
    fn start(
        objective: &dyn Objective,
        x0: &RealVector,
        policy: &'p TerminationPolicy,
    ) -> Result<Self> {
        policy.validate()?;
        x0.expect_dim(objective.dim())?;
        let value = objective.value(x0)?;
        let grad = objective.gradient(x0)?;
        let grad_norm = grad.norm();
        let trajectory = vec![IterateRecord {
            k: 0,
            point: x0.clone(),
            value,
            grad_norm,
            alpha_used: 0.0,
        }];
        Ok(Tracker {
            policy,
            trajectory,
            x: x0.clone(),
            value,
            grad,
            grad_norm,
        })
    }

    fn k(&self) -> usize {
        self.trajectory.len() - 1
    }

    /// Terminal status at the current iterate, if any.
    fn check(&self) -> Option<RunStatus> {
        let k = self.k();
        if self.grad_norm <= self.policy.epsilon {
            return Some(RunStatus::Converged { iterations: k });
        }
        if k >= self.policy.max_iterations {
            return Some(RunStatus::MaxIterationsExceeded);
        }
        None
    }

    /// Validates and accepts a candidate iterate.
    fn advance(
        &mut self,
        objective: &dyn Objective,
        candidate: DVector<f64>,
        alpha: f64,
    ) -> Advance {
        let value = match RealVector::from_dvector(candidate.clone()) {
            Ok(p) => objective.value(&p).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        };
        if let Some(reason) = detect_divergence(candidate.as_slice(), value, self.policy) {
            return Advance::Rejected(reason);
        }
        let point = RealVector::from_dvector(candidate).expect("checked finite above");
        let grad = match objective.gradient(&point) {
            Ok(g) => g,
            Err(_) => return Advance::Rejected(DivergenceReason::NonFiniteValue),
        };
        self.grad_norm = grad.norm();
        self.grad = grad;
        self.value = value;
        self.x = point;
        let k = self.trajectory.len();
        self.trajectory.push(IterateRecord {
            k,
            point: self.x.clone(),
            value,
            grad_norm: self.grad_norm,
            alpha_used: alpha,
        });
        Advance::Accepted
    }

    fn diverged_next(self, reason: DivergenceReason) -> RunResult {
        let iteration = self.k() + 1;
        self.finish(RunStatus::Diverged { iteration, reason })
    }

    fn finish(self, status: RunStatus) -> RunResult {
        RunResult {
            status,
            final_point: self.x,
            final_value: self.value,
            final_grad_norm: self.grad_norm,
            trajectory: self.trajectory,
        }
    }
}

fn check_rule(objective: &dyn Objective, rule: &StepRule) -> Result<()> {
    rule.validate()?;
    if matches!(rule, StepRule::ExactQuadratic) && objective.as_quadratic().is_none() {
        return Err(Error::InvalidRule(
            "exact line minimization needs a quadratic objective".into(),
        ));
    }
    Ok(())
}

/// `x(k+1) = x(k) - alpha(k) grad f(x(k))` with `alpha(k)` chosen by `rule`
/// along `d = -grad f(x(k))`.
pub fn steepest_descent(
    objective: &dyn Objective,
    x0: &RealVector,
    rule: &StepRule,
    policy: &TerminationPolicy,
) -> Result<RunResult> {
    check_rule(objective, rule)?;
    let mut selector = rule.selector()?;
    let mut run = Tracker::start(objective, x0, policy)?;
    if let Some(reason) = detect_divergence(x0.as_slice(), run.value, policy) {
        return Ok(run.finish(RunStatus::Diverged {
            iteration: 0,
            reason,
        }));
    }
    loop {
        if let Some(status) = run.check() {
            return Ok(run.finish(status));
        }
        let d = negate(&run.grad);
        let alpha = match restrict(objective, &run.x, &d).and_then(|line| selector.select(&line)) {
            Ok(a) => a,
            Err(_) => return Ok(run.diverged_next(DivergenceReason::NonFiniteValue)),
        };
        let candidate = run.x.as_dvector() + d.as_dvector() * alpha;
        if let Advance::Rejected(reason) = run.advance(objective, candidate, alpha) {
            return Ok(run.diverged_next(reason));
        }
    }
}

/// Newton-Raphson: solve `F(x(k)) s = grad f(x(k))` by LU with partial
/// pivoting and set `x(k+1) = x(k) - s`.
///
/// No step size and no Hessian modification. A Hessian with
/// `|det F| < 1e-12 * max|F_ij|^n` ends the run as
/// [`DivergenceReason::SingularHessian`] at that iteration.
pub fn newton_raphson(
    objective: &dyn Objective,
    x0: &RealVector,
    policy: &TerminationPolicy,
) -> Result<RunResult> {
    let mut run = Tracker::start(objective, x0, policy)?;
    // surfaces Unsupported before any iteration
    objective.hessian(x0).map(|_| ()).or_else(|e| match e {
        Error::Unsupported(_) => Err(e),
        _ => Ok(()),
    })?;
    if let Some(reason) = detect_divergence(x0.as_slice(), run.value, policy) {
        return Ok(run.finish(RunStatus::Diverged {
            iteration: 0,
            reason,
        }));
    }
    let n = objective.dim();
    loop {
        if let Some(status) = run.check() {
            return Ok(run.finish(status));
        }
        let k = run.k();
        let hessian = match objective.hessian(&run.x) {
            Ok(h) => h,
            Err(_) => return Ok(run.diverged_next(DivergenceReason::NonFiniteValue)),
        };
        let scale = hessian.amax();
        let lu = hessian.lu();
        let det = lu.determinant();
        let floor = SINGULAR_DET_RATIO * scale.powi(n as i32);
        if scale == 0.0 || det.is_nan() || det.abs() < floor {
            let reason = DivergenceReason::SingularHessian;
            return Ok(run.finish(RunStatus::Diverged {
                iteration: k,
                reason,
            }));
        }
        let Some(step) = lu.solve(run.grad.as_dvector()) else {
            let reason = DivergenceReason::SingularHessian;
            return Ok(run.finish(RunStatus::Diverged {
                iteration: k,
                reason,
            }));
        };
        let candidate = run.x.as_dvector() - step;
        if let Advance::Rejected(reason) = run.advance(objective, candidate, 0.0) {
            return Ok(run.diverged_next(reason));
        }
    }
}

/// Fletcher-Reeves nonlinear conjugate gradient.
///
/// `d(0) = -g(0)`, `x(k+1) = x(k) + alpha(k) d(k)`,
/// `d(k+1) = -g(k+1) + beta(k) d(k)` with the Fletcher-Reeves beta. With
/// `restart_period = Some(p)` the direction is reset to `-g` after every
/// `p`-th step. There is no descent check: with a fixed step an ascent
/// direction is followed as-is.
pub fn fletcher_reeves_cg(
    objective: &dyn Objective,
    x0: &RealVector,
    rule: &StepRule,
    policy: &TerminationPolicy,
    restart_period: Option<usize>,
) -> Result<RunResult> {
    check_rule(objective, rule)?;
    if restart_period == Some(0) {
        return Err(Error::InvalidInput(
            "restart period must be at least 1".into(),
        ));
    }
    let mut selector = rule.selector()?;
    let mut run = Tracker::start(objective, x0, policy)?;
    if let Some(reason) = detect_divergence(x0.as_slice(), run.value, policy) {
        return Ok(run.finish(RunStatus::Diverged {
            iteration: 0,
            reason,
        }));
    }
    let mut cg = CgState::reset(run.grad.clone());
    loop {
        if let Some(status) = run.check() {
            return Ok(run.finish(status));
        }
        let alpha = match restrict(objective, &run.x, &cg.d).and_then(|line| selector.select(&line))
        {
            Ok(a) => a,
            Err(_) => return Ok(run.diverged_next(DivergenceReason::NonFiniteValue)),
        };
        let candidate = run.x.as_dvector() + cg.d.as_dvector() * alpha;
        if let Advance::Rejected(reason) = run.advance(objective, candidate, alpha) {
            return Ok(run.diverged_next(reason));
        }
        let restart = restart_period.is_some_and(|p| run.k() % p == 0);
        if cg.advance(run.grad.clone(), restart).is_err() {
            return Ok(run.diverged_next(DivergenceReason::NonFiniteValue));
        }
    }
}
