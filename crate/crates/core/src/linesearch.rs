//! Step-size selection along a search direction.
//!
//! Every selector works on the one-dimensional restriction
//! `phi(alpha) = f(x + alpha * d)`. Steepest descent uses `d = -grad f(x)`;
//! conjugate gradient passes its own direction.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objective::{Objective, QuadraticObjective};
use crate::vector::RealVector;

/// Golden-section contraction ratio `(sqrt(5) - 1) / 2`.
pub const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;

pub const DEFAULT_VARIABLE_CANDIDATES: [f64; 3] = [0.000124, 0.0124, 0.124];
pub const DEFAULT_QUADFIT_SAMPLES: [f64; 3] = [1e-5, 6.7e-5, 1.24e-4];
pub const DEFAULT_GOLDEN_LO: f64 = 1.24e-6;
pub const DEFAULT_GOLDEN_HI: f64 = 1.5;
pub const DEFAULT_GOLDEN_TOL: f64 = 1e-8;

/// Below this leading coefficient a fitted parabola is treated as flat.
const QUADFIT_MIN_CURVATURE: f64 = 1e-18;

/// How the step size `alpha` is chosen at each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// The same `alpha` every iteration.
    Fixed { alpha: f64 },
    /// Try each candidate and keep the one with the smallest `phi`.
    VariableCandidates { alphas: Vec<f64> },
    /// Interpolate a parabola through three samples of `phi` and step to its
    /// vertex. With `random_seed` set, the three samples are redrawn each
    /// iteration uniformly from `[min(samples), max(samples)]`.
    QuadraticFit {
        samples: [f64; 3],
        random_seed: Option<u64>,
    },
    /// Golden-section search on `[lo, hi]` until the bracket is narrower than
    /// `width_tol`.
    GoldenSection { lo: f64, hi: f64, width_tol: f64 },
    /// Exact minimization along the line; quadratic objectives only.
    ExactQuadratic,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRule(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl StepRule {
    pub fn fixed(alpha: f64) -> Result<Self> {
        let rule = StepRule::Fixed { alpha };
        rule.validate()?;
        Ok(rule)
    }

    pub fn variable(alphas: Vec<f64>) -> Result<Self> {
        let rule = StepRule::VariableCandidates { alphas };
        rule.validate()?;
        Ok(rule)
    }

    pub fn quadratic_fit(samples: [f64; 3]) -> Result<Self> {
        let rule = StepRule::QuadraticFit {
            samples,
            random_seed: None,
        };
        rule.validate()?;
        Ok(rule)
    }

    /// Random-sample quadratic fit drawing from `[lo, hi]`.
    pub fn quadratic_fit_random(lo: f64, hi: f64, seed: u64) -> Result<Self> {
        let rule = StepRule::QuadraticFit {
            samples: [lo, 0.5 * (lo + hi), hi],
            random_seed: Some(seed),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn golden(lo: f64, hi: f64, width_tol: f64) -> Result<Self> {
        let rule = StepRule::GoldenSection { lo, hi, width_tol };
        rule.validate()?;
        Ok(rule)
    }

    pub fn default_variable() -> Self {
        StepRule::VariableCandidates {
            alphas: DEFAULT_VARIABLE_CANDIDATES.to_vec(),
        }
    }

    pub fn default_quadratic_fit() -> Self {
        StepRule::QuadraticFit {
            samples: DEFAULT_QUADFIT_SAMPLES,
            random_seed: None,
        }
    }

    pub fn default_golden() -> Self {
        StepRule::GoldenSection {
            lo: DEFAULT_GOLDEN_LO,
            hi: DEFAULT_GOLDEN_HI,
            width_tol: DEFAULT_GOLDEN_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepRule::Fixed { alpha } => positive("alpha", *alpha),
            StepRule::VariableCandidates { alphas } => {
                if alphas.is_empty() {
                    return Err(Error::InvalidRule(
                        "variable rule needs at least one candidate".into(),
                    ));
                }
                alphas
                    .iter()
                    .try_for_each(|a| positive("candidate alpha", *a))
            }
            StepRule::QuadraticFit {
                samples,
                random_seed,
            } => {
                if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
                    return Err(Error::InvalidRule(format!(
                        "quadratic-fit samples must be finite and >= 0, got {samples:?}"
                    )));
                }
                if !samples.iter().any(|s| *s > 0.0) {
                    return Err(Error::InvalidRule(
                        "quadratic-fit needs at least one positive sample".into(),
                    ));
                }
                let distinct = samples[0] != samples[1]
                    && samples[0] != samples[2]
                    && samples[1] != samples[2];
                if random_seed.is_none() && !distinct {
                    return Err(Error::InvalidRule(format!(
                        "quadratic-fit samples must be distinct, got {samples:?}"
                    )));
                }
                if random_seed.is_some() && min3(samples) >= max3(samples) {
                    return Err(Error::InvalidRule(
                        "random quadratic-fit range is empty".into(),
                    ));
                }
                Ok(())
            }
            StepRule::GoldenSection { lo, hi, width_tol } => {
                if !(lo.is_finite() && *lo >= 0.0 && hi.is_finite()) {
                    return Err(Error::InvalidRule(format!(
                        "golden interval must be finite with lo >= 0, got [{lo}, {hi}]"
                    )));
                }
                positive("golden width_tol", *width_tol)?;
                if hi - lo <= *width_tol {
                    return Err(Error::InvalidRule(format!(
                        "golden interval [{lo}, {hi}] must be wider than width_tol {width_tol}"
                    )));
                }
                Ok(())
            }
            StepRule::ExactQuadratic => Ok(()),
        }
    }

    /// Short family name: `fixed`, `variable`, `quadfit`, `golden` or `exact`.
    pub fn kind(&self) -> &'static str {
        match self {
            StepRule::Fixed { .. } => "fixed",
            StepRule::VariableCandidates { .. } => "variable",
            StepRule::QuadraticFit { .. } => "quadfit",
            StepRule::GoldenSection { .. } => "golden",
            StepRule::ExactQuadratic => "exact",
        }
    }

    /// Fresh per-run selector. Random quadratic-fit state starts from the seed.
    pub fn selector(&self) -> Result<StepSelector> {
        self.validate()?;
        let rng = match self {
            StepRule::QuadraticFit {
                random_seed: Some(seed),
                ..
            } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        Ok(StepSelector {
            rule: self.clone(),
            rng,
        })
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Formats in the textual grammar accepted by [`FromStr`]:
/// `fixed:<a>`, `variable:<a1,a2,...>`, `quadfit:<a1,a2,a3>`,
/// `golden:<lo>:<hi>[:tol]`, `exact`.
impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::Fixed { alpha } => write!(f, "fixed:{alpha}"),
            StepRule::VariableCandidates { alphas } => write!(f, "variable:{}", join(alphas)),
            StepRule::QuadraticFit {
                samples,
                random_seed: None,
            } => write!(f, "quadfit:{}", join(samples)),
            StepRule::QuadraticFit {
                samples,
                random_seed: Some(seed),
            } => {
                write!(f, "quadfit:{},{}@seed={seed}", min3(samples), max3(samples))
            }
            StepRule::GoldenSection { lo, hi, width_tol } => {
                write!(f, "golden:{lo}:{hi}:{width_tol}")
            }
            StepRule::ExactQuadratic => write!(f, "exact"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::InvalidRule(format!("malformed number {t:?}")))
        })
        .collect()
}

impl FromStr for StepRule {
    type Err = Error;

    /// A bare family name (`variable`, `quadfit`, `golden`) selects its
    /// defaults.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, args) {
            ("fixed", Some(a)) => {
                let v = parse_list(a)?;
                match v.as_slice() {
                    [alpha] => StepRule::fixed(*alpha),
                    _ => Err(Error::InvalidRule(format!(
                        "fixed takes one step size, got {a:?}"
                    ))),
                }
            }
            ("variable", None) => Ok(StepRule::default_variable()),
            ("variable", Some(a)) => StepRule::variable(parse_list(a)?),
            ("quadfit", None) => Ok(StepRule::default_quadratic_fit()),
            ("quadfit", Some(a)) => {
                let v = parse_list(a)?;
                let samples: [f64; 3] = v.as_slice().try_into().map_err(|_| {
                    Error::InvalidRule(format!("quadfit takes three samples, got {a:?}"))
                })?;
                StepRule::quadratic_fit(samples)
            }
            ("golden", None) => Ok(StepRule::default_golden()),
            ("golden", Some(a)) => {
                let parts = a
                    .split(':')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidRule(format!("malformed number {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                match parts.as_slice() {
                    [lo, hi] => StepRule::golden(*lo, *hi, DEFAULT_GOLDEN_TOL),
                    [lo, hi, tol] => StepRule::golden(*lo, *hi, *tol),
                    _ => Err(Error::InvalidRule(format!(
                        "golden expects <lo>:<hi>[:tol], got {a:?}"
                    ))),
                }
            }
            ("exact", None) => Ok(StepRule::ExactQuadratic),
            _ => Err(Error::InvalidRule(format!("unrecognised step rule {s:?}"))),
        }
    }
}

fn min3(s: &[f64; 3]) -> f64 {
    s[0].min(s[1]).min(s[2])
}

fn max3(s: &[f64; 3]) -> f64 {
    s[0].max(s[1]).max(s[2])
}

/// `phi(alpha) = f(x + alpha d)` for a fixed base point and nonzero direction.
pub struct LineRestriction<'a> {
    objective: &'a dyn Objective,
    base: &'a RealVector,
    direction: &'a RealVector,
}

/// Builds the restriction of `objective` to the line through `x` along `d`.
pub fn restrict<'a>(
    objective: &'a dyn Objective,
    x: &'a RealVector,
    d: &'a RealVector,
) -> Result<LineRestriction<'a>> {
    x.expect_dim(objective.dim())?;
    d.expect_dim(objective.dim())?;
    let norm = d.norm();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::InvalidDirection("search direction is zero".into()));
    }
    Ok(LineRestriction {
        objective,
        base: x,
        direction: d,
    })
}

impl<'a> LineRestriction<'a> {
    pub fn objective(&self) -> &'a dyn Objective {
        self.objective
    }

    pub fn base(&self) -> &'a RealVector {
        self.base
    }

    pub fn direction(&self) -> &'a RealVector {
        self.direction
    }

    /// `x + alpha d`, component-wise; may contain non-finite entries.
    pub fn point_at(&self, alpha: f64) -> DVector<f64> {
        self.base.as_dvector() + self.direction.as_dvector() * alpha
    }

    /// Evaluates `phi`. Returns NaN when the trial point or its value is not
    /// finite.
    pub fn phi(&self, alpha: f64) -> f64 {
        match RealVector::from_dvector(self.point_at(alpha)) {
            Ok(p) => self.objective.value(&p).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    }
}

pub fn select_fixed(alpha: f64) -> f64 {
    alpha
}

/// Candidate with the smallest finite `phi`; ties go to the smaller step.
pub fn variable_step(phi: impl Fn(f64) -> f64, candidates: &[f64]) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &alpha in candidates {
        let value = phi(alpha);
        if !value.is_finite() {
            continue;
        }
        best = match best {
            Some((ba, bv)) if bv < value || (bv == value && ba <= alpha) => Some((ba, bv)),
            _ => Some((alpha, value)),
        };
    }
    best.map(|(a, _)| a).ok_or_else(|| {
        Error::LineSearchFailed("every candidate step gives a non-finite value".into())
    })
}

pub fn select_variable(line: &LineRestriction<'_>, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidRule(
            "variable rule needs at least one candidate".into(),
        ));
    }
    variable_step(|a| line.phi(a), candidates)
}

/// `g(alpha) = a alpha^2 + b alpha + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parabola {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Parabola {
    /// Vertex `-b / 2a`, if the parabola opens upward.
    pub fn vertex(&self) -> Option<f64> {
        (self.a > 0.0).then(|| -self.b / (2.0 * self.a))
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        (self.a * alpha + self.b) * alpha + self.c
    }
}

/// Solves the 3x3 interpolation system through three `(alpha, phi)` samples.
///
/// Uses Newton divided differences, which is the same solution as the
/// Vandermonde system but without forming it.
pub fn fit_parabola(points: [(f64, f64); 3]) -> Result<Parabola> {
    let [(a1, y1), (a2, y2), (a3, y3)] = points;
    if a1 == a2 || a1 == a3 || a2 == a3 {
        return Err(Error::InvalidRule(
            "interpolation abscissae must be distinct".into(),
        ));
    }
    let d12 = (y2 - y1) / (a2 - a1);
    let d23 = (y3 - y2) / (a3 - a2);
    let a = (d23 - d12) / (a3 - a1);
    let b = d12 - a * (a1 + a2);
    let c = y1 - (a * a1 + b) * a1;
    Ok(Parabola { a, b, c })
}

/// Quadratic-fit step through samples of `phi` at `samples`.
///
/// Returns the vertex when the fit is convex and the vertex is positive;
/// otherwise the positive sample with the smallest finite `phi` (ties to the
/// smaller step).
pub fn quadratic_fit_step(phi: impl Fn(f64) -> f64, samples: &[f64; 3]) -> Result<f64> {
    let values = samples.map(&phi);
    if values.iter().all(|v| v.is_finite()) {
        let fit = fit_parabola([
            (samples[0], values[0]),
            (samples[1], values[1]),
            (samples[2], values[2]),
        ])?;
        if fit.a > QUADFIT_MIN_CURVATURE {
            let vertex = -fit.b / (2.0 * fit.a);
            if vertex.is_finite() && vertex > 0.0 {
                return Ok(vertex);
            }
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for (&alpha, &value) in samples.iter().zip(&values) {
        if alpha <= 0.0 || !value.is_finite() {
            continue;
        }
        best = match best {
            Some((ba, bv)) if bv < value || (bv == value && ba <= alpha) => Some((ba, bv)),
            _ => Some((alpha, value)),
        };
    }
    best.map(|(a, _)| a)
        .ok_or_else(|| Error::LineSearchFailed("quadratic fit: no finite positive sample".into()))
}

pub fn select_quadratic_fit(line: &LineRestriction<'_>, samples: &[f64; 3]) -> Result<f64> {
    quadratic_fit_step(|a| line.phi(a), samples)
}

/// Final state of a golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenBracket {
    pub lo: f64,
    pub width: f64,
    /// Number of contractions performed.
    pub iterations: usize,
}

impl GoldenBracket {
    pub fn hi(&self) -> f64 {
        self.lo + self.width
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * self.width
    }
}

/// Shrinks `[lo, hi]` by [`GOLDEN_RATIO`] per step, keeping the side with the
/// smaller interior probe, until the width is at most `width_tol`.
///
/// The bracket is carried as `(lo, width)`, so after `m` steps the width is
/// `(hi - lo) * rho^m` up to one rounding per step. One new evaluation per
/// step; ties keep the left (smaller-step) side.
pub fn golden_section(
    phi: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    width_tol: f64,
) -> Result<GoldenBracket> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidRule(format!(
            "golden interval [{lo}, {hi}] is empty"
        )));
    }
    positive("golden width_tol", width_tol)?;
    let eval = |alpha: f64| -> Result<f64> {
        let v = phi(alpha);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::LineSearchFailed(format!(
                "golden section hit a non-finite value at alpha = {alpha}"
            )))
        }
    };
    let inner = 1.0 - GOLDEN_RATIO;
    let mut lo = lo;
    let mut width = hi - lo;
    let mut x1 = lo + inner * width;
    let mut x2 = lo + GOLDEN_RATIO * width;
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut iterations = 0;
    while width > width_tol {
        width *= GOLDEN_RATIO;
        if f1 <= f2 {
            x2 = x1;
            f2 = f1;
            x1 = lo + inner * width;
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN_RATIO * width;
            f2 = eval(x2)?;
        }
        iterations += 1;
    }
    Ok(GoldenBracket {
        lo,
        width,
        iterations,
    })
}

pub fn select_golden_section(
    line: &LineRestriction<'_>,
    lo: f64,
    hi: f64,
    width_tol: f64,
) -> Result<f64> {
    golden_section(|a| line.phi(a), lo, hi, width_tol).map(|b| b.midpoint())
}

/// `alpha = -(g^T d) / (d^T Q d)`: the exact minimizer of a quadratic along `d`.
pub fn exact_quadratic_step(q: &QuadraticObjective, x: &RealVector, d: &RealVector) -> Result<f64> {
    let curvature = q.curvature(d)?;
    if curvature.is_nan() || curvature <= 0.0 {
        return Err(Error::InvalidDirection(format!(
            "d^T Q d = {curvature} is not positive"
        )));
    }
    let g = q.gradient(x)?;
    Ok(-g.dot(d) / curvature)
}

pub fn select_exact_quadratic(line: &LineRestriction<'_>) -> Result<f64> {
    let q = line.objective().as_quadratic().ok_or_else(|| {
        Error::InvalidRule("exact line minimization needs a quadratic objective".into())
    })?;
    exact_quadratic_step(q, line.base(), line.direction())
}

/// Per-run step selection state for a [`StepRule`].
#[derive(Debug, Clone)]
pub struct StepSelector {
    rule: StepRule,
    rng: Option<ChaCha8Rng>,
}

impl StepSelector {
    pub fn rule(&self) -> &StepRule {
        &self.rule
    }

    pub fn select(&mut self, line: &LineRestriction<'_>) -> Result<f64> {
        match &self.rule {
            StepRule::Fixed { alpha } => Ok(select_fixed(*alpha)),
            StepRule::VariableCandidates { alphas } => select_variable(line, alphas),
            StepRule::QuadraticFit {
                samples,
                random_seed: None,
            } => select_quadratic_fit(line, samples),
            StepRule::QuadraticFit {
                samples,
                random_seed: Some(_),
            } => {
                let (lo, hi) = (min3(samples), max3(samples));
                let rng = self.rng.as_mut().expect("random selector carries an rng");
                let drawn = loop {
                    let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(lo..=hi));
                    if s[0] != s[1] && s[0] != s[2] && s[1] != s[2] && s.iter().any(|v| *v > 0.0) {
                        break s;
                    }
                };
                select_quadratic_fit(line, &drawn)
            }
            StepRule::GoldenSection { lo, hi, width_tol } => {
                select_golden_section(line, *lo, *hi, *width_tol)
            }
            StepRule::ExactQuadratic => select_exact_quadratic(line),
        }
    }
}
