//! Problem data: CIR coefficients, regime means and the state-dependent
//! rate-matrix field.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default lower guard on the slow state used by the analytic modules.
pub const DEFAULT_X_MIN: f64 = 1e-6;

/// Number of log-spaced states at which irreducibility is checked.
pub const IRREDUCIBILITY_PROBES: usize = 16;

/// Upper end of the probe range used by validation and containment checks.
pub const PROBE_X_MAX: f64 = 1e4;

/// Parametric family of conservative rate matrices
/// `q_ij(x) = a_ij + b_ij · x/(1+x)` for `i ≠ j`, with `q_ii = −Σ_{j≠i} q_ij`.
///
/// Diagonal entries of `base` and `slope` are ignored. The feature
/// `x/(1+x)` is bounded in `(0, 1)`, so the field is bounded and Lipschitz
/// with constant `|b_ij|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrixField {
    n: usize,
    base: Vec<f64>,
    slope: Vec<f64>,
}

impl RateMatrixField {
    /// Both matrices are row-major `n × n`.
    pub fn new(n: usize, base: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("rate field needs at least one regime"));
        }
        if base.len() != n * n || slope.len() != n * n {
            return Err(Error::InvalidArgument("rate field matrices must be n*n row-major"));
        }
        Ok(RateMatrixField { n, base, slope })
    }

    /// A field that does not depend on `x`.
    pub fn constant(n: usize, base: Vec<f64>) -> Result<Self> {
        Self::new(n, base, vec![0.0; n * n])
    }

    pub fn n_regimes(&self) -> usize {
        self.n
    }

    pub fn base(&self, i: usize, j: usize) -> f64 {
        self.base[i * self.n + j]
    }

    pub fn slope(&self, i: usize, j: usize) -> f64 {
        self.slope[i * self.n + j]
    }

    pub fn base_row_major(&self) -> &[f64] {
        &self.base
    }

    pub fn slope_row_major(&self) -> &[f64] {
        &self.slope
    }

    /// Off-diagonal rate `q_ij(x)`; zero on the diagonal.
    #[inline]
    pub fn rate(&self, i: usize, j: usize, x: f64) -> f64 {
        if i == j {
            return 0.0;
        }
        self.base(i, j) + self.slope(i, j) * feature(x)
    }

    /// Total exit rate `q_i(x) = Σ_{j≠i} q_ij(x)`.
    pub fn exit_rate(&self, i: usize, x: f64) -> f64 {
        (0..self.n).map(|j| self.rate(i, j, x)).sum()
    }

    /// Upper bound of `q_i(x)` over all `x > 0` and all `i`.
    pub fn sup_exit_rate(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| self.base(i, j).max(self.base(i, j) + self.slope(i, j)).max(0.0))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Generator matrix at `x` with zero row sums.
    pub fn matrix(&self, x: f64) -> Matrix {
        let n = self.n;
        let mut q = Matrix::zeros(n);
        for i in 0..n {
            let mut total = 0.0;
            for j in 0..n {
                if j != i {
                    let r = self.rate(i, j, x);
                    q[(i, j)] = r;
                    total += r;
                }
            }
            q[(i, i)] = -total;
        }
        q
    }

    /// `∂q/∂x`, again with zero row sums.
    pub fn matrix_derivative(&self, x: f64) -> Matrix {
        let n = self.n;
        let d = feature_derivative(x);
        let mut dq = Matrix::zeros(n);
        for i in 0..n {
            let mut total = 0.0;
            for j in 0..n {
                if j != i {
                    let r = self.slope(i, j) * d;
                    dq[(i, j)] = r;
                    total += r;
                }
            }
            dq[(i, i)] = -total;
        }
        dq
    }

    /// Whether every regime reaches every other regime through positive rates at `x`.
    pub fn is_irreducible_at(&self, x: f64) -> bool {
        let n = self.n;
        // Forward and backward reachability from regime 0 suffice.
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let r = if forward { self.rate(i, j, x) } else { self.rate(j, i, x) };
                    if !seen[j] && r > 0.0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        reach(true) && reach(false)
    }
}

#[inline]
fn feature(x: f64) -> f64 {
    x / (1.0 + x)
}

#[inline]
fn feature_derivative(x: f64) -> f64 {
    1.0 / ((1.0 + x) * (1.0 + x))
}

/// All static problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub eta: f64,
    pub theta: f64,
    pub mu: Vec<f64>,
    pub q: RateMatrixField,
    pub x_min: f64,
    /// Downgrades the Feller-type condition `2ημ(i) ≥ θ²` to a warning.
    pub allow_nonfeller: bool,
}

impl ModelSpec {
    pub fn new(eta: f64, theta: f64, mu: Vec<f64>, q: RateMatrixField) -> Self {
        ModelSpec {
            eta,
            theta,
            mu,
            q,
            x_min: DEFAULT_X_MIN,
            allow_nonfeller: false,
        }
    }

    pub fn with_x_min(mut self, x_min: f64) -> Self {
        self.x_min = x_min;
        self
    }

    pub fn with_allow_nonfeller(mut self, allow: bool) -> Self {
        self.allow_nonfeller = allow;
        self
    }

    pub fn n_regimes(&self) -> usize {
        self.mu.len()
    }

    /// Fails with [`Error::Domain`] when `x < x_min` (or `x` is not finite).
    pub fn check_domain(&self, x: f64) -> Result<()> {
        if x.is_finite() && x >= self.x_min {
            Ok(())
        } else {
            Err(Error::Domain { x, x_min: self.x_min })
        }
    }

    /// Runs [`validate`] and turns any hard violation into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate(self);
        match report.errors.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidModel(format!("{v}"))),
        }
    }

    /// Per-regime slow drift coefficient `B_{x,p}(i) = η(μ(i)−x)p + ½θ²xp²`.
    #[inline]
    pub fn slow_exponent(&self, i: usize, x: f64, p: f64) -> f64 {
        self.eta * (self.mu[i] - x) * p + 0.5 * self.theta * self.theta * x * p * p
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoRegimes,
    DimensionMismatch { mu: usize, q: usize },
    NonPositive { name: &'static str, value: f64 },
    NonPositiveMean { regime: usize, value: f64 },
    Feller { regime: usize, lhs: f64, rhs: f64 },
    NegativeRate { from: usize, to: usize, at_zero: f64, at_infinity: f64 },
    Reducible { x: f64 },
    VanishingRate { from: usize, to: usize },
}

impl Violation {
    /// Configuration key most directly responsible for the violation.
    pub fn key(&self) -> &'static str {
        match self {
            Violation::NoRegimes | Violation::NonPositiveMean { .. } => "model.mu",
            Violation::NonPositive { name: "eta", .. } => "model.eta",
            Violation::NonPositive { name: "theta", .. } | Violation::Feller { .. } => "model.theta",
            Violation::NonPositive { .. } => "model.x_min",
            Violation::DimensionMismatch { .. }
            | Violation::NegativeRate { .. }
            | Violation::Reducible { .. }
            | Violation::VanishingRate { .. } => "model.q",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Regimes are printed 1-based, matching the config and CSV outputs.
        match self {
            Violation::NoRegimes => write!(f, "model has no regimes"),
            Violation::DimensionMismatch { mu, q } => {
                write!(f, "mu has {mu} entries but the rate field has {q} regimes")
            }
            Violation::NonPositive { name, value } => write!(f, "{name} = {value} must be positive"),
            Violation::NonPositiveMean { regime, value } => {
                write!(f, "mu[{}] = {value} must be positive", regime + 1)
            }
            Violation::Feller { regime, lhs, rhs } => write!(
                f,
                "Feller condition 2*eta*mu >= theta^2 fails for regime {}: {lhs} < {rhs}",
                regime + 1
            ),
            Violation::NegativeRate { from, to, at_zero, at_infinity } => write!(
                f,
                "rate q[{}][{}] is negative somewhere on x > 0 (limits {at_zero} at 0, {at_infinity} at infinity)",
                from + 1,
                to + 1
            ),
            Violation::Reducible { x } => write!(f, "rate matrix is reducible at x = {x}"),
            Violation::VanishingRate { from, to } => write!(
                f,
                "rate q[{}][{}] has zero base and positive slope: it vanishes as x -> 0",
                from + 1,
                to + 1
            ),
        }
    }
}

/// Outcome of [`validate`]: hard violations and warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for e in &self.errors {
            s.push_str(&format!("error: {e}\n"));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Checks every model invariant and reports all violations at once.
pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let errors = &mut report.errors;
    let n = spec.n_regimes();
    if n == 0 {
        errors.push(Violation::NoRegimes);
        return report;
    }
    if spec.q.n_regimes() != n {
        errors.push(Violation::DimensionMismatch { mu: n, q: spec.q.n_regimes() });
        return report;
    }
    for (name, value) in [("eta", spec.eta), ("theta", spec.theta), ("x_min", spec.x_min)] {
        if !(value > 0.0 && value.is_finite()) {
            errors.push(Violation::NonPositive { name, value });
        }
    }
    for (i, &m) in spec.mu.iter().enumerate() {
        if !(m > 0.0 && m.is_finite()) {
            errors.push(Violation::NonPositiveMean { regime: i, value: m });
        }
    }
    let rhs = spec.theta * spec.theta;
    for (i, &m) in spec.mu.iter().enumerate() {
        let lhs = 2.0 * spec.eta * m;
        if lhs < rhs {
            let v = Violation::Feller { regime: i, lhs, rhs };
            if spec.allow_nonfeller {
                report.warnings.push(v);
            } else {
                report.errors.push(v);
            }
        }
    }
    let mut rates_ok = true;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let a = spec.q.base(i, j);
            let b = spec.q.slope(i, j);
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || a + b < 0.0 {
                rates_ok = false;
                report.errors.push(Violation::NegativeRate {
                    from: i,
                    to: j,
                    at_zero: a,
                    at_infinity: a + b,
                });
            } else if a == 0.0 && b > 0.0 {
                report.warnings.push(Violation::VanishingRate { from: i, to: j });
            }
        }
    }
    if rates_ok && n > 1 {
        let lo = if spec.x_min > 0.0 { spec.x_min } else { DEFAULT_X_MIN };
        if let Some(x) = log_grid(lo, PROBE_X_MAX, IRREDUCIBILITY_PROBES)
            .into_iter()
            .find(|&x| !spec.q.is_irreducible_at(x))
        {
            report.errors.push(Violation::Reducible { x });
        }
    }
    report
}

/// The generator `q(x)`.
pub fn rate_matrix(spec: &ModelSpec, x: f64) -> Result<Matrix> {
    spec.check_domain(x)?;
    Ok(spec.q.matrix(x))
}

/// Per-regime slow drift `η(μ(i) − x)`.
pub fn drift_vector(spec: &ModelSpec, x: f64) -> Result<Vec<f64>> {
    spec.check_domain(x)?;
    Ok(spec.mu.iter().map(|m| spec.eta * (m - x)).collect())
}

/// `count` points spaced evenly in `log x` on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}
