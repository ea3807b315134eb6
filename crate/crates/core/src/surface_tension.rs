//! Grain-boundary energy density σ(θ) as a function of lattice misorientation.
//!
//! A model carries σ together with its first and second derivatives, coded
//! analytically. The built-in family is `σ(θ) = a + b·sin²(c·θ)`; arbitrary
//! closures can be wrapped with [`SurfaceTensionModel::from_fns`].

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance used by [`SurfaceTensionModel::validate`].
pub const VALIDATION_TOL: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    SinSquared { a: f64, b: f64, c: f64 },
    Custom {
        f: ScalarFn,
        df: ScalarFn,
        d2f: ScalarFn,
        even: bool,
    },
}

/// Energy density σ with analytic derivatives. Immutable and cheap to clone.
#[derive(Clone)]
pub struct SurfaceTensionModel {
    label: String,
    kind: Kind,
}

impl fmt::Debug for SurfaceTensionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceTensionModel")
            .field("label", &self.label)
            .finish()
    }
}

impl SurfaceTensionModel {
    /// `σ(θ) = 1 + 0.25·sin²(2θ)`.
    pub fn builtin() -> Self {
        Self::sin_squared(1.0, 0.25, 2.0)
    }

    /// `σ(θ) = a + b·sin²(c·θ)`.
    pub fn sin_squared(a: f64, b: f64, c: f64) -> Self {
        SurfaceTensionModel {
            label: format!("sigma = {a:?} + {b:?}*sin^2({c:?}*theta)"),
            kind: Kind::SinSquared { a, b, c },
        }
    }

    /// Wraps user-supplied σ, σ_θ and σ_θθ.
    pub fn from_fns<F, DF, D2F>(label: impl Into<String>, f: F, df: DF, d2f: D2F, even: bool) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        DF: Fn(f64) -> f64 + Send + Sync + 'static,
        D2F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SurfaceTensionModel {
            label: label.into(),
            kind: Kind::Custom {
                f: Arc::new(f),
                df: Arc::new(df),
                d2f: Arc::new(d2f),
                even,
            },
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The `(a, b, c)` parameters when this is a sin² model.
    pub fn sin_squared_params(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            Kind::SinSquared { a, b, c } => Some((a, b, c)),
            Kind::Custom { .. } => None,
        }
    }

    /// Whether σ(θ) = σ(−θ) is declared for this model.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            Kind::SinSquared { .. } => true,
            Kind::Custom { even, .. } => *even,
        }
    }

    #[inline]
    pub fn sigma(&self, theta: f64) -> f64 {
        match &self.kind {
            Kind::SinSquared { a, b, c } => {
                let s = (c * theta).sin();
                a + b * s * s
            }
            Kind::Custom { f, .. } => f(theta),
        }
    }

    #[inline]
    pub fn dsigma(&self, theta: f64) -> f64 {
        match &self.kind {
            Kind::SinSquared { b, c, .. } => b * c * (2.0 * c * theta).sin(),
            Kind::Custom { df, .. } => df(theta),
        }
    }

    #[inline]
    pub fn d2sigma(&self, theta: f64) -> f64 {
        match &self.kind {
            Kind::SinSquared { b, c, .. } => 2.0 * b * c * c * (2.0 * c * theta).cos(),
            Kind::Custom { d2f, .. } => d2f(theta),
        }
    }

    /// Largest σ over `[-theta_max, theta_max]`, sampled on `n` points.
    pub fn max_on(&self, theta_max: f64, n: usize) -> f64 {
        grid(theta_max, n.max(2))
            .map(|t| self.sigma(t))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks the structural assumptions on a uniform grid over
    /// `[-theta_max, theta_max]`.
    pub fn validate(&self, theta_max: f64, n_grid: usize) -> Result<ValidationReport> {
        if !(theta_max > 0.0) || !theta_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "theta_max must be positive, got {theta_max}"
            )));
        }
        if n_grid < 3 {
            return Err(Error::InvalidArgument(format!(
                "n_grid must be at least 3, got {n_grid}"
            )));
        }
        let s0 = self.sigma(0.0);
        let ds0 = self.dsigma(0.0);
        let d2s0 = self.d2sigma(0.0);
        if !s0.is_finite() || !ds0.is_finite() || !d2s0.is_finite() {
            return Err(Error::MalformedModel(format!(
                "non-finite value at theta = 0 for {}",
                self.label
            )));
        }

        let tol = VALIDATION_TOL;
        let mut minimum = AssumptionCheck::pass();
        let mut convexity = AssumptionCheck::pass();
        let mut isolated = AssumptionCheck::pass();
        let mut evenness = if self.is_even() {
            Some(AssumptionCheck::pass())
        } else {
            None
        };

        if s0 <= 0.0 {
            minimum.fail_at(0.0);
        }
        if d2s0 <= 0.0 {
            convexity.fail_at(0.0);
        }
        if ds0.abs() > tol {
            isolated.fail_at(0.0);
        }

        let spacing = 2.0 * theta_max / (n_grid - 1) as f64;
        for (i, theta) in grid(theta_max, n_grid).enumerate() {
            let s = self.sigma(theta);
            let ds = self.dsigma(theta);
            if !s.is_finite() || !ds.is_finite() {
                return Err(Error::MalformedModel(format!(
                    "non-finite value at theta = {theta} for {}",
                    self.label
                )));
            }
            if s < s0 - tol {
                minimum.fail_at(theta);
            }
            if ds * theta < -tol {
                convexity.fail_at(theta);
            }
            // Endpoints are excluded: periodic densities such as the built-in
            // model have σ_θ(±π/4) = 0 exactly on the window boundary.
            let interior = i != 0 && i != n_grid - 1;
            if interior && theta.abs() > 0.5 * spacing && ds.abs() <= tol {
                isolated.fail_at(theta);
            }
            if let Some(ev) = evenness.as_mut() {
                if (s - self.sigma(-theta)).abs() > tol {
                    ev.fail_at(theta);
                }
            }
        }

        Ok(ValidationReport {
            theta_max,
            n_grid,
            positive_minimum: minimum,
            convexity,
            isolated_critical_point: isolated,
            evenness,
        })
    }
}

impl Default for SurfaceTensionModel {
    fn default() -> Self {
        Self::builtin()
    }
}

fn grid(theta_max: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = 2.0 * theta_max / (n - 1) as f64;
    (0..n).map(move |i| {
        if i == n - 1 {
            theta_max
        } else {
            -theta_max + h * i as f64
        }
    })
}

/// Outcome of one structural check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    pub passed: bool,
    /// First grid point (in ascending θ order) where the check failed.
    pub first_violation: Option<f64>,
}

impl AssumptionCheck {
    fn pass() -> Self {
        AssumptionCheck {
            passed: true,
            first_violation: None,
        }
    }

    fn fail_at(&mut self, theta: f64) {
        self.passed = false;
        if self.first_violation.is_none() {
            self.first_violation = Some(theta);
        }
    }
}

/// Per-assumption results of [`SurfaceTensionModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub theta_max: f64,
    pub n_grid: usize,
    /// σ(θ) ≥ σ(0) > 0.
    pub positive_minimum: AssumptionCheck,
    /// σ_θ(θ)·θ ≥ 0 and σ_θθ(0) > 0.
    pub convexity: AssumptionCheck,
    /// σ_θ(θ) = 0 only at θ = 0.
    pub isolated_critical_point: AssumptionCheck,
    /// σ(θ) = σ(−θ), checked only for models declared even.
    pub evenness: Option<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.positive_minimum.passed
            && self.convexity.passed
            && self.isolated_critical_point.passed
            && self.evenness.is_none_or(|e| e.passed)
    }
}

/// Default validation window, the misorientation range used for statistics.
pub const DEFAULT_THETA_MAX: f64 = FRAC_PI_4;

impl FromStr for SurfaceTensionModel {
    type Err = Error;

    /// Parses `sigma = a + b*sin^2(c*theta)`. Whitespace is ignored, the
    /// `sigma =` prefix is optional and `a - b*...` is accepted.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b, c) = parse_sin_squared(s)?;
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(parse_err("parameters must be finite"));
        }
        Ok(Self::sin_squared(a, b, c))
    }
}

fn parse_err(msg: &str) -> Error {
    Error::Parse {
        line: 1,
        message: msg.to_string(),
    }
}

fn parse_sin_squared(s: &str) -> Result<(f64, f64, f64)> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let body = compact
        .strip_prefix("sigma=")
        .or_else(|| compact.strip_prefix("σ="))
        .unwrap_or(&compact);

    let (a, rest) = take_number(body).ok_or_else(|| parse_err("expected constant term"))?;
    let (sign, rest) = match rest.as_bytes().first() {
        Some(b'+') => (1.0, &rest[1..]),
        Some(b'-') => (-1.0, &rest[1..]),
        _ => return Err(parse_err("expected '+' or '-' after constant term")),
    };
    let (b, rest) = take_number(rest).ok_or_else(|| parse_err("expected amplitude"))?;
    let rest = rest
        .strip_prefix("*sin^2(")
        .ok_or_else(|| parse_err("expected '*sin^2('"))?;
    let (c, rest) = take_number(rest).ok_or_else(|| parse_err("expected frequency"))?;
    let rest = rest
        .strip_prefix("*theta)")
        .or_else(|| rest.strip_prefix("*θ)"))
        .ok_or_else(|| parse_err("expected '*theta)'"))?;
    if !rest.is_empty() {
        return Err(parse_err("trailing input"));
    }
    Ok((a, sign * b, c))
}

/// Splits the longest prefix of `s` that parses as a float.
fn take_number(s: &str) -> Option<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut end = 0;
    let mut seen_digit = false;
    let mut seen_dot = false;
    let mut seen_exp = false;
    while end < bytes.len() {
        let ch = bytes[end];
        let ok = match ch {
            b'0'..=b'9' => {
                seen_digit = true;
                true
            }
            b'.' if !seen_dot && !seen_exp => {
                seen_dot = true;
                true
            }
            b'e' | b'E' if seen_digit && !seen_exp => {
                seen_exp = true;
                true
            }
            b'+' | b'-' => end == 0 || matches!(bytes[end - 1], b'e' | b'E'),
            _ => false,
        };
        if !ok {
            break;
        }
        end += 1;
    }
    // Back off a dangling exponent marker or sign.
    while end > 0 && s[..end].parse::<f64>().is_err() {
        end -= 1;
    }
    if end == 0 {
        return None;
    }
    s[..end].parse().ok().map(|v| (v, &s[end..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values_at_zero() {
        let m = SurfaceTensionModel::builtin();
        assert_eq!(m.sigma(0.0), 1.0);
        assert_eq!(m.dsigma(0.0), 0.0);
        assert_eq!(m.d2sigma(0.0), 2.0);
        let h = 1e-4;
        let fd = (m.sigma(h) - 2.0 * m.sigma(0.0) + m.sigma(-h)) / (h * h);
        assert!((fd - 2.0).abs() < 1e-6, "fd = {fd}");
    }

    #[test]
    fn builtin_passes_validation() {
        let r = SurfaceTensionModel::builtin()
            .validate(FRAC_PI_4, 1001)
            .unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn concave_model_fails_minimum() {
        let m = SurfaceTensionModel::from_fns("1-t^2", |t| 1.0 - t * t, |t| -2.0 * t, |_| -2.0, true);
        let r = m.validate(0.5, 101).unwrap();
        assert!(!r.positive_minimum.passed);
        assert_eq!(r.positive_minimum.first_violation, Some(-0.5));
        assert!(!r.convexity.passed);
    }

    #[test]
    fn convex_quadratic_passes() {
        let m = SurfaceTensionModel::from_fns("1+t^2", |t| 1.0 + t * t, |t| 2.0 * t, |_| 2.0, true);
        assert!(m.validate(0.5, 101).unwrap().all_passed());
    }

    #[test]
    fn flat_model_fails_isolation() {
        let m = SurfaceTensionModel::from_fns("1", |_| 1.0, |_| 0.0, |_| 0.0, true);
        let r = m.validate(0.5, 11).unwrap();
        assert!(!r.isolated_critical_point.passed);
        assert!(!r.convexity.passed);
    }

    #[test]
    fn rejects_bad_arguments_and_nan() {
        let m = SurfaceTensionModel::builtin();
        assert!(m.validate(0.0, 11).is_err());
        assert!(m.validate(1.0, 2).is_err());
        let bad = SurfaceTensionModel::from_fns("nan", |t| if t > 0.3 { f64::NAN } else { 1.0 + t * t }, |t| 2.0 * t, |_| 2.0, false);
        assert!(matches!(bad.validate(0.5, 11), Err(Error::MalformedModel(_))));
    }

    #[test]
    fn parses_spec_strings() {
        let m: SurfaceTensionModel = "sigma = 1 + 0.25*sin^2(2*theta)".parse().unwrap();
        assert_eq!(m.sin_squared_params(), Some((1.0, 0.25, 2.0)));
        let m: SurfaceTensionModel = "2.5e-1+1e0*sin^2(1.5*theta)".parse().unwrap();
        assert_eq!(m.sin_squared_params(), Some((0.25, 1.0, 1.5)));
        let m: SurfaceTensionModel = "sigma=1 - 0.1 * sin^2( 2 * theta )".parse().unwrap();
        assert_eq!(m.sin_squared_params(), Some((1.0, -0.1, 2.0)));
        for bad in ["", "sigma = 1", "1 + 2*cos^2(3*theta)", "1+2*sin^2(3*theta)x", "nan+1*sin^2(1*theta)", "sigma = 1e999 + 1*sin^2(1*theta)"] {
            assert!(bad.parse::<SurfaceTensionModel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn label_round_trips() {
        let m = SurfaceTensionModel::sin_squared(1.0, 0.25, 2.0);
        let back: SurfaceTensionModel = m.label().parse().unwrap();
        assert_eq!(back.sin_squared_params(), m.sin_squared_params());
    }
}
