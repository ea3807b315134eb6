//! Unweighted least-squares curve fits for coarsening time series.

use crate::error::{Error, Result};

use super::linalg::lstsq;
use super::TimeSeries;

/// Iteration cap for [`levenberg_marquardt`].
pub const LM_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rmse_of(res: &[f64]) -> f64 {
    (res.iter().map(|r| r * r).sum::<f64>() / res.len().max(1) as f64).sqrt()
}

/// Levenberg–Marquardt on `y ≈ f(p, t)`; `f` returns the value and its
/// gradient in `p`. Each step solves the damped normal equations as the
/// augmented least-squares problem `[J; √λ·D] δ = [r; 0]`.
pub fn levenberg_marquardt<F>(ts: &TimeSeries, p0: &[f64], f: F) -> Result<LmResult>
where
    F: Fn(&[f64], f64) -> (f64, Vec<f64>),
{
    let n = p0.len();
    let m = ts.len();
    if m < n {
        return Err(Error::InvalidArgument(format!("{m} samples cannot determine {n} parameters")));
    }
    let residuals = |p: &[f64]| -> Vec<f64> { ts.times.iter().zip(&ts.values).map(|(&t, &y)| y - f(p, t).0).collect() };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::InvalidArgument("initial guess gives a non-finite residual".into()));
    }
    let mut lambda: f64 = 1e-3;
    let mut converged = false;
    let mut it = 0;
    while it < LM_MAX_ITER {
        it += 1;
        let jac: Vec<Vec<f64>> = ts.times.iter().map(|&t| f(&p, t).1).collect();
        let diag: Vec<f64> = (0..n).map(|k| jac.iter().map(|row| row[k] * row[k]).sum::<f64>().sqrt().max(1e-300)).collect();
        let grad_norm = (0..n)
            .map(|k| (jac.iter().zip(&r).map(|(row, ri)| row[k] * ri).sum::<f64>() / diag[k]).abs())
            .fold(0.0, f64::max);
        if grad_norm <= 1e-15 * c.sqrt().max(1e-300) || c == 0.0 {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jac.clone();
            let mut b = r.clone();
            for k in 0..n {
                let mut row = vec![0.0; n];
                row[k] = lambda.sqrt() * diag[k];
                a.push(row);
                b.push(0.0);
            }
            let Ok(delta) = lstsq(&a, &b) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let rc = residuals(&cand);
            let cc = cost(&rc);
            if cc.is_finite() && cc <= c {
                let step = delta.iter().zip(&p).map(|(d, x)| (d / x.abs().max(1e-300)).abs()).fold(0.0, f64::max);
                let rel_drop = (c - cc) / c.max(1e-300);
                p = cand;
                r = rc;
                c = cc;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if step < 1e-13 || rel_drop < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LmResult { rmse: rmse_of(&r), params: p, iterations: it, converged })
}

/// Linear fit of `ln y = ln A − r t` over positive samples.
fn log_linear(ts: &TimeSeries) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = ts.times.iter().zip(&ts.values).filter(|(_, &y)| y > 0.0).map(|(&t, &y)| (t, y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let a: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, p.0]).collect();
    let b: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let x = lstsq(&a, &b).ok()?;
    Some((x[0].exp(), -x[1]))
}

/// `y = A·e^{−r t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub r: f64,
    pub rmse: f64,
    pub converged: bool,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a * (-self.r * t).exp()
    }
}

fn need(ts: &TimeSeries, params: usize) -> Result<()> {
    if ts.len() < 3 * params {
        return Err(Error::InvalidArgument(format!("need at least {} samples for {params} parameters, got {}", 3 * params, ts.len())));
    }
    Ok(())
}

pub fn fit_exponential(ts: &TimeSeries) -> Result<ExpFit> {
    need(ts, 2)?;
    let (a0, r0) = log_linear(ts).unwrap_or((ts.values[0], 0.0));
    let lm = levenberg_marquardt(ts, &[a0, r0], |p, t| {
        let e = (-p[1] * t).exp();
        (p[0] * e, vec![e, -p[0] * t * e])
    })?;
    Ok(ExpFit { a: lm.params[0], r: lm.params[1], rmse: lm.rmse, converged: lm.converged })
}

/// `y = A₁e^{−r₁t} + A₂e^{−r₂t}` with `r₁ ≤ r₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiExpFit {
    pub a1: f64,
    pub r1: f64,
    pub a2: f64,
    pub r2: f64,
    pub rmse: f64,
    pub converged: bool,
}

impl BiExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a1 * (-self.r1 * t).exp() + self.a2 * (-self.r2 * t).exp()
    }
}

/// Two-term exponential fit initialized by peeling: the slow term from the
/// trailing half, the fast term from the early residual.
pub fn fit_biexponential(ts: &TimeSeries) -> Result<BiExpFit> {
    need(ts, 4)?;
    let half = ts.len() / 2;
    let tail = TimeSeries::new(ts.times[half..].to_vec(), ts.values[half..].to_vec())?;
    let (a1, r1) = log_linear(&tail).unwrap_or((ts.values[half], 0.0));
    let early_end = (ts.len() / 4).max(3);
    let resid = TimeSeries::new(
        ts.times[..early_end].to_vec(),
        ts.times[..early_end].iter().zip(&ts.values[..early_end]).map(|(&t, &y)| y - a1 * (-r1 * t).exp()).collect(),
    )?;
    let (a2, r2) = log_linear(&resid).unwrap_or((ts.values[0] - a1, 10.0 * r1.abs().max(1.0)));
    let model = |p: &[f64], t: f64| {
        let e1 = (-p[1] * t).exp();
        let e2 = (-p[3] * t).exp();
        (p[0] * e1 + p[2] * e2, vec![e1, -p[0] * t * e1, e2, -p[2] * t * e2])
    };
    let mut best = levenberg_marquardt(ts, &[a1, r1, a2, r2.max(r1 * 1.5)], model)?;
    // A second start guards against a poor peel.
    let alt = levenberg_marquardt(ts, &[0.5 * ts.values[0], r1, 0.5 * ts.values[0], 10.0 * r1.abs().max(1.0)], model)?;
    if alt.rmse < best.rmse {
        best = alt;
    }
    let p = &best.params;
    let (a1, r1, a2, r2) = if p[1] <= p[3] { (p[0], p[1], p[2], p[3]) } else { (p[2], p[3], p[0], p[1]) };
    Ok(BiExpFit { a1, r1, a2, r2, rmse: best.rmse, converged: best.converged })
}

/// Which power-law variant to fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerLawForm {
    /// Fix the exponent instead of fitting it.
    pub exponent: Option<f64>,
    /// Include an additive constant.
    pub offset: bool,
}

/// `y = offset + C·(1 + B t)^{−p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub c: f64,
    pub b: f64,
    pub p: f64,
    pub offset: f64,
    pub rmse: f64,
    pub converged: bool,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.c * (1.0 + self.b * t).powf(-self.p)
    }
}

pub fn fit_power_law(ts: &TimeSeries, form: PowerLawForm) -> Result<PowerLawFit> {
    let n_free = 2 + usize::from(form.exponent.is_none()) + usize::from(form.offset);
    need(ts, n_free)?;
    let y0 = ts.values[0];
    let t_end = ts.times[ts.len() - 1] - ts.times[0];
    let p_init = form.exponent.unwrap_or(1.0);
    let mut best: Option<PowerLawFit> = None;
    let ymin = ts.values.iter().copied().fold(f64::INFINITY, f64::min);
    let span = ts.values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ymin;
    let offsets: Vec<f64> = if form.offset { vec![0.0, ymin - span, ymin - 0.1 * span] } else { vec![0.0] };
    for &off0 in &offsets {
        for &b_scale in &[1.0, 10.0, 100.0] {
            let b0 = b_scale / t_end.max(f64::MIN_POSITIVE);
            let c0 = y0 - off0;
            // Parameter vector: [C, B, (p), (offset)].
            let mut p0 = vec![c0, b0];
            if form.exponent.is_none() {
                p0.push(p_init);
            }
            if form.offset {
                p0.push(off0);
            }
            let model = |q: &[f64], t: f64| {
                let (c, b) = (q[0], q[1]);
                let p = form.exponent.unwrap_or_else(|| q[2]);
                let base = 1.0 + b * t;
                if !(base > 0.0) {
                    return (f64::NAN, vec![0.0; q.len()]);
                }
                let pw = base.powf(-p);
                let mut g = vec![pw, -c * p * t * pw / base];
                if form.exponent.is_none() {
                    g.push(-c * pw * base.ln());
                }
                let off = if form.offset { q[q.len() - 1] } else { 0.0 };
                if form.offset {
                    g.push(1.0);
                }
                (off + c * pw, g)
            };
            let Ok(lm) = levenberg_marquardt(ts, &p0, model) else { continue };
            let q = &lm.params;
            let fit = PowerLawFit {
                c: q[0],
                b: q[1],
                p: form.exponent.unwrap_or_else(|| q[2]),
                offset: if form.offset { q[q.len() - 1] } else { 0.0 },
                rmse: lm.rmse,
                converged: lm.converged,
            };
            if fit.rmse.is_finite() && best.is_none_or(|b| fit.rmse < b.rmse) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| Error::NoConvergence { what: "power-law fit", iterations: LM_MAX_ITER, residual: f64::NAN })
}

/// Polynomial coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub coeffs: Vec<f64>,
    pub rmse: f64,
}

impl PolyFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `|c₂T²| / (|c₂T²| + |c₁T|)`: weight of curvature over `[0, T]`.
    pub fn quadratic_share(&self, t_end: f64) -> f64 {
        let c1 = self.coeffs.get(1).copied().unwrap_or(0.0);
        let c2 = self.coeffs.get(2).copied().unwrap_or(0.0);
        let q = (c2 * t_end * t_end).abs();
        let l = (c1 * t_end).abs();
        if q + l == 0.0 {
            0.0
        } else {
            q / (q + l)
        }
    }
}

/// Linear least squares in the basis `(t/T)^k`, rescaled afterwards.
pub fn fit_polynomial(ts: &TimeSeries, degree: usize) -> Result<PolyFit> {
    need(ts, degree + 1)?;
    let scale = ts.times.iter().fold(0f64, |s, t| s.max(t.abs())).max(f64::MIN_POSITIVE);
    let a: Vec<Vec<f64>> = ts.times.iter().map(|&t| (0..=degree).map(|k| (t / scale).powi(k as i32)).collect()).collect();
    let x = lstsq(&a, &ts.values)?;
    let coeffs: Vec<f64> = x.iter().enumerate().map(|(k, c)| c / scale.powi(k as i32)).collect();
    let fit = PolyFit { coeffs, rmse: 0.0 };
    let res: Vec<f64> = ts.times.iter().zip(&ts.values).map(|(&t, &y)| y - fit.eval(t)).collect();
    Ok(PolyFit { rmse: rmse_of(&res), ..fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> TimeSeries {
        let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        TimeSeries::new(times, values).unwrap()
    }

    #[test]
    fn exponential_exact() {
        let ts = series(|t| 3.0 * (-2.0 * t).exp(), 2.0, 50);
        let f = fit_exponential(&ts).unwrap();
        assert!((f.a - 3.0).abs() < 1e-10 && (f.r - 2.0).abs() < 1e-10);
        assert!(f.rmse < 1e-10);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let ts = series(|_| 5.0, 1.0, 20);
        let f = fit_exponential(&ts).unwrap();
        assert!(f.r.abs() < 1e-12 && (f.a - 5.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_exact() {
        let ts = series(|t| 1.0 + 2.0 * t + 3.0 * t * t, 1.0, 30);
        let f = fit_polynomial(&ts, 2).unwrap();
        for (c, e) in f.coeffs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-12);
        }
        assert!((f.quadratic_share(1.0) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn power_law_fixed_and_free() {
        let ts = series(|t| 4.0 * (1.0 + 3.0 * t).powf(-0.5), 2.0, 60);
        let f = fit_power_law(&ts, PowerLawForm { exponent: Some(0.5), offset: false }).unwrap();
        assert!((f.c - 4.0).abs() < 1e-8 && (f.b - 3.0).abs() < 1e-7);
        let g = fit_power_law(&ts, PowerLawForm::default()).unwrap();
        assert!((g.p - 0.5).abs() < 1e-6, "{g:?}");
    }

    #[test]
    fn too_few_samples() {
        let ts = series(|t| t, 1.0, 5);
        assert!(fit_exponential(&ts).is_err());
    }
}
