//! Small fixed-dimension ODE steppers: adaptive Dormand–Prince 5(4) and
//! classical RK4.

use crate::error::{Error, Result};

/// Step-size controls for [`Dopri5`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { rtol: 1e-10, atol: 1e-14, h_max: f64::INFINITY }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error weights: fifth-order minus embedded fourth-order coefficients.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Adaptive Dormand–Prince 5(4) with FSAL and a carried step size.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub opts: AdaptiveOptions,
    h: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(opts: AdaptiveOptions) -> Self {
        Dopri5 { opts, h: None, accepted: 0, rejected: 0 }
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn advance<const N: usize, F>(&mut self, f: &mut F, t0: f64, y: [f64; N], t1: f64) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let mut t = t0;
        let mut y = y;
        if t1 <= t0 {
            return Ok(y);
        }
        let h_max = self.opts.h_max.min(t1 - t0);
        let mut k1 = f(t, &y)?;
        let mut h = self.h.unwrap_or_else(|| self.initial_step(&y, &k1, t1 - t0)).min(h_max);
        loop {
            let remaining = t1 - t;
            // Absorb a sliver of the interval rather than leave it for a tiny final step.
            let last = h >= remaining * (1.0 - 1e-3);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new)?;
            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if err.is_nan() {
                return Err(Error::StepUnderflow { t, h });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.accepted += 1;
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                let next = (h * factor).min(h_max);
                if last {
                    // Keep the uncapped proposal for the next interval.
                    self.h = Some(if factor > 1.0 { next.max(h) } else { next });
                    return Ok(y);
                }
                h = next;
            } else {
                self.rejected += 1;
                h *= factor.min(1.0);
            }
        }
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], dy: &[f64; N], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.opts.atol + self.opts.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (dy[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span)
    }
}

/// One classical Runge–Kutta 4 step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]))?;
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]))?;
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]))?;
    Ok(axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn dopri_matches_harmonic_oscillator() {
        let mut s = Dopri5::new(AdaptiveOptions::default());
        let mut f = oscillator;
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        for _ in 0..10 {
            y = s.advance(&mut f, t, y, t + 1.0).unwrap();
            t += 1.0;
        }
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dopri_exact_on_linear_growth() {
        let mut s = Dopri5::new(AdaptiveOptions::default());
        let mut f = |t: f64, _y: &[f64; 1]| -> Result<[f64; 1]> { Ok([3.0 * t * t]) };
        let y = s.advance(&mut f, 0.0, [0.0], 2.0).unwrap();
        assert!((y[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn many_short_intervals_do_not_underflow() {
        let mut s = Dopri5::new(AdaptiveOptions { h_max: 5e-4, ..AdaptiveOptions::default() });
        let mut f = oscillator;
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        for k in 1..=10_000 {
            let t1 = k as f64 * 5e-4;
            y = s.advance(&mut f, t, y, t1).unwrap();
            t = t1;
        }
        assert!((y[0] - 5f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut f = |_t: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([-y[0]]) };
            let mut y = [1.0];
            for k in 0..n {
                y = rk4_step(&mut f, k as f64 * h, &y, h).unwrap();
            }
            (y[0] - (-1f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn rhs_error_propagates() {
        let mut s = Dopri5::new(AdaptiveOptions::default());
        let mut f = |t: f64, _y: &[f64; 1]| -> Result<[f64; 1]> {
            if t > 0.5 { Err(Error::InvalidArgument("stop".into())) } else { Ok([1.0]) }
        };
        assert!(s.advance(&mut f, 0.0, [0.0], 1.0).is_err());
    }
}
