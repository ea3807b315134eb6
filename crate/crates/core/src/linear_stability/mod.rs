//! Linearization of the single-junction system at its equilibrium, the
//! closed-form decay rates, and decay-rate measurement on trajectories.

pub mod eigen;

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::EquilibriumState;
use crate::junction_dynamics::{JunctionSystem, Trajectory};
use crate::vec2::Vec2;

pub type Mat3 = [[f64; 3]; 3];
pub type Mat2 = [[f64; 2]; 2];

/// Deviation window used by [`measure_decay_rate`].
pub const DECAY_WINDOW: (f64, f64) = (1e-10, 1e-3);

fn check_lengths(lengths: &[f64; 3]) -> Result<()> {
    for &l in lengths {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("lengths must be positive, got {l}")));
        }
    }
    Ok(())
}

/// Matrix with rows `[c1+c2, −c2, −c1]`, `[−c2, c2+c3, −c3]`, `[−c1, −c3, c3+c1]`.
pub fn matrix_c(c: [f64; 3]) -> Mat3 {
    let [c1, c2, c3] = c;
    [[c1 + c2, -c2, -c1], [-c2, c2 + c3, -c3], [-c1, -c3, c3 + c1]]
}

pub fn build_b_infinity(lengths: [f64; 3]) -> Result<Mat3> {
    check_lengths(&lengths)?;
    Ok(matrix_c(lengths))
}

/// Eigenvalues of [`matrix_c`], ascending.
pub fn eigvals_c(c1: f64, c2: f64, c3: f64) -> [f64; 3] {
    let s = c1 + c2 + c3;
    let r = (0.5 * ((c1 - c2).powi(2) + (c2 - c3).powi(2) + (c3 - c1).powi(2))).sqrt();
    let mut v = [0.0, s - r, s + r];
    v.sort_by(f64::total_cmp);
    v
}

/// Smallest positive eigenvalue of `B∞`, `S − R` evaluated as `3Σ lⱼlₖ / (S + R)`.
pub fn lambda1(lengths: [f64; 3]) -> Result<f64> {
    check_lengths(&lengths)?;
    let [a, b, c] = lengths;
    let s = a + b + c;
    let r = (0.5 * ((a - b).powi(2) + (b - c).powi(2) + (c - a).powi(2))).sqrt();
    Ok(3.0 * (a * b + b * c + c * a) / (s + r))
}

/// `L_a = Σⱼ (1/|bⱼ|)(I − uⱼ⊗uⱼ)`.
pub fn build_l_a(eq: &EquilibriumState) -> Mat2 {
    let mut m = [[0.0; 2]; 2];
    for j in 0..3 {
        let l = eq.lengths[j];
        let u = eq.b_inf[j] / l;
        m[0][0] += (1.0 - u.x * u.x) / l;
        m[0][1] -= u.x * u.y / l;
        m[1][1] += (1.0 - u.y * u.y) / l;
    }
    m[1][0] = m[0][1];
    m
}

/// Smallest eigenvalue of `L_a` at an equilibrium with the given lengths.
///
/// Uses `tr = Σ 1/lⱼ` and `det = ¾ Σ_{j<k} 1/(lⱼlₖ)` as `2·det / (tr + √(tr² − 4det))`.
pub fn lambda2(lengths: [f64; 3]) -> Result<f64> {
    check_lengths(&lengths)?;
    let inv = [1.0 / lengths[0], 1.0 / lengths[1], 1.0 / lengths[2]];
    let tr = inv[0] + inv[1] + inv[2];
    let det = 0.75 * (inv[0] * inv[1] + inv[1] * inv[2] + inv[2] * inv[0]);
    let r = (0.5 * ((inv[0] - inv[1]).powi(2) + (inv[1] - inv[2]).powi(2) + (inv[2] - inv[0]).powi(2))).sqrt();
    Ok(2.0 * det / (tr + r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub b_inf: Mat3,
    pub l_a: Mat2,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `min(γσ''(0)λ1, ησ(0)λ2)`.
    pub lambda: f64,
}

impl LinearizedSystem {
    pub fn at_equilibrium(sys: &JunctionSystem, eq: &EquilibriumState) -> Result<Self> {
        let b_inf = build_b_infinity(eq.lengths)?;
        let l_a = build_l_a(eq);
        let l1 = lambda1(eq.lengths)?;
        let l2 = lambda2(eq.lengths)?;
        let mut lin = LinearizedSystem { b_inf, l_a, lambda1: l1, lambda2: l2, lambda: 0.0 };
        lin.lambda = combined_rate(sys, &lin);
        Ok(lin)
    }

    /// `(−γσ''(0)B∞α, −ησ(0)L_a a)`.
    pub fn linear_rhs(&self, sys: &JunctionSystem, alpha: &[f64; 3], a: Vec2) -> ([f64; 3], Vec2) {
        let ka = sys.gamma * sys.model.d2sigma(0.0);
        let kb = sys.eta * sys.model.sigma(0.0);
        let mut da = [0.0; 3];
        for (i, d) in da.iter_mut().enumerate() {
            *d = -ka * (0..3).map(|j| self.b_inf[i][j] * alpha[j]).sum::<f64>();
        }
        let m = &self.l_a;
        let dv = Vec2::new(m[0][0] * a.x + m[0][1] * a.y, m[1][0] * a.x + m[1][1] * a.y) * -kb;
        (da, dv)
    }

    /// Block-diagonal Jacobian `diag(−γσ''(0)B∞, −ησ(0)L_a)`.
    pub fn jacobian(&self, sys: &JunctionSystem) -> [[f64; 5]; 5] {
        let ka = sys.gamma * sys.model.d2sigma(0.0);
        let kb = sys.eta * sys.model.sigma(0.0);
        let mut j = [[0.0; 5]; 5];
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] = -ka * self.b_inf[r][c];
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                j[3 + r][3 + c] = -kb * self.l_a[r][c];
            }
        }
        j
    }

    /// Unit direction `(δα, δa)` of the slowest linear mode.
    pub fn slowest_mode(&self, sys: &JunctionSystem) -> ([f64; 3], Vec2) {
        let ra = sys.gamma * sys.model.d2sigma(0.0) * self.lambda1;
        let rb = sys.eta * sys.model.sigma(0.0) * self.lambda2;
        if ra <= rb {
            // Index 1: the zero eigenvalue belongs to (1,1,1).
            let e = eigen::sym_eigen(&self.b_inf);
            (e.vector(1), Vec2::ZERO)
        } else {
            let e = eigen::sym_eigen(&self.l_a);
            let v = e.vector(0);
            ([0.0; 3], Vec2::new(v[0], v[1]))
        }
    }
}

pub fn combined_rate(sys: &JunctionSystem, lin: &LinearizedSystem) -> f64 {
    let ra = sys.gamma * sys.model.d2sigma(0.0) * lin.lambda1;
    let rb = sys.eta * sys.model.sigma(0.0) * lin.lambda2;
    ra.min(rb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub t_start: f64,
    pub t_end: f64,
}

/// `|α − α∞(1,1,1)| + |a − a∞|`.
pub fn deviation(alpha: &[f64; 3], a: Vec2, alpha_inf: f64, a_inf: Vec2) -> f64 {
    alpha.iter().map(|x| (x - alpha_inf).powi(2)).sum::<f64>().sqrt() + (a - a_inf).norm()
}

/// Least-squares slope of the log deviation over the trailing half of the
/// samples whose deviation lies in [`DECAY_WINDOW`].
pub fn measure_decay_rate(traj: &Trajectory, alpha_inf: f64, a_inf: Vec2) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| (s.state.t, deviation(&s.state.alpha, s.state.a, alpha_inf, a_inf)))
        .filter(|&(_, d)| d >= DECAY_WINDOW.0 && d <= DECAY_WINDOW.1)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    let tail = &pts[pts.len() / 2..];
    if tail.len() < 3 {
        return Err(Error::NoDecayWindow(format!(
            "{} samples inside [{:e}, {:e}]",
            pts.len(),
            DECAY_WINDOW.0,
            DECAY_WINDOW.1
        )));
    }
    let n = tail.len() as f64;
    let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = tail.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::NoDecayWindow("fit window has zero duration".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, n_points: tail.len(), t_start: tail[0].0, t_end: tail[tail.len() - 1].0 })
}

/// One line of the stability report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub lengths: [f64; 3],
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda: f64,
    pub observed: Option<f64>,
    pub r_squared: Option<f64>,
}

pub fn write_stability_csv<W: Write>(rows: &[StabilityRow], mut w: W) -> Result<()> {
    writeln!(w, "# units: lengths [length], lambda1 [length], lambda2 [1/length], lambda and observed [1/time]")?;
    writeln!(w, "l1,l2,l3,lambda1,lambda2,lambda,observed,r_squared")?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:?}"));
    for r in rows {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            r.lengths[0],
            r.lengths[1],
            r.lengths[2],
            r.lambda1,
            r.lambda2,
            r.lambda,
            opt(r.observed),
            opt(r.r_squared)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fermat_point, AnchorTriangle};
    use crate::surface_tension::SurfaceTensionModel;

    #[test]
    fn unit_lengths_matrix() {
        let b = build_b_infinity([1.0, 1.0, 1.0]).unwrap();
        assert_eq!(b, [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]);
        assert!(build_b_infinity([1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn closed_forms_on_small_cases() {
        assert_eq!(eigvals_c(1.0, 1.0, 1.0), [0.0, 3.0, 3.0]);
        assert_eq!(eigvals_c(0.0, 0.0, 0.0), [0.0; 3]);
        let e = eigvals_c(1.0, 2.0, 3.0);
        assert!((e[1] - (6.0 - 3f64.sqrt())).abs() < 1e-14);
        assert!((lambda1([1.0, 1.0, 1.0]).unwrap() - 3.0).abs() < 1e-15);
        assert!((lambda2([1.0, 1.0, 1.0]).unwrap() - 1.5).abs() < 1e-15);
        // Direct transcription of the half-trace-minus-radical form.
        let inv: [f64; 3] = [1.0, 0.5, 1.0 / 3.0];
        let r = (0.5 * ((inv[0] - inv[1]) * (inv[0] - inv[1]) + (inv[1] - inv[2]) * (inv[1] - inv[2]) + (inv[2] - inv[0]) * (inv[2] - inv[0]))).sqrt();
        let naive = 0.5 * (inv.iter().sum::<f64>() - r);
        assert!((lambda2([1.0, 2.0, 3.0]).unwrap() - naive).abs() < 1e-14);
    }

    #[test]
    fn equilateral_l_a_is_scaled_identity() {
        let s = 3f64.sqrt();
        let tri = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(s, 0.0), Vec2::new(s / 2.0, 1.5)).unwrap();
        let eq = fermat_point(&tri, 1e-12).unwrap();
        let l = build_l_a(&eq);
        assert!((l[0][0] - 1.5).abs() < 1e-12 && (l[1][1] - 1.5).abs() < 1e-12 && l[0][1].abs() < 1e-12);
    }

    #[test]
    fn combined_rate_unit_case() {
        let tri = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(3f64.sqrt(), 0.0), Vec2::new(3f64.sqrt() / 2.0, 1.5)).unwrap();
        let sys = JunctionSystem::new(tri, SurfaceTensionModel::builtin(), 1.0, 1.0).unwrap();
        let eq = fermat_point(&tri, 1e-12).unwrap();
        let lin = LinearizedSystem::at_equilibrium(&sys, &eq).unwrap();
        assert!((lin.lambda - 1.5).abs() < 1e-12);
        let (da, dv) = lin.slowest_mode(&sys);
        assert_eq!(da, [0.0; 3]);
        assert!((dv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stability_csv_shape() {
        let row = StabilityRow { lengths: [1.0; 3], lambda1: 3.0, lambda2: 1.5, lambda: 1.5, observed: None, r_squared: None };
        let mut buf = Vec::new();
        write_stability_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "1.0,1.0,1.0,3.0,1.5,1.5,,");
    }
}
