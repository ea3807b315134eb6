//! Reduced single-triple-junction system: three grain orientations and one
//! mobile junction connected by straight boundaries to fixed anchors.
//!
//! Indexing is zero-based and cyclic. Boundary `j` runs from the junction to
//! anchor `j` and separates grains `j` and `j - 1`, so its misorientation is
//! `Δⱼ = α[j-1] − α[j]`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{self, AnchorTriangle, EquilibriumState};
use crate::ode::{rk4_step, AdaptiveOptions, Dopri5};
use crate::surface_tension::SurfaceTensionModel;
use crate::vec2::Vec2;

/// Boundaries shorter than this count as a collision with an anchor.
pub const LENGTH_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionState {
    pub alpha: [f64; 3],
    pub a: Vec2,
    pub t: f64,
}

impl JunctionState {
    pub fn new(alpha: [f64; 3], a: Vec2) -> Self {
        JunctionState { alpha, a, t: 0.0 }
    }

    fn to_array(self) -> [f64; 5] {
        [self.alpha[0], self.alpha[1], self.alpha[2], self.a.x, self.a.y]
    }

    fn from_array(y: &[f64; 5], t: f64) -> Self {
        JunctionState { alpha: [y[0], y[1], y[2]], a: Vec2::new(y[3], y[4]), t }
    }
}

/// `Δⱼ = α[j-1] − α[j]` (cyclic).
pub fn misorientations(alpha: &[f64; 3]) -> [f64; 3] {
    [alpha[2] - alpha[0], alpha[0] - alpha[1], alpha[1] - alpha[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionDerivative {
    pub dalpha: [f64; 3],
    pub da: Vec2,
}

impl JunctionDerivative {
    pub fn dalpha_norm(&self) -> f64 {
        self.dalpha.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone)]
pub struct JunctionSystem {
    pub tri: AnchorTriangle,
    pub model: SurfaceTensionModel,
    pub gamma: f64,
    pub eta: f64,
}

impl std::fmt::Debug for JunctionSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JunctionSystem")
            .field("tri", &self.tri)
            .field("model", &self.model.label())
            .field("gamma", &self.gamma)
            .field("eta", &self.eta)
            .finish()
    }
}

/// Stepping scheme for [`JunctionSystem::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Adaptive { rtol: f64, atol: f64 },
    /// Classical RK4 with at most `dt` per step.
    Fixed { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub sample_dt: f64,
    pub stepping: Stepping,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { sample_dt: 0.01, stepping: Stepping::Adaptive { rtol: 1e-10, atol: 1e-14 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub state: JunctionState,
    pub energy: f64,
    pub dalpha_norm: f64,
    pub da_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Completed,
    AnchorCollision { anchor: usize, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Whether the confinement condition held at the initial state.
    pub guaranteed: bool,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// CSV with columns `t,alpha1,alpha2,alpha3,ax,ay,E,dalpha_norm,da_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# units: t [time], alpha [rad], a [length], E [energy], |dalpha/dt| [rad/time], |da/dt| [length/time]")?;
        writeln!(w, "t,alpha1,alpha2,alpha3,ax,ay,E,dalpha_norm,da_norm")?;
        for s in &self.samples {
            let st = &s.state;
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                st.t, st.alpha[0], st.alpha[1], st.alpha[2], st.a.x, st.a.y, s.energy, s.dalpha_norm, s.da_norm
            )?;
        }
        Ok(())
    }
}

/// Lower bound on the existence time together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceBound {
    pub bound: f64,
    pub terms: [f64; 4],
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// Set when a vanishing initial displacement makes the bound zero.
    pub degenerate: bool,
}

/// Grid resolution for the suprema in the existence bound.
pub const BOUND_GRID: usize = 20_001;

impl JunctionSystem {
    pub fn new(tri: AnchorTriangle, model: SurfaceTensionModel, gamma: f64, eta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        Ok(JunctionSystem { tri, model, gamma, eta })
    }

    /// `bⱼ = xⱼ − a`.
    pub fn boundaries(&self, a: Vec2) -> [Vec2; 3] {
        [self.tri.points[0] - a, self.tri.points[1] - a, self.tri.points[2] - a]
    }

    fn check_lengths(&self, b: &[Vec2; 3]) -> Result<[f64; 3]> {
        let l = [b[0].norm(), b[1].norm(), b[2].norm()];
        for (j, &len) in l.iter().enumerate() {
            if !(len >= LENGTH_FLOOR) {
                return Err(Error::AnchorCollision { anchor: j, length: len });
            }
        }
        Ok(l)
    }

    pub fn rhs(&self, s: &JunctionState) -> Result<JunctionDerivative> {
        let b = self.boundaries(s.a);
        let l = self.check_lengths(&b)?;
        let d = misorientations(&s.alpha);
        let torque = [
            self.model.dsigma(d[0]) * l[0],
            self.model.dsigma(d[1]) * l[1],
            self.model.dsigma(d[2]) * l[2],
        ];
        let mut dalpha = [0.0; 3];
        for j in 0..3 {
            dalpha[j] = -self.gamma * (torque[(j + 1) % 3] - torque[j]);
        }
        let da: Vec2 = (0..3).map(|j| self.model.sigma(d[j]) * (b[j] / l[j])).sum::<Vec2>() * self.eta;
        Ok(JunctionDerivative { dalpha, da })
    }

    pub fn energy(&self, s: &JunctionState) -> f64 {
        let d = misorientations(&s.alpha);
        (0..3).map(|j| self.model.sigma(d[j]) * (self.tri.points[j] - s.a).norm()).sum()
    }

    fn sample(&self, state: JunctionState) -> Result<TrajectorySample> {
        let d = self.rhs(&state)?;
        Ok(TrajectorySample { state, energy: self.energy(&state), dalpha_norm: d.dalpha_norm(), da_norm: d.da.norm() })
    }

    /// Whether the confinement condition holds for `s0`; false when the
    /// equilibrium itself does not exist.
    pub fn energy_condition_holds(&self, s0: &JunctionState) -> bool {
        match geometry::fermat_point(&self.tri, geometry::FERMAT_TOL) {
            Ok(eq) => {
                let c1 = geometry::perimeter_barrier_constant(&self.tri, &eq);
                geometry::check_energy_condition(s0, &self.model, &self.tri, &eq, c1)
            }
            Err(_) => false,
        }
    }

    /// Integrates from `s0` to `t_end`, sampling every `opts.sample_dt`.
    pub fn integrate(&self, s0: &JunctionState, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
        if !(opts.sample_dt > 0.0) || !(t_end >= s0.t) {
            return Err(Error::InvalidArgument("need sample_dt > 0 and t_end >= t0".into()));
        }
        let guaranteed = self.energy_condition_holds(s0);
        let mut samples = vec![self.sample(*s0)?];
        let n = ((t_end - s0.t) / opts.sample_dt - 1e-9).ceil().max(0.0) as usize;
        let mut f = |_t: f64, y: &[f64; 5]| -> Result<[f64; 5]> {
            let d = self.rhs(&JunctionState::from_array(y, 0.0))?;
            Ok([d.dalpha[0], d.dalpha[1], d.dalpha[2], d.da.x, d.da.y])
        };
        let mut dopri = match opts.stepping {
            Stepping::Adaptive { rtol, atol } => {
                Some(Dopri5::new(AdaptiveOptions { rtol, atol, h_max: opts.sample_dt }))
            }
            Stepping::Fixed { dt } if dt > 0.0 => None,
            Stepping::Fixed { .. } => return Err(Error::InvalidArgument("dt must be positive".into())),
        };
        let mut y = s0.to_array();
        let mut t = s0.t;
        let mut stop = StopReason::Completed;
        for k in 1..=n {
            let t_next = (s0.t + k as f64 * opts.sample_dt).min(t_end);
            let step = match (&mut dopri, opts.stepping) {
                (Some(d), _) => d.advance(&mut f, t, y, t_next),
                (None, Stepping::Fixed { dt }) => {
                    let m = ((t_next - t) / dt - 1e-9).ceil().max(1.0) as usize;
                    let h = (t_next - t) / m as f64;
                    let mut yy = y;
                    let mut res = Ok(yy);
                    for i in 0..m {
                        match rk4_step(&mut f, t + i as f64 * h, &yy, h) {
                            Ok(v) => {
                                yy = v;
                                res = Ok(yy);
                            }
                            Err(e) => {
                                res = Err(e);
                                break;
                            }
                        }
                    }
                    res
                }
                (None, _) => unreachable!(),
            };
            match step {
                Ok(v) => {
                    let st = JunctionState::from_array(&v, t_next);
                    match self.sample(st) {
                        Ok(s) => samples.push(s),
                        Err(Error::AnchorCollision { anchor, .. }) => {
                            stop = StopReason::AnchorCollision { anchor, t: t_next };
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                    y = v;
                    t = t_next;
                }
                Err(Error::AnchorCollision { anchor, .. }) => {
                    stop = StopReason::AnchorCollision { anchor, t };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Trajectory { samples, guaranteed, stop })
    }

    /// Minimum of the four existence-time quantities for initial data `s0`.
    ///
    /// `M₀ = sup|σ|`, `M₁ = sup|σ_θ|` and the Lipschitz constant `M₂` of
    /// `σ_θ` are taken over `|θ| ≤ 4|α₀|` on a uniform grid, so `M₂` is an
    /// approximation from below.
    pub fn existence_time_lower_bound(&self, s0: &JunctionState, eq: &EquilibriumState) -> Result<ExistenceBound> {
        let disp = (s0.a - eq.a_inf).norm();
        let limit = 0.5 * eq.min_length();
        if !(disp < limit) {
            return Err(Error::DisplacementTooLarge { displacement: disp, limit });
        }
        let alpha_norm = s0.alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
        let w = 4.0 * alpha_norm;
        let (m0, m1, m2) = if w == 0.0 {
            (self.model.sigma(0.0).abs(), self.model.dsigma(0.0).abs(), 0.0)
        } else {
            let n = BOUND_GRID;
            let h = 2.0 * w / (n - 1) as f64;
            let mut m0 = 0f64;
            let mut m1 = 0f64;
            let mut m2 = 0f64;
            let mut prev: Option<f64> = None;
            for i in 0..n {
                let th = -w + h * i as f64;
                m0 = m0.max(self.model.sigma(th).abs());
                let ds = self.model.dsigma(th);
                m1 = m1.max(ds.abs());
                if let Some(p) = prev {
                    m2 = m2.max((ds - p).abs() / h);
                }
                prev = Some(ds);
            }
            (m0, m1, m2)
        };
        let sum_b: f64 = eq.lengths.iter().sum();
        let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
        let t1 = ratio(alpha_norm, 4.0 * self.gamma * (m1 + 8.0 * m2 * alpha_norm) * sum_b);
        let t2 = ratio(disp, 3.0 * self.eta * m0);
        let t3 = 1.0 / (12.0 * self.gamma * m1);
        let inv: f64 = eq.lengths.iter().map(|l| 1.0 / (l - 2.0 * disp)).sum();
        let t4 = 1.0 / (8.0 * self.eta * m0 * inv);
        let terms = [t1, t2, t3, t4];
        let bound = terms.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ExistenceBound { bound, terms, m0, m1, m2, degenerate: alpha_norm == 0.0 || disp == 0.0 })
    }

    /// Central-difference Jacobian of [`Self::rhs`] in the variables
    /// `(α₁, α₂, α₃, aₓ, a_y)`.
    pub fn numerical_jacobian(&self, s: &JunctionState, h: f64) -> Result<[[f64; 5]; 5]> {
        let y0 = s.to_array();
        let mut jac = [[0.0; 5]; 5];
        for c in 0..5 {
            let mut yp = y0;
            let mut ym = y0;
            yp[c] += h;
            ym[c] -= h;
            let fp = self.rhs(&JunctionState::from_array(&yp, s.t))?;
            let fm = self.rhs(&JunctionState::from_array(&ym, s.t))?;
            let vp = [fp.dalpha[0], fp.dalpha[1], fp.dalpha[2], fp.da.x, fp.da.y];
            let vm = [fm.dalpha[0], fm.dalpha[1], fm.dalpha[2], fm.da.x, fm.da.y];
            for r in 0..5 {
                jac[r][c] = (vp[r] - vm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

/// `|E(T) + (1/γ)∫|α̇|² + (1/η)∫|ȧ|² − E(0)|` with trapezoidal quadrature
/// over the trajectory samples.
pub fn dissipation_residual(sys: &JunctionSystem, traj: &Trajectory) -> f64 {
    let s = &traj.samples;
    if s.is_empty() {
        return 0.0;
    }
    let mut integral = 0.0;
    for w in s.windows(2) {
        let dt = w[1].state.t - w[0].state.t;
        let fa = |p: &TrajectorySample| p.dalpha_norm.powi(2) / sys.gamma + p.da_norm.powi(2) / sys.eta;
        integral += 0.5 * dt * (fa(&w[0]) + fa(&w[1]));
    }
    (s[s.len() - 1].energy + integral - s[0].energy).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral_system(gamma: f64, eta: f64) -> JunctionSystem {
        let tri = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 3f64.sqrt() / 2.0)).unwrap();
        JunctionSystem::new(tri, SurfaceTensionModel::builtin(), gamma, eta).unwrap()
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let d = sys.rhs(&JunctionState::new([0.3; 3], eq.a_inf)).unwrap();
        assert!(d.dalpha_norm() == 0.0);
        assert!(d.da.norm() < 1e-12);
    }

    #[test]
    fn uniform_orientation_freezes_alpha() {
        let sys = equilateral_system(1.0, 2.0);
        let a = Vec2::new(0.4, 0.2);
        let d = sys.rhs(&JunctionState::new([0.1; 3], a)).unwrap();
        assert_eq!(d.dalpha, [0.0; 3]);
        let expect: Vec2 = sys.boundaries(a).iter().map(|b| b.unit()).sum::<Vec2>() * 2.0;
        assert!((d.da - expect).norm() < 1e-14);
    }

    #[test]
    fn orientation_sum_is_conserved_by_rhs() {
        let sys = equilateral_system(1.3, 0.7);
        let d = sys.rhs(&JunctionState::new([0.2, -0.1, 0.05], Vec2::new(0.45, 0.3))).unwrap();
        assert!(d.dalpha.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn equilateral_energy_is_root_three() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let e = sys.energy(&JunctionState::new([0.0; 3], eq.a_inf));
        assert!((e - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collision_is_an_error() {
        let sys = equilateral_system(1.0, 1.0);
        let r = sys.rhs(&JunctionState::new([0.0; 3], Vec2::new(1.0, 0.0)));
        assert!(matches!(r, Err(Error::AnchorCollision { anchor: 1, .. })));
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let s0 = JunctionState::new([0.0; 3], eq.a_inf);
        let tr = sys.integrate(&s0, 1.0, &IntegrateOptions::default()).unwrap();
        assert_eq!(tr.samples.len(), 101);
        for s in &tr.samples {
            assert!((s.state.a - eq.a_inf).norm() < 1e-12);
        }
        assert!(dissipation_residual(&sys, &tr) < 1e-12);
        assert!(tr.guaranteed);
    }

    #[test]
    fn existence_bound_degenerate_at_equilibrium() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let b = sys.existence_time_lower_bound(&JunctionState::new([0.0; 3], eq.a_inf), &eq).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.bound, 0.0);
    }

    #[test]
    fn existence_bound_rejects_large_displacement() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let s0 = JunctionState::new([0.0; 3], eq.a_inf + Vec2::new(0.3, 0.0));
        assert!(matches!(sys.existence_time_lower_bound(&s0, &eq), Err(Error::DisplacementTooLarge { .. })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sys = equilateral_system(1.0, 1.0);
        let eq = geometry::fermat_point(&sys.tri, 1e-12).unwrap();
        let s0 = JunctionState::new([0.1, -0.05, -0.05], eq.a_inf);
        let tr = sys.integrate(&s0, 0.05, &IntegrateOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1], "t,alpha1,alpha2,alpha3,ax,ay,E,dalpha_norm,da_norm");
        assert_eq!(lines.len(), 2 + tr.samples.len());
    }
}
