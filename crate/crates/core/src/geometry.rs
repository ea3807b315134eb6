//! Fermat–Torricelli equilibrium of a single triple junction, the
//! non-degeneracy condition on the anchor triangle, and the energy barrier
//! that keeps the junction confined.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::junction_dynamics::JunctionState;
use crate::surface_tension::SurfaceTensionModel;
use crate::vec2::Vec2;

/// Default residual tolerance for [`fermat_point`].
pub const FERMAT_TOL: f64 = 1e-12;
/// Iteration cap shared by the Weiszfeld and Newton phases.
pub const FERMAT_MAX_ITER: usize = 100_000;

/// Three fixed outer endpoints of the boundaries meeting at a junction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTriangle {
    pub points: [Vec2; 3],
}

impl AnchorTriangle {
    pub fn new(x1: Vec2, x2: Vec2, x3: Vec2) -> Result<Self> {
        let points = [x1, x2, x3];
        for p in &points {
            if !p.is_finite() {
                return Err(Error::InvalidArgument("non-finite anchor coordinate".into()));
            }
        }
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            if points[i] == points[j] {
                return Err(Error::CoincidentPoints(i, j));
            }
        }
        Ok(AnchorTriangle { points })
    }

    pub fn from_coords(c: [f64; 6]) -> Result<Self> {
        Self::new(Vec2::new(c[0], c[1]), Vec2::new(c[2], c[3]), Vec2::new(c[4], c[5]))
    }

    pub fn to_coords(&self) -> [f64; 6] {
        let [a, b, c] = self.points;
        [a.x, a.y, b.x, b.y, c.x, c.y]
    }

    /// `f(a) = Σ |x⁽ʲ⁾ − a|`.
    pub fn total_distance(&self, a: Vec2) -> f64 {
        self.points.iter().map(|&x| (x - a).norm()).sum()
    }

    /// Interior angle at each vertex.
    pub fn angles(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let p = self.points[i];
            let u = self.points[(i + 1) % 3] - p;
            let v = self.points[(i + 2) % 3] - p;
            *o = u.cross(v).abs().atan2(u.dot(v));
        }
        out
    }
}

impl fmt::Display for AnchorTriangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.to_coords();
        write!(f, "{:?} {:?} {:?} {:?} {:?} {:?}", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

impl FromStr for AnchorTriangle {
    type Err = Error;

    /// Six floats `x1 y1 x2 y2 x3 y3`, separated by whitespace and/or commas.
    fn from_str(s: &str) -> Result<Self> {
        let mut coords = [0.0; 6];
        let mut n = 0;
        for tok in s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            if n == 6 {
                return Err(Error::Parse { line: 1, message: "more than six coordinates".into() });
            }
            coords[n] = tok.parse().map_err(|_| Error::Parse {
                line: 1,
                message: format!("invalid coordinate `{tok}`"),
            })?;
            n += 1;
        }
        if n != 6 {
            return Err(Error::Parse { line: 1, message: format!("expected six coordinates, found {n}") });
        }
        Self::from_coords(coords)
    }
}

/// For each vertex i, whether `|Σ_{j≠i} unit(x⁽ʲ⁾ − x⁽ⁱ⁾)| > 1`.
///
/// All three hold exactly when every angle of the triangle is below 2π/3.
pub fn check_condition_1_4(tri: &AnchorTriangle) -> Result<[bool; 3]> {
    let p = tri.points;
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        if p[i] == p[j] {
            return Err(Error::CoincidentPoints(i, j));
        }
    }
    let mut out = [false; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let s = (p[(i + 1) % 3] - p[i]).unit() + (p[(i + 2) % 3] - p[i]).unit();
        *o = s.norm() > 1.0;
    }
    Ok(out)
}

/// Equilibrium junction position and boundary vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumState {
    pub a_inf: Vec2,
    /// `x⁽ʲ⁾ − a_inf`.
    pub b_inf: [Vec2; 3],
    pub lengths: [f64; 3],
}

impl EquilibriumState {
    pub fn units(&self) -> [Vec2; 3] {
        [
            self.b_inf[0] / self.lengths[0],
            self.b_inf[1] / self.lengths[1],
            self.b_inf[2] / self.lengths[2],
        ]
    }

    /// `|Σ unit(b⁽ʲ⁾)|`.
    pub fn residual(&self) -> f64 {
        self.units().iter().copied().sum::<Vec2>().norm()
    }

    /// `f(a_inf) = Σ |b⁽ʲ⁾|`.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Minimizer of `Σ|x⁽ʲ⁾ − a|` with `|Σ unit(b⁽ʲ⁾)| ≤ tol`.
pub fn fermat_point(tri: &AnchorTriangle, tol: f64) -> Result<EquilibriumState> {
    let ok = check_condition_1_4(tri)?;
    if let Some(i) = ok.iter().position(|&b| !b) {
        return Err(Error::WideAngle(i));
    }
    let sol = weighted_fermat_point(&tri.points, &[1.0; 3], tol)?;
    let a = sol.point;
    let b_inf = [tri.points[0] - a, tri.points[1] - a, tri.points[2] - a];
    let lengths = [b_inf[0].norm(), b_inf[1].norm(), b_inf[2].norm()];
    let eq = EquilibriumState { a_inf: a, b_inf, lengths };
    let res = eq.residual();
    if !(res <= tol) {
        return Err(Error::NoConvergence { what: "fermat point", iterations: FERMAT_MAX_ITER, residual: res });
    }
    Ok(eq)
}

/// Result of the weighted Fermat problem `min Σ wⱼ |xⱼ − a|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedFermat {
    pub point: Vec2,
    /// Set when the minimizer is one of the anchors.
    pub at_vertex: Option<usize>,
}

/// Solves `min_a Σ wⱼ|xⱼ − a|` for three anchors and positive weights.
///
/// Damped Weiszfeld iteration brings the residual `|Σ wⱼ unit(xⱼ − a)|` below
/// `sqrt(tol)`, after which Newton steps on the gradient finish the job.
/// When the weighted angle condition fails at an anchor, that anchor is the
/// minimizer and is reported through `at_vertex`.
pub fn weighted_fermat_point(points: &[Vec2; 3], weights: &[f64; 3], tol: f64) -> Result<WeightedFermat> {
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be positive and finite".into()));
    }
    for i in 0..3 {
        let pull: Vec2 = (0..3)
            .filter(|&j| j != i)
            .map(|j| weights[j] * (points[j] - points[i]).unit())
            .sum();
        if pull.norm() <= weights[i] {
            return Ok(WeightedFermat { point: points[i], at_vertex: Some(i) });
        }
    }

    let scale = (points[1] - points[0]).norm() + (points[2] - points[1]).norm() + (points[0] - points[2]).norm();
    let guard = 1e-14 * scale;
    let wsum: f64 = weights.iter().sum();
    let force = |a: Vec2| -> Vec2 { (0..3).map(|j| weights[j] * (points[j] - a).unit()).sum() };

    let mut a = (0..3).map(|j| weights[j] * points[j]).sum::<Vec2>() / wsum;
    let mut iter = 0;
    let switch = tol.sqrt().max(1e-8 * wsum);
    while iter < FERMAT_MAX_ITER {
        let r = force(a).norm();
        if r <= switch {
            break;
        }
        let mut num = Vec2::ZERO;
        let mut den = 0.0;
        for j in 0..3 {
            let d = (points[j] - a).norm().max(guard);
            num += weights[j] / d * points[j];
            den += weights[j] / d;
        }
        let next = num / den;
        // Damping: halve the step while it fails to decrease the objective.
        let obj = |p: Vec2| -> f64 { (0..3).map(|j| weights[j] * (points[j] - p).norm()).sum() };
        let f0 = obj(a);
        let mut step = next - a;
        let mut cand = a + step;
        let mut k = 0;
        while obj(cand) > f0 && k < 30 {
            step = step * 0.5;
            cand = a + step;
            k += 1;
        }
        if cand == a {
            break;
        }
        a = cand;
        iter += 1;
    }

    // Newton polish: Hessian Σ wⱼ/|bⱼ| (I − uⱼuⱼᵀ), gradient −Σ wⱼ uⱼ.
    let mut best = (force(a).norm(), a);
    for _ in 0..100 {
        if best.0 <= tol {
            break;
        }
        let (mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0);
        for j in 0..3 {
            let b = points[j] - a;
            let d = b.norm().max(guard);
            let u = b / d;
            let c = weights[j] / d;
            h11 += c * (1.0 - u.x * u.x);
            h12 -= c * u.x * u.y;
            h22 += c * (1.0 - u.y * u.y);
        }
        let g = force(a);
        let det = h11 * h22 - h12 * h12;
        if !(det.abs() > 0.0) {
            break;
        }
        let step = Vec2::new(h22 * g.x - h12 * g.y, -h12 * g.x + h11 * g.y) / det;
        let cand = a + step;
        let r = force(cand).norm();
        if !(r < best.0) {
            break;
        }
        a = cand;
        best = (r, a);
        iter += 1;
    }
    let a = best.1;
    if !a.is_finite() {
        return Err(Error::NoConvergence { what: "weighted fermat point", iterations: iter, residual: f64::NAN });
    }
    Ok(WeightedFermat { point: a, at_vertex: None })
}

/// `min_φ f(center + r(cos φ, sin φ))`.
pub fn min_on_circle(tri: &AnchorTriangle, center: Vec2, r: f64) -> f64 {
    let g = |phi: f64| tri.total_distance(center + r * Vec2::new(phi.cos(), phi.sin()));
    const SCAN: usize = 720;
    let h = std::f64::consts::TAU / SCAN as f64;
    let (best_k, _) = (0..SCAN)
        .map(|k| (k, g(h * k as f64)))
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    let phi0 = h * best_k as f64;
    golden_section(g, phi0 - h, phi0 + h, 1e-13).1
}

/// Golden-section minimization on `[lo, hi]`; returns `(argmin, min)`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, fx), |acc, p| if p.1 < acc.1 { p } else { acc })
}

/// `C₁ = inf{ f(a) : |a − a_inf| ≥ ½ minⱼ|b⁽ʲ⁾| }`, attained on the circle of
/// that radius because `f` is convex with its minimizer at the center.
pub fn perimeter_barrier_constant(tri: &AnchorTriangle, eq: &EquilibriumState) -> f64 {
    min_on_circle(tri, eq.a_inf, 0.5 * eq.min_length())
}

/// Initial energy `E(0) = Σ σ(Δ⁽ʲ⁾α₀)|a₀ − x⁽ʲ⁾|`.
fn initial_energy(state0: &JunctionState, model: &SurfaceTensionModel, tri: &AnchorTriangle) -> f64 {
    let d = crate::junction_dynamics::misorientations(&state0.alpha);
    (0..3).map(|j| model.sigma(d[j]) * (state0.a - tri.points[j]).norm()).sum()
}

/// `σ(0)·C₁ − E(0)`; positive exactly when the confinement condition holds.
pub fn energy_condition_margin(
    state0: &JunctionState,
    model: &SurfaceTensionModel,
    tri: &AnchorTriangle,
    c1: f64,
) -> f64 {
    model.sigma(0.0) * c1 - initial_energy(state0, model, tri)
}

/// `E(0) < σ(0)·C₁`, which confines the junction to the disk of radius
/// `½ minⱼ|b⁽ʲ⁾|` around `a_inf` for all time.
pub fn check_energy_condition(
    state0: &JunctionState,
    model: &SurfaceTensionModel,
    tri: &AnchorTriangle,
    _eq: &EquilibriumState,
    c1: f64,
) -> bool {
    energy_condition_margin(state0, model, tri, c1) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> AnchorTriangle {
        AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 3f64.sqrt() / 2.0)).unwrap()
    }

    #[test]
    fn condition_on_equilateral_and_degenerate() {
        assert_eq!(check_condition_1_4(&equilateral()).unwrap(), [true; 3]);
        let line = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)).unwrap();
        assert!(check_condition_1_4(&line).unwrap().contains(&false));
        let wide = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(-0.5, 0.05)).unwrap();
        let c = check_condition_1_4(&wide).unwrap();
        assert_eq!(c, [false, true, true]);
        assert!(wide.angles()[0] > 2.0 * std::f64::consts::FRAC_PI_3);
    }

    #[test]
    fn coincident_points_rejected() {
        assert_eq!(
            AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
            Err(Error::CoincidentPoints(0, 1))
        );
    }

    #[test]
    fn fermat_point_of_equilateral_is_centroid() {
        let eq = fermat_point(&equilateral(), 1e-12).unwrap();
        assert!((eq.a_inf - Vec2::new(0.5, 3f64.sqrt() / 6.0)).norm() < 1e-12);
        assert!(eq.residual() <= 1e-12);
        for j in 0..3 {
            assert_eq!(eq.a_inf + eq.b_inf[j], equilateral().points[j]);
        }
    }

    #[test]
    fn fermat_point_of_isoceles_is_stationary() {
        let tri = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let eq = fermat_point(&tri, 1e-12).unwrap();
        assert!(eq.residual() <= 1e-12);
        // Independent gradient check by central differences of f.
        let h = 1e-6;
        let gx = (tri.total_distance(eq.a_inf + Vec2::new(h, 0.0)) - tri.total_distance(eq.a_inf - Vec2::new(h, 0.0))) / (2.0 * h);
        let gy = (tri.total_distance(eq.a_inf + Vec2::new(0.0, h)) - tri.total_distance(eq.a_inf - Vec2::new(0.0, h))) / (2.0 * h);
        assert!(gx.abs() < 1e-8 && gy.abs() < 1e-8);
        // Symmetric about x = 1; Fermat point of this isoceles sits at y = 1/√3.
        assert!((eq.a_inf.x - 1.0).abs() < 1e-12);
        assert!((eq.a_inf.y - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fermat_point_rejects_collinear() {
        let line = AnchorTriangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)).unwrap();
        assert!(fermat_point(&line, 1e-12).is_err());
    }

    #[test]
    fn weighted_fermat_reports_vertex_minimizer() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let sol = weighted_fermat_point(&pts, &[5.0, 1.0, 1.0], 1e-12).unwrap();
        assert_eq!(sol.at_vertex, Some(0));
        let sol = weighted_fermat_point(&pts, &[1.0, 1.2, 0.9], 1e-12).unwrap();
        assert!(sol.at_vertex.is_none());
        let r: Vec2 = (0..3).map(|j| [1.0, 1.2, 0.9][j] * (pts[j] - sol.point).unit()).sum();
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn barrier_constant_exceeds_minimum() {
        let tri = equilateral();
        let eq = fermat_point(&tri, 1e-12).unwrap();
        let c1 = perimeter_barrier_constant(&tri, &eq);
        assert!(c1 > 3f64.sqrt());
        // Shrinking radius recovers f(a_inf).
        let near = min_on_circle(&tri, eq.a_inf, 1e-9);
        assert!((near - eq.total_length()).abs() < 1e-8);
    }

    #[test]
    fn triangle_text_round_trip() {
        let tri = equilateral();
        let back: AnchorTriangle = tri.to_string().parse().unwrap();
        assert_eq!(back, tri);
        assert!("1 2 3".parse::<AnchorTriangle>().is_err());
        assert!("0,0, 1,0, 0,1, 5".parse::<AnchorTriangle>().is_err());
        assert!("0 0 0 0 1 1".parse::<AnchorTriangle>().is_err());
        assert!("0,0 1,0 0,1".parse::<AnchorTriangle>().is_ok());
    }
}
