//! Single-junction runs and stability sweeps.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fermat_point, AnchorTriangle, EquilibriumState, FERMAT_TOL};
use crate::junction_dynamics::{
    dissipation_residual, IntegrateOptions, JunctionState, JunctionSystem, StopReason, Stepping, Trajectory,
};
use crate::linear_stability::{combined_rate, measure_decay_rate, write_stability_csv, DecayFit, LinearizedSystem, StabilityRow};
use crate::vec2::Vec2;

use super::config::RunConfig;
use super::svg::{line_chart, Series};
use super::{create_file, ensure_dir};

/// Smallest equilibrium boundary accepted by [`random_admissible_triangle`].
pub const MIN_EQ_LENGTH: f64 = 0.05;

/// Uniform vertices in the unit square, resampled until every angle is
/// below 2π/3 and every equilibrium boundary is at least [`MIN_EQ_LENGTH`].
pub fn random_admissible_triangle<R: Rng>(rng: &mut R) -> (AnchorTriangle, EquilibriumState) {
    loop {
        let c: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
        let Ok(tri) = AnchorTriangle::from_coords(c) else { continue };
        if let Ok(eq) = fermat_point(&tri, FERMAT_TOL) {
            if eq.min_length() >= MIN_EQ_LENGTH {
                return (tri, eq);
            }
        }
    }
}

/// Initial state at distance `radius` from equilibrium in a random
/// direction of the five-dimensional state space, keeping `Σα = 0`.
pub fn random_perturbation<R: Rng>(rng: &mut R, eq: &EquilibriumState, radius: f64) -> JunctionState {
    let v: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
    let m = (v[0] + v[1] + v[2]) / 3.0;
    let alpha = [v[0] - m, v[1] - m, v[2] - m];
    let na = alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
    let da = Vec2::new(v[3], v[4]);
    let nd = da.norm();
    // Split the radius between orientation and position parts.
    let share = rng.random::<f64>();
    let alpha = alpha.map(|x| x / na.max(1e-300) * share * radius);
    JunctionState::new(alpha, eq.a_inf + da / nd.max(1e-300) * (1.0 - share) * radius)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionReport {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `min(γσ_θθ(0)λ₁, ησ(0)λ₂)`.
    pub lambda: f64,
    pub observed: Option<DecayFit>,
    pub dissipation_residual: f64,
    pub guaranteed: bool,
    pub stop: StopReason,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub alpha_inf: f64,
    pub a_inf: Vec2,
}

impl JunctionReport {
    pub fn write(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "lambda1 = {:?}", self.lambda1)?;
        writeln!(w, "lambda2 = {:?}", self.lambda2)?;
        writeln!(w, "lambda = {:?}", self.lambda)?;
        match &self.observed {
            Some(f) => {
                writeln!(w, "observed_rate = {:?}", f.rate)?;
                writeln!(w, "observed_r_squared = {:?}", f.r_squared)?;
            }
            None => writeln!(w, "observed_rate = none")?,
        }
        writeln!(w, "dissipation_residual = {:?}", self.dissipation_residual)?;
        writeln!(w, "energy_condition = {}", self.guaranteed)?;
        match self.stop {
            StopReason::Completed => writeln!(w, "stop = completed")?,
            StopReason::AnchorCollision { anchor, t } => writeln!(w, "stop = anchor-collision {anchor} at t = {t:?}")?,
        }
        writeln!(w, "energy_initial = {:?}", self.energy_initial)?;
        writeln!(w, "energy_final = {:?}", self.energy_final)?;
        writeln!(w, "alpha_inf = {:?}", self.alpha_inf)?;
        writeln!(w, "a_inf = [{:?}, {:?}]", self.a_inf.x, self.a_inf.y)
    }
}

/// Integrates the configured junction and evaluates its stability data.
pub fn simulate_junction(cfg: &RunConfig) -> Result<(Trajectory, JunctionReport)> {
    cfg.validate()?;
    let j = &cfg.junction;
    let tri = cfg.triangle()?;
    let eq = fermat_point(&tri, FERMAT_TOL).map_err(|e| Error::Config { field: "junction.triangle".into(), message: e.to_string() })?;
    let sys = JunctionSystem::new(tri, cfg.model(), cfg.dynamics.gamma, cfg.dynamics.eta)?;
    let a0 = match j.a0 {
        Some([x, y]) => Vec2::new(x, y),
        None => eq.a_inf + 0.25 * eq.min_length() * Vec2::new(0.7f64.cos(), 0.7f64.sin()),
    };
    let s0 = JunctionState::new(j.alpha0, a0);
    let opts = IntegrateOptions { sample_dt: j.sample_dt, stepping: Stepping::Adaptive { rtol: j.rtol, atol: j.atol } };
    let traj = sys.integrate(&s0, j.t_end, &opts)?;
    let lin = LinearizedSystem::at_equilibrium(&sys, &eq)?;
    let alpha_inf = j.alpha0.iter().sum::<f64>() / 3.0;
    let report = JunctionReport {
        lambda1: lin.lambda1,
        lambda2: lin.lambda2,
        lambda: combined_rate(&sys, &lin),
        observed: measure_decay_rate(&traj, alpha_inf, eq.a_inf).ok(),
        dissipation_residual: dissipation_residual(&sys, &traj),
        guaranteed: traj.guaranteed,
        stop: traj.stop,
        energy_initial: traj.samples[0].energy,
        energy_final: traj.last().energy,
        alpha_inf,
        a_inf: eq.a_inf,
    };
    Ok((traj, report))
}

/// Writes `trajectory.csv`, `report.txt` and `energy.svg` into the output directory.
pub fn run_junction(cfg: &RunConfig) -> Result<JunctionReport> {
    let (traj, report) = simulate_junction(cfg)?;
    let out = &cfg.output;
    ensure_dir(out)?;
    traj.write_csv(create_file(&out.join("trajectory.csv"))?)?;
    report.write(&mut create_file(&out.join("report.txt"))?)?;
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.state.t, s.energy)).collect();
    std::fs::write(out.join("energy.svg"), line_chart("junction energy", "t", "E", &[Series::new("E(t)", pts)]))?;
    Ok(report)
}

/// One stability row per random triangle, seeded per index so results do
/// not depend on thread scheduling.
pub fn stability_sweep(cfg: &RunConfig) -> Result<Vec<StabilityRow>> {
    cfg.validate()?;
    let s = &cfg.stability;
    let model = cfg.model();
    (0..s.n_triangles)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(i as u64));
            let (tri, eq) = random_admissible_triangle(&mut rng);
            let sys = JunctionSystem::new(tri, model.clone(), cfg.dynamics.gamma, cfg.dynamics.eta)?;
            let lin = LinearizedSystem::at_equilibrium(&sys, &eq)?;
            let lambda = combined_rate(&sys, &lin);
            let (observed, r_squared) = if s.measure {
                let s0 = random_perturbation(&mut rng, &eq, s.perturbation * eq.min_length());
                let dt = (0.25 / lambda).min(s.t_end / 100.0);
                let traj = sys.integrate(&s0, s.t_end, &IntegrateOptions { sample_dt: dt, ..Default::default() })?;
                match measure_decay_rate(&traj, 0.0, eq.a_inf) {
                    Ok(f) => (Some(f.rate), Some(f.r_squared)),
                    Err(_) => (None, None),
                }
            } else {
                (None, None)
            };
            Ok(StabilityRow { lengths: eq.lengths, lambda1: lin.lambda1, lambda2: lin.lambda2, lambda, observed, r_squared })
        })
        .collect()
}

/// Writes `stability.csv` and `stability.svg`.
pub fn run_stability(cfg: &RunConfig) -> Result<Vec<StabilityRow>> {
    let rows = stability_sweep(cfg)?;
    let out = &cfg.output;
    ensure_dir(out)?;
    write_stability_csv(&rows, create_file(&out.join("stability.csv"))?)?;
    let pred: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.lambda)).collect();
    let obs: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.observed.map(|o| (r.lambda, o))).collect();
    let mut sorted = pred;
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    std::fs::write(
        out.join("stability.svg"),
        line_chart("observed vs predicted decay rate", "lambda", "rate", &[Series::new("observed", obs), Series::new("predicted", sorted).dashed()]),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::config::Mode;
    use crate::geometry::check_condition_1_4;

    #[test]
    fn random_triangles_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (tri, eq) = random_admissible_triangle(&mut rng);
            assert_eq!(check_condition_1_4(&tri).unwrap(), [true; 3]);
            assert!(eq.residual() < 1e-10);
        }
    }

    #[test]
    fn perturbation_has_requested_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, eq) = random_admissible_triangle(&mut rng);
        let s = random_perturbation(&mut rng, &eq, 1e-3);
        let na = s.alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((na + (s.a - eq.a_inf).norm() - 1e-3).abs() < 1e-15);
        assert!(s.alpha.iter().sum::<f64>().abs() < 1e-18);
    }

    #[test]
    fn default_junction_run_dissipates() {
        let mut cfg = RunConfig::new(Mode::Junction);
        cfg.junction.t_end = 2.0;
        let (traj, rep) = simulate_junction(&cfg).unwrap();
        assert!(traj.samples.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12));
        assert!(rep.energy_final < rep.energy_initial);
        assert!(rep.lambda > 0.0);
    }
}
