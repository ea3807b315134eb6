//! Explicit time stepping of the network flow with energy-guarded step
//! rejection, and the infinite-mobility variant that relaxes junctions to
//! local force balance.

use crate::error::{Error, Result};
use crate::geometry::weighted_fermat_point;
use crate::surface_tension::{SurfaceTensionModel, DEFAULT_THETA_MAX};
use crate::vec2::Vec2;

use super::events::{handle_critical_events, CriticalEvent, Thresholds};
use super::GrainNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    /// Heun's two-stage method.
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mobility {
    Finite(f64),
    /// `η → ∞`: junctions are relaxed towards local force balance each step.
    Herring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub gamma: f64,
    pub mobility: Mobility,
    pub scheme: Scheme,
    pub dt: f64,
    pub dt_max: f64,
    /// Relative energy increase tolerated before a step is rejected.
    pub energy_tol: f64,
    pub thresholds: Thresholds,
    /// Fermat-point tolerance for the infinite-mobility relaxation.
    pub relax_tol: f64,
    /// Gauss–Seidel sweeps per step in the infinite-mobility mode.
    pub relax_sweeps: usize,
}

impl StepConfig {
    /// Defaults scaled to the network: `dt = 1e-4·mean/(η·σ_max)`, with
    /// `η = 1` standing in for the infinite-mobility case.
    pub fn for_network(net: &GrainNetwork, model: &SurfaceTensionModel, gamma: f64, mobility: Mobility) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if let Mobility::Finite(eta) = mobility {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
            }
        }
        let mean = net.mean_length();
        if !(mean > 0.0) {
            return Err(Error::InvalidNetwork("network has no boundaries".into()));
        }
        let sigma_max = model.max_on(DEFAULT_THETA_MAX, 1001);
        let eta = match mobility {
            Mobility::Finite(eta) => eta,
            Mobility::Herring => 1.0,
        };
        let dt = 1e-4 * mean / (eta * sigma_max);
        Ok(StepConfig {
            gamma,
            mobility,
            scheme: Scheme::Euler,
            dt,
            dt_max: 10.0 * dt,
            energy_tol: 1e-13,
            thresholds: Thresholds::from_mean_length(mean),
            relax_tol: 1e-8,
            relax_sweeps: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub energy_before: f64,
    /// Energy after the continuous update, before events.
    pub energy_flow: f64,
    pub energy_after: f64,
    pub events: Vec<CriticalEvent>,
    /// Largest junction displacement in the step.
    pub max_move: f64,
}

#[derive(Debug, Clone)]
pub struct Stepper {
    pub cfg: StepConfig,
    pub dt: f64,
    pub steps: usize,
    pub rejections: usize,
}

struct Saved {
    pos: Vec<Vec2>,
    alpha: Vec<f64>,
}

fn save(net: &GrainNetwork) -> Saved {
    Saved {
        pos: net.junctions.iter().map(|j| j.as_ref().map_or(Vec2::ZERO, |j| j.pos)).collect(),
        alpha: net.grains.iter().map(|g| g.as_ref().map_or(0.0, |g| g.alpha)).collect(),
    }
}

fn restore(net: &mut GrainNetwork, s: &Saved) {
    for (j, p) in net.junctions.iter_mut().zip(&s.pos) {
        if let Some(j) = j {
            j.pos = *p;
        }
    }
    for (g, a) in net.grains.iter_mut().zip(&s.alpha) {
        if let Some(g) = g {
            g.alpha = *a;
        }
    }
}

fn apply(net: &mut GrainNetwork, s: &Saved, dpos: &[Vec2], dalpha: &[f64], h: f64) {
    for (i, j) in net.junctions.iter_mut().enumerate() {
        if let Some(j) = j {
            j.pos = s.pos[i] + h * dpos[i];
        }
    }
    for (i, g) in net.grains.iter_mut().enumerate() {
        if let Some(g) = g {
            g.alpha = s.alpha[i] + h * dalpha[i];
        }
    }
}

/// False when some boundary reversed direction or lost more than half its length.
fn boundaries_intact(net: &GrainNetwork, old: &[Vec2]) -> bool {
    net.boundaries.iter().zip(old).all(|(b, o)| match b {
        Some(b) => {
            let v = net.boundary_vec(b);
            v.dot(*o) > 0.0 && v.norm() >= 0.5 * o.norm()
        }
        None => true,
    })
}

impl Stepper {
    pub fn new(cfg: StepConfig) -> Self {
        Stepper { dt: cfg.dt, cfg, steps: 0, rejections: 0 }
    }

    fn dt_min(&self) -> f64 {
        1e-14 * self.cfg.dt
    }

    /// One accepted step followed by event handling.
    pub fn step(&mut self, net: &mut GrainNetwork, model: &SurfaceTensionModel) -> Result<StepReport> {
        let e0 = net.total_energy(model);
        let old_vecs: Vec<Vec2> = net.boundaries.iter().map(|b| b.as_ref().map_or(Vec2::ZERO, |b| net.boundary_vec(b))).collect();
        let saved = save(net);
        let (dt, max_move) = match self.cfg.mobility {
            Mobility::Finite(eta) => self.flow_step(net, model, eta, e0, &saved, &old_vecs)?,
            Mobility::Herring => {
                let zero = vec![Vec2::ZERO; net.junctions.len()];
                let dt = self.orientation_only_step(net, model, e0, &saved, &zero)?;
                let mv = self.relax(net, model);
                (dt, mv)
            }
        };
        net.t += dt;
        self.steps += 1;
        let e_flow = net.total_energy(model);
        let events = handle_critical_events(net, model, &self.cfg.thresholds)?;
        let e_after = if events.is_empty() { e_flow } else { net.total_energy(model) };
        Ok(StepReport { dt, energy_before: e0, energy_flow: e_flow, energy_after: e_after, events, max_move })
    }

    fn accept_dt(&mut self) {
        self.dt = (self.dt * 1.2).min(self.cfg.dt_max);
    }

    fn flow_step(
        &mut self,
        net: &mut GrainNetwork,
        model: &SurfaceTensionModel,
        eta: f64,
        e0: f64,
        saved: &Saved,
        old_vecs: &[Vec2],
    ) -> Result<(f64, f64)> {
        let f0 = net.junction_rhs(model, eta)?;
        let a0 = net.orientation_rhs(model, self.cfg.gamma);
        loop {
            let h = self.dt;
            apply(net, saved, &f0, &a0, h);
            let mut ok = boundaries_intact(net, old_vecs);
            let mut moved = f0.iter().map(|f| f.norm()).fold(0.0, f64::max) * h;
            if ok && self.cfg.scheme == Scheme::Heun {
                match net.junction_rhs(model, eta) {
                    Ok(f1) => {
                        let a1 = net.orientation_rhs(model, self.cfg.gamma);
                        let fm: Vec<Vec2> = f0.iter().zip(&f1).map(|(a, b)| 0.5 * (*a + *b)).collect();
                        let am: Vec<f64> = a0.iter().zip(&a1).map(|(a, b)| 0.5 * (a + b)).collect();
                        apply(net, saved, &fm, &am, h);
                        ok = boundaries_intact(net, old_vecs);
                        moved = fm.iter().map(|f| f.norm()).fold(0.0, f64::max) * h;
                    }
                    Err(_) => ok = false,
                }
            }
            if ok && net.total_energy(model) <= e0 + self.cfg.energy_tol * e0 {
                self.accept_dt();
                return Ok((h, moved));
            }
            restore(net, saved);
            self.rejections += 1;
            self.dt *= 0.5;
            if self.dt < self.dt_min() {
                return Err(Error::StepUnderflow { t: net.t, h: self.dt });
            }
        }
    }

    fn orientation_only_step(
        &mut self,
        net: &mut GrainNetwork,
        model: &SurfaceTensionModel,
        e0: f64,
        saved: &Saved,
        zero: &[Vec2],
    ) -> Result<f64> {
        let a0 = net.orientation_rhs(model, self.cfg.gamma);
        loop {
            let h = self.dt;
            apply(net, saved, zero, &a0, h);
            if net.total_energy(model) <= e0 + self.cfg.energy_tol * e0 {
                self.accept_dt();
                return Ok(h);
            }
            restore(net, saved);
            self.rejections += 1;
            self.dt *= 0.5;
            if self.dt < self.dt_min() {
                return Err(Error::StepUnderflow { t: net.t, h: self.dt });
            }
        }
    }

    /// Gauss–Seidel sweeps moving each free junction to the weighted Fermat
    /// point of its neighbours; each move lowers the energy.
    fn relax(&self, net: &mut GrainNetwork, model: &SurfaceTensionModel) -> f64 {
        let ids: Vec<usize> = net.junction_ids().collect();
        let mut max_move = 0f64;
        for _ in 0..self.cfg.relax_sweeps.max(1) {
            let mut sweep_move = 0f64;
            for &j in &ids {
                let Some(junc) = net.junctions[j].as_ref() else { continue };
                if junc.pinned || junc.edges.len() != 3 {
                    continue;
                }
                let edges = [junc.edges[0], junc.edges[1], junc.edges[2]];
                let pos = junc.pos;
                let nb = edges.map(|e| pos + net.vec_from(e, j));
                let w = edges.map(|e| net.boundary_sigma(e, model));
                let local = |p: Vec2| (0..3).map(|i| w[i] * (nb[i] - p).norm()).sum::<f64>();
                let Ok(sol) = weighted_fermat_point(&nb, &w, self.cfg.relax_tol) else { continue };
                let target = match sol.at_vertex {
                    Some(k) => pos + 0.99 * (nb[k] - pos),
                    None => sol.point,
                };
                if local(target) < local(pos) {
                    sweep_move = sweep_move.max((target - pos).norm());
                    net.junctions[j].as_mut().unwrap().pos = target;
                }
            }
            max_move = max_move.max(sweep_move);
            if sweep_move < self.cfg.relax_tol * net.mean_length() {
                break;
            }
        }
        max_move
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honeycomb_is_a_fixed_point() {
        let model = SurfaceTensionModel::builtin();
        let mut net = GrainNetwork::honeycomb(4, 4, 0.0).unwrap();
        let before = net.clone();
        let cfg = StepConfig::for_network(&net, &model, 1.0, Mobility::Finite(1.0)).unwrap();
        let mut st = Stepper::new(cfg);
        let r = st.step(&mut net, &model).unwrap();
        assert!(r.events.is_empty());
        for (a, b) in net.junctions.iter().zip(&before.junctions) {
            assert!((a.as_ref().unwrap().pos - b.as_ref().unwrap().pos).norm() < 1e-15);
        }
    }

    #[test]
    fn config_rejects_bad_rates() {
        let model = SurfaceTensionModel::builtin();
        let net = GrainNetwork::honeycomb(2, 2, 0.0).unwrap();
        assert!(StepConfig::for_network(&net, &model, 0.0, Mobility::Herring).is_err());
        assert!(StepConfig::for_network(&net, &model, 1.0, Mobility::Finite(-1.0)).is_err());
    }
}
