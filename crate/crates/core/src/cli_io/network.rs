//! Network coarsening runs: evolution to the stop rule, per-run series,
//! event logs, snapshots, and the combined statistical report.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::microstructure::{generate_voronoi, GeneratorConfig};
use crate::network_sim::events::write_event_log;
use crate::network_sim::{CriticalEvent, GrainNetwork, Mobility, StepConfig, Stepper};
use crate::statistics::{
    bin_masses, fit_biexponential, fit_exponential, fit_polynomial, fit_power_law, fit_temperature, gbcd, BiExpFit,
    ExpFit, GbcdHistogram, PolyFit, PowerLawFit, PowerLawForm, TemperatureFit, TimeSeries,
};
use crate::surface_tension::SurfaceTensionModel;

use super::config::{Mode, RunConfig};
use super::svg::{line_chart, Series};
use super::{create_file, ensure_dir};

/// Longest series passed to the nonlinear fits.
pub const MAX_FIT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    pub seed: u64,
    pub n_initial: usize,
    pub network: GrainNetwork,
    /// Total energy after every accepted step.
    pub energy: TimeSeries,
    /// `4/N`, sampled whenever `N` changes.
    pub area: TimeSeries,
    pub grains: TimeSeries,
    pub events: Vec<CriticalEvent>,
    pub steps: usize,
    pub rejections: usize,
    /// Largest relative energy increase over any step, events included.
    pub max_energy_increase: f64,
    pub gbcd: GbcdHistogram,
    pub elapsed: Duration,
}

fn mobility(cfg: &RunConfig) -> Mobility {
    if cfg.dynamics.herring {
        Mobility::Herring
    } else {
        Mobility::Finite(cfg.dynamics.eta)
    }
}

fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:08}.txt"))
}

/// Evolves one trial. With `dir` set, snapshots go there, and a failure
/// leaves `diagnostic.txt` holding the last consistent state.
pub fn simulate_network(cfg: &RunConfig, seed: u64, dir: Option<&Path>) -> Result<NetworkRun> {
    if cfg.mode != Mode::Network {
        return Err(Error::Config { field: "mode".into(), message: "expected network mode".into() });
    }
    cfg.validate()?;
    let nc = &cfg.network;
    let model = cfg.model();
    let start = Instant::now();
    let mut net = generate_voronoi(&GeneratorConfig { n_grains: nc.n_grains, orientation_std: nc.orientation_std, seed })?;
    let mut step_cfg = StepConfig::for_network(&net, &model, cfg.dynamics.gamma, mobility(cfg))?;
    step_cfg.scheme = nc.scheme.into();
    let mut stepper = Stepper::new(step_cfg);
    let n0 = net.n_grains();
    let n_stop = nc.stop_fraction.map_or(0, |f| (f * n0 as f64).floor() as usize);
    let mut energy = TimeSeries::default();
    let mut area = TimeSeries::default();
    let mut grains = TimeSeries::default();
    energy.push(net.t, net.total_energy(&model))?;
    area.push(net.t, net.average_area()?)?;
    grains.push(net.t, n0 as f64)?;
    if let Some(d) = dir {
        net.save_snapshot(&snapshot_path(d, 0))?;
    }
    let mut events = Vec::new();
    let mut max_inc = f64::NEG_INFINITY;
    let mut last_n = n0;
    let fail = |net: &GrainNetwork, e: Error| -> Error {
        if let Some(d) = dir {
            let _ = net.save_snapshot(&d.join("diagnostic.txt"));
        }
        e
    };
    while net.n_grains() > n_stop && nc.t_end.is_none_or(|t| net.t < t) && stepper.steps < nc.max_steps {
        let backup = net.clone();
        let report = match stepper.step(&mut net, &model) {
            Ok(r) => r,
            Err(e) => return Err(fail(&backup, e)),
        };
        if nc.check_invariants {
            if let Err(e) = net.validate() {
                return Err(fail(&backup, Error::Topology(format!("step {}: {e}", stepper.steps))));
            }
        }
        let e0 = report.energy_before;
        max_inc = max_inc.max((report.energy_flow - e0) / e0).max((report.energy_after - report.energy_flow) / e0);
        energy.push(net.t, report.energy_after)?;
        events.extend(report.events);
        let n = net.n_grains();
        if n != last_n {
            area.push(net.t, net.average_area()?)?;
            grains.push(net.t, n as f64)?;
            last_n = n;
        }
        if let Some(d) = dir {
            if nc.snapshot_every > 0 && stepper.steps % nc.snapshot_every == 0 {
                net.save_snapshot(&snapshot_path(d, stepper.steps))?;
            }
        }
    }
    if let Some(d) = dir {
        net.save_snapshot(&d.join("final.txt"))?;
    }
    let hist = gbcd(&net, nc.gbcd_bins)?;
    Ok(NetworkRun {
        seed,
        n_initial: n0,
        network: net,
        energy,
        area,
        grains,
        events,
        steps: stepper.steps,
        rejections: stepper.rejections,
        max_energy_increase: max_inc,
        gbcd: hist,
        elapsed: start.elapsed(),
    })
}

/// Evenly spaced subset of at most `max` samples, always keeping the last.
pub fn thin(ts: &TimeSeries, max: usize) -> TimeSeries {
    if ts.len() <= max || max < 2 {
        return ts.clone();
    }
    let mut idx: Vec<usize> = (0..max).map(|k| k * (ts.len() - 1) / (max - 1)).collect();
    idx.dedup();
    TimeSeries { times: idx.iter().map(|&i| ts.times[i]).collect(), values: idx.iter().map(|&i| ts.values[i]).collect() }
}

/// Curve fits for one run; a fit that cannot be computed is `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunFits {
    pub energy_exponential: Option<ExpFit>,
    pub energy_biexponential: Option<BiExpFit>,
    /// `offset + C(1 + Bt)^{-1}`.
    pub energy_power_offset: Option<PowerLawFit>,
    /// `C(1 + Bt)^{-1/2}`.
    pub energy_power_half: Option<PowerLawFit>,
    pub area_linear: Option<PolyFit>,
    pub area_quadratic: Option<PolyFit>,
    /// Duration of the area series.
    pub area_span: f64,
}

impl RunFits {
    pub fn compute(run: &NetworkRun) -> Self {
        let e = thin(&run.energy.rebased(), MAX_FIT_SAMPLES);
        let a = run.area.rebased();
        RunFits {
            energy_exponential: fit_exponential(&e).ok(),
            energy_biexponential: fit_biexponential(&e).ok(),
            energy_power_offset: fit_power_law(&e, PowerLawForm { exponent: Some(1.0), offset: true }).ok(),
            energy_power_half: fit_power_law(&e, PowerLawForm { exponent: Some(0.5), offset: false }).ok(),
            area_linear: fit_polynomial(&a, 1).ok(),
            area_quadratic: fit_polynomial(&a, 2).ok(),
            area_span: a.times.last().copied().unwrap_or(0.0),
        }
    }

    /// Curvature share of the quadratic area fit.
    pub fn quadratic_share(&self) -> Option<f64> {
        self.area_quadratic.as_ref().map(|q| q.quadratic_share(self.area_span))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSummary {
    pub runs: Vec<NetworkRun>,
    pub fits: Vec<RunFits>,
    pub merged: GbcdHistogram,
    pub temperature: TemperatureFit,
}

/// Runs every configured seed in parallel and aggregates the results.
pub fn simulate_networks(cfg: &RunConfig, out: Option<&Path>) -> Result<NetworkSummary> {
    cfg.validate()?;
    let nc = &cfg.network;
    let seeds: Vec<u64> = (0..nc.runs as u64).map(|k| nc.seed.wrapping_add(k)).collect();
    let runs: Vec<NetworkRun> = seeds
        .par_iter()
        .map(|&seed| {
            let dir = match out {
                Some(o) => {
                    let d = o.join(format!("run_{seed}"));
                    ensure_dir(&d)?;
                    Some(d)
                }
                None => None,
            };
            simulate_network(cfg, seed, dir.as_deref())
        })
        .collect::<Result<_>>()?;
    let fits: Vec<RunFits> = runs.par_iter().map(RunFits::compute).collect();
    let mut merged = runs[0].gbcd.clone();
    for r in &runs[1..] {
        merged = merged.merge(&r.gbcd)?;
    }
    let temperature = fit_temperature(&merged, &cfg.model())?;
    Ok(NetworkSummary { runs, fits, merged, temperature })
}

fn write_series(path: &Path, header: &str, units: &str, ts: &TimeSeries) -> Result<()> {
    let mut f = create_file(path)?;
    writeln!(f, "# units: {units}")?;
    writeln!(f, "{header}")?;
    for (t, v) in ts.times.iter().zip(&ts.values) {
        writeln!(f, "{t:?},{v:?}")?;
    }
    Ok(())
}

fn opt<T>(x: &Option<T>, f: impl Fn(&T) -> String) -> String {
    x.as_ref().map_or("none".into(), f)
}

fn write_fits(w: &mut impl std::io::Write, fits: &RunFits) -> std::io::Result<()> {
    writeln!(w, "energy_exponential = {}", opt(&fits.energy_exponential, |f| format!("A={:?} r={:?} rmse={:?}", f.a, f.r, f.rmse)))?;
    writeln!(
        w,
        "energy_biexponential = {}",
        opt(&fits.energy_biexponential, |f| format!("A1={:?} r1={:?} A2={:?} r2={:?} rmse={:?}", f.a1, f.r1, f.a2, f.r2, f.rmse))
    )?;
    let pl = |f: &PowerLawFit| format!("offset={:?} C={:?} B={:?} p={:?} rmse={:?}", f.offset, f.c, f.b, f.p, f.rmse);
    writeln!(w, "energy_power_offset = {}", opt(&fits.energy_power_offset, pl))?;
    writeln!(w, "energy_power_half = {}", opt(&fits.energy_power_half, pl))?;
    let poly = |f: &PolyFit| format!("coeffs={:?} rmse={:?}", f.coeffs, f.rmse);
    writeln!(w, "area_linear = {}", opt(&fits.area_linear, poly))?;
    writeln!(w, "area_quadratic = {}", opt(&fits.area_quadratic, poly))?;
    writeln!(w, "area_quadratic_share = {}", opt(&fits.quadratic_share(), |s| format!("{s:?}")))
}

fn gbcd_chart(hist: &GbcdHistogram, model: &SurfaceTensionModel, d: f64) -> String {
    let centers = hist.bin_centers();
    let data: Vec<(f64, f64)> = centers.iter().copied().zip(hist.densities()).collect();
    let w = hist.bin_width();
    let model_pts: Vec<(f64, f64)> = bin_masses(model, d, hist.n_bins())
        .map(|m| centers.iter().copied().zip(m.into_iter().map(|p| p / w)).collect())
        .unwrap_or_default();
    line_chart(
        "misorientation distribution",
        "misorientation [rad]",
        "density [1/rad]",
        &[Series::new("GBCD", data), Series::new(format!("Boltzmann D={d:.4}"), model_pts).dashed()],
    )
}

/// Writes the per-run and combined outputs for [`simulate_networks`].
pub fn write_network_outputs(cfg: &RunConfig, out: &Path, summary: &NetworkSummary) -> Result<()> {
    let model = cfg.model();
    for (run, fits) in summary.runs.iter().zip(&summary.fits) {
        let d = out.join(format!("run_{}", run.seed));
        ensure_dir(&d)?;
        write_series(&d.join("energy.csv"), "t,E", "t [time], E [energy]", &run.energy)?;
        write_series(&d.join("area.csv"), "t,A", "t [time], A [area]", &run.area)?;
        write_series(&d.join("grains.csv"), "t,N", "t [time], N [count]", &run.grains)?;
        write_event_log(&run.events, create_file(&d.join("events.csv"))?)?;
        run.gbcd.write_csv(&mut create_file(&d.join("gbcd.csv"))?)?;
        let mut r = create_file(&d.join("report.txt"))?;
        writeln!(r, "seed = {}", run.seed)?;
        writeln!(r, "n_initial = {}", run.n_initial)?;
        writeln!(r, "n_final = {}", run.network.n_grains())?;
        writeln!(r, "t_final = {:?}", run.network.t)?;
        writeln!(r, "steps = {}", run.steps)?;
        writeln!(r, "rejections = {}", run.rejections)?;
        writeln!(r, "events = {}", run.events.len())?;
        writeln!(r, "max_energy_increase = {:?}", run.max_energy_increase)?;
        write_fits(&mut r, fits)?;
        let e = thin(&run.energy.rebased(), MAX_FIT_SAMPLES);
        let mut es = vec![Series::new("E(t)", e.times.iter().copied().zip(e.values.iter().copied()).collect())];
        if let Some(f) = fits.energy_exponential {
            es.push(Series::new("exponential fit", e.times.iter().map(|&t| (t, f.eval(t))).collect()).dashed());
        }
        if let Some(f) = fits.energy_power_offset {
            es.push(Series::new("power-law fit", e.times.iter().map(|&t| (t, f.eval(t))).collect()).dashed());
        }
        std::fs::write(d.join("energy.svg"), line_chart("total energy", "t", "E", &es))?;
        let a = run.area.rebased();
        let mut as_ = vec![Series::new("A(t)", a.times.iter().copied().zip(a.values.iter().copied()).collect())];
        for (name, f) in [("linear fit", &fits.area_linear), ("quadratic fit", &fits.area_quadratic)] {
            if let Some(f) = f {
                as_.push(Series::new(name, a.times.iter().map(|&t| (t, f.eval(t))).collect()).dashed());
            }
        }
        std::fs::write(d.join("area.svg"), line_chart("average grain area", "t", "A", &as_))?;
    }
    summary.merged.write_csv(&mut create_file(&out.join("gbcd.csv"))?)?;
    let t = &summary.temperature;
    let mut r = create_file(&out.join("report.txt"))?;
    writeln!(r, "runs = {}", summary.runs.len())?;
    writeln!(r, "gbcd_bins = {}", summary.merged.n_bins())?;
    writeln!(r, "kl_direction = empirical||model")?;
    writeln!(r, "temperature = {:?}", t.d)?;
    writeln!(r, "kl = {:?}", t.kl)?;
    writeln!(r, "temperature_flagged = {}", t.flagged())?;
    std::fs::write(out.join("gbcd.svg"), gbcd_chart(&summary.merged, &model, t.d))?;
    Ok(())
}

/// Full network pipeline writing into `cfg.output`.
pub fn run_network(cfg: &RunConfig) -> Result<NetworkSummary> {
    let out = cfg.output.clone();
    ensure_dir(&out)?;
    let summary = simulate_networks(cfg, Some(&out))?;
    write_network_outputs(cfg, &out, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub hist: GbcdHistogram,
    pub temperature: TemperatureFit,
}

/// GBCD and temperature of the listed snapshots, merged by length.
pub fn run_stats(cfg: &RunConfig) -> Result<StatsReport> {
    cfg.validate()?;
    let model = cfg.model();
    let mut merged: Option<GbcdHistogram> = None;
    for p in &cfg.stats.snapshots {
        let net = GrainNetwork::load_snapshot(p)?;
        let h = gbcd(&net, cfg.stats.bins)?;
        merged = Some(match merged {
            Some(m) => m.merge(&h)?,
            None => h,
        });
    }
    let hist = merged.ok_or_else(|| Error::Empty("no snapshots".into()))?;
    let temperature = fit_temperature(&hist, &model)?;
    let out = &cfg.output;
    ensure_dir(out)?;
    hist.write_csv(&mut create_file(&out.join("gbcd.csv"))?)?;
    let mut r = create_file(&out.join("report.txt"))?;
    writeln!(r, "snapshots = {}", cfg.stats.snapshots.len())?;
    writeln!(r, "temperature = {:?}", temperature.d)?;
    writeln!(r, "kl = {:?}", temperature.kl)?;
    writeln!(r, "temperature_flagged = {}", temperature.flagged())?;
    std::fs::write(out.join("gbcd.svg"), gbcd_chart(&hist, &model, temperature.d))?;
    Ok(StatsReport { hist, temperature })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, runs: usize) -> RunConfig {
        let mut cfg = RunConfig::new(Mode::Network);
        cfg.network.n_grains = n;
        cfg.network.runs = runs;
        cfg.network.stop_fraction = Some(0.5);
        cfg.network.check_invariants = true;
        cfg.dynamics.eta = 10.0;
        cfg
    }

    #[test]
    fn stop_rule_and_energy() {
        let cfg = small(60, 1);
        let run = simulate_network(&cfg, 4, None).unwrap();
        assert!(run.network.n_grains() <= 30);
        assert!(run.max_energy_increase <= 1e-12, "{}", run.max_energy_increase);
        assert!(run.energy.values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small(60, 1);
        let a = simulate_network(&cfg, 8, None).unwrap();
        let b = simulate_network(&cfg, 8, None).unwrap();
        assert_eq!(a.network.to_snapshot(), b.network.to_snapshot());
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn merged_histogram_is_sum_of_runs() {
        let cfg = small(40, 3);
        let s = simulate_networks(&cfg, None).unwrap();
        for k in 0..s.merged.n_bins() {
            let sum: f64 = s.runs.iter().map(|r| r.gbcd.masses[k]).sum();
            assert!((s.merged.masses[k] - sum).abs() <= 1e-14 * sum.max(1.0));
        }
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let ts = TimeSeries::new((0..10).map(f64::from).collect(), vec![0.0; 10]).unwrap();
        let t = thin(&ts, 4);
        assert_eq!(t.times.first(), Some(&0.0));
        assert_eq!(t.times.last(), Some(&9.0));
        assert_eq!(t.len(), 4);
    }
}
