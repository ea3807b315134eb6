//! Length-weighted misorientation histograms and Boltzmann-temperature fits.

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::geometry::golden_section;
use crate::network_sim::GrainNetwork;
use crate::surface_tension::SurfaceTensionModel;

pub const DEFAULT_BINS: usize = 64;
/// Misorientation window `[−π/4, π/4]`.
pub const OMEGA: (f64, f64) = (-FRAC_PI_4, FRAC_PI_4);
/// Search bracket for the temperature, in `D`.
pub const TEMPERATURE_BRACKET: (f64, f64) = (1e-4, 10.0);
/// Composite Simpson intervals per bin for model bin masses.
const SUB_INTERVALS: usize = 32;

/// Histogram over `OMEGA` storing raw length per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct GbcdHistogram {
    pub masses: Vec<f64>,
    pub total_length: f64,
}

impl GbcdHistogram {
    /// Accumulates `(misorientation, length)` pairs. Values outside the
    /// window go to the nearest end bin.
    pub fn from_weighted(samples: impl IntoIterator<Item = (f64, f64)>, n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
        }
        let mut masses = vec![0.0; n_bins];
        let w = (OMEGA.1 - OMEGA.0) / n_bins as f64;
        for (x, len) in samples {
            if !(x.is_finite() && len.is_finite() && len >= 0.0) {
                return Err(Error::InvalidArgument(format!("bad sample ({x}, {len})")));
            }
            let k = ((x - OMEGA.0) / w).floor().clamp(0.0, (n_bins - 1) as f64) as usize;
            masses[k] += len;
        }
        let total_length: f64 = masses.iter().sum();
        if !(total_length > 0.0) {
            return Err(Error::Empty("histogram has no length".into()));
        }
        Ok(GbcdHistogram { masses, total_length })
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_width(&self) -> f64 {
        (OMEGA.1 - OMEGA.0) / self.n_bins() as f64
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.n_bins()).map(|k| OMEGA.0 + k as f64 * w).collect()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins()).map(|k| OMEGA.0 + (k as f64 + 0.5) * w).collect()
    }

    /// Fraction of total length in each bin.
    pub fn probabilities(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m / self.total_length).collect()
    }

    /// Density in 1/radian; `Σ density·width = 1`.
    pub fn densities(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.probabilities().into_iter().map(|p| p / w).collect()
    }

    /// Length-weighted union of two histograms with the same binning.
    pub fn merge(&self, other: &GbcdHistogram) -> Result<GbcdHistogram> {
        if self.n_bins() != other.n_bins() {
            return Err(Error::InvalidArgument("cannot merge histograms with different binning".into()));
        }
        let masses: Vec<f64> = self.masses.iter().zip(&other.masses).map(|(a, b)| a + b).collect();
        Ok(GbcdHistogram { total_length: masses.iter().sum(), masses })
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "# units: bin edges in rad, density in 1/rad, length in domain units")?;
        writeln!(w, "lo,hi,center,density,length")?;
        let e = self.bin_edges();
        for (k, (d, m)) in self.densities().iter().zip(&self.masses).enumerate() {
            writeln!(w, "{:?},{:?},{:?},{:?},{:?}", e[k], e[k + 1], 0.5 * (e[k] + e[k + 1]), d, m)?;
        }
        Ok(())
    }
}

/// Length-weighted histogram of signed boundary misorientations.
pub fn gbcd(net: &GrainNetwork, n_bins: usize) -> Result<GbcdHistogram> {
    if net.n_boundaries() == 0 {
        return Err(Error::Empty("network has no boundaries".into()));
    }
    GbcdHistogram::from_weighted(
        net.boundaries.iter().flatten().map(|b| (net.misorientation(b), net.boundary_vec(b).norm())),
        n_bins,
    )
}

fn check_temperature(d: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {d}")));
    }
    Ok(())
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln ∫_lo^hi e^{−σ/D}` by composite Simpson with `n` (even) intervals.
fn log_integral(model: &SurfaceTensionModel, d: f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    log_sum_exp((0..=n).map(|i| {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        (w * h / 3.0).ln() - model.sigma(lo + i as f64 * h) / d
    }))
}

/// `ln Z_D` over the window.
fn log_partition(model: &SurfaceTensionModel, d: f64) -> f64 {
    log_integral(model, d, OMEGA.0, OMEGA.1, SUB_INTERVALS * 256)
}

/// `ρ_D(θ) = e^{−σ(θ)/D} / Z_D` on `grid`.
pub fn boltzmann_density(model: &SurfaceTensionModel, d: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_temperature(d)?;
    let lz = log_partition(model, d);
    Ok(grid.iter().map(|&x| (-model.sigma(x) / d - lz).exp()).collect())
}

/// `ln` of the model probability of each bin.
pub fn log_bin_masses(model: &SurfaceTensionModel, d: f64, n_bins: usize) -> Result<Vec<f64>> {
    check_temperature(d)?;
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
    }
    let w = (OMEGA.1 - OMEGA.0) / n_bins as f64;
    let raw: Vec<f64> = (0..n_bins)
        .map(|k| {
            let lo = OMEGA.0 + k as f64 * w;
            log_integral(model, d, lo, lo + w, SUB_INTERVALS)
        })
        .collect();
    let lz = log_sum_exp(raw.iter().copied());
    Ok(raw.into_iter().map(|x| x - lz).collect())
}

/// Model probabilities per bin, summing to 1.
pub fn bin_masses(model: &SurfaceTensionModel, d: f64, n_bins: usize) -> Result<Vec<f64>> {
    Ok(log_bin_masses(model, d, n_bins)?.into_iter().map(f64::exp).collect())
}

/// `KL(hist ‖ ρ_D) = Σ p_k ln(p_k / q_k)` over bins; empty bins contribute 0.
pub fn kl_divergence(hist: &GbcdHistogram, model: &SurfaceTensionModel, d: f64) -> Result<f64> {
    let lq = log_bin_masses(model, d, hist.n_bins())?;
    Ok(hist
        .probabilities()
        .iter()
        .zip(&lq)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p.ln() - q))
        .sum::<f64>()
        .max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketEdge {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureFit {
    pub d: f64,
    pub kl: f64,
    /// Set when the minimizer sits at an end of the search bracket.
    pub edge: Option<BracketEdge>,
    /// All length in a single bin.
    pub degenerate: bool,
}

impl TemperatureFit {
    pub fn flagged(&self) -> bool {
        self.edge.is_some() || self.degenerate
    }
}

/// Minimizes the KL divergence over `ln D` in the bracket: a coarse scan
/// followed by golden-section refinement around the best grid point.
pub fn fit_temperature(hist: &GbcdHistogram, model: &SurfaceTensionModel) -> Result<TemperatureFit> {
    let (lo, hi) = (TEMPERATURE_BRACKET.0.ln(), TEMPERATURE_BRACKET.1.ln());
    let kl = |x: f64| kl_divergence(hist, model, x.exp()).unwrap_or(f64::INFINITY);
    const SCAN: usize = 120;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| kl(x)).collect();
    let best = (0..=SCAN).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(SCAN)];
    let (mut x, mut f) = golden_section(kl, a, b, 1e-10);
    if vals[best] < f {
        x = xs[best];
        f = vals[best];
    }
    let step = (hi - lo) / SCAN as f64;
    let edge = if x - lo < 1e-3 * step {
        Some(BracketEdge::Lower)
    } else if hi - x < 1e-3 * step {
        Some(BracketEdge::Upper)
    } else {
        None
    };
    let degenerate = hist.masses.iter().filter(|m| **m > 0.0).count() <= 1;
    Ok(TemperatureFit { d: x.exp(), kl: f, edge, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid_z(model: &SurfaceTensionModel, d: f64, n: usize) -> f64 {
        let h = (OMEGA.1 - OMEGA.0) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (-model.sigma(OMEGA.0 + i as f64 * h) / d).exp()
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn zero_misorientation_is_a_spike() {
        let h = GbcdHistogram::from_weighted([(0.0, 1.0), (0.0, 2.5)], 64).unwrap();
        let d = h.densities();
        assert_eq!(d.iter().filter(|x| **x > 0.0).count(), 1);
        assert!((d[32] - 1.0 / h.bin_width()).abs() < 1e-12);
    }

    #[test]
    fn uniform_lengths_give_uniform_density() {
        let h0 = GbcdHistogram::from_weighted([(0.0, 1.0)], 16).unwrap();
        let h = GbcdHistogram::from_weighted(h0.bin_centers().into_iter().map(|c| (c, 0.3)), 16).unwrap();
        for d in h.densities() {
            assert!((d - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matches_trapezoid_oracle() {
        let model = SurfaceTensionModel::builtin();
        let z = trapezoid_z(&model, 0.06, 1_000_000);
        let grid = [0.0, 0.1, -0.3, 0.7];
        let rho = boltzmann_density(&model, 0.06, &grid).unwrap();
        for (x, r) in grid.iter().zip(&rho) {
            let oracle = (-model.sigma(*x) / 0.06).exp() / z;
            assert!((r - oracle).abs() < 1e-9 * oracle.max(1e-300), "{x}: {r} vs {oracle}");
        }
        assert!((rho[0] - rho[0].max(rho[1]).max(rho[2])).abs() == 0.0);
    }

    #[test]
    fn constant_sigma_is_uniform() {
        let model = SurfaceTensionModel::sin_squared(1.0, 0.0, 2.0);
        for d in [1e-3, 0.06, 5.0] {
            for r in boltzmann_density(&model, d, &[-0.5, 0.0, 0.2]).unwrap() {
                assert!((r - 2.0 / std::f64::consts::PI).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn exact_histogram_recovers_temperature() {
        let model = SurfaceTensionModel::builtin();
        let p = bin_masses(&model, 0.06, 64).unwrap();
        let h0 = GbcdHistogram::from_weighted([(0.0, 1.0)], 64).unwrap();
        let h = GbcdHistogram::from_weighted(h0.bin_centers().into_iter().zip(p), 64).unwrap();
        let fit = fit_temperature(&h, &model).unwrap();
        assert!((fit.d - 0.06).abs() < 1e-4, "{fit:?}");
        assert!(!fit.flagged());
        assert!(fit.kl < 1e-12);
    }

    #[test]
    fn uniform_histogram_hits_upper_bracket() {
        let model = SurfaceTensionModel::builtin();
        let h0 = GbcdHistogram::from_weighted([(0.0, 1.0)], 64).unwrap();
        let h = GbcdHistogram::from_weighted(h0.bin_centers().into_iter().map(|c| (c, 1.0)), 64).unwrap();
        let fit = fit_temperature(&h, &model).unwrap();
        assert_eq!(fit.edge, Some(BracketEdge::Upper));
    }

    #[test]
    fn spike_hits_lower_bracket() {
        let model = SurfaceTensionModel::builtin();
        let h = GbcdHistogram::from_weighted([(0.01, 1.0)], 64).unwrap();
        let fit = fit_temperature(&h, &model).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.edge, Some(BracketEdge::Lower));
    }

    #[test]
    fn network_histogram_is_normalized() {
        let mut net = GrainNetwork::honeycomb(4, 4, 0.0).unwrap();
        for (i, g) in net.grains.iter_mut().flatten().enumerate() {
            g.alpha = 0.02 * i as f64 - 0.15;
        }
        let h = gbcd(&net, 64).unwrap();
        let s: f64 = h.densities().iter().map(|d| d * h.bin_width()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((h.total_length - net.total_length()).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(GbcdHistogram::from_weighted([(0.0, 1.0)], 1).is_err());
        assert!(GbcdHistogram::from_weighted(std::iter::empty(), 8).is_err());
        assert!(boltzmann_density(&SurfaceTensionModel::builtin(), 0.0, &[0.0]).is_err());
    }
}
