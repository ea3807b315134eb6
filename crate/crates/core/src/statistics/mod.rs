//! Observables of a coarsening run: time series, misorientation
//! histograms, Boltzmann-temperature fits and curve fits.

mod fit;
mod gbcd;
mod linalg;

pub use fit::{
    fit_biexponential, fit_exponential, fit_polynomial, fit_power_law, levenberg_marquardt, BiExpFit, ExpFit, LmResult,
    PolyFit, PowerLawFit, PowerLawForm, LM_MAX_ITER,
};
pub use gbcd::{
    bin_masses, boltzmann_density, fit_temperature, gbcd, kl_divergence, log_bin_masses, BracketEdge, GbcdHistogram,
    TemperatureFit, DEFAULT_BINS, OMEGA, TEMPERATURE_BRACKET,
};
pub use linalg::lstsq;

use crate::error::{Error, Result};
use crate::network_sim::GrainNetwork;

/// Samples with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("time series contains a non-finite entry".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(TimeSeries { times, values })
    }

    /// Appends a sample; a time equal to the last one replaces its value.
    pub fn push(&mut self, t: f64, v: f64) -> Result<()> {
        if !(t.is_finite() && v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        match self.times.last() {
            Some(&last) if t < last => Err(Error::InvalidArgument(format!("time {t} precedes {last}"))),
            Some(&last) if t == last => {
                *self.values.last_mut().unwrap() = v;
                Ok(())
            }
            _ => {
                self.times.push(t);
                self.values.push(v);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Times shifted so the first sample is at 0.
    pub fn rebased(&self) -> TimeSeries {
        let t0 = self.times.first().copied().unwrap_or(0.0);
        TimeSeries { times: self.times.iter().map(|t| t - t0).collect(), values: self.values.clone() }
    }
}

/// `4 / N` for the current grain count.
pub fn average_area(net: &GrainNetwork) -> Result<f64> {
    net.average_area()
}

/// `4 / n`.
pub fn average_area_for(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty("no grains".into()));
    }
    Ok(crate::network_sim::DOMAIN_AREA / n as f64)
}

/// Root-mean-square of `y − f(t)` over a series.
pub fn rmse(ts: &TimeSeries, f: impl Fn(f64) -> f64) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    (ts.times.iter().zip(&ts.values).map(|(&t, &y)| (y - f(t)).powi(2)).sum::<f64>() / ts.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_examples() {
        assert_eq!(average_area_for(10_000).unwrap(), 4e-4);
        assert_eq!(average_area_for(2000).unwrap(), 2e-3);
        assert_eq!(average_area_for(1).unwrap(), 4.0);
        assert!(average_area_for(0).is_err());
    }

    #[test]
    fn series_rules() {
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let mut ts = TimeSeries::default();
        ts.push(1.0, 2.0).unwrap();
        ts.push(1.0, 3.0).unwrap();
        ts.push(2.0, 4.0).unwrap();
        assert!(ts.push(0.5, 0.0).is_err());
        assert_eq!(ts.values, vec![3.0, 4.0]);
        assert_eq!(ts.rebased().times, vec![0.0, 1.0]);
    }
}
