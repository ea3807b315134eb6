use grainflow::statistics::{
    bin_masses, boltzmann_density, fit_exponential, fit_temperature, kl_divergence, GbcdHistogram, TimeSeries, OMEGA,
};
use grainflow::SurfaceTensionModel;
use proptest::prelude::*;

/// Fine-grid samples with length proportional to the Boltzmann density.
fn synthetic(model: &SurfaceTensionModel, d: f64, n: usize, bins: usize) -> GbcdHistogram {
    let h = (OMEGA.1 - OMEGA.0) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| OMEGA.0 + (i as f64 + 0.5) * h).collect();
    let rho = boltzmann_density(model, d, &xs).unwrap();
    GbcdHistogram::from_weighted(xs.into_iter().zip(rho.into_iter().map(|r| r * h)), bins).unwrap()
}

#[test]
fn synthetic_lengths_recover_temperature() {
    let model = SurfaceTensionModel::builtin();
    for d in [0.03, 0.06, 0.1] {
        let fit = fit_temperature(&synthetic(&model, d, 64 * 400, 64), &model).unwrap();
        assert!((fit.d - d).abs() < 1e-3 * d, "D {d}: got {}", fit.d);
        assert!(!fit.flagged());
    }
}

#[test]
fn histogram_matches_density() {
    let model = SurfaceTensionModel::builtin();
    let h = synthetic(&model, 0.06, 64 * 400, 64);
    let rho = boltzmann_density(&model, 0.06, &h.bin_centers()).unwrap();
    for (a, b) in h.densities().iter().zip(&rho) {
        // Midpoint rule against the bin average.
        assert!((a - b).abs() < 2e-3 * b.max(1e-3), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn density_integrates_to_one(d in 1e-3f64..1.0) {
        let model = SurfaceTensionModel::builtin();
        let n = 20_000;
        let h = (OMEGA.1 - OMEGA.0) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| OMEGA.0 + i as f64 * h).collect();
        let rho = boltzmann_density(&model, d, &xs).unwrap();
        // Composite Simpson on a finer grid than the internal one.
        let s: f64 = rho.iter().enumerate().map(|(i, r)| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * r
        }).sum::<f64>() * h / 3.0;
        prop_assert!((s - 1.0).abs() < 1e-10, "D {}: {}", d, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kl_is_nonnegative_and_zero_at_model(
        masses in prop::collection::vec(0.0f64..1.0, 16),
        d in 0.01f64..1.0,
    ) {
        prop_assume!(masses.iter().sum::<f64>() > 1e-6);
        let model = SurfaceTensionModel::builtin();
        let h0 = GbcdHistogram::from_weighted([(0.0, 1.0)], 16).unwrap();
        let h = GbcdHistogram::from_weighted(h0.bin_centers().into_iter().zip(masses), 16).unwrap();
        prop_assert!(kl_divergence(&h, &model, d).unwrap() >= 0.0);
        let exact = GbcdHistogram::from_weighted(h0.bin_centers().into_iter().zip(bin_masses(&model, d, 16).unwrap()), 16).unwrap();
        prop_assert!(kl_divergence(&exact, &model, d).unwrap() < 1e-12);
        prop_assert!(kl_divergence(&exact, &model, d * 1.5).unwrap() > 0.0);
    }

    #[test]
    fn merge_is_associative(a in prop::collection::vec((-0.8f64..0.8, 0.0f64..1.0), 1..30),
                            b in prop::collection::vec((-0.8f64..0.8, 0.0f64..1.0), 1..30),
                            c in prop::collection::vec((-0.8f64..0.8, 0.0f64..1.0), 1..30)) {
        let mk = |v: &Vec<(f64, f64)>| GbcdHistogram::from_weighted(v.iter().copied().chain([(0.0, 1.0)]), 8).unwrap();
        let (ha, hb, hc) = (mk(&a), mk(&b), mk(&c));
        let l = ha.merge(&hb).unwrap().merge(&hc).unwrap();
        let r = ha.merge(&hb.merge(&hc).unwrap()).unwrap();
        for (x, y) in l.masses.iter().zip(&r.masses) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let s: f64 = l.densities().iter().map(|d| d * l.bin_width()).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_fit_is_exact(a in 0.1f64..1000.0, r in 0.01f64..50.0) {
        let t_end = 3.0 / r;
        let times: Vec<f64> = (0..60).map(|i| t_end * i as f64 / 59.0).collect();
        let values = times.iter().map(|t| a * (-r * t).exp()).collect();
        let f = fit_exponential(&TimeSeries::new(times, values).unwrap()).unwrap();
        prop_assert!(f.rmse < 1e-10 * a.max(1.0), "{:?}", f);
        prop_assert!((f.r - r).abs() < 1e-8 * r);
    }
}
