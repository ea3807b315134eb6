use grainflow::microstructure::{generate_voronoi, GeneratorConfig};
use grainflow::network_sim::{GrainNetwork, Mobility, Scheme, StepConfig, Stepper, DOMAIN_AREA};
use grainflow::SurfaceTensionModel;
use proptest::prelude::*;

fn check_structure(net: &GrainNetwork) -> Result<(), TestCaseError> {
    net.validate().map_err(|e| TestCaseError::fail(e.to_string()))?;
    for j in net.junction_ids() {
        prop_assert_eq!(net.junction(j).unwrap().edges.len(), 3);
    }
    let area: f64 = net.grain_ids().map(|g| net.grain_area(g)).sum();
    prop_assert!((area - DOMAIN_AREA).abs() < 1e-9, "area {}", area);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coarsening_preserves_invariants(
        n in 12usize..60,
        seed in 0u64..10_000,
        herring in any::<bool>(),
        heun in any::<bool>(),
    ) {
        let model = SurfaceTensionModel::builtin();
        let mut net = generate_voronoi(&GeneratorConfig { n_grains: n, orientation_std: 0.1, seed }).unwrap();
        let mob = if herring { Mobility::Herring } else { Mobility::Finite(10.0) };
        let mut cfg = StepConfig::for_network(&net, &model, 1.0, mob).unwrap();
        if heun {
            cfg.scheme = Scheme::Heun;
        }
        let mut st = Stepper::new(cfg);
        let mut sum0 = net.orientation_sum();
        let target = n * 3 / 4;
        let mut guard = 0;
        while net.n_grains() > target && guard < 200_000 {
            guard += 1;
            let r = st.step(&mut net, &model).unwrap();
            prop_assert!(r.energy_flow <= r.energy_before * (1.0 + 1e-12));
            prop_assert!(r.energy_after <= r.energy_flow * (1.0 + 1e-12));
            for e in &r.events {
                prop_assert!(e.forced || e.energy_change <= 1e-12 * r.energy_before, "{:?}", e);
            }
            if r.events.iter().any(|e| e.kind.removes_grain()) {
                sum0 = net.orientation_sum();
            } else {
                prop_assert!((net.orientation_sum() - sum0).abs() < 1e-12 * (1.0 + sum0.abs()));
            }
        }
        check_structure(&net)?;
    }

    #[test]
    fn snapshots_round_trip(n in 3usize..80, seed in 0u64..10_000, t in 0.0f64..10.0) {
        let mut net = generate_voronoi(&GeneratorConfig { n_grains: n, orientation_std: 0.05, seed }).unwrap();
        net.t = t;
        let text = net.to_snapshot();
        let back: GrainNetwork = text.parse().unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(back.to_snapshot(), text);
    }

    #[test]
    fn voronoi_counts(n in 3usize..150, seed in 0u64..10_000) {
        let net = generate_voronoi(&GeneratorConfig { n_grains: n, orientation_std: 0.1, seed }).unwrap();
        prop_assert_eq!(net.n_grains(), n);
        prop_assert_eq!(net.n_junctions(), 2 * n);
        prop_assert_eq!(net.n_boundaries(), 3 * n);
        check_structure(&net)?;
        for b in net.boundaries.iter().flatten() {
            prop_assert!(net.misorientation(b).abs() <= std::f64::consts::FRAC_PI_4);
        }
    }
}

#[test]
fn snapshot_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.txt");
    let net = generate_voronoi(&GeneratorConfig { n_grains: 30, orientation_std: 0.1, seed: 1 }).unwrap();
    net.save_snapshot(&p).unwrap();
    let back = GrainNetwork::load_snapshot(&p).unwrap();
    back.save_snapshot(&dir.path().join("t.txt")).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(dir.path().join("t.txt")).unwrap());
}
