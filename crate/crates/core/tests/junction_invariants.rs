use grainflow::cli_io::random_admissible_triangle;
use grainflow::geometry::EquilibriumState;
use grainflow::junction_dynamics::{IntegrateOptions, JunctionState, JunctionSystem, StopReason};
use grainflow::{AnchorTriangle, SurfaceTensionModel, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, gamma: f64, eta: f64) -> (JunctionSystem, EquilibriumState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tri, eq) = random_admissible_triangle(&mut rng);
    (JunctionSystem::new(tri, SurfaceTensionModel::builtin(), gamma, eta).unwrap(), eq)
}

fn start(eq: &EquilibriumState, alpha: [f64; 3], r: f64, phi: f64) -> JunctionState {
    JunctionState::new(alpha, eq.a_inf + r * eq.min_length() * Vec2::new(phi.cos(), phi.sin()))
}

fn inside(tri: &AnchorTriangle, p: Vec2) -> bool {
    let [a, b, c] = tri.points;
    let s = [(b - a).cross(p - a), (c - b).cross(p - b), (a - c).cross(p - c)];
    s.iter().all(|x| *x >= 0.0) || s.iter().all(|x| *x <= 0.0)
}

fn alpha_strategy() -> impl Strategy<Value = [f64; 3]> {
    [-0.3f64..0.3, -0.3f64..0.3, -0.3f64..0.3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orientation_sum_conserved_and_norm_bounded(
        seed in 0u64..1000,
        alpha in alpha_strategy(),
        r in 0.0f64..0.45,
        phi in 0.0f64..6.283,
        gamma in 0.2f64..5.0,
        eta in 0.2f64..5.0,
    ) {
        let (sys, eq) = setup(seed, gamma, eta);
        let s0 = start(&eq, alpha, r, phi);
        let traj = sys.integrate(&s0, 3.0, &IntegrateOptions { sample_dt: 0.05, ..Default::default() }).unwrap();
        let sum0: f64 = alpha.iter().sum();
        let norm0 = alpha.iter().map(|x| x * x).sum::<f64>().sqrt();
        for s in &traj.samples {
            let a = s.state.alpha;
            prop_assert!((a.iter().sum::<f64>() - sum0).abs() <= 1e-10);
            prop_assert!(a.iter().map(|x| x * x).sum::<f64>().sqrt() <= norm0 + 1e-10);
        }
    }

    #[test]
    fn energy_never_increases(seed in 0u64..1000, alpha in alpha_strategy(), r in 0.0f64..0.45, phi in 0.0f64..6.283) {
        let (sys, eq) = setup(seed, 1.0, 1.0);
        let traj = sys.integrate(&start(&eq, alpha, r, phi), 3.0, &IntegrateOptions { sample_dt: 0.05, ..Default::default() }).unwrap();
        for w in traj.samples.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy);
        }
    }

    #[test]
    fn junction_stays_inside_triangle(seed in 0u64..1000, alpha in alpha_strategy(), r in 0.0f64..0.45, phi in 0.0f64..6.283) {
        let (sys, eq) = setup(seed, 1.0, 1.0);
        let traj = sys.integrate(&start(&eq, alpha, r, phi), 3.0, &IntegrateOptions { sample_dt: 0.05, ..Default::default() }).unwrap();
        prop_assert_eq!(traj.stop, StopReason::Completed);
        if traj.guaranteed {
            for s in &traj.samples {
                prop_assert!(inside(&sys.tri, s.state.a));
            }
        }
    }

    #[test]
    fn rhs_is_negative_scaled_gradient(seed in 0u64..1000, alpha in alpha_strategy(), r in 0.0f64..0.45, phi in 0.0f64..6.283) {
        let (gamma, eta) = (1.7, 0.6);
        let (sys, eq) = setup(seed, gamma, eta);
        let s = start(&eq, alpha, r, phi);
        let d = sys.rhs(&s).unwrap();
        let h = 1e-6;
        let de = |f: &dyn Fn(&mut JunctionState, f64)| {
            let mut p = s;
            let mut m = s;
            f(&mut p, h);
            f(&mut m, -h);
            (sys.energy(&p) - sys.energy(&m)) / (2.0 * h)
        };
        for k in 0..3 {
            let g = de(&|st: &mut JunctionState, e: f64| st.alpha[k] += e);
            prop_assert!((d.dalpha[k] + gamma * g).abs() <= 1e-7 * (1.0 + g.abs()));
        }
        let gx = de(&|st: &mut JunctionState, e: f64| st.a.x += e);
        let gy = de(&|st: &mut JunctionState, e: f64| st.a.y += e);
        prop_assert!((d.da.x + eta * gx).abs() <= 1e-7 * (1.0 + gx.abs()));
        prop_assert!((d.da.y + eta * gy).abs() <= 1e-7 * (1.0 + gy.abs()));
    }
}

#[test]
fn equal_orientations_are_stationary_in_alpha() {
    let (sys, eq) = setup(3, 1.0, 1.0);
    let traj = sys.integrate(&start(&eq, [0.2; 3], 0.3, 1.0), 2.0, &IntegrateOptions::default()).unwrap();
    for s in &traj.samples {
        assert!(s.state.alpha.iter().all(|a| (a - 0.2).abs() < 1e-15));
    }
}
