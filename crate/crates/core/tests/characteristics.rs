use obs_transport::characteristics::*;
use obs_transport::initial::Profile;
use obs_transport::kernels::{FilterScale, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn alpha(a: f64) -> FilterScale {
    FilterScale::new(a).unwrap()
}

fn tanh_ic() -> SmoothIC {
    SmoothIC::from_profiles(Profile::NegTanh { amplitude: 1.0 }, Profile::Constant(1.0), (-6.0, 6.0)).unwrap()
}

/// Smallest neighbour gap of the unfiltered map `x = s + u₀(s)t` on a dense seed sample.
fn unfiltered_min_gap(ic: &SmoothIC, t: f64) -> f64 {
    let (lo, hi) = ic.domain();
    let n = 4001;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            s + ic.u0(s) * t
        })
        .collect();
    xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[test]
fn filtered_particles_never_cross() {
    let ic = tanh_ic();
    assert!(unfiltered_min_gap(&ic, 0.99) > 0.0);
    assert!(unfiltered_min_gap(&ic, 1.01) < 0.0);
    for a in [0.1, 0.5] {
        let map = advect(&ic, &Kernel::helmholtz(), alpha(a), 3.0, a / 4.0, 400).unwrap();
        assert!(map.min_gap() > 0.0, "alpha {a}");
        let last = map.positions(map.snapshot_count() - 1);
        assert!(last.windows(2).all(|w| w[1] > w[0]));
    }
}

fn final_positions(dt: f64) -> Vec<f64> {
    let map = advect(&tanh_ic(), &Kernel::gaussian(), alpha(0.5), 1.0, dt, 200).unwrap();
    map.positions(map.snapshot_count() - 1).to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn integrator_is_fourth_order() {
    let dt = 0.1;
    let reference = final_positions(dt / 4.0);
    let coarse = max_diff(&final_positions(dt), &reference);
    let fine = max_diff(&final_positions(dt / 2.0), &reference);
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn constant_velocity_translates_particles() {
    let ic = SmoothIC::from_profiles(Profile::Constant(0.7), Profile::Constant(1.0), (-2.0, 2.0)).unwrap();
    let map = advect(&ic, &Kernel::tent(), alpha(0.2), 1.0, 0.05, 64).unwrap();
    for k in 0..map.snapshot_count() {
        let t = map.times()[k];
        for (s, x) in map.seeds().iter().zip(map.positions(k)) {
            assert!((x - (s + 0.7 * t)).abs() < 1e-10);
        }
        assert!((invert_map(&map, 0.3, t).unwrap() - (0.3 - 0.7 * t)).abs() < 1e-10 || !(0.3 - 0.7 * t >= -2.0));
    }
}

#[test]
fn inversion_round_trips() {
    let ic = tanh_ic();
    let map = advect(&ic, &Kernel::helmholtz(), alpha(0.3), 1.5, 0.05, 300).unwrap();
    let k = map.snapshot_count() - 1;
    let t = map.times()[k];
    let pos = map.positions(k);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = rng.gen_range(pos[0]..pos[pos.len() - 1]);
        let s = invert_map(&map, x, t).unwrap();
        assert!((map.position_at(k, s) - x).abs() < 1e-9);
    }
    assert!(matches!(invert_map(&map, pos[0] - 1.0, t), Err(CharacteristicsError::OutsideHull { .. })));
}

#[test]
fn smoothed_riemann_cluster_drifts_at_the_mean_velocity() {
    // u_l = 2, u_r = 0: particles pile up and the cluster moves at (u_l + u_r)/2
    let ic = SmoothIC::from_profiles(
        Profile::SmoothedStep { left: 2.0, right: 0.0, width: 0.05 },
        Profile::Constant(1.0),
        (-5.0, 5.0),
    )
    .unwrap();
    let map = advect(&ic, &Kernel::helmholtz(), alpha(0.1), 3.0, 0.0125, 600).unwrap();
    let k1 = map.snapshot_index(1.0).unwrap();
    let k3 = map.snapshot_index(3.0).unwrap();
    let speed = (map.position_at(k3, 0.0) - map.position_at(k1, 0.0)) / 2.0;
    assert!((speed - 1.0).abs() < 0.02, "drift {speed}");
}

#[test]
fn blowup_times_of_classic_profiles() {
    assert!((blowup_time(&tanh_ic()) - 1.0).abs() < 1e-6);
    let sine = SmoothIC::from_profiles(Profile::NegSin { amplitude: 1.0 }, Profile::Constant(1.0), (-std::f64::consts::PI, std::f64::consts::PI)).unwrap();
    assert!((blowup_time(&sine) - 1.0).abs() < 1e-9);
    let ramp = SmoothIC::new(|x| -x, |_| 1.0, (-1.0, 1.0)).unwrap();
    assert!((blowup_time(&ramp) - 1.0).abs() < 1e-9);
    let fan = SmoothIC::new(|x| x, |_| 1.0, (-1.0, 1.0)).unwrap();
    assert_eq!(blowup_time(&fan), f64::INFINITY);
}

#[test]
fn density_grows_without_bound_at_the_blowup_time() {
    let ic = tanh_ic();
    let t = 1.0 - 1e-7;
    assert!(density_on_characteristic(&ic, 0.0, t).unwrap() > 1e6);
    assert!(density_on_characteristic(&ic, 0.0, 1.0 + 1e-9).is_err());
    let ramp = SmoothIC::new(|x| -x, |_| 1.0, (-1.0, 1.0)).unwrap();
    assert!((density_on_characteristic(&ramp, 0.4, 0.5).unwrap() - 2.0).abs() < 1e-6);
    assert!((velocity_gradient_on_characteristic(&ramp, 0.4, 0.5).unwrap() + 2.0).abs() < 1e-6);
}
