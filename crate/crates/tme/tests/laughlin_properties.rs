use tme::laughlin::{self, MCParams};

#[test]
fn more_rotations_shrink_the_error() {
    // independent chain per orientation, same length each
    let sphere = laughlin::distribute_points(8, 1).unwrap();
    let run = |rots: usize| {
        let mc = MCParams { burn_in: 300, sweeps: 3000, bins: 16, n_rotations: rots, seed: 4 };
        laughlin::estimate_j1(&sphere, &mc).unwrap()
    };
    let (one, eight) = (run(1), run(8));
    assert!(eight.stderr < one.stderr, "{} vs {}", eight.stderr, one.stderr);
    assert!((eight.phase() - one.phase()).abs() < 4.0 * one.phase_stderr().hypot(eight.phase_stderr()));
}

#[test]
fn zero_charge_swap_is_real_positive() {
    let sphere = laughlin::distribute_points(8, 2).unwrap();
    let mc = MCParams { burn_in: 200, sweeps: 4000, bins: 16, n_rotations: 2, seed: 5 };
    let e = laughlin::estimate_smu1(0.0, &sphere, &mc).unwrap();
    assert!(e.mean.re > 0.0);
    assert!(e.mean.im.abs() < 4.0 * e.stderr + 1e-12, "{} ± {}", e.mean, e.stderr);
}

#[test]
fn grid_and_single_estimates_agree() {
    let sphere = laughlin::distribute_points(8, 1).unwrap();
    let mc = MCParams { burn_in: 200, sweeps: 2000, bins: 10, n_rotations: 2, seed: 9 };
    let grid = laughlin::estimate_smu1_grid(&[0.3, 0.9], &sphere, &mc).unwrap();
    let one = laughlin::estimate_smu1(0.9, &sphere, &mc).unwrap();
    assert!((grid[1].mean - one.mean).norm() < 1e-12);
    assert!(grid[0].phase() > 0.0 || grid[0].phase().abs() < 3.0 * grid[0].phase_stderr());
}
