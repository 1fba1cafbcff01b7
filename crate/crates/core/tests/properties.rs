use std::f64::consts::TAU;

use elane_core::dataio::{format_culane_lines, parse_culane_lines};
use elane_core::elm::{build_level_set, decode_lane, encode_lane, smoothed_heaviside};
use elane_core::energy::{
    difference_field, eie_energy, energy_breakdown, mse_energy, mse_gradient_wrt_phi,
    stable_step_bound, EieOperator,
};
use elane_core::evolve::{evolve_implicit, ENERGY_SLACK};
use elane_core::field::{dft_forward, dft_inverse, frequency_kernel};
use elane_core::verify::{naive_dft, parseval_defect};
use elane_core::{EieParams, EvolutionConfig, Field2D, GridShape, HeavisideParams, LanePolyline};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(seed: u64, shape: GridShape) -> Field2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field2D::from_fn(shape, |_, _| rng.gen_range(-0.5..0.5))
}

fn shapes() -> impl Strategy<Value = GridShape> {
    (4usize..13, 4usize..13).prop_map(|(w, h)| GridShape::new(w, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_direct_sum(shape in shapes(), seed in any::<u64>()) {
        let f = random_field(seed, shape);
        let fast = dft_forward(&f);
        let slow = naive_dft(&f);
        for (a, b) in fast.as_storage().iter().zip(slow.as_storage()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        prop_assert!(fast.hermitian_defect() < 1e-12);
        let back = dft_inverse(&fast).unwrap();
        for (a, b) in back.as_slice().iter().zip(f.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_and_linearity(shape in shapes(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = random_field(seed, shape);
        let g = random_field(seed.wrapping_add(1), shape);
        prop_assert!(parseval_defect(&f) < 1e-10);
        let combo = f.zip_with(&g, |x, y| a * x + b * y).unwrap();
        let lhs = dft_forward(&combo);
        let (sf, sg) = (dft_forward(&f), dft_forward(&g));
        for ((l, x), y) in lhs.as_storage().iter().zip(sf.as_storage()).zip(sg.as_storage()) {
            prop_assert!((l - (x * a + y * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_is_symmetric(shape in shapes()) {
        let k = frequency_kernel(shape);
        prop_assert_eq!(k.magnitude(0, 0), 0.0);
        let (w, h) = (shape.width() as i64, shape.height() as i64);
        for n in -h / 2..h / 2 {
            for m in -w / 2..w / 2 {
                prop_assert_eq!(k.magnitude(m, n), k.magnitude(-m, -n));
            }
        }
    }

    #[test]
    fn energy_is_nonnegative_and_decomposes(seed in any::<u64>(), alpha in 0.1f64..1.5) {
        let shape = GridShape::new(12, 10).unwrap();
        let gt = random_field(seed, shape);
        let psi = random_field(seed ^ 0xabcd, shape);
        let p = EieParams::new(alpha).unwrap();
        let total = eie_energy(&difference_field(&gt, &psi, p).unwrap());
        let parts = energy_breakdown(&gt, &psi, p).unwrap();
        prop_assert!(total >= 0.0);
        prop_assert!((parts.total() - total).abs() < 1e-12 * (1.0 + total));
    }

    #[test]
    fn smooth_lanes_round_trip(x0 in 20.0f64..80.0, slope in -0.8f64..0.8, amp in 0.0f64..5.0, period in 20.0f64..60.0) {
        let shape = GridShape::new(100, 36).unwrap();
        let lane = LanePolyline::from_points((0..36).map(|r| {
            let t = r as f64;
            (r, (x0 + slope * (t - 18.0) + amp * (TAU * t / period).sin()).clamp(5.0, 94.0))
        }))
        .unwrap();
        let (psi, mask) = encode_lane(&lane, shape, HeavisideParams::new(3.0).unwrap()).unwrap();
        let back = decode_lane(&psi, &mask).unwrap();
        for (r, x) in lane.valid_points() {
            let xb = back.x_at(r);
            prop_assert!(matches!(xb, Some(v) if (v - x).abs() <= 0.5), "row {} {:?} vs {}", r, xb, x);
        }
    }

    #[test]
    fn annotations_round_trip(lanes in proptest::collection::vec(
        proptest::collection::vec((-2.0f64..1640.0, 0.0f64..590.0), 1..10), 0..5)
    ) {
        let back = parse_culane_lines(&format_culane_lines(&lanes)).unwrap();
        prop_assert_eq!(back.len(), lanes.len());
        for (a, b) in back.iter().zip(&lanes) {
            for ((xa, ya), (xb, yb)) in a.iter().zip(b) {
                prop_assert!((xa - xb).abs() < 1e-6 && (ya - yb).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn mse_gradient_matches_finite_differences() {
    let shape = GridShape::new(24, 6).unwrap();
    let p = HeavisideParams::new(3.0).unwrap();
    let gt_lane = LanePolyline::vertical(12.0, 6);
    let (gt, _) = encode_lane(&gt_lane, shape, p).unwrap();
    // Non-integer offset keeps every pixel away from the Heaviside kinks.
    let phi = build_level_set(&LanePolyline::vertical(10.3, 6), shape).unwrap();
    let psi_of = |phi: &Field2D| smoothed_heaviside(phi, p).map(|v| v - 0.5);
    let grad = mse_gradient_wrt_phi(&gt, &psi_of(&phi), &phi, p).unwrap();

    let step = 1e-4;
    let mut values = phi.as_slice().to_vec();
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + step;
        let plus = mse_energy(&gt, &psi_of(&Field2D::new(shape, values.clone()).unwrap())).unwrap();
        values[i] = orig - step;
        let minus =
            mse_energy(&gt, &psi_of(&Field2D::new(shape, values.clone()).unwrap())).unwrap();
        values[i] = orig;
        let fd = (plus - minus) / (2.0 * step);
        let g = grad.as_slice()[i];
        if g == 0.0 {
            assert!(fd.abs() < 1e-14, "pixel {i}: fd {fd}");
        } else {
            assert!(((fd - g) / g).abs() < 1e-4, "pixel {i}: fd {fd} vs {g}");
        }
    }
}

/// Oracle values recorded from the 100×64 attraction demo.
#[test]
fn attraction_demo_golden_values() {
    let shape = GridShape::new(100, 64).unwrap();
    let p = HeavisideParams::new(5.0).unwrap();
    let eie = EieParams::new(0.5).unwrap();
    let (gt, mask) = encode_lane(&LanePolyline::vertical(40.0, 64), shape, p).unwrap();
    let (psi, _) = encode_lane(&LanePolyline::vertical(20.0, 64), shape, p).unwrap();

    let op = EieOperator::new(shape);
    let e0 = op
        .energy(&difference_field(&gt, &psi, eie).unwrap())
        .unwrap();
    assert!((e0 - 0.2245293615668214).abs() < 1e-12, "{e0}");
    assert!((stable_step_bound(shape, eie) - 0.2695).abs() < 1e-4);

    let cfg = EvolutionConfig {
        step_size: 0.9 * stable_step_bound(shape, eie),
        eie,
        heaviside: p,
        ..EvolutionConfig::default()
    };
    let trace = evolve_implicit(&psi, &gt, &mask, &cfg).unwrap();
    assert!(trace.converged);
    assert!(trace.is_monotone(ENERGY_SLACK));
    assert!(
        (80..=120).contains(&trace.steps_taken),
        "{}",
        trace.steps_taken
    );
    assert!(trace.final_lane_error().unwrap() < 1.0);
    let first_sub_pixel = trace.lane_errors.iter().position(|&e| e < 1.0).unwrap();
    assert!((18..=26).contains(&first_sub_pixel), "{first_sub_pixel}");
}

#[test]
fn reinitialization_moves_the_lane_by_at_most_half_a_pixel() {
    let shape = GridShape::new(100, 64).unwrap();
    let p = HeavisideParams::new(5.0).unwrap();
    let eie = EieParams::new(0.5).unwrap();
    let (gt, mask) = encode_lane(&LanePolyline::vertical(40.0, 64), shape, p).unwrap();
    let (psi, _) = encode_lane(&LanePolyline::vertical(20.0, 64), shape, p).unwrap();
    let base = EvolutionConfig {
        step_size: 0.9 * stable_step_bound(shape, eie),
        eie,
        heaviside: p,
        keep_snapshots: true,
        ..EvolutionConfig::default()
    };
    let plain = evolve_implicit(
        &psi,
        &gt,
        &mask,
        &EvolutionConfig {
            max_steps: 40,
            ..base
        },
    )
    .unwrap();
    let reinit = evolve_implicit(
        &psi,
        &gt,
        &mask,
        &EvolutionConfig {
            max_steps: 40,
            reinit_every: 10,
            ..base
        },
    )
    .unwrap();
    // Up to the first redistancing both runs coincide; redistancing itself
    // must not move the decoded lane.
    for snap in reinit
        .snapshots
        .iter()
        .filter(|s| s.step > 0 && s.step % 10 == 0)
    {
        let (redistanced, _) = encode_lane(&snap.lane, shape, p).unwrap();
        let again = decode_lane(&redistanced, &mask).unwrap();
        for (r, x) in snap.lane.valid_points() {
            assert!((again.x_at(r).unwrap() - x).abs() <= 0.5);
        }
    }
    assert_eq!(plain.snapshots[5].lane, reinit.snapshots[5].lane);
    assert!(reinit.final_lane_error().unwrap() < plain.lane_errors[0]);
}
