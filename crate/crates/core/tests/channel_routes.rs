//! Random channels evaluated two ways: the log-derivative (Riccati) evaluator
//! against the Wronskian of the linearly integrated mode pair, and against
//! spherical Bessel functions when `M = 0`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skms::channel::{evaluate_channel, ChannelOptions};
use skms::flat::flat_channel_green;
use skms::geometry::{tortoise, SpacetimeParams};
use skms::greens::green_frequency;
use skms::radial::{solve_pair, PairConfig};

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn riccati_evaluator_matches_mode_pair_wronskian() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let p = SpacetimeParams::new(1.0, 1.0).unwrap();
    let cfg = PairConfig::defaults(&p);
    let (a, b) = (tortoise(4.0, &p).unwrap(), tortoise(20.0, &p).unwrap());
    let mut worst = 0.0f64;
    for _ in 0..12 {
        let omega = if rng.gen_bool(0.5) { rng.gen_range(0.3..0.9) } else { rng.gen_range(1.1..2.5) };
        let l = rng.gen_range(0..4u32);
        let r = rng.gen_range(5.0..10.0);
        let rp = r + rng.gen_range(0.5..8.0);
        let pair = solve_pair(omega, l, &p, a, b, &cfg).unwrap();
        let want = green_frequency(&pair.phi, &pair.psi, &[(r, rp)]).unwrap().get(r, rp).unwrap();
        let ev = evaluate_channel(Complex64::new(omega, 0.0), l, &p, &[r, rp], &ChannelOptions::default()).unwrap();
        let got = ev.green(0, 1);
        worst = worst.max(rel(got, want));
        // reciprocity
        assert_eq!(ev.green(1, 0), got);
    }
    assert!(worst < 1e-6, "worst relative difference {worst:e}");
}

#[test]
fn flat_evaluator_matches_bessel_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let p = SpacetimeParams::new(0.0, 1.0).unwrap();
    for _ in 0..20 {
        let omega = if rng.gen_bool(0.3) { rng.gen_range(0.2..0.9) } else { rng.gen_range(1.1..3.0) };
        let l = rng.gen_range(0..8u32);
        let r = rng.gen_range(1.0..15.0);
        let rp = r + rng.gen_range(0.1..10.0);
        let ev = evaluate_channel(Complex64::new(omega, 0.0), l, &p, &[r, rp], &ChannelOptions::default()).unwrap();
        let want = flat_channel_green(omega, l, 1.0, r, rp).unwrap();
        assert!(rel(ev.green(0, 1), want) < 1e-7, "omega={omega} l={l} r={r} rp={rp}");
    }
}
