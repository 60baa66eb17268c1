//! Acceptance suite: one PASS/FAIL line per criterion, run sequentially and timed.
//! A criterion also fails when it overruns its time budget.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skms::flat::{
    flat_kms_evaluator, flat_limit_compare, flat_thermal_wightman, flat_wightman_closed, flat_wightman_integral, ChannelProbe, FlatPoint,
    PositionProbe, CALIBRATION,
};
use skms::geometry::{tortoise, RadialGrid, SpacetimeParams};
use skms::greens::green_frequency;
use skms::position::{decay_profile, integrability_check, QuadratureSpec, State};
use skms::radial::{fit_asymptotics, integrate_mode, phi_seed, psi_seed, solve_pair, Coordinate, FitWindow, PairConfig};
use skms::thermal::{detailed_balance_check, kms_strip_check, mode_sum_evaluator, thermal_green_frequency, SpectralDensity, ThermalParams};
use skms_cli::config::{self, RunConfig};
use skms_cli::{run, Command};

type Outcome = Result<(bool, String), String>;

struct Suite {
    failures: usize,
    run: usize,
    /// Criterion ids given on the command line; empty runs everything.
    only: Vec<u32>,
}

impl Suite {
    fn criterion(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        if !self.only.is_empty() && !self.only.contains(&id) {
            return;
        }
        self.run += 1;
        let start = Instant::now();
        let out = f();
        let dt = start.elapsed();
        let (ok, detail) = match out {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = dt <= budget;
        let pass = ok && in_time;
        if !pass {
            self.failures += 1;
        }
        let late = if in_time { String::new() } else { format!(" [over budget {:.0} s]", budget.as_secs_f64()) };
        println!("{} {id:>2} {name}: {detail} ({:.1} s){late}", if pass { "PASS" } else { "FAIL" }, dt.as_secs_f64());
    }
}

fn e(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn params(big_m: f64) -> Result<SpacetimeParams, String> {
    SpacetimeParams::new(big_m, 1.0).map_err(e)
}

/// Overlap used by the mode-pair checks: `r* ∈ [r*(4M), r*(10·max(2M, 1/m))]`.
fn overlap(p: &SpacetimeParams) -> Result<(f64, f64), String> {
    Ok((tortoise(4.0 * p.big_m, p).map_err(e)?, tortoise(10.0 * (2.0 * p.big_m).max(1.0 / p.m), p).map_err(e)?))
}

/// Infinity mode integrated from `r_seed` down to `r_lo` on a uniform `r*` grid.
fn phi_mode(p: &SpacetimeParams, omega: f64, l: u32, r_lo: f64, r_seed: f64, n: usize) -> Result<skms::radial::ModeSolution, String> {
    let grid = RadialGrid::uniform_rstar(tortoise(r_lo, p).map_err(e)?, tortoise(r_seed, p).map_err(e)?, n, p).map_err(e)?;
    let s = phi_seed(omega, l, p, r_seed, 12).map_err(e)?;
    integrate_mode(&s, &grid, p, omega, l, 1e-10).map_err(e)
}

fn c1() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for big_m in [0.5, 1.0, 2.0] {
        let p = params(big_m)?;
        let (a, b) = overlap(&p)?;
        let cfg = PairConfig::defaults(&p);
        for w in [0.3, 0.5, 0.9, 1.2, 1.7, 2.5] {
            for l in 0..=4 {
                let pair = solve_pair(w, l, &p, a, b, &cfg).map_err(e)?;
                worst = worst.max(pair.wronskian.spread);
                count += 1;
            }
        }
    }
    Ok((worst <= 1e-6, format!("max spread {worst:.2e} over {count} pairs (tol 1e-6)")))
}

fn c2() -> Outcome {
    let p = params(1.0)?;
    let mut worst = 0.0f64;
    for w in [1.2, 2.0] {
        for l in [0, 2] {
            let sol = phi_mode(&p, w, l, 100.0, 300.0, 2000)?;
            let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::R, lo: 100.0, hi: 300.0 }).map_err(e)?;
            let q: f64 = (w * w - 1.0f64).sqrt();
            let kappa = (2.0 * w * w - 1.0) / q;
            worst = worst.max((fit.phase_slope / q - 1.0).abs()).max((fit.power_exponent / kappa - 1.0).abs());
        }
    }
    Ok((worst <= 0.01, format!("max relative error of q and log coefficient {worst:.2e} (tol 1e-2)")))
}

fn c3() -> Outcome {
    let p = params(1.0)?;
    let mut worst = 0.0f64;
    for w in [0.4, 0.9] {
        for l in [0, 1] {
            let grid = RadialGrid::uniform_rstar(-80.0, -40.0, 800, &p).map_err(e)?;
            let s = psi_seed(w, l, &p, -80.0, 12).map_err(e)?;
            let sol = integrate_mode(&s, &grid, &p, w, l, 1e-10).map_err(e)?;
            let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::RStar, lo: -80.0, hi: -40.0 }).map_err(e)?;
            worst = worst.max((fit.phase_slope / -w - 1.0).abs());
        }
    }
    Ok((worst <= 1e-3, format!("max relative error of the slope {worst:.2e} (tol 1e-3)")))
}

fn c4() -> Outcome {
    let p = params(1.0)?;
    let mut worst = 0.0f64;
    for w in [0.3, 0.6, 0.9] {
        for l in [0, 1] {
            let sol = phi_mode(&p, w, l, 100.0, 200.0, 1000)?;
            let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::R, lo: 100.0, hi: 200.0 }).map_err(e)?;
            worst = worst.max((fit.decay_rate / (1.0 - w * w).sqrt() - 1.0).abs());
        }
    }
    Ok((worst <= 0.02, format!("max relative error of b {worst:.2e} (tol 2e-2)")))
}

fn c5() -> Outcome {
    let channels = [
        ChannelProbe { omega: 1.2, l: 0, r: 60.0, rp: 70.0 },
        ChannelProbe { omega: 0.6, l: 0, r: 60.0, rp: 70.0 },
        ChannelProbe { omega: 0.8, l: 2, r: 50.0, rp: 55.0 },
    ];
    let positions = [PositionProbe { t_re: 0.5, t_im: -1.0, r: 60.0, rp: 60.0 }, PositionProbe { t_re: 0.3, t_im: -0.8, r: 60.0, rp: 62.0 }];
    let spec = QuadratureSpec { rel_tol: 1e-4, max_panels: 4000, ..QuadratureSpec::default() };
    let small = flat_limit_compare(1e-3, 1.0, &channels, &positions, &spec).map_err(e)?;
    let large = flat_limit_compare(1e-2, 1.0, &channels, &positions, &spec).map_err(e)?;
    let mut ok = true;
    let mut worst = (0.0, String::new());
    for (a, b) in small.rows.iter().zip(&large.rows) {
        ok &= a.relative_deviation <= 0.01 && b.relative_deviation > a.relative_deviation;
        if a.relative_deviation > worst.0 {
            worst = (a.relative_deviation, a.label.clone());
        }
    }
    let detail = format!(
        "max deviation at M=1e-3: channel {:.2e}, position {:.2e} (tol 1e-2); worst probe {}; all grow at M=1e-2: {}",
        small.max_deviation("channel"),
        small.max_deviation("position"),
        worst.1,
        small.rows.iter().zip(&large.rows).all(|(a, b)| b.relative_deviation > a.relative_deviation)
    );
    Ok((ok, detail))
}

fn c6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(5..40);
        let mut omega: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..8.0)).collect();
        omega.sort_by(f64::total_cmp);
        let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s = SpectralDensity::new(omega, rho, false).map_err(e)?;
        for beta in [0.5, 2.0, 10.0] {
            worst = worst.max(detailed_balance_check(&s, beta));
        }
    }
    Ok((worst <= 1e-12, format!("max violation {worst:.2e} on 100 tables x 3 beta (tol 1e-12)")))
}

fn c7() -> Outcome {
    let cases = [(2.0, 0.2, 0.5), (4.0, 0.4, 0.3)];
    let flat_spec = QuadratureSpec { rel_tol: 1e-8, max_panels: 4000, ..QuadratureSpec::default() };
    let sch_spec = QuadratureSpec { rel_tol: 1e-4, ..QuadratureSpec::default() };
    let p = params(1.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (beta, eps, t) in cases {
        let th = ThermalParams::new(beta, eps).map_err(e)?;
        let f = kms_strip_check(flat_kms_evaluator(1.0, beta, flat_spec), t, &th, 20.0, 20.0).map_err(e)?;
        let s = kms_strip_check(mode_sum_evaluator(p, beta, sch_spec), t, &th, 20.0, 20.0).map_err(e)?;
        ok &= f.pass && s.pass;
        parts.push(format!(
            "beta={beta}: flat |diff| {:.1e} <= {:.1e}, Schwarzschild |diff| {:.1e} <= {:.1e}",
            f.difference, f.combined_error, s.difference, s.combined_error
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c8() -> Outcome {
    let beta = 100.0;
    let bound = |w: f64| (-beta * w).exp() / -(-beta * w).exp_m1();
    let ulp = 4.0 * f64::EPSILON;
    // channel level on the Schwarzschild background, frequencies >= omega_min
    let omega_min = 0.3;
    let p = params(1.0)?;
    let (a, b) = overlap(&p)?;
    let cfg = PairConfig::defaults(&p);
    let mut stack = Vec::new();
    for w in [0.3, 0.5, 0.9, 1.2, 1.7, 2.5] {
        for l in [0, 1] {
            let pair = solve_pair(w, l, &p, a, b, &cfg).map_err(e)?;
            stack.push(green_frequency(&pair.phi, &pair.psi, &[(8.0, 8.0), (8.0, 9.0)]).map_err(e)?);
        }
    }
    let weighted = thermal_green_frequency(&stack, beta).map_err(e)?;
    let mut chan = 0.0f64;
    for (g, t) in stack.iter().zip(&weighted) {
        for ((_, v0), (_, vb)) in g.values.iter().zip(&t.values) {
            chan = chan.max((vb - v0).norm() / v0.norm());
        }
    }
    let chan_limit = bound(omega_min) + ulp;
    // position level in flat space, where the spectrum starts at m
    let spec = QuadratureSpec { rel_tol: 1e-10, max_panels: 4000, ..QuadratureSpec::default() };
    let mut pos = 0.0f64;
    for (t, r) in [(Complex64::new(0.5, -1.0), 0.0), (Complex64::new(-1.0, -0.5), 2.0), (Complex64::new(0.0, -3.0), 1.0)] {
        let pt = FlatPoint::new(t, r, 1.0).map_err(e)?;
        let (th, _) = flat_thermal_wightman(&pt, beta, &spec).map_err(e)?;
        let (gr, _) = flat_wightman_integral(&pt, &spec).map_err(e)?;
        let gr = gr / CALIBRATION;
        pos = pos.max((th - gr).norm() / gr.norm());
    }
    let pos_limit = bound(1.0) + ulp;
    Ok((
        chan <= chan_limit && pos <= pos_limit,
        format!("channels {chan:.2e} <= {chan_limit:.2e} (omega_min 0.3); flat position {pos:.2e} <= {pos_limit:.2e} (omega_min m)"),
    ))
}

fn c9() -> Outcome {
    let p = params(1.0)?;
    let spec = QuadratureSpec { rel_tol: 1e-5, ..QuadratureSpec::default() };
    let tau = Complex64::new(0.0, -0.5);
    let rep = integrability_check(&p, State::Ground, tau, 20.0, 25.0, &[80.0, 120.0, 160.0, 200.0], 1e-3, &spec).map_err(e)?;
    let i200 = *rep.partial.last().ok_or("no partial integrals")?;
    let rps: Vec<f64> = (0..10).map(|k| 30.0 + 5.0 * k as f64).collect();
    let prof = decay_profile(&p, State::Ground, tau, 20.0, &rps, &spec).map_err(e)?;
    let rate = (prof.fit.decay_rate - 1.0).abs();
    let ok = rep.ratio < 1.0 && rep.tail < 1e-3 * i200 && rate <= 0.05;
    Ok((
        ok,
        format!(
            "ratio {:.2e} (< 1), tail/I(200) {:.2e} (< 1e-3), decay rate {:.4} vs m = 1 (rel {rate:.2e}, tol 5e-2)",
            rep.ratio,
            rep.tail / i200,
            prof.fit.decay_rate
        ),
    ))
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = QuadratureSpec { rel_tol: 1e-11, max_panels: 4000, ..QuadratureSpec::default() };
    let mut worst = 0.0f64;
    let mut calibration = None;
    for _ in 0..10 {
        let t = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..-0.3));
        let pt = FlatPoint::new(t, rng.gen_range(0.2..5.0), 1.0).map_err(e)?;
        let (v, _) = flat_wightman_integral(&pt, &spec).map_err(e)?;
        let closed = flat_wightman_closed(&pt).map_err(e)?;
        // one-time calibration from the first point
        let c = *calibration.get_or_insert((v / closed).re);
        worst = worst.max((v / c - closed).norm() / closed.norm());
    }
    let c = calibration.unwrap_or(f64::NAN);
    let drift = (c / CALIBRATION - 1.0).abs();
    Ok((worst <= 1e-8, format!("max relative deviation {worst:.2e} (tol 1e-8); calibration {c:.12} vs 4 pi^2 (rel {drift:.1e})")))
}

/// Cheap configuration exercising every subcommand.
fn suite_config() -> Result<RunConfig, String> {
    // light settings: the check is about reduction order, not accuracy
    let sets = [
        "quadrature.rel_tol=1e-3",
        "thermal={beta = 4.0, epsilon = 0.4}",
        "twopoint.rps=[11.0]",
        "decay.r=10.0",
        "decay.rps=[14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0]",
        "integrability.r=10.0",
        "integrability.r_min=12.0",
        "integrability.cuts=[16.0, 20.0, 24.0, 28.0]",
        "flat.masses=[1e-2]",
        "flat.positions=[]",
    ];
    config::load(None, &sets.iter().map(|s| s.to_string()).collect::<Vec<_>>()).map_err(|x| x.to_string())
}

fn c11() -> Outcome {
    let cfg = suite_config()?;
    let mut reference: Option<Vec<(String, Vec<Vec<u8>>)>> = None;
    for workers in [1, 4, 8] {
        let mut out = Vec::new();
        for cmd in Command::ALL {
            let rep = run(cmd, &cfg, workers).map_err(e)?;
            let mut bytes = vec![rep.canonical_json().into_bytes()];
            for t in &rep.tables {
                bytes.push(skms_cli::report::Report::csv_bytes(t).map_err(e)?);
            }
            out.push((rep.command.to_string(), bytes));
        }
        match &reference {
            None => reference = Some(out),
            Some(r) => {
                if let Some((name, _)) = r.iter().zip(&out).find(|(a, b)| a != b).map(|(a, _)| a) {
                    return Ok((false, format!("{name} report differs at {workers} workers")));
                }
            }
        }
    }
    Ok((true, "7 subcommand reports and tables byte-identical across 1, 4 and 8 workers".into()))
}

fn main() {
    let only = std::env::args().skip(1).filter_map(|a| a.trim_start_matches(['c', 'C']).parse().ok()).collect();
    let mut s = Suite { failures: 0, run: 0, only };
    let minute = Duration::from_secs(60);
    s.criterion(1, "Wronskian constancy", minute, c1);
    s.criterion(2, "super-threshold phase law", minute, c2);
    s.criterion(3, "near-horizon phase law", minute, c3);
    s.criterion(4, "sub-threshold decay", minute, c4);
    s.criterion(5, "flat-limit equivalence", minute, c5);
    s.criterion(6, "detailed balance", minute, c6);
    s.criterion(7, "KMS strip boundary identity", minute, c7);
    s.criterion(8, "zero-temperature limit", minute, c8);
    s.criterion(9, "integrability surrogate", Duration::from_secs(300), c9);
    s.criterion(10, "flat closed-form oracle", minute, c10);
    s.criterion(11, "determinism across worker counts", minute, c11);
    println!("{} of {} criteria failed", s.failures, s.run);
    if s.failures > 0 {
        std::process::exit(1);
    }
}
