//! One function per subcommand; each returns a canonical [`Report`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use skms::channel::{evaluate_channel, ChannelOptions};
use skms::flat::{flat_kms_evaluator, flat_limit_compare};
use skms::geometry::{tortoise, SpacetimeParams};
use skms::position::{decay_profile, integrability_check, two_point_batch, State};
use skms::radial::mode::{default_r_seed, default_rstar_seed, default_spacing};
use skms::radial::{fit_asymptotics, solve_pair, AsymptoticFit, Coordinate, FitWindow, ModeSolution, PairConfig};
use skms::thermal::{
    bose_weight, detailed_balance_check, ground_positivity_check, kms_strip_check, mode_sum_evaluator, KmsLeg, PositivityReport,
    SpectralDensity, ThermalParams,
};

use crate::config::{ConfigError, KmsEvaluator, RunConfig};
use crate::report::{num, Report, Table, Verdict};
use crate::CliError;

/// Frequencies this close to the mass shell are skipped rather than solved.
const THRESHOLD_GAP: f64 = 1e-9;

/// Bound on detailed-balance violations of the spectral tables.
const DETAILED_BALANCE_TOL: f64 = 1e-12;

fn at_threshold(omega: f64, m: f64) -> bool {
    (omega * omega - m * m).abs() < THRESHOLD_GAP
}

fn state(cfg: &RunConfig) -> State {
    match cfg.thermal {
        Some(t) => State::Thermal { beta: t.beta },
        None => State::Ground,
    }
}

fn sorted_unique(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[derive(Serialize)]
struct ModeRow {
    omega: f64,
    l: u32,
    status: &'static str,
    boundary: Option<String>,
    wronskian: Option<[f64; 2]>,
    wronskian_spread: Option<f64>,
    phi_fit: Option<AsymptoticFit>,
    psi_fit: Option<AsymptoticFit>,
}

struct ModeItem {
    row: ModeRow,
    samples: Vec<Vec<String>>,
}

fn mode_samples(sol: &ModeSolution, tag: &str, stride: usize, out: &mut Vec<Vec<String>>) {
    for i in (0..sol.grid.len()).step_by(stride) {
        out.push(vec![
            num(sol.omega),
            sol.l.to_string(),
            tag.to_string(),
            num(sol.grid.r[i]),
            num(sol.grid.rstar[i]),
            num(sol.u[i].re),
            num(sol.u[i].im),
            num(sol.du[i].re),
            num(sol.du[i].im),
        ]);
    }
}

/// Mode pairs over the frequency list and `l ≤ l_max`, with Wronskians and fits.
pub fn modes(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = cfg.params;
    if p.is_flat() {
        return Err(ConfigError::new("params.M", "the horizon mode needs M > 0").into());
    }
    let md = &cfg.modes;
    let pc = PairConfig {
        r_seed: md.r_seed.unwrap_or_else(|| default_r_seed(&p)),
        rstar_seed: md.rstar_seed.unwrap_or_else(|| default_rstar_seed(&p)),
        order: md.seed_order,
        tol: md.tol,
        h: md.h.unwrap_or_else(|| default_spacing(&p)),
    };
    let [a, b] = match md.overlap {
        Some(o) => o,
        None => [tortoise(4.0 * p.big_m, &p)?, tortoise(10.0 * (2.0 * p.big_m).max(1.0 / p.m), &p)?],
    };
    let phi_window = md.phi_window.unwrap_or([0.5 * pc.r_seed, pc.r_seed]);
    let psi_window = md.psi_window.unwrap_or([pc.rstar_seed, 0.5 * pc.rstar_seed]);
    let items: Vec<(f64, u32)> = md.omega_list().into_iter().flat_map(|w| (0..=md.l_max).map(move |l| (w, l))).collect();
    let solved: Vec<Result<ModeItem, CliError>> = items
        .par_iter()
        .map(|&(omega, l)| {
            if at_threshold(omega, p.m) {
                let row = ModeRow {
                    omega,
                    l,
                    status: "skipped-threshold",
                    boundary: None,
                    wronskian: None,
                    wronskian_spread: None,
                    phi_fit: None,
                    psi_fit: None,
                };
                return Ok(ModeItem { row, samples: Vec::new() });
            }
            let pair = solve_pair(omega, l, &p, a, b, &pc)?;
            let phi_fit = fit_asymptotics(&pair.phi, FitWindow { coordinate: Coordinate::R, lo: phi_window[0], hi: phi_window[1] })?;
            let psi_fit = fit_asymptotics(&pair.psi, FitWindow { coordinate: Coordinate::RStar, lo: psi_window[0], hi: psi_window[1] })?;
            let mut samples = Vec::new();
            mode_samples(&pair.phi, "phi", md.sample_stride, &mut samples);
            mode_samples(&pair.psi, "psi", md.sample_stride, &mut samples);
            let w = pair.wronskian.value;
            let row = ModeRow {
                omega,
                l,
                status: "ok",
                boundary: Some(format!("{:?}", pair.phi.boundary)),
                wronskian: Some([w.re, w.im]),
                wronskian_spread: Some(pair.wronskian.spread),
                phi_fit: Some(phi_fit),
                psi_fit: Some(psi_fit),
            };
            Ok(ModeItem { row, samples })
        })
        .collect();
    let mut summary = Table::new(
        "",
        &[
            "omega",
            "l",
            "status",
            "boundary",
            "re_w",
            "im_w",
            "wronskian_spread",
            "phi_phase_slope",
            "phi_decay_rate",
            "phi_power_exponent",
            "phi_fit_residual",
            "psi_phase_slope",
            "psi_fit_residual",
        ],
    );
    let mut samples = Table::new("samples", &["omega", "l", "mode", "r", "rstar", "re_u", "im_u", "re_du", "im_du"]);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for item in solved {
        let item = item?;
        let r = &item.row;
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        worst = worst.max(r.wronskian_spread.unwrap_or(0.0));
        summary.push(vec![
            num(r.omega),
            r.l.to_string(),
            r.status.to_string(),
            r.boundary.clone().unwrap_or_default(),
            opt(r.wronskian.map(|w| w[0])),
            opt(r.wronskian.map(|w| w[1])),
            opt(r.wronskian_spread),
            opt(r.phi_fit.as_ref().map(|f| f.phase_slope)),
            opt(r.phi_fit.as_ref().map(|f| f.decay_rate)),
            opt(r.phi_fit.as_ref().map(|f| f.power_exponent)),
            opt(r.phi_fit.as_ref().map(|f| f.residual)),
            opt(r.psi_fit.as_ref().map(|f| f.phase_slope)),
            opt(r.psi_fit.as_ref().map(|f| f.residual)),
        ]);
        samples.rows.extend(item.samples);
        rows.push(item.row);
    }
    let results = json!({
        "overlap_rstar": [a, b],
        "r_seed": pc.r_seed,
        "rstar_seed": pc.rstar_seed,
        "phi_window_r": phi_window,
        "psi_window_rstar": psi_window,
        "rows": rows,
    });
    let verdicts = vec![Verdict::at_most("wronskian_spread", worst, md.max_wronskian_spread)];
    Ok(Report::new("modes", cfg, results, verdicts, vec![summary, samples]))
}

/// Diagonal `l`-channel spectral table at radius `r`, or `None` when no
/// frequency is off threshold.
fn spectral_table(p: &SpacetimeParams, omegas: &[f64], l: u32, r: f64) -> Result<Option<SpectralDensity>, CliError> {
    let ws: Vec<f64> = omegas.iter().copied().filter(|&w| !at_threshold(w, p.m)).collect();
    if ws.is_empty() {
        return Ok(None);
    }
    let rho: Vec<skms::Result<f64>> = ws
        .par_iter()
        .map(|&w| Ok(evaluate_channel(Complex64::new(w, 0.0), l, p, &[r], &ChannelOptions::default())?.green(0, 0).im / std::f64::consts::PI))
        .collect();
    let rho = rho.into_iter().collect::<skms::Result<Vec<f64>>>()?;
    Ok(Some(SpectralDensity::new(ws, rho, true)?))
}

/// Channel Green's functions at real frequencies, their spectral densities and,
/// for a thermal state, the Bose-weighted values.
pub fn green(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = cfg.params;
    let g = &cfg.green;
    let mut all = vec![g.r];
    all.extend_from_slice(&g.rps);
    let radii = sorted_unique(&all);
    let pos = |x: f64| radii.iter().position(|&y| y == x).unwrap_or(0);
    let items: Vec<(f64, u32)> = g.omegas.iter().flat_map(|&w| (0..=g.l_max).map(move |l| (w, l))).collect();
    let evals: Vec<skms::Result<Option<Vec<Complex64>>>> = items
        .par_iter()
        .map(|&(w, l)| {
            if at_threshold(w, p.m) {
                return Ok(None);
            }
            let ev = evaluate_channel(Complex64::new(w, 0.0), l, &p, &radii, &ChannelOptions::default())?;
            Ok(Some(g.rps.iter().map(|&rp| ev.green(pos(g.r), pos(rp))).collect()))
        })
        .collect();
    let mut table = Table::new("", &["omega", "l", "r", "rp", "status", "re_g", "im_g", "rho", "bose_weight", "re_g_thermal", "im_g_thermal"]);
    let mut rows = Vec::new();
    for (&(w, l), ev) in items.iter().zip(evals) {
        let ev = ev?;
        for (k, &rp) in g.rps.iter().enumerate() {
            let Some(vals) = &ev else {
                table.push(vec![num(w), l.to_string(), num(g.r), num(rp), "skipped-threshold".into(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                rows.push(json!({"omega": w, "l": l, "r": g.r, "rp": rp, "status": "skipped-threshold"}));
                continue;
            };
            let v = vals[k];
            let rho = v.im / std::f64::consts::PI;
            let weight = match cfg.thermal {
                Some(t) => Some(bose_weight(w, t.beta)?),
                None => None,
            };
            let th = weight.map(|n| v * n);
            table.push(vec![
                num(w),
                l.to_string(),
                num(g.r),
                num(rp),
                "ok".into(),
                num(v.re),
                num(v.im),
                num(rho),
                weight.map(num).unwrap_or_default(),
                th.map(|z| num(z.re)).unwrap_or_default(),
                th.map(|z| num(z.im)).unwrap_or_default(),
            ]);
            rows.push(json!({
                "omega": w, "l": l, "r": g.r, "rp": rp, "status": "ok",
                "g": [v.re, v.im], "rho": rho, "bose_weight": weight, "g_thermal": th.map(|z| [z.re, z.im]),
            }));
        }
    }
    let mut positivity = Vec::new();
    let mut verdicts = Vec::new();
    if g.rps.contains(&g.r) {
        for l in 0..=g.l_max {
            if let Some(s) = spectral_table(&p, &g.omegas, l, g.r)? {
                let rep: PositivityReport = ground_positivity_check(&s)?;
                positivity.push(json!({"l": l, "report": rep}));
                if let Some(t) = cfg.thermal {
                    verdicts.push(Verdict::at_most(format!("detailed_balance_l{l}"), detailed_balance_check(&s, t.beta), DETAILED_BALANCE_TOL));
                }
            }
        }
    }
    let results = json!({ "rows": rows, "positivity": positivity });
    Ok(Report::new("green", cfg, results, verdicts, vec![table]))
}

/// Position-space two-point function at one time difference and several `r'`.
pub fn twopoint(cfg: &RunConfig) -> Result<Report, CliError> {
    let tp = &cfg.twopoint;
    let t = Complex64::new(tp.t[0], tp.t[1]);
    let vals = two_point_batch(&cfg.params, state(cfg), t, tp.r, &tp.rps, tp.gamma, &cfg.quadrature)?;
    let mut table = Table::new("", &["rp", "re_w", "im_w", "quad_error", "lsum_error", "l_used"]);
    let mut rows = Vec::new();
    for (&rp, v) in tp.rps.iter().zip(&vals) {
        table.push(vec![num(rp), num(v.value.re), num(v.value.im), num(v.quad_error), num(v.lsum_error), v.l_used.to_string()]);
        rows.push(json!({
            "rp": rp, "value": [v.value.re, v.value.im], "quad_error": v.quad_error,
            "lsum_error": v.lsum_error, "l_used": v.l_used,
        }));
    }
    let results = json!({ "state": state(cfg), "t": tp.t, "r": tp.r, "gamma": tp.gamma, "rows": rows });
    Ok(Report::new("twopoint", cfg, results, Vec::new(), vec![table]))
}

/// KMS strip identity for every configured case, plus detailed balance and
/// positivity of the `l = 0` spectral table.
pub fn kms_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let k = &cfg.kms;
    let p = match k.evaluator {
        KmsEvaluator::Flat => SpacetimeParams::flat(cfg.params.m)?,
        KmsEvaluator::ModeSum => cfg.params,
    };
    let mut table = Table::new(
        "",
        &["beta", "epsilon", "t", "re_shifted", "im_shifted", "re_reflected", "im_reflected", "difference", "combined_error", "pass"],
    );
    let mut cases = Vec::new();
    let mut verdicts = Vec::new();
    for (i, c) in k.cases.iter().enumerate() {
        let th = ThermalParams::new(c.beta, c.epsilon)?;
        let rep = match k.evaluator {
            KmsEvaluator::Flat => kms_strip_check(flat_kms_evaluator(p.m, c.beta, cfg.quadrature), c.t, &th, k.r, k.rp)?,
            KmsEvaluator::ModeSum => kms_strip_check(mode_sum_evaluator(p, c.beta, cfg.quadrature), c.t, &th, k.r, k.rp)?,
        };
        table.push(vec![
            num(c.beta),
            num(c.epsilon),
            num(c.t),
            num(rep.shifted.re),
            num(rep.shifted.im),
            num(rep.reflected.re),
            num(rep.reflected.im),
            num(rep.difference),
            num(rep.combined_error),
            rep.pass.to_string(),
        ]);
        cases.push(json!({
            "beta": c.beta, "epsilon": c.epsilon, "t": c.t,
            "legs": [KmsLeg::Shifted, KmsLeg::Reflected],
            "shifted": [rep.shifted.re, rep.shifted.im], "shifted_error": rep.shifted_error,
            "reflected": [rep.reflected.re, rep.reflected.im], "reflected_error": rep.reflected_error,
            "difference": rep.difference, "combined_error": rep.combined_error, "pass": rep.pass,
        }));
        verdicts.push(Verdict::at_most(format!("kms_strip_case{i}"), rep.difference, rep.combined_error));
    }
    let mut spectral = Value::Null;
    if let Some(s) = spectral_table(&p, &k.omegas, 0, k.r)? {
        for (i, c) in k.cases.iter().enumerate() {
            verdicts.push(Verdict::at_most(format!("detailed_balance_case{i}"), detailed_balance_check(&s, c.beta), DETAILED_BALANCE_TOL));
        }
        spectral = json!({ "table": s, "positivity": ground_positivity_check(&s)? });
    }
    let results = json!({ "evaluator": k.evaluator, "params": p, "cases": cases, "spectral_l0": spectral });
    Ok(Report::new("kms-check", cfg, results, verdicts, vec![table]))
}

/// Decay of `|W|` in `r'` and the fitted rate against `m`.
pub fn decay(cfg: &RunConfig) -> Result<Report, CliError> {
    let d = &cfg.decay;
    let t = Complex64::new(d.t[0], d.t[1]);
    let prof = decay_profile(&cfg.params, state(cfg), t, d.r, &d.rps, &cfg.quadrature)?;
    let mut table = Table::new("", &["rp", "abs_w", "re_w", "im_w", "error"]);
    for (rp, v) in prof.radii.iter().zip(&prof.values) {
        table.push(vec![num(*rp), num(v.value.norm()), num(v.value.re), num(v.value.im), num(v.total_error())]);
    }
    let rel = (prof.fit.decay_rate / cfg.params.m - 1.0).abs();
    let results = json!({
        "state": state(cfg), "t": d.t, "r": d.r, "fit": prof.fit,
        "abs_w": prof.values.iter().map(|v| v.value.norm()).collect::<Vec<_>>(),
        "errors": prof.values.iter().map(|v| v.total_error()).collect::<Vec<_>>(),
    });
    let verdicts = vec![Verdict::at_most("decay_rate_vs_m", rel, d.rate_tol)];
    Ok(Report::new("decay", cfg, results, verdicts, vec![table]))
}

/// Partial radial integrals of `|W| r'^2` and their geometric convergence.
pub fn integrability(cfg: &RunConfig) -> Result<Report, CliError> {
    let it = &cfg.integrability;
    let t = Complex64::new(it.t[0], it.t[1]);
    let rep = integrability_check(&cfg.params, state(cfg), t, it.r, it.r_min, &it.cuts, it.tail_tol, &cfg.quadrature)?;
    let mut table = Table::new("", &["cut", "partial", "error", "increment"]);
    for (i, c) in rep.cuts.iter().enumerate() {
        let inc = if i == 0 { String::new() } else { num(rep.increments[i - 1]) };
        table.push(vec![num(*c), num(rep.partial[i]), num(rep.errors[i]), inc]);
    }
    let i_max = *rep.partial.last().unwrap_or(&0.0);
    let verdicts = vec![
        Verdict::at_most("increment_ratio", rep.ratio, 1.0),
        Verdict::at_most("tail_relative", rep.tail / i_max, it.tail_tol),
    ];
    let results = json!({
        "state": state(cfg), "t": it.t, "r": rep.r, "r_min": rep.r_min, "cuts": rep.cuts,
        "partial": rep.partial, "errors": rep.errors, "increments": rep.increments,
        "ratio": rep.ratio, "tail": rep.tail, "converged": rep.converged,
    });
    Ok(Report::new("integrability", cfg, results, verdicts, vec![table]))
}

/// Small-`M` Schwarzschild values against the flat oracles.
pub fn flat_compare(cfg: &RunConfig) -> Result<Report, CliError> {
    let f = &cfg.flat;
    let reports: Vec<_> = f
        .masses
        .iter()
        .map(|&mm| flat_limit_compare(mm, cfg.params.m, &f.channels, &f.positions, &cfg.quadrature))
        .collect::<skms::Result<_>>()?;
    let mut table = Table::new(
        "",
        &["big_m", "kind", "label", "re_curved", "im_curved", "re_flat", "im_flat", "relative_deviation", "relative_error"],
    );
    for r in &reports {
        for d in &r.rows {
            table.push(vec![
                num(r.big_m),
                d.kind.into(),
                d.label.clone(),
                num(d.curved_re),
                num(d.curved_im),
                num(d.flat_re),
                num(d.flat_im),
                num(d.relative_deviation),
                num(d.relative_error),
            ]);
        }
    }
    let first = &reports[0];
    let mut verdicts = Vec::new();
    for (i, d) in first.rows.iter().enumerate() {
        verdicts.push(Verdict::at_most(format!("{} {} at M={}", d.kind, d.label, first.big_m), d.relative_deviation, f.max_deviation));
        for w in reports.windows(2) {
            let (a, b) = (w[0].rows[i].relative_deviation, w[1].rows[i].relative_deviation);
            verdicts.push(Verdict { name: format!("{} {} grows from M={} to M={}", d.kind, d.label, w[0].big_m, w[1].big_m), pass: b > a, value: a, limit: b });
        }
    }
    let results = json!({ "reports": reports });
    Ok(Report::new("flat-compare", cfg, results, verdicts, vec![table]))
}
