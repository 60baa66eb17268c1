//! Position-space two-point functions, their decay, and the radial
//! integrability check.
//!
//! With `ρ_l = (K_l − K̃_l)/(2πi)`, `K̃(ω) = conj K(conj ω)`, each channel gives
//!
//! `W_l(τ) = ∫_0^∞ dω n(ω) ρ_l(ω) [e^{−iωτ} + e^{−βω} e^{iωτ}]`
//!
//! (ground state: `n = 1`, second term absent), and
//! `W = Σ_l (2l+1)/(4π) P_l(cos γ) W_l`. `K_l` is analytic in the upper half
//! plane and `K̃_l` in the lower one, so by default the two pieces are
//! integrated along rays leaving the real axis at `ω_0`; the thermal case keeps
//! the real segment `[0, ω_0]`, where the Bose factor is singular but `n ρ_l`
//! is not. The rays never pass the threshold `ω = m` and stay clear of the
//! Matsubara poles on the imaginary axis.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{evaluate_channel_continued, ChannelOptions};
use crate::error::{Error, Result};
use crate::geometry::SpacetimeParams;
use crate::quad::{self, integrate_with_floors, QuadOptions};
use crate::radial::{AsymptoticFit, Coordinate, FitWindow};
use crate::special::legendre_all;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Channels evaluated together; fixed so results do not depend on the pool size.
const BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum State {
    Ground,
    Thermal { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contour {
    /// Rays into the half planes where `K` and `K̃` are analytic.
    Rotated,
    /// Plain integral of `Im K / π` over `[0, ω_max]`, split at the threshold.
    RealAxis,
}

/// Frequency quadrature and angular truncation settings.
///
/// Panels are Gauss–Kronrod 21 with global adaptive bisection. The integration
/// range starts at `omega_max` (measured along the contour) and is extended
/// while the tail bound `|integrand(end)| / κ` exceeds the tolerance, where `κ`
/// is the exponential damping rate along the contour supplied by `Im τ < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Initial truncation frequency; `m + 20/ε` when absent.
    pub omega_max: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub contour: Contour,
    /// Fraction of the admissible rotation angle used by the rays.
    pub angle_fraction: f64,
    /// Consecutive sub-tolerance channel terms that end the angular sum.
    pub stop_rule: usize,
    pub l_max: usize,
    /// At `γ = 0`, channels from this index on are summed as an integral over
    /// a continuous angular index (Euler–Maclaurin, midpoint form).
    pub continuum_from: usize,
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            omega_max: None,
            rel_tol: 1e-6,
            abs_tol: 0.0,
            contour: Contour::Rotated,
            angle_fraction: 0.5,
            stop_rule: 3,
            l_max: 20_000,
            continuum_from: 48,
            max_panels: 400,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self, m: f64) -> Result<()> {
        let bad = |s: &str| Err(Error::Domain(format!("quadrature spec: {s}")));
        if let Some(w) = self.omega_max {
            if !(w > m) {
                return bad("omega_max must exceed m");
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || !(self.abs_tol >= 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.angle_fraction > 0.0 && self.angle_fraction < 1.0) {
            return bad("angle_fraction must lie in (0, 1)");
        }
        if self.stop_rule == 0 || self.max_panels < 4 || self.continuum_from < 8 {
            return bad("stop_rule >= 1, max_panels >= 4 and continuum_from >= 8 required");
        }
        Ok(())
    }

    pub fn omega_max_for(&self, m: f64, epsilon: f64) -> f64 {
        self.omega_max.unwrap_or(m + 20.0 / epsilon)
    }

    fn channel_options(&self) -> ChannelOptions {
        ChannelOptions { rtol: (0.01 * self.rel_tol).clamp(1e-11, 1e-8), ..ChannelOptions::default() }
    }

    fn quad_options(&self, min_width: f64) -> QuadOptions {
        QuadOptions { rel_tol: 0.1 * self.rel_tol, abs_tol: self.abs_tol, max_intervals: self.max_panels, min_width }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointResult {
    pub value: Complex64,
    pub quad_error: f64,
    pub lsum_error: f64,
    /// Highest angular index included (end of the continuous tail when used).
    pub l_used: usize,
    pub spec: QuadratureSpec,
}

impl TwoPointResult {
    pub fn total_error(&self) -> f64 {
        self.quad_error + self.lsum_error
    }
}

/// `n(ω) = 1/(1 − e^{−βω})` at complex frequency.
pub fn bose_complex(omega: Complex64, beta: f64) -> Complex64 {
    let z = -omega * beta;
    let em1 = if z.norm() < 1e-2 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))))
    } else {
        z.exp() - 1.0
    };
    -1.0 / em1
}

/// `n(ω)[e^{−iωτ} + e^{−βω} e^{iωτ}]`, or `e^{−iωτ}` for the ground state.
fn time_factor(state: State, tau: Complex64, omega: Complex64) -> Complex64 {
    match state {
        State::Ground => (-I * omega * tau).exp(),
        State::Thermal { beta } => bose_complex(omega, beta) * ((-I * omega * tau).exp() + (I * omega * (tau + I * beta)).exp()),
    }
}

#[derive(Debug, Clone, Copy)]
struct Plan {
    omega0: f64,
    theta: f64,
    theta_t: f64,
    kappa: f64,
    length: f64,
}

fn plan(p: &SpacetimeParams, state: State, tau: Complex64, spec: &QuadratureSpec, fraction: f64) -> Plan {
    use std::f64::consts::{FRAC_PI_2, PI};
    let a = tau.arg();
    let at = tau.norm();
    // (damping regulator, admissible angle, decay rate at a given angle)
    let (eps, limit, omega0) = match state {
        State::Ground => (-tau.im, (-a).min(PI + a), 0.0),
        State::Thermal { beta } => {
            let b = (tau + I * beta).arg();
            ((-tau.im).min(beta + tau.im), (-a).min(PI + a).min(b).min(PI - b), 0.5 * p.m)
        }
    };
    let rate = |theta: f64| -> f64 {
        let mut k = (at * (-a - theta).sin()).min(at * (theta - a).sin());
        if let State::Thermal { beta } = state {
            let sh = tau + I * beta;
            let (b, bt) = (sh.arg(), sh.norm());
            k = k.min(bt * (theta + b).sin()).min(bt * (b - theta).sin());
        }
        k
    };
    let wmax = spec.omega_max_for(p.m, eps);
    match spec.contour {
        Contour::RealAxis => Plan { omega0: 0.0, theta: 0.0, theta_t: 0.0, kappa: eps, length: wmax },
        Contour::Rotated => {
            let theta = fraction * limit.min(FRAC_PI_2);
            let kappa = rate(theta);
            Plan { omega0, theta, theta_t: theta, kappa, length: (wmax - omega0).max(25.0 / kappa) }
        }
    }
}

/// Sorted distinct radii with the positions of `r` and of each `r'`.
struct Probe {
    radii: Vec<f64>,
    ir: usize,
    irp: Vec<usize>,
}

impl Probe {
    fn new(r: f64, rps: &[f64]) -> Self {
        let mut radii: Vec<f64> = rps.to_vec();
        radii.push(r);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let pos = |x: f64| radii.iter().position(|&y| y == x).unwrap_or(0);
        let ir = pos(r);
        let irp = rps.iter().map(|&x| pos(x)).collect();
        Self { radii, ir, irp }
    }
}

/// Evaluation context shared by every channel of one request.
struct Ctx<'a> {
    p: SpacetimeParams,
    state: State,
    tau: Complex64,
    spec: &'a QuadratureSpec,
    copts: ChannelOptions,
    plan: Plan,
    probe: Probe,
}

impl Ctx<'_> {
    fn kernel(&self, omega: Complex64, lam: f64) -> Result<Vec<Complex64>> {
        let ev = evaluate_channel_continued(omega, lam, &self.p, &self.probe.radii, &self.copts)?;
        Ok(self.probe.irp.iter().map(|&j| ev.green(self.probe.ir, j)).collect())
    }

    /// Real-axis integrand `n ρ_l [..]` with `ρ_l = Im K / π`.
    fn real_integrand(&self, x: f64, lam: f64) -> Result<Vec<Complex64>> {
        let w = Complex64::new(x, 0.0);
        let t = time_factor(self.state, self.tau, w);
        Ok(self.kernel(w, lam)?.into_iter().map(|k| t * (k.im / std::f64::consts::PI)).collect())
    }

    fn ray_integrand(&self, s: f64, lam: f64) -> Result<Vec<Complex64>> {
        let pl = &self.plan;
        let e1 = Complex64::from_polar(1.0, pl.theta);
        let e2 = Complex64::from_polar(1.0, -pl.theta_t);
        let w1 = pl.omega0 + e1 * s;
        let w2 = pl.omega0 + e2 * s;
        let k1 = self.kernel(w1, lam)?;
        let k2 = if pl.theta == pl.theta_t { k1.clone() } else { self.kernel(w2.conj(), lam)? };
        let c1 = e1 * time_factor(self.state, self.tau, w1) / (2.0 * std::f64::consts::PI * I);
        let c2 = -e2 * time_factor(self.state, self.tau, w2) / (2.0 * std::f64::consts::PI * I);
        Ok(k1.iter().zip(&k2).map(|(a, b)| c1 * a + c2 * b.conj()).collect())
    }

    /// Integrand in the contour parameter. On the real axis the parameter is
    /// `v` with `ω = m + v|v|`, which removes the square-root threshold.
    fn integrand(&self, s: f64, lam: f64) -> Result<Vec<Complex64>> {
        match self.spec.contour {
            Contour::Rotated => self.ray_integrand(s, lam),
            Contour::RealAxis => {
                let m = self.p.m;
                // the channel solver refuses |ω² − m²| < 1e-9; the excluded
                // sliver contributes O(v²) relative to its neighbours
                if 2.0 * m * s * s < 1e-8 {
                    return Ok(vec![ZERO; self.probe.irp.len()]);
                }
                let jac = 2.0 * s.abs();
                Ok(self.real_integrand(m + s * s.abs(), lam)?.into_iter().map(|v| v * jac).collect())
            }
        }
    }

    /// Integrand per unit frequency at contour distance `d`.
    fn tail_sample(&self, d: f64, lam: f64) -> Result<Vec<Complex64>> {
        match self.spec.contour {
            Contour::Rotated => self.ray_integrand(d, lam),
            Contour::RealAxis => self.real_integrand(d, lam),
        }
    }

    fn to_param(&self, d: f64) -> f64 {
        match self.spec.contour {
            Contour::Rotated => d,
            Contour::RealAxis => {
                let v = d - self.p.m;
                v.signum() * v.abs().sqrt()
            }
        }
    }

    /// `W_λ` for every `r'`, with error estimates; `floors` are absolute
    /// tolerances per component.
    fn channel_time(&self, lam: f64, floors: &[f64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let n = self.probe.irp.len();
        let mut value = vec![ZERO; n];
        let mut error = vec![0.0; n];
        let add = |r: quad::QuadResult, value: &mut Vec<Complex64>, error: &mut Vec<f64>| {
            for k in 0..n {
                value[k] += r.value[k];
                error[k] += r.error[k];
            }
        };
        let pl = self.plan;
        let f = |s: f64| self.integrand(s, lam);
        let mut breaks: Vec<f64> = match self.spec.contour {
            Contour::Rotated => ray_breaks(pl.length, pl.kappa),
            Contour::RealAxis => {
                let mut b = vec![0.0];
                b.extend(geometric_breaks(self.p.m, pl.length.max(2.0 * self.p.m)));
                b.into_iter().map(|d| self.to_param(d)).collect()
            }
        };
        let opts = self.spec.quad_options(0.0);
        let mut end = pl.length.max(2.0 * self.p.m);
        let mut tail_done = false;
        for _ in 0..12 {
            let r = integrate_with_floors(&f, &breaks, &opts, floors)?;
            add(r, &mut value, &mut error);
            let at_end = self.tail_sample(end, lam)?;
            let tail: Vec<f64> = at_end.iter().map(|v| v.norm() / pl.kappa).collect();
            let ok = (0..n).all(|k| tail[k] <= floors.get(k).copied().unwrap_or(0.0).max(opts.rel_tol * value[k].norm()));
            if ok {
                for k in 0..n {
                    error[k] += tail[k];
                }
                tail_done = true;
                break;
            }
            breaks = [end, 1.5 * end, 2.0 * end].iter().map(|&d| self.to_param(d)).collect();
            end *= 2.0;
        }
        if !tail_done {
            return Err(Error::Quadrature(format!("frequency tail not resolved by {end}")));
        }
        if self.spec.contour == Contour::Rotated && pl.omega0 > 0.0 {
            let f = |x: f64| self.real_integrand(x, lam);
            let fl: Vec<f64> = (0..n).map(|k| floors.get(k).copied().unwrap_or(0.0).max(opts.rel_tol * value[k].norm())).collect();
            let r = integrate_with_floors(&f, &[0.0, pl.omega0], &opts, &fl)?;
            add(r, &mut value, &mut error);
        }
        Ok((value, error))
    }
}

fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut b = vec![lo];
    let mut x = lo + (hi - lo).min(1.0);
    while x < hi {
        b.push(x);
        x = lo + 2.0 * (x - lo);
    }
    b.push(hi);
    b
}

/// Geometric near the origin, then panels of a few decay lengths.
fn ray_breaks(len: f64, kappa: f64) -> Vec<f64> {
    let (fac, w) = (4.0, 6.0);
    let mut b = vec![0.0];
    let mut x = 1.0f64.min(len);
    while x < len && x < w / kappa {
        b.push(x);
        x *= fac;
    }
    while x < len {
        b.push(x);
        x += w / kappa;
    }
    if b.len() > 1 && len - b[b.len() - 1] < 0.5 * w / kappa {
        b.pop();
    }
    b.push(len);
    b
}

fn validate(p: &SpacetimeParams, state: State, tau: Complex64, r: f64, rps: &[f64], gamma: f64, spec: &QuadratureSpec) -> Result<()> {
    spec.validate(p.m)?;
    if !(tau.im < 0.0) || !tau.re.is_finite() {
        return Err(Error::Domain(format!("time argument {tau} needs Im τ < 0")));
    }
    if let State::Thermal { beta } = state {
        if !(beta > 0.0 && -tau.im < beta) {
            return Err(Error::Domain(format!("thermal evaluation needs −β < Im τ < 0, got τ = {tau}, β = {beta}")));
        }
    }
    let h = p.horizon();
    if rps.is_empty() || !(r > h) || rps.iter().any(|&x| !(x > h) || !x.is_finite()) {
        return Err(Error::Domain("radii must lie outside the horizon".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&gamma) {
        return Err(Error::Domain(format!("angle {gamma} outside [0, π]")));
    }
    Ok(())
}

/// Two-point function at `(τ, r, r', γ)`.
pub fn two_point(p: &SpacetimeParams, state: State, tau: Complex64, r: f64, rp: f64, gamma: f64, spec: &QuadratureSpec) -> Result<TwoPointResult> {
    Ok(two_point_batch(p, state, tau, r, &[rp], gamma, spec)?[0])
}

/// Two-point function at `(τ, r, r'_k, γ)` for several `r'` sharing the
/// channel solutions.
pub fn two_point_batch(
    p: &SpacetimeParams,
    state: State,
    tau: Complex64,
    r: f64,
    rps: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<TwoPointResult>> {
    two_point_with_fraction(p, state, tau, r, rps, gamma, spec, spec.angle_fraction)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn two_point_with_fraction(
    p: &SpacetimeParams,
    state: State,
    tau: Complex64,
    r: f64,
    rps: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
    fraction: f64,
) -> Result<Vec<TwoPointResult>> {
    validate(p, state, tau, r, rps, gamma, spec)?;
    let ctx = Ctx {
        p: *p,
        state,
        tau,
        spec,
        copts: spec.channel_options(),
        plan: plan(p, state, tau, spec, fraction),
        probe: Probe::new(r, rps),
    };
    let n = rps.len();
    let legendre = if gamma == 0.0 { Vec::new() } else { legendre_all(spec.l_max, gamma.cos()) };
    let weight = |l: usize| -> f64 {
        let pl = if gamma == 0.0 { 1.0 } else { legendre[l] };
        (2.0 * l as f64 + 1.0) / FOUR_PI * pl
    };

    let mut partial = vec![ZERO; n];
    let mut qerr = vec![0.0f64; n];
    let mut run = vec![0usize; n];
    let mut recent: Vec<Vec<f64>> = Vec::new();
    let mut terms: Vec<Vec<Complex64>> = Vec::new();
    let mut l0 = 0usize;
    loop {
        if l0 > spec.l_max {
            return Err(Error::Truncation { l_max: spec.l_max });
        }
        if gamma == 0.0 && l0 >= spec.continuum_from {
            return continuum_tail(&ctx, l0, partial, qerr, &terms);
        }
        let hi = (l0 + BLOCK).min(spec.l_max + 1);
        let floors: Vec<Vec<f64>> = (l0..hi)
            .map(|l| {
                let w = weight(l).abs();
                partial.iter().map(|s| if w > 0.0 { 0.01 * spec.rel_tol * s.norm() / w } else { f64::INFINITY }).collect()
            })
            .collect();
        let block: Vec<Result<(Vec<Complex64>, Vec<f64>)>> =
            (l0..hi).into_par_iter().map(|l| ctx.channel_time(l as f64, &floors[l - l0])).collect();
        for (i, res) in block.into_iter().enumerate() {
            let l = l0 + i;
            let (v, e) = res?;
            let w = weight(l);
            let term: Vec<Complex64> = v.iter().map(|x| x * w).collect();
            for k in 0..n {
                partial[k] += term[k];
                qerr[k] += e[k] * w.abs();
                if term[k].norm() <= spec.rel_tol * partial[k].norm() {
                    run[k] += 1;
                } else {
                    run[k] = 0;
                }
            }
            recent.push(term.iter().map(|t| t.norm()).collect());
            terms.push(term);
            if run.iter().all(|&c| c >= spec.stop_rule) {
                let k0 = recent.len() - spec.stop_rule;
                return Ok((0..n)
                    .map(|k| TwoPointResult {
                        value: partial[k],
                        quad_error: qerr[k],
                        lsum_error: recent[k0..].iter().map(|t| t[k]).sum(),
                        l_used: l,
                        spec: *spec,
                    })
                    .collect());
            }
        }
        l0 = hi;
    }
}

/// Sum over `l ≥ l0` at `γ = 0` as `∫_{l0−1/2}^∞ f(λ) dλ + f'(l0 − 1/2)/24`,
/// `f(λ) = (2λ+1)/(4π) W_λ`, with `f'` from the last three direct terms.
fn continuum_tail(
    ctx: &Ctx<'_>,
    l0: usize,
    mut partial: Vec<Complex64>,
    mut qerr: Vec<f64>,
    terms: &[Vec<Complex64>],
) -> Result<Vec<TwoPointResult>> {
    let spec = ctx.spec;
    let n = partial.len();
    let a = l0 as f64 - 0.5;
    let f = |lam: f64, floors: &[f64]| -> Result<(Vec<Complex64>, Vec<f64>)> {
        let w = (2.0 * lam + 1.0) / FOUR_PI;
        let fl: Vec<f64> = floors.iter().map(|x| x / w).collect();
        let (v, e) = ctx.channel_time(lam, &fl)?;
        Ok((v.iter().map(|x| x * w).collect(), e.iter().map(|x| x * w).collect()))
    };
    // second-order one-sided difference; the first-order one gauges its error
    let correction: Vec<Complex64> =
        (0..n).map(|k| (2.0 * terms[l0 - 1][k] - 3.0 * terms[l0 - 2][k] + terms[l0 - 3][k]) / 24.0).collect();
    let mut lsum: Vec<f64> =
        (0..n).map(|k| (correction[k] - (terms[l0 - 1][k] - terms[l0 - 2][k]) / 24.0).norm()).collect();
    let mut width = a.max(16.0);
    let mut lo = a;
    let mut panels = 0usize;
    loop {
        let hi = lo + width;
        if hi > spec.l_max as f64 {
            return Err(Error::Truncation { l_max: spec.l_max });
        }
        let floors: Vec<f64> = partial.iter().map(|s| 0.01 * spec.rel_tol * s.norm() / width).collect();
        let rule_tol: Vec<f64> = partial.iter().map(|s| 0.1 * spec.rel_tol * s.norm()).collect();
        let (val, err) = tail_panel(&f, lo, hi, &floors, &rule_tol, 3)?;
        let mut small = true;
        for k in 0..n {
            partial[k] += val[k];
            qerr[k] += err[k];
            if val[k].norm() > 0.1 * spec.rel_tol * partial[k].norm() {
                small = false;
            }
        }
        panels += 1;
        lo = hi;
        width *= 2.0;
        if small && panels >= 2 {
            for k in 0..n {
                // last panel magnitude bounds what lies beyond it
                lsum[k] += val[k].norm();
                partial[k] += correction[k];
            }
            return Ok((0..n)
                .map(|k| TwoPointResult {
                    value: partial[k],
                    quad_error: qerr[k],
                    lsum_error: lsum[k],
                    l_used: hi.ceil() as usize,
                    spec: *spec,
                })
                .collect());
        }
    }
}

type ChannelFn<'a> = dyn Fn(f64, &[f64]) -> Result<(Vec<Complex64>, Vec<f64>)> + Sync + 'a;

/// One Gauss–Kronrod panel in `λ`, bisected while its error is too large.
/// `floors` are per unit `λ` for the channel integrals; `rule_tol` is absolute
/// for the panel.
fn tail_panel(f: &ChannelFn<'_>, lo: f64, hi: f64, floors: &[f64], rule_tol: &[f64], depth: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let xs = quad::nodes(lo, hi);
    let evals: Vec<Result<(Vec<Complex64>, Vec<f64>)>> = xs.par_iter().map(|&x| f(x, floors)).collect();
    let mut vals = Vec::with_capacity(21);
    let mut chan_err: f64 = 0.0;
    let mut cerrs = vec![0.0f64; floors.len()];
    for e in evals {
        let (v, er) = e?;
        for (c, x) in cerrs.iter_mut().zip(&er) {
            *c = c.max(*x);
        }
        chan_err = chan_err.max(er.iter().cloned().fold(0.0, f64::max));
        vals.push(v);
    }
    let (value, rule_err) = quad::apply_rule(lo, hi, &vals);
    let ok = (0..value.len()).all(|k| rule_err[k] <= rule_tol[k]);
    if ok || depth == 0 {
        let err = (0..value.len()).map(|k| rule_err[k] + cerrs[k] * (hi - lo)).collect();
        return Ok((value, err));
    }
    let mid = 0.5 * (lo + hi);
    let half: Vec<f64> = rule_tol.iter().map(|t| 0.5 * t).collect();
    let (v1, e1) = tail_panel(f, lo, mid, floors, &half, depth - 1)?;
    let (v2, e2) = tail_panel(f, mid, hi, floors, &half, depth - 1)?;
    Ok((v1.iter().zip(&v2).map(|(a, b)| a + b).collect(), e1.iter().zip(&e2).map(|(a, b)| a + b).collect()))
}

/// Fitted exponential decay of `|W(τ, r, r')|` in `r'` (all `r' > r`), with
/// a `ln(r' − r)` power correction.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub fit: AsymptoticFit,
    pub radii: Vec<f64>,
    pub values: Vec<TwoPointResult>,
}

pub const MIN_DECAY_SAMPLES: usize = 8;

pub fn decay_profile(p: &SpacetimeParams, state: State, tau: Complex64, r: f64, rps: &[f64], spec: &QuadratureSpec) -> Result<DecayProfile> {
    if rps.len() < MIN_DECAY_SAMPLES {
        return Err(Error::WindowTooSmall { got: rps.len(), need: MIN_DECAY_SAMPLES });
    }
    if rps.windows(2).any(|w| !(w[1] > w[0])) || !(rps[0] > r) {
        return Err(Error::Domain("r' list must be increasing and beyond r".into()));
    }
    let values = two_point_batch(p, state, tau, r, rps, 0.0, spec)?;
    let (fit, _) = fit_decay(r, rps, &values.iter().map(|v| v.value.norm()).collect::<Vec<_>>());
    Ok(DecayProfile { fit, radii: rps.to_vec(), values })
}

/// Fits `ln y = c0 − κ r' − p ln(r' − r)`.
pub fn fit_decay(r: f64, rps: &[f64], y: &[f64]) -> (AsymptoticFit, Vec<f64>) {
    let ones = vec![1.0; rps.len()];
    let cols = vec![ones, rps.to_vec(), rps.iter().map(|x| (x - r).ln()).collect()];
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (c, res) = crate::radial::fit::least_squares(&cols, &ly);
    let fit = AsymptoticFit {
        phase_slope: 0.0,
        decay_rate: -c[1],
        power_exponent: -c[2],
        fit_window: FitWindow { coordinate: Coordinate::R, lo: rps[0], hi: rps[rps.len() - 1] },
        residual: res,
        samples: rps.len(),
    };
    (fit, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrabilityReport {
    pub r: f64,
    pub r_min: f64,
    pub cuts: Vec<f64>,
    /// `I(R)` at each cut.
    pub partial: Vec<f64>,
    pub errors: Vec<f64>,
    /// `I(R_k) − I(R_{k−1})`, integrated directly over `[R_{k−1}, R_k]`.
    pub increments: Vec<f64>,
    /// Geometric ratio fitted to the increments.
    pub ratio: f64,
    /// Extrapolated remainder beyond the last cut.
    pub tail: f64,
    pub converged: bool,
}

pub const MIN_CUTS: usize = 4;

/// `I(R) = ∫_{r_min}^{R} |W(τ, r, r', 0)| r'^2 dr'` at each cut, on fixed
/// 21-point panels no wider than `10/m`. Converged when the increments decay
/// geometrically and the extrapolated tail is below `tail_tol · I(R_max)`.
#[allow(clippy::too_many_arguments)]
pub fn integrability_check(
    p: &SpacetimeParams,
    state: State,
    tau: Complex64,
    r: f64,
    r_min: f64,
    cuts: &[f64],
    tail_tol: f64,
    spec: &QuadratureSpec,
) -> Result<IntegrabilityReport> {
    if cuts.len() < MIN_CUTS {
        return Err(Error::WindowTooSmall { got: cuts.len(), need: MIN_CUTS });
    }
    if !(cuts[0] > r_min) || cuts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("cuts must increase and exceed r_min".into()));
    }
    let mut edges = vec![r_min];
    for &c in cuts {
        let lo = *edges.last().unwrap_or(&r_min);
        let k = ((c - lo) * p.m / 10.0).ceil().max(1.0) as usize;
        for j in 1..=k {
            edges.push(if j == k { c } else { lo + (c - lo) * j as f64 / k as f64 });
        }
    }
    let mut nodes = Vec::with_capacity(21 * (edges.len() - 1));
    for w in edges.windows(2) {
        nodes.extend_from_slice(&quad::nodes(w[0], w[1]));
    }
    let mut sorted = nodes.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let vals = two_point_batch(p, state, tau, r, &sorted, 0.0, spec)?;
    let lookup = |x: f64| vals[sorted.partition_point(|&y| y < x)];
    let mut partial = Vec::new();
    let mut errors = Vec::new();
    let mut increments = Vec::new();
    let (mut acc, mut acc_err) = (0.0, 0.0);
    // each increment is summed on its own: far cuts add far less than one ulp of I(R)
    let mut seg = 0.0;
    let mut ci = 0;
    for (i, w) in edges.windows(2).enumerate() {
        let xs = &nodes[21 * i..21 * (i + 1)];
        let samples: Vec<Vec<Complex64>> = xs
            .iter()
            .map(|&x| {
                let v = lookup(x);
                vec![Complex64::new(v.value.norm() * x * x, 0.0), Complex64::new(v.total_error() * x * x, 0.0)]
            })
            .collect();
        let (val, err) = quad::apply_rule(w[0], w[1], &samples);
        acc += val[0].re;
        seg += val[0].re;
        acc_err += err[0] + val[1].re;
        if w[1] == cuts[ci] {
            partial.push(acc);
            errors.push(acc_err);
            if ci > 0 {
                increments.push(seg);
            }
            seg = 0.0;
            ci += 1;
        }
    }
    let ratio = if increments.iter().all(|&d| d > 0.0) {
        let ks: Vec<f64> = (0..increments.len()).map(|k| k as f64).collect();
        let ly: Vec<f64> = increments.iter().map(|d| d.ln()).collect();
        let (c, _) = crate::radial::fit::least_squares(&[vec![1.0; ks.len()], ks], &ly);
        c[1].exp()
    } else {
        f64::NAN
    };
    let last = *increments.last().unwrap_or(&f64::NAN);
    let tail = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    let i_max = *partial.last().unwrap_or(&0.0);
    let converged = ratio < 1.0 && tail < tail_tol * i_max;
    Ok(IntegrabilityReport { r, r_min, cuts: cuts.to_vec(), partial, errors, increments, ratio, tail, converged })
}

/// Angular sum `Σ_l (2l+1)/(4π) P_l(cos γ) G_l` at fixed frequency, stopping
/// after `stop_rule` consecutive terms below `rel_tol·|partial sum|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSum {
    pub value: Complex64,
    pub lsum_error: f64,
    pub l_used: usize,
}

pub fn channel_sum(channels: &[Complex64], gamma: f64, rel_tol: f64, stop_rule: usize) -> Result<ChannelSum> {
    if channels.is_empty() {
        return Err(Error::Domain("no channels".into()));
    }
    let pl = legendre_all(channels.len() - 1, gamma.cos());
    let mut sum = ZERO;
    let mut run = 0usize;
    let mut tail = Vec::new();
    for (l, g) in channels.iter().enumerate() {
        let term = g * ((2.0 * l as f64 + 1.0) / FOUR_PI * pl[l]);
        sum += term;
        tail.push(term.norm());
        if term.norm() <= rel_tol * sum.norm() {
            run += 1;
        } else {
            run = 0;
        }
        if run >= stop_rule {
            return Ok(ChannelSum { value: sum, lsum_error: tail[tail.len() - stop_rule..].iter().sum(), l_used: l });
        }
    }
    Err(Error::Truncation { l_max: channels.len() - 1 })
}

/// Frequency-domain kernel `Σ_l (2l+1)/(4π) P_l(cos γ) G_l(r, r'; ω)` from the
/// channel evaluator, adding channels until [`channel_sum`] stops.
pub fn frequency_kernel(
    p: &SpacetimeParams,
    omega: Complex64,
    r: f64,
    rp: f64,
    gamma: f64,
    rel_tol: f64,
    stop_rule: usize,
    l_max: usize,
) -> Result<ChannelSum> {
    let probe = Probe::new(r, &[rp]);
    let opts = ChannelOptions::default();
    let mut gs = Vec::new();
    let mut l0 = 0;
    while l0 <= l_max {
        let hi = (l0 + BLOCK).min(l_max + 1);
        let block: Vec<Result<Complex64>> = (l0..hi)
            .into_par_iter()
            .map(|l| Ok(evaluate_channel_continued(omega, l as f64, p, &probe.radii, &opts)?.green(probe.ir, probe.irp[0])))
            .collect();
        for g in block {
            gs.push(g?);
        }
        if let Ok(s) = channel_sum(&gs, gamma, rel_tol, stop_rule) {
            return Ok(s);
        }
        l0 = hi;
    }
    Err(Error::Truncation { l_max })
}
