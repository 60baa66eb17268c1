//! Channel Green's function `G_l(r, r'; ω)` at complex frequency from the
//! logarithmic derivatives of the two boundary solutions.
//!
//! With `y = u'/u` and `S = ln u`, the Wronskian quotient becomes
//! `G_l = exp(S_φ(r>) − S_φ(r<)) / (r r' (y_ψ(r<) − y_φ(r<)))`, which never forms
//! the exponentially large or small mode amplitudes. For `Im ω > 0` both modes
//! are free of zeros; on the real axis the decaying mode may vanish near the
//! horizon, and its propagation then falls back to rescaled linear integration.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{inverse_tortoise_gap, potential_gap, tortoise, SpacetimeParams};
use crate::radau::{self, RadauOptions, RiccatiState};
use crate::radial::mode::default_r_seed;
use crate::radial::seeds::{phi_log_seed_f, psi_log_seed_f, radial_momentum};
use crate::rk::{integrate_linear_scaled, RkOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
pub struct ChannelOptions {
    pub rtol: f64,
    pub seed_order: usize,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, seed_order: 16 }
    }
}

/// Log-derivative data of both modes at a sorted list of radii.
#[derive(Debug, Clone)]
pub struct ChannelEval {
    pub omega: Complex64,
    /// Angular index; non-integer values continue the channel in `l`.
    pub l: f64,
    pub radii: Vec<f64>,
    pub y_psi: Vec<Complex64>,
    pub y_phi: Vec<Complex64>,
    /// `ln u_φ` relative to its value at the largest radius.
    pub s_phi: Vec<Complex64>,
}

impl ChannelEval {
    /// `G_l(r_i, r_j)` including the `1/(r r')` of the unreduced radial functions.
    pub fn green(&self, i: usize, j: usize) -> Complex64 {
        let (lo, hi) = if self.radii[i] <= self.radii[j] { (i, j) } else { (j, i) };
        let num = (self.s_phi[hi] - self.s_phi[lo]).exp();
        num / ((self.y_psi[lo] - self.y_phi[lo]) * (self.radii[lo] * self.radii[hi]))
    }
}

fn g_of(omega: Complex64, l: f64, p: SpacetimeParams) -> impl Fn(f64) -> Complex64 {
    let w2 = omega * omega;
    move |rs: f64| {
        let x = inverse_tortoise_gap(rs, &p).unwrap_or(f64::NAN);
        Complex64::new(potential_gap(x, l, &p), 0.0) - w2
    }
}

/// Evaluates both modes of channel `l` at `radii` (strictly increasing, outside the horizon).
pub fn evaluate_channel(omega: Complex64, l: u32, p: &SpacetimeParams, radii: &[f64], opts: &ChannelOptions) -> Result<ChannelEval> {
    evaluate_channel_continued(omega, l as f64, p, radii, opts)
}

/// As [`evaluate_channel`] with a real angular index `l ≥ 0`.
pub fn evaluate_channel_continued(omega: Complex64, l: f64, p: &SpacetimeParams, radii: &[f64], opts: &ChannelOptions) -> Result<ChannelEval> {
    if !(l >= 0.0) {
        return Err(Error::Domain(format!("angular index {l} must be nonnegative")));
    }
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > p.horizon()) {
        return Err(Error::Domain("radii must be increasing and outside the horizon".into()));
    }
    if omega.norm() == 0.0 || ((omega * omega) - p.m * p.m).norm() < 1e-9 {
        return Err(Error::Threshold { omega: omega.re });
    }
    let y_psi = psi_log_derivatives(omega, l, p, radii, opts)?;
    let (y_phi, s_phi) = match phi_riccati(omega, l, p, radii, opts) {
        Ok(v) => v,
        Err(_) => phi_linear(omega, l, p, radii, opts)?,
    };
    Ok(ChannelEval { omega, l, radii: radii.to_vec(), y_psi, y_phi, s_phi })
}

fn psi_log_derivatives(omega: Complex64, l: f64, p: &SpacetimeParams, radii: &[f64], opts: &ChannelOptions) -> Result<Vec<Complex64>> {
    let ll = l * (l + 1.0);
    let stops: Vec<f64> = radii.iter().map(|&r| tortoise(r, p)).collect::<Result<_>>()?;
    let (x0, seed_y) = if p.is_flat() {
        // regular at the origin: u = r^{l+1} Σ c_k r^{2k}
        let k2 = omega * omega - p.m * p.m;
        let mut r0 = (0.25 * radii[0]).min(0.1 * (l + 1.0) / k2.norm().sqrt().max(1e-300));
        r0 = r0.max(1e-300);
        let mut c = Complex64::new(1.0, 0.0);
        let mut u = c;
        let mut du = Complex64::new(l + 1.0, 0.0);
        for k in 1..60 {
            let kf = k as f64;
            c *= -k2 * r0 * r0 / (2.0 * kf * (2.0 * kf + 2.0 * l + 1.0));
            u += c;
            du += c * (l + 1.0 + 2.0 * kf);
            if c.norm() < 1e-17 * u.norm() {
                break;
            }
        }
        (r0, du / (u * r0))
    } else {
        let mm = p.big_m;
        let x_first = radii[0] - p.horizon();
        let mut x0 = 2.0 * mm * (0.1f64).min(0.5 / (ll + 1.0 + 4.0 * mm * mm * (omega.norm_sqr() + p.m * p.m)));
        x0 = x0.min(0.25 * x_first);
        let mut found = None;
        for _ in 0..40 {
            let s = psi_log_seed_f(omega, l, p, x0, opts.seed_order.max(8));
            if s.residual <= 1e-13 {
                found = Some(s.y);
                break;
            }
            x0 *= 0.25;
        }
        let y = found.ok_or(Error::SeedAccuracy { residual: f64::NAN, tol: 1e-13 })?;
        (crate::geometry::tortoise_gap(x0, p), y)
    };
    match radau::integrate(g_of(omega, l, *p), x0, RiccatiState { y: seed_y, s: ZERO }, &stops, &RadauOptions { track_s: false, ..RadauOptions::with_tol(opts.rtol) }) {
        Ok(out) => Ok(out.into_iter().map(|s| s.y).collect()),
        Err(_) => {
            // real-frequency regular solutions without horizon flux can vanish
            let (out, _) = integrate_linear_scaled(
                linear_rhs(omega, l, *p),
                x0,
                [Complex64::new(1.0, 0.0), seed_y],
                &stops,
                &RkOptions::with_tol(opts.rtol),
            )?;
            Ok(out.iter().map(|(st, _)| st[1] / st[0]).collect())
        }
    }
}

fn linear_rhs(omega: Complex64, l: f64, p: SpacetimeParams) -> impl Fn(f64, &[Complex64; 2]) -> [Complex64; 2] {
    let g = g_of(omega, l, p);
    move |rs: f64, y: &[Complex64; 2]| [y[1], y[0] * g(rs)]
}

/// Seed radius for the infinity series, large enough for fast convergence.
fn phi_seed_radius(omega: Complex64, l: f64, p: &SpacetimeParams, r_max: f64) -> f64 {
    let q = radial_momentum(omega, p.m);
    let ll = l * (l + 1.0);
    let s0 = p.big_m * (omega * omega * 2.0 - p.m * p.m).norm() / q.norm();
    let need = 10.0 * (ll + s0 * s0 + 4.0 * p.big_m * p.big_m * q.norm_sqr() + 1.0) / q.norm();
    default_r_seed(p).max(2.0 * r_max).max(need)
}

fn phi_seed_at(omega: Complex64, l: f64, p: &SpacetimeParams, r_max: f64, order: usize) -> Result<(f64, Complex64)> {
    let mut r = phi_seed_radius(omega, l, p, r_max);
    for _ in 0..40 {
        let s = phi_log_seed_f(omega, l, p, r, order, ZERO);
        if s.residual <= 1e-13 {
            return Ok((r, s.y));
        }
        r *= 2.0;
    }
    Err(Error::SeedAccuracy { residual: f64::NAN, tol: 1e-13 })
}

fn phi_riccati(omega: Complex64, l: f64, p: &SpacetimeParams, radii: &[f64], opts: &ChannelOptions) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = radii.len();
    let (r_seed, y_seed) = phi_seed_at(omega, l, p, radii[n - 1], opts.seed_order)?;
    let ropts = RadauOptions::with_tol(opts.rtol);
    let top = tortoise(radii[n - 1], p)?;
    let far = radau::integrate(g_of(omega, l, *p), tortoise(r_seed, p)?, RiccatiState { y: y_seed, s: ZERO }, &[top], &RadauOptions { track_s: false, ..ropts })?;
    let stops: Vec<f64> = radii[..n - 1].iter().rev().map(|&r| tortoise(r, p)).collect::<Result<_>>()?;
    let near = radau::integrate(g_of(omega, l, *p), top, RiccatiState { y: far[0].y, s: ZERO }, &stops, &ropts)?;
    let mut y = vec![far[0].y];
    let mut s = vec![ZERO];
    for st in near {
        y.push(st.y);
        s.push(st.s);
    }
    y.reverse();
    s.reverse();
    Ok((y, s))
}

fn phi_linear(omega: Complex64, l: f64, p: &SpacetimeParams, radii: &[f64], opts: &ChannelOptions) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = radii.len();
    let (r_seed, y_seed) = phi_seed_at(omega, l, p, radii[n - 1], opts.seed_order)?;
    let rhs = linear_rhs(omega, l, *p);
    let stops: Vec<f64> = radii.iter().rev().map(|&r| tortoise(r, p)).collect::<Result<_>>()?;
    let u0 = [Complex64::new(1.0, 0.0), y_seed];
    let (out, _) = integrate_linear_scaled(rhs, tortoise(r_seed, p)?, u0, &stops, &RkOptions::with_tol(opts.rtol))?;
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for (st, ls) in &out {
        y.push(st[1] / st[0]);
        s.push(st[0].ln() + ls);
    }
    let s_top = s[0];
    s.iter_mut().for_each(|v| *v -= s_top);
    y.reverse();
    s.reverse();
    Ok((y, s))
}
