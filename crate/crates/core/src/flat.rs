//! Minkowski baseline: the reduced momentum integral, its closed form, the
//! thermal flat correlator, flat channel Green's functions, and the
//! small-mass comparison against the Schwarzschild machinery.
//!
//! [`flat_wightman_integral`] keeps the prefactor `1/(2π)` in front of
//! `∫ d³p/(2ω_p)`; after the angular integration this is
//! `∫_0^∞ dp (p²/ω_p) sinc(pR) e^{−iω_p t}`. [`flat_wightman_closed`] and
//! [`flat_thermal_wightman`] use the standard `1/(2π)³` normalization, under
//! which the ground function is `m K₁(mσ)/(4π²σ)`, `σ = √(R² − t²)`. The two
//! conventions differ by [`CALIBRATION`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::channel::{evaluate_channel, ChannelOptions};
use crate::geometry::SpacetimeParams;
use crate::position::{two_point, QuadratureSpec, State};
use crate::quad::{integrate, QuadOptions};
use crate::special::{bessel_k1, spherical_h1, spherical_j};
use crate::thermal::KmsLeg;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `flat_wightman_integral / flat_wightman_closed`, i.e. `(2π)³/(2π) = 4π²`.
pub const CALIBRATION: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatPoint {
    /// Complex time difference, `Im t < 0`.
    pub t: Complex64,
    /// Spatial separation.
    pub r: f64,
    pub m: f64,
}

impl FlatPoint {
    pub fn new(t: Complex64, r: f64, m: f64) -> Result<Self> {
        if !(t.im < 0.0) || !t.re.is_finite() {
            return Err(Error::Domain(format!("flat point needs Im t < 0, got {t}")));
        }
        if !(r >= 0.0 && r.is_finite()) || !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("flat point needs R >= 0 and m > 0, got R = {r}, m = {m}")));
        }
        Ok(Self { t, r, m })
    }
}

/// `sin(x)/x`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `∫_0^∞ dp (p²/ω) sinc(pR) w(ω)` with `ω = √(p² + m²)`, truncated where the
/// damping `e^{−κω}` makes the remainder negligible and bounded there.
fn momentum_integral<W>(m: f64, r: f64, kappa: f64, spec: &QuadratureSpec, first: f64, weight: W) -> Result<(Complex64, f64)>
where
    W: Fn(f64) -> Complex64,
{
    let f = |p: f64| -> Result<Vec<Complex64>> {
        let w = (p * p + m * m).sqrt();
        Ok(vec![weight(w) * (p * p / w * sinc(p * r))])
    };
    let opts = QuadOptions { rel_tol: spec.rel_tol, abs_tol: spec.abs_tol, max_intervals: spec.max_panels, min_width: 0.0 };
    let wmax = spec.omega_max_for(m, kappa);
    let mut end = (wmax * wmax - m * m).sqrt();
    let mut breaks = vec![0.0];
    let mut x = first.min(end);
    while x < end {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.push(end);
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for _ in 0..16 {
        let res = integrate(&f, &breaks, &opts)?;
        value += res.value[0];
        error += res.error[0];
        // the integrand is bounded by p e^{−κp}·|prefactor| beyond `end`
        let g = f(end)?[0].norm();
        let tail = g / kappa * (1.0 + 2.0 / (kappa * end));
        if tail <= (spec.rel_tol * value.norm()).max(spec.abs_tol) {
            return Ok((value, error + tail));
        }
        breaks = vec![end, 1.5 * end, 2.0 * end];
        end *= 2.0;
    }
    Err(Error::Quadrature(format!("momentum tail not resolved by p = {end}")))
}

/// Ground function with the `1/(2π)` prefactor; returns the value and its
/// error estimate.
pub fn flat_wightman_integral(pt: &FlatPoint, spec: &QuadratureSpec) -> Result<(Complex64, f64)> {
    spec.validate(pt.m)?;
    let t = pt.t;
    momentum_integral(pt.m, pt.r, -t.im, spec, 1.0, |w| (-I * w * t).exp())
}

/// `m K₁(mσ)/(4π²σ)` with `σ = √(R² − t²)` on the principal branch, which for
/// `Im t < 0` is continuous and has `Re σ > 0`.
pub fn flat_wightman_closed(pt: &FlatPoint) -> Result<Complex64> {
    let sigma = (pt.r * pt.r - pt.t * pt.t).sqrt();
    if !(sigma.re > 0.0) || !sigma.im.is_finite() {
        return Err(Error::Branch { re: pt.t.re, im: pt.t.im });
    }
    Ok(pt.m * bessel_k1(sigma * pt.m) / (4.0 * std::f64::consts::PI.powi(2) * sigma))
}

/// Thermal function in the standard normalization for `−β < Im t < 0`.
pub fn flat_thermal_wightman(pt: &FlatPoint, beta: f64, spec: &QuadratureSpec) -> Result<(Complex64, f64)> {
    flat_thermal_with_layout(pt, beta, spec, 1.0)
}

fn flat_thermal_with_layout(pt: &FlatPoint, beta: f64, spec: &QuadratureSpec, first: f64) -> Result<(Complex64, f64)> {
    spec.validate(pt.m)?;
    if !(beta > 0.0) || !(-pt.t.im < beta) {
        return Err(Error::Domain(format!("thermal flat function needs −β < Im t < 0, got t = {}, β = {beta}", pt.t)));
    }
    let t = pt.t;
    let kappa = (-t.im).min(beta + t.im);
    let (v, e) = momentum_integral(pt.m, pt.r, kappa, spec, first, |w| {
        let n = -1.0 / (-beta * w).exp_m1();
        n * ((-I * w * t).exp() + (I * w * (t + I * beta)).exp())
    })?;
    Ok((v / CALIBRATION, e / CALIBRATION))
}

/// KMS evaluator from the flat thermal integral; `r`, `r'` are radii on a
/// common ray, so `R = |r − r'|`. The two legs use different panel layouts.
pub fn flat_kms_evaluator(m: f64, beta: f64, spec: QuadratureSpec) -> impl Fn(KmsLeg, Complex64, f64, f64) -> Result<(Complex64, f64)> {
    move |leg, tau, r, rp| {
        let first = match leg {
            KmsLeg::Shifted => 1.0,
            KmsLeg::Reflected => 0.7,
        };
        flat_thermal_with_layout(&FlatPoint::new(tau, (r - rp).abs(), m)?, beta, &spec, first)
    }
}

/// `G_l = i q h_l(q r_>) j_l(q r_<)` with `q = √(ω² − m²)` (`Im q > 0` below
/// threshold); same normalization as the Wronskian construction.
pub fn flat_channel_green(omega: f64, l: u32, m: f64, r: f64, rp: f64) -> Result<Complex64> {
    if (omega * omega - m * m).abs() < 1e-9 {
        return Err(Error::Threshold { omega });
    }
    if !(r > 0.0 && rp > 0.0) {
        return Err(Error::Domain("radii must be positive".into()));
    }
    let q = Complex64::new(omega * omega - m * m, 0.0).sqrt();
    let (lo, hi) = if r < rp { (r, rp) } else { (rp, r) };
    let l = l as usize;
    let j = spherical_j(l, q * lo)[l];
    let h = spherical_h1(l, q * hi)[l];
    Ok(I * q * h * j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProbe {
    pub omega: f64,
    pub l: u32,
    pub r: f64,
    pub rp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionProbe {
    /// Time difference; only `Re`, `Im` parts are used.
    pub t_re: f64,
    pub t_im: f64,
    pub r: f64,
    pub rp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatDeviation {
    pub kind: &'static str,
    pub label: String,
    pub curved_re: f64,
    pub curved_im: f64,
    pub flat_re: f64,
    pub flat_im: f64,
    pub relative_deviation: f64,
    /// Error estimate of the curved value relative to the flat value.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatLimitReport {
    pub big_m: f64,
    pub m: f64,
    pub rows: Vec<FlatDeviation>,
}

impl FlatLimitReport {
    pub fn max_deviation(&self, kind: &str) -> f64 {
        self.rows.iter().filter(|d| d.kind == kind).map(|d| d.relative_deviation).fold(0.0, f64::max)
    }
}

/// Compares Schwarzschild values at small `M` with the flat oracles: channel
/// Green's functions from the channel evaluator, and ground two-point functions at
/// `γ = 0` against the closed form at `R = |r − r'|`.
pub fn flat_limit_compare(
    big_m: f64,
    m: f64,
    channels: &[ChannelProbe],
    positions: &[PositionProbe],
    spec: &QuadratureSpec,
) -> Result<FlatLimitReport> {
    if !(big_m >= 0.0 && big_m <= 1e-2 / m) {
        return Err(Error::Domain(format!("flat comparison needs 0 <= M <= 1e-2/m, got {big_m}")));
    }
    let p = if big_m == 0.0 { SpacetimeParams::flat(m)? } else { SpacetimeParams::new(big_m, m)? };
    let mut rows = Vec::new();
    for c in channels {
        let flat = flat_channel_green(c.omega, c.l, m, c.r, c.rp)?;
        let curved = curved_channel(&p, c)?;
        rows.push(FlatDeviation {
            kind: "channel",
            label: format!("omega={} l={} r={} rp={}", c.omega, c.l, c.r, c.rp),
            curved_re: curved.re,
            curved_im: curved.im,
            flat_re: flat.re,
            flat_im: flat.im,
            relative_deviation: (curved - flat).norm() / flat.norm(),
            relative_error: 0.0,
        });
    }
    for q in positions {
        let t = Complex64::new(q.t_re, q.t_im);
        let flat = flat_wightman_closed(&FlatPoint::new(t, (q.r - q.rp).abs(), m)?)?;
        let v = two_point(&p, State::Ground, t, q.r, q.rp, 0.0, spec)?;
        rows.push(FlatDeviation {
            kind: "position",
            label: format!("t={t} r={} rp={}", q.r, q.rp),
            curved_re: v.value.re,
            curved_im: v.value.im,
            flat_re: flat.re,
            flat_im: flat.im,
            relative_deviation: (v.value - flat).norm() / flat.norm(),
            relative_error: v.total_error() / flat.norm(),
        });
    }
    Ok(FlatLimitReport { big_m, m, rows })
}

fn curved_channel(p: &SpacetimeParams, c: &ChannelProbe) -> Result<Complex64> {
    let radii = sorted(&[c.r, c.rp]);
    let ev = evaluate_channel(Complex64::new(c.omega, 0.0), c.l, p, &radii, &ChannelOptions::default())?;
    let (i, j) = if c.r <= c.rp { (0, radii.len() - 1) } else { (radii.len() - 1, 0) };
    Ok(ev.green(i, j))
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rel: f64) -> QuadratureSpec {
        QuadratureSpec { rel_tol: rel, max_panels: 4000, ..Default::default() }
    }

    /// `K₁(x)` for real `x > 0` from `∫_0^∞ e^{−x cosh s} cosh s ds`.
    fn k1_oracle(x: f64) -> f64 {
        let (n, h) = (40_000, 1e-3);
        let f = |s: f64| (-x * s.cosh()).exp() * s.cosh();
        let mut acc = 0.5 * f(0.0);
        for k in 1..n {
            acc += f(k as f64 * h);
        }
        acc * h
    }

    #[test]
    fn closed_form_at_euclidean_point() {
        let v = flat_wightman_closed(&FlatPoint::new(Complex64::new(0.0, -2.0), 0.0, 1.0).unwrap()).unwrap();
        let want = k1_oracle(2.0) / 2.0 / (4.0 * std::f64::consts::PI.powi(2));
        assert!(v.im.abs() < 1e-16 && (v.re - want).abs() < 1e-12 * want, "{v} vs {want}");
    }

    #[test]
    fn closed_form_decays_at_rate_m() {
        let at = |s: f64| flat_wightman_closed(&FlatPoint::new(Complex64::new(0.0, -0.1), s, 1.0).unwrap()).unwrap().norm().ln();
        let slope = (at(41.0) - at(40.0)) + 1.5 / 40.5;
        assert!((slope + 1.0).abs() < 1e-3, "{slope}");
    }

    #[test]
    fn integral_matches_closed_form_with_calibration() {
        let pt = FlatPoint::new(Complex64::new(0.0, -0.5), 2.0, 1.0).unwrap();
        let (v, e) = flat_wightman_integral(&pt, &spec(1e-11)).unwrap();
        let c = flat_wightman_closed(&pt).unwrap() * CALIBRATION;
        assert!((v - c).norm() < 1e-8 * c.norm(), "{v} vs {c}, err {e}");
    }

    #[test]
    fn integral_is_continuous_at_zero_separation() {
        let t = Complex64::new(0.2, -0.4);
        let at = |r: f64| flat_wightman_integral(&FlatPoint::new(t, r, 1.0).unwrap(), &spec(1e-10)).unwrap();
        let closed = |r: f64| flat_wightman_closed(&FlatPoint::new(t, r, 1.0).unwrap()).unwrap() * CALIBRATION;
        let ((a, ea), (b, eb), (c, ec)) = (at(1e-3), at(1e-4), at(0.0));
        // the genuine O(R²) change between the probes is taken from the closed form
        assert!((a - b - (closed(1e-3) - closed(1e-4))).norm() <= ea + eb, "{a} vs {b}");
        assert!((b - c - (closed(1e-4) - closed(0.0))).norm() <= eb + ec, "{b} vs {c}");
    }

    #[test]
    fn integral_conjugation_symmetry() {
        let (a, _) = flat_wightman_integral(&FlatPoint::new(Complex64::new(-0.3, -0.2), 1.5, 1.0).unwrap(), &spec(1e-9)).unwrap();
        let (b, _) = flat_wightman_integral(&FlatPoint::new(Complex64::new(0.3, -0.2), 1.5, 1.0).unwrap(), &spec(1e-9)).unwrap();
        assert!((a - b.conj()).norm() < 1e-12 * a.norm());
    }

    /// Image sum `Σ_n W_0(t − inβ)`, with `W_0` even in `t`.
    fn thermal_images(t: Complex64, r: f64, beta: f64) -> Complex64 {
        let w0 = |s: Complex64| {
            let s = if s.im < 0.0 { s } else { -s };
            flat_wightman_closed(&FlatPoint::new(s, r, 1.0).unwrap()).unwrap()
        };
        (-40..=40).map(|n| w0(t - I * (n as f64) * beta)).sum()
    }

    #[test]
    fn thermal_integral_matches_image_sum() {
        for &(t, r, beta) in &[(Complex64::new(0.5, -0.2), 1.0, 2.0), (Complex64::new(-0.3, -1.0), 0.5, 3.0)] {
            let (v, _) = flat_thermal_wightman(&FlatPoint::new(t, r, 1.0).unwrap(), beta, &spec(1e-10)).unwrap();
            let want = thermal_images(t, r, beta);
            assert!((v - want).norm() < 1e-8 * want.norm(), "{v} vs {want}");
        }
    }

    #[test]
    fn thermal_diagonal_dominates_ground() {
        let t = Complex64::new(0.0, -0.3);
        let g = flat_wightman_closed(&FlatPoint::new(t, 0.0, 1.0).unwrap()).unwrap();
        for beta in [1.0, 4.0, 20.0] {
            let (v, _) = flat_thermal_wightman(&FlatPoint::new(t, 0.0, 1.0).unwrap(), beta, &spec(1e-9)).unwrap();
            assert!(v.re > g.re);
        }
    }

    #[test]
    fn flat_kms_legs_agree() {
        let th = crate::thermal::ThermalParams::new(2.0, 0.2).unwrap();
        let rep = crate::thermal::kms_strip_check(flat_kms_evaluator(1.0, 2.0, spec(1e-9)), 0.5, &th, 3.0, 4.0).unwrap();
        assert!(rep.difference < 1e-6 * rep.shifted.norm() && rep.pass, "{rep:?}");
    }

    #[test]
    fn channel_green_s_wave_forms() {
        let (r, rp) = (2.0, 3.5);
        let q: f64 = (1.44f64 - 1.0).sqrt();
        let want = Complex64::new(0.0, q * rp).exp() * (q * r).sin() / (q * r * rp);
        let g = flat_channel_green(1.2, 0, 1.0, r, rp).unwrap();
        assert!((g - want).norm() < 1e-14 * want.norm());
        assert_eq!(g, flat_channel_green(1.2, 0, 1.0, rp, r).unwrap());
        let b: f64 = (1.0f64 - 0.25).sqrt();
        let want = (b * r).sinh() * (-b * rp).exp() / (b * r * rp);
        let g = flat_channel_green(0.5, 0, 1.0, r, rp).unwrap();
        assert!((g.re - want).abs() < 1e-14 * want && g.im.abs() < 1e-14 * want);
        assert!(matches!(flat_channel_green(1.0, 0, 1.0, r, rp), Err(Error::Threshold { .. })));
    }

    #[test]
    fn channel_green_matches_flat_machinery() {
        for &(w, l) in &[(1.3, 0u32), (1.3, 3), (0.6, 2)] {
            let c = ChannelProbe { omega: w, l, r: 4.0, rp: 6.5 };
            let g = curved_channel(&SpacetimeParams::flat(1.0).unwrap(), &c).unwrap();
            let want = flat_channel_green(w, l, 1.0, 4.0, 6.5).unwrap();
            assert!((g - want).norm() < 1e-8 * want.norm(), "{w} {l}: {g} vs {want}");
        }
    }

    /// Leading long-range phase correction `η ln(2qr)` with `η = M(2ω²−m²)/q`
    /// applied to `sin(qr) e^{iqr'}`; ignores the `O(M)` short-range shift.
    fn coulomb_phase_estimate(big_m: f64, w: f64, r: f64, rp: f64) -> f64 {
        let q = (w * w - 1.0).sqrt();
        let eta = big_m * (2.0 * w * w - 1.0) / q;
        let shift = |x: f64| eta * (2.0 * q * x).ln();
        let d = Complex64::new(shift(r) / (q * r).tan(), shift(rp));
        d.norm()
    }

    #[test]
    fn small_mass_channels_approach_flat() {
        let probe = [
            ChannelProbe { omega: 1.2, l: 0, r: 60.0, rp: 70.0 },
            ChannelProbe { omega: 0.6, l: 0, r: 60.0, rp: 70.0 },
        ];
        let a = flat_limit_compare(1e-3, 1.0, &probe, &[], &spec(1e-6)).unwrap();
        let b = flat_limit_compare(1e-2, 1.0, &probe, &[], &spec(1e-6)).unwrap();
        let (da, db) = (a.rows[0].relative_deviation, b.rows[0].relative_deviation);
        // The super-threshold deviation is the physical log phase, not noise.
        assert!((da - 1.5911e-2).abs() < 1e-5, "{da}");
        assert!(((db / da) - 10.0).abs() < 0.1, "{da} {db}");
        let est = coulomb_phase_estimate(1e-3, 1.2, 60.0, 70.0);
        assert!((da - est).abs() < 0.15 * da, "{da} vs {est}");
        assert!(a.rows[1].relative_deviation < 1e-4);
        assert!(a.rows[1].relative_deviation < b.rows[1].relative_deviation);
    }
}
