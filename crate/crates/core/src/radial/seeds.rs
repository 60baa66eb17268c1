//! Asymptotic seeds: the normalizable series at spatial infinity and the
//! regular (ingoing) Frobenius series at the horizon.
//!
//! Both accept complex frequencies; the public wrappers restrict to real `ω`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{potential_gap, tortoise_gap, SpacetimeParams};

/// Relative ODE residual accepted at a seed point.
pub const SEED_RESIDUAL_TOL: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Seed in logarithmic form: `u = exp(log_u)`, `y = (du/dr*)/u`.
#[derive(Debug, Clone, Copy)]
pub struct LogSeed {
    pub log_u: Complex64,
    pub y: Complex64,
    /// `|u'' + (ω² − V) u| / ((|ω|² + |V|) |u|)` at the seed.
    pub residual: f64,
}

impl LogSeed {
    pub fn u_du(&self) -> (Complex64, Complex64) {
        let u = self.log_u.exp();
        (u, u * self.y)
    }
}

/// Radial momentum `q = sqrt(ω² − m²)` on the branch continuous from the upper half plane.
pub fn radial_momentum(omega: Complex64, m: f64) -> Complex64 {
    let mut q = (omega * omega - m * m).sqrt();
    if q.im < 0.0 || (q.im == 0.0 && omega.re < 0.0 && q.re > 0.0) {
        q = -q;
    }
    q
}

/// `i^n` for integer `n >= 0`.
pub fn i_pow(n: u64) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// Coefficients `a_n` of `u = e^{iqr} r^{s0} Σ a_n r^{-n}` and the exponent `s0`.
pub fn phi_coefficients(omega: Complex64, l: u32, p: &SpacetimeParams, order: usize) -> (Complex64, Complex64, Vec<Complex64>) {
    phi_coefficients_f(omega, l as f64, p, order)
}

pub(crate) fn phi_coefficients_f(omega: Complex64, l: f64, p: &SpacetimeParams, order: usize) -> (Complex64, Complex64, Vec<Complex64>) {
    let m = p.m;
    let mm = p.big_m;
    let q = radial_momentum(omega, m);
    let s0 = I * mm * (omega * omega * 2.0 - m * m) / q;
    let ll = l * (l + 1.0);
    let t2 = |s: Complex64| s * (s - 1.0) - I * q * s * (8.0 * mm) - q * q * (4.0 * mm * mm) + I * q * (2.0 * mm) - ll;
    let t3 = |s: Complex64| {
        -(s * (s - 1.0)) * (4.0 * mm) + I * q * s * (8.0 * mm * mm) - I * q * (4.0 * mm * mm)
            + s * (2.0 * mm)
            + 2.0 * mm * (ll - 1.0)
    };
    let t4 = |s: Complex64| (s - 1.0) * (s - 1.0) * (4.0 * mm * mm);
    let mut a = vec![Complex64::new(1.0, 0.0)];
    for j in 1..=order {
        let jf = j as f64;
        let mut acc = a[j - 1] * t2(s0 - jf + 1.0);
        if j >= 2 {
            acc += a[j - 2] * t3(s0 - jf + 2.0);
        }
        if j >= 3 {
            acc += a[j - 3] * t4(s0 - jf + 3.0);
        }
        a.push(acc / (I * q * (2.0 * jf)));
    }
    (q, s0, a)
}

/// Infinity seed for complex `ω`, with amplitude fixed by `log_norm`.
pub fn phi_log_seed(omega: Complex64, l: u32, p: &SpacetimeParams, r: f64, order: usize, log_norm: Complex64) -> LogSeed {
    phi_log_seed_f(omega, l as f64, p, r, order, log_norm)
}

pub(crate) fn phi_log_seed_f(omega: Complex64, l: f64, p: &SpacetimeParams, r: f64, order: usize, log_norm: Complex64) -> LogSeed {
    let (q, s0, a) = phi_coefficients_f(omega, l, p, order);
    let mm = p.big_m;
    let ll = l * (l + 1.0);
    let mut w = Complex64::new(0.0, 0.0);
    let mut wr = Complex64::new(0.0, 0.0);
    let mut rp = 1.0;
    for (n, an) in a.iter().enumerate() {
        w += an * rp;
        wr += an * (-(n as f64) * rp / r);
        rp /= r;
    }
    let f = 1.0 - 2.0 * mm / r;
    let pexp = I * q + s0 / r;
    let y = f * (pexp + wr / w);
    let log_u = log_norm + I * q * r + s0 * r.ln() + w.ln();

    // Leftover powers from truncation, divided by r^4 and by the leading scale of u.
    let t2 = |s: Complex64| s * (s - 1.0) - I * q * s * (8.0 * mm) - q * q * (4.0 * mm * mm) + I * q * (2.0 * mm) - ll;
    let t3 = |s: Complex64| {
        -(s * (s - 1.0)) * (4.0 * mm) + I * q * s * (8.0 * mm * mm) - I * q * (4.0 * mm * mm)
            + s * (2.0 * mm)
            + 2.0 * mm * (ll - 1.0)
    };
    let t4 = |s: Complex64| (s - 1.0) * (s - 1.0) * (4.0 * mm * mm);
    let nmax = a.len() - 1;
    let mut left = Complex64::new(0.0, 0.0);
    for j in nmax + 1..=nmax + 3 {
        let jf = j as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        if j - 1 <= nmax {
            acc += a[j - 1] * t2(s0 - jf + 1.0);
        }
        if j >= 2 && j - 2 <= nmax {
            acc += a[j - 2] * t3(s0 - jf + 2.0);
        }
        if j >= 3 && j - 3 <= nmax {
            acc += a[j - 3] * t4(s0 - jf + 3.0);
        }
        // power r^{s0 + 3 - j}, relative to the r^{s0} of u and the r^4 of the polynomial form
        left += acc * r.powi(-(j as i32) - 1);
    }
    let v = potential_gap(r - p.horizon(), l, p);
    let scale = omega.norm_sqr() + v;
    let residual = left.norm() / (w.norm() * scale);
    LogSeed { log_u, y, residual }
}

/// Frobenius coefficients `b_n` of `u = e^{-iωr*} Σ b_n x^n`, `x = r − 2M`.
pub fn psi_coefficients(omega: Complex64, l: u32, p: &SpacetimeParams, order: usize) -> Vec<Complex64> {
    psi_coefficients_f(omega, l as f64, p, order)
}

pub(crate) fn psi_coefficients_f(omega: Complex64, l: f64, p: &SpacetimeParams, order: usize) -> Vec<Complex64> {
    let mm = p.big_m;
    let m2 = p.m * p.m;
    let ll = l * (l + 1.0);
    let b1 = Complex64::new(2.0 * mm, 0.0) - I * omega * (24.0 * mm * mm);
    let b2 = -I * omega * (12.0 * mm);
    let b3 = -I * omega * 2.0;
    let c0 = -(8.0 * mm * mm * mm * m2 + 2.0 * mm * ll + 2.0 * mm);
    let c1 = -(12.0 * mm * mm * m2 + ll);
    let c2 = -6.0 * mm * m2;
    let c3 = -m2;
    let mut b = vec![Complex64::new(1.0, 0.0)];
    for k in 0..order {
        let kf = k as f64;
        let mut acc = b[k] * (b1 * kf + 4.0 * mm * kf * (kf - 1.0) + c0);
        if k >= 1 {
            acc += b[k - 1] * (b2 * (kf - 1.0) + (kf - 1.0) * (kf - 2.0) + c1);
        }
        if k >= 2 {
            acc += b[k - 2] * (b3 * (kf - 2.0) + c2);
        }
        if k >= 3 {
            acc += b[k - 3] * c3;
        }
        let den = (Complex64::new(kf + 1.0, 0.0) - I * omega * (4.0 * mm)) * (4.0 * mm * mm * (kf + 1.0));
        b.push(-acc / den);
    }
    b
}

/// Horizon seed for complex `ω` at gap `x`; `u = e^{-iωr*}(1 + O(x))`.
pub fn psi_log_seed(omega: Complex64, l: u32, p: &SpacetimeParams, x: f64, order: usize) -> LogSeed {
    psi_log_seed_f(omega, l as f64, p, x, order)
}

pub(crate) fn psi_log_seed_f(omega: Complex64, l: f64, p: &SpacetimeParams, x: f64, order: usize) -> LogSeed {
    let b = psi_coefficients_f(omega, l, p, order);
    let mm = p.big_m;
    let mut h = Complex64::new(0.0, 0.0);
    let mut hx = Complex64::new(0.0, 0.0);
    let mut hxx = Complex64::new(0.0, 0.0);
    let mut xp = 1.0;
    for (n, bn) in b.iter().enumerate() {
        let nf = n as f64;
        h += bn * xp;
        if n >= 1 {
            hx += bn * (nf * xp / x);
        }
        if n >= 2 {
            hxx += bn * (nf * (nf - 1.0) * xp / (x * x));
        }
        xp *= x;
    }
    let g = x / (x + 2.0 * mm);
    let gp = 2.0 * mm / ((x + 2.0 * mm) * (x + 2.0 * mm));
    let rstar = tortoise_gap(x, p);
    let v = potential_gap(x, l, p);
    let y = -I * omega + g * hx / h;
    let log_u = -I * omega * rstar + h.ln();
    let res = -I * omega * (2.0 * g) * hx + hx * (g * gp) + hxx * (g * g) - h * v;
    let residual = res.norm() / (h.norm() * (omega.norm_sqr() + v).max(f64::MIN_POSITIVE));
    LogSeed { log_u, y, residual }
}

fn check_threshold(omega: f64, p: &SpacetimeParams) -> Result<()> {
    if (omega * omega - p.m * p.m).abs() < 1e-9 {
        return Err(Error::Threshold { omega });
    }
    Ok(())
}

/// Amplitude of the infinity solution: `1/(q i^{l+1})` above threshold, `1/i^{l+2}` below.
pub fn phi_log_norm(omega: f64, l: u32, p: &SpacetimeParams) -> Complex64 {
    let q = radial_momentum(Complex64::new(omega, 0.0), p.m);
    if omega * omega > p.m * p.m {
        -(q * i_pow(l as u64 + 1)).ln()
    } else {
        -i_pow(l as u64 + 2).ln()
    }
}

/// `(u, du/dr*)` of the infinity-normalized solution at `r_seed`.
pub fn seed_phi_infinity(omega: f64, l: u32, p: &SpacetimeParams, r_seed: f64, order: usize) -> Result<(Complex64, Complex64)> {
    Ok(seed_phi_checked(omega, l, p, r_seed, order)?.u_du())
}

pub(crate) fn seed_phi_checked(omega: f64, l: u32, p: &SpacetimeParams, r_seed: f64, order: usize) -> Result<LogSeed> {
    check_threshold(omega, p)?;
    if order < 1 {
        return Err(Error::Domain("seed order must be at least 1".into()));
    }
    let min_r = 50.0 * (2.0 * p.big_m).max(1.0 / p.m);
    if !(r_seed >= min_r) {
        return Err(Error::Domain(format!("r_seed = {r_seed} is below the asymptotic bound {min_r}")));
    }
    let s = phi_log_seed(Complex64::new(omega, 0.0), l, p, r_seed, order, phi_log_norm(omega, l, p));
    if !(s.residual <= SEED_RESIDUAL_TOL) {
        return Err(Error::SeedAccuracy { residual: s.residual, tol: SEED_RESIDUAL_TOL });
    }
    Ok(s)
}

/// `(u, du/dr*)` of the horizon-regular solution at `rstar_seed`.
pub fn seed_psi_horizon(omega: f64, l: u32, p: &SpacetimeParams, rstar_seed: f64, order: usize) -> Result<(Complex64, Complex64)> {
    Ok(seed_psi_checked(omega, l, p, rstar_seed, order)?.u_du())
}

pub(crate) fn seed_psi_checked(omega: f64, l: u32, p: &SpacetimeParams, rstar_seed: f64, order: usize) -> Result<LogSeed> {
    if p.is_flat() {
        return Err(Error::Domain("horizon seed needs M > 0".into()));
    }
    if order < 1 {
        return Err(Error::Domain("seed order must be at least 1".into()));
    }
    if !(rstar_seed <= -15.0 * p.horizon()) {
        return Err(Error::Domain(format!("rstar_seed = {rstar_seed} is not deep enough in the near-horizon region")));
    }
    let x = crate::geometry::inverse_tortoise_gap(rstar_seed, p)?;
    let s = psi_log_seed(Complex64::new(omega, 0.0), l, p, x, order);
    if !(s.residual <= SEED_RESIDUAL_TOL) {
        return Err(Error::SeedAccuracy { residual: s.residual, tol: SEED_RESIDUAL_TOL });
    }
    Ok(s)
}
