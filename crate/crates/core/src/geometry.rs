//! Schwarzschild exterior: tortoise coordinate, its inverse and the radial potential.
//!
//! Near the horizon `r - 2M` falls below the resolution of `r` itself, so the
//! routines here also work with the horizon gap `x = r - 2M` directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Black-hole mass `M` and field mass `m` in geometric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeParams {
    #[serde(rename = "M")]
    pub big_m: f64,
    pub m: f64,
}

impl SpacetimeParams {
    pub fn new(big_m: f64, m: f64) -> Result<Self> {
        if !(big_m >= 0.0) || !big_m.is_finite() {
            return Err(Error::Domain(format!("black-hole mass must be >= 0, got {big_m}")));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("field mass must be > 0, got {m}")));
        }
        Ok(Self { big_m, m })
    }

    pub fn flat(m: f64) -> Result<Self> {
        Self::new(0.0, m)
    }

    pub fn horizon(&self) -> f64 {
        2.0 * self.big_m
    }

    pub fn is_flat(&self) -> bool {
        self.big_m == 0.0
    }
}

/// Paired tortoise and areal radii, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub rstar: Vec<f64>,
    pub r: Vec<f64>,
    /// `r - 2M`, kept separately because it underflows relative to `r` near the horizon.
    pub gap: Vec<f64>,
}

impl RadialGrid {
    pub fn from_rstar(rstar: Vec<f64>, p: &SpacetimeParams) -> Result<Self> {
        check_increasing(&rstar)?;
        let mut r = Vec::with_capacity(rstar.len());
        let mut gap = Vec::with_capacity(rstar.len());
        for &s in &rstar {
            let x = inverse_tortoise_gap(s, p)?;
            gap.push(x);
            r.push(p.horizon() + x);
        }
        Ok(Self { rstar, r, gap })
    }

    pub fn from_r(r: Vec<f64>, p: &SpacetimeParams) -> Result<Self> {
        check_increasing(&r)?;
        let mut rstar = Vec::with_capacity(r.len());
        let mut gap = Vec::with_capacity(r.len());
        for &ri in &r {
            rstar.push(tortoise(ri, p)?);
            gap.push(ri - p.horizon());
        }
        Ok(Self { rstar, r, gap })
    }

    /// `n` points uniformly spaced in `r*` over `[a, b]`.
    pub fn uniform_rstar(a: f64, b: f64, n: usize, p: &SpacetimeParams) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(Error::Domain(format!("bad uniform grid [{a}, {b}] with {n} points")));
        }
        let h = (b - a) / (n - 1) as f64;
        Self::from_rstar((0..n).map(|i| a + h * i as f64).collect(), p)
    }

    pub fn len(&self) -> usize {
        self.rstar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rstar.is_empty()
    }
}

fn check_increasing(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `r* = r + 2M ln(r/2M - 1)`.
pub fn tortoise(r: f64, p: &SpacetimeParams) -> Result<f64> {
    if p.is_flat() {
        return Ok(r);
    }
    let rh = p.horizon();
    if !(r > rh) {
        return Err(Error::Domain(format!("r = {r} is not outside the horizon {rh}")));
    }
    Ok(tortoise_gap(r - rh, p))
}

/// Tortoise coordinate as a function of the horizon gap `x = r - 2M > 0`.
pub fn tortoise_gap(x: f64, p: &SpacetimeParams) -> f64 {
    let rh = p.horizon();
    if rh == 0.0 {
        return x;
    }
    rh + x + rh * (x / rh).ln()
}

/// Radius `r` with `tortoise(r) = rstar`.
pub fn inverse_tortoise(rstar: f64, p: &SpacetimeParams) -> Result<f64> {
    Ok(p.horizon() + inverse_tortoise_gap(rstar, p)?)
}

/// Horizon gap `x = r - 2M` at tortoise coordinate `rstar`.
///
/// With `s = ln(x/2M)` the defining relation becomes `e^s + s = rstar/2M - 1`,
/// which is monotone in `s`; it is solved by safeguarded Newton iteration.
pub fn inverse_tortoise_gap(rstar: f64, p: &SpacetimeParams) -> Result<f64> {
    if !rstar.is_finite() {
        return Err(Error::Domain(format!("non-finite tortoise coordinate {rstar}")));
    }
    if p.is_flat() {
        return Ok(rstar);
    }
    let rh = p.horizon();
    let c = rstar / rh - 1.0;
    // starting point from the asymptotics of the Lambert function W(e^c) = e^s
    let s = if c < -2.0 {
        let z = c.exp();
        c - z + z * z
    } else if c > 3.0 {
        let lc = c.ln();
        (c - lc + lc / c).ln()
    } else {
        f64::NAN
    };
    lambert_log(c, s).map(|s| rh * s.exp()).ok_or_else(|| Error::Convergence(format!("inverse tortoise at r* = {rstar}")))
}

/// Root `s` of `e^s + s = c` by safeguarded Halley iteration from `s0`
/// (bracket midpoint when `s0` is NaN).
fn lambert_log(c: f64, s0: f64) -> Option<f64> {
    let (mut lo, mut hi) = if c < 1.0 { (c - 1.0f64.exp(), c) } else { (0.0, c.ln()) };
    let mut s = if s0.is_nan() { 0.5 * (lo + hi) } else { s0.clamp(lo, hi) };
    for _ in 0..100 {
        let es = s.exp();
        let gs = es + s - c;
        if gs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        // Halley step; g' = e^s + 1, g'' = e^s
        let d1 = es + 1.0;
        let mut next = s - 2.0 * gs * d1 / (2.0 * d1 * d1 - gs * es);
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - s).abs();
        s = next;
        if step <= 4.0 * f64::EPSILON * (1.0 + s.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
            return Some(s);
        }
    }
    None
}

/// `V_l(r) = (1 - 2M/r)(l(l+1)/r^2 + 2M/r^3 + m^2)`.
pub fn effective_potential(r: f64, l: i64, p: &SpacetimeParams) -> Result<f64> {
    if l < 0 {
        return Err(Error::Domain(format!("negative angular momentum {l}")));
    }
    if !p.is_flat() && !(r > p.horizon()) {
        return Err(Error::Domain(format!("r = {r} is not outside the horizon")));
    }
    if p.is_flat() && !(r > 0.0) {
        return Err(Error::Domain(format!("r = {r} must be positive")));
    }
    Ok(potential_gap(r - p.horizon(), l as f64, p))
}

/// Potential evaluated from the horizon gap; `ll = l(l+1)` is formed internally from `l`.
pub fn potential_gap(x: f64, l: f64, p: &SpacetimeParams) -> f64 {
    let r = p.horizon() + x;
    let ll = l * (l + 1.0);
    (x / r) * (ll / (r * r) + 2.0 * p.big_m / (r * r * r) + p.m * p.m)
}
