//! Bose weighting, spectral densities and the KMS checks.
//!
//! The spectral density of a channel (or of a summed kernel) is
//! `ρ(ω) = Im G(ω) / π` for `ω > 0`, extended oddly to `ω < 0`. The thermal
//! spectral function is `S(ω) = n(ω) ρ(ω)` with `n(ω) = 1/(1 − e^{−βω})` on both
//! sides of the origin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SpacetimeParams;
use crate::greens::FrequencyGreen;
use crate::position::{two_point_with_fraction, QuadratureSpec, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    pub beta: f64,
    /// Imaginary-time regulator, applied as `τ → τ − iε`.
    pub epsilon: f64,
}

impl ThermalParams {
    pub fn new(beta: f64, epsilon: f64) -> Result<Self> {
        let p = Self { beta, epsilon };
        p.validate()?;
        Ok(p)
    }

    /// `ε = β/10`.
    pub fn with_default_epsilon(beta: f64) -> Result<Self> {
        Self::new(beta, 0.1 * beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5 * self.beta) {
            return Err(Error::Domain(format!("epsilon must lie in (0, beta/2), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `1/(1 − e^{−βω})` for `ω, β > 0`.
pub fn bose_weight(omega: f64, beta: f64) -> Result<f64> {
    if !(omega > 0.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!("bose_weight needs omega > 0 and beta > 0, got {omega}, {beta}")));
    }
    Ok(-1.0 / (-beta * omega).exp_m1())
}

/// `1/(1 − e^{−βω})` for any real `ω ≠ 0`.
fn bose_signed(omega: f64, beta: f64) -> f64 {
    -1.0 / (-beta * omega).exp_m1()
}

/// Channel values multiplied by the Bose weight of their frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedChannel {
    pub omega: f64,
    pub l: u32,
    pub weight: f64,
    pub values: Vec<((f64, f64), Complex64)>,
}

pub fn thermal_green_frequency(stack: &[FrequencyGreen], beta: f64) -> Result<Vec<WeightedChannel>> {
    let Some(first) = stack.first() else {
        return Ok(Vec::new());
    };
    let pairs: Vec<(f64, f64)> = first.values.iter().map(|(p, _)| *p).collect();
    stack
        .iter()
        .map(|g| {
            if g.values.len() != pairs.len() || g.values.iter().zip(&pairs).any(|((p, _), q)| p != q) {
                return Err(Error::Domain("channels do not share radius pairs".into()));
            }
            let weight = bose_weight(g.omega, beta)?;
            Ok(WeightedChannel { omega: g.omega, l: g.l, weight, values: g.values.iter().map(|(p, v)| (*p, v * weight)).collect() })
        })
        .collect()
}

/// `ρ` tabulated at positive frequencies; negative frequencies come from the
/// odd extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub omega_grid: Vec<f64>,
    pub rho: Vec<f64>,
    /// True when the table belongs to coincident radii `r = r'`.
    pub diagonal: bool,
}

impl SpectralDensity {
    pub fn new(omega_grid: Vec<f64>, rho: Vec<f64>, diagonal: bool) -> Result<Self> {
        if omega_grid.len() != rho.len() {
            return Err(Error::Domain("frequency and density tables differ in length".into()));
        }
        if omega_grid.iter().any(|&w| !(w > 0.0 && w.is_finite())) || rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("spectral table needs finite positive frequencies".into()));
        }
        Ok(Self { omega_grid, rho, diagonal })
    }

    /// `Im G(r, r') / π` from each channel of a stack (one frequency each).
    pub fn from_greens(stack: &[FrequencyGreen], r: f64, rp: f64) -> Result<Self> {
        let mut omega = Vec::with_capacity(stack.len());
        let mut rho = Vec::with_capacity(stack.len());
        for g in stack {
            omega.push(g.omega);
            rho.push(g.eval(r, rp)?.im / std::f64::consts::PI);
        }
        Self::new(omega, rho, r == rp)
    }

    /// Odd extension: `ρ(−ω) = −ρ(ω)`.
    pub fn signed(&self, i: usize, negative: bool) -> (f64, f64) {
        if negative {
            (-self.omega_grid[i], -self.rho[i])
        } else {
            (self.omega_grid[i], self.rho[i])
        }
    }
}

/// Largest relative violation of `S(ω) = e^{βω} S(−ω)` over the table.
///
/// The right-hand side is assembled in logarithms so that large `βω` does not
/// overflow; entries with `|S(ω)|` below `f64::MIN_POSITIVE` are compared
/// against that floor.
pub fn detailed_balance_check(s: &SpectralDensity, beta: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.omega_grid.len() {
        let (w, rho) = s.signed(i, false);
        let (wn, rhon) = s.signed(i, true);
        let lhs = bose_signed(w, beta) * rho;
        // e^{βω} S(−ω) = e^{βω} · n(−ω) · ρ(−ω), with |n(−ω)| = 1/expm1(βω)
        let log_n = -ln_expm1(-beta * wn);
        let rhs = -(beta * w + log_n).exp() * rhon.signum() * rhon.abs();
        let rhs = if rhon == 0.0 { 0.0 } else { rhs };
        let v = (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(v);
    }
    worst
}

/// `ln(e^x − 1)` for `x > 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    pub nonnegative: bool,
    pub min_rho: f64,
    pub tolerance: f64,
}

/// Checks `ρ(r, r, ω) ≥ −1e-8·max|ρ|` on a diagonal table.
pub fn ground_positivity_check(s: &SpectralDensity) -> Result<PositivityReport> {
    if !s.diagonal {
        return Err(Error::Domain("positivity needs a diagonal (r = r') table".into()));
    }
    let scale = s.rho.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tolerance = 1e-8 * scale;
    let min_rho = s.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PositivityReport { nonnegative: s.rho.iter().all(|&v| v >= -tolerance), min_rho, tolerance })
}

/// Which side of the strip identity an evaluation belongs to. Evaluators are
/// expected to use a different quadrature for each leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KmsLeg {
    /// `W(t − i(β − ε); r, r')`.
    Shifted,
    /// `W(−t − iε; r', r)`.
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmsReport {
    pub t: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub shifted: Complex64,
    pub reflected: Complex64,
    pub shifted_error: f64,
    pub reflected_error: f64,
    pub difference: f64,
    pub combined_error: f64,
    pub pass: bool,
}

/// Evaluates both sides of the strip boundary identity. The evaluator takes
/// `(leg, τ, r, r')` and returns a value with its error estimate.
pub fn kms_strip_check<F>(eval: F, t: f64, thermal: &ThermalParams, r: f64, rp: f64) -> Result<KmsReport>
where
    F: Fn(KmsLeg, Complex64, f64, f64) -> Result<(Complex64, f64)>,
{
    thermal.validate()?;
    let (beta, eps) = (thermal.beta, thermal.epsilon);
    let (a, ea) = eval(KmsLeg::Shifted, Complex64::new(t, -(beta - eps)), r, rp)?;
    let (b, eb) = eval(KmsLeg::Reflected, Complex64::new(-t, -eps), rp, r)?;
    let difference = (a - b).norm();
    let combined_error = ea + eb;
    Ok(KmsReport {
        t,
        beta,
        epsilon: eps,
        shifted: a,
        reflected: b,
        shifted_error: ea,
        reflected_error: eb,
        difference,
        combined_error,
        pass: difference <= combined_error,
    })
}

/// Angle fraction of the rotated frequency contour used for the reflected leg.
pub const REFLECTED_ANGLE_SCALE: f64 = 0.6;

/// Evaluator backed by the angular mode sum; the reflected leg uses a
/// shallower frequency contour so the two quadratures share no nodes.
pub fn mode_sum_evaluator(
    p: SpacetimeParams,
    beta: f64,
    spec: QuadratureSpec,
) -> impl Fn(KmsLeg, Complex64, f64, f64) -> Result<(Complex64, f64)> {
    move |leg, tau, r, rp| {
        let fraction = match leg {
            KmsLeg::Shifted => spec.angle_fraction,
            KmsLeg::Reflected => REFLECTED_ANGLE_SCALE * spec.angle_fraction,
        };
        let v = two_point_with_fraction(&p, State::Thermal { beta }, tau, r, &[rp], 0.0, &spec, fraction)?[0];
        Ok((v.value, v.total_error()))
    }
}
