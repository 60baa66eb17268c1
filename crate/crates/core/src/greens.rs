//! Frequency-domain Green's function of one angular channel,
//! `G_l(r, r'; ω) = φ(r_>) ψ(r_<) / W` with `φ = u_φ / r`, `ψ = u_ψ / r`.
//!
//! `W` is the Wronskian of the reduced solutions in `r*`. With that bookkeeping
//! `G = u_φ(r_>) u_ψ(r_<) / (r r' W)` and `∂_{r*}G` jumps by `−1/r'^2` across
//! `r = r'`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{tortoise, RadialGrid, SpacetimeParams};
use crate::radial::{wronskian, ModeSolution};

#[derive(Debug, Clone)]
pub struct FrequencyGreen {
    pub omega: f64,
    pub l: u32,
    pub params: SpacetimeParams,
    pub wronskian: Complex64,
    /// `((r, r'), G)` in the order the pairs were requested.
    pub values: Vec<((f64, f64), Complex64)>,
    /// Union of the radii appearing in `values`.
    pub grid: RadialGrid,
    phi: ModeSolution,
    psi: ModeSolution,
}

impl FrequencyGreen {
    /// Stored value for the pair, in either order.
    pub fn get(&self, r: f64, rp: f64) -> Option<Complex64> {
        self.values
            .iter()
            .find(|((a, b), _)| (*a == r && *b == rp) || (*a == rp && *b == r))
            .map(|(_, g)| *g)
    }

    /// Evaluates `G(r, r')` at any radii covered by both modes.
    pub fn eval(&self, r: f64, rp: f64) -> Result<Complex64> {
        let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
        let (up, _) = interpolate_mode(&self.phi, tortoise(hi, &self.params)?)?;
        let (us, _) = interpolate_mode(&self.psi, tortoise(lo, &self.params)?)?;
        Ok(up * us / (self.wronskian * (lo * hi)))
    }

    pub fn modes(&self) -> (&ModeSolution, &ModeSolution) {
        (&self.phi, &self.psi)
    }
}

/// Quintic Hermite interpolation of `u` and `du/dr*` from the stored samples,
/// using `u'' = (V − ω²) u` at the nodes.
pub fn interpolate_mode(sol: &ModeSolution, rstar: f64) -> Result<(Complex64, Complex64)> {
    let xs = &sol.grid.rstar;
    let n = xs.len();
    let (lo, hi) = (xs[0], xs[n - 1]);
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if !(rstar >= lo - slack && rstar <= hi + slack) {
        return Err(Error::Interpolation { r: rstar, lo, hi });
    }
    let k = xs.partition_point(|&x| x <= rstar).clamp(1, n - 1) - 1;
    if rstar == xs[k] {
        return Ok((sol.u[k], sol.du[k]));
    }
    let h = xs[k + 1] - xs[k];
    let t = ((rstar - xs[k]) / h).clamp(0.0, 1.0);
    let (u0, u1) = (sol.u[k], sol.u[k + 1]);
    let (d0, d1) = (sol.du[k] * h, sol.du[k + 1] * h);
    let (s0, s1) = (u0 * (sol.g_at(k) * h * h), u1 * (sol.g_at(k + 1) * h * h));
    let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
    let b = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * t3 - t4 + 0.5 * t5,
    ];
    let db = [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        1.5 * t2 - 4.0 * t3 + 2.5 * t4,
    ];
    let c = [u0, d0, s0, u1, d1, s1];
    let mut u = Complex64::new(0.0, 0.0);
    let mut du = Complex64::new(0.0, 0.0);
    for i in 0..6 {
        u += c[i] * b[i];
        du += c[i] * db[i];
    }
    Ok((u, du / h))
}

/// Builds `G` at the requested radius pairs from a solved mode pair.
pub fn green_frequency(phi: &ModeSolution, psi: &ModeSolution, pairs: &[(f64, f64)]) -> Result<FrequencyGreen> {
    let w = wronskian(phi, psi)?.value;
    let mut g = FrequencyGreen {
        omega: phi.omega,
        l: phi.l,
        params: phi.params,
        wronskian: w,
        values: Vec::with_capacity(pairs.len()),
        grid: RadialGrid { rstar: vec![], r: vec![], gap: vec![] },
        phi: phi.clone(),
        psi: psi.clone(),
    };
    let mut radii = Vec::with_capacity(2 * pairs.len());
    for &(r, rp) in pairs {
        let v = g.eval(r, rp)?;
        g.values.push(((r, rp), v));
        radii.push(r);
        radii.push(rp);
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    g.grid = RadialGrid::from_r(radii, &g.params)?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport {
    /// Probe radii `r'`.
    pub radii: Vec<f64>,
    /// Measured jump of `∂_{r*}G(·, r')` at each probe.
    pub jumps: Vec<Complex64>,
    /// `|jump + 1/r'^2| · r'^2`, worst over the probes.
    pub residual: f64,
}

/// Compares the derivative jump of `G(·, r')` at `r = r'` with `−1/r'^2`,
/// for every distinct radius in the stored pairs. One-sided derivatives are
/// taken a tortoise distance `delta` away and Richardson-extrapolated.
pub fn green_residual_check(g: &FrequencyGreen, delta: f64) -> Result<JumpReport> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let p = g.params;
    // ∂_{r*} (u/r) = u'/r − f u / r^2
    let d_over_r = |sol: &ModeSolution, rs: f64| -> Result<Complex64> {
        let r = crate::geometry::inverse_tortoise(rs, &p)?;
        let (u, du) = interpolate_mode(sol, rs)?;
        let f = 1.0 - 2.0 * p.big_m / r;
        Ok(du / r - u * (f / (r * r)))
    };
    let jump_at = |rp: f64, d: f64| -> Result<Complex64> {
        let sp = tortoise(rp, &p)?;
        let (u_phi, _) = interpolate_mode(&g.phi, sp)?;
        let (u_psi, _) = interpolate_mode(&g.psi, sp)?;
        let above = d_over_r(&g.phi, sp + d)? * u_psi;
        let below = d_over_r(&g.psi, sp - d)? * u_phi;
        Ok((above - below) / (g.wronskian * rp))
    };
    let mut report = JumpReport { radii: g.grid.r.clone(), jumps: Vec::new(), residual: 0.0 };
    for &rp in &g.grid.r {
        let j = jump_at(rp, 0.5 * delta)? * 2.0 - jump_at(rp, delta)?;
        report.residual = report.residual.max((j * (rp * rp) + 1.0).norm());
        report.jumps.push(j);
    }
    Ok(report)
}
