//! Adaptive propagation of seeded modes and their Wronskian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{inverse_tortoise_gap, potential_gap, tortoise, RadialGrid, SpacetimeParams};
use crate::rk::{integrate, RkOptions};

use super::seeds::{seed_phi_checked, seed_psi_checked};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    HorizonRegular,
    InfinityOutgoing,
    InfinityDecaying,
}

impl Boundary {
    pub fn at_infinity(omega: f64, m: f64) -> Self {
        if omega * omega > m * m {
            Boundary::InfinityOutgoing
        } else {
            Boundary::InfinityDecaying
        }
    }
}

/// Initial data for [`integrate_mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub rstar: f64,
    pub u: Complex64,
    pub du: Complex64,
    pub order: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub omega: f64,
    pub l: u32,
    pub params: SpacetimeParams,
    pub boundary: Boundary,
    pub grid: RadialGrid,
    pub u: Vec<Complex64>,
    pub du: Vec<Complex64>,
    pub seed_location: f64,
    pub seed_order: usize,
    pub tol: f64,
    /// Largest a-posteriori residual found on the stored samples.
    pub residual: f64,
}

impl ModeSolution {
    /// `u''/u = V − ω²` at grid index `i`.
    pub fn g_at(&self, i: usize) -> f64 {
        potential_gap(self.grid.gap[i], self.l as f64, &self.params) - self.omega * self.omega
    }

    /// Multiplies the solution by a constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut s = self.clone();
        s.u.iter_mut().for_each(|v| *v *= c);
        s.du.iter_mut().for_each(|v| *v *= c);
        s
    }
}

pub fn default_r_seed(p: &SpacetimeParams) -> f64 {
    (200.0 * p.big_m).max(100.0 / p.m)
}

pub fn default_rstar_seed(p: &SpacetimeParams) -> f64 {
    -60.0 * p.big_m
}

pub const DEFAULT_SEED_ORDER: usize = 12;

/// Grid spacing in `r*`: `0.05·min(M, 1/m)`, so the potential near its peak
/// (length scale `~M`) and the asymptotic oscillation are both resolved
/// finely enough for the residual check. Falls back to `0.05/m` when `M = 0`.
pub fn default_spacing(p: &SpacetimeParams) -> f64 {
    let scale = if p.big_m > 0.0 { p.big_m.min(1.0 / p.m) } else { 1.0 / p.m };
    0.05 * scale
}

/// Seed for the infinity solution at radius `r_seed`.
pub fn phi_seed(omega: f64, l: u32, p: &SpacetimeParams, r_seed: f64, order: usize) -> Result<Seed> {
    let s = seed_phi_checked(omega, l, p, r_seed, order)?;
    let (u, du) = s.u_du();
    Ok(Seed { rstar: tortoise(r_seed, p)?, u, du, order, boundary: Boundary::at_infinity(omega, p.m) })
}

/// Seed for the horizon solution at tortoise coordinate `rstar_seed`.
pub fn psi_seed(omega: f64, l: u32, p: &SpacetimeParams, rstar_seed: f64, order: usize) -> Result<Seed> {
    let s = seed_psi_checked(omega, l, p, rstar_seed, order)?;
    let (u, du) = s.u_du();
    Ok(Seed { rstar: rstar_seed, u, du, order, boundary: Boundary::HorizonRegular })
}

/// Propagates `seed` across `target_grid`, starting from whichever endpoint it sits on.
pub fn integrate_mode(
    seed: &Seed,
    target_grid: &RadialGrid,
    p: &SpacetimeParams,
    omega: f64,
    l: u32,
    tol: f64,
) -> Result<ModeSolution> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::Domain(format!("tolerance {tol} outside [1e-12, 1e-4]")));
    }
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::Domain("frequency must be finite and nonzero".into()));
    }
    if (omega * omega - p.m * p.m).abs() < 1e-9 {
        return Err(Error::Threshold { omega });
    }
    let n = target_grid.len();
    let first = target_grid.rstar[0];
    let last = target_grid.rstar[n - 1];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    let forward = if close(seed.rstar, first) {
        true
    } else if close(seed.rstar, last) {
        false
    } else {
        return Err(Error::Domain(format!("seed at r* = {} is not an endpoint of the grid", seed.rstar)));
    };
    let ll = l as f64;
    let w2 = omega * omega;
    let rhs = |rs: f64, y: &[Complex64; 2]| {
        let x = inverse_tortoise_gap(rs, p).unwrap_or(f64::NAN);
        let g = potential_gap(x, ll, p) - w2;
        [y[1], y[0] * g]
    };
    let stops: Vec<f64> = if forward {
        target_grid.rstar[1..].to_vec()
    } else {
        target_grid.rstar[..n - 1].iter().rev().copied().collect()
    };
    let x0 = if forward { first } else { last };
    let opts = RkOptions::with_tol(tol * 0.1);
    let (ys, _) = integrate(rhs, x0, [seed.u, seed.du], &stops, &opts)?;
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    u.push(seed.u);
    du.push(seed.du);
    for y in &ys {
        if !(y[0].norm().is_finite() && y[1].norm().is_finite()) {
            return Err(Error::StepSizeUnderflow { at: x0 });
        }
        u.push(y[0]);
        du.push(y[1]);
    }
    if !forward {
        u.reverse();
        du.reverse();
    }
    let mut sol = ModeSolution {
        omega,
        l,
        params: *p,
        boundary: seed.boundary,
        grid: target_grid.clone(),
        u,
        du,
        seed_location: seed.rstar,
        seed_order: seed.order,
        tol,
        residual: 0.0,
    };
    let (res, floor) = residual_report(&sol);
    sol.residual = res;
    let limit = 10.0 * tol + floor;
    if !(res <= limit) {
        return Err(Error::Residual { residual: res, limit });
    }
    Ok(sol)
}

/// A-posteriori residual on the stored samples from the corrected trapezoid relation
/// `u_{i+1} − u_i = h/2 (u'_i + u'_{i+1}) + h²/12 (u''_i − u''_{i+1}) + O(h⁵)`,
/// with `u'' = (V − ω²) u` taken from the equation. Returns the largest normalized
/// residual and the discretization floor `max (h κ)⁴/720` of the relation itself, with
/// `κ = max(√|V − ω²|, |V'|^{1/3})`.
pub fn residual_report(sol: &ModeSolution) -> (f64, f64) {
    let mut worst = 0.0f64;
    let mut floor = 0.0f64;
    for i in 0..sol.grid.len().saturating_sub(1) {
        let h = sol.grid.rstar[i + 1] - sol.grid.rstar[i];
        let (g0, g1) = (sol.g_at(i), sol.g_at(i + 1));
        let lhs = sol.u[i + 1] - sol.u[i];
        let rhs = (sol.du[i] + sol.du[i + 1]) * (0.5 * h) + (sol.u[i] * g0 - sol.u[i + 1] * g1) * (h * h / 12.0);
        let kappa = g0.abs().max(g1.abs()).sqrt();
        let scale = h * (sol.du[i].norm().max(sol.du[i + 1].norm()) + kappa * sol.u[i].norm().max(sol.u[i + 1].norm()));
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        // the potential's own variation scale |g'|^{1/3} enters the O(h^5) term as well
        let nu = ((g1 - g0) / h).abs().cbrt();
        let hk = (h * kappa.max(nu)).max(h.abs() * 1e-3);
        // derivative growth of an exponential-type solution bounds the O(h^5) term
        floor = floor.max(hk.powi(4) / 720.0 * (hk.exp()));
    }
    (worst, floor)
}

/// Pointwise Wronskian `u_φ u_ψ' − u_φ' u_ψ` on the common grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct WronskianReport {
    pub value: Complex64,
    pub spread: f64,
    pub points: usize,
}

pub fn wronskian(phi: &ModeSolution, psi: &ModeSolution) -> Result<WronskianReport> {
    if phi.omega != psi.omega || phi.l != psi.l || phi.params != psi.params {
        return Err(Error::Domain("modes differ in (omega, l, params)".into()));
    }
    let mut ws = Vec::new();
    let mut scale = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < phi.grid.len() && j < psi.grid.len() {
        let (a, b) = (phi.grid.rstar[i], psi.grid.rstar[j]);
        if (a - b).abs() <= 1e-12 * (1.0 + a.abs()) {
            ws.push(phi.u[i] * psi.du[j] - phi.du[i] * psi.u[j]);
            scale = scale.max(phi.u[i].norm() * psi.du[j].norm()).max(phi.du[i].norm() * psi.u[j].norm());
            i += 1;
            j += 1;
        } else if a < b {
            i += 1;
        } else {
            j += 1;
        }
    }
    if ws.is_empty() {
        return Err(Error::Domain("mode grids share no points".into()));
    }
    let n = ws.len() as f64;
    let mean = ws.iter().sum::<Complex64>() / n;
    if !(mean.norm() >= 1e-10 * scale) {
        return Err(Error::DegenerateModes { w: mean.norm(), scale });
    }
    let var = ws.iter().map(|w| (w - mean).norm_sqr()).sum::<f64>() / n;
    Ok(WronskianReport { value: mean, spread: var.sqrt() / mean.norm(), points: ws.len() })
}

/// Tortoise grids for a φ/ψ pair sharing `n` uniformly spaced points on `[a, b]`.
#[derive(Debug, Clone)]
pub struct PairGrids {
    pub phi: RadialGrid,
    pub psi: Option<RadialGrid>,
}

/// Builds grids with spacing at most `h` that share the overlap `[a, b]`.
/// The φ grid runs up to the tortoise image of `r_seed`; the ψ grid starts at
/// `rstar_seed` (omitted when `M = 0`).
pub fn pair_grids(a: f64, b: f64, h: f64, r_seed: f64, rstar_seed: f64, p: &SpacetimeParams) -> Result<PairGrids> {
    let top = tortoise(r_seed, p)?;
    if !(top > b && b > a) {
        return Err(Error::Domain(format!("overlap [{a}, {b}] must lie below the seed at r* = {top}")));
    }
    let seg = |lo: f64, hi: f64| -> Vec<f64> {
        let n = (((hi - lo) / h).ceil() as usize).max(1);
        (0..=n).map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 }).collect()
    };
    let mid = seg(a, b);
    let mut phi_pts = mid.clone();
    phi_pts.extend(seg(b, top).into_iter().skip(1));
    let phi = RadialGrid::from_rstar(phi_pts, p)?;
    let psi = if p.is_flat() {
        None
    } else {
        if !(rstar_seed < a) {
            return Err(Error::Domain(format!("horizon seed {rstar_seed} must lie below the overlap start {a}")));
        }
        let mut pts = seg(rstar_seed, a);
        pts.pop();
        pts.extend(mid);
        Some(RadialGrid::from_rstar(pts, p)?)
    };
    Ok(PairGrids { phi, psi })
}

/// Both modes of a channel solved on grids overlapping on `[a, b]`.
pub struct ModePair {
    pub phi: ModeSolution,
    pub psi: ModeSolution,
    pub wronskian: WronskianReport,
}

#[derive(Debug, Clone, Copy)]
pub struct PairConfig {
    pub r_seed: f64,
    pub rstar_seed: f64,
    pub order: usize,
    pub tol: f64,
    pub h: f64,
}

impl PairConfig {
    pub fn defaults(p: &SpacetimeParams) -> Self {
        Self { r_seed: default_r_seed(p), rstar_seed: default_rstar_seed(p), order: DEFAULT_SEED_ORDER, tol: 1e-10, h: default_spacing(p) }
    }
}

pub fn solve_pair(omega: f64, l: u32, p: &SpacetimeParams, a: f64, b: f64, cfg: &PairConfig) -> Result<ModePair> {
    let grids = pair_grids(a, b, cfg.h, cfg.r_seed, cfg.rstar_seed, p)?;
    let phi_s = phi_seed(omega, l, p, cfg.r_seed, cfg.order)?;
    let phi = integrate_mode(&phi_s, &grids.phi, p, omega, l, cfg.tol)?;
    let psi_grid = grids.psi.ok_or_else(|| Error::Domain("horizon mode needs M > 0".into()))?;
    let psi_s = psi_seed(omega, l, p, cfg.rstar_seed, cfg.order)?;
    let psi = integrate_mode(&psi_s, &psi_grid, p, omega, l, cfg.tol)?;
    let wronskian = wronskian(&phi, &psi)?;
    Ok(ModePair { phi, psi, wronskian })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_s_wave_outgoing_is_exact() {
        let p = SpacetimeParams::flat(1.0).unwrap();
        let w = 2f64.sqrt();
        let r_seed = 100.0;
        let grid = RadialGrid::uniform_rstar(5.0, r_seed, 2000, &p).unwrap();
        let s = phi_seed(w, 0, &p, r_seed, 4).unwrap();
        let tol = 1e-10;
        let sol = integrate_mode(&s, &grid, &p, w, 0, tol).unwrap();
        let q: f64 = (w * w - 1.0f64).sqrt();
        for (r, u) in grid.r.iter().zip(&sol.u) {
            let exact = Complex64::new(0.0, q * r).exp() / (Complex64::new(0.0, 1.0) * q);
            assert!((u - exact).norm() <= 100.0 * tol);
        }
    }

    #[test]
    fn flat_s_wave_decaying_is_exact() {
        let p = SpacetimeParams::flat(1.0).unwrap();
        let w: f64 = 0.6;
        let b: f64 = (1.0f64 - w * w).sqrt();
        let grid = RadialGrid::uniform_rstar(50.0, 100.0, 1000, &p).unwrap();
        let s = phi_seed(w, 0, &p, 100.0, 4).unwrap();
        let sol = integrate_mode(&s, &grid, &p, w, 0, 1e-10).unwrap();
        for (r, u) in grid.r.iter().zip(&sol.u) {
            let exact = -(-b * r).exp();
            assert!((u.re / exact - 1.0).abs() < 1e-8 && u.im.abs() < 1e-8 * exact.abs());
        }
    }

    #[test]
    fn residual_on_fine_grid_is_below_ten_tol() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let w = 2f64.sqrt();
        let tol = 1e-8;
        let cfg = PairConfig { h: 0.005, tol, ..PairConfig::defaults(&p) };
        let pair = solve_pair(w, 0, &p, 0.0, 20.0, &cfg).unwrap();
        assert!(pair.phi.residual <= 10.0 * tol, "{}", pair.phi.residual);
        assert!(pair.psi.residual <= 10.0 * tol, "{}", pair.psi.residual);
    }

    #[test]
    fn wronskian_is_constant_and_bilinear() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let pair = solve_pair(1.3, 0, &p, -10.0, 30.0, &PairConfig::defaults(&p)).unwrap();
        assert!(pair.wronskian.spread < 1e-6);
        let c1 = Complex64::new(0.3, -2.0);
        let c2 = Complex64::new(-1.5, 0.25);
        let w2 = wronskian(&pair.phi.scaled(c1), &pair.psi.scaled(c2)).unwrap();
        assert!((w2.value - pair.wronskian.value * c1 * c2).norm() < 1e-12 * w2.value.norm());
    }

    #[test]
    fn wronskian_refinement() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let cfg = PairConfig::defaults(&p);
        let a = solve_pair(1.3, 0, &p, -10.0, 30.0, &PairConfig { tol: 1e-9, ..cfg }).unwrap();
        let b = solve_pair(1.3, 0, &p, -10.0, 30.0, &PairConfig { tol: 1e-10, ..cfg }).unwrap();
        let rel = (a.wronskian.value - b.wronskian.value).norm() / b.wronskian.value.norm();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let pair = solve_pair(0.8, 1, &p, -5.0, 10.0, &PairConfig::defaults(&p)).unwrap();
        let mut fake = pair.phi.clone();
        fake.boundary = Boundary::HorizonRegular;
        assert!(matches!(wronskian(&pair.phi, &fake.scaled(Complex64::new(2.0, 1.0))), Err(Error::DegenerateModes { .. })));
    }

    #[test]
    fn conjugation_symmetry() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let cfg = PairConfig::defaults(&p);
        for &w in &[0.7, 1.6] {
            let a = solve_pair(w, 2, &p, -5.0, 15.0, &cfg).unwrap();
            let b = solve_pair(-w, 2, &p, -5.0, 15.0, &cfg).unwrap();
            for k in (0..a.psi.u.len()).step_by(50) {
                assert!((a.psi.u[k].conj() - b.psi.u[k]).norm() < 1e-8 * a.psi.u[k].norm());
            }
            // the infinity amplitude carries i^{l+1}; compare up to that fixed phase
            let ratio = b.phi.u[0] / a.phi.u[0].conj();
            for k in (0..a.phi.u.len()).step_by(50) {
                assert!((a.phi.u[k].conj() * ratio - b.phi.u[k]).norm() < 1e-8 * a.phi.u[k].norm());
            }
            assert_eq!(a.phi.boundary, b.phi.boundary);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let grid = RadialGrid::uniform_rstar(0.0, 10.0, 11, &p).unwrap();
        let s = phi_seed(1.2, 0, &p, 200.0, 4).unwrap();
        assert!(integrate_mode(&s, &grid, &p, 1.2, 0, 1e-8).is_err());
        assert!(integrate_mode(&s, &grid, &p, 1.2, 0, 1e-2).is_err());
    }
}
