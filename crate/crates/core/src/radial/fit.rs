//! Least-squares fits of the stored modes against their asymptotic forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mode::{Boundary, ModeSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    R,
    RStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub coordinate: Coordinate,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// d(arg u)/d(coordinate); zero for decaying modes.
    pub phase_slope: f64,
    /// −d ln|u| / dr; zero for oscillatory modes.
    pub decay_rate: f64,
    /// Coefficient of `ln r` (log phase above threshold, `c` in `r^{−c}` below it).
    pub power_exponent: f64,
    pub fit_window: FitWindow,
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 16;

/// Ordinary least squares via re-orthogonalized Gram–Schmidt.
pub(crate) fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let k = cols.len();
    let n = y.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rmat = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut v = cols[j].clone();
        for i in 0..j {
            let d: f64 = q[i].iter().zip(&v).map(|(a, b)| a * b).sum();
            rmat[i][j] = d;
            v.iter_mut().zip(&q[i]).for_each(|(a, b)| *a -= d * b);
        }
        for i in 0..j {
            let d: f64 = q[i].iter().zip(&v).map(|(a, b)| a * b).sum();
            rmat[i][j] += d;
            v.iter_mut().zip(&q[i]).for_each(|(a, b)| *a -= d * b);
        }
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        rmat[j][j] = nrm;
        v.iter_mut().for_each(|a| *a /= nrm);
        q.push(v);
    }
    let qty: Vec<f64> = q.iter().map(|qi| qi.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let mut coef = vec![0.0; k];
    for j in (0..k).rev() {
        let mut acc = qty[j];
        for i in j + 1..k {
            acc -= rmat[j][i] * coef[i];
        }
        coef[j] = acc / rmat[j][j];
    }
    let mut ss = 0.0;
    for t in 0..n {
        let fit: f64 = (0..k).map(|j| coef[j] * cols[j][t]).sum();
        ss += (y[t] - fit).powi(2);
    }
    (coef, (ss / n as f64).sqrt())
}

/// Unwrapped argument of a sequence of complex samples.
pub(crate) fn unwrapped_phase(z: &[num_complex::Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut prev = 0.0;
    for (i, v) in z.iter().enumerate() {
        let mut a = v.arg();
        if i > 0 {
            let two_pi = 2.0 * std::f64::consts::PI;
            a += two_pi * ((prev - a) / two_pi).round();
        }
        out.push(a);
        prev = a;
    }
    out
}

/// Fits the mode inside `window` against its asymptotic law:
/// `arg u = q r + κ ln r + c₀ + d/r` (outgoing), `ln|u| = −b r − c ln r + c₀ + d/r`
/// (decaying), or `arg u = −ω r* + c₀` (horizon). The `1/r` column absorbs the first
/// correction of the asymptotic series, which otherwise biases the `ln r` coefficient.
pub fn fit_asymptotics(mode: &ModeSolution, window: FitWindow) -> Result<AsymptoticFit> {
    let coord = match window.coordinate {
        Coordinate::R => &mode.grid.r,
        Coordinate::RStar => &mode.grid.rstar,
    };
    let lo_c = coord[0];
    let hi_c = coord[coord.len() - 1];
    if window.lo < lo_c - 1e-9 * (1.0 + lo_c.abs()) || window.hi > hi_c + 1e-9 * (1.0 + hi_c.abs()) || !(window.hi > window.lo) {
        return Err(Error::Domain(format!("fit window [{}, {}] outside the grid [{lo_c}, {hi_c}]", window.lo, window.hi)));
    }
    let idx: Vec<usize> = (0..coord.len()).filter(|&i| coord[i] >= window.lo && coord[i] <= window.hi).collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooSmall { got: idx.len(), need: MIN_FIT_SAMPLES });
    }
    let xs: Vec<f64> = idx.iter().map(|&i| coord[i]).collect();
    let us: Vec<_> = idx.iter().map(|&i| mode.u[i]).collect();
    let ones = vec![1.0; xs.len()];
    let logs: Vec<f64> = idx.iter().map(|&i| mode.grid.r[i].ln()).collect();
    let inv: Vec<f64> = idx.iter().map(|&i| 1.0 / mode.grid.r[i]).collect();
    let mut fit = AsymptoticFit {
        phase_slope: 0.0,
        decay_rate: 0.0,
        power_exponent: 0.0,
        fit_window: window,
        residual: 0.0,
        samples: xs.len(),
    };
    match mode.boundary {
        Boundary::InfinityOutgoing => {
            let ph = unwrapped_phase(&us);
            let (c, res) = least_squares(&[xs.clone(), logs, ones, inv], &ph);
            fit.phase_slope = c[0];
            fit.power_exponent = c[1];
            fit.residual = res;
        }
        Boundary::InfinityDecaying => {
            let lm: Vec<f64> = us.iter().map(|u| u.norm().ln()).collect();
            let (c, res) = least_squares(&[xs.clone(), logs, ones, inv], &lm);
            fit.decay_rate = -c[0];
            fit.power_exponent = -c[1];
            fit.residual = res;
        }
        Boundary::HorizonRegular => {
            let ph = unwrapped_phase(&us);
            let (c, res) = least_squares(&[xs.clone(), ones], &ph);
            fit.phase_slope = c[0];
            fit.residual = res;
        }
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RadialGrid, SpacetimeParams};
    use crate::radial::mode::{integrate_mode, phi_seed, psi_seed};

    #[test]
    fn least_squares_recovers_exact_model() {
        let xs: Vec<f64> = (0..40).map(|i| 100.0 + 5.0 * i as f64).collect();
        let ls: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let y: Vec<f64> = xs.iter().zip(&ls).map(|(x, l)| 0.7 * x - 3.0 * l + 2.5).collect();
        let (c, res) = least_squares(&[xs.clone(), ls, vec![1.0; 40]], &y);
        assert!((c[0] - 0.7).abs() < 1e-10 && (c[1] + 3.0).abs() < 1e-8 && (c[2] - 2.5).abs() < 1e-7);
        assert!(res < 1e-9);
    }

    #[test]
    fn outgoing_phase_law() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let w = 2f64.sqrt();
        let grid = RadialGrid::from_r((0..=400).map(|i| 100.0 + 0.5 * i as f64).collect(), &p).unwrap();
        let grid = RadialGrid::from_rstar(grid.rstar, &p).unwrap();
        let s = phi_seed(w, 0, &p, 300.0, 12).unwrap();
        let mut g = grid.clone();
        let top = s.rstar;
        let n = g.len();
        g.rstar[n - 1] = top;
        let g = RadialGrid::from_rstar(g.rstar, &p).unwrap();
        let sol = integrate_mode(&s, &g, &p, w, 0, 1e-10).unwrap();
        let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::R, lo: 100.0, hi: 300.0 }).unwrap();
        assert!((fit.phase_slope - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.power_exponent - 3.0).abs() < 3e-3, "{fit:?}");
        assert!(fit.residual < 1e-3);
    }

    #[test]
    fn outgoing_window_helper_grid() {
        let xs: Vec<f64> = (0..50).map(|i| 1.0 + i as f64).collect();
        let ph = unwrapped_phase(&xs.iter().map(|x| num_complex::Complex64::from_polar(1.0, 2.0 * x)).collect::<Vec<_>>());
        assert!((ph[49] - ph[0] - 98.0).abs() < 1e-12);
    }

    #[test]
    fn decaying_rate_and_horizon_slope() {
        let p = SpacetimeParams::new(1.0, 1.0).unwrap();
        let grid = RadialGrid::uniform_rstar(crate::geometry::tortoise(100.0, &p).unwrap(), crate::geometry::tortoise(200.0, &p).unwrap(), 200, &p).unwrap();
        let s = phi_seed(0.5, 1, &p, 200.0, 12).unwrap();
        let sol = integrate_mode(&s, &grid, &p, 0.5, 1, 1e-10).unwrap();
        let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::R, lo: 100.0, hi: 200.0 }).unwrap();
        assert!((fit.decay_rate / 0.75f64.sqrt() - 1.0).abs() < 0.02);

        let grid = RadialGrid::uniform_rstar(-80.0, -30.0, 200, &p).unwrap();
        let s = psi_seed(0.7, 0, &p, -80.0, 12).unwrap();
        let sol = integrate_mode(&s, &grid, &p, 0.7, 0, 1e-10).unwrap();
        let fit = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::RStar, lo: -80.0, hi: -40.0 }).unwrap();
        assert!((fit.phase_slope + 0.7).abs() < 0.7e-3);
        let few = fit_asymptotics(&sol, FitWindow { coordinate: Coordinate::RStar, lo: -80.0, hi: -79.0 });
        assert!(matches!(few, Err(Error::WindowTooSmall { .. })));
    }
}
