//! Implicit Radau IIA (order 5) for the scalar Riccati equation `y' = g(x) - y^2`,
//! together with the running integral `S = ∫ y dx`.
//!
//! `y = u'/u` of a linear mode `u'' = g u`, and `S = ln u` up to a constant.
//! Being L-stable, the scheme follows the slowly varying branch of `y` with
//! steps set by the scale of `g` rather than by `|y|`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RiccatiState {
    pub y: Complex64,
    pub s: Complex64,
}

#[derive(Debug, Clone, Copy)]
pub struct RadauOptions {
    pub rtol: f64,
    pub h_init: f64,
    /// Upper bound on `|h|` relative to `1 + |x|`.
    pub h_rel_max: f64,
    pub max_steps: usize,
    /// Include `S` in the error control.
    pub track_s: bool,
}

impl RadauOptions {
    pub fn with_tol(rtol: f64) -> Self {
        Self { rtol, h_init: 0.0, h_rel_max: 0.5, max_steps: 200_000, track_s: true }
    }
}

struct Tableau {
    c: [f64; 3],
    a: [[f64; 3]; 3],
}

fn tableau() -> Tableau {
    let s6 = 6f64.sqrt();
    Tableau {
        c: [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
        a: [
            [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
            [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
            [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        ],
    }
}

/// `m x = b` by the adjugate; the Newton iteration absorbs its rounding.
fn solve3(m: [[Complex64; 3]; 3], b: [Complex64; 3]) -> Option<[Complex64; 3]> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if det.norm_sqr() == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = det.inv();
    let c10 = m[0][2] * m[2][1] - m[0][1] * m[2][2];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c12 = m[0][1] * m[2][0] - m[0][0] * m[2][1];
    let c20 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    let c21 = m[0][2] * m[1][0] - m[0][0] * m[1][2];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    Some([
        (c00 * b[0] + c10 * b[1] + c20 * b[2]) * inv,
        (c01 * b[0] + c11 * b[1] + c21 * b[2]) * inv,
        (c02 * b[0] + c12 * b[1] + c22 * b[2]) * inv,
    ])
}

/// Principal square root without the polar round trip.
fn csqrt(z: Complex64) -> Complex64 {
    let a = z.norm_sqr().sqrt();
    if a == 0.0 {
        return z;
    }
    let t = (0.5 * (a + z.re.abs())).sqrt();
    if z.re >= 0.0 {
        Complex64::new(t, 0.5 * z.im / t)
    } else {
        Complex64::new(0.5 * z.im.abs() / t, t.copysign(z.im))
    }
}

/// One Radau step; `None` when Newton fails to converge.
fn step<G: FnMut(f64) -> Complex64>(
    t: &Tableau,
    g: &mut G,
    x: f64,
    st: RiccatiState,
    h: f64,
    newton_tol: f64,
) -> Option<RiccatiState> {
    let gs = [g(x + t.c[0] * h), g(x + t.c[1] * h), g(x + t.c[2] * h)];
    let mut yv = [st.y; 3];
    // Start from the slow branch through the stage potentials when the step is stiff.
    if (h * st.y).norm_sqr() > 1.0 {
        for i in 0..3 {
            let r = csqrt(gs[i]);
            yv[i] = if (r - st.y).norm_sqr() <= (r + st.y).norm_sqr() { r } else { -r };
        }
    }
    for _ in 0..40 {
        let mut res = [Complex64::new(0.0, 0.0); 3];
        let mut jac = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                acc += (gs[j] - yv[j] * yv[j]) * t.a[i][j];
                jac[i][j] = yv[j] * (2.0 * h * t.a[i][j]);
            }
            jac[i][i] += 1.0;
            res[i] = -(yv[i] - st.y - acc * h);
        }
        let d = solve3(jac, res)?;
        let mut dn = 0.0f64;
        let mut yn = 0.0f64;
        for i in 0..3 {
            yv[i] += d[i];
            dn = dn.max(d[i].l1_norm());
            yn = yn.max(yv[i].l1_norm());
        }
        if !dn.is_finite() {
            return None;
        }
        if dn <= newton_tol * (1.0 + yn) {
            let s = st.s + (yv[0] * t.a[2][0] + yv[1] * t.a[2][1] + yv[2] * t.a[2][2]) * h;
            return Some(RiccatiState { y: yv[2], s });
        }
    }
    None
}

/// Integrates from `x0` through `stops` (monotone away from `x0`), returning
/// the state at each stop.
pub fn integrate<G: FnMut(f64) -> Complex64>(
    mut g: G,
    x0: f64,
    init: RiccatiState,
    stops: &[f64],
    opts: &RadauOptions,
) -> Result<Vec<RiccatiState>> {
    let t = tableau();
    let ntol = (1e-3 * opts.rtol).max(1e-15);
    let mut out = Vec::with_capacity(stops.len());
    if stops.is_empty() {
        return Ok(out);
    }
    let dir = if stops[stops.len() - 1] >= x0 { 1.0 } else { -1.0 };
    let span = (stops[stops.len() - 1] - x0).abs();
    let mut h = if opts.h_init > 0.0 { opts.h_init } else { (span / 32.0).max(1e-8) };
    let mut x = x0;
    let mut st = init;
    let mut steps = 0usize;
    for &stop in stops {
        if (stop - x) * dir < 0.0 {
            return Err(Error::Domain(format!("stop {stop} is behind the integration front {x}")));
        }
        while (stop - x) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepSizeUnderflow { at: x });
            }
            h = h.min(opts.h_rel_max * (1.0 + x.abs()));
            let remaining = (stop - x).abs();
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let hd = hs * dir;
            let full = step(&t, &mut g, x, st, hd, ntol);
            let half = step(&t, &mut g, x, st, 0.5 * hd, ntol)
                .and_then(|mid| step(&t, &mut g, x + 0.5 * hd, mid, 0.5 * hd, ntol));
            let (full, half) = match (full, half) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    h = hs * 0.25;
                    if h < 1e-13 * (1.0 + x.abs()) {
                        return Err(Error::StepSizeUnderflow { at: x });
                    }
                    continue;
                }
            };
            let ey = (half.y - full.y).norm() / 31.0 / (opts.rtol * (half.y.norm() + 1e-300));
            let es = if opts.track_s { (half.s - full.s).norm() / 31.0 / opts.rtol } else { 0.0 };
            let err = ey.max(es);
            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { at: x });
            }
            if err <= 1.0 {
                x = if last { stop } else { x + hd };
                st = RiccatiState {
                    y: half.y + (half.y - full.y) / 31.0,
                    s: half.s + (half.s - full.s) / 31.0,
                };
                let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 4.0) };
                if !last || grow < 1.0 {
                    h = hs * grow;
                }
            } else {
                h = hs * (0.9 * err.powf(-1.0 / 6.0)).clamp(0.1, 0.9);
                if h < 1e-13 * (1.0 + x.abs()) {
                    return Err(Error::StepSizeUnderflow { at: x });
                }
            }
        }
        out.push(st);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_keeps_fixed_point() {
        // u = e^{kx}: y = k, S = k x
        let k = Complex64::new(1.5, 0.7);
        let g = |_x: f64| k * k;
        let out = integrate(
            g,
            0.0,
            RiccatiState { y: k, s: Complex64::new(0.0, 0.0) },
            &[1.0, 5.0, 50.0],
            &RadauOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((out[2].y - k).norm() < 1e-12);
        assert!((out[2].s - k * 50.0).norm() < 1e-10);
    }

    #[test]
    fn adjugate_solve_inverts_a_complex_system() {
        let c = |a: f64, b: f64| Complex64::new(a, b);
        let m = [[c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0)], [c(3.0, 0.0), c(1.0, 1.0), c(2.0, 0.5)], [c(0.0, 1.0), c(-1.0, 0.0), c(4.0, 0.0)]];
        let x = [c(1.0, -1.0), c(0.25, 2.0), c(-3.0, 0.5)];
        let b: Vec<Complex64> = (0..3).map(|i| (0..3).map(|j| m[i][j] * x[j]).sum()).collect();
        let got = solve3(m, [b[0], b[1], b[2]]).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).norm() < 1e-14);
        }
        assert!(solve3([[c(1.0, 0.0); 3]; 3], [c(1.0, 0.0); 3]).is_none());
    }

    #[test]
    fn algebraic_square_root_matches_principal_branch() {
        for z in [Complex64::new(3.0, 4.0), Complex64::new(-3.0, 4.0), Complex64::new(-3.0, -4.0), Complex64::new(-2.0, 0.0), Complex64::new(0.0, -1e-20)] {
            assert!((csqrt(z) - z.sqrt()).norm() <= 1e-15 * z.norm().sqrt(), "{z}");
        }
    }

    #[test]
    fn tracks_growing_branch_with_large_steps() {
        // u'' = (x^2 + 1000^2) u integrated forward on its growing branch.
        let g = |x: f64| Complex64::new(1e6 + x * x, 0.0);
        let y0 = Complex64::new((1e6f64).sqrt(), 0.0);
        let out = integrate(
            g,
            0.0,
            RiccatiState { y: y0, s: Complex64::new(0.0, 0.0) },
            &[10.0],
            &RadauOptions::with_tol(1e-10),
        )
        .unwrap();
        let want = (1e6f64 + 100.0).sqrt();
        assert!((out[0].y.re - want).abs() / want < 1e-6);
    }

    #[test]
    fn matches_airy_like_ratio_against_linear_integration() {
        // y from Riccati vs u'/u from the linear equation, u'' = (1 + x) u.
        use crate::rk::{integrate as rk, RkOptions};
        let f = |x: f64, u: &[Complex64; 2]| [u[1], u[0] * (1.0 + x)];
        let u0 = [Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.2)];
        let (lin, _) = rk(f, 0.0, u0, &[3.0], &RkOptions::with_tol(1e-13)).unwrap();
        let ric = integrate(
            |x| Complex64::new(1.0 + x, 0.0),
            0.0,
            RiccatiState { y: u0[1] / u0[0], s: Complex64::new(0.0, 0.0) },
            &[3.0],
            &RadauOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((ric[0].y - lin[0][1] / lin[0][0]).norm() < 1e-9);
        assert!((ric[0].s.exp() - lin[0][0]).norm() < 1e-9 * lin[0][0].norm());
    }
}
