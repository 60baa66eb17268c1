//! Adaptive embedded Runge–Kutta–Fehlberg 7(8) for small complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const STAGES: usize = 13;

const C: [f64; STAGES] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    0.5,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

const A: [[f64; 12]; STAGES] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [
        -91.0 / 108.0,
        0.0,
        0.0,
        23.0 / 108.0,
        -976.0 / 135.0,
        311.0 / 54.0,
        -19.0 / 60.0,
        17.0 / 6.0,
        -1.0 / 12.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        2383.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -301.0 / 82.0,
        2133.0 / 4100.0,
        45.0 / 82.0,
        45.0 / 164.0,
        18.0 / 41.0,
        0.0,
        0.0,
    ],
    [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.0],
    [
        -1777.0 / 4100.0,
        0.0,
        0.0,
        -341.0 / 164.0,
        4496.0 / 1025.0,
        -289.0 / 82.0,
        2193.0 / 4100.0,
        51.0 / 82.0,
        33.0 / 164.0,
        12.0 / 41.0,
        0.0,
        1.0,
    ],
];

const B: [f64; STAGES] = [
    41.0 / 840.0,
    0.0,
    0.0,
    0.0,
    0.0,
    34.0 / 105.0,
    9.0 / 35.0,
    9.0 / 35.0,
    9.0 / 280.0,
    9.0 / 280.0,
    41.0 / 840.0,
    0.0,
    0.0,
];

/// Step-control settings. `h_init` of zero picks a step from the span.
#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl RkOptions {
    pub fn with_tol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-30, h_init: 0.0, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RkStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(x, y)` from `x0` through each of `stops` in order and
/// returns the state at every stop. Stops must be monotone away from `x0`.
pub fn integrate<const N: usize, F>(
    f: F,
    x0: f64,
    y0: [Complex64; N],
    stops: &[f64],
    opts: &RkOptions,
) -> Result<(Vec<[Complex64; N]>, RkStats)>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    let (out, stats) = drive(f, x0, y0, stops, opts, false)?;
    Ok((out.into_iter().map(|(y, _)| y).collect(), stats))
}

/// As [`integrate`] for linear systems whose solution may over- or underflow:
/// the state is rescaled to unit size whenever it leaves `[1e-100, 1e100]`, and
/// each output carries the accumulated natural log of the removed scale.
pub fn integrate_linear_scaled<const N: usize, F>(
    f: F,
    x0: f64,
    y0: [Complex64; N],
    stops: &[f64],
    opts: &RkOptions,
) -> Result<(Vec<([Complex64; N], f64)>, RkStats)>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    drive(f, x0, y0, stops, opts, true)
}

fn drive<const N: usize, F>(
    mut f: F,
    x0: f64,
    y0: [Complex64; N],
    stops: &[f64],
    opts: &RkOptions,
    renormalize: bool,
) -> Result<(Vec<([Complex64; N], f64)>, RkStats)>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    let mut log_scale = 0.0f64;
    let mut out = Vec::with_capacity(stops.len());
    let mut stats = RkStats::default();
    if stops.is_empty() {
        return Ok((out, stats));
    }
    let dir = if stops[stops.len() - 1] >= x0 { 1.0 } else { -1.0 };
    let span = (stops[stops.len() - 1] - x0).abs();
    let mut h = if opts.h_init > 0.0 { opts.h_init } else { (span / 64.0).max(1e-6) };
    h = h.min(opts.h_max);
    let mut x = x0;
    let mut y = y0;
    let mut k = [[Complex64::new(0.0, 0.0); N]; STAGES];

    for &stop in stops {
        if (stop - x) * dir < 0.0 {
            return Err(Error::Domain(format!("stop {stop} is behind the integration front {x}")));
        }
        while (stop - x) * dir > 0.0 {
            let remaining = (stop - x).abs();
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let hd = hs * dir;
            for s in 0..STAGES {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += kj[i] * (a * hd);
                        }
                    }
                }
                k[s] = f(x + C[s] * hd, &ys);
            }
            let mut y_new = y;
            let mut err_max = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..N {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..STAGES {
                    if B[s] != 0.0 {
                        acc += k[s][i] * B[s];
                    }
                }
                y_new[i] += acc * hd;
                let e = (k[0][i] + k[10][i] - k[11][i] - k[12][i]) * (41.0 / 840.0 * hd);
                err_max = err_max.max(e.norm());
                scale = scale.max(y[i].norm()).max(y_new[i].norm());
            }
            let err = err_max / (opts.atol + opts.rtol * scale);
            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { at: x });
            }
            if err <= 1.0 {
                x = if last { stop } else { x + hd };
                y = y_new;
                if renormalize {
                    let sc = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    if sc > 1e100 || (sc < 1e-100 && sc > 0.0) {
                        y.iter_mut().for_each(|v| *v /= sc);
                        log_scale += sc.ln();
                    }
                }
                stats.accepted += 1;
                if stats.accepted + stats.rejected > opts.max_steps {
                    return Err(Error::StepSizeUnderflow { at: x });
                }
                let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 4.0) };
                if !last || grow < 1.0 {
                    h = (hs * grow).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-1.0 / 8.0)).clamp(0.1, 0.9);
                if h < 1e-14 * (1.0 + x.abs()) || stats.rejected > opts.max_steps {
                    return Err(Error::StepSizeUnderflow { at: x });
                }
            }
        }
        out.push((y, log_scale));
    }
    Ok((out, stats))
}
