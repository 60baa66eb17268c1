//! Special functions: `K₁` for complex argument, spherical Bessel functions and
//! Legendre polynomials.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind `K₁(z)` for `Re z > 0`.
///
/// Power series for `|z| < 2`; above that the Steed–Temme continued fraction,
/// which stays accurate to ~1e-14 where the plain asymptotic series cannot.
pub fn bessel_k1(z: Complex64) -> Complex64 {
    if z.norm() < 2.0 {
        k1_series(z)
    } else {
        k1_continued_fraction(z)
    }
}

fn k1_series(z: Complex64) -> Complex64 {
    let y = z * z * 0.25;
    let mut term = Complex64::new(1.0, 0.0); // (z²/4)^k / (k!(k+1)!)
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut i_sum = Complex64::new(0.0, 0.0);
    let mut p_sum = Complex64::new(0.0, 0.0);
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term *= y / (kf * (kf + 1.0));
            psi_k1 += 1.0 / kf;
            psi_k2 += 1.0 / (kf + 1.0);
        }
        i_sum += term;
        p_sum += term * (psi_k1 + psi_k2);
        if term.norm() < 1e-18 * i_sum.norm() {
            break;
        }
    }
    let i1 = z * 0.5 * i_sum;
    z.inv() + i1 * (z * 0.5).ln() - z * 0.25 * p_sum
}

fn k1_continued_fraction(x: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let mut b = (one + x) * 2.0;
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = Complex64::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..20_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -c * a / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = (b + d * a).inv();
        delh = (b * d - one) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    let h = h * a1;
    let k0 = (std::f64::consts::PI / (x * 2.0)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - h) / x
}

/// Spherical Bessel `j_l(z)` for `0 ≤ l ≤ lmax`, by Miller's downward recurrence.
pub fn spherical_j(lmax: usize, z: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); lmax + 1];
    if z.norm() == 0.0 {
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    if z.norm() < 1e-3 {
        // leading terms of z^l/(2l+1)!! (1 − z²/(2(2l+3)))
        let mut lead = Complex64::new(1.0, 0.0);
        for (l, o) in out.iter_mut().enumerate() {
            if l > 0 {
                lead *= z / (2.0 * l as f64 + 1.0);
            }
            *o = lead * (1.0 - z * z / (2.0 * (2.0 * l as f64 + 3.0)));
        }
        return out;
    }
    let start = lmax + 20 + (2.0 * z.norm()) as usize + 30;
    let mut jp1 = Complex64::new(0.0, 0.0);
    let mut j = Complex64::new(1.0, 0.0);
    let mut tmp = vec![Complex64::new(0.0, 0.0); start + 1];
    for l in (0..=start).rev() {
        tmp[l] = j;
        let jm1 = j * ((2 * l + 1) as f64) / z - jp1;
        jp1 = j;
        j = jm1;
        let n = jp1.norm();
        if n > 1e150 {
            let s = 1e-150;
            j *= s;
            jp1 *= s;
            for t in tmp.iter_mut().skip(l) {
                *t *= s;
            }
        }
    }
    let j0 = z.sin() / z;
    let j1 = z.sin() / (z * z) - z.cos() / z;
    // normalize against whichever of j0, j1 is larger to avoid dividing by a zero
    let scale = if j0.norm() >= j1.norm() || lmax == 0 && tmp.len() < 2 { j0 / tmp[0] } else { j1 / tmp[1] };
    for l in 0..=lmax {
        out[l] = tmp[l] * scale;
    }
    out
}

/// Spherical Hankel `h_l^{(1)}(z)` for `0 ≤ l ≤ lmax`, by upward recurrence.
pub fn spherical_h1(lmax: usize, z: Complex64) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let e = (i * z).exp();
    let mut out = Vec::with_capacity(lmax + 1);
    let h0 = -i * e / z;
    out.push(h0);
    if lmax >= 1 {
        out.push(-e * (z + i) / (z * z));
    }
    for l in 2..=lmax {
        let next = out[l - 1] * ((2 * l - 1) as f64) / z - out[l - 2];
        out.push(next);
    }
    out
}

/// Legendre polynomials `P_0(x) … P_lmax(x)`.
pub fn legendre_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax >= 1 {
        p.push(x);
    }
    for l in 2..=lmax {
        let lf = l as f64;
        let v = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(v);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K₁(z) = ∫₀^∞ e^{−z cosh t} cosh t dt`, trapezoid rule.
    fn k1_oracle(z: Complex64) -> Complex64 {
        let h = 0.005;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut t: f64 = 0.0;
        loop {
            let w = if t == 0.0 { 0.5 } else { 1.0 };
            let v = (-z * t.cosh()).exp() * t.cosh();
            acc += v * w;
            if z.re * t.cosh() > 750.0 {
                break;
            }
            t += h;
        }
        acc * h
    }

    #[test]
    fn k1_real_reference_values() {
        // K₁(1), K₁(2), K₁(5) to 15 digits
        let cases = [(1.0, 0.601_907_230_197_234_6), (2.0, 0.139_865_881_816_522_4), (5.0, 0.004_044_613_445_452_164)];
        for (x, want) in cases {
            let v = bessel_k1(Complex64::new(x, 0.0));
            assert!((v.re - want).abs() < 1e-13 * want, "{x}: {v}");
        }
    }

    #[test]
    fn k1_matches_integral_representation() {
        let pts = [
            Complex64::new(0.3, 0.2),
            Complex64::new(1.9, -0.5),
            Complex64::new(2.1, 0.4),
            Complex64::new(0.5, 3.0),
            Complex64::new(4.0, -6.0),
            Complex64::new(12.0, 1.0),
            Complex64::new(30.0, -2.0),
            Complex64::new(0.2, -8.0),
        ];
        for z in pts {
            let a = bessel_k1(z);
            let b = k1_oracle(z);
            assert!((a - b).norm() < 1e-12 * b.norm(), "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn k1_continuous_across_crossover() {
        for k in 0..16 {
            let phase = -1.4 + 0.18 * k as f64;
            let z = Complex64::from_polar(2.0, phase);
            let a = k1_series(z);
            let b = k1_continued_fraction(z);
            assert!((a - b).norm() < 1e-13 * a.norm(), "{z}");
        }
    }

    #[test]
    fn spherical_functions_match_closed_forms() {
        for &zr in &[0.3, 2.0, 17.0] {
            let z = Complex64::new(zr, 0.0);
            let j = spherical_j(3, z);
            let want2 = (3.0 / (zr * zr) - 1.0) * zr.sin() / zr - 3.0 * zr.cos() / (zr * zr);
            // the closed form itself cancels like 1/z² at small z
            assert!((j[2].re - want2).abs() < 1e-14 * (1.0 + 3.0 / (zr * zr)));
            let h = spherical_h1(3, z);
            // Im h_l = y_l; Wronskian j_l y_{l+1} − j_{l+1} y_l = −1/z²
            for l in 0..3 {
                let w = j[l].re * h[l + 1].im - j[l + 1].re * h[l].im;
                assert!((w + 1.0 / (zr * zr)).abs() < 1e-12 / (zr * zr));
            }
        }
        let z = Complex64::new(0.0, 2.5);
        let j = spherical_j(1, z);
        assert!((j[0] - z.sin() / z).norm() < 1e-14);
    }

    #[test]
    fn spherical_j_high_order_small_argument() {
        let j = spherical_j(40, Complex64::new(1.0, 0.0));
        // j_l(1) ≈ 1/(2l+1)!!
        let mut df = 1.0;
        for k in 1..=40 {
            df *= (2 * k + 1) as f64;
        }
        assert!((j[40].re * df - 1.0).abs() < 0.02);
    }

    #[test]
    fn legendre_values() {
        let p = legendre_all(4, 0.3);
        assert!((p[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((p[3] - 0.5 * (5.0 * 0.027 - 0.9)).abs() < 1e-15);
        assert!(legendre_all(50, 1.0).iter().all(|v| (v - 1.0).abs() < 1e-13));
    }
}
