//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature for vector-valued
//! complex integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_365_011,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Abscissae of the 21-point rule on `[a, b]`, in a fixed order.
pub fn nodes(a: f64, b: f64) -> [f64; 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 21];
    for j in 0..10 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x[20] = c;
    x
}

/// Applies the rule to integrand samples taken at [`nodes`]; returns the Kronrod
/// estimate and a QUADPACK-style error estimate per component.
pub fn apply_rule(a: f64, b: f64, vals: &[Vec<Complex64>]) -> (Vec<Complex64>, Vec<f64>) {
    let h = 0.5 * (b - a);
    let n = vals[20].len();
    let mut out = Vec::with_capacity(n);
    let mut errs = Vec::with_capacity(n);
    for k in 0..n {
        let fc = vals[20][k];
        let mut rk = fc * WGK[10];
        let mut rg = Complex64::new(0.0, 0.0);
        for j in 0..10 {
            let s = vals[2 * j][k] + vals[2 * j + 1][k];
            rk += s * WGK[j];
            if j % 2 == 1 {
                rg += s * WG[j / 2];
            }
        }
        let mean = rk * 0.5;
        let mut asc = WGK[10] * (fc - mean).norm();
        for j in 0..10 {
            asc += WGK[j] * ((vals[2 * j][k] - mean).norm() + (vals[2 * j + 1][k] - mean).norm());
        }
        let asc = asc * h.abs();
        let mut err = ((rk - rg) * h).norm();
        if asc != 0.0 && err != 0.0 {
            err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
        }
        out.push(rk * h);
        errs.push(err.max(50.0 * f64::EPSILON * (rk * h).norm()));
    }
    (out, errs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: Vec<f64>,
    pub evals: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Intervals narrower than this are never split further.
    pub min_width: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: Vec<f64>,
}

/// Integrates a vector-valued function over the union of `breaks` intervals.
/// Every component must satisfy `err ≤ max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F>(f: &F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    integrate_with_floors(f, breaks, opts, &[])
}

/// As [`integrate`], with an extra absolute tolerance per component
/// (missing entries count as zero).
pub fn integrate_with_floors<F>(f: &F, breaks: &[f64], opts: &QuadOptions, floors: &[f64]) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least one interval".into()));
    }
    let eval_panel = |a: f64, b: f64| -> Result<Panel> {
        let xs = nodes(a, b);
        let mut vals = Vec::with_capacity(21);
        for x in xs {
            vals.push(f(x)?);
        }
        let (value, error) = apply_rule(a, b, &vals);
        Ok(Panel { a, b, value, error })
    };
    let mut panels = Vec::new();
    for w in breaks.windows(2) {
        panels.push(eval_panel(w[0], w[1])?);
    }
    let n = panels[0].value.len();
    let mut evals = 21 * panels.len();
    loop {
        let mut total = vec![Complex64::new(0.0, 0.0); n];
        let mut terr = vec![0.0f64; n];
        for p in &panels {
            for k in 0..n {
                total[k] += p.value[k];
                terr[k] += p.error[k];
            }
        }
        let tol: Vec<f64> = total
            .iter()
            .enumerate()
            .map(|(k, v)| opts.abs_tol.max(floors.get(k).copied().unwrap_or(0.0)).max(opts.rel_tol * v.norm()))
            .collect();
        let done = (0..n).all(|k| terr[k] <= tol[k]);
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| (p.b - p.a).abs() > opts.min_width)
            .map(|(i, p)| {
                let w = (0..n).map(|k| p.error[k] / tol[k].max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
                (i, w)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        if done || worst.is_none() {
            return Ok(QuadResult { value: total, error: terr, evals, intervals: panels.len() });
        }
        if panels.len() >= opts.max_intervals {
            let k = (0..n).max_by(|&i, &j| (terr[i] / tol[i]).total_cmp(&(terr[j] / tol[j]))).unwrap_or(0);
            return Err(Error::Quadrature(format!(
                "error {:.3e} above tolerance {:.3e} after {} intervals",
                terr[k],
                tol[k],
                panels.len()
            )));
        }
        let (i, _) = worst.unwrap_or((0, 0.0));
        let p = panels.remove(i);
        let mid = 0.5 * (p.a + p.b);
        panels.insert(i, eval_panel(mid, p.b)?);
        panels.insert(i, eval_panel(p.a, mid)?);
        evals += 42;
    }
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<(Complex64, f64)>
where
    F: Fn(f64) -> Complex64,
{
    let r = integrate(&|x| Ok(vec![f(x)]), &[a, b], opts)?;
    Ok((r.value[0], r.error[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(rel: f64) -> QuadOptions {
        QuadOptions { rel_tol: rel, abs_tol: 0.0, max_intervals: 2000, min_width: 0.0 }
    }

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate_scalar(|x| Complex64::new(x.powi(20), x), 0.0, 1.0, &opts(1e-12)).unwrap();
        assert!((v.re - 1.0 / 21.0).abs() < 1e-15 && (v.im - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let (v, e) = integrate_scalar(|x| Complex64::new(0.0, 40.0 * x).exp(), 0.0, 3.0, &opts(1e-12)).unwrap();
        let want = (Complex64::new(0.0, 120.0).exp() - 1.0) / Complex64::new(0.0, 40.0);
        assert!((v - want).norm() < 1e-12 && e < 1e-11);
        let (v, _) = integrate_scalar(|x| Complex64::new(1.0 / (1e-4 + x * x), 0.0), -1.0, 1.0, &opts(1e-10)).unwrap();
        let want = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v.re - want).abs() < 1e-9 * want);
    }

    #[test]
    fn vector_components_each_meet_tolerance() {
        let f = |x: f64| Ok(vec![Complex64::new(x.exp(), 0.0), Complex64::new(1e-30 * x.cos(), 0.0)]);
        let r = integrate(&f, &[0.0, 1.0, 2.0], &opts(1e-12)).unwrap();
        assert!((r.value[0].re - (2f64.exp() - 1.0)).abs() < 1e-12 * 7.0);
        assert!((r.value[1].re - 1e-30 * 2f64.sin()).abs() < 1e-42);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let o = QuadOptions { max_intervals: 3, ..opts(1e-14) };
        let r = integrate_scalar(|x| Complex64::new((1.0 / (x + 1e-9)).sin(), 0.0), 0.0, 1.0, &o);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
