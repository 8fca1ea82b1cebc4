//! Adaptive 21-point Gauss–Kronrod quadrature for vector-valued integrands.
//!
//! All components share one set of abscissae, so a family of integrals that
//! differ only by a smooth factor costs one integrand sweep per panel.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

// Gauss weights for the odd-indexed abscissae above.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Stopping criteria for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings<T: Real> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::zero(),
            max_subdivisions: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadOutput<T: Real> {
    pub values: Vec<T>,
    pub errors: Vec<T>,
    pub panels: usize,
}

struct Panel<T: Real> {
    lo: T,
    hi: T,
    values: Vec<T>,
    errors: Vec<T>,
}

/// QUADPACK-style error rescaling: `|K − G|` overstates the Kronrod error
/// badly on smooth integrands.
fn rescale_error<T: Real>(diff: T, res_abs: T, res_asc: T) -> T {
    let mut err = diff.abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    err
}

fn gk21<T, F>(f: &mut F, lo: T, hi: T, dim: usize, fv: &mut [Vec<T>; 21]) -> Panel<T>
where
    T: Real,
    F: FnMut(T, &mut [T]),
{
    let center = (lo + hi) * T::lit(0.5);
    let half = (hi - lo) * T::lit(0.5);
    // fv[0..10] left points, fv[10] center, fv[11..21] right points
    for (k, &x) in XGK.iter().enumerate().take(10) {
        let dx = half * T::lit(x);
        f(center - dx, &mut fv[k]);
        f(center + dx, &mut fv[11 + k]);
    }
    f(center, &mut fv[10]);

    let mut values = vec![T::zero(); dim];
    let mut errors = vec![T::zero(); dim];
    for c in 0..dim {
        let fc = fv[10][c];
        let mut kron = fc * T::lit(WGK[10]);
        let mut gauss = T::zero();
        let mut res_abs = fc.abs() * T::lit(WGK[10]);
        for k in 0..10 {
            let l = fv[k][c];
            let r = fv[11 + k][c];
            kron = kron + T::lit(WGK[k]) * (l + r);
            res_abs = res_abs + T::lit(WGK[k]) * (l.abs() + r.abs());
            if k % 2 == 1 {
                gauss = gauss + T::lit(WG[k / 2]) * (l + r);
            }
        }
        let mean = kron * T::lit(0.5);
        let mut res_asc = T::lit(WGK[10]) * (fc - mean).abs();
        for k in 0..10 {
            res_asc = res_asc + T::lit(WGK[k]) * ((fv[k][c] - mean).abs() + (fv[11 + k][c] - mean).abs());
        }
        let scale = half.abs();
        values[c] = kron * half;
        errors[c] = rescale_error((kron - gauss) * half, res_abs * scale, res_asc * scale);
    }
    Panel {
        lo,
        hi,
        values,
        errors,
    }
}

/// Integrates a `dim`-component integrand over `[a, b]`, starting from the
/// panels delimited by `breakpoints` (which must lie inside `[a, b]`).
///
/// Converges when every component satisfies
/// `err ≤ max(abs_tol, rel_tol·|value|)`.
pub fn integrate_vec<T, F>(
    mut f: F,
    dim: usize,
    a: T,
    b: T,
    breakpoints: &[T],
    settings: &QuadSettings<T>,
) -> Result<QuadOutput<T>>
where
    T: Real,
    F: FnMut(T, &mut [T]),
{
    let mut fv: [Vec<T>; 21] = std::array::from_fn(|_| vec![T::zero(); dim]);
    let mut edges = vec![a];
    edges.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    edges.push(b);
    let mut panels: Vec<Panel<T>> = edges
        .windows(2)
        .map(|w| gk21(&mut f, w[0], w[1], dim, &mut fv))
        .collect();

    loop {
        let mut total = vec![T::zero(); dim];
        let mut err = vec![T::zero(); dim];
        for p in &panels {
            for c in 0..dim {
                total[c] = total[c] + p.values[c];
                err[c] = err[c] + p.errors[c];
            }
        }
        let tol: Vec<T> = total
            .iter()
            .map(|v| settings.abs_tol.max(settings.rel_tol * v.abs()))
            .collect();
        if (0..dim).all(|c| err[c] <= tol[c]) {
            return Ok(QuadOutput {
                values: total,
                errors: err,
                panels: panels.len(),
            });
        }
        let badness = |p: &Panel<T>| {
            (0..dim).fold(T::zero(), |acc, c| {
                let t = tol[c].max(T::min_positive_value());
                acc.max(p.errors[c] / t)
            })
        };
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0usize, T::neg_infinity()), |(bi, bv), (i, p)| {
                let v = badness(p);
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        if panels.len() >= settings.max_subdivisions {
            let p = &panels[worst];
            let e = p.errors.iter().fold(T::zero(), |a, b| a.max(*b));
            return Err(Error::QuadratureFailure {
                lo: p.lo.to_f64_lossy(),
                hi: p.hi.to_f64_lossy(),
                error: e.to_f64_lossy(),
            });
        }
        let p = panels.swap_remove(worst);
        let mid = (p.lo + p.hi) * T::lit(0.5);
        panels.push(gk21(&mut f, p.lo, mid, dim, &mut fv));
        panels.push(gk21(&mut f, mid, p.hi, dim, &mut fv));
    }
}

/// Scalar convenience wrapper; returns `(value, error estimate)`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, settings: &QuadSettings<T>) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let out = integrate_vec(|x, o: &mut [T]| o[0] = f(x), 1, a, b, &[], settings)?;
    Ok((out.values[0], out.errors[0]))
}

/// `∫_a^∞ f` through `x = a + (1 − t)/t`, `t ∈ (0, 1]`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: T, settings: &QuadSettings<T>) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(T) -> T,
{
    integrate(
        |t: T| {
            if t <= T::zero() {
                return T::zero();
            }
            let x = a + (T::one() - t) / t;
            let v = f(x) / (t * t);
            if v.is_finite() {
                v
            } else {
                T::zero()
            }
        },
        T::zero(),
        T::one(),
        settings,
    )
}
