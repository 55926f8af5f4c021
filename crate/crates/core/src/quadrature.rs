//! Adaptive Gauss-Kronrod quadrature (G7-K15) on finite intervals, with a
//! log-substituted wrapper for integrals over `(0, inf)`.

use crate::error::{Error, Result};

// full QUADPACK digits, beyond f64, kept for reference
#[allow(clippy::excessive_precision)]
mod nodes {
    pub const XGK: [f64; 8] = [
        0.991_455_371_120_812_639_2,
        0.949_107_912_342_758_524_5,
        0.864_864_423_359_769_072_8,
        0.741_531_185_599_394_439_9,
        0.586_087_235_467_691_130_3,
        0.405_845_151_377_397_166_9,
        0.207_784_955_007_898_467_6,
        0.0,
    ];
    pub const WGK: [f64; 8] = [
        0.022_935_322_010_529_224_96,
        0.063_092_092_629_978_553_29,
        0.104_790_010_322_250_183_8,
        0.140_653_259_715_525_918_7,
        0.169_004_726_639_267_902_8,
        0.190_350_578_064_785_409_9,
        0.204_432_940_075_298_892_4,
        0.209_482_141_084_727_828_0,
    ];
    pub const WG: [f64; 4] = [
        0.129_484_966_168_869_693_3,
        0.279_705_391_489_276_667_9,
        0.381_830_050_505_118_944_9,
        0.417_959_183_673_469_387_8,
    ];
}
use nodes::{WG, WGK, XGK};

/// Integral value with the accumulated Kronrod error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);

    let fc = f(center);
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        result_kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            // odd Kronrod indices are the embedded Gauss nodes
            result_gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (
        result_kronrod * half,
        (result_kronrod - result_gauss).abs() * half,
    )
}

/// Adaptive quadrature of `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!("bad interval [{a}, {b}]")));
    }
    const MAX_PANELS: usize = 20_000;

    // Worklist of (a, b, value, err), splitting the worst panel first.
    let (v, e) = kronrod_panel(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total_err: f64 = e;

    while total_err > abs_tol && panels.len() < MAX_PANELS {
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .3
                    .partial_cmp(&y.1 .3)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty");
        let (pa, pb, _, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval too small to split further; keep its error
            panels.push((pa, pb, v, pe));
            break;
        }
        let (v1, e1) = kronrod_panel(&f, pa, mid);
        let (v2, e2) = kronrod_panel(&f, mid, pb);
        total_err = total_err - pe + e1 + e2;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }

    let value: f64 = panels.iter().map(|p| p.2).sum();
    let error: f64 = panels.iter().map(|p| p.3).sum();
    if error > abs_tol * 10.0 {
        return Err(Error::Numeric(format!(
            "quadrature did not converge: error estimate {error:e} for tolerance {abs_tol:e}"
        )));
    }
    Ok(QuadResult { value, error })
}

/// Adaptive quadrature of `f` over `(lo, hi) ⊂ (0, inf)` using the log
/// substitution `x = e^u`, which equidistributes resolution across scales.
pub fn integrate_log<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Domain(format!(
            "log-substituted interval needs 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    integrate(
        |u| {
            let x = u.exp();
            f(x) * x
        },
        lo.ln(),
        hi.ln(),
        abs_tol,
    )
}

/// Cramér-Chernoff bound on the Gamma(shape, rate) tail mass beyond `t`:
/// valid on both sides of the mean (it is the moment-generating-function
/// bound, equal to 1 at the mean).
fn gamma_tail_bound(shape: f64, rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let z = rate * t / shape;
    (shape * (z.ln() + 1.0 - z)).exp().min(1.0)
}

/// `E[f(G)]` for `G ~ Gamma(shape, rate)` by adaptive quadrature over a
/// certified window (discarded tail mass below 1e-18 per side, so bounded
/// `f` contributes nothing visible there).
pub fn gamma_expectation<F: Fn(f64) -> f64>(
    shape: f64,
    rate: f64,
    f: F,
    abs_tol: f64,
) -> Result<QuadResult> {
    use statrs::function::gamma::ln_gamma;
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "gamma expectation needs positive shape and rate, got ({shape}, {rate})"
        )));
    }
    const TAIL_EPS: f64 = 1e-18;
    let mean = shape / rate;
    let mut hi = mean + (shape.sqrt() + 1.0) / rate;
    let mut step = (shape.sqrt() + 1.0) / rate;
    while gamma_tail_bound(shape, rate, hi) > TAIL_EPS {
        hi += step;
        step *= 1.3;
    }
    let mut lo = mean;
    let mut step = (shape.sqrt() + 1.0) / rate * 0.5;
    while gamma_tail_bound(shape, rate, lo) > TAIL_EPS && lo > 1e-280 {
        lo = (lo - step).max(lo * 0.3);
        step *= 1.3;
    }
    lo = lo.max(1e-290);

    let log_norm = shape * rate.ln() - ln_gamma(shape);
    integrate_log(
        move |x| f(x) * ((shape - 1.0) * x.ln() - rate * x + log_norm).exp(),
        lo,
        hi,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    #[test]
    fn gamma_expectation_moments() {
        for &(shape, rate) in &[(1.0f64, 2.0f64), (0.5, 1.0), (40.0, 2.0), (5000.0, 2.0)] {
            let mass = gamma_expectation(shape, rate, |_| 1.0, 1e-12).unwrap();
            assert!(
                (mass.value - 1.0).abs() < 1e-10,
                "shape={shape} mass={}",
                mass.value
            );
            let mean =
                gamma_expectation(shape, rate, |x| x, 1e-12 * (shape / rate).max(1.0)).unwrap();
            assert!(
                (mean.value - shape / rate).abs() < 1e-9 * (shape / rate),
                "shape={shape} mean={}",
                mean.value
            );
        }
    }

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-13).unwrap();
        assert!((r.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand_converges() {
        let r = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        let exact = (1.0 - (10.0 * std::f64::consts::PI).cos()) / 10.0;
        assert!((r.value - exact).abs() < 1e-10);
    }

    #[test]
    fn gamma_integral_over_log_axis() {
        // int_0^inf x^4 e^{-2x} dx = Gamma(5)/2^5 = 24/32.
        for &(shape, rate) in &[(5.0f64, 2.0f64), (1.5, 0.7), (60.0, 2.0)] {
            let exact = (ln_gamma(shape) - shape * rate.ln()).exp();
            let mean = shape / rate;
            let hi = mean + 60.0 * (shape.sqrt() / rate) + 60.0;
            let r = integrate_log(
                |x| ((shape - 1.0) * x.ln() - rate * x).exp(),
                1e-12,
                hi,
                1e-12 * exact.max(1.0),
            )
            .unwrap();
            assert!(
                (r.value - exact).abs() < 1e-9 * exact,
                "shape={shape} got {} want {exact}",
                r.value
            );
        }
    }
}
