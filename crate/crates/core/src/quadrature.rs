//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! [`integrate`] handles smooth integrands on a finite interval.
//! [`integrate_unit_singular`] handles integrable power-law singularities at
//! both ends of `(0, 1)` by splitting each half into dyadic pieces that
//! shrink toward the endpoint; each piece is smooth on its own scale.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: estimate and absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quad {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Quad {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

const MAX_INTERVALS: usize = 4000;

/// Adaptive bisection on the interval with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quad> {
    integrate_limited(f, a, b, rel_tol, 0.0, MAX_INTERVALS)
}

/// Stops once the error estimate is below `rel_tol·|I|`, below `abs_tol`,
/// or at the roundoff floor.
pub fn integrate_limited<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<Quad> {
    let mut pieces = vec![(a, b, gk15(&f, a, b))];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2.value).sum();
        let error: f64 = pieces.iter().map(|p| p.2.error).sum();
        let floor = 100.0 * f64::EPSILON * value.abs();
        if error <= rel_tol * value.abs() || error <= abs_tol || error <= floor || error < 1e-300 {
            return Ok(Quad { value, error });
        }
        if pieces.len() >= max_intervals {
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: error,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("nonempty");
        let (lo, hi, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, gk15(&f, lo, mid)));
        pieces.push((mid, hi, gk15(&f, mid, hi)));
    }
}

/// Integral over `(0, 1)` of a function that may blow up (integrably) at
/// either endpoint. The integrand receives `(x, 1 - x)` with both
/// coordinates accurate near their own endpoint.
pub fn integrate_unit_singular<F: Fn(f64, f64) -> f64>(f: F, rel_tol: f64) -> Result<Quad> {
    integrate_unit_singular_limited(f, rel_tol, MAX_INTERVALS)
}

/// As [`integrate_unit_singular`], with at most `max_intervals` adaptive
/// subintervals per dyadic piece.
pub fn integrate_unit_singular_limited<F: Fn(f64, f64) -> f64>(
    f: F,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Quad> {
    let left = dyadic_toward_zero(|u| f(u, 1.0 - u), rel_tol, max_intervals)?;
    let right = dyadic_toward_zero(|u| f(1.0 - u, u), rel_tol, max_intervals)?;
    Ok(Quad {
        value: left.value + right.value,
        error: left.error + right.error,
    })
}

// Integrates g over (0, 1/2] as a sum over [2^-(j+1), 2^-j]. The remaining
// piece near zero is bounded by extrapolating the geometric decay of the
// last two dyadic contributions.
fn dyadic_toward_zero<G: Fn(f64) -> f64>(g: G, rel_tol: f64, max_intervals: usize) -> Result<Quad> {
    const MAX_LEVELS: usize = 1000;
    let piece_tol = rel_tol * 0.1;
    let mut total: f64 = 0.0;
    let mut err = 0.0;
    let mut prev = f64::NAN;
    let mut hi = 0.5;
    for _ in 0..MAX_LEVELS {
        let lo = hi * 0.5;
        let q = integrate_limited(&g, lo, hi, piece_tol, piece_tol * total.abs(), max_intervals)?;
        total += q.value;
        err += q.error;
        if prev.is_finite() && prev != 0.0 {
            let ratio = q.value / prev;
            if (0.0..1.0).contains(&ratio) {
                let tail = q.value * ratio / (1.0 - ratio);
                if tail.abs() <= piece_tol * total.abs() {
                    return Ok(Quad {
                        value: total + tail,
                        error: err + tail.abs(),
                    });
                }
            }
        } else if q.value == 0.0 && prev == 0.0 {
            return Ok(Quad { value: total, error: err });
        }
        prev = q.value;
        hi = lo;
    }
    Err(Error::Quadrature {
        estimate: total,
        error_estimate: err,
    })
}
