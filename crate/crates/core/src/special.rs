//! Error function, its inverses, and exponentially scaled modified Bessel functions.
//!
//! `erf`/`erfc` come from `libm` (musl's implementation, accurate to about 1 ulp). The
//! inverses start from Giles' single-precision rational approximation and are polished
//! with Halley steps on `erfc` itself, so `erfcinv(erfc(x)) == x` to within a few ulps.

use std::f64::consts::PI;

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Giles (2010) single-precision approximation of `erfinv(y)`, where `w = -ln(1 - y^2)`
/// is passed in so that it can be formed from `1 - |y|` without cancellation.
fn erfinv_giles(y: f64, w: f64) -> f64 {
    let p = if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        1.501_409_41 + p * w
    } else {
        let w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        2.832_976_82 + p * w
    };
    p * y
}

/// Halley iteration for `f(x) = erfc(x) - q`, using `f'' = -2 x f'`.
fn polish_erfcinv(mut x: f64, q: f64) -> f64 {
    for _ in 0..4 {
        let r = erfc(x) - q;
        let d = -TWO_OVER_SQRT_PI * (-x * x).exp();
        let step = r / (d + x * r);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Inverse complementary error function on `(0, 2)`; returns `+-inf` at the ends.
pub fn erfcinv(q: f64) -> f64 {
    if q.is_nan() || !(0.0..=2.0).contains(&q) {
        return f64::NAN;
    }
    if q == 0.0 {
        return f64::INFINITY;
    }
    if q == 2.0 {
        return f64::NEG_INFINITY;
    }
    if q > 1.0 {
        return -erfcinv(2.0 - q);
    }
    let w = -(q * (2.0 - q)).ln();
    polish_erfcinv(erfinv_giles(1.0 - q, w), q)
}

/// Inverse error function on `(-1, 1)`.
pub fn erfinv(y: f64) -> f64 {
    if y.is_nan() || !(-1.0..=1.0).contains(&y) {
        return f64::NAN;
    }
    if y.abs() > 0.5 {
        return erfcinv(1.0 - y.abs()).copysign(y);
    }
    if y == 0.0 {
        return 0.0;
    }
    let w = -((1.0 - y) * (1.0 + y)).ln();
    let mut x = erfinv_giles(y, w);
    for _ in 0..4 {
        let r = erf(x) - y;
        let d = TWO_OVER_SQRT_PI * (-x * x).exp();
        let step = r / (d + x * r);
        x -= step;
        if step.abs() <= 1e-15 * x.abs() {
            break;
        }
    }
    x
}

const BESSEL_SERIES_LIMIT: f64 = 30.0;

/// `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    bessel_scaled(0, x.abs())
}

/// `e^{-x} I1(x)` for `x >= 0`; odd in `x`.
pub fn bessel_i1e(x: f64) -> f64 {
    bessel_scaled(1, x.abs()).copysign(x)
}

fn bessel_scaled(order: u32, x: f64) -> f64 {
    if x < BESSEL_SERIES_LIMIT {
        // I_n(x) = (x/2)^n sum_k (x^2/4)^k / (k! (k+n)!)
        let q = x * x / 4.0;
        let mut term = if order == 0 { 1.0 } else { x / 2.0 };
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + order as f64));
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // Hankel expansion: e^{-x} I_n(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k / x^k
        let mu = 4.0 * (order * order) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}
