//! Thin wrappers over `libm` so numeric code reads like `std` float methods.

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// `|s|^r`, with the convention `0^r = 0` for every `r > 0`.
#[inline]
pub fn abs_pow(s: f64, r: f64) -> f64 {
    let a = s.abs();
    if a == 0.0 {
        0.0
    } else if r == 2.0 {
        a * a
    } else if r == 1.0 {
        a
    } else {
        powf(a, r)
    }
}

/// `|s|^{r−2} s`, the derivative of `|s|^r / r`.
#[inline]
pub fn signed_pow(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if r == 2.0 {
        s
    } else {
        abs_pow(s, r - 1.0) * s.signum()
    }
}

/// Hölder conjugate `r / (r − 1)`.
#[inline]
pub fn conjugate_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|x| ln(*x)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|y| ln(*y)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
