//! Special functions: the Gaussian CDF family and the modified Bessel
//! function I0.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_normal_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal CDF, evaluated through `erfc` so both tails keep full
/// relative precision.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(t)`.
pub fn std_normal_sf(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Mass of the standard normal on `[lo, hi]`, choosing the tail form that
/// avoids cancellation.
pub fn std_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo >= 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else if hi <= 0.0 {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    } else {
        1.0 - std_normal_cdf(lo) - std_normal_sf(hi)
    }
}

/// Gaussian density with mean `mean` and standard deviation `sigma`.
pub fn normal_pdf(mean: f64, sigma: f64, x: f64) -> f64 {
    std_normal_pdf((x - mean) / sigma) / sigma
}

/// Gaussian CDF with mean `mean` and standard deviation `sigma`.
pub fn normal_cdf(mean: f64, sigma: f64, x: f64) -> f64 {
    std_normal_cdf((x - mean) / sigma)
}

const BESSEL_GUARD: f64 = 700.0;

/// `I0(x) - 1`, summed from the first nonconstant term so that small
/// arguments keep full relative precision.
pub fn bessel_i0_minus_one(x: f64) -> Result<f64> {
    if !(x.abs() < BESSEL_GUARD) {
        return Err(Error::BesselOverflow(x));
    }
    let q = 0.25 * x * x;
    if q == 0.0 {
        return Ok(0.0);
    }
    let mut term = q;
    let mut sum = q;
    let mut k = 1.0_f64;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    Ok(sum)
}

/// Modified Bessel function of the first kind, order zero, by its power
/// series.
pub fn bessel_i0(x: f64) -> Result<f64> {
    bessel_i0_minus_one(x).map(|v| 1.0 + v)
}
