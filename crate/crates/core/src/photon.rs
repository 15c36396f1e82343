//! Photon-number statistics of a phase-randomised weak coherent source whose
//! emitted intensity deviates from its setting.
//!
//! Two descriptions of the deviation are supported: a worst-case interval
//! `[a(1 - delta), a(1 + delta)]`, which yields an interval of photon-number
//! probabilities, and a truncated Gaussian density over the actual intensity,
//! which yields point probabilities.

use crate::error::{invalid, Error, Result};
use crate::overlap::CorrelationSpec;
use crate::quadrature::{integrate, Tolerance};
use crate::special::{std_normal_mass, std_normal_pdf};

/// Mean photon number of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Intensity(f64);

impl Intensity {
    pub const ZERO: Intensity = Intensity(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(invalid(
                "intensity",
                format!("{value} is not a finite nonnegative number"),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Closed range of admissible actual intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityInterval {
    lo: f64,
    hi: f64,
}

impl IntensityInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(invalid(
                "intensity interval",
                format!("[{lo}, {hi}] is not 0 <= lo <= hi"),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(a: Intensity) -> Self {
        Self { lo: a.0, hi: a.0 }
    }

    /// `[a(1 - delta)^xi, a(1 + delta)^xi]`, with the lower factor clamped at
    /// zero before exponentiation. `xi = 1` gives the plain worst-case
    /// interval.
    pub fn compounded(a: Intensity, delta: f64, xi: u32) -> Self {
        let lo_factor = (1.0 - delta).max(0.0).powi(xi as i32);
        let hi_factor = (1.0 + delta).powi(xi as i32);
        Self {
            lo: a.0 * lo_factor,
            hi: a.0 * hi_factor,
        }
    }

    pub fn around(a: Intensity, delta: f64) -> Self {
        Self::compounded(a, delta, 1)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Closed interval of probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ProbabilityInterval {
    pub fn point(p: f64) -> Self {
        Self { lo: p, hi: p }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Parameters of a Gaussian with mean `gamma` and standard deviation `sigma`,
/// truncated to `(lambda_lo, lambda_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussianParams {
    pub gamma: f64,
    pub sigma: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl TruncatedGaussianParams {
    pub fn new(gamma: f64, sigma: f64, lambda_lo: f64, lambda_hi: f64) -> Result<Self> {
        let all_finite = [gamma, sigma, lambda_lo, lambda_hi]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("truncated gaussian", "parameters must be finite"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(
                "truncated gaussian",
                format!("sigma = {sigma} must be positive"),
            ));
        }
        if lambda_lo < 0.0 {
            return Err(invalid(
                "truncated gaussian",
                format!("lower truncation {lambda_lo} is negative"),
            ));
        }
        if !(lambda_lo < lambda_hi) {
            return Err(invalid(
                "truncated gaussian",
                format!("support ({lambda_lo}, {lambda_hi}) is empty"),
            ));
        }
        Ok(Self {
            gamma,
            sigma,
            lambda_lo,
            lambda_hi,
        })
    }

    /// Gaussian centred on the setting with `sigma = delta * a / k_sigma`,
    /// truncated to `a(1 +- delta)` (lower end clamped at zero). Returns `None`
    /// when the distribution would be degenerate (`a = 0` or `delta = 0`).
    pub fn scaled_to_deviation(a: Intensity, delta: f64, k_sigma: f64) -> Option<Self> {
        let a = a.value();
        if a == 0.0 || delta <= 0.0 {
            return None;
        }
        Self::new(
            a,
            delta * a / k_sigma,
            (a * (1.0 - delta)).max(0.0),
            a * (1.0 + delta),
        )
        .ok()
    }

    fn standardized_support(&self) -> (f64, f64) {
        (
            (self.lambda_lo - self.gamma) / self.sigma,
            (self.lambda_hi - self.gamma) / self.sigma,
        )
    }

    /// `Phi(Lambda) - Phi(lambda)`.
    pub fn normalisation(&self) -> Result<f64> {
        let (lo, hi) = self.standardized_support();
        let mass = std_normal_mass(lo, hi);
        if mass < 1e-300 {
            return Err(Error::DegenerateTruncation { mass });
        }
        Ok(mass)
    }
}

/// Poisson tail below which photon-number sums are truncated.
pub const PHOTON_TAIL_THRESHOLD: f64 = 1e-30;

/// Poisson probability of `n` photons at mean `alpha`.
pub fn poisson_pmf(n: u32, alpha: Intensity) -> f64 {
    poisson(n, alpha.0)
}

pub(crate) fn poisson(n: u32, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if n <= 40 && alpha < 50.0 {
        let mut term = (-alpha).exp();
        for k in 1..=n {
            term *= alpha / f64::from(k);
        }
        term
    } else {
        let n = f64::from(n);
        (-alpha + n * alpha.ln() - libm::lgamma(n + 1.0)).exp()
    }
}

/// Mass of the Poisson law at `alpha` strictly above `n_max`.
pub fn poisson_tail(n_max: u32, alpha: Intensity) -> f64 {
    let alpha = alpha.0;
    if alpha == 0.0 {
        return 0.0;
    }
    if alpha >= f64::from(n_max) + 1.0 {
        let head: f64 = (0..=n_max).map(|j| poisson(j, alpha)).sum();
        return (1.0 - head).max(0.0);
    }
    // Below the mode the tail terms decrease, so summing them directly keeps
    // relative precision even when the tail is tiny.
    let mut k = n_max + 1;
    let mut term = poisson(k, alpha);
    let mut sum = 0.0;
    while term > 0.0 {
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
        term *= alpha / f64::from(k);
    }
    sum
}

/// Smallest `N` such that the Poisson tail above `N` at `alpha_hi` is below
/// [`PHOTON_TAIL_THRESHOLD`].
pub fn photon_cutoff(alpha_hi: Intensity) -> u32 {
    let mut n = 0;
    while poisson_tail(n, alpha_hi) >= PHOTON_TAIL_THRESHOLD {
        n += 1;
    }
    n
}

/// Range of `P(n | lambda)` for `lambda` in the interval. `P(n | .)` is
/// unimodal with its mode at `lambda = n`, so the minimum sits at an endpoint
/// and the maximum at the mode clamped into the interval.
pub fn poisson_range(n: u32, interval: IntensityInterval) -> ProbabilityInterval {
    let at_lo = poisson(n, interval.lo);
    let at_hi = poisson(n, interval.hi);
    let mode = f64::from(n).clamp(interval.lo, interval.hi);
    ProbabilityInterval {
        lo: at_lo.min(at_hi),
        hi: poisson(n, mode).max(at_lo).max(at_hi),
    }
}

/// Interval of the joint emission probability `p(n, m)` when Alice's and
/// Bob's actual intensities range over `a` and `b` independently.
///
/// Where every interval lies below the Poisson mode (`hi < n` for `n >= 1`)
/// this reproduces the four-case endpoint table for the worst-case model:
/// vacuum terms are extremal at the opposite end from multiphoton terms.
/// Outside that regime the per-party extremisation of [`poisson_range`] is
/// still exact.
pub fn pnm_interval(
    n: u32,
    m: u32,
    a: IntensityInterval,
    b: IntensityInterval,
) -> ProbabilityInterval {
    let pa = poisson_range(n, a);
    let pb = poisson_range(m, b);
    ProbabilityInterval {
        lo: pa.lo * pb.lo,
        hi: pa.hi * pb.hi,
    }
}

/// Truncated Gaussian density.
pub fn tg_pdf(params: &TruncatedGaussianParams, x: f64) -> Result<f64> {
    let mass = params.normalisation()?;
    if x <= params.lambda_lo || x >= params.lambda_hi {
        return Ok(0.0);
    }
    Ok(std_normal_pdf((x - params.gamma) / params.sigma) / (params.sigma * mass))
}

// Beyond |t| = 40 the standard normal density underflows to zero.
const T_CLIP: f64 = 40.0;

/// Integrates `h(alpha)` against the truncated Gaussian in the standardised
/// variable `t = (alpha - gamma) / sigma`, which keeps very narrow densities
/// well resolved.
fn tg_expectation<F: Fn(f64) -> f64>(
    params: &TruncatedGaussianParams,
    h: F,
    tol: Tolerance,
) -> Result<f64> {
    let mass = params.normalisation()?;
    let (lo, hi) = params.standardized_support();
    let (lo, hi) = (lo.max(-T_CLIP), hi.min(T_CLIP));
    let f = |t: f64| std_normal_pdf(t) * h(params.gamma + params.sigma * t);
    let (v, _) = integrate(f, lo, hi, &[0.0, -3.0, 3.0], tol);
    Ok(v / mass)
}

/// Probability of emitting `n` photons when the actual intensity follows the
/// truncated Gaussian.
pub fn tg_photon_prob(n: u32, params: &TruncatedGaussianParams) -> Result<f64> {
    tg_expectation(params, |alpha| poisson(n, alpha), Tolerance::default())
}

/// `ln(P(n | alpha) / P(n | a))` computed without forming either probability.
pub(crate) fn poisson_log_ratio(n: u32, alpha: f64, a: f64) -> f64 {
    let d = alpha - a;
    if n == 0 {
        return -d;
    }
    if alpha == 0.0 {
        return f64::NEG_INFINITY;
    }
    -d + f64::from(n) * (d / a).ln_1p()
}

/// Relative shift `(p_tg(n) - P(n | a)) / P(n | a)` of the truncated Gaussian
/// photon statistics against the uncorrelated Poisson law at the setting `a`.
///
/// The difference is integrated directly so that it keeps relative precision
/// when the density is narrow and the two laws nearly coincide.
pub fn tg_relative_shift(n: u32, params: &TruncatedGaussianParams, a: Intensity) -> Result<f64> {
    if a.0 == 0.0 {
        return Err(invalid(
            "intensity",
            "relative shift needs a nonzero reference intensity",
        ));
    }
    let tol = Tolerance {
        abs: 1e-18,
        rel: 1e-10,
        max_segments: 500,
    };
    tg_expectation(
        params,
        |alpha| poisson_log_ratio(n, alpha, a.0).exp_m1(),
        tol,
    )
}

/// Range of the actual joint emission probability `p(n, m)` for settings
/// `a`, `b` under the correlation model. The truncated Gaussian model gives a
/// point, the product of the two single-party probabilities.
pub fn pnm_actual(
    n: u32,
    m: u32,
    model: &CorrelationSpec,
    a: Intensity,
    b: Intensity,
) -> Result<ProbabilityInterval> {
    if let Some((pa, pb)) = model.tg_pair(a, b)? {
        let single = |k: u32, p: Option<&TruncatedGaussianParams>, x: Intensity| match p {
            Some(p) => tg_photon_prob(k, p),
            None => Ok(poisson_pmf(k, x)),
        };
        return Ok(ProbabilityInterval::point(
            single(n, pa, a)? * single(m, pb, b)?,
        ));
    }
    Ok(pnm_interval(
        n,
        m,
        model.interval_for(a),
        model.interval_for(b),
    ))
}
