//! Cauchy–Schwarz transfer between reference and actual rates.
//!
//! For two conditional probabilities whose states have squared overlap at
//! least `z`, knowing one of them confines the other to
//! `[G-(y, z), G+(y, z)]`.

use crate::error::{Error, Result};
use crate::overlap::OverlapBound;

/// Inputs this far outside `[0, 1]` are treated as rounding noise.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// A probability-valued rate: yield, error probability, gain or gain × QBER.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BoundedRate(f64);

impl BoundedRate {
    pub const ZERO: BoundedRate = BoundedRate(0.0);
    pub const ONE: BoundedRate = BoundedRate(1.0);

    /// Accepts values in `[0, 1]`; values within [`CLAMP_TOLERANCE`] outside
    /// are clamped with a warning.
    pub fn new(value: f64) -> Result<Self> {
        Self::checked(value, "rate")
    }

    pub fn checked(value: f64, what: &'static str) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            return Ok(Self(value));
        }
        if (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
            log::warn!("clamping {what} = {value:e} into [0, 1]");
            return Ok(Self(value.clamp(0.0, 1.0)));
        }
        Err(Error::OutOfUnitRange { what, value })
    }

    /// Clamps any finite value into `[0, 1]` without a warning, for results
    /// whose clamping is part of their definition.
    pub(crate) fn saturating(value: f64) -> Self {
        Self(if value.is_nan() {
            0.0
        } else {
            value.clamp(0.0, 1.0)
        })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Lower,
    Upper,
}

/// `g±(y, z) = y + (1 - z)(1 - 2y) ± 2 sqrt(z (1 - z) y (1 - y))`.
pub fn g_pm(y: BoundedRate, z: f64, sign: Sign) -> f64 {
    let y = y.0;
    let z = z.clamp(0.0, 1.0);
    let one_minus_z = 1.0 - z;
    let root = 2.0 * (z * one_minus_z * y * (1.0 - y)).sqrt();
    let base = y + one_minus_z * (1.0 - 2.0 * y);
    match sign {
        Sign::Plus => base + root,
        Sign::Minus => base - root,
    }
}

/// Lower transfer: `g-(y, z)` when `y > 1 - z`, else 0.
pub fn g_minus(y: BoundedRate, z: f64) -> BoundedRate {
    if y.0 > 1.0 - z {
        BoundedRate::saturating(g_pm(y, z, Sign::Minus))
    } else {
        BoundedRate::ZERO
    }
}

/// Upper transfer: `g+(y, z)` when `y < z`, else 1.
pub fn g_plus(y: BoundedRate, z: f64) -> BoundedRate {
    if y.0 < z {
        BoundedRate::saturating(g_pm(y, z, Sign::Plus))
    } else {
        BoundedRate::ONE
    }
}

/// Range of a reference rate given the corresponding actual one.
pub fn ref_interval_from_actual(
    q_act: BoundedRate,
    tau: OverlapBound,
) -> (BoundedRate, BoundedRate) {
    (g_minus(q_act, tau.tau()), g_plus(q_act, tau.tau()))
}

/// Bound on an actual rate from the reference one: the lower direction is
/// used for yields, the upper for error probabilities.
pub fn actual_bound_from_ref(
    y_ref: BoundedRate,
    tau: OverlapBound,
    direction: Direction,
) -> BoundedRate {
    match direction {
        Direction::Lower => g_minus(y_ref, tau.tau()),
        Direction::Upper => g_plus(y_ref, tau.tau()),
    }
}
