//! Gain and QBER of a symmetric MDI link with threshold detectors, dark
//! counts and polarisation misalignment.
//!
//! Each coincidence probability has the form
//! `2 e^{-g/2} (1-Y0)^2 [I0(x1) + (1-Y0)^2 e^{-g/2} - (1-Y0) e^{-c1} I0(x2) - (1-Y0) e^{-c2} I0(x3)]`
//! with `c1 + c2 = g/2`. The bracket is a difference of order-one terms that
//! nearly cancel at long distance, so it is rewritten in terms of
//! `I0(x) - 1` and `expm1`, using `(1 + m1)(1 + m2) = 1 + m0` to remove the
//! remaining first-order cancellation.

use crate::decoy::{Basis, GainQberTable};
use crate::error::{invalid, Result};
use crate::overlap::{IntensityProtocol, Setting};
use crate::photon::Intensity;
use crate::special::bessel_i0_minus_one;

/// Link and detector parameters. `distance_km` is the per-arm distance from
/// each sender to the relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub eta_d: f64,
    pub alpha_db_per_km: f64,
    pub distance_km: f64,
    pub y0: f64,
    pub e_d: f64,
    pub f_ec: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            eta_d: 0.53,
            alpha_db_per_km: 0.2,
            distance_km: 0.0,
            y0: 4e-8,
            e_d: 0.0108,
            f_ec: 1.16,
        }
    }
}

impl ChannelParams {
    pub fn validated(self) -> Result<Self> {
        for (field, p) in [("eta_d", self.eta_d), ("y0", self.y0), ("e_d", self.e_d)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(field, format!("probability {p} is outside [0, 1]")));
            }
        }
        if !(self.alpha_db_per_km.is_finite() && self.alpha_db_per_km >= 0.0) {
            return Err(invalid(
                "alpha_db_per_km",
                format!("{} must be nonnegative", self.alpha_db_per_km),
            ));
        }
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(invalid(
                "distance_km",
                format!("{} must be nonnegative", self.distance_km),
            ));
        }
        if !(self.f_ec >= 1.0) {
            return Err(invalid("f_ec", format!("{} must be at least 1", self.f_ec)));
        }
        Ok(self)
    }

    pub fn at_distance(self, distance_km: f64) -> Self {
        Self {
            distance_km,
            ..self
        }
    }

    /// Per-arm transmittance including detector efficiency.
    pub fn transmittance(&self) -> f64 {
        self.eta_d * 10f64.powf(-self.alpha_db_per_km * self.distance_km / 10.0)
    }
}

/// Gain and QBER for one intensity pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain {
    pub gain: f64,
    pub qber: f64,
    /// Set when no coincidences are possible; the QBER is then reported as
    /// 1/2.
    pub degenerate: bool,
}

fn j(x: f64) -> Result<f64> {
    bessel_i0_minus_one(x)
}

/// Gain and QBER for settings `a` (Alice) and `b` (Bob).
pub fn gain_qber(a: Intensity, b: Intensity, ch: &ChannelParams) -> Result<ChannelGain> {
    let eta = ch.transmittance();
    let ga2 = a.value() * eta;
    let gb2 = b.value() * eta;
    let beta = (ga2 * gb2).sqrt();
    let gamma = ga2 + gb2;
    let ed = ch.e_d;
    let lambda = beta * (ed * (1.0 - ed)).sqrt();
    let zeta = ga2 + ed * (gb2 - ga2);

    let y0 = ch.y0;
    let y = 1.0 - y0;
    let m0 = (-0.5 * gamma).exp_m1();

    // HH coincidences
    let m1 = (-0.5 * gamma * (1.0 - ed)).exp_m1();
    let m2 = (-0.5 * gamma * ed).exp_m1();
    let base_hh = y0 * y0 + y * (m1 * m2 - y0 * m0);
    let side_hh = y * (j(ed * beta)? * (1.0 + m1) + j((1.0 - ed) * beta)? * (1.0 + m2));
    let hh_plus = (base_hh + j(beta)? - side_hh).max(0.0);
    let hh_minus = (base_hh + j((1.0 - 2.0 * ed) * beta)? - side_hh).max(0.0);

    // HV coincidences
    let ma = (-0.5 * zeta).exp_m1();
    let mb = (-0.5 * (gamma - zeta)).exp_m1();
    let base_hv = y0 * y0 + y * (ma * mb - y0 * m0);
    let side_hv = y * j(lambda)? * (2.0 + ma + mb);
    let hv_plus = (base_hv + j(2.0 * lambda)? - side_hv).max(0.0);
    let hv_minus = (base_hv - side_hv).max(0.0);

    let pre = 2.0 * (-0.5 * gamma).exp() * y * y;
    let q_hh = pre * (hh_plus + hh_minus);
    let q_hv = pre * (hv_plus + hv_minus);
    let total = q_hh + q_hv;
    if total < 1e-300 {
        return Ok(ChannelGain {
            gain: 0.0,
            qber: 0.5,
            degenerate: true,
        });
    }
    Ok(ChannelGain {
        gain: (0.5 * total).clamp(0.0, 1.0),
        qber: (q_hh / total).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Z- and X-basis tables for every intensity pair. The X basis uses the same
/// coincidence model as the Z basis.
pub fn gain_qber_tables(
    protocol: &IntensityProtocol,
    ch: &ChannelParams,
) -> Result<(GainQberTable, GainQberTable)> {
    let mut gain = [[0.0; 3]; 3];
    let mut qber = [[0.0; 3]; 3];
    for sa in Setting::ALL {
        for sb in Setting::ALL {
            let g = gain_qber(protocol.intensity(sa), protocol.intensity(sb), ch)?;
            gain[sa.index()][sb.index()] = g.gain;
            qber[sa.index()][sb.index()] = g.qber;
        }
    }
    Ok((
        GainQberTable::new(Basis::Z, gain, qber)?,
        GainQberTable::new(Basis::X, gain, qber)?,
    ))
}
