//! Asymptotic key rate, distance scans and correlation-boundary searches.

use rayon::prelude::*;

use crate::channel::{gain_qber_tables, ChannelParams};
use crate::decoy::{single_photon_bounds, SinglePhotonEstimate};
use crate::error::{invalid, Error, Result};
use crate::overlap::{
    tau_table, CorrelationSpec, IntensityProtocol, ModelKind, OverlapBound, Setting,
};
use crate::photon::pnm_actual;

/// Rates at or below this are treated as zero.
pub const POSITIVE_RATE: f64 = 1e-12;
/// Distance bracket (per arm, km) and tolerance for [`max_distance`].
pub const DISTANCE_BRACKET: (f64, f64) = (0.0, 300.0);
pub const DISTANCE_TOLERANCE: f64 = 0.05;
/// Relative tolerance of [`delta_boundary`].
pub const DELTA_TOLERANCE: f64 = 1e-3;
/// Width-to-sigma ratio used for truncated Gaussian sweeps.
pub const DEFAULT_K_SIGMA: f64 = 3.0;

const ENTROPY_TOLERANCE: f64 = 1e-9;

/// `H2(x) = -x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-ENTROPY_TOLERANCE..=1.0 + ENTROPY_TOLERANCE).contains(&x) {
        return Err(Error::EntropyDomain(x));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2)
}

/// Which term forced the rate to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroCause {
    /// The reference decoy bound was already nonpositive.
    DecoyClamp,
    /// A positive reference bound was erased by the overlap transfer.
    VacuousTau,
    /// Single-photon bounds were positive but error correction cost more.
    ErrorFloor,
}

impl ZeroCause {
    pub fn name(self) -> &'static str {
        match self {
            ZeroCause::DecoyClamp => "decoy-clamp",
            ZeroCause::VacuousTau => "vacuous-tau",
            ZeroCause::ErrorFloor => "error-floor",
        }
    }
}

/// Full breakdown of one key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateDetail {
    pub rate: f64,
    /// Bracket before clamping at zero.
    pub raw: f64,
    pub p11: f64,
    pub single_photon: SinglePhotonEstimate,
    pub phase_error: f64,
    pub gain_mu_mu: f64,
    pub qber_mu_mu: f64,
    pub zero_cause: Option<ZeroCause>,
}

/// The distance-independent part of the analysis: overlaps and the
/// single-photon emission probability.
#[derive(Debug, Clone)]
pub struct KeyRateModel {
    protocol: IntensityProtocol,
    taus: [[OverlapBound; 3]; 3],
    p11: f64,
}

impl KeyRateModel {
    pub fn new(protocol: &IntensityProtocol, model: &CorrelationSpec) -> Result<Self> {
        let protocol = protocol.validated()?;
        model.validate(&protocol)?;
        let taus = tau_table(&protocol, model)?;
        let mut sum = 0.0;
        for sa in Setting::ALL {
            for sb in Setting::ALL {
                let p = pnm_actual(1, 1, model, protocol.intensity(sa), protocol.intensity(sb))?;
                sum += protocol.probability(sa) * protocol.probability(sb) * p.lo;
            }
        }
        let p11 = protocol.q_z_alice * protocol.q_z_bob * sum;
        Ok(Self {
            protocol,
            taus,
            p11,
        })
    }

    pub fn taus(&self) -> &[[OverlapBound; 3]; 3] {
        &self.taus
    }

    pub fn p11(&self) -> f64 {
        self.p11
    }

    pub fn protocol(&self) -> &IntensityProtocol {
        &self.protocol
    }

    pub fn detail(&self, ch: &ChannelParams) -> Result<KeyRateDetail> {
        let ch = ch.validated()?;
        let (z, x) = gain_qber_tables(&self.protocol, &ch)?;
        let sp = single_photon_bounds(&z, &x, &self.taus, &self.protocol)?;
        let y11z = sp.z.y11_lower.value();
        let y11x = sp.x.y11_lower.value();
        let phase_error = if y11x > 0.0 {
            (sp.x.h11_upper.value() / y11x).clamp(0.0, 0.5)
        } else {
            0.5
        };
        let (q, e) = (z.gain[0][0], z.qber[0][0]);
        let raw = self.p11 * y11z * (1.0 - binary_entropy(phase_error)?)
            - q * ch.f_ec * binary_entropy(e)?;
        let rate = raw.max(0.0);
        let zero_cause = if rate > POSITIVE_RATE {
            None
        } else if sp.y11_ref_z.value.value() == 0.0 || sp.y11_ref_x.value.value() == 0.0 {
            Some(ZeroCause::DecoyClamp)
        } else if y11z == 0.0 || y11x == 0.0 {
            Some(ZeroCause::VacuousTau)
        } else {
            Some(ZeroCause::ErrorFloor)
        };
        Ok(KeyRateDetail {
            rate,
            raw,
            p11: self.p11,
            single_photon: sp,
            phase_error,
            gain_mu_mu: q,
            qber_mu_mu: e,
            zero_cause,
        })
    }

    pub fn rate(&self, ch: &ChannelParams) -> Result<f64> {
        Ok(self.detail(ch)?.rate)
    }

    pub fn scan(&self, ch: &ChannelParams, grid: &[f64], label: &str) -> Result<KeyRateCurve> {
        if grid.is_empty() {
            return Err(invalid("grid", "distance grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid", "distances must be strictly increasing"));
        }
        let points = grid
            .par_iter()
            .map(|&l| {
                Ok(KeyRatePoint {
                    l_km: l,
                    rate: self.rate(&ch.at_distance(l))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KeyRateCurve {
            points,
            scenario_label: label.to_string(),
        })
    }

    pub fn max_distance(&self, ch: &ChannelParams) -> Result<f64> {
        let positive =
            |l: f64| -> Result<bool> { Ok(self.rate(&ch.at_distance(l))? > POSITIVE_RATE) };
        let (mut lo, mut hi) = DISTANCE_BRACKET;
        if !positive(lo)? {
            return Ok(0.0);
        }
        if positive(hi)? {
            return Ok(hi);
        }
        while hi - lo > DISTANCE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if positive(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// One evaluated distance. `l_km` is the per-arm distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRatePoint {
    pub l_km: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateCurve {
    pub points: Vec<KeyRatePoint>,
    pub scenario_label: String,
}

impl KeyRateCurve {
    /// Largest grid distance with a positive rate.
    pub fn last_positive(&self) -> Option<f64> {
        self.points
            .iter()
            .rev()
            .find(|p| p.rate > POSITIVE_RATE)
            .map(|p| p.l_km)
    }
}

pub fn key_rate(
    protocol: &IntensityProtocol,
    model: &CorrelationSpec,
    ch: &ChannelParams,
) -> Result<f64> {
    KeyRateModel::new(protocol, model)?.rate(ch)
}

pub fn scan_distances(
    protocol: &IntensityProtocol,
    model: &CorrelationSpec,
    ch: &ChannelParams,
    grid: &[f64],
    label: &str,
) -> Result<KeyRateCurve> {
    KeyRateModel::new(protocol, model)?.scan(ch, grid, label)
}

pub fn max_distance(
    protocol: &IntensityProtocol,
    model: &CorrelationSpec,
    ch: &ChannelParams,
) -> Result<f64> {
    KeyRateModel::new(protocol, model)?.max_distance(ch)
}

/// Condition searched for by [`delta_boundary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPredicate {
    /// Positive rate at this per-arm distance.
    PositiveAt(f64),
    /// Positive rate at some distance. Rates are nonincreasing in distance,
    /// so this is checked at zero.
    PositiveAnywhere,
}

impl BoundaryPredicate {
    fn distance(self) -> f64 {
        match self {
            BoundaryPredicate::PositiveAt(l) => l,
            BoundaryPredicate::PositiveAnywhere => 0.0,
        }
    }
}

/// Correlation model with deviation `delta` for a boundary sweep. Truncated
/// Gaussians are centred on each setting with `sigma = delta a / 3` and
/// support `a(1 +- delta)`.
pub fn sweep_model(
    protocol: &IntensityProtocol,
    kind: ModelKind,
    delta: f64,
    xi: u32,
) -> CorrelationSpec {
    match kind {
        ModelKind::WorstCaseInterval => CorrelationSpec::worst_case(delta, xi),
        ModelKind::TruncatedGaussian => {
            CorrelationSpec::truncated_gaussian_scaled(protocol, delta, xi, DEFAULT_K_SIGMA)
        }
    }
}

/// Largest `delta` in `[0, 1]` for which the predicate holds, to relative
/// tolerance [`DELTA_TOLERANCE`].
pub fn delta_boundary(
    protocol: &IntensityProtocol,
    ch: &ChannelParams,
    kind: ModelKind,
    xi: u32,
    predicate: BoundaryPredicate,
) -> Result<f64> {
    let l = predicate.distance();
    let holds = |delta: f64| -> Result<bool> {
        let model = sweep_model(protocol, kind, delta, xi);
        Ok(KeyRateModel::new(protocol, &model)?.rate(&ch.at_distance(l))? > POSITIVE_RATE)
    };
    if !holds(0.0)? {
        return Err(Error::Bracket(format!(
            "no positive rate at {l} km even without correlations"
        )));
    }
    if holds(1.0)? {
        return Ok(1.0);
    }
    // decade search, then geometric bisection
    let mut hi = 1.0;
    let mut lo = 0.1;
    while !holds(lo)? {
        hi = lo;
        lo *= 0.1;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    while hi / lo - 1.0 > DELTA_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    log::debug!(
        "delta boundary for {} at {l} km: [{lo:e}, {hi:e}]",
        kind.name()
    );
    Ok(lo)
}
