//! Correlation parameters from measured click-rate histograms.
//!
//! Each histogram collects the click rate of pulses sent in one setting,
//! grouped by the setting of the preceding pulse (pattern labels such as
//! `VS` or `SS`). Click rates are mapped linearly to intensities, the groups
//! sharing a current setting are pooled with their weights, and the spread of
//! a reference group without correlations is deconvolved from the pooled
//! spread.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{invalid, Error, Result};
use crate::overlap::{CorrelationSpec, IntensityProtocol, IntervalRule, Setting};
use crate::photon::{IntensityInterval, TruncatedGaussianParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ClickHistogram {
    pub pattern: String,
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
}

impl ClickHistogram {
    pub fn new(
        pattern: impl Into<String>,
        bin_centers: Vec<f64>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let pattern = pattern.into();
        if bin_centers.len() != counts.len() {
            return Err(Error::Data(format!(
                "{pattern}: {} bins but {} counts",
                bin_centers.len(),
                counts.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Data(format!("{pattern}: all counts are zero")));
        }
        if bin_centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data(format!("{pattern}: non-finite bin center")));
        }
        if bin_centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "{pattern}: bin centers must be strictly increasing"
            )));
        }
        Ok(Self {
            pattern,
            bin_centers,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let t = self.total() as f64;
        self.bin_centers
            .iter()
            .zip(&self.counts)
            .map(|(c, &n)| c * n as f64)
            .sum::<f64>()
            / t
    }
}

/// Reads histograms from delimited text with header
/// `pattern,bin_center,count`. Lines starting with `#` are ignored. Rows may
/// come in any order; repeated bin centers within a pattern are merged, so a
/// file of raw samples with count 1 is also accepted.
pub fn read_histograms<R: Read>(reader: R) -> Result<Vec<ClickHistogram>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .clone();
    let expected = ["pattern", "bin_center", "count"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!(
            "expected header `pattern,bin_center,count`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut bins: BTreeMap<String, Vec<(f64, u64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let pattern = field(0).to_string();
        if pattern.is_empty() {
            return Err(Error::Data(format!("line {line}: empty pattern")));
        }
        let center: f64 = field(1)
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad bin_center `{}`", field(1))))?;
        let count: u64 = field(2)
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad count `{}`", field(2))))?;
        if !bins.contains_key(&pattern) {
            order.push(pattern.clone());
        }
        bins.entry(pattern).or_default().push((center, count));
    }
    order
        .into_iter()
        .map(|p| {
            let mut rows = bins.remove(&p).unwrap_or_default();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut centers: Vec<f64> = Vec::with_capacity(rows.len());
            let mut counts: Vec<u64> = Vec::with_capacity(rows.len());
            for (c, n) in rows {
                if centers.last() == Some(&c) {
                    *counts.last_mut().unwrap() += n;
                } else {
                    centers.push(c);
                    counts.push(n);
                }
            }
            ClickHistogram::new(p, centers, counts)
        })
        .collect()
}

/// Weight of a group: probability of sending its pattern times the
/// probability that it was detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupWeights {
    pub w_send: f64,
    pub w_det: f64,
}

impl GroupWeights {
    pub fn new(w_send: f64, w_det: f64) -> Result<Self> {
        if !(w_send >= 0.0 && w_det >= 0.0 && w_send.is_finite() && w_det.is_finite()) {
            return Err(invalid(
                "weight",
                format!("weights must be nonnegative (got {w_send}, {w_det})"),
            ));
        }
        Ok(Self { w_send, w_det })
    }

    pub fn w(&self) -> f64 {
        self.w_send * self.w_det
    }
}

/// Weighted samples of the intensity together with their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDistribution {
    pub mean: f64,
    pub sigma: f64,
    pub support: IntensityInterval,
    /// `(intensity, weight)` pairs; weights sum to one.
    pub samples: Vec<(f64, f64)>,
}

impl IntensityDistribution {
    pub fn from_weighted(samples: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = samples.iter().map(|s| s.1).sum();
        if !(total > 0.0) {
            return Err(Error::Data("distribution has no positive weight".into()));
        }
        let samples: Vec<(f64, f64)> = samples
            .into_iter()
            .filter(|s| s.1 > 0.0)
            .map(|(x, w)| (x, w / total))
            .collect();
        let mean = samples.iter().map(|(x, w)| x * w).sum::<f64>();
        let var = samples
            .iter()
            .map(|(x, w)| w * (x - mean).powi(2))
            .sum::<f64>();
        let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = samples
            .iter()
            .map(|s| s.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let support = IntensityInterval::new(lo.max(0.0), hi.max(0.0))?;
        Ok(Self {
            mean,
            sigma: var.sqrt(),
            support,
            samples,
        })
    }
}

/// Scale that maps the reference group's mean click rate to `nominal`.
pub fn calibration_from_reference(reference: &ClickHistogram, nominal: f64) -> Result<f64> {
    let m = reference.mean();
    if !(m > 0.0) || !(nominal > 0.0) {
        return Err(Error::Data(format!(
            "{}: cannot calibrate mean click rate {m} to intensity {nominal}",
            reference.pattern
        )));
    }
    Ok(nominal / m)
}

pub fn clicks_to_intensity(h: &ClickHistogram, calibration: f64) -> Result<IntensityDistribution> {
    if !(calibration > 0.0 && calibration.is_finite()) {
        return Err(invalid(
            "calibration",
            format!("{calibration} must be positive"),
        ));
    }
    IntensityDistribution::from_weighted(
        h.bin_centers
            .iter()
            .zip(&h.counts)
            .map(|(&c, &n)| (c * calibration, n as f64))
            .collect(),
    )
}

pub fn weighted_mixture(
    dists: &[IntensityDistribution],
    weights: &[GroupWeights],
) -> Result<IntensityDistribution> {
    if dists.len() != weights.len() {
        return Err(Error::Data(format!(
            "{} distributions but {} weights",
            dists.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().map(GroupWeights::w).sum();
    if !(total > 0.0) {
        return Err(Error::Data("all group weights are zero".into()));
    }
    let samples = dists
        .iter()
        .zip(weights)
        .flat_map(|(d, w)| {
            let w = w.w() / total;
            d.samples.iter().map(move |&(x, p)| (x, p * w))
        })
        .collect();
    IntensityDistribution::from_weighted(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    /// Only one support point; sigma is zero.
    pub degenerate: bool,
}

/// Weighted maximum-likelihood normal fit.
pub fn fit_gaussian(d: &IntensityDistribution) -> GaussianFit {
    let first = d.samples.first().map(|s| s.0);
    let degenerate = d.samples.iter().all(|s| Some(s.0) == first);
    GaussianFit {
        mean: d.mean,
        sigma: if degenerate { 0.0 } else { d.sigma },
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationComponent {
    pub mean: f64,
    pub sigma: f64,
    /// The pooled spread was below the reference spread.
    pub clamped: bool,
}

/// Removes an independent fluctuation from a total distribution.
pub fn extract_correlation_component(
    total: GaussianFit,
    fluct: GaussianFit,
) -> CorrelationComponent {
    let v = total.sigma.powi(2) - fluct.sigma.powi(2);
    CorrelationComponent {
        mean: total.mean - fluct.mean,
        sigma: v.max(0.0).sqrt(),
        clamped: v < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta_max: f64,
    /// Absolute deviation range around the nominal intensity.
    pub range: (f64, f64),
    /// `None` when the component has zero spread.
    pub tg: Option<TruncatedGaussianParams>,
}

/// Deviation range `mean_c +- k sigma_c` and the matching truncated Gaussian.
pub fn delta_from_distribution(
    corr: CorrelationComponent,
    nominal: f64,
    k_sigma: f64,
) -> Result<DeltaEstimate> {
    if !(nominal > 0.0) {
        return Err(invalid("nominal", "intensity must be positive"));
    }
    if !(k_sigma > 0.0) {
        return Err(invalid("k_sigma", format!("{k_sigma} must be positive")));
    }
    let range = (
        corr.mean - k_sigma * corr.sigma,
        corr.mean + k_sigma * corr.sigma,
    );
    let delta_max = range.0.abs().max(range.1.abs()) / nominal;
    let tg = if corr.sigma > 0.0 {
        Some(TruncatedGaussianParams::new(
            nominal + corr.mean,
            corr.sigma,
            (nominal + range.0).max(0.0),
            nominal + range.1,
        )?)
    } else {
        None
    };
    Ok(DeltaEstimate {
        delta_max,
        range,
        tg,
    })
}

/// Worst-case and truncated Gaussian models for a protocol, with the measured
/// relative deviation applied to every setting.
pub fn models_from_estimate(
    protocol: &IntensityProtocol,
    est: &DeltaEstimate,
    nominal: f64,
    xi: u32,
) -> Result<(CorrelationSpec, CorrelationSpec)> {
    let wc = CorrelationSpec::worst_case(est.delta_max, xi).with_interval_rule(IntervalRule::Fixed);
    let mut params = Vec::new();
    if let Some(tg) = est.tg {
        for s in Setting::ALL {
            let a = protocol.intensity(s);
            if a.value() == 0.0 {
                continue;
            }
            let r = a.value() / nominal;
            let p = TruncatedGaussianParams::new(
                tg.gamma * r,
                tg.sigma * r,
                tg.lambda_lo * r,
                tg.lambda_hi * r,
            )?;
            params.push((a, p));
        }
    }
    let delta = if est.tg.is_some() { est.delta_max } else { 0.0 };
    Ok((wc, CorrelationSpec::truncated_gaussian(delta, xi, params)))
}

/// Group membership and weights for one pooled setting.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub groups: Vec<(String, GroupWeights)>,
    pub reference: String,
    pub reference_intensity: f64,
    pub k_sigma: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let w = |x: f64| GroupWeights {
            w_send: x,
            w_det: 1.0,
        };
        Self {
            groups: vec![
                ("VS".into(), w(0.061)),
                ("D1S".into(), w(0.253)),
                ("D2S".into(), w(0.083)),
                ("SS".into(), w(0.603)),
            ],
            reference: "SS".into(),
            reference_intensity: 0.204,
            k_sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub calibration: f64,
    pub reference_fit: GaussianFit,
    pub combined_fit: GaussianFit,
    pub component: CorrelationComponent,
    pub estimate: DeltaEstimate,
}

pub fn analyze_histograms(hists: &[ClickHistogram], cfg: &IngestConfig) -> Result<IngestReport> {
    let find = |name: &str| {
        hists
            .iter()
            .find(|h| h.pattern == name)
            .ok_or_else(|| Error::Data(format!("pattern group `{name}` is missing from the data")))
    };
    let reference = find(&cfg.reference)?;
    let calibration = calibration_from_reference(reference, cfg.reference_intensity)?;
    let reference_fit = fit_gaussian(&clicks_to_intensity(reference, calibration)?);
    let mut dists = Vec::with_capacity(cfg.groups.len());
    let mut weights = Vec::with_capacity(cfg.groups.len());
    for (name, w) in &cfg.groups {
        dists.push(clicks_to_intensity(find(name)?, calibration)?);
        weights.push(*w);
    }
    let combined_fit = fit_gaussian(&weighted_mixture(&dists, &weights)?);
    let component = extract_correlation_component(combined_fit, reference_fit);
    let estimate = delta_from_distribution(component, cfg.reference_intensity, cfg.k_sigma)?;
    Ok(IngestReport {
        calibration,
        reference_fit,
        combined_fit,
        component,
        estimate,
    })
}
