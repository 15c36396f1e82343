//! Lower bound on the squared overlap `tau` between uncorrelated (reference)
//! and correlated (actual) emission statistics.
//!
//! The overlap is the squared Bhattacharyya coefficient between the
//! reference photon-number law and the lower envelope of the actual one. Both
//! factorise over the two senders, so each party contributes a single
//! deficit `1 - sum_n sqrt(p_n q_n)` and pair coefficients are products.
//! Deficits are accumulated directly rather than as `1 - coefficient`,
//! because the key rate is sensitive to `1 - tau` down to 1e-15.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::photon::{
    photon_cutoff, poisson, poisson_log_ratio, poisson_tail, tg_relative_shift, Intensity,
    IntensityInterval, TruncatedGaussianParams,
};

/// One of the three intensity settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Setting {
    Mu,
    Nu,
    Omega,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Mu, Setting::Nu, Setting::Omega];

    pub fn index(self) -> usize {
        match self {
            Setting::Mu => 0,
            Setting::Nu => 1,
            Setting::Omega => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Mu => "mu",
            Setting::Nu => "nu",
            Setting::Omega => "omega",
        }
    }
}

/// Probability weight given to each decoy setting in the asymptotic default
/// configuration.
pub const ASYMPTOTIC_DECOY_WEIGHT: f64 = 1e-6;

/// Decoy intensities and their selection probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityProtocol {
    pub mu: Intensity,
    pub nu: Intensity,
    pub omega: Intensity,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    pub q_z_alice: f64,
    pub q_z_bob: f64,
}

impl IntensityProtocol {
    /// Protocol with `p_mu ~ 1` and `q_Z ~ 1`; the asymptotic rate does not
    /// depend on the exact weights.
    pub fn asymptotic(mu: f64, nu: f64, omega: f64) -> Result<Self> {
        let e = ASYMPTOTIC_DECOY_WEIGHT;
        Self {
            mu: Intensity::new(mu)?,
            nu: Intensity::new(nu)?,
            omega: Intensity::new(omega)?,
            p_mu: 1.0 - 2.0 * e,
            p_nu: e,
            p_omega: e,
            q_z_alice: 1.0 - e,
            q_z_bob: 1.0 - e,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let (mu, nu, omega) = (self.mu.value(), self.nu.value(), self.omega.value());
        if !(mu > nu && nu > omega && omega >= 0.0) {
            return Err(invalid(
                "protocol",
                format!("intensities must satisfy mu > nu > omega >= 0 (mu={mu}, nu={nu}, omega={omega})"),
            ));
        }
        for (field, p) in [
            ("p_mu", self.p_mu),
            ("p_nu", self.p_nu),
            ("p_omega", self.p_omega),
            ("q_z_alice", self.q_z_alice),
            ("q_z_bob", self.q_z_bob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(field, format!("probability {p} is outside [0, 1]")));
            }
        }
        let total = self.p_mu + self.p_nu + self.p_omega;
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "p_mu",
                format!("setting probabilities sum to {total}, not 1"),
            ));
        }
        Ok(self)
    }

    pub fn intensity(&self, s: Setting) -> Intensity {
        match s {
            Setting::Mu => self.mu,
            Setting::Nu => self.nu,
            Setting::Omega => self.omega,
        }
    }

    pub fn probability(&self, s: Setting) -> f64 {
        match s {
            Setting::Mu => self.p_mu,
            Setting::Nu => self.p_nu,
            Setting::Omega => self.p_omega,
        }
    }

    pub fn setting_of(&self, a: Intensity) -> Option<Setting> {
        Setting::ALL.into_iter().find(|&s| self.intensity(s) == a)
    }
}

impl Default for IntensityProtocol {
    fn default() -> Self {
        Self::asymptotic(0.207, 0.035, 1e-4).expect("default protocol is valid")
    }
}

/// Distribution model for the actual intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Only the maximum relative deviation is known.
    WorstCaseInterval,
    /// The actual intensity follows a truncated Gaussian per setting.
    TruncatedGaussian,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::WorstCaseInterval => "worst-case",
            ModelKind::TruncatedGaussian => "truncated-gaussian",
        }
    }
}

/// How the correlation range widens the worst-case interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalRule {
    /// `a(1 +- delta)^xi`: the deviation compounds over the `xi` correlated
    /// rounds.
    Compounded,
    /// `a(1 +- delta)` regardless of `xi`.
    Fixed,
}

/// Per-record worst-case intervals. A record is the sequence of the `xi`
/// preceding settings, most recent first. Records without an entry use the
/// global interval.
pub type RecordIntervals = BTreeMap<(Setting, Vec<Setting>), IntensityInterval>;

/// Description of the intensity correlations of both senders.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpec {
    pub xi: u32,
    pub delta_max: f64,
    pub kind: ModelKind,
    pub interval_rule: IntervalRule,
    pub tg_params: Vec<(Intensity, TruncatedGaussianParams)>,
    pub record_intervals: Option<RecordIntervals>,
}

impl CorrelationSpec {
    /// No correlations: actual and reference statistics coincide.
    pub fn uncorrelated() -> Self {
        Self::worst_case(0.0, 1)
    }

    pub fn worst_case(delta_max: f64, xi: u32) -> Self {
        Self {
            xi,
            delta_max,
            kind: ModelKind::WorstCaseInterval,
            interval_rule: IntervalRule::Compounded,
            tg_params: Vec::new(),
            record_intervals: None,
        }
    }

    pub fn truncated_gaussian(
        delta_max: f64,
        xi: u32,
        tg_params: Vec<(Intensity, TruncatedGaussianParams)>,
    ) -> Self {
        Self {
            xi,
            delta_max,
            kind: ModelKind::TruncatedGaussian,
            interval_rule: IntervalRule::Fixed,
            tg_params,
            record_intervals: None,
        }
    }

    /// Truncated Gaussian model whose per-setting densities are centred on the
    /// setting with `sigma = delta * a / k_sigma` and support `a(1 +- delta)`.
    pub fn truncated_gaussian_scaled(
        protocol: &IntensityProtocol,
        delta_max: f64,
        xi: u32,
        k_sigma: f64,
    ) -> Self {
        let params = Setting::ALL
            .iter()
            .filter_map(|&s| {
                let a = protocol.intensity(s);
                TruncatedGaussianParams::scaled_to_deviation(a, delta_max, k_sigma).map(|p| (a, p))
            })
            .collect();
        Self::truncated_gaussian(delta_max, xi, params)
    }

    pub fn with_interval_rule(mut self, rule: IntervalRule) -> Self {
        self.interval_rule = rule;
        self
    }

    pub fn with_record_intervals(mut self, records: RecordIntervals) -> Self {
        self.record_intervals = Some(records);
        self
    }

    /// Checks the model against the protocol it will be used with.
    pub fn validate(&self, protocol: &IntensityProtocol) -> Result<()> {
        if !(self.delta_max.is_finite() && self.delta_max >= 0.0) {
            return Err(invalid(
                "delta_max",
                format!("{} must be finite and nonnegative", self.delta_max),
            ));
        }
        if self.xi == 0 {
            return Err(invalid("xi", "correlation range must be at least 1"));
        }
        if self.kind == ModelKind::TruncatedGaussian && self.delta_max > 0.0 {
            for s in Setting::ALL {
                let a = protocol.intensity(s);
                if a.value() == 0.0 {
                    continue;
                }
                let p = self.tg_params_for(a).ok_or_else(|| {
                    invalid(
                        "tg_params",
                        format!(
                            "no truncated Gaussian given for {} = {}",
                            s.name(),
                            a.value()
                        ),
                    )
                })?;
                let envelope = IntensityInterval::around(a, self.delta_max);
                let slack = 1e-9 * a.value();
                if p.lambda_lo < envelope.lo() - slack || p.lambda_hi > envelope.hi() + slack {
                    return Err(invalid(
                        "tg_params",
                        format!(
                            "support ({}, {}) for {} exceeds a(1 +- delta_max) = [{}, {}]",
                            p.lambda_lo,
                            p.lambda_hi,
                            s.name(),
                            envelope.lo(),
                            envelope.hi()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn tg_params_for(&self, a: Intensity) -> Option<&TruncatedGaussianParams> {
        self.tg_params.iter().find(|(x, _)| *x == a).map(|(_, p)| p)
    }

    /// Worst-case interval of the actual intensity for setting value `a`.
    pub fn interval_for(&self, a: Intensity) -> IntensityInterval {
        match self.interval_rule {
            IntervalRule::Compounded => IntensityInterval::compounded(a, self.delta_max, self.xi),
            IntervalRule::Fixed => IntensityInterval::around(a, self.delta_max),
        }
    }

    /// For the truncated Gaussian model, the densities to use for `a` and `b`
    /// (`None` on a side means the Poisson law at the setting is exact there).
    /// Returns `Ok(None)` for the worst-case model.
    #[allow(clippy::type_complexity)]
    pub(crate) fn tg_pair(
        &self,
        a: Intensity,
        b: Intensity,
    ) -> Result<
        Option<(
            Option<&TruncatedGaussianParams>,
            Option<&TruncatedGaussianParams>,
        )>,
    > {
        if self.kind != ModelKind::TruncatedGaussian {
            return Ok(None);
        }
        Ok(Some((self.tg_for_party(a)?, self.tg_for_party(b)?)))
    }

    fn tg_for_party(&self, a: Intensity) -> Result<Option<&TruncatedGaussianParams>> {
        if a.value() == 0.0 || self.delta_max == 0.0 {
            return Ok(None);
        }
        self.tg_params_for(a).map(Some).ok_or_else(|| {
            invalid(
                "tg_params",
                format!("no truncated Gaussian given for intensity {}", a.value()),
            )
        })
    }
}

/// Lower bound on the squared overlap, `0 <= tau <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OverlapBound {
    tau: f64,
}

impl OverlapBound {
    pub const ONE: OverlapBound = OverlapBound { tau: 1.0 };

    pub fn new(tau: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&tau) {
            Ok(Self { tau })
        } else {
            Err(invalid("tau", format!("{tau} is outside [0, 1]")))
        }
    }

    /// Squared coefficient for a Bhattacharyya deficit `d = 1 - coefficient`.
    pub fn from_deficit(d: f64) -> Self {
        let d = d.clamp(0.0, 1.0);
        Self {
            tau: (1.0 - d) * (1.0 - d),
        }
    }

    pub fn tau(self) -> f64 {
        self.tau
    }
}

/// The actual law entering one party's factor of the overlap.
enum ActualLaw<'a> {
    Interval(IntensityInterval),
    Gaussian(&'a TruncatedGaussianParams),
}

/// `1 - sum_n sqrt(p_n q_n)` for one party, where `q` is Poisson at `a` and
/// `p` the lower envelope of the actual law. Terms beyond the photon cutoff
/// contribute nothing to the sum.
fn party_deficit(a: Intensity, law: ActualLaw<'_>) -> Result<f64> {
    let top = match &law {
        ActualLaw::Interval(iv) => iv.hi().max(a.value()),
        ActualLaw::Gaussian(p) => p.lambda_hi.max(a.value()),
    };
    let n_max = photon_cutoff(Intensity::new(top)?);
    let mut deficit = poisson_tail(n_max, a);
    if a.value() == 0.0 {
        // only n = 0 has reference mass
        let lr = match law {
            ActualLaw::Interval(iv) => -iv.hi(),
            ActualLaw::Gaussian(p) => tg_relative_shift(0, p, a)?.ln_1p(),
        };
        return Ok(deficit - (0.5 * lr).exp_m1());
    }
    for n in 0..=n_max {
        let q = poisson(n, a.value());
        if q == 0.0 {
            continue;
        }
        let lr = match law {
            ActualLaw::Interval(iv) => poisson_log_ratio(n, iv.lo(), a.value())
                .min(poisson_log_ratio(n, iv.hi(), a.value())),
            ActualLaw::Gaussian(p) => tg_relative_shift(n, p, a)?.ln_1p(),
        };
        deficit -= q * (0.5 * lr).exp_m1();
    }
    Ok(deficit.clamp(0.0, 1.0))
}

fn model_party_deficit(
    a: Intensity,
    model: &CorrelationSpec,
    interval: IntensityInterval,
) -> Result<f64> {
    match model.kind {
        ModelKind::WorstCaseInterval => {
            if interval.lo() == a.value() && interval.hi() == a.value() {
                return Ok(0.0);
            }
            party_deficit(a, ActualLaw::Interval(interval))
        }
        ModelKind::TruncatedGaussian => match model.tg_for_party(a)? {
            Some(p) => party_deficit(a, ActualLaw::Gaussian(p)),
            None => Ok(0.0),
        },
    }
}

fn records(xi: u32) -> Vec<Vec<Setting>> {
    let mut out = vec![Vec::new()];
    for _ in 0..xi {
        out = out
            .into_iter()
            .flat_map(|r| {
                Setting::ALL.into_iter().map(move |s| {
                    let mut r = r.clone();
                    r.push(s);
                    r
                })
            })
            .collect();
    }
    out
}

/// Worst single-party deficit for setting value `a`, over every admissible
/// record when per-record intervals are configured.
fn worst_party_deficit(
    a: Intensity,
    setting: Option<Setting>,
    model: &CorrelationSpec,
) -> Result<f64> {
    let global = model.interval_for(a);
    match (&model.record_intervals, setting, model.kind) {
        (Some(map), Some(s), ModelKind::WorstCaseInterval) => {
            let mut worst: f64 = 0.0;
            for r in records(model.xi) {
                let iv = map.get(&(s, r)).copied().unwrap_or(global);
                worst = worst.max(model_party_deficit(a, model, iv)?);
            }
            Ok(worst)
        }
        _ => model_party_deficit(a, model, global),
    }
}

fn combine(da: f64, db: f64) -> f64 {
    da + db - da * db
}

/// Bhattacharyya coefficient `sum_{n,m} sqrt(p_nm^act,lower * p_nm^ref)`
/// between the reference Poisson statistics at `(a, b)` and the lower
/// envelope of the actual statistics.
pub fn bhattacharyya_lower(a: Intensity, b: Intensity, model: &CorrelationSpec) -> Result<f64> {
    Ok(1.0 - bhattacharyya_deficit(a, b, model)?)
}

/// `1 - bhattacharyya_lower`, computed without cancellation.
pub fn bhattacharyya_deficit(a: Intensity, b: Intensity, model: &CorrelationSpec) -> Result<f64> {
    let da = model_party_deficit(a, model, model.interval_for(a))?;
    let db = model_party_deficit(b, model, model.interval_for(b))?;
    Ok(combine(da, db))
}

/// Lower bound on `tau_ab`, minimised over rounds.
///
/// The sum over future settings weights the coefficient by probabilities that
/// add up to one, and the actual emission of a round cannot depend on later
/// settings, so it collapses to the coefficient itself. With per-record
/// intervals the coefficient is minimised over all `(3^xi)^2` record pairs;
/// since it factorises into positive per-party terms that is the product of
/// the per-party minima.
pub fn tau_lower(
    a: Intensity,
    b: Intensity,
    protocol: &IntensityProtocol,
    model: &CorrelationSpec,
) -> Result<OverlapBound> {
    let da = worst_party_deficit(a, protocol.setting_of(a), model)?;
    let db = worst_party_deficit(b, protocol.setting_of(b), model)?;
    Ok(OverlapBound::from_deficit(combine(da, db)))
}

/// `tau` for every ordered pair of settings, indexed `[alice][bob]`.
pub fn tau_table(
    protocol: &IntensityProtocol,
    model: &CorrelationSpec,
) -> Result<[[OverlapBound; 3]; 3]> {
    let mut deficits = [0.0; 3];
    for s in Setting::ALL {
        deficits[s.index()] = worst_party_deficit(protocol.intensity(s), Some(s), model)?;
    }
    let mut out = [[OverlapBound::ONE; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = OverlapBound::from_deficit(combine(deficits[i], deficits[j]));
        }
    }
    Ok(out)
}
