//! `key = value` configuration with `[section]` headers.
//!
//! Sections: `protocol`, `channel`, `grid`, `scenario.<label>`,
//! `boundary.<label>` and `analyze`. Anything after `#` is a comment.

use std::collections::BTreeMap;
use std::path::Path;

use mdicorr_core::ingest::{GroupWeights, IngestConfig};
use mdicorr_core::keyrate::{BoundaryPredicate, DEFAULT_K_SIGMA};
use mdicorr_core::overlap::{CorrelationSpec, IntensityProtocol, IntervalRule, ModelKind, Setting};
use mdicorr_core::photon::{Intensity, TruncatedGaussianParams};
use mdicorr_core::ChannelParams;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 150.0,
            step: 1.0,
        }
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub spec: CorrelationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCheck {
    pub label: String,
    pub kind: ModelKind,
    pub xi: u32,
    pub predicate: BoundaryPredicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub ingest: IngestConfig,
    pub xi: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: IntensityProtocol,
    pub channel: ChannelParams,
    pub grid: Grid,
    pub scenarios: Vec<Scenario>,
    pub boundaries: Vec<BoundaryCheck>,
    pub analyze: AnalyzeOptions,
}

type Entries = Vec<(String, String, usize)>;

struct Section {
    name: String,
    line: usize,
    entries: Entries,
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn number(v: &str, key: &str, line: usize) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(line, format!("`{key}` expects a number, got `{v}`")))
}

fn integer(v: &str, key: &str, line: usize) -> Result<u32> {
    v.parse::<u32>().map_err(|_| {
        err(
            line,
            format!("`{key}` expects a nonnegative integer, got `{v}`"),
        )
    })
}

fn numbers(v: &str, key: &str, line: usize) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| number(t, key, line)).collect()
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| err(line, format!("malformed section header `{s}`")))?;
            if sections.iter().any(|x| x.name == name) {
                return Err(err(line, format!("duplicate section `[{name}]`")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{s}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(line, format!("expected `key = value`, got `{s}`")));
        }
        let cur = sections.last_mut().unwrap();
        if cur.entries.iter().any(|(k, _, _)| k == key) {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        cur.entries.push((key.to_string(), value.to_string(), line));
    }
    if let Some((k, _, line)) = sections[0].entries.first() {
        return Err(err(
            *line,
            format!("key `{k}` appears before any section header"),
        ));
    }
    Ok(sections)
}

fn parse_protocol(entries: &Entries) -> Result<IntensityProtocol> {
    let mut p = IntensityProtocol::default();
    for (key, value, line) in entries {
        let x = number(value, key, *line)?;
        let int = || Intensity::new(x).map_err(|e| err(*line, e));
        match key.as_str() {
            "mu" => p.mu = int()?,
            "nu" => p.nu = int()?,
            "omega" => p.omega = int()?,
            "p_mu" => p.p_mu = x,
            "p_nu" => p.p_nu = x,
            "p_omega" => p.p_omega = x,
            "q_z_alice" => p.q_z_alice = x,
            "q_z_bob" => p.q_z_bob = x,
            _ => return Err(err(*line, format!("unknown key `{key}` in [protocol]"))),
        }
    }
    p.validated()
        .map_err(|e| CliError::Config(format!("[protocol]: {e}")))
}

fn parse_channel(entries: &Entries) -> Result<ChannelParams> {
    let mut c = ChannelParams::default();
    for (key, value, line) in entries {
        let x = number(value, key, *line)?;
        match key.as_str() {
            "eta_d" => c.eta_d = x,
            "alpha" => c.alpha_db_per_km = x,
            "y0" => c.y0 = x,
            "e_d" => c.e_d = x,
            "f_ec" => c.f_ec = x,
            _ => return Err(err(*line, format!("unknown key `{key}` in [channel]"))),
        }
    }
    c.validated()
        .map_err(|e| CliError::Config(format!("[channel]: {e}")))
}

fn parse_grid(entries: &Entries) -> Result<Grid> {
    let mut g = Grid::default();
    for (key, value, line) in entries {
        let x = number(value, key, *line)?;
        match key.as_str() {
            "start" => g.start = x,
            "stop" => g.stop = x,
            "step" => g.step = x,
            _ => return Err(err(*line, format!("unknown key `{key}` in [grid]"))),
        }
    }
    if !(g.start >= 0.0 && g.step > 0.0 && g.stop >= g.start) {
        return Err(CliError::Config(format!(
            "[grid]: need 0 <= start <= stop and step > 0 (got {}, {}, {})",
            g.start, g.stop, g.step
        )));
    }
    Ok(g)
}

fn parse_kind(v: &str, line: usize) -> Result<Option<ModelKind>> {
    match v {
        "none" => Ok(None),
        "worst-case" => Ok(Some(ModelKind::WorstCaseInterval)),
        "truncated-gaussian" => Ok(Some(ModelKind::TruncatedGaussian)),
        _ => Err(err(
            line,
            format!("unknown model `{v}` (none, worst-case, truncated-gaussian)"),
        )),
    }
}

fn parse_scenario(
    label: &str,
    header: usize,
    entries: &Entries,
    protocol: &IntensityProtocol,
) -> Result<Scenario> {
    let mut kind = Some(ModelKind::WorstCaseInterval);
    let mut delta = 0.0;
    let mut xi = 1;
    let mut rule = None;
    let mut k_sigma = DEFAULT_K_SIGMA;
    let mut explicit: Vec<(Intensity, TruncatedGaussianParams)> = Vec::new();
    for (key, value, line) in entries {
        match key.as_str() {
            "model" => kind = parse_kind(value, *line)?,
            "delta_max" => delta = number(value, key, *line)?,
            "xi" => xi = integer(value, key, *line)?,
            "k_sigma" => k_sigma = number(value, key, *line)?,
            "interval_rule" => {
                rule = Some(match value.as_str() {
                    "compounded" => IntervalRule::Compounded,
                    "fixed" => IntervalRule::Fixed,
                    _ => {
                        return Err(err(
                            *line,
                            format!("unknown interval_rule `{value}` (compounded, fixed)"),
                        ))
                    }
                })
            }
            k if k.starts_with("tg.") => {
                let setting = match &k[3..] {
                    "mu" => Setting::Mu,
                    "nu" => Setting::Nu,
                    "omega" => Setting::Omega,
                    s => return Err(err(*line, format!("unknown setting `{s}` in `{k}`"))),
                };
                let v = numbers(value, key, *line)?;
                if v.len() != 4 {
                    return Err(err(
                        *line,
                        format!("`{k}` expects `gamma sigma lower upper`"),
                    ));
                }
                let p = TruncatedGaussianParams::new(v[0], v[1], v[2], v[3])
                    .map_err(|e| err(*line, e))?;
                explicit.push((protocol.intensity(setting), p));
            }
            _ => {
                return Err(err(
                    *line,
                    format!("unknown key `{key}` in [scenario.{label}]"),
                ))
            }
        }
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(CliError::Config(format!(
            "[scenario.{label}] (line {header}): delta_max {delta} is outside [0, 1]"
        )));
    }
    let spec = match kind {
        None => CorrelationSpec::uncorrelated(),
        Some(ModelKind::WorstCaseInterval) => {
            if !explicit.is_empty() {
                return Err(CliError::Config(format!(
                    "[scenario.{label}]: tg.* keys need model = truncated-gaussian"
                )));
            }
            CorrelationSpec::worst_case(delta, xi)
        }
        Some(ModelKind::TruncatedGaussian) if explicit.is_empty() => {
            CorrelationSpec::truncated_gaussian_scaled(protocol, delta, xi, k_sigma)
        }
        Some(ModelKind::TruncatedGaussian) => {
            CorrelationSpec::truncated_gaussian(delta, xi, explicit)
        }
    };
    let spec = match rule {
        Some(r) => spec.with_interval_rule(r),
        None => spec,
    };
    spec.validate(protocol)
        .map_err(|e| CliError::Config(format!("[scenario.{label}]: {e}")))?;
    Ok(Scenario {
        label: label.to_string(),
        spec,
    })
}

fn parse_boundary(label: &str, entries: &Entries) -> Result<BoundaryCheck> {
    let mut kind = ModelKind::WorstCaseInterval;
    let mut xi = 1;
    let mut predicate = BoundaryPredicate::PositiveAnywhere;
    for (key, value, line) in entries {
        match key.as_str() {
            "model" => {
                kind = parse_kind(value, *line)?
                    .ok_or_else(|| err(*line, "a boundary search needs a correlation model"))?
            }
            "xi" => xi = integer(value, key, *line)?,
            "predicate" => {
                let mut it = value.split_whitespace();
                predicate = match (it.next(), it.next(), it.next()) {
                    (Some("positive_anywhere"), None, None) => BoundaryPredicate::PositiveAnywhere,
                    (Some("positive_at"), Some(km), None) => {
                        let l = number(km, key, *line)?;
                        if l < 0.0 {
                            return Err(err(*line, "distance must be nonnegative"));
                        }
                        BoundaryPredicate::PositiveAt(l)
                    }
                    _ => {
                        return Err(err(
                            *line,
                            format!("predicate must be `positive_anywhere` or `positive_at <km>`, got `{value}`"),
                        ))
                    }
                };
            }
            _ => {
                return Err(err(
                    *line,
                    format!("unknown key `{key}` in [boundary.{label}]"),
                ))
            }
        }
    }
    if xi < 1 {
        return Err(CliError::Config(format!(
            "[boundary.{label}]: xi must be at least 1"
        )));
    }
    Ok(BoundaryCheck {
        label: label.to_string(),
        kind,
        xi,
        predicate,
    })
}

fn parse_analyze(entries: &Entries) -> Result<AnalyzeOptions> {
    let mut o = AnalyzeOptions {
        ingest: IngestConfig::default(),
        xi: 1,
    };
    let mut groups: Vec<(String, GroupWeights)> = Vec::new();
    for (key, value, line) in entries {
        match key.as_str() {
            "reference" => o.ingest.reference = value.clone(),
            "reference_intensity" => o.ingest.reference_intensity = number(value, key, *line)?,
            "k_sigma" => o.ingest.k_sigma = number(value, key, *line)?,
            "xi" => o.xi = integer(value, key, *line)?,
            k if k.starts_with("weight.") && k.len() > 7 => {
                let v = numbers(value, key, *line)?;
                let w = match v.as_slice() {
                    [s] => GroupWeights::new(*s, 1.0),
                    [s, d] => GroupWeights::new(*s, *d),
                    _ => return Err(err(*line, format!("`{k}` expects `w_send [w_det]`"))),
                }
                .map_err(|e| err(*line, e))?;
                groups.push((k[7..].to_string(), w));
            }
            _ => return Err(err(*line, format!("unknown key `{key}` in [analyze]"))),
        }
    }
    if !groups.is_empty() {
        o.ingest.groups = groups;
    }
    if !(o.ingest.reference_intensity > 0.0) || !(o.ingest.k_sigma > 0.0) || o.xi < 1 {
        return Err(CliError::Config(
            "[analyze]: reference_intensity and k_sigma must be positive and xi at least 1".into(),
        ));
    }
    Ok(o)
}

/// Scenarios used when the configuration names none.
pub fn default_scenarios(protocol: &IntensityProtocol) -> Vec<Scenario> {
    let s = |label: &str, spec| Scenario {
        label: label.to_string(),
        spec,
    };
    let tg = |d| CorrelationSpec::truncated_gaussian_scaled(protocol, d, 1, DEFAULT_K_SIGMA);
    vec![
        s("baseline", CorrelationSpec::uncorrelated()),
        s("wc-1e-7-xi1", CorrelationSpec::worst_case(1e-7, 1)),
        s("wc-1e-3-xi1", CorrelationSpec::worst_case(1e-3, 1)),
        s("wc-1e-7-xi2", CorrelationSpec::worst_case(1e-7, 2)),
        s("wc-1e-3-xi2", CorrelationSpec::worst_case(1e-3, 2)),
        s("tg-1e-7", tg(1e-7)),
        s("tg-1e-3", tg(1e-3)),
        s("tg-1e-1", tg(1e-1)),
    ]
}

pub fn default_boundaries() -> Vec<BoundaryCheck> {
    vec![
        BoundaryCheck {
            label: "worst-case-at-1km".into(),
            kind: ModelKind::WorstCaseInterval,
            xi: 1,
            predicate: BoundaryPredicate::PositiveAt(1.0),
        },
        BoundaryCheck {
            label: "truncated-gaussian-anywhere".into(),
            kind: ModelKind::TruncatedGaussian,
            xi: 1,
            predicate: BoundaryPredicate::PositiveAnywhere,
        },
    ]
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = split_sections(text)?;
    let get = |name: &str| sections.iter().find(|s| s.name == name).map(|s| &s.entries);
    let empty = Vec::new();
    for s in &sections[1..] {
        let known = matches!(s.name.as_str(), "protocol" | "channel" | "grid" | "analyze")
            || s.name
                .strip_prefix("scenario.")
                .is_some_and(|l| !l.is_empty())
            || s.name
                .strip_prefix("boundary.")
                .is_some_and(|l| !l.is_empty());
        if !known {
            return Err(err(s.line, format!("unknown section `[{}]`", s.name)));
        }
    }
    let protocol = parse_protocol(get("protocol").unwrap_or(&empty))?;
    let channel = parse_channel(get("channel").unwrap_or(&empty))?;
    let grid = parse_grid(get("grid").unwrap_or(&empty))?;
    let analyze = parse_analyze(get("analyze").unwrap_or(&empty))?;
    let mut scenarios = Vec::new();
    let mut boundaries = Vec::new();
    for s in &sections[1..] {
        if let Some(label) = s.name.strip_prefix("scenario.") {
            if label.contains(|c: char| {
                !(c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
            }) {
                return Err(err(
                    s.line,
                    format!("scenario label `{label}` may only use letters, digits, `-`, `_`, `.`"),
                ));
            }
            scenarios.push(parse_scenario(label, s.line, &s.entries, &protocol)?);
        } else if let Some(label) = s.name.strip_prefix("boundary.") {
            boundaries.push(parse_boundary(label, &s.entries)?);
        }
    }
    if scenarios.is_empty() {
        scenarios = default_scenarios(&protocol);
    }
    if boundaries.is_empty() {
        boundaries = default_boundaries();
    }
    Ok(RunConfig {
        protocol,
        channel,
        grid,
        scenarios,
        boundaries,
        analyze,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Renders a scenario as a config section that parses back to the same
/// model. Floats use shortest round-trip formatting.
pub fn scenario_section(
    label: &str,
    spec: &CorrelationSpec,
    protocol: &IntensityProtocol,
) -> String {
    let mut out = format!("[scenario.{label}]\n");
    let kind = match spec.kind {
        ModelKind::WorstCaseInterval => "worst-case",
        ModelKind::TruncatedGaussian => "truncated-gaussian",
    };
    out += &format!(
        "model = {kind}\ndelta_max = {:?}\nxi = {}\n",
        spec.delta_max, spec.xi
    );
    out += match spec.interval_rule {
        IntervalRule::Compounded => "interval_rule = compounded\n",
        IntervalRule::Fixed => "interval_rule = fixed\n",
    };
    let names: BTreeMap<usize, &str> = [(0, "mu"), (1, "nu"), (2, "omega")].into_iter().collect();
    for s in Setting::ALL {
        if let Some(p) = spec.tg_params_for(protocol.intensity(s)) {
            out += &format!(
                "tg.{} = {:?} {:?} {:?} {:?}\n",
                names[&s.index()],
                p.gamma,
                p.sigma,
                p.lambda_lo,
                p.lambda_hi
            );
        }
    }
    out
}

pub fn protocol_section(p: &IntensityProtocol) -> String {
    format!(
        "[protocol]\nmu = {:?}\nnu = {:?}\nomega = {:?}\np_mu = {:?}\np_nu = {:?}\np_omega = {:?}\nq_z_alice = {:?}\nq_z_bob = {:?}\n",
        p.mu.value(),
        p.nu.value(),
        p.omega.value(),
        p.p_mu,
        p.p_nu,
        p.p_omega,
        p.q_z_alice,
        p.q_z_bob
    )
}

pub fn channel_section(c: &ChannelParams) -> String {
    format!(
        "[channel]\neta_d = {:?}\nalpha = {:?}\ny0 = {:?}\ne_d = {:?}\nf_ec = {:?}\n",
        c.eta_d, c.alpha_db_per_km, c.y0, c.e_d, c.f_ec
    )
}

pub fn grid_section(g: &Grid) -> String {
    format!(
        "[grid]\nstart = {:?}\nstop = {:?}\nstep = {:?}\n",
        g.start, g.stop, g.step
    )
}
