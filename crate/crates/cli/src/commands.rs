use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mdicorr_core::ingest::{
    analyze_histograms, models_from_estimate, read_histograms, IngestReport,
};
use mdicorr_core::keyrate::{delta_boundary, BoundaryPredicate, KeyRateCurve, KeyRateModel};
use mdicorr_core::overlap::CorrelationSpec;
use mdicorr_core::Error as EngineError;
use rayon::prelude::*;

use crate::config::{channel_section, grid_section, protocol_section, scenario_section, RunConfig};
use crate::error::{CliError, Result};

pub const CSV_HEADER: &str = "L_km,total_km,key_rate,scenario";

/// Curve and maximum distance of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub curve: KeyRateCurve,
    pub max_distance_km: f64,
}

pub fn curve_csv(curve: &KeyRateCurve) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{}",
            p.l_km,
            2.0 * p.l_km,
            p.rate,
            curve.scenario_label
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

pub fn run_scenarios(cfg: &RunConfig) -> Result<Vec<ScenarioResult>> {
    let grid = cfg.grid.points();
    cfg.scenarios
        .par_iter()
        .map(|s| {
            let model = KeyRateModel::new(&cfg.protocol, &s.spec)?;
            Ok(ScenarioResult {
                curve: model.scan(&cfg.channel, &grid, &s.label)?,
                max_distance_km: model.max_distance(&cfg.channel)?,
            })
        })
        .collect()
}

/// Writes `<label>.csv` per scenario, `combined.csv` and `summary.csv`.
/// Returns the summary text.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<String> {
    create_dir(out)?;
    let results = run_scenarios(cfg)?;
    let mut combined = String::from(CSV_HEADER);
    combined.push('\n');
    let mut summary = String::from("scenario,max_distance_km,max_total_km\n");
    for r in &results {
        let csv = curve_csv(&r.curve);
        write(&out.join(format!("{}.csv", r.curve.scenario_label)), &csv)?;
        combined.push_str(csv.split_once('\n').map_or("", |x| x.1));
        let _ = writeln!(
            summary,
            "{},{:?},{:?}",
            r.curve.scenario_label,
            r.max_distance_km,
            2.0 * r.max_distance_km
        );
    }
    write(&out.join("combined.csv"), &combined)?;
    write(&out.join("summary.csv"), &summary)?;
    Ok(summary)
}

fn predicate_text(p: BoundaryPredicate) -> String {
    match p {
        BoundaryPredicate::PositiveAt(l) => format!("positive_at {l} km"),
        BoundaryPredicate::PositiveAnywhere => "positive_anywhere".into(),
    }
}

pub fn boundary(cfg: &RunConfig) -> Result<String> {
    let lines = cfg
        .boundaries
        .par_iter()
        .map(|b| {
            let head = format!(
                "{}: model={} xi={} predicate={}",
                b.label,
                b.kind.name(),
                b.xi,
                predicate_text(b.predicate)
            );
            match delta_boundary(&cfg.protocol, &cfg.channel, b.kind, b.xi, b.predicate) {
                Ok(d) => Ok(format!("{head} delta*={d:e}")),
                Err(EngineError::Bracket(_)) => {
                    Ok(format!("{head} no boundary: baseline infeasible"))
                }
                Err(e) => Err(CliError::from(e)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(lines.join("\n") + "\n")
}

pub const APPLIED_WORST_CASE: &str = "applied-worst-case";
pub const APPLIED_TRUNCATED_GAUSSIAN: &str = "applied-truncated-gaussian";

#[derive(Debug, Clone)]
pub struct Analysis {
    pub ingest: IngestReport,
    pub worst_case: CorrelationSpec,
    pub truncated_gaussian: CorrelationSpec,
    pub worst_case_km: f64,
    pub truncated_gaussian_km: f64,
}

pub fn analysis(cfg: &RunConfig, data: &Path) -> Result<Analysis> {
    let file =
        fs::File::open(data).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;
    let hists =
        read_histograms(file).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;
    let ingest = analyze_histograms(&hists, &cfg.analyze.ingest)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let (wc, tg) = models_from_estimate(
        &cfg.protocol,
        &ingest.estimate,
        cfg.analyze.ingest.reference_intensity,
        cfg.analyze.xi,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let km = |m: &CorrelationSpec| -> Result<f64> {
        Ok(KeyRateModel::new(&cfg.protocol, m)?.max_distance(&cfg.channel)?)
    };
    Ok(Analysis {
        worst_case_km: km(&wc)?,
        truncated_gaussian_km: km(&tg)?,
        ingest,
        worst_case: wc,
        truncated_gaussian: tg,
    })
}

pub fn analysis_report(a: &Analysis, cfg: &RunConfig) -> String {
    let r = &a.ingest;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "calibration: {:e} intensity per unit click rate",
        r.calibration
    );
    let _ = writeln!(
        s,
        "reference {}: mean {:.4} sigma {:.4}",
        cfg.analyze.ingest.reference, r.reference_fit.mean, r.reference_fit.sigma
    );
    let _ = writeln!(
        s,
        "pooled: mean {:.4} sigma {:.4}",
        r.combined_fit.mean, r.combined_fit.sigma
    );
    let _ = writeln!(
        s,
        "correlation component: mean {:.4} sigma {:.4}{}",
        r.component.mean,
        r.component.sigma,
        if r.component.clamped {
            " (clamped)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        s,
        "deviation range: [{:.4}, {:.4}], delta_max {:.4}",
        r.estimate.range.0, r.estimate.range.1, r.estimate.delta_max
    );
    match r.estimate.tg {
        Some(t) => {
            let _ = writeln!(
                s,
                "truncated Gaussian: gamma {:.4} sigma {:.4} support [{:.4}, {:.4}]",
                t.gamma, t.sigma, t.lambda_lo, t.lambda_hi
            );
        }
        None => s.push_str("truncated Gaussian: none (no correlation spread)\n"),
    }
    let _ = writeln!(
        s,
        "max distance, worst case: {:?} km per arm ({:?} km total)",
        a.worst_case_km,
        2.0 * a.worst_case_km
    );
    let _ = writeln!(
        s,
        "max distance, truncated Gaussian: {:?} km per arm ({:?} km total)",
        a.truncated_gaussian_km,
        2.0 * a.truncated_gaussian_km
    );
    s
}

/// Config that reproduces the analysed models with `simulate`.
pub fn derived_config(a: &Analysis, cfg: &RunConfig) -> String {
    [
        protocol_section(&cfg.protocol),
        channel_section(&cfg.channel),
        grid_section(&cfg.grid),
        scenario_section(APPLIED_WORST_CASE, &a.worst_case, &cfg.protocol),
        scenario_section(
            APPLIED_TRUNCATED_GAUSSIAN,
            &a.truncated_gaussian,
            &cfg.protocol,
        ),
    ]
    .join("\n")
}

/// Writes `analysis.txt` and `derived.conf`; returns the report.
pub fn analyze(cfg: &RunConfig, data: &Path, out: &Path) -> Result<String> {
    let a = analysis(cfg, data)?;
    create_dir(out)?;
    let report = analysis_report(&a, cfg);
    write(&out.join("analysis.txt"), &report)?;
    write(&out.join("derived.conf"), &derived_config(&a, cfg))?;
    Ok(report)
}
