//! Experiment configs, the pipelines they drive, and the CSV/JSON artifacts
//! they emit.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::charfun::{charfun_from_density, moments_from_density, ToleranceSchedule};
use crate::error::{Error, Result};
use crate::generators::{BumpSpec, DisjointPairSpec};
use crate::grid::{CharFn, DensityFunction, Grid};
use crate::operators::{build_operator_family, OperatorFamily, OperatorFamilySpec, OperatorSpec};
use crate::stieltjes::{
    build_stieltjes_family_unchecked, q_derivatives_at_zero, StieltjesFamilySpec,
};
use crate::verify::{ConditionCheck, FamilyKind, FamilyVerifier, VerificationReport};

pub const REPORT_SCHEMA: u32 = 1;
pub const DENSITY_FILE: &str = "density.csv";
pub const CHARFUN_FILE: &str = "charfun.csv";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Densities,
    Charfuns,
    Moments,
    Report,
}

impl Artifact {
    pub const ALL: [Artifact; 4] = [
        Artifact::Densities,
        Artifact::Charfuns,
        Artifact::Moments,
        Artifact::Report,
    ];
}

fn all_artifacts() -> BTreeSet<Artifact> {
    Artifact::ALL.into_iter().collect()
}

/// One experiment. Fields that belong to the other family kind must be
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: FamilyKind,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<BumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<DisjointPairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    pub n_max: usize,
    pub output_dir: PathBuf,
    #[serde(default = "all_artifacts")]
    pub emit: BTreeSet<Artifact>,
}

fn required<T: Clone>(value: &Option<T>, field: &str, kind: FamilyKind) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::ConfigInvalid(format!("`{field}` is required for kind {kind:?}")))
}

fn reject_foreign(present: &[(bool, &str)], kind: FamilyKind) -> Result<()> {
    match present.iter().find(|(p, _)| *p) {
        Some((_, field)) => Err(Error::ConfigInvalid(format!(
            "`{field}` does not apply to kind {kind:?}"
        ))),
        None => Ok(()),
    }
}

/// Rewrites a spec-level validation failure as a config error naming `field`.
fn as_config(field: &str, result: Result<()>) -> Result<()> {
    result.map_err(|e| Error::ConfigInvalid(format!("`{field}`: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FamilyKind::Stieltjes => {
                reject_foreign(
                    &[
                        (self.pair.is_some(), "pair"),
                        (self.betas.is_some(), "betas"),
                        (self.operator.is_some(), "operator"),
                    ],
                    self.kind,
                )?;
                as_config("stieltjes parameters", self.stieltjes_spec()?.validate())
            }
            FamilyKind::Operator => {
                reject_foreign(
                    &[
                        (self.generator.is_some(), "generator"),
                        (self.lambda.is_some(), "lambda"),
                        (self.phi.is_some(), "phi"),
                        (self.epsilons.is_some(), "epsilons"),
                    ],
                    self.kind,
                )?;
                as_config("operator parameters", self.operator_spec()?.validate())
            }
        }
    }

    pub fn stieltjes_spec(&self) -> Result<StieltjesFamilySpec> {
        let kind = FamilyKind::Stieltjes;
        Ok(StieltjesFamilySpec {
            generator: required(&self.generator, "generator", kind)?,
            lambda: required(&self.lambda, "lambda", kind)?,
            phi: self.phi.unwrap_or(0.0),
            epsilons: required(&self.epsilons, "epsilons", kind)?,
            n_max: self.n_max,
        })
    }

    pub fn operator_spec(&self) -> Result<OperatorFamilySpec> {
        let kind = FamilyKind::Operator;
        Ok(OperatorFamilySpec {
            pair: required(&self.pair, "pair", kind)?,
            betas: required(&self.betas, "betas", kind)?,
            operator: required(&self.operator, "operator", kind)?,
            n_max: self.n_max,
            theta_grid: self.grid,
            r_grid: self.grid.reciprocal(),
        })
    }
}

/// Stieltjes family report with the extent and annihilation conditions
/// attached. Members are built without the `λ > L` gate so a broken `λ`
/// shows up as failing moments rather than an early error.
pub fn stieltjes_report(spec: &StieltjesFamilySpec, grid: &Grid) -> Result<Outcome> {
    let (family, extent) = build_stieltjes_family_unchecked(spec, grid)?;
    if !extent.pass {
        log::warn!(
            "lambda {} does not exceed the charfun extent {} by 2 dθ; building the family anyway",
            spec.lambda,
            extent.extent
        );
    }
    let reference = moments_from_density(&family.base_density, spec.n_max)?;
    let tol = ToleranceSchedule::default().for_reference(&reference);
    let q = q_derivatives_at_zero(&family.base_density, spec.lambda, spec.phi, spec.n_max)?;
    let worst_q = q
        .iter()
        .zip(&tol)
        .map(|(q, t)| q.abs() / t)
        .fold(0.0, f64::max);
    let report = FamilyVerifier::new(FamilyKind::Stieltjes, spec.n_max)
        .with_reference(reference)
        .with_checks(vec![
            ConditionCheck::new("finite_extent", extent.pass, extent.margin),
            ConditionCheck::new("perturbation_annihilates_moments", worst_q <= 1.0, worst_q),
        ])
        .verify(&family.members)?;
    let charfuns = family
        .members
        .iter()
        .map(|(_, d)| charfun_from_density(d, grid))
        .collect::<Result<Vec<_>>>();
    // Members of a broken family are not normalized, so their transforms
    // need not pass the characteristic-function checks.
    let charfuns = match charfuns {
        Ok(c) => c,
        Err(e) => {
            log::warn!("member characteristic functions not emitted: {e}");
            Vec::new()
        }
    };
    Ok(Outcome {
        members: family.members,
        charfuns,
        report,
    })
}

/// Operator family report with cross-term, two-route and charfun
/// distinctness checks attached.
pub fn operator_report(family: &OperatorFamily, n_max: usize) -> Result<VerificationReport> {
    let members: Vec<_> = family
        .members
        .iter()
        .map(|m| (m.beta, m.density.clone()))
        .collect();
    let reference = family.members[0].density_moments.clone();
    let schedule = ToleranceSchedule::default();
    let mut route_gap = 0.0f64;
    for m in &family.members {
        for n in 0..=n_max {
            let tol = schedule.tol(n, reference.sigma_ref, reference.get(n));
            let gap = (m.operator_moments.get(n) - m.density_moments.get(n)).abs();
            route_gap = route_gap.max(gap / tol);
        }
    }
    let cross = family.terms.max_cross();
    let charfun_gap = family.min_pairwise_charfun_distance();
    let mut checks = vec![
        ConditionCheck::new("cross_terms_vanish", cross <= 1e-10, cross),
        ConditionCheck::new("moment_routes_agree", route_gap <= 1.0, route_gap),
    ];
    if family.members.len() > 1 {
        checks.push(ConditionCheck::new(
            "charfuns_distinct",
            charfun_gap >= 1e-2,
            charfun_gap,
        ));
    }
    FamilyVerifier::new(FamilyKind::Operator, n_max)
        .with_reference(reference)
        .with_checks(checks)
        .verify(&members)
}

/// Densities, characteristic functions and the verification report of one
/// run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub members: Vec<(f64, DensityFunction)>,
    /// Per member, on the θ-grid; empty if they could not be formed.
    pub charfuns: Vec<CharFn>,
    pub report: VerificationReport,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config.kind {
        FamilyKind::Stieltjes => stieltjes_report(&config.stieltjes_spec()?, &config.grid),
        FamilyKind::Operator => {
            let spec = config.operator_spec()?;
            let family = build_operator_family(&spec)?;
            let report = operator_report(&family, spec.n_max)?;
            Ok(Outcome {
                members: family
                    .members
                    .iter()
                    .map(|m| (m.beta, m.density.clone()))
                    .collect(),
                charfuns: family.members.iter().map(|m| m.charfun.clone()).collect(),
                report,
            })
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema: u32,
    pub name: String,
    pub density_grid: Grid,
    pub report: VerificationReport,
}

/// Shortest text that parses back to the same `f64`.
fn cell(v: f64) -> String {
    format!("{v:?}")
}

fn column(kind: FamilyKind, value: f64) -> String {
    format!("{}={value}", kind.parameter())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_csv(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    writer.write_record(&header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the requested artifacts into `dir`, returning their paths.
pub fn write_artifacts(
    name: &str,
    outcome: &Outcome,
    emit: &BTreeSet<Artifact>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let kind = outcome.report.family_kind;
    let mut written = Vec::new();
    let params: Vec<f64> = outcome.members.iter().map(|(p, _)| *p).collect();

    if emit.contains(&Artifact::Densities) {
        let path = dir.join(DENSITY_FILE);
        let grid = *outcome.members[0].1.grid();
        let mut header = vec!["x".to_string()];
        header.extend(params.iter().map(|p| column(kind, *p)));
        let rows = grid.points().enumerate().map(|(j, x)| {
            let mut row = vec![cell(x)];
            row.extend(outcome.members.iter().map(|(_, d)| cell(d.value(j))));
            row
        });
        write_csv(&path, header, rows)?;
        written.push(path);
    }

    if emit.contains(&Artifact::Charfuns) && !outcome.charfuns.is_empty() {
        let path = dir.join(CHARFUN_FILE);
        let grid = *outcome.charfuns[0].grid();
        let mut header = vec!["theta".to_string()];
        for p in &params {
            header.push(format!("{}:re", column(kind, *p)));
            header.push(format!("{}:im", column(kind, *p)));
        }
        let rows = grid.points().enumerate().map(|(j, t)| {
            let mut row = vec![cell(t)];
            for m in &outcome.charfuns {
                let z = m.base().value(j);
                row.push(cell(z.re));
                row.push(cell(z.im));
            }
            row
        });
        write_csv(&path, header, rows)?;
        written.push(path);
    }

    if emit.contains(&Artifact::Moments) {
        let path = dir.join(MOMENTS_FILE);
        let mut header = vec!["n".to_string()];
        header.extend(params.iter().map(|p| column(kind, *p)));
        let table = &outcome.report.moment_table;
        let rows = (0..=outcome.report.n_max).map(|n| {
            let mut row = vec![n.to_string()];
            row.extend(table.iter().map(|m| cell(m[n])));
            row
        });
        write_csv(&path, header, rows)?;
        written.push(path);
    }

    if emit.contains(&Artifact::Report) {
        let path = dir.join(REPORT_FILE);
        let file = ReportFile {
            schema: REPORT_SCHEMA,
            name: name.to_string(),
            density_grid: *outcome.members[0].1.grid(),
            report: outcome.report.clone(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Io(format!("serializing report: {e}")))?;
        fs::write(&path, text + "\n")?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(dir: &Path) -> Result<ReportFile> {
    let path = dir.join(REPORT_FILE);
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: ReportFile = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
    if file.schema != REPORT_SCHEMA {
        return Err(Error::ConfigInvalid(format!(
            "unsupported report schema {}",
            file.schema
        )));
    }
    Ok(file)
}

/// Members from an emitted `density.csv` on the recorded grid.
pub fn read_densities(
    dir: &Path,
    kind: FamilyKind,
    grid: &Grid,
) -> Result<Vec<(f64, DensityFunction)>> {
    let path = dir.join(DENSITY_FILE);
    let mut reader =
        csv::Reader::from_path(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let prefix = format!("{}=", kind.parameter());
    let params = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix(&prefix)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::ConfigInvalid(format!("unexpected column `{h}` in {DENSITY_FILE}"))
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut columns = vec![Vec::with_capacity(grid.len()); params.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        for (col, field) in columns.iter_mut().zip(record.iter().skip(1)) {
            let v = field
                .parse::<f64>()
                .map_err(|e| Error::ConfigInvalid(format!("{DENSITY_FILE}: `{field}`: {e}")))?;
            col.push(v);
        }
    }
    params
        .into_iter()
        .zip(columns)
        .map(|(p, values)| Ok((p, DensityFunction::new_unchecked(*grid, values)?)))
        .collect()
}

/// Recomputes the report from the densities in `dir`, reusing the recorded
/// reference moments, threshold and condition checks.
pub fn reverify(dir: &Path) -> Result<(ReportFile, VerificationReport)> {
    let file = read_report(dir)?;
    let original = &file.report;
    let members = read_densities(dir, original.family_kind, &file.density_grid)?;
    let mut verifier = FamilyVerifier::new(original.family_kind, original.n_max)
        .with_reference(original.reference.clone())
        .with_checks(original.condition_checks.clone());
    verifier.distinctness_threshold = original.distinctness_threshold;
    let fresh = verifier.verify(&members)?;
    check_replay(original, &fresh)?;
    Ok((file, fresh))
}

/// Relative agreement demanded of a replayed moment table.
pub const REPLAY_TOL: f64 = 1e-12;

fn check_replay(original: &VerificationReport, fresh: &VerificationReport) -> Result<()> {
    if original.moment_table.len() != fresh.moment_table.len() {
        return Err(Error::ReplayMismatch(format!(
            "{} members recorded, {} read back",
            original.moment_table.len(),
            fresh.moment_table.len()
        )));
    }
    for (i, (a, b)) in original
        .moment_table
        .iter()
        .zip(&fresh.moment_table)
        .enumerate()
    {
        for (n, (x, y)) in a.iter().zip(b).enumerate() {
            if x != y && !((x - y).abs() <= REPLAY_TOL * x.abs().max(1.0)) {
                return Err(Error::ReplayMismatch(format!(
                    "member {i}, order {n}: recorded {x:e}, recomputed {y:e}"
                )));
            }
        }
    }
    if original.verdict != fresh.verdict {
        return Err(Error::ReplayMismatch(format!(
            "recorded verdict {:?}, recomputed {:?}",
            original.verdict, fresh.verdict
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const STIELTJES: &str = r#"{
        "name": "t",
        "kind": "stieltjes",
        "grid": {"x_min": -8, "x_max": 8, "n_points": 1024},
        "generator": {"center": 0, "half_width": 1, "kind": {"type": "standard_bump"}},
        "lambda": 2.5,
        "epsilons": [0, 1],
        "n_max": 4,
        "output_dir": "out"
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(STIELTJES).unwrap();
        assert_eq!(c.emit.len(), 4);
        assert_eq!(c.stieltjes_spec().unwrap().phi, 0.0);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = STIELTJES.replace("\"n_max\"", "\"bogus\": 1, \"n_max\"");
        match ExperimentConfig::from_json(&text) {
            Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("bogus"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_foreign_fields_named() {
        let text = STIELTJES.replace("\"lambda\": 2.5,", "");
        match ExperimentConfig::from_json(&text) {
            Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("lambda"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let text = STIELTJES.replace("\"n_max\"", "\"betas\": [0], \"n_max\"");
        match ExperimentConfig::from_json(&text) {
            Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("betas"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_bound_is_a_config_error() {
        let text = STIELTJES.replace("[0, 1]", "[0, 1.5]");
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(Error::ConfigInvalid(_))
        ));
    }
}
