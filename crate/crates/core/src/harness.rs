//! Configuration-driven studies: fine reference, method sweeps, CSV/JSON
//! reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficient::{constant_field, load_raster, preset, synthetic_field, CoefficientField, SyntheticKind};
use crate::error::{Error, Result};
use crate::fem::{self, FineFunction, FINE_TOL};
use crate::mesh::{build_grids, FineGrid, GridPair};
use crate::metrics::error_report;
use crate::parallel::with_workers;
use crate::spaces::{coarse_solve, esmsfem_space, msfem_space, prepare, wemsfem_space, MultiscaleSpace, OfflineData, Oversampling};
use crate::wavelets::{WaveletKind, WaveletSpec};

pub const CSV_HEADER: [&str; 8] = ["method", "H", "level_or_Nb", "Lambda", "e_L2", "e_H1", "dim", "seconds"];

/// Where `κ` comes from. Exactly one of `preset`, `kind`, `raster`,
/// `constant` is set; `contrast` and `seed` refine presets and synthetic kinds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SyntheticKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl FieldConfig {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [self.preset.is_some(), self.kind.is_some(), self.raster.is_some(), self.constant.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config("field needs exactly one of preset, kind, raster, constant".into()));
        }
        if (self.raster.is_some() || self.constant.is_some()) && (self.contrast.is_some() || self.seed.is_some()) {
            return Err(Error::Config("contrast and seed only apply to preset or kind fields".into()));
        }
        if self.kind.is_some() && self.contrast.is_none() {
            return Err(Error::Config("synthetic field kind needs a contrast".into()));
        }
        if let Some(name) = &self.preset {
            preset(name)?;
        }
        Ok(())
    }

    pub fn build(&self, grid: &FineGrid) -> Result<CoefficientField> {
        self.validate()?;
        if let Some(name) = &self.preset {
            let p = preset(name)?;
            synthetic_field(grid, p.kind, self.contrast.unwrap_or(p.contrast), self.seed.unwrap_or(p.seed))
        } else if let Some(kind) = self.kind {
            synthetic_field(grid, kind, self.contrast.unwrap_or(1.0), self.seed.unwrap_or(0))
        } else if let Some(path) = &self.raster {
            load_raster(path, grid)
        } else {
            constant_field(grid, self.constant.unwrap_or(1.0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Wemsfem,
    Esmsfem,
    Msfem,
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wemsfem" => Ok(Self::Wemsfem),
            "esmsfem" => Ok(Self::Esmsfem),
            "msfem" => Ok(Self::Msfem),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Wemsfem => "wemsfem",
            Self::Esmsfem => "esmsfem",
            Self::Msfem => "msfem",
        })
    }
}

fn default_source() -> f64 {
    1.0
}

fn default_fine() -> usize {
    256
}

fn default_tol() -> f64 {
    FINE_TOL
}

fn default_wavelets() -> Vec<WaveletKind> {
    vec![WaveletKind::Haar]
}

fn default_oversampling() -> Vec<Oversampling> {
    vec![Oversampling::None]
}

/// A study: one field, one fine grid, a sweep over coarse sizes and method
/// parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub field: FieldConfig,
    /// constant source `f`
    #[serde(default = "default_source")]
    pub source: f64,
    /// fine cells per axis
    #[serde(default = "default_fine")]
    pub fine: usize,
    /// coarse mesh sizes
    #[serde(rename = "H")]
    pub coarse_h: Vec<f64>,
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub levels: Vec<u32>,
    #[serde(default)]
    pub n_b: Vec<usize>,
    #[serde(default = "default_wavelets")]
    pub wavelets: Vec<WaveletKind>,
    #[serde(default = "default_oversampling")]
    pub oversampling: Vec<Oversampling>,
    /// relative residual of the fine solve
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// fill the `seconds` column (makes the CSV run-dependent)
    #[serde(default)]
    pub timings: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config; a relative raster path is resolved against the
    /// config's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(raster), Some(dir)) = (&config.field.raster, path.parent()) {
            if raster.is_relative() {
                config.field.raster = Some(dir.join(raster));
            }
        }
        Ok(config)
    }

    /// Coarse cells per axis for each `H`, checked against the fine grid.
    pub fn coarse_counts(&self) -> Result<Vec<usize>> {
        self.coarse_h
            .iter()
            .map(|&h| {
                let inv = 1.0 / h;
                let nxc = inv.round() as usize;
                if !(h > 0.0) || (inv - nxc as f64).abs() > 1e-9 * inv || nxc < 2 {
                    return Err(Error::Config(format!("H = {h} is not 1/m for an integer m ≥ 2")));
                }
                if self.fine % nxc != 0 || !(self.fine / nxc).is_power_of_two() || self.fine / nxc < 2 {
                    return Err(Error::Config(format!(
                        "H = {h}: fine resolution {} is not a power-of-two (≥ 2) multiple of {nxc}",
                        self.fine
                    )));
                }
                Ok(nxc)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        if self.coarse_h.is_empty() {
            return Err(Error::Config("no coarse sizes H given".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.methods.contains(&MethodName::Wemsfem) && (self.levels.is_empty() || self.wavelets.is_empty()) {
            return Err(Error::Config("wemsfem needs levels and wavelets".into()));
        }
        if self.methods.contains(&MethodName::Esmsfem) && (self.n_b.is_empty() || self.n_b.contains(&0)) {
            return Err(Error::Config("esmsfem needs a list of N_b ≥ 1".into()));
        }
        if self.methods.contains(&MethodName::Msfem) && self.oversampling.is_empty() {
            return Err(Error::Config("msfem needs an oversampling list".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        if !self.source.is_finite() {
            return Err(Error::Config("source must be finite".into()));
        }
        self.coarse_counts()?;
        Ok(())
    }

    /// SHA-256 over the semantic fields (everything but `out` and `workers`).
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.out = None;
        semantic.workers = None;
        let text = serde_json::to_string(&semantic).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// One `(method, H, parameter)` point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub method: String,
    #[serde(rename = "H")]
    pub coarse_h: f64,
    pub level_or_nb: Option<usize>,
    pub lambda: Option<f64>,
    pub e_l2: Option<f64>,
    pub e_h1: Option<f64>,
    pub dim: Option<usize>,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub version: String,
    pub config_hash: String,
    pub config: StudyConfig,
    pub field_min: f64,
    pub field_max: f64,
    pub fine_seconds: f64,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Fine reference for a constant source.
pub fn fine_solve(grid: &FineGrid, field: &CoefficientField, source: f64, tol: f64) -> Result<FineFunction> {
    fem::fine_reference_tol(grid, field, &vec![source; grid.num_nodes()], tol)
}

enum Point {
    We(WaveletSpec),
    Es(usize),
    Ms(Oversampling),
}

fn points(config: &StudyConfig) -> Vec<Point> {
    let mut out = Vec::new();
    for method in &config.methods {
        match method {
            MethodName::Wemsfem => {
                for &kind in &config.wavelets {
                    for &level in &config.levels {
                        out.push(Point::We(WaveletSpec { kind, level }));
                    }
                }
            }
            MethodName::Esmsfem => out.extend(config.n_b.iter().map(|&n| Point::Es(n))),
            MethodName::Msfem => out.extend(config.oversampling.iter().map(|&o| Point::Ms(o))),
        }
    }
    out
}

fn run_point(grids: &GridPair, field: &CoefficientField, offline: &OfflineData, point: &Point, f: &[f64], u_h: &FineFunction, timings: bool) -> StudyRow {
    let start = Instant::now();
    let (param, built) = match point {
        Point::We(spec) => (Some(spec.level as usize), wemsfem_space(grids, field, offline, *spec)),
        Point::Es(n_b) => (Some(*n_b), esmsfem_space(grids, field, offline, *n_b)),
        Point::Ms(os) => (None, msfem_space(grids, field, &offline.pou, *os)),
    };
    let solve = |space: &MultiscaleSpace| -> Result<_> {
        let sol = coarse_solve(grids, space, field, f)?;
        error_report(grids, &sol, u_h, field, 0.0)
    };
    let method = match point {
        Point::We(spec) => format!("wemsfem-{}", spec.kind),
        Point::Es(_) => "esmsfem".to_string(),
        Point::Ms(Oversampling::None) => "msfem".to_string(),
        Point::Ms(os) => format!("msfem-{os}"),
    };
    let mut row = StudyRow {
        method,
        coarse_h: grids.coarse_h(),
        level_or_nb: param,
        lambda: None,
        e_l2: None,
        e_h1: None,
        dim: None,
        seconds: 0.0,
        error: None,
    };
    match built.and_then(|space| solve(&space).map(|r| (space, r))) {
        Ok((space, report)) => {
            row.lambda = space.lambda;
            row.e_l2 = Some(report.e_l2);
            row.e_h1 = Some(report.e_h1);
            row.dim = Some(space.dim());
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if timings {
        row.seconds = start.elapsed().as_secs_f64();
    }
    row
}

/// Runs every configuration point. Failing points are recorded in their row
/// and the remaining ones still run; errors in the field or the fine solve
/// abort the study.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let run = || -> Result<StudyReport> {
        let counts = config.coarse_counts()?;
        let grid = FineGrid::new(config.fine)?;
        let field = config.field.build(&grid)?;
        let f = vec![config.source; grid.num_nodes()];
        let start = Instant::now();
        let u_h = fine_solve(&grid, &field, config.source, config.tol)?;
        let fine_seconds = if config.timings { start.elapsed().as_secs_f64() } else { 0.0 };
        let mut rows = Vec::new();
        for nxc in counts {
            let grids = build_grids(nxc, config.fine / nxc)?;
            let offline = prepare(&grids, &field)?;
            for point in points(config) {
                rows.push(run_point(&grids, &field, &offline, &point, &f, &u_h, config.timings));
            }
        }
        Ok(StudyReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            field_min: field.min(),
            field_max: field.max(),
            fine_seconds,
            rows,
        })
    };
    with_workers(config.workers.unwrap_or(0), run)?
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: std::io::Write>(report: &StudyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in &report.rows {
        let seconds = if report.config.timings { r.seconds.to_string() } else { String::new() };
        w.write_record([
            r.method.clone(),
            r.coarse_h.to_string(),
            opt(r.level_or_nb),
            opt(r.lambda),
            opt(r.e_l2),
            opt(r.e_h1),
            opt(r.dim),
            seconds,
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("writing csv", e))
}

pub fn emit_csv(report: &StudyReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_csv(report, std::io::BufWriter::new(file))
}

pub fn emit_json(report: &StudyReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Runs a study and writes `study.csv` and `study.json` into `out`.
pub fn run_study_to(config: &StudyConfig, out: &Path) -> Result<StudyReport> {
    let report = run_study(config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    emit_csv(&report, &out.join("study.csv"))?;
    emit_json(&report, &out.join("study.json"))?;
    Ok(report)
}

/// Writes nodal values of a fine function, one grid row per line, bottom row
/// first, after an `nx ny` header of node counts.
pub fn write_nodal(grid: &FineGrid, u: &FineFunction, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let m = grid.nx() + 1;
    let mut s = format!("{m} {m}\n");
    for row in u.values.chunks(m) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    std::fs::write(path, s).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[derive(Clone, Debug, Serialize)]
pub struct FineSummary {
    pub fine: usize,
    pub nodes: usize,
    pub field_min: f64,
    pub field_max: f64,
    pub energy: f64,
    pub max_value: f64,
    pub seconds: f64,
}

/// Fine solve of a config's field; writes `fine_solution.txt` and
/// `fine_solution.json` into `out`.
pub fn fine_solve_to(config: &StudyConfig, out: &Path) -> Result<FineSummary> {
    config.validate()?;
    let grid = FineGrid::new(config.fine)?;
    let field = config.field.build(&grid)?;
    let start = Instant::now();
    let u_h = with_workers(config.workers.unwrap_or(0), || fine_solve(&grid, &field, config.source, config.tol))??;
    let a = fem::assemble_stiffness(&grid, &field)?;
    let summary = FineSummary {
        fine: config.fine,
        nodes: grid.num_nodes(),
        field_min: field.min(),
        field_max: field.max(),
        energy: a.energy(&u_h.values),
        max_value: u_h.values.iter().fold(f64::MIN, |m, &v| m.max(v)),
        seconds: start.elapsed().as_secs_f64(),
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    write_nodal(&grid, &u_h, &out.join("fine_solution.txt"))?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(out.join("fine_solution.json"), text + "\n").map_err(|e| Error::io("writing fine_solution.json", e))?;
    Ok(summary)
}

/// Dumps the config's `κ` on the fine grid as `field.txt` (raster format).
pub fn field_preview_to(config: &StudyConfig, out: &Path) -> Result<BTreeMap<&'static str, f64>> {
    config.field.validate()?;
    let grid = FineGrid::new(config.fine)?;
    let field = config.field.build(&grid)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    field.write_raster(&out.join("field.txt"))?;
    Ok(BTreeMap::from([("min", field.min()), ("max", field.max()), ("contrast", field.contrast())]))
}

/// Whether an error stems from the input rather than from a solve.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidField(_) | Error::Raster { .. } | Error::Io { .. }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
        H = [0.25]
        fine = 16
        methods = ["wemsfem"]
        levels = [0]
        [field]
        constant = 1.0
    "#;

    #[test]
    fn smoke_study() {
        let config = StudyConfig::from_toml_str(SMOKE).unwrap();
        let report = run_study(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert!(row.error.is_none());
        assert!(row.e_l2.unwrap() >= 0.0 && row.e_h1.unwrap() >= 0.0);
        assert_eq!(row.lambda, None);
    }

    #[test]
    fn config_validation() {
        let bad = [
            SMOKE.replace("H = [0.25]", "H = [0.3]"),
            SMOKE.replace("fine = 16", "fine = 12"),
            SMOKE.replace("levels = [0]", "levels = []"),
            SMOKE.replace("constant = 1.0", "constant = 1.0\npreset = \"inclusions\""),
            SMOKE.replace("constant = 1.0", "preset = \"nope\""),
            SMOKE.replace("fine = 16", "fine = 16\nbogus = 1"),
            SMOKE.replace("[\"wemsfem\"]", "[\"fem\"]"),
        ];
        for text in bad {
            let err = StudyConfig::from_toml_str(&text).unwrap_err();
            assert!(is_config_error(&err), "{err}");
        }
    }

    #[test]
    fn hash_tracks_semantic_fields() {
        let a = StudyConfig::from_toml_str(SMOKE).unwrap();
        let mut b = a.clone();
        b.workers = Some(3);
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.levels = vec![1];
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.field.constant = Some(2.0);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn csv_shapes() {
        let config = StudyConfig::from_toml_str(SMOKE).unwrap();
        let mut report = run_study(&config).unwrap();
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        report.rows.clear();
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn lambda_only_on_spectral_rows() {
        let text = SMOKE.replace("[\"wemsfem\"]", "[\"wemsfem\", \"esmsfem\"]").replace("levels = [0]", "levels = [0]\nn_b = [2]");
        let report = run_study(&StudyConfig::from_toml_str(&text).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows[0][0], "wemsfem-haar");
        assert_eq!(rows[0][3], "");
        assert_eq!(rows[1][0], "esmsfem");
        assert!(rows[1][3].parse::<f64>().unwrap() > 0.0);
    }

    #[test]
    fn failing_rows_are_recorded() {
        // N_b beyond the boundary DOFs of a corner neighborhood
        let text = SMOKE.replace("[\"wemsfem\"]", "[\"esmsfem\", \"msfem\"]").replace("levels = [0]", "n_b = [50]");
        let report = run_study(&StudyConfig::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].error.is_some());
        assert!(report.rows[1].error.is_none());
        assert_eq!(report.failed_rows(), 1);
    }

    #[test]
    fn cached_reference_is_transparent() {
        let text = SMOKE.replace("constant = 1.0", "preset = \"inclusions\"");
        let config = StudyConfig::from_toml_str(&text).unwrap();
        let report = run_study(&config).unwrap();
        let grid = FineGrid::new(16).unwrap();
        let field = config.field.build(&grid).unwrap();
        let grids = build_grids(4, 4).unwrap();
        let u_h = fine_solve(&grid, &field, 1.0, config.tol).unwrap();
        let space = crate::spaces::build_wemsfem_space(&grids, &field, WaveletSpec::haar(0)).unwrap();
        let sol = coarse_solve(&grids, &space, &field, &vec![1.0; grid.num_nodes()]).unwrap();
        let r = error_report(&grids, &sol, &u_h, &field, 0.0).unwrap();
        assert_eq!(report.rows[0].e_h1, Some(r.e_h1));
        assert_eq!(report.rows[0].e_l2, Some(r.e_l2));
    }
}
