//! The `tvb` command line: point reports, grid sweeps, Bochner-flat audits
//! and the catalog listing, for catalog models or manifold files.
//!
//! Exit codes: 0 success; 1 usage error, unknown catalog name, I/O or other
//! runtime failure; 2 point or grid outside the domain (or inside the grid
//! margin); 3 parse error in an expression, point, grid or manifold file,
//! or a manifold file that fails its load-time check; 4 audit refused
//! (data not Bochner-flat) or audit with failed checks.

pub mod format;
pub mod manifold;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tvb_core::catalog::{self, CatalogEntry, ClaimOutcome, Model, Params};
use tvb_core::classify::{self, AuditReport, ClassificationReport, GridSpec, GridSummary};
use tvb_core::expr;
use tvb_core::geometry::{self, Chart, CurvatureData, StructureResiduals};
use tvb_core::tensor::Tensor;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "tvb", version, about = "Curvature reports for almost Hermitian charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one point.
    Report(ReportArgs),
    /// Classify every point of a grid.
    Sweep(GridArgs),
    /// Check the consequences of Bochner-flatness over a grid.
    Audit(GridArgs),
    /// List the catalog models with their expected properties.
    List(ListArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Curvature K > 0 of the first factor of example2.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub k: f64,
    /// Function u of example4, the real part of a holomorphic f.
    #[arg(long, default_value = "x1", allow_hyphen_values = true)]
    pub u: String,
    /// Holomorphic sectional curvature of csf2 and csf3.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub c: f64,
}

impl CatalogArgs {
    fn params(&self) -> Params {
        Params { k: self.k, u: self.u.clone(), c: self.c }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Catalog name or path to a manifold file.
    #[arg(long)]
    pub manifold: String,
    /// Tolerance for the vanishing predicates.
    #[arg(long, env = "TVB_TOL", default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the document here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated coordinates; constant expressions such as pi/2 are
    /// accepted. Defaults to the model's sample point.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Include g, J, R, ρ and ρ* in the JSON document.
    #[arg(long)]
    pub tensors: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `min:max:count` per coordinate, comma separated. Catalog charts
    /// default to their suggested grid.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Required distance of grid points from the domain boundary.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tvb_core::Error),
    #[error(transparent)]
    Manifold(#[from] manifold::ManifoldError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("audit refused: {0}")]
    AuditRefused(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(tvb_core::Error::OutOfDomain { .. }) => 2,
            CliError::Core(tvb_core::Error::Parse(_)) => 3,
            CliError::Core(_) => 1,
            CliError::Manifold(_) | CliError::Input(_) => 3,
            CliError::AuditRefused(_) => 4,
            CliError::Usage(_) | CliError::Io(_) => 1,
        }
    }
}

/// What a command produced: the document and the exit code to finish with.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub document: String,
    pub code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawTensors {
    pub g: Tensor,
    pub j: Tensor,
    pub riemann: Tensor,
    pub ricci: Tensor,
    pub ricci_star: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: String,
    pub manifold: String,
    /// `chart` or `algebraic`
    pub model: String,
    pub coords: Vec<String>,
    pub tol: f64,
    pub report: ClassificationReport,
    pub structure: Option<StructureResiduals>,
    /// Expected properties of a catalog model, checked at this point.
    pub claims: Vec<ClaimOutcome>,
    pub tensors: Option<RawTensors>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepDocument {
    pub schema_version: u32,
    pub command: String,
    pub manifold: String,
    pub coords: Vec<String>,
    pub tol: f64,
    pub margin: f64,
    pub grid: String,
    pub summary: GridSummary,
    pub reports: Vec<ClassificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditDocument {
    pub schema_version: u32,
    pub command: String,
    pub manifold: String,
    pub tol: f64,
    pub margin: f64,
    pub grid: String,
    pub passed: bool,
    pub audit: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ListEntry {
    pub name: String,
    pub title: String,
    pub source: String,
    pub model: String,
    pub coords: Vec<String>,
    pub domain: Option<String>,
    pub grid: Option<String>,
    pub sample_point: Vec<f64>,
    pub claims: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ListDocument {
    pub schema_version: u32,
    pub command: String,
    pub entries: Vec<ListEntry>,
}

/// A resolved `--manifold` argument.
enum Source {
    Catalog(Box<CatalogEntry>),
    File(manifold::LoadedManifold),
}

impl Source {
    fn name(&self) -> &str {
        match self {
            Source::Catalog(e) => &e.name,
            Source::File(m) => m.chart.name(),
        }
    }

    fn chart(&self) -> Option<&Chart> {
        match self {
            Source::Catalog(e) => e.chart(),
            Source::File(m) => Some(&m.chart),
        }
    }

    fn coords(&self) -> Vec<String> {
        self.chart().map(|c| c.coords().to_vec()).unwrap_or_default()
    }
}

fn resolve(name: &str, catalog_args: &CatalogArgs) -> Result<Source, CliError> {
    if catalog::NAMES.contains(&name) {
        return Ok(Source::Catalog(Box::new(catalog::entry(name, &catalog_args.params())?)));
    }
    let path = Path::new(name);
    if path.is_file() {
        return Ok(Source::File(manifold::load(path)?));
    }
    Err(CliError::Usage(format!(
        "`{name}` is neither a catalog name ({}) nor a readable manifold file",
        catalog::NAMES.join(", ")
    )))
}

fn constant(text: &str, what: &str) -> Result<f64, CliError> {
    let none: [&str; 0] = [];
    let e = expr::parse(text.trim(), &none).map_err(|e| CliError::Input(format!("{what} `{}`: {e}", text.trim())))?;
    e.eval(&[]).map_err(|e| CliError::Input(format!("{what} `{}`: {e}", text.trim())))
}

pub fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let p = text
        .split(',')
        .map(|s| constant(s, "coordinate"))
        .collect::<Result<Vec<f64>, CliError>>()?;
    if p.len() != dim {
        return Err(CliError::Input(format!("point has {} coordinates, the chart has {dim}", p.len())));
    }
    Ok(p)
}

pub fn grid_text(grid: &GridSpec) -> String {
    grid.axes
        .iter()
        .map(|a| format!("{}:{}:{}", a.min, a.max, a.count))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_grid(text: &str) -> Result<GridSpec, CliError> {
    GridSpec::parse(text).map_err(|e| CliError::Input(format!("grid `{text}`: {e}")))
}

fn json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--tol must be positive, got {tol}")))
    }
}

pub fn report(args: &ReportArgs) -> Result<Output, CliError> {
    let c = &args.common;
    check_tol(c.tol)?;
    let source = resolve(&c.manifold, &c.catalog)?;
    let (cd, structure): (CurvatureData, Option<StructureResiduals>) = match (&source, source.chart()) {
        (_, Some(chart)) => {
            let point = match (&args.point, &source) {
                (Some(text), _) => parse_point(text, chart.dim())?,
                (None, Source::Catalog(e)) => e.sample_point.clone(),
                (None, Source::File(m)) => m.probe.clone(),
            };
            chart.check_point(&point)?;
            (geometry::curvature_data(chart, &point)?, Some(geometry::structure_residuals(chart, &point)?))
        }
        (Source::Catalog(e), None) => {
            if args.point.is_some() {
                return Err(CliError::Usage(format!("`{}` is an algebraic model and takes no --point", e.name)));
            }
            match &e.model {
                Model::Algebraic(cd) => (cd.clone(), None),
                Model::Chart(_) => unreachable!("charts are handled above"),
            }
        }
        (Source::File(_), None) => unreachable!("files always give charts"),
    };
    let report = classify::classify_curvature(&cd, structure, c.tol)?;
    let claims = match &source {
        Source::Catalog(e) => e.check_claims(&report),
        Source::File(_) => Vec::new(),
    };
    let document = match c.format {
        Format::Json => {
            let doc = ReportDocument {
                schema_version: SCHEMA_VERSION,
                command: "report".into(),
                manifold: source.name().to_string(),
                model: if source.chart().is_some() { "chart" } else { "algebraic" }.into(),
                coords: source.coords(),
                tol: c.tol,
                report,
                structure,
                claims,
                tensors: args.tensors.then(|| RawTensors {
                    g: cd.g.clone(),
                    j: cd.j.clone(),
                    riemann: cd.riemann.clone(),
                    ricci: cd.ricci.clone(),
                    ricci_star: cd.ricci_star.clone(),
                }),
            };
            json(&doc)
        }
        Format::Text => {
            let mut s = format::report_text(source.name(), c.tol, &report);
            if !claims.is_empty() {
                s.push('\n');
                for o in &claims {
                    s.push_str(&format!("{} {}: {}\n", if o.passed { "ok  " } else { "FAIL" }, o.claim, o.detail));
                }
            }
            s
        }
        Format::Csv => format::csv_document(std::slice::from_ref(&report)).map_err(|e| CliError::Io(e.to_string()))?,
    };
    Ok(Output { document, code: 0 })
}

fn grid_for(args: &GridArgs, source: &Source) -> Result<(GridSpec, String), CliError> {
    match (&args.grid, source) {
        (Some(text), _) => Ok((parse_grid(text)?, text.trim().to_string())),
        (None, Source::Catalog(e)) => match &e.grid {
            Some(g) => Ok((g.clone(), grid_text(g))),
            None => Err(CliError::Usage(format!("`{}` has no suggested grid; pass --grid", e.name))),
        },
        (None, Source::File(_)) => Err(CliError::Usage("manifold files need --grid".into())),
    }
}

fn check_margin(margin: f64) -> Result<(), CliError> {
    if margin.is_finite() && margin >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--margin must be non-negative, got {margin}")))
    }
}

pub fn sweep(args: &GridArgs) -> Result<Output, CliError> {
    let c = &args.common;
    check_tol(c.tol)?;
    check_margin(args.margin)?;
    let source = resolve(&c.manifold, &c.catalog)?;
    let chart = source
        .chart()
        .ok_or_else(|| CliError::Usage(format!("`{}` is an algebraic model; use `report`", source.name())))?;
    let (grid, grid_str) = grid_for(args, &source)?;
    let result = classify::classify_grid(chart, &grid, c.tol, args.margin)?;
    let document = match c.format {
        Format::Json => json(&SweepDocument {
            schema_version: SCHEMA_VERSION,
            command: "sweep".into(),
            manifold: source.name().to_string(),
            coords: source.coords(),
            tol: c.tol,
            margin: args.margin,
            grid: grid_str,
            summary: result.summary,
            reports: result.reports,
        }),
        Format::Text => format::summary_text(source.name(), &grid_str, c.tol, &result.summary),
        Format::Csv => format::csv_document(&result.reports).map_err(|e| CliError::Io(e.to_string()))?,
    };
    Ok(Output { document, code: 0 })
}

fn refusal(e: tvb_core::Error) -> CliError {
    match e {
        tvb_core::Error::ContractViolation(msg) => CliError::AuditRefused(msg),
        other => CliError::Core(other),
    }
}

pub fn audit(args: &GridArgs) -> Result<Output, CliError> {
    let c = &args.common;
    check_tol(c.tol)?;
    check_margin(args.margin)?;
    if c.format == Format::Csv {
        return Err(CliError::Usage("audit supports --format json or text".into()));
    }
    let source = resolve(&c.manifold, &c.catalog)?;
    let (audit, grid_str) = match (&source, source.chart()) {
        (_, Some(chart)) => {
            let (grid, grid_str) = grid_for(args, &source)?;
            (classify::theorem_audit(chart, &grid, c.tol, args.margin).map_err(refusal)?, grid_str)
        }
        (Source::Catalog(e), None) => {
            if args.grid.is_some() {
                return Err(CliError::Usage(format!("`{}` is an algebraic model and takes no --grid", e.name)));
            }
            let Model::Algebraic(cd) = &e.model else { unreachable!("charts are handled above") };
            let r = classify::classify_algebraic(cd, c.tol)?;
            let a = classify::audit_curvature(&e.name, &[(cd.clone(), r)], c.tol).map_err(refusal)?;
            (a, String::new())
        }
        (Source::File(_), None) => unreachable!("files always give charts"),
    };
    let passed = audit.passed();
    let document = match c.format {
        Format::Text => format::audit_text(&grid_str, c.tol, &audit),
        _ => json(&AuditDocument {
            schema_version: SCHEMA_VERSION,
            command: "audit".into(),
            manifold: source.name().to_string(),
            tol: c.tol,
            margin: args.margin,
            grid: grid_str,
            passed,
            audit,
        }),
    };
    Ok(Output { document, code: if passed { 0 } else { 4 } })
}

pub fn list(args: &ListArgs) -> Result<Output, CliError> {
    let entries = catalog::all(&args.catalog.params())?;
    let listed: Vec<ListEntry> = entries
        .iter()
        .map(|e| ListEntry {
            name: e.name.clone(),
            title: e.title.clone(),
            source: e.source.clone(),
            model: if e.chart().is_some() { "chart" } else { "algebraic" }.into(),
            coords: e.chart().map(|c| c.coords().to_vec()).unwrap_or_default(),
            domain: e.chart().map(|c| c.domain().to_string()),
            grid: e.grid.as_ref().map(grid_text),
            sample_point: e.sample_point.clone(),
            claims: e.claims.iter().map(|c| c.describe()).collect(),
        })
        .collect();
    let document = match args.format {
        Format::Json => json(&ListDocument { schema_version: SCHEMA_VERSION, command: "list".into(), entries: listed }),
        Format::Text => {
            let mut s = String::new();
            for e in &listed {
                s.push_str(&format!("{} ({}): {}\n", e.name, e.model, e.title));
                s.push_str(&format!("  source: {}\n", e.source));
                if let Some(d) = &e.domain {
                    s.push_str(&format!("  domain: {d}\n"));
                }
                if let Some(g) = &e.grid {
                    s.push_str(&format!("  grid:   {g}\n"));
                }
                s.push_str(&format!("  claims: {}\n", e.claims.join("; ")));
            }
            s
        }
        Format::Csv => return Err(CliError::Usage("list supports --format json or text".into())),
    };
    Ok(Output { document, code: 0 })
}

fn dispatch(command: &Command) -> Result<Output, CliError> {
    match command {
        Command::Report(a) => report(a),
        Command::Sweep(a) => sweep(a),
        Command::Audit(a) => audit(a),
        Command::List(a) => list(a),
    }
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Report(a) => a.common.out.as_deref(),
        Command::Sweep(a) | Command::Audit(a) => a.common.out.as_deref(),
        Command::List(a) => a.out.as_deref(),
    }
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::Report(a) => a.common.threads,
        Command::Sweep(a) | Command::Audit(a) => a.common.threads,
        Command::List(_) => None,
    }
}

/// Run a parsed command line. With `--out` the document goes to the file
/// and the returned document is empty.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let output = match threads(&cli.command) {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(format!("cannot start {n} worker threads: {e}")))?
            .install(|| dispatch(&cli.command))?,
        None => dispatch(&cli.command)?,
    };
    match out_path(&cli.command) {
        Some(path) => {
            std::fs::write(path, &output.document)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            Ok(Output { document: String::new(), code: output.code })
        }
        None => Ok(output),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tvb").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn points_accept_constant_expressions() {
        assert_eq!(parse_point("1, -2, pi/2, 0", 4).unwrap()[2], std::f64::consts::FRAC_PI_2);
        assert_eq!(parse_point("1,2", 4).unwrap_err().exit_code(), 3);
        assert_eq!(parse_point("1,x,0,0", 4).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let domain = tvb_core::Error::OutOfDomain { point: vec![], condition: "x > 0".into() };
        assert_eq!(CliError::Core(domain).exit_code(), 2);
        assert_eq!(CliError::AuditRefused("x".into()).exit_code(), 4);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(tvb_core::Error::EmptyGrid).exit_code(), 1);
    }

    #[test]
    fn report_defaults_to_the_sample_point() {
        let out = run(&cli(&["report", "--manifold", "example3"])).unwrap();
        let doc: ReportDocument = serde_json::from_str(&out.document).unwrap();
        assert_eq!(doc.report.point, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(doc.claims.iter().all(|c| c.passed));
    }

    #[test]
    fn algebraic_models_reject_points_and_sweeps() {
        assert_eq!(run(&cli(&["report", "--manifold", "csf2", "--point", "0,0,0,0"])).unwrap_err().exit_code(), 1);
        assert_eq!(run(&cli(&["sweep", "--manifold", "csf3"])).unwrap_err().exit_code(), 1);
        let out = run(&cli(&["report", "--manifold", "csf3", "--c", "-2"])).unwrap();
        let doc: ReportDocument = serde_json::from_str(&out.document).unwrap();
        assert_eq!(doc.model, "algebraic");
        assert!((doc.report.tau + 24.0).abs() < 1e-12);
    }

    #[test]
    fn grid_text_round_trips() {
        let g = GridSpec::parse("0.5:2:3,-1:1:3").unwrap();
        assert_eq!(grid_text(&g), "0.5:2:3,-1:1:3");
        assert_eq!(GridSpec::parse(&grid_text(&g)).unwrap(), g);
    }
}
