//! Plain-text manifold files.
//!
//! ```text
//! # comments run to the end of the line
//! name = "half-space"          optional, defaults to the file stem
//! dim = 4                      required, even
//! coords = x1, x2, x3, x4      optional, defaults to x1 .. x<dim>
//! domain = "x4 > 0"            optional, defaults to everywhere
//! probe = 0, 0, 0, 1           optional load-time check point
//! g[1][1] = "1/x4^2"           metric components, 1-based indices
//! J[2][1] = "1"                J^i_j components, row i, column j
//! ```
//!
//! Values may be double-quoted; unquoted values run to the end of the line.
//! A missing `g[i][j]` mirrors `g[j][i]` when that is given and is zero
//! otherwise; a missing `J[i][j]` is zero. Without `probe` the first of the
//! all-ones, all-zeros and all-halves points that lies in the domain is
//! used to check that g is positive definite and J compatible with it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use tvb_core::expr;
use tvb_core::geometry::{Chart, ChartSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldError {
    pub line: Option<usize>,
    pub message: String,
}

impl ManifoldError {
    fn at(line: usize, message: impl Into<String>) -> ManifoldError {
        ManifoldError { line: Some(line), message: message.into() }
    }

    fn whole(message: impl Into<String>) -> ManifoldError {
        ManifoldError { line: None, message: message.into() }
    }
}

impl fmt::Display for ManifoldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "manifold file line {l}: {}", self.message),
            None => write!(f, "manifold file: {}", self.message),
        }
    }
}

impl std::error::Error for ManifoldError {}

/// A parsed file before validation.
#[derive(Debug, Clone)]
pub struct ManifoldFile {
    pub spec: ChartSpec,
    pub probe: Option<Vec<f64>>,
}

/// A validated chart and the point it was checked at.
#[derive(Debug, Clone)]
pub struct LoadedManifold {
    pub chart: Chart,
    pub probe: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Table {
    Metric,
    J,
}

struct Entry {
    line: usize,
    text: String,
}

/// Strip a trailing comment that is not inside a quoted value.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(value: &str, line: usize) -> Result<String, ManifoldError> {
    let v = value.trim();
    if let Some(rest) = v.strip_prefix('"') {
        let inner = rest
            .strip_suffix('"')
            .ok_or_else(|| ManifoldError::at(line, "unterminated quoted value"))?;
        if inner.contains('"') {
            return Err(ManifoldError::at(line, "stray quote inside value"));
        }
        Ok(inner.to_string())
    } else {
        Ok(v.to_string())
    }
}

/// `g[i][j]` / `J[i][j]` keys, returned 1-based.
fn component_key(key: &str) -> Option<(Table, String, String)> {
    let (table, rest) = if let Some(r) = key.strip_prefix('g') {
        (Table::Metric, r)
    } else if let Some(r) = key.strip_prefix('J') {
        (Table::J, r)
    } else {
        return None;
    };
    let rest = rest.trim_start().strip_prefix('[')?;
    let (i, rest) = rest.split_once(']')?;
    let rest = rest.trim_start().strip_prefix('[')?;
    let (j, rest) = rest.split_once(']')?;
    if !rest.trim().is_empty() {
        return None;
    }
    Some((table, i.trim().to_string(), j.trim().to_string()))
}

fn number_list(text: &str, line: usize) -> Result<Vec<f64>, ManifoldError> {
    let none: [&str; 0] = [];
    text.split(',')
        .map(|part| {
            let e = expr::parse(part.trim(), &none).map_err(|e| ManifoldError::at(line, format!("`{}`: {e}", part.trim())))?;
            e.eval(&[]).map_err(|e| ManifoldError::at(line, format!("`{}`: {e}", part.trim())))
        })
        .collect()
}

pub fn parse(text: &str, default_name: &str) -> Result<ManifoldFile, ManifoldError> {
    let mut name = None;
    let mut dim: Option<(usize, usize)> = None;
    let mut coords: Option<(Vec<String>, usize)> = None;
    let mut domain: Option<(String, usize)> = None;
    let mut probe: Option<(String, usize)> = None;
    let mut components: BTreeMap<(Table, usize, usize), Entry> = BTreeMap::new();
    let mut raw_components = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ManifoldError::at(line, format!("expected `key = value`, found `{body}`")))?;
        let key = key.trim();
        let value = unquote(value, line)?;
        let once = |seen: bool, what: &str| -> Result<(), ManifoldError> {
            if seen {
                Err(ManifoldError::at(line, format!("`{what}` given twice")))
            } else {
                Ok(())
            }
        };
        match key {
            "name" => {
                once(name.is_some(), "name")?;
                name = Some(value);
            }
            "dim" => {
                once(dim.is_some(), "dim")?;
                let d: usize = value
                    .parse()
                    .map_err(|_| ManifoldError::at(line, format!("dim `{value}` is not a positive integer")))?;
                if d == 0 || d % 2 != 0 {
                    return Err(ManifoldError::at(line, format!("dim must be even and positive, got {d}")));
                }
                dim = Some((d, line));
            }
            "coords" => {
                once(coords.is_some(), "coords")?;
                let names: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
                for n in &names {
                    let ok = n.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                        && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                    if !ok || n == "pi" || n == "e" {
                        return Err(ManifoldError::at(line, format!("`{n}` is not a usable coordinate name")));
                    }
                }
                coords = Some((names, line));
            }
            "domain" => {
                once(domain.is_some(), "domain")?;
                domain = Some((value, line));
            }
            "probe" => {
                once(probe.is_some(), "probe")?;
                probe = Some((value, line));
            }
            _ => match component_key(key) {
                Some(c) => raw_components.push((c, value, line)),
                None => return Err(ManifoldError::at(line, format!("unknown key `{key}`"))),
            },
        }
    }

    let (d, _) = dim.ok_or_else(|| ManifoldError::whole("missing `dim = <even integer>`"))?;
    let coords = match coords {
        Some((names, line)) => {
            if names.len() != d {
                return Err(ManifoldError::at(line, format!("{} coordinate names for dim = {d}", names.len())));
            }
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(ManifoldError::at(line, "coordinate names must be distinct"));
            }
            names
        }
        None => (1..=d).map(|i| format!("x{i}")).collect(),
    };

    for ((table, i, j), value, line) in raw_components {
        let index = |s: &str| -> Result<usize, ManifoldError> {
            match s.parse::<usize>() {
                Ok(k) if (1..=d).contains(&k) => Ok(k - 1),
                _ => Err(ManifoldError::at(line, format!("index `{s}` is not in 1..={d}"))),
            }
        };
        let key = (table, index(&i)?, index(&j)?);
        if components.insert(key, Entry { line, text: value }).is_some() {
            return Err(ManifoldError::at(line, "component given twice"));
        }
    }

    let mut metric = vec![vec![String::new(); d]; d];
    let mut j_table = vec![vec![String::new(); d]; d];
    for i in 0..d {
        for k in 0..d {
            metric[i][k] = match (components.get(&(Table::Metric, i, k)), components.get(&(Table::Metric, k, i))) {
                (Some(e), _) | (None, Some(e)) => e.text.clone(),
                (None, None) => "0".into(),
            };
            j_table[i][k] = components.get(&(Table::J, i, k)).map_or_else(|| "0".into(), |e| e.text.clone());
        }
    }
    // Parse each component on its own so errors carry the right line.
    for ((table, i, k), e) in &components {
        expr::parse(&e.text, &coords).map_err(|err| {
            let t = if *table == Table::Metric { "g" } else { "J" };
            ManifoldError::at(e.line, format!("{t}[{}][{}]: {err}", i + 1, k + 1))
        })?;
    }
    let domain_text = domain.as_ref().map_or("", |(s, _)| s.as_str());
    if let Some((s, line)) = &domain {
        tvb_core::domain::Domain::parse(s, &coords).map_err(|e| ManifoldError::at(*line, format!("domain: {e}")))?;
    }
    let name = name.unwrap_or_else(|| default_name.to_string());
    let spec = ChartSpec::from_text(&name, &coords, domain_text, &metric, &j_table)
        .map_err(|e| ManifoldError::whole(e.to_string()))?;
    let probe = match probe {
        Some((text, line)) => {
            let p = number_list(&text, line)?;
            if p.len() != d {
                return Err(ManifoldError::at(line, format!("probe has {} coordinates, dim = {d}", p.len())));
            }
            Some(p)
        }
        None => None,
    };
    Ok(ManifoldFile { spec, probe })
}

/// Build the chart and check the almost Hermitian conditions at the probe.
pub fn validate(file: ManifoldFile) -> Result<LoadedManifold, ManifoldError> {
    let chart = Chart::new(file.spec).map_err(|e| ManifoldError::whole(e.to_string()))?;
    let d = chart.dim();
    let probe = match file.probe {
        Some(p) => p,
        None => [1.0, 0.0, 0.5]
            .iter()
            .map(|&v| vec![v; d])
            .find(|p| chart.domain().contains(p))
            .ok_or_else(|| {
                ManifoldError::whole("none of the default probe points lies in the domain; add `probe = ...`")
            })?,
    };
    chart
        .structure_at(&probe)
        .map_err(|e| ManifoldError::whole(format!("check at probe point {probe:?} failed: {e}")))?;
    Ok(LoadedManifold { chart, probe })
}

pub fn load(path: &Path) -> Result<LoadedManifold, ManifoldError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ManifoldError::whole(format!("cannot read {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("manifold");
    validate(parse(&text, stem)?)
}
