//! The sectioned `key = value` chart description format.
//!
//! ```text
//! dimension = 4
//! coordinates = x1, x2, y1, y2
//!
//! [metric]
//! kind = potential            # flat | potential | explicit
//! potential = x1*y1 + x2*y2 + x1^2*y1^2
//!
//! [structure]
//! kind = standard             # standard | explicit (F[i][j] = ...)
//!
//! [vector_field]
//! V[0] = x1
//! V[2] = -y1
//!
//! [soliton]
//! lambda = 1/4
//! p = -1
//!
//! [tensor_params]
//! alpha = 1
//! beta = 1
//!
//! [sampling]
//! kind = random               # list | random
//! count = 20
//! seed = 42
//! box = -0.3..0.3             # or one lo..hi per coordinate, comma-separated
//! ```
//!
//! Indices are 0-based; the upper triangle of `g[i][j]` suffices. Numeric
//! parameters accept constant expressions such as `-1/(4-2)`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{
    default_coordinates, BundleError, FieldBundle, Point, Requirements, SampleError, SamplePlan, SolitonParams,
    TensorParams,
};
use crate::exprlang::{parse, Expr, ParseError};

const DEFAULT_SAMPLE_COUNT: usize = 20;
const DEFAULT_BOX: (f64, f64) = (-0.3, 0.3);

const SECTIONS: [&str; 7] = [
    "",
    "metric",
    "structure",
    "vector_field",
    "soliton",
    "tensor_params",
    "sampling",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in {section}")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("line {line}: cannot parse `{key}`: {source}")]
    Expression {
        line: usize,
        key: String,
        source: ParseError,
    },
    #[error("dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Sampling(#[from] SampleError),
}

#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub bundle: FieldBundle,
    pub plan: SamplePlan,
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Document {
    sections: BTreeMap<String, Vec<Entry>>,
    present: Vec<String>,
}

impl Document {
    fn entries(&self, section: &str) -> &[Entry] {
        self.sections.get(section).map(Vec::as_slice).unwrap_or(&[])
    }

    fn has(&self, section: &str) -> bool {
        self.present.iter().any(|s| s == section)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries(section).iter().find(|e| e.key == key)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Comment-free, whitespace-trimmed, non-empty lines joined with `\n`.
pub fn canonicalize(text: &str) -> String {
    text.lines()
        .map(|l| strip_comment(l).trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn read_document(text: &str) -> Result<Document, SpecError> {
    let mut doc = Document::default();
    let mut section = String::new();
    doc.present.push(String::new());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| SpecError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if !SECTIONS[1..].contains(&name.as_str()) {
                return Err(SpecError::UnknownSection { line, name });
            }
            if doc.has(&name) {
                return Err(SpecError::Syntax {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            doc.present.push(name.clone());
            section = name;
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SpecError::Syntax {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key: String = key.chars().filter(|c| !c.is_whitespace()).collect();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(SpecError::Syntax {
                line,
                message: "empty key or value".into(),
            });
        }
        let entries = doc.sections.entry(section.clone()).or_default();
        if entries.iter().any(|e| e.key == key) {
            return Err(SpecError::Syntax {
                line,
                message: format!("`{key}` is given twice"),
            });
        }
        entries.push(Entry { key, value, line });
    }
    Ok(doc)
}

fn section_label(section: &str) -> String {
    if section.is_empty() {
        "top level".into()
    } else {
        format!("[{section}]")
    }
}

fn unknown(section: &str, entry: &Entry) -> SpecError {
    SpecError::UnknownKey {
        line: entry.line,
        section: section_label(section),
        key: entry.key.clone(),
    }
}

fn parse_expr(entry: &Entry) -> Result<Expr, SpecError> {
    parse(&entry.value).map_err(|source| SpecError::Expression {
        line: entry.line,
        key: entry.key.clone(),
        source,
    })
}

fn value_error(entry: &Entry, message: impl Into<String>) -> SpecError {
    SpecError::Value {
        line: entry.line,
        key: entry.key.clone(),
        message: message.into(),
    }
}

fn parse_real(entry: &Entry, text: &str) -> Result<f64, SpecError> {
    let expr = parse(text).map_err(|source| SpecError::Expression {
        line: entry.line,
        key: entry.key.clone(),
        source,
    })?;
    if !expr.is_constant() {
        return Err(value_error(entry, "expected a constant"));
    }
    expr.evaluate_constant().map_err(|e| value_error(entry, e.to_string()))
}

fn parse_unsigned<T: std::str::FromStr>(entry: &Entry) -> Result<T, SpecError> {
    entry
        .value
        .parse()
        .map_err(|_| value_error(entry, "expected a non-negative integer"))
}

/// `g[1][2]` with `prefix = "g"`, `arity = 2` gives `[1, 2]`.
fn indexed_key(key: &str, prefix: &str, arity: usize) -> Option<Vec<usize>> {
    let mut rest = key.strip_prefix(prefix)?;
    let mut out = Vec::with_capacity(arity);
    while let Some(r) = rest.strip_prefix('[') {
        let close = r.find(']')?;
        out.push(r[..close].trim().parse().ok()?);
        rest = &r[close + 1..];
    }
    (rest.is_empty() && out.len() == arity).then_some(out)
}

fn kind<'a>(doc: &'a Document, section: &str, default: &'a str) -> (&'a str, Option<&'a Entry>) {
    match doc.get(section, "kind") {
        Some(e) => (e.value.as_str(), Some(e)),
        None => (default, None),
    }
}

fn read_chart(doc: &Document) -> Result<Vec<String>, SpecError> {
    for e in doc.entries("") {
        if e.key != "dimension" && e.key != "coordinates" {
            return Err(unknown("", e));
        }
    }
    let dimension = doc.get("", "dimension").map(parse_unsigned::<usize>).transpose()?;
    let coordinates = doc.get("", "coordinates").map(|e| {
        e.value
            .split(',')
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>()
    });
    let n = match (dimension, &coordinates) {
        (Some(n), _) => n,
        (None, Some(c)) => c.len(),
        (None, None) => return Err(SpecError::Missing("dimension")),
    };
    if n % 2 != 0 {
        return Err(SpecError::OddDimension(n));
    }
    if n == 0 {
        return Err(BundleError::EmptyChart.into());
    }
    match coordinates {
        Some(c) if c.len() != n => Err(BundleError::CoordinateCount {
            expected: n,
            found: c.len(),
        }
        .into()),
        Some(c) => Ok(c),
        None => Ok(default_coordinates(n / 2)),
    }
}

fn read_indexed(
    doc: &Document,
    section: &str,
    prefix: &str,
) -> Result<Vec<((usize, usize), Expr)>, SpecError> {
    let mut out = Vec::new();
    for e in doc.entries(section) {
        if e.key == "kind" {
            continue;
        }
        let idx = indexed_key(&e.key, prefix, 2).ok_or_else(|| unknown(section, e))?;
        out.push(((idx[0], idx[1]), parse_expr(e)?));
    }
    Ok(out)
}

fn read_bundle(doc: &Document, coordinates: Vec<String>) -> Result<FieldBundle, SpecError> {
    let n = coordinates.len();
    let (metric_kind, kind_entry) = kind(doc, "metric", "flat");
    let mut bundle = match metric_kind {
        "flat" => {
            if let Some(e) = doc.entries("metric").iter().find(|e| e.key != "kind") {
                return Err(unknown("metric", e));
            }
            FieldBundle::flat_with_coordinates(coordinates)?
        }
        "potential" => {
            if let Some(e) = doc
                .entries("metric")
                .iter()
                .find(|e| e.key != "kind" && e.key != "potential")
            {
                return Err(unknown("metric", e));
            }
            let entry = doc.get("metric", "potential").ok_or(SpecError::Missing("potential"))?;
            FieldBundle::from_potential_with_coordinates(coordinates, parse_expr(entry)?)?
        }
        "explicit" => {
            let entries = read_indexed(doc, "metric", "g")?;
            FieldBundle::explicit(coordinates, entries, super::standard_structure(n))?
        }
        other => {
            return Err(value_error(
                kind_entry.expect("non-default kind has an entry"),
                format!("unknown metric kind `{other}`"),
            ))
        }
    };

    let (structure_kind, kind_entry) = kind(doc, "structure", "standard");
    match structure_kind {
        "standard" => {
            if let Some(e) = doc.entries("structure").iter().find(|e| e.key != "kind") {
                return Err(unknown("structure", e));
            }
        }
        "explicit" => {
            bundle = bundle.with_structure(read_indexed(doc, "structure", "F")?)?;
        }
        other => {
            return Err(value_error(
                kind_entry.expect("non-default kind has an entry"),
                format!("unknown structure kind `{other}`"),
            ))
        }
    }

    if doc.has("vector_field") {
        let mut components: Vec<Option<Expr>> = vec![None; n];
        for e in doc.entries("vector_field") {
            let idx = indexed_key(&e.key, "V", 1).ok_or_else(|| unknown("vector_field", e))?;
            let slot = components
                .get_mut(idx[0])
                .ok_or_else(|| value_error(e, format!("index out of range for dimension {n}")))?;
            *slot = Some(parse_expr(e)?);
        }
        let components = components
            .into_iter()
            .map(|c| c.unwrap_or_else(|| Expr::number(0.0)))
            .collect();
        bundle = bundle.with_vector_field(components)?;
    }

    let mut soliton = SolitonParams::default();
    for e in doc.entries("soliton") {
        match e.key.as_str() {
            "lambda" => soliton.lambda = parse_real(e, &e.value)?,
            "p" => soliton.p = parse_real(e, &e.value)?,
            _ => return Err(unknown("soliton", e)),
        }
    }

    let mut params = TensorParams::defaults(n);
    for e in doc.entries("tensor_params") {
        let v = parse_real(e, &e.value)?;
        match e.key.as_str() {
            "alpha" => params.alpha = v,
            "beta" => params.beta = v,
            "a" => params.a = v,
            "b" => params.b = v,
            _ => return Err(unknown("tensor_params", e)),
        }
    }
    Ok(bundle.with_soliton(soliton).with_tensor_params(params))
}

fn parse_interval(entry: &Entry, text: &str) -> Result<(f64, f64), SpecError> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| value_error(entry, format!("expected `lo..hi`, found `{text}`")))?;
    Ok((parse_real(entry, lo.trim())?, parse_real(entry, hi.trim())?))
}

fn read_plan(doc: &Document, n: usize) -> Result<SamplePlan, SpecError> {
    let (plan_kind, kind_entry) = kind(doc, "sampling", "random");
    let allowed: &[&str] = match plan_kind {
        "list" => &["kind", "points"],
        "random" => &["kind", "count", "seed", "box"],
        other => {
            return Err(value_error(
                kind_entry.expect("non-default kind has an entry"),
                format!("unknown sampling kind `{other}`"),
            ))
        }
    };
    if let Some(e) = doc
        .entries("sampling")
        .iter()
        .find(|e| !allowed.contains(&e.key.as_str()))
    {
        return Err(unknown("sampling", e));
    }
    let plan = if plan_kind == "list" {
        let entry = doc.get("sampling", "points").ok_or(SpecError::Missing("points"))?;
        let mut points = Vec::new();
        for chunk in entry.value.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let inner = chunk
                .strip_prefix('(')
                .and_then(|c| c.strip_suffix(')'))
                .ok_or_else(|| value_error(entry, format!("expected `(c1, c2, ...)`, found `{chunk}`")))?;
            let coords = inner
                .split(',')
                .map(|c| parse_real(entry, c.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            points.push(Point::new(coords));
        }
        SamplePlan::List(points)
    } else {
        let count = match doc.get("sampling", "count") {
            Some(e) => parse_unsigned(e)?,
            None => DEFAULT_SAMPLE_COUNT,
        };
        let seed = match doc.get("sampling", "seed") {
            Some(e) => parse_unsigned(e)?,
            None => 0,
        };
        let (low, high) = match doc.get("sampling", "box") {
            None => (vec![DEFAULT_BOX.0; n], vec![DEFAULT_BOX.1; n]),
            Some(e) => {
                let intervals = e
                    .value
                    .split(',')
                    .map(|part| parse_interval(e, part.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                match intervals.len() {
                    1 => (vec![intervals[0].0; n], vec![intervals[0].1; n]),
                    k if k == n => intervals.into_iter().unzip(),
                    k => return Err(SampleError::BoxLength { found: k, expected: n }.into()),
                }
            }
        };
        SamplePlan::RandomBox { count, low, high, seed }
    };
    super::sample_points(&plan, n)?;
    Ok(plan)
}

/// Loads a chart description, validating it for every computation.
pub fn load_spec(text: &str) -> Result<LoadedSpec, SpecError> {
    load_spec_for(text, &Requirements::ALL)
}

/// Loads a chart description, validating only what `req` asks for.
pub fn load_spec_for(text: &str, req: &Requirements) -> Result<LoadedSpec, SpecError> {
    let doc = read_document(text)?;
    let coordinates = read_chart(&doc)?;
    let n = coordinates.len();
    let bundle = read_bundle(&doc, coordinates)?;
    bundle.validate(req)?;
    let plan = read_plan(&doc, n)?;
    Ok(LoadedSpec { bundle, plan })
}
