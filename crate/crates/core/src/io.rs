//! CSV and JSON formats.
//!
//! Every CSV file starts with `# schema: <name>/v<N>`, followed by a
//! `# meta: <json>` line carrying whatever is needed to reload it, then a
//! header row. Floats are written with Rust's shortest round-trip formatting,
//! so equal values always produce equal bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{BoundCurve, BoundPoint, BoundSource, CurveParams};
use crate::error::{Error, Result};
use crate::math::GkMetadata;
use crate::montecarlo::{KEstimate, MonteCarloSummary, VerificationReport};
use crate::ngram::NgramRecord;

pub const SUMMARY_SCHEMA: &str = "collapse-summary/v1";
pub const BOUNDS_SCHEMA: &str = "collapse-bounds/v1";
pub const VERIFY_SCHEMA: &str = "collapse-verify/v1";
pub const NGRAM_SCHEMA: &str = "collapse-ngram/v1";
pub const GMM_COMPARE_SCHEMA: &str = "collapse-gmm-compare/v1";
pub const SERIES_SCHEMA: &str = "collapse-series/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

/// A schema-tagged CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub meta: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, meta: Value, header: &[&str]) -> Table {
        Table {
            schema: schema.to_string(),
            meta,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {}", self.schema);
        let _ = writeln!(out, "# meta: {}", self.meta);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let schema = lines
            .next()
            .and_then(|l| l.strip_prefix("# schema:"))
            .ok_or_else(|| Error::Parse("missing '# schema:' line".into()))?
            .trim()
            .to_string();
        let meta_line = lines
            .next()
            .and_then(|l| l.strip_prefix("# meta:"))
            .ok_or_else(|| Error::Parse("missing '# meta:' line".into()))?;
        let meta: Value = serde_json::from_str(meta_line.trim())?;
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header row".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { schema, meta, header, rows })
    }

    fn expect_schema(&self, schema: &str) -> Result<()> {
        if self.schema == schema {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected schema {schema}, found {}", self.schema)))
        }
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("cannot parse {what} from {s:?}")))
}

fn with_schema<T: Serialize>(schema: &str, body: &T) -> Result<String> {
    let mut v = serde_json::to_value(body)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), Value::String(schema.into()));
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn strip_schema(text: &str, schema: &str) -> Result<Value> {
    let mut v: Value = serde_json::from_str(text)?;
    match v.as_object_mut().and_then(|m| m.remove("schema")) {
        Some(Value::String(s)) if s == schema => Ok(v),
        Some(other) => Err(Error::Parse(format!("expected schema {schema}, found {other}"))),
        None => Err(Error::Parse("missing schema field".into())),
    }
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

#[derive(Serialize, Deserialize)]
struct SummaryMeta {
    spec: crate::processes::ProcessSpec,
    query: crate::montecarlo::EventQuery,
    trials: u64,
    master_seed: u64,
    z: f64,
}

pub fn summary_to_string(s: &MonteCarloSummary, format: Format) -> Result<String> {
    match format {
        Format::Json => with_schema(SUMMARY_SCHEMA, s),
        Format::Csv => {
            let meta = serde_json::to_value(SummaryMeta {
                spec: s.spec.clone(),
                query: s.query.clone(),
                trials: s.trials,
                master_seed: s.master_seed,
                z: s.z,
            })?;
            let mut t = Table::new(SUMMARY_SCHEMA, meta, &["k", "value", "std_error", "half_width"]);
            for e in &s.per_k {
                t.push(vec![e.k.to_string(), e.value.to_string(), e.std_error.to_string(), e.half_width.to_string()]);
            }
            Ok(t.to_csv())
        }
    }
}

/// Reads a summary written by [`summary_to_string`] in either format.
pub fn summary_from_str(text: &str) -> Result<MonteCarloSummary> {
    if is_json(text) {
        return Ok(serde_json::from_value(strip_schema(text, SUMMARY_SCHEMA)?)?);
    }
    let t = Table::parse(text)?;
    t.expect_schema(SUMMARY_SCHEMA)?;
    let meta: SummaryMeta = serde_json::from_value(t.meta.clone())?;
    let (ck, cv, cs, ch) = (t.column("k")?, t.column("value")?, t.column("std_error")?, t.column("half_width")?);
    let per_k = t
        .rows
        .iter()
        .map(|r| {
            Ok(KEstimate {
                k: num(&r[ck], "k")?,
                value: num(&r[cv], "value")?,
                std_error: num(&r[cs], "std_error")?,
                half_width: num(&r[ch], "half_width")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloSummary {
        spec: meta.spec,
        query: meta.query,
        trials: meta.trials,
        master_seed: meta.master_seed,
        z: meta.z,
        per_k,
    })
}

#[derive(Serialize, Deserialize)]
struct CurveHead {
    source: BoundSource,
    params: CurveParams,
}

#[derive(Serialize, Deserialize)]
struct CurvesMeta {
    curves: Vec<CurveHead>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gk: Option<GkMetadata>,
}

#[derive(Serialize, Deserialize)]
struct CurvesDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gk: Option<GkMetadata>,
    curves: Vec<BoundCurve>,
}

/// Curves file; `gk` records which `g_k` sequence the curves used.
pub fn curves_to_string(curves: &[BoundCurve], gk: Option<GkMetadata>, format: Format) -> Result<String> {
    match format {
        Format::Json => with_schema(BOUNDS_SCHEMA, &CurvesDoc { gk, curves: curves.to_vec() }),
        Format::Csv => {
            let meta = serde_json::to_value(CurvesMeta {
                curves: curves.iter().map(|c| CurveHead { source: c.source, params: c.params.clone() }).collect(),
                gk,
            })?;
            let mut t = Table::new(BOUNDS_SCHEMA, meta, &["k", "value", "source", "clamped"]);
            for c in curves {
                for p in &c.points {
                    t.push(vec![
                        p.k.to_string(),
                        p.value.to_string(),
                        c.source.name().to_string(),
                        p.clamped.to_string(),
                    ]);
                }
            }
            Ok(t.to_csv())
        }
    }
}

pub fn curves_from_str(text: &str) -> Result<(Vec<BoundCurve>, Option<GkMetadata>)> {
    if is_json(text) {
        let doc: CurvesDoc = serde_json::from_value(strip_schema(text, BOUNDS_SCHEMA)?)?;
        return Ok((doc.curves, doc.gk));
    }
    let t = Table::parse(text)?;
    t.expect_schema(BOUNDS_SCHEMA)?;
    let meta: CurvesMeta = serde_json::from_value(t.meta.clone())?;
    let mut curves: Vec<BoundCurve> = meta
        .curves
        .into_iter()
        .map(|h| BoundCurve { source: h.source, params: h.params, points: Vec::new() })
        .collect();
    let (ck, cv, cs, cc) = (t.column("k")?, t.column("value")?, t.column("source")?, t.column("clamped")?);
    for r in &t.rows {
        let source = BoundSource::parse(&r[cs])?;
        let curve = curves
            .iter_mut()
            .find(|c| c.source == source)
            .ok_or_else(|| Error::Parse(format!("rows for {source} have no metadata entry")))?;
        curve.points.push(BoundPoint {
            k: num(&r[ck], "k")?,
            value: num(&r[cv], "value")?,
            clamped: num(&r[cc], "clamped")?,
        });
    }
    Ok((curves, meta.gk))
}

pub fn report_to_string(report: &VerificationReport, format: Format) -> Result<String> {
    match format {
        Format::Json => with_schema(VERIFY_SCHEMA, report),
        Format::Csv => {
            let meta = serde_json::json!({ "passed": report.passed(), "skipped": report.skipped });
            let mut t = Table::new(
                VERIFY_SCHEMA,
                meta,
                &["source", "relation", "k", "empirical", "bound", "half_width", "margin", "pass"],
            );
            for c in &report.checks {
                t.push(vec![
                    c.source.name().to_string(),
                    serde_json::to_value(c.relation)?.as_str().unwrap_or_default().to_string(),
                    c.k.to_string(),
                    c.empirical.to_string(),
                    c.bound.to_string(),
                    c.half_width.to_string(),
                    c.margin.to_string(),
                    c.pass.to_string(),
                ]);
            }
            Ok(t.to_csv())
        }
    }
}

/// Fixed-width margin table for terminals.
pub fn report_table(report: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>8} {:>12} {:>12} {:>12} {:>13}  result",
        "source", "k", "empirical", "bound", "half_width", "margin"
    );
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{:<32} {:>8} {:>12.6} {:>12.6} {:>12.6} {:>13.6e}  {}",
            c.source.name(),
            c.k,
            c.empirical,
            c.bound,
            c.half_width,
            c.margin,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = report.failures().count();
    let _ = writeln!(out, "{} checks, {} failed, {} skipped", report.checks.len(), failed, report.skipped);
    out
}

/// Generic named-column series, used for figure outputs that combine
/// empirical and theoretical values.
pub fn series_to_string(meta: Value, header: &[&str], rows: &[Vec<f64>], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut t = Table::new(SERIES_SCHEMA, meta, header);
            for r in rows {
                t.push(r.iter().map(|v| v.to_string()).collect());
            }
            Ok(t.to_csv())
        }
        Format::Json => {
            let records: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(header.iter().zip(r).map(|(h, v)| (h.to_string(), serde_json::json!(v))).collect())
                })
                .collect();
            with_schema(SERIES_SCHEMA, &serde_json::json!({ "meta": meta, "rows": records }))
        }
    }
}

/// Per-generation vocabulary survival of an n-gram run.
pub fn ngram_to_string(records: &[NgramRecord], meta: Value, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut t = Table::new(NGRAM_SCHEMA, meta, &["generation", "distinct_count", "fraction", "seed"]);
            for r in records {
                t.push(vec![
                    r.generation.to_string(),
                    r.distinct_count.to_string(),
                    r.fraction.to_string(),
                    r.seed.to_string(),
                ]);
            }
            Ok(t.to_csv())
        }
        Format::Json => with_schema(NGRAM_SCHEMA, &serde_json::json!({ "meta": meta, "records": records })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::curves_for;
    use crate::math::gk_sequence;
    use crate::montecarlo::{estimate, verify_bounds, EventKind, EventQuery, McConfig};
    use crate::processes::ProcessSpec;

    fn summary() -> MonteCarloSummary {
        let spec = ProcessSpec::poisson(0.7, 10).unwrap();
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, vec![1, 2, 5]).unwrap();
        estimate(&spec, &q, &McConfig::new(1000, 9)).unwrap()
    }

    #[test]
    fn summary_round_trips() {
        let s = summary();
        for f in [Format::Csv, Format::Json] {
            let text = summary_to_string(&s, f).unwrap();
            assert_eq!(summary_from_str(&text).unwrap(), s);
        }
        let csv = summary_to_string(&s, Format::Csv).unwrap();
        assert!(csv.starts_with("# schema: collapse-summary/v1\n# meta: {"));
        assert_eq!(csv.lines().nth(2), Some("k,value,std_error,half_width"));
    }

    #[test]
    fn curves_round_trip() {
        let spec = ProcessSpec::bernoulli(0.01, 100).unwrap();
        let gk = gk_sequence(100).unwrap();
        let curves = curves_for(&spec, None, &[1, 10, 100], &gk).unwrap();
        for f in [Format::Csv, Format::Json] {
            let text = curves_to_string(&curves, Some(gk.metadata()), f).unwrap();
            let (back, meta) = curves_from_str(&text).unwrap();
            assert_eq!(back, curves);
            assert_eq!(meta, Some(gk.metadata()));
        }
    }

    #[test]
    fn report_outputs() {
        let s = summary();
        let gk = gk_sequence(5).unwrap();
        let curves = curves_for(&s.spec, None, &[1, 2, 5], &gk).unwrap();
        let r = verify_bounds(&s, &curves).unwrap();
        let csv = report_to_string(&r, Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3 + r.checks.len());
        assert!(report_table(&r).contains("poisson_survival_exact"));
        let json = report_to_string(&r, Format::Json).unwrap();
        assert!(json.contains("\"schema\": \"collapse-verify/v1\""));
    }

    #[test]
    fn parse_errors() {
        assert!(Table::parse("k,value\n1,2\n").is_err());
        assert!(Table::parse("# schema: x/v1\n# meta: {}\nk,value\n1\n").is_err());
        assert!(summary_from_str("# schema: other/v1\n# meta: {}\nk\n").is_err());
        assert!("xml".parse::<Format>().is_err());
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
    }

    #[test]
    fn series_formats() {
        let csv =
            series_to_string(serde_json::json!({"figure": "x"}), &["k", "v"], &[vec![1.0, 0.5]], Format::Csv).unwrap();
        assert_eq!(csv, "# schema: collapse-series/v1\n# meta: {\"figure\":\"x\"}\nk,v\n1,0.5\n");
    }
}
