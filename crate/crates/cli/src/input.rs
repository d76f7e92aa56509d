use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;
use temperfield::fields::{FddQuery, FieldSpec};
use temperfield::integrability::SimpleFunction;
use temperfield::tstable::{SpectralMeasure, StableParams};

/// A simple-function integrand together with the random measure it is integrated against.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleFunctionSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: SpectralMeasure,
    pub function: SimpleFunction,
}

impl SimpleFunctionSpec {
    pub fn params(&self) -> Result<StableParams> {
        Ok(StableParams::new(self.alpha, self.lambda)?)
    }
}

pub enum SpecFile {
    Field(Box<FieldSpec>),
    Simple(Box<SimpleFunctionSpec>),
}

/// Applies `key=value` overrides to the top level of a JSON object. Values
/// that do not parse as JSON are taken as strings.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut v: Value = serde_json::from_str(text).context("spec is not valid JSON")?;
    let obj = v.as_object_mut().ok_or_else(|| anyhow!("spec must be a JSON object"))?;
    for kv in overrides {
        let (k, val) = kv.split_once('=').ok_or_else(|| anyhow!("override `{kv}` is not of the form key=value"))?;
        let parsed = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
        obj.insert(k.trim().to_string(), parsed);
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn read_spec_text(path: &Path, overrides: &[String]) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    apply_overrides(&text, overrides)
}

pub fn load_field(path: &Path, overrides: &[String]) -> Result<FieldSpec> {
    let text = read_spec_text(path, overrides)?;
    FieldSpec::from_json(&text).with_context(|| format!("in {}", path.display()))
}

/// Field specs carry a `kind`; simple-function specs carry a `function`.
pub fn load_any(path: &Path, overrides: &[String]) -> Result<SpecFile> {
    let text = read_spec_text(path, overrides)?;
    let probe: Value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    if probe.get("function").is_some() {
        let s: SimpleFunctionSpec = serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(SpecFile::Simple(Box::new(s)))
    } else {
        Ok(SpecFile::Field(Box::new(FieldSpec::from_json(&text).with_context(|| format!("in {}", path.display()))?)))
    }
}

/// Parses `a,b;c,d` into points.
pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_list).collect()
}

/// Parses `a,b,c`.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("`{x}` is not a number")))
        .collect()
}

/// The query from `--t`/`--u`, defaulting to the all-ones point and the first basis direction.
pub fn query(t: Option<&str>, u: Option<&str>, n: usize, d: usize) -> Result<FddQuery> {
    let points = match t {
        Some(s) => parse_points(s)?,
        None => vec![vec![1.0; n]],
    };
    let dirs = match u {
        Some(s) => parse_points(s)?,
        None => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            vec![e; points.len()]
        }
    };
    if points.len() != dirs.len() {
        bail!("{} points but {} directions", points.len(), dirs.len());
    }
    Ok(FddQuery::new(points, dirs)?)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        bail!("log grid needs 0 < min < max and at least two points");
    }
    Ok((0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect())
}

pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if lo.is_nan() || hi.is_nan() || hi < lo || n == 0 {
        bail!("linear grid needs min <= max and at least one point");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!(parse_points("1,2; 3,4").unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(parse_list("1,x").is_err());
        let q = query(None, None, 2, 2).unwrap();
        assert_eq!(q.points, vec![vec![1.0, 1.0]]);
        assert_eq!(q.directions, vec![vec![1.0, 0.0]]);
        assert!(query(Some("1;2"), Some("1"), 1, 1).is_err());
        assert_eq!(lin_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn overrides() {
        let t = apply_overrides(r#"{"alpha":1.5,"kind":"harmonizable"}"#, &["alpha=0.7".into(), "kind=moving_average".into()]).unwrap();
        let v: Value = serde_json::from_str(&t).unwrap();
        assert_eq!(v["alpha"], 0.7);
        assert_eq!(v["kind"], "moving_average");
        assert!(apply_overrides("{}", &["novalue".into()]).is_err());
    }
}
