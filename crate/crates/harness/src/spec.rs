use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Text(s) => s.parse().ok(),
        }
    }

    /// Parses `key=value`: integers first, then reals, else text.
    pub fn parse(s: &str) -> ParamValue {
        if let Ok(v) = s.parse::<i64>() {
            ParamValue::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            ParamValue::Real(v)
        } else {
            ParamValue::Text(s.to_string())
        }
    }
}

/// Parameter map with typed lookups and defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn set(&mut self, key: &str, value: ParamValue) {
        self.0.insert(key.to_string(), value);
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(format!("parameter `{key}` must be a finite number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as usize),
            Some(_) => Err(invalid(format!("parameter `{key}` must be a non-negative integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => Ok(s),
            Some(_) => Err(invalid(format!("parameter `{key}` must be text"))),
        }
    }

    /// Rejects keys outside `known`, so a misspelled parameter is not silently ignored.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(invalid(format!("unknown parameter `{k}`; expected one of {known:?}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
    pub seeds: Vec<u64>,
    /// Directory receiving `<name>.csv` and `<name>.json`.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(name: &str, seeds: Vec<u64>) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            params: Params::default(),
            seeds,
            output_path: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.params.set(key, value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("seed list is empty"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(invalid("seed list has duplicates"));
        }
        Ok(())
    }
}

/// Identity of one trial. Records sort by this key.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TrialKey {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    /// Distinguishes arms of one experiment, for example a negative control.
    pub variant: u32,
}

impl TrialKey {
    fn order(&self, other: &Self) -> std::cmp::Ordering {
        (self.seed, self.variant, self.n)
            .cmp(&(other.seed, other.variant, other.n))
            .then(self.eps.total_cmp(&other.eps))
    }

    fn same(&self, other: &Self) -> bool {
        self.order(other).is_eq()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub eps: f64,
    pub variant: u32,
    pub values: BTreeMap<String, f64>,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            seed: self.seed,
            n: self.n,
            eps: self.eps,
            variant: self.variant,
        }
    }

    pub fn value(&self, name: &str) -> f64 {
        self.values.get(name).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub records: Vec<TrialRecord>,
    pub assertions: Vec<Assertion>,
    /// Aggregate statistics such as fitted slopes.
    pub summary: BTreeMap<String, f64>,
    pub resumed: usize,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Columns `seed,n,eps,variant` followed by the value names in sorted
    /// order. Wall times are left out so reruns are byte-identical.
    pub fn to_csv(&self) -> Result<String> {
        let names: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.values.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["seed", "n", "eps", "variant"];
        header.extend(names.iter().copied());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.seed.to_string(), r.n.to_string(), r.eps.to_string(), r.variant.to_string()];
            row.extend(names.iter().map(|k| r.values.get(*k).map_or(String::new(), |v| v.to_string())));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.spec.name,
            "params": self.spec.params,
            "seeds": self.spec.seeds,
            "passed": self.passed(),
            "assertions": self.assertions,
            "summary": self.summary,
            "records": self.records.len(),
            "resumedRecords": self.resumed,
            "wallTimeMs": self.records.iter().map(|r| r.wall_time_ms).sum::<f64>(),
        })
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(csv_path(dir, &self.spec.name), self.to_csv()?)?;
        let json = serde_json::to_string_pretty(&self.summary_json())?;
        std::fs::write(dir.join(format!("{}.json", self.spec.name)), json + "\n")?;
        Ok(())
    }
}

pub fn csv_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

/// Records of an earlier run, read back from its CSV.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < 4 || header[..4] != ["seed", "n", "eps", "variant"] {
        return Err(invalid(format!("{} is not an experiment CSV", path.display())));
    }
    let bad = |what: &str| invalid(format!("{}: malformed {what}", path.display()));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let mut values = BTreeMap::new();
        for (k, cell) in header.iter().zip(row.iter()).skip(4) {
            if !cell.is_empty() {
                values.insert(k.clone(), cell.parse().map_err(|_| bad("value"))?);
            }
        }
        out.push(TrialRecord {
            seed: row[0].parse().map_err(|_| bad("seed"))?,
            n: row[1].parse().map_err(|_| bad("n"))?,
            eps: row[2].parse().map_err(|_| bad("eps"))?,
            variant: row[3].parse().map_err(|_| bad("variant"))?,
            values,
            wall_time_ms: 0.0,
        });
    }
    Ok(out)
}

pub(crate) fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| a.key().order(&b.key()));
}

pub(crate) fn find_record<'a>(records: &'a [TrialRecord], key: &TrialKey) -> Option<&'a TrialRecord> {
    records.iter().find(|r| r.key().same(key))
}
