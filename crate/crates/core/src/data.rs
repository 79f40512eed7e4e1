//! Long-format longitudinal data: subjects, validated group datasets,
//! delimited-text ingestion and subject-level summaries.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt_f64;

/// How the modifier is measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ModifierKind {
    Continuous,
    /// Discrete modifier with declared integer levels. An empty list on a
    /// [`Schema`] means "infer the levels from the data".
    Discrete(Vec<i64>),
}

impl ModifierKind {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ModifierKind::Discrete(_))
    }

    pub fn same_variant(&self, other: &ModifierKind) -> bool {
        self.is_discrete() == other.is_discrete()
    }
}

impl fmt::Display for ModifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModifierKind::Continuous => f.write_str("continuous"),
            ModifierKind::Discrete(levels) if levels.is_empty() => f.write_str("discrete"),
            ModifierKind::Discrete(levels) => {
                let l: Vec<String> = levels.iter().map(|v| v.to_string()).collect();
                write!(f, "discrete:{}", l.join(","))
            }
        }
    }
}

impl FromStr for ModifierKind {
    type Err = Error;

    /// Accepts `continuous`, `discrete`, or `discrete:0,1,2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("continuous") {
            return Ok(ModifierKind::Continuous);
        }
        let rest = s
            .strip_prefix("discrete")
            .ok_or_else(|| Error::Domain(format!("unknown modifier kind `{s}`")))?;
        if rest.is_empty() {
            return Ok(ModifierKind::Discrete(Vec::new()));
        }
        let rest = rest
            .strip_prefix(':')
            .ok_or_else(|| Error::Domain(format!("unknown modifier kind `{s}`")))?;
        let mut levels = rest
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Domain(format!("bad modifier level `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        levels.sort_unstable();
        levels.dedup();
        Ok(ModifierKind::Discrete(levels))
    }
}

/// One individual's repeated measurements, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    id: String,
    modifier: f64,
    times: Vec<f64>,
    outcomes: Vec<f64>,
    /// Row-major, `times.len() * width`.
    covariates: Vec<f64>,
    width: usize,
}

impl Subject {
    /// Builds a subject from parallel observation arrays; observations are
    /// sorted by time (ties ordered by outcome, then covariates).
    pub fn new(
        id: impl Into<String>,
        modifier: f64,
        times: Vec<f64>,
        outcomes: Vec<f64>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let id = id.into();
        let n = times.len();
        if n == 0 {
            return Err(Error::Validation(format!("subject `{id}` has no observations")));
        }
        if outcomes.len() != n || covariates.len() != n {
            return Err(Error::Validation(format!(
                "subject `{id}`: times, outcomes and covariate rows differ in length"
            )));
        }
        let width = covariates[0].len();
        if covariates.iter().any(|r| r.len() != width) {
            return Err(Error::Validation(format!(
                "subject `{id}`: ragged covariate rows"
            )));
        }
        if !modifier.is_finite() {
            return Err(Error::Validation(format!("subject `{id}`: non-finite modifier")));
        }
        let all_finite = times.iter().chain(&outcomes).all(|v| v.is_finite())
            && covariates.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Validation(format!("subject `{id}`: non-finite value")));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            times[a]
                .total_cmp(&times[b])
                .then(outcomes[a].total_cmp(&outcomes[b]))
                .then_with(|| {
                    covariates[a]
                        .iter()
                        .zip(&covariates[b])
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        let mut flat = Vec::with_capacity(n * width);
        for &k in &order {
            flat.extend_from_slice(&covariates[k]);
        }
        Ok(Subject {
            id,
            modifier,
            times: order.iter().map(|&k| times[k]).collect(),
            outcomes: order.iter().map(|&k| outcomes[k]).collect(),
            covariates: flat,
            width,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn modifier(&self) -> f64 {
        self.modifier
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn n_obs(&self) -> usize {
        self.times.len()
    }

    /// Covariates `X_1..X_p` of observation `j` (no intercept).
    pub fn covariate_row(&self, j: usize) -> &[f64] {
        &self.covariates[j * self.width..(j + 1) * self.width]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Copy of this subject with every outcome transformed by `f`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Subject {
        let mut s = self.clone();
        s.outcomes.iter_mut().for_each(|y| *y = f(*y));
        s
    }
}

/// Validated, immutable collection of one group's subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    group: String,
    subjects: Vec<Subject>,
    p: usize,
    modifier_kind: ModifierKind,
    covariate_names: Vec<String>,
    categorical: Vec<bool>,
    time_range: (f64, f64),
    total_obs: usize,
}

impl LongitudinalDataset {
    pub fn new(
        group: impl Into<String>,
        subjects: Vec<Subject>,
        modifier_kind: ModifierKind,
    ) -> Result<Self> {
        let p = subjects.first().map(|s| s.width()).unwrap_or(0);
        let names = (1..=p).map(|r| format!("x{r}")).collect();
        Self::with_names(group, subjects, modifier_kind, names, vec![false; p])
    }

    pub fn with_names(
        group: impl Into<String>,
        subjects: Vec<Subject>,
        modifier_kind: ModifierKind,
        covariate_names: Vec<String>,
        categorical: Vec<bool>,
    ) -> Result<Self> {
        let group = group.into();
        if subjects.is_empty() {
            return Err(Error::Validation(format!("empty group `{group}`")));
        }
        if subjects.len() < 2 {
            return Err(Error::Validation(format!(
                "group `{group}` needs at least 2 subjects, found {}",
                subjects.len()
            )));
        }
        let p = subjects[0].width();
        if let Some(s) = subjects.iter().find(|s| s.width() != p) {
            return Err(Error::Validation(format!(
                "subject `{}` has {} covariates, expected {p}",
                s.id(),
                s.width()
            )));
        }
        if covariate_names.len() != p || categorical.len() != p {
            return Err(Error::Validation(format!(
                "expected {p} covariate names and flags"
            )));
        }
        let modifier_kind = match modifier_kind {
            ModifierKind::Continuous => ModifierKind::Continuous,
            ModifierKind::Discrete(levels) => {
                let levels = if levels.is_empty() {
                    let mut l = Vec::new();
                    for s in &subjects {
                        l.push(as_level(s.modifier(), s.id())?);
                    }
                    l.sort_unstable();
                    l.dedup();
                    l
                } else {
                    levels
                };
                for s in &subjects {
                    let lv = as_level(s.modifier(), s.id())?;
                    if levels.binary_search(&lv).is_err() {
                        return Err(Error::Validation(format!(
                            "subject `{}` has undeclared modifier level {lv}",
                            s.id()
                        )));
                    }
                }
                ModifierKind::Discrete(levels)
            }
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut total_obs = 0;
        for s in &subjects {
            lo = lo.min(s.times()[0]);
            hi = hi.max(s.times()[s.n_obs() - 1]);
            total_obs += s.n_obs();
        }
        Ok(LongitudinalDataset {
            group,
            subjects,
            p,
            modifier_kind,
            covariate_names,
            categorical,
            time_range: (lo, hi),
            total_obs,
        })
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Covariate count, excluding the intercept.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn modifier_kind(&self) -> &ModifierKind {
        &self.modifier_kind
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn categorical(&self) -> &[bool] {
        &self.categorical
    }

    pub fn time_range(&self) -> (f64, f64) {
        self.time_range
    }

    pub fn total_obs(&self) -> usize {
        self.total_obs
    }

    pub fn modifiers(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.modifier()).collect()
    }

    /// Dataset built from the given subject indices (repeats allowed), keeping
    /// this dataset's metadata.
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        Self::with_names(
            self.group.clone(),
            subjects,
            self.modifier_kind.clone(),
            self.covariate_names.clone(),
            self.categorical.clone(),
        )
    }

    /// Copy with every outcome transformed by `f`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        let mut out = self.clone();
        out.subjects = self.subjects.iter().map(|s| s.map_outcomes(f)).collect();
        out
    }

    pub fn with_group(&self, group: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.group = group.into();
        out
    }
}

fn as_level(v: f64, id: &str) -> Result<i64> {
    if v.fract() == 0.0 && v.abs() < 2f64.powi(53) {
        Ok(v as i64)
    } else {
        Err(Error::Validation(format!(
            "subject `{id}`: discrete modifier value {v} is not an integer level"
        )))
    }
}

/// Column roles for long-format input files.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub id: String,
    pub group: String,
    pub time: String,
    pub outcome: String,
    pub modifier: String,
    pub covariates: Vec<String>,
    /// Covariates summarized as category percentages rather than mean/SD.
    pub categorical: Vec<String>,
    pub modifier_kind: ModifierKind,
    pub delimiter: u8,
}

impl Schema {
    /// Column names used by [`write_datasets`] and the simulator.
    pub fn standard(p: usize, modifier_kind: ModifierKind) -> Self {
        Schema {
            id: "id".into(),
            group: "group".into(),
            time: "time".into(),
            outcome: "outcome".into(),
            modifier: "modifier".into(),
            covariates: (1..=p).map(|r| format!("x{r}")).collect(),
            categorical: Vec::new(),
            modifier_kind,
            delimiter: b',',
        }
    }
}

impl Schema {
    /// Uses every header column not bound to a role as a covariate, in file order.
    pub fn with_inferred_covariates(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        let mut rdr = csv::ReaderBuilder::new().delimiter(self.delimiter).from_reader(file);
        let roles = [&self.id, &self.group, &self.time, &self.outcome, &self.modifier];
        self.covariates = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .filter(|h| !roles.iter().any(|r| *r == h))
            .collect();
        Ok(self)
    }
}

struct Row {
    time: f64,
    outcome: f64,
    modifier: f64,
    covariates: Vec<f64>,
    line: usize,
}

/// Reads the rows labelled `group_filter` from a long-format delimited file.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &Schema,
    group_filter: &str,
) -> Result<LongitudinalDataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_dataset(file, schema, group_filter)
}

/// Same as [`load_dataset`] over any reader.
pub fn read_dataset(
    reader: impl std::io::Read,
    schema: &Schema,
    group_filter: &str,
) -> Result<LongitudinalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let id_col = col(&schema.id)?;
    let group_col = col(&schema.group)?;
    let time_col = col(&schema.time)?;
    let outcome_col = col(&schema.outcome)?;
    let modifier_col = col(&schema.modifier)?;
    let cov_cols = schema
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    for c in &schema.categorical {
        if !schema.covariates.contains(c) {
            return Err(Error::Schema(c.clone()));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Row>> = HashMap::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut duplicates = 0usize;

    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::Parse {
                row: line,
                column: "*".into(),
                value: "wrong number of fields".into(),
            },
            _ => Error::Io(e.to_string()),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        if field(group_col) != group_filter {
            continue;
        }
        let num = |c: usize| -> Result<f64> {
            let raw = field(c);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row: line,
                    column: headers.get(c).unwrap_or("").to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row: line,
                column: schema.id.clone(),
                value: String::new(),
            });
        }
        let row = Row {
            time: num(time_col)?,
            outcome: num(outcome_col)?,
            modifier: num(modifier_col)?,
            covariates: cov_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            line,
        };
        let mut key = vec![row.time.to_bits(), row.outcome.to_bits(), row.modifier.to_bits()];
        key.extend(row.covariates.iter().map(|v| v.to_bits()));
        key.push(id.len() as u64);
        key.extend(id.bytes().map(u64::from));
        if !seen.insert(key) {
            duplicates += 1;
            warn!("line {line}: exact duplicate of an earlier row for subject `{id}`");
        }
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push(row);
    }
    if duplicates > 0 {
        warn!("{duplicates} duplicate row(s) in group `{group_filter}` kept as observations");
    }
    if order.is_empty() {
        return Err(Error::Validation(format!("empty group `{group_filter}`")));
    }

    order.sort();
    let mut subjects = Vec::with_capacity(order.len());
    for id in order {
        let rs = rows.remove(&id).unwrap_or_default();
        let z = rs[0].modifier;
        if let Some(bad) = rs.iter().find(|r| r.modifier.to_bits() != z.to_bits()) {
            return Err(Error::Validation(format!(
                "subject `{id}` has inconsistent modifier values ({z} vs {} at line {})",
                bad.modifier, bad.line
            )));
        }
        let mut times = Vec::with_capacity(rs.len());
        let mut outcomes = Vec::with_capacity(rs.len());
        let mut covs = Vec::with_capacity(rs.len());
        for r in rs {
            times.push(r.time);
            outcomes.push(r.outcome);
            covs.push(r.covariates);
        }
        subjects.push(Subject::new(id, z, times, outcomes, covs)?);
    }
    let flags = schema
        .covariates
        .iter()
        .map(|c| schema.categorical.contains(c))
        .collect();
    LongitudinalDataset::with_names(
        group_filter,
        subjects,
        schema.modifier_kind.clone(),
        schema.covariates.clone(),
        flags,
    )
}

/// Writes datasets in long format with the [`Schema::standard`] column names,
/// numbers at 17 significant digits.
pub fn write_datasets(path: impl AsRef<Path>, datasets: &[&LongitudinalDataset]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_datasets_to(file, datasets)
}

pub fn write_datasets_to(writer: impl std::io::Write, datasets: &[&LongitudinalDataset]) -> Result<()> {
    let p = datasets.first().map(|d| d.p()).unwrap_or(0);
    if datasets.iter().any(|d| d.p() != p) {
        return Err(Error::Validation("datasets differ in covariate count".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "group".into(), "time".into(), "outcome".into(), "modifier".into()];
    match datasets.first() {
        Some(d) => header.extend(d.covariate_names().iter().cloned()),
        None => header.extend((1..=p).map(|r| format!("x{r}"))),
    }
    w.write_record(&header)?;
    for d in datasets {
        for s in d.subjects() {
            for j in 0..s.n_obs() {
                let mut rec = vec![
                    s.id().to_string(),
                    d.group().to_string(),
                    fmt_f64(s.times()[j]),
                    fmt_f64(s.outcomes()[j]),
                    fmt_f64(s.modifier()),
                ];
                rec.extend(s.covariate_row(j).iter().map(|&v| fmt_f64(v)));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryShare {
    pub level: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub name: String,
    pub levels: Vec<CategoryShare>,
}

/// Subject-level characteristics of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub n_subjects: usize,
    pub total_obs: usize,
    pub numeric: Vec<VariableSummary>,
    pub categorical: Vec<CategorySummary>,
}

/// One record per subject (first observation's covariates): mean and sample
/// SD for numeric fields, percentages for categorical ones. The modifier is
/// reported under the name `modifier`, the per-subject observation count as
/// `n_obs`.
pub fn summarize(dataset: &LongitudinalDataset) -> GroupSummary {
    let subjects = dataset.subjects();
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();

    let modifier: Vec<f64> = dataset.modifiers();
    if dataset.modifier_kind().is_discrete() {
        categorical.push(category_summary("modifier", &modifier));
    } else {
        numeric.push(numeric_summary("modifier", &modifier));
    }
    for (r, name) in dataset.covariate_names().iter().enumerate() {
        let vals: Vec<f64> = subjects.iter().map(|s| s.covariate_row(0)[r]).collect();
        if dataset.categorical()[r] {
            categorical.push(category_summary(name, &vals));
        } else {
            numeric.push(numeric_summary(name, &vals));
        }
    }
    let n_obs: Vec<f64> = subjects.iter().map(|s| s.n_obs() as f64).collect();
    numeric.push(numeric_summary("n_obs", &n_obs));

    GroupSummary {
        group: dataset.group().to_string(),
        n_subjects: dataset.n_subjects(),
        total_obs: dataset.total_obs(),
        numeric,
        categorical,
    }
}

fn numeric_summary(name: &str, v: &[f64]) -> VariableSummary {
    let (mean, sd) = mean_sd(v);
    VariableSummary {
        name: name.to_string(),
        mean,
        sd,
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = if v.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

fn category_summary(name: &str, v: &[f64]) -> CategorySummary {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &x in v {
        // order by value, not by bit pattern
        let key = ordered_key(x);
        counts.entry(key).or_insert((x, 0)).1 += 1;
    }
    let n = v.len() as f64;
    CategorySummary {
        name: name.to_string(),
        levels: counts
            .values()
            .map(|&(x, c)| CategoryShare {
                level: format!("{x}"),
                percent: 100.0 * c as f64 / n,
            })
            .collect(),
    }
}

fn ordered_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Summary as CSV rows: `group,kind,variable,level,mean,sd,percent`.
pub fn summary_to_csv(summaries: &[GroupSummary]) -> String {
    let mut out = String::from("group,kind,variable,level,mean,sd,percent\n");
    for s in summaries {
        out.push_str(&format!("{},count,n_subjects,,{},,\n", s.group, s.n_subjects));
        out.push_str(&format!("{},count,total_obs,,{},,\n", s.group, s.total_obs));
        for v in &s.numeric {
            out.push_str(&format!(
                "{},numeric,{},,{},{},\n",
                s.group,
                v.name,
                fmt_f64(v.mean),
                fmt_f64(v.sd)
            ));
        }
        for c in &s.categorical {
            for l in &c.levels {
                out.push_str(&format!(
                    "{},categorical,{},{},,,{}\n",
                    s.group,
                    c.name,
                    l.level,
                    fmt_f64(l.percent)
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX_ROWS: &str = "\
id,group,time,outcome,modifier,x1,x2
s1,A,0.3,1.0,0,1.5,2
s1,A,0.1,2.0,0,1.5,2
s1,A,0.2,3.0,0,1.5,2
s2,A,0.5,4.0,1,2.5,3
s2,A,0.4,5.0,1,2.5,3
s2,A,0.6,6.0,1,2.5,3
";

    fn schema(kind: ModifierKind) -> Schema {
        Schema::standard(2, kind)
    }

    #[test]
    fn loads_and_groups() {
        let d = read_dataset(SIX_ROWS.as_bytes(), &schema(ModifierKind::Discrete(vec![])), "A").unwrap();
        assert_eq!(d.n_subjects(), 2);
        assert_eq!(d.total_obs(), 6);
        assert_eq!(d.p(), 2);
        assert_eq!(d.subjects()[0].times(), &[0.1, 0.2, 0.3]);
        assert_eq!(d.subjects()[0].outcomes(), &[2.0, 3.0, 1.0]);
        assert_eq!(d.time_range(), (0.1, 0.6));
        assert_eq!(d.modifier_kind(), &ModifierKind::Discrete(vec![0, 1]));
    }

    #[test]
    fn empty_group_rejected() {
        let e = read_dataset(SIX_ROWS.as_bytes(), &schema(ModifierKind::Continuous), "B").unwrap_err();
        assert!(matches!(e, Error::Validation(ref m) if m.contains("empty group")));
    }

    #[test]
    fn inconsistent_modifier_rejected() {
        let text = SIX_ROWS.replacen("s1,A,0.2,3.0,0", "s1,A,0.2,3.0,1", 1);
        let e = read_dataset(text.as_bytes(), &schema(ModifierKind::Continuous), "A").unwrap_err();
        assert!(matches!(e, Error::Validation(ref m) if m.contains("inconsistent modifier")));
    }

    #[test]
    fn missing_column_named() {
        let mut s = schema(ModifierKind::Continuous);
        s.covariates[1] = "age".into();
        assert_eq!(
            read_dataset(SIX_ROWS.as_bytes(), &s, "A").unwrap_err(),
            Error::Schema("age".into())
        );
    }

    #[test]
    fn bad_cell_reports_row() {
        let text = SIX_ROWS.replacen("s2,A,0.4,5.0", "s2,A,0.4,abc", 1);
        let e = read_dataset(text.as_bytes(), &schema(ModifierKind::Continuous), "A").unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                row: 6,
                column: "outcome".into(),
                value: "abc".into()
            }
        );
        let text = SIX_ROWS.replacen("s2,A,0.4,5.0", "s2,A,0.4,", 1);
        let e = read_dataset(text.as_bytes(), &schema(ModifierKind::Continuous), "A").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 6, .. }));
    }

    #[test]
    fn undeclared_level_rejected() {
        let e = read_dataset(SIX_ROWS.as_bytes(), &schema(ModifierKind::Discrete(vec![0, 2])), "A")
            .unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
    }

    #[test]
    fn tab_delimiter() {
        let text = SIX_ROWS.replace(',', "\t");
        let mut s = schema(ModifierKind::Continuous);
        s.delimiter = b'\t';
        assert_eq!(read_dataset(text.as_bytes(), &s, "A").unwrap().total_obs(), 6);
    }

    #[test]
    fn row_order_irrelevant() {
        let mut lines: Vec<&str> = SIX_ROWS.lines().collect();
        let header = lines.remove(0);
        lines.reverse();
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let s = schema(ModifierKind::Continuous);
        assert_eq!(
            read_dataset(SIX_ROWS.as_bytes(), &s, "A").unwrap(),
            read_dataset(shuffled.as_bytes(), &s, "A").unwrap()
        );
    }

    #[test]
    fn duplicate_rows_are_kept() {
        let text = format!("{SIX_ROWS}s2,A,0.6,6.0,1,2.5,3\n");
        let d = read_dataset(text.as_bytes(), &schema(ModifierKind::Continuous), "A").unwrap();
        assert_eq!(d.total_obs(), 7);
    }

    #[test]
    fn summary_of_discrete_modifier() {
        let d = read_dataset(SIX_ROWS.as_bytes(), &schema(ModifierKind::Discrete(vec![])), "A").unwrap();
        let s = summarize(&d);
        let m = &s.categorical[0];
        assert_eq!(m.name, "modifier");
        assert_eq!(m.levels.len(), 2);
        assert_eq!(m.levels[0].percent, 50.0);
        assert_eq!(m.levels[1].percent, 50.0);
    }

    #[test]
    fn summary_mean_sd() {
        let subjects = [20.0, 30.0, 40.0]
            .iter()
            .enumerate()
            .map(|(i, &age)| Subject::new(format!("s{i}"), 0.0, vec![0.0], vec![1.0], vec![vec![age]]).unwrap())
            .collect();
        let d = LongitudinalDataset::with_names(
            "A",
            subjects,
            ModifierKind::Continuous,
            vec!["age".into()],
            vec![false],
        )
        .unwrap();
        let s = summarize(&d);
        let age = s.numeric.iter().find(|v| v.name == "age").unwrap();
        assert_eq!(age.mean, 30.0);
        assert_eq!(age.sd, 10.0);
    }

    #[test]
    fn categorical_percentages_sum_to_100() {
        let subjects = (0..7)
            .map(|i| {
                Subject::new(format!("s{i}"), 0.0, vec![0.0], vec![1.0], vec![vec![(i % 3) as f64]])
                    .unwrap()
            })
            .collect();
        let d = LongitudinalDataset::with_names(
            "A",
            subjects,
            ModifierKind::Continuous,
            vec!["income".into()],
            vec![true],
        )
        .unwrap();
        let s = summarize(&d);
        let total: f64 = s.categorical[0].levels.iter().map(|l| l.percent).sum();
        assert!((total - 100.0).abs() < 0.1);
        assert_eq!(s.categorical[0].levels.len(), 3);
    }

    #[test]
    fn subject_invariants() {
        assert!(Subject::new("a", 0.0, vec![], vec![], vec![]).is_err());
        assert!(Subject::new("a", 0.0, vec![0.0, 1.0], vec![1.0], vec![vec![], vec![]]).is_err());
        assert!(Subject::new("a", f64::NAN, vec![0.0], vec![1.0], vec![vec![]]).is_err());
        assert!(Subject::new("a", 0.0, vec![f64::INFINITY], vec![1.0], vec![vec![]]).is_err());
        let one = Subject::new("a", 0.0, vec![0.0], vec![1.0], vec![vec![]]).unwrap();
        assert!(LongitudinalDataset::new("g", vec![one], ModifierKind::Continuous).is_err());
    }

    #[test]
    fn modifier_kind_parsing() {
        assert_eq!("continuous".parse::<ModifierKind>().unwrap(), ModifierKind::Continuous);
        assert_eq!("discrete".parse::<ModifierKind>().unwrap(), ModifierKind::Discrete(vec![]));
        assert_eq!(
            "discrete:1,0".parse::<ModifierKind>().unwrap(),
            ModifierKind::Discrete(vec![0, 1])
        );
        assert!("ordinal".parse::<ModifierKind>().is_err());
    }
}
