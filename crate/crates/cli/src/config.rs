//! Flat `key = value` run configuration. File values are read first, then
//! command-line flags override them; the resolved set is echoed into every
//! manifest, which can be fed back through `--config`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ldd::{KernelSpec, ModifierKind, Schema};

use crate::CliError;

/// Every recognised key, in manifest order.
pub const KEYS: [&str; 29] = [
    "input",
    "majority",
    "minority",
    "id-col",
    "group-col",
    "time-col",
    "outcome-col",
    "modifier-col",
    "covariates",
    "categorical",
    "modifier",
    "delimiter",
    "method",
    "zM",
    "zm",
    "kernel",
    "b1",
    "b2",
    "cv-grid",
    "cv-subsample",
    "boot-B",
    "alpha",
    "seed",
    "grid-points",
    "trim",
    "ridge",
    "preset",
    "n",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodKind {
    Ldd,
    Mldd,
    Cmldd,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub majority: String,
    pub minority: String,
    pub schema: Schema,
    /// `None` infers covariates from the file header.
    pub covariates: Option<Vec<String>>,
    pub method: MethodKind,
    pub z_major: Option<f64>,
    pub z_minor: Option<f64>,
    pub kernel: KernelSpec,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub cv_grid: usize,
    pub cv_subsample: f64,
    pub boot_b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid_points: usize,
    pub trim: f64,
    pub ridge: bool,
    pub preset: String,
    pub n: usize,
    pub out: PathBuf,
}

/// Parses a config file body. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", k + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::usage(format!("config line {}: unknown key `{key}`", k + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| CliError::usage(format!("invalid value `{v}` for `{key}`: {e}")))
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    pub fn resolve(raw: BTreeMap<String, String>) -> Result<Self, CliError> {
        let get = |k: &str| raw.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let or = |k: &str, d: &'static str| get(k).unwrap_or(d);
        let opt_f64 = |k: &str| get(k).map(|v| parse::<f64>(k, v)).transpose();

        let modifier_kind: ModifierKind = parse("modifier", or("modifier", "continuous"))?;
        let delimiter = match or("delimiter", ",") {
            "tab" | "\\t" => b'\t',
            d if d.len() == 1 => d.as_bytes()[0],
            d => return Err(CliError::usage(format!("delimiter `{d}` must be one character or `tab`"))),
        };
        let schema = Schema {
            id: or("id-col", "id").into(),
            group: or("group-col", "group").into(),
            time: or("time-col", "time").into(),
            outcome: or("outcome-col", "outcome").into(),
            modifier: or("modifier-col", "modifier").into(),
            covariates: Vec::new(),
            categorical: get("categorical").map(list).unwrap_or_default(),
            modifier_kind,
            delimiter,
        };
        let method = match or("method", "mldd") {
            "ldd" => MethodKind::Ldd,
            "mldd" => MethodKind::Mldd,
            "cmldd" => MethodKind::Cmldd,
            m => return Err(CliError::usage(format!("unknown method `{m}` (ldd, mldd, cmldd)"))),
        };
        let ridge = match or("ridge", "false") {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            v => return Err(CliError::usage(format!("invalid value `{v}` for `ridge`"))),
        };
        let cfg = RunConfig {
            input: get("input").map(PathBuf::from),
            majority: or("majority", "majority").into(),
            minority: or("minority", "minority").into(),
            schema,
            covariates: get("covariates").map(list),
            method,
            z_major: opt_f64("zM")?,
            z_minor: opt_f64("zm")?,
            kernel: parse("kernel", or("kernel", "epanechnikov"))?,
            b1: opt_f64("b1")?,
            b2: opt_f64("b2")?,
            cv_grid: parse("cv-grid", or("cv-grid", "8"))?,
            cv_subsample: parse("cv-subsample", or("cv-subsample", "1"))?,
            boot_b: parse("boot-B", or("boot-B", "500"))?,
            alpha: parse("alpha", or("alpha", "0.05"))?,
            seed: parse("seed", or("seed", "0"))?,
            grid_points: parse("grid-points", or("grid-points", "50"))?,
            trim: parse("trim", or("trim", "0.05"))?,
            ridge,
            preset: or("preset", "bilinear").into(),
            n: parse("n", or("n", "200"))?,
            out: PathBuf::from(or("out", "ldd-out")),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.method == MethodKind::Cmldd && (self.z_major.is_none() || self.z_minor.is_none()) {
            return Err(CliError::usage("method cmldd requires --zM and --zm"));
        }
        if self.schema.modifier_kind.is_discrete() && self.b2.is_some() {
            return Err(CliError::usage("a discrete modifier takes no modifier bandwidth (b2)"));
        }
        if self.b2.is_some() && self.b1.is_none() {
            return Err(CliError::usage("b2 given without b1"));
        }
        let needs_b2 = !self.schema.modifier_kind.is_discrete() && self.method != MethodKind::Ldd;
        if self.b1.is_some() && self.b2.is_none() && needs_b2 {
            return Err(CliError::usage("a continuous modifier needs b2 alongside b1"));
        }
        if self.cv_grid == 0 || self.grid_points == 0 {
            return Err(CliError::usage("cv-grid and grid-points must be positive"));
        }
        if self.majority == self.minority {
            return Err(CliError::usage("majority and minority labels must differ"));
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::usage("no input file (set `input` or pass --input)"))
    }

    /// Resolved values for every key, defaults included, with unset
    /// optional keys left out.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| x.to_string();
        let mut v: Vec<(&'static str, Option<String>)> = vec![
            ("input", self.input.as_ref().map(|p| p.display().to_string())),
            ("majority", Some(self.majority.clone())),
            ("minority", Some(self.minority.clone())),
            ("id-col", Some(self.schema.id.clone())),
            ("group-col", Some(self.schema.group.clone())),
            ("time-col", Some(self.schema.time.clone())),
            ("outcome-col", Some(self.schema.outcome.clone())),
            ("modifier-col", Some(self.schema.modifier.clone())),
            ("covariates", self.covariates.as_ref().map(|c| c.join(","))),
            (
                "categorical",
                (!self.schema.categorical.is_empty()).then(|| self.schema.categorical.join(",")),
            ),
            ("modifier", Some(self.schema.modifier_kind.to_string())),
            (
                "delimiter",
                Some(match self.schema.delimiter {
                    b'\t' => "tab".to_string(),
                    d => (d as char).to_string(),
                }),
            ),
            (
                "method",
                Some(
                    match self.method {
                        MethodKind::Ldd => "ldd",
                        MethodKind::Mldd => "mldd",
                        MethodKind::Cmldd => "cmldd",
                    }
                    .to_string(),
                ),
            ),
            ("zM", self.z_major.map(f)),
            ("zm", self.z_minor.map(f)),
            ("kernel", Some(self.kernel.to_string())),
            ("b1", self.b1.map(f)),
            ("b2", self.b2.map(f)),
            ("cv-grid", Some(self.cv_grid.to_string())),
            ("cv-subsample", Some(f(self.cv_subsample))),
            ("boot-B", Some(self.boot_b.to_string())),
            ("alpha", Some(f(self.alpha))),
            ("seed", Some(self.seed.to_string())),
            ("grid-points", Some(self.grid_points.to_string())),
            ("trim", Some(f(self.trim))),
            ("ridge", Some(self.ridge.to_string())),
            ("preset", Some(self.preset.clone())),
            ("n", Some(self.n.to_string())),
            ("out", Some(self.out.display().to_string())),
        ];
        debug_assert_eq!(v.len(), KEYS.len());
        v.drain(..).filter_map(|(k, val)| val.map(|val| (k, val))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> Result<RunConfig, CliError> {
        RunConfig::resolve(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    #[test]
    fn parses_file_syntax() {
        let m = parse_config("# comment\n\nmethod = ldd\n b1=0.2 \n").unwrap();
        assert_eq!(m["method"], "ldd");
        assert_eq!(m["b1"], "0.2");
        assert!(parse_config("nonsense = 1").is_err());
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn cmldd_needs_both_values() {
        assert_eq!(cfg(&[("method", "cmldd"), ("zM", "1")]).unwrap_err().code, 2);
        assert!(cfg(&[("method", "cmldd"), ("zM", "1"), ("zm", "0")]).is_ok());
    }

    #[test]
    fn discrete_forbids_b2() {
        assert!(cfg(&[("modifier", "discrete"), ("b1", "0.1"), ("b2", "0.2")]).is_err());
        assert!(cfg(&[("modifier", "discrete"), ("b1", "0.1")]).is_ok());
        assert!(cfg(&[("b1", "0.1")]).is_err());
        assert!(cfg(&[("b1", "0.1"), ("method", "ldd")]).is_ok());
    }

    #[test]
    fn echo_reloads_to_same_config() {
        let a = cfg(&[("method", "ldd"), ("alpha", "0.1"), ("b1", "0.25"), ("delimiter", "tab")]).unwrap();
        let text: String = a.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let b = RunConfig::resolve(parse_config(&text).unwrap()).unwrap();
        assert_eq!(a.echo(), b.echo());
    }
}
