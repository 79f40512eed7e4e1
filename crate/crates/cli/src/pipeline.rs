//! Subcommand stages. Every number written here comes from a library call;
//! this module only sequences the calls and writes their results.

use std::fmt::Write as _;
use std::path::Path;

use ldd::data::{summary_to_csv, write_datasets};
use ldd::inference::{band_table_csv, plot_data_csv, BootstrapOutput};
use ldd::simulation::true_conditional_decomposition;
use ldd::{
    bootstrap_scb, estimate, fmt_f64, fmt_opt, generate, load_dataset, select_bandwidths_cv, summarize,
    true_decomposition, BandwidthBundle, BandwidthGrid, BandwidthPair, Bandwidths, BootstrapConfig, Component,
    CvOptions, CvResult, CvTarget, DecompositionConfig, DecompositionCurve, DgpConfig, FitOptions,
    LongitudinalDataset, Method, TimeGrid,
};
use log::info;

use crate::config::{MethodKind, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    Summarize,
    SelectBandwidths,
    Decompose,
    Scb,
    Run,
    Simulate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Summarize => "summarize",
            Stage::SelectBandwidths => "select-bandwidths",
            Stage::Decompose => "decompose",
            Stage::Scb => "scb",
            Stage::Run => "run",
            Stage::Simulate => "simulate",
        }
    }
}

/// Resolved config plus results, written as `manifest.txt`. Result lines are
/// comments so the file can be passed back through `--config`.
struct Manifest {
    text: String,
}

impl Manifest {
    fn new(stage: Stage, cfg: &RunConfig) -> Self {
        let mut text = format!("# ldd {} {}\n", env!("CARGO_PKG_VERSION"), stage.name());
        for (k, v) in cfg.echo() {
            let _ = writeln!(text, "{k} = {v}");
        }
        text.push_str("# --- results ---\n");
        Manifest { text }
    }

    fn result(&mut self, key: impl AsRef<str>, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "# {} = {}", key.as_ref(), value.as_ref());
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
}

impl<'a> Artifacts<'a> {
    fn create(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        Ok(Artifacts { dir })
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }
}

fn method(cfg: &RunConfig) -> Method {
    match cfg.method {
        MethodKind::Ldd => Method::Ldd,
        MethodKind::Mldd => Method::Mldd,
        MethodKind::Cmldd => Method::Cmldd {
            z_major: cfg.z_major.unwrap_or_default(),
            z_minor: cfg.z_minor.unwrap_or_default(),
        },
    }
}

fn decomposition_config(cfg: &RunConfig) -> DecompositionConfig {
    DecompositionConfig {
        method: method(cfg),
        kernel: cfg.kernel,
        fit: FitOptions {
            ridge: cfg.ridge,
            ..FitOptions::default()
        },
    }
}

fn load(cfg: &RunConfig) -> Result<(LongitudinalDataset, LongitudinalDataset), CliError> {
    let path = cfg.require_input()?;
    let schema = match &cfg.covariates {
        Some(c) => ldd::Schema {
            covariates: c.clone(),
            ..cfg.schema.clone()
        },
        None => cfg.schema.clone().with_inferred_covariates(path)?,
    };
    let maj = load_dataset(path, &schema, &cfg.majority)?;
    let min = load_dataset(path, &schema, &cfg.minority)?;
    info!(
        "loaded {} ({} subjects) and {} ({} subjects)",
        maj.group(),
        maj.n_subjects(),
        min.group(),
        min.n_subjects()
    );
    Ok((maj, min))
}

struct Selection {
    bundle: BandwidthBundle,
    /// `(group, result)` per cross-validated target; empty for fixed bandwidths.
    cv: Vec<(String, CvResult)>,
}

fn select(cfg: &RunConfig, maj: &LongitudinalDataset, min: &LongitudinalDataset) -> Result<Selection, CliError> {
    let time_only = cfg.method == MethodKind::Ldd;
    if let Some(b1) = cfg.b1 {
        let b2 = if time_only { None } else { cfg.b2 };
        let pair = BandwidthPair::new(b1, b2);
        return Ok(Selection {
            bundle: BandwidthBundle {
                majority: Bandwidths::uniform(pair, maj.p()),
                minority: Bandwidths::uniform(pair, min.p()),
            },
            cv: Vec::new(),
        });
    }
    let opts = CvOptions {
        subsample: cfg.cv_subsample,
        seed: cfg.seed,
        fit: decomposition_config(cfg).fit,
    };
    let mut cv = Vec::new();
    let mut per_group = Vec::new();
    for ds in [maj, min] {
        let mut grid = BandwidthGrid::scaled_default(ds, cfg.cv_grid)?;
        if time_only {
            grid = grid.time_only();
        }
        let mut targets = vec![if time_only { CvTarget::TimeOnlyBeta } else { CvTarget::Beta }];
        targets.extend((1..=ds.p()).map(|r| {
            if time_only {
                CvTarget::TimeOnlyMean(r)
            } else {
                CvTarget::CondMean(r)
            }
        }));
        let mut pairs = Vec::new();
        for target in targets {
            let res = select_bandwidths_cv(ds, &grid, target, cfg.kernel, &opts)?;
            info!("{} {target}: b1={} b2={:?}", ds.group(), res.b1, res.b2);
            pairs.push(BandwidthPair::new(res.b1, res.b2));
            cv.push((ds.group().to_string(), res));
        }
        per_group.push(Bandwidths {
            beta: pairs[0],
            cond_means: pairs[1..].to_vec(),
        });
    }
    let minority = per_group.pop().expect("two groups");
    let majority = per_group.pop().expect("two groups");
    Ok(Selection {
        bundle: BandwidthBundle { majority, minority },
        cv,
    })
}

fn bandwidth_tables(sel: &Selection, maj: &str, min: &str) -> (String, String) {
    let mut chosen = String::from("group,target,b1,b2,mean_score,n_skipped\n");
    let mut scores = String::from("group,target,b1,b2,score,mean_score,n_used,n_skipped,disqualified\n");
    if sel.cv.is_empty() {
        for (g, bw) in [(maj, &sel.bundle.majority), (min, &sel.bundle.minority)] {
            let rows = std::iter::once(("beta".to_string(), bw.beta))
                .chain(bw.cond_means.iter().enumerate().map(|(r, p)| (format!("mean{}", r + 1), *p)));
            for (target, p) in rows {
                let _ = writeln!(chosen, "{g},{target},{},{},NA,NA", fmt_f64(p.time), fmt_opt(p.modifier));
            }
        }
        return (chosen, scores);
    }
    for (g, res) in &sel.cv {
        let best = res
            .score_table
            .iter()
            .find(|s| s.b1 == res.b1 && s.b2 == res.b2)
            .map(|s| s.mean_score());
        let _ = writeln!(
            chosen,
            "{g},{},{},{},{},{}",
            res.target,
            fmt_f64(res.b1),
            fmt_opt(res.b2),
            fmt_opt(best),
            res.n_skipped
        );
        for s in &res.score_table {
            let _ = writeln!(
                scores,
                "{g},{},{},{},{},{},{},{},{}",
                res.target,
                fmt_f64(s.b1),
                fmt_opt(s.b2),
                fmt_f64(s.score),
                fmt_f64(s.mean_score()),
                s.n_used,
                s.n_skipped,
                s.disqualified
            );
        }
    }
    (chosen, scores)
}

fn record_selection(m: &mut Manifest, sel: &Selection) {
    for (label, bw) in [("majority", &sel.bundle.majority), ("minority", &sel.bundle.minority)] {
        let pairs = std::iter::once(("beta".to_string(), bw.beta))
            .chain(bw.cond_means.iter().enumerate().map(|(r, p)| (format!("mean{}", r + 1), *p)));
        for (target, p) in pairs {
            m.result(
                format!("bandwidth.{label}.{target}"),
                format!("{},{}", fmt_f64(p.time), fmt_opt(p.modifier)),
            );
        }
    }
    m.result("bandwidth.mode", if sel.cv.is_empty() { "fixed" } else { "cv" });
    for (g, res) in &sel.cv {
        m.result(format!("cv.{g}.{}.n_skipped", res.target), res.n_skipped.to_string());
    }
}

fn grid(cfg: &RunConfig, maj: &LongitudinalDataset, min: &LongitudinalDataset) -> Result<TimeGrid, CliError> {
    Ok(TimeGrid::common_support(maj, min, cfg.grid_points, cfg.trim)?)
}

fn record_curve(m: &mut Manifest, curve: &DecompositionCurve) {
    let g = curve.grid.points();
    m.result("grid", format!("{} points on [{}, {}]", g.len(), fmt_f64(g[0]), fmt_f64(g[g.len() - 1])));
    m.result("missing_points", curve.n_missing().to_string());
}

fn write_point_estimate(a: &Artifacts, curve: &DecompositionCurve) -> Result<(), CliError> {
    a.write("decomposition.csv", &curve.to_csv())?;
    for c in Component::ALL {
        a.write(&format!("curve_{}.csv", c.name()), &curve.component_table_csv(c))?;
    }
    Ok(())
}

fn write_bands(a: &Artifacts, m: &mut Manifest, out: &BootstrapOutput) -> Result<(), CliError> {
    a.write("decomposition.csv", &out.estimate.to_csv())?;
    for band in &out.bands {
        a.write(&format!("curve_{}.csv", band.component.name()), &band_table_csv(band))?;
        let name = band.component.name();
        m.result(format!("scb.{name}.q_alpha"), fmt_f64(band.q_alpha));
        let excluded: Vec<String> = band.excluded.iter().map(|k| k.to_string()).collect();
        m.result(format!("scb.{name}.excluded"), excluded.join(","));
    }
    a.write("plot_data.csv", &plot_data_csv(&out.bands))?;
    m.result("bootstrap.attempts", out.attempts.to_string());
    m.result("bootstrap.seed", out.bands.first().map(|b| b.seed).unwrap_or_default().to_string());
    Ok(())
}

pub fn execute(stage: Stage, cfg: &RunConfig) -> Result<(), CliError> {
    if stage == Stage::Simulate {
        return simulate(cfg);
    }
    let (maj, min) = load(cfg)?;
    let a = Artifacts::create(&cfg.out)?;
    let mut m = Manifest::new(stage, cfg);
    m.result("seed", cfg.seed.to_string());

    if matches!(stage, Stage::Summarize | Stage::Run) {
        a.write("summary.csv", &summary_to_csv(&[summarize(&maj), summarize(&min)]))?;
    }
    if stage != Stage::Summarize {
        let sel = select(cfg, &maj, &min)?;
        let (chosen, scores) = bandwidth_tables(&sel, maj.group(), min.group());
        a.write("bandwidths.csv", &chosen)?;
        if !sel.cv.is_empty() {
            a.write("cv_scores.csv", &scores)?;
        }
        record_selection(&mut m, &sel);
        let grid = grid(cfg, &maj, &min)?;
        let dcfg = decomposition_config(cfg);
        match stage {
            Stage::Decompose => {
                let curve = estimate(&maj, &min, &grid, &sel.bundle, &dcfg)?;
                record_curve(&mut m, &curve);
                write_point_estimate(&a, &curve)?;
            }
            Stage::Scb | Stage::Run => {
                let boot = BootstrapConfig {
                    replicates: cfg.boot_b,
                    alpha: cfg.alpha,
                    seed: cfg.seed,
                    keep_replicates: false,
                };
                let out = bootstrap_scb(&maj, &min, &grid, &sel.bundle, &dcfg, &boot)?;
                record_curve(&mut m, &out.estimate);
                write_bands(&a, &mut m, &out)?;
            }
            _ => {}
        }
    }
    a.write("manifest.txt", &m.text)
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut dgp = DgpConfig::preset(&cfg.preset, cfg.n, cfg.seed)?;
    dgp.majority.label = cfg.majority.clone();
    dgp.minority.label = cfg.minority.clone();
    let (maj, min) = generate(&dgp)?;
    let a = Artifacts::create(&cfg.out)?;
    let path = cfg.out.join("data.csv");
    write_datasets(&path, &[&maj, &min])?;
    let grid = TimeGrid::trimmed(0.0, 1.0, cfg.grid_points, cfg.trim)?;
    a.write("truth.csv", &true_decomposition(&dgp, &grid)?.to_csv())?;
    if let (Some(zm_major), Some(zm_minor)) = (cfg.z_major, cfg.z_minor) {
        let c = true_conditional_decomposition(&dgp, &grid, zm_major, zm_minor)?;
        a.write("truth_conditional.csv", &c.to_csv())?;
    }
    let json = serde_json::to_string_pretty(&dgp).map_err(|e| CliError::io(e.to_string()))?;
    a.write("dgp.json", &(json + "\n"))?;
    let mut m = Manifest::new(Stage::Simulate, cfg);
    m.result("seed", cfg.seed.to_string());
    m.result("modifier", dgp.modifier_kind().to_string());
    m.result("subjects", format!("{},{}", maj.n_subjects(), min.n_subjects()));
    m.result("observations", format!("{},{}", maj.total_obs(), min.total_obs()));
    a.write("manifest.txt", &m.text)
}
