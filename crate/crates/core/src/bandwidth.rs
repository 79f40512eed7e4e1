//! Leave-one-subject-out cross-validation of smoothing bandwidths.
//!
//! Whole subjects are held out: every observation of subject `i` is
//! predicted from a fit that excludes all of subject `i`'s observations and,
//! along the modifier axis, is centred at `Z_i`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{mean_sd, LongitudinalDataset};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::vc::{dot, BetaSlice, Design, FitOptions, MeanSlice, ModifierWindow};

/// Candidate bandwidths for the time and modifier axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthGrid {
    b1: Vec<f64>,
    /// Empty for discrete modifiers and time-only targets.
    b2: Vec<f64>,
}

impl BandwidthGrid {
    pub fn new(b1: Vec<f64>, b2: Vec<f64>) -> Result<Self> {
        if b1.is_empty() {
            return Err(Error::Domain("bandwidth grid has no time candidates".into()));
        }
        for axis in [&b1, &b2] {
            if axis.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(Error::Domain("bandwidth candidates must be positive".into()));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(
                    "bandwidth candidates must be strictly increasing".into(),
                ));
            }
        }
        Ok(BandwidthGrid { b1, b2 })
    }

    /// `n` geometrically spaced values from `lo` to `hi` inclusive.
    pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        (0..n)
            .map(|k| if k == n - 1 { hi } else { lo * ratio.powi(k as i32) })
            .collect()
    }

    /// Eight geometric points on `[0.05, 0.5] x range(t)` and, for continuous
    /// modifiers, on `[0.1, 1.0] x sd(Z)`.
    pub fn default_for(ds: &LongitudinalDataset) -> Result<Self> {
        Self::scaled_default(ds, 8)
    }

    pub fn scaled_default(ds: &LongitudinalDataset, points: usize) -> Result<Self> {
        let (lo, hi) = ds.time_range();
        let range = hi - lo;
        if !(range > 0.0) {
            return Err(Error::Domain("observation times have zero range".into()));
        }
        let b1 = Self::geometric(0.05 * range, 0.5 * range, points);
        let b2 = if ds.modifier_kind().is_discrete() {
            Vec::new()
        } else {
            let (_, sd) = mean_sd(&ds.modifiers());
            if !(sd > 0.0) {
                return Err(Error::Domain("modifier has zero spread".into()));
            }
            Self::geometric(0.1 * sd, sd, points)
        };
        Self::new(b1, b2)
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// The grid with the modifier axis dropped.
    pub fn time_only(&self) -> Self {
        BandwidthGrid {
            b1: self.b1.clone(),
            b2: Vec::new(),
        }
    }
}

/// What the held-out prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CvTarget {
    /// Outcome via `beta(t, z)`.
    Beta,
    /// Covariate `r` (1-based) via `E{X_r(t) | z}`.
    CondMean(usize),
    /// Outcome via time-only coefficients with the modifier as a regressor.
    TimeOnlyBeta,
    /// Covariate `r` via its time-only local mean.
    TimeOnlyMean(usize),
}

impl fmt::Display for CvTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvTarget::Beta => f.write_str("beta"),
            CvTarget::CondMean(r) => write!(f, "mean{r}"),
            CvTarget::TimeOnlyBeta => f.write_str("beta_time"),
            CvTarget::TimeOnlyMean(r) => write!(f, "mean{r}_time"),
        }
    }
}

impl CvTarget {
    fn time_only(self) -> bool {
        matches!(self, CvTarget::TimeOnlyBeta | CvTarget::TimeOnlyMean(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    /// Fraction of subjects held out in the outer loop; 1.0 is exact LOSO.
    pub subsample: f64,
    /// Seed for choosing the held-out subsample.
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            subsample: 1.0,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

/// Cross-validation score of one candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScore {
    pub b1: f64,
    pub b2: Option<f64>,
    /// Sum of squared held-out residuals over the points that could be predicted.
    pub score: f64,
    /// Per-held-out-subject contributions, in dataset order; `score` is their sum.
    pub per_subject: Vec<(usize, f64)>,
    pub n_used: usize,
    pub n_skipped: usize,
    /// More than half of the prediction points were skipped.
    pub disqualified: bool,
}

impl CvScore {
    /// Mean squared held-out residual, the quantity minimized.
    pub fn mean_score(&self) -> f64 {
        if self.n_used == 0 {
            f64::INFINITY
        } else {
            self.score / self.n_used as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub target: CvTarget,
    pub b1: f64,
    pub b2: Option<f64>,
    pub score_table: Vec<CvScore>,
    /// Prediction points skipped by the selected pair.
    pub n_skipped: usize,
}

/// Selects the candidate pair minimizing the leave-one-subject-out squared
/// prediction error. Ties go to the larger `b1`, then the larger `b2`.
pub fn select_bandwidths_cv(
    ds: &LongitudinalDataset,
    grid: &BandwidthGrid,
    target: CvTarget,
    kernel: KernelSpec,
    opts: &CvOptions,
) -> Result<CvResult> {
    if ds.n_subjects() < 3 {
        return Err(Error::Validation(
            "cross-validation needs at least 3 subjects".into(),
        ));
    }
    if let CvTarget::CondMean(r) | CvTarget::TimeOnlyMean(r) = target {
        if r == 0 || r > ds.p() {
            return Err(Error::Domain(format!("covariate index {r} outside 1..={}", ds.p())));
        }
    }
    let modifier_axis = !target.time_only() && !ds.modifier_kind().is_discrete();
    if modifier_axis && grid.b2.is_empty() {
        return Err(Error::Domain(
            "continuous modifier needs modifier bandwidth candidates".into(),
        ));
    }
    let b2s: Vec<Option<f64>> = if modifier_axis {
        grid.b2.iter().map(|&b| Some(b)).collect()
    } else {
        vec![None]
    };
    let held_out = held_out_subjects(ds.n_subjects(), opts)?;

    let table: Vec<CvScore> = grid
        .b1
        .par_iter()
        .map(|&b1| score_b1(ds, b1, &b2s, target, kernel, &held_out, &opts.fit))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    // scores equal up to rounding count as ties
    let y2 = ds.subjects().iter().flat_map(|s| s.outcomes()).map(|y| y * y).sum::<f64>() / ds.total_obs() as f64;
    let best = table
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, s)| !s.disqualified)
        .fold(None::<(usize, f64)>, |acc, (k, s)| {
            let m = s.mean_score();
            match acc {
                Some((_, bm)) if !(m < bm - 1e-10 * bm.abs() - 1e-20 * y2) => acc,
                _ => Some((k, m)),
            }
        });

    match best {
        Some((k, _)) => Ok(CvResult {
            target,
            b1: table[k].b1,
            b2: table[k].b2,
            n_skipped: table[k].n_skipped,
            score_table: table,
        }),
        None => {
            let suggestion = widen_until_viable(ds, grid, &b2s, target, kernel, &held_out, &opts.fit)?;
            Err(Error::GridTooNarrow { suggestion })
        }
    }
}

fn held_out_subjects(n: usize, opts: &CvOptions) -> Result<Vec<usize>> {
    let f = opts.subsample;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Domain(format!("cv subsample fraction {f} outside (0, 1]")));
    }
    let mut all: Vec<usize> = (0..n).collect();
    if f < 1.0 {
        let keep = ((f * n as f64).ceil() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        all.shuffle(&mut rng);
        all.truncate(keep);
        all.sort_unstable();
    }
    Ok(all)
}

/// Scores every `(b1, b2)` for one `b1`, sharing the time-kernel moments
/// across the modifier candidates.
fn score_b1(
    ds: &LongitudinalDataset,
    b1: f64,
    b2s: &[Option<f64>],
    target: CvTarget,
    kernel: KernelSpec,
    held_out: &[usize],
    fit: &FitOptions,
) -> Result<Vec<CvScore>> {
    let discrete = ds.modifier_kind().is_discrete();
    let mut per_subject: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(held_out.len()); b2s.len()];
    let mut used = vec![0usize; b2s.len()];
    let mut skipped = vec![0usize; b2s.len()];
    let mut total_points = 0usize;

    for &i in held_out {
        let s = &ds.subjects()[i];
        let zi = s.modifier();
        let mut ss = vec![0.0; b2s.len()];
        for j in 0..s.n_obs() {
            total_points += 1;
            let t = s.times()[j];
            let window = |b2: Option<f64>| -> ModifierWindow {
                if target.time_only() {
                    ModifierWindow::All
                } else if discrete {
                    ModifierWindow::Level(zi)
                } else {
                    ModifierWindow::Kernel {
                        z: zi,
                        bandwidth: b2.unwrap_or(f64::NAN),
                    }
                }
            };
            match target {
                CvTarget::Beta | CvTarget::TimeOnlyBeta => {
                    let design = if target.time_only() {
                        Design::TimeOnly
                    } else {
                        Design::VaryingCoefficient
                    };
                    let slice = BetaSlice::new(ds, t, b1, kernel, design)?;
                    let mut x = Vec::with_capacity(ds.p() + 2);
                    x.push(1.0);
                    x.extend_from_slice(s.covariate_row(j));
                    if design == Design::TimeOnly {
                        x.push(zi);
                    }
                    for (k, &b2) in b2s.iter().enumerate() {
                        match slice.fit(window(b2), Some(i), fit) {
                            Ok(est) => {
                                let r = s.outcomes()[j] - dot(&x, &est.beta);
                                ss[k] += r * r;
                                used[k] += 1;
                            }
                            Err(e) if e.is_local_fit_failure() => skipped[k] += 1,
                            Err(e) => return Err(e),
                        }
                    }
                }
                CvTarget::CondMean(r) | CvTarget::TimeOnlyMean(r) => {
                    let slice = MeanSlice::new(ds, r, t, b1, kernel)?;
                    let x = s.covariate_row(j)[r - 1];
                    for (k, &b2) in b2s.iter().enumerate() {
                        match slice.fit(window(b2), Some(i), fit) {
                            Ok(est) => {
                                let d = x - est.value;
                                ss[k] += d * d;
                                used[k] += 1;
                            }
                            Err(e) if e.is_local_fit_failure() => skipped[k] += 1,
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
        for (k, v) in ss.into_iter().enumerate() {
            per_subject[k].push((i, v));
        }
    }

    Ok(b2s
        .iter()
        .enumerate()
        .map(|(k, &b2)| {
            let score = per_subject[k].iter().map(|(_, v)| v).sum();
            CvScore {
                b1,
                b2,
                score,
                per_subject: std::mem::take(&mut per_subject[k]),
                n_used: used[k],
                n_skipped: skipped[k],
                disqualified: 2 * skipped[k] > total_points,
            }
        })
        .collect())
}

/// Scales the largest candidate pair up until it predicts at least half of
/// the points; describes the first viable pair found.
fn widen_until_viable(
    ds: &LongitudinalDataset,
    grid: &BandwidthGrid,
    b2s: &[Option<f64>],
    target: CvTarget,
    kernel: KernelSpec,
    held_out: &[usize],
    fit: &FitOptions,
) -> Result<String> {
    let b1_max = *grid.b1.last().unwrap_or(&1.0);
    let b2_max = b2s.last().copied().flatten();
    for step in 1..=12 {
        let f = 1.5f64.powi(step);
        let b2 = b2_max.map(|b| b * f);
        let scores = score_b1(ds, b1_max * f, &[b2], target, kernel, held_out, fit)?;
        if !scores[0].disqualified {
            return Ok(match b2 {
                Some(b2) => format!("b1={:.6}, b2={:.6}", b1_max * f, b2),
                None => format!("b1={:.6}", b1_max * f),
            });
        }
    }
    Ok("none found up to 130x the largest candidate".to_string())
}
