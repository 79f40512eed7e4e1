//! Bootstrap simultaneous confidence bands.
//!
//! Subjects are resampled with replacement within each group, the
//! decomposition is re-estimated with the bandwidths held fixed, and the band
//! half-width at `t` is `se(t) * Q`, where `se(t)` is the bootstrap standard
//! deviation and `Q` the `(1 - alpha)` order statistic of the per-replicate
//! supremum of `|D_b(t) - D(t)| / se(t)`.
//!
//! Replicate `a` draws from ChaCha8 stream `a` of the run's key, so a
//! replicate is a pure function of `(seed, a)` and results do not depend on
//! scheduling or thread count.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::LongitudinalDataset;
use crate::decomposition::{
    estimate, estimate_unchecked, BandwidthBundle, Component, DecompositionConfig,
    DecompositionCurve, TimeGrid,
};
use crate::error::{Error, Result};

/// Domain separator so bootstrap streams never coincide with simulation streams.
const BOOTSTRAP_KEY: u64 = 0x5eed_b007_57a9_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Number of replicates `B`.
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Keep the `B x grid` replicate matrices in the results.
    pub keep_replicates: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 500,
            alpha: 0.05,
            seed: 0,
            keep_replicates: false,
        }
    }
}

/// Band for one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScbResult {
    pub component: Component,
    pub grid: Vec<f64>,
    pub point: Vec<Option<f64>>,
    /// Bootstrap standard error; `None` where fewer than two replicates exist.
    pub se: Vec<Option<f64>>,
    pub q_alpha: f64,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Per-replicate suprema that entered the quantile.
    pub sup_stats: Vec<f64>,
    /// Grid indices left out of the supremum (missing estimate or zero spread).
    pub excluded: Vec<usize>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub replicate_curves: Option<Vec<Vec<Option<f64>>>>,
}

impl ScbResult {
    /// Whether `f(t)` lies inside the band at every grid point with a band.
    pub fn covers(&self, f: impl Fn(f64) -> f64) -> bool {
        self.grid.iter().enumerate().all(|(k, &t)| match (self.lower[k], self.upper[k]) {
            (Some(l), Some(u)) => {
                let v = f(t);
                l <= v && v <= u
            }
            _ => true,
        })
    }
}

/// Everything produced by [`bootstrap_scb`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapOutput {
    pub estimate: DecompositionCurve,
    /// One band per component, in `D, D1, D2, D3` order.
    pub bands: Vec<ScbResult>,
    /// Replicate draws attempted, including redraws.
    pub attempts: usize,
}

/// Index of the `(1 - alpha)` order statistic among `b` sorted values (0-based).
pub fn quantile_index(alpha: f64, b: usize) -> usize {
    // the small slack keeps e.g. 0.95 * 200 from rounding up to 191
    let k = ((1.0 - alpha) * b as f64 - 1e-9).ceil() as usize;
    k.clamp(1, b) - 1
}

/// Computes `se(t)`, the suprema, `Q` and the band from a point curve and a
/// replicate matrix (`replicates[b][k]`, `None` for a missing value).
pub fn scb_from_replicates(
    component: Component,
    grid: &[f64],
    point: &[Option<f64>],
    replicates: &[Vec<Option<f64>>],
    alpha: f64,
) -> Result<ScbResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    let g = grid.len();
    if point.len() != g || replicates.iter().any(|r| r.len() != g) {
        return Err(Error::Domain("replicate matrix does not match the grid".into()));
    }

    let mut se = vec![None; g];
    let mut excluded = Vec::new();
    for k in 0..g {
        let vals: Vec<f64> = replicates.iter().filter_map(|r| r[k]).collect();
        if point[k].is_some() && vals.len() >= 2 {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
            se[k] = Some((ss / (n - 1.0)).sqrt());
        }
        match (point[k], se[k]) {
            (Some(_), Some(s)) if s > 0.0 => {}
            (Some(_), Some(_)) => {
                warn!("{component}: zero bootstrap spread at t={}, excluded from the supremum", grid[k]);
                excluded.push(k);
            }
            _ => excluded.push(k),
        }
    }
    if excluded.len() == g {
        return Err(Error::AllPointsExcluded);
    }

    let mut sup_stats = Vec::with_capacity(replicates.len());
    let mut partial = 0usize;
    for r in replicates {
        let mut sup: Option<f64> = None;
        for k in 0..g {
            if excluded.binary_search(&k).is_ok() {
                continue;
            }
            match (r[k], point[k], se[k]) {
                (Some(v), Some(p), Some(s)) => {
                    let dev = (v - p).abs() / s;
                    sup = Some(sup.map_or(dev, |m: f64| m.max(dev)));
                }
                _ => partial += 1,
            }
        }
        if let Some(s) = sup {
            sup_stats.push(s);
        }
    }
    if partial > 0 {
        warn!("{component}: {partial} missing replicate values skipped in the supremum");
    }
    if sup_stats.is_empty() {
        return Err(Error::AllPointsExcluded);
    }
    let mut sorted = sup_stats.clone();
    sorted.sort_by(f64::total_cmp);
    let q_alpha = sorted[quantile_index(alpha, sorted.len())];

    let lower = (0..g)
        .map(|k| match (point[k], se[k]) {
            (Some(p), Some(s)) => Some(p - s * q_alpha),
            _ => None,
        })
        .collect();
    let upper = (0..g)
        .map(|k| match (point[k], se[k]) {
            (Some(p), Some(s)) => Some(p + s * q_alpha),
            _ => None,
        })
        .collect();

    Ok(ScbResult {
        component,
        grid: grid.to_vec(),
        point: point.to_vec(),
        se,
        q_alpha,
        lower,
        upper,
        sup_stats,
        excluded,
        replicates: replicates.len(),
        alpha,
        seed: 0,
        replicate_curves: None,
    })
}

/// Subject indices for replicate `attempt`: `n_major` draws for the majority,
/// then `n_minor` for the minority.
pub fn resample_indices(seed: u64, attempt: u64, n_major: usize, n_minor: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BOOTSTRAP_KEY);
    rng.set_stream(attempt);
    let a = (0..n_major).map(|_| rng.random_range(0..n_major)).collect();
    let b = (0..n_minor).map(|_| rng.random_range(0..n_minor)).collect();
    (a, b)
}

fn replicate(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
    seed: u64,
    attempt: u64,
) -> Result<Option<DecompositionCurve>> {
    let (ia, ib) = resample_indices(seed, attempt, maj.n_subjects(), min.n_subjects());
    let bm = maj.resample(&ia)?;
    let bn = min.resample(&ib)?;
    match estimate_unchecked(&bm, &bn, grid, bw, cfg) {
        Ok(c) if c.n_missing() * 5 <= grid.len() => Ok(Some(c)),
        Ok(_) => Ok(None),
        // e.g. a discrete level lost in the resample
        Err(e) if e.is_local_fit_failure() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Point estimate plus bootstrap bands for `D, D1, D2, D3`, all from the same
/// resamples. Replicates with more than 20% missing grid points are redrawn,
/// up to `2B` attempts in total.
pub fn bootstrap_scb(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapOutput> {
    if boot.replicates < 50 {
        return Err(Error::Domain(format!(
            "need at least 50 bootstrap replicates, got {}",
            boot.replicates
        )));
    }
    if !(boot.alpha > 0.0 && boot.alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {} outside (0, 1)", boot.alpha)));
    }
    let point = estimate(maj, min, grid, bw, cfg)?;

    let b = boot.replicates;
    let cap = 2 * b;
    let mut accepted: Vec<DecompositionCurve> = Vec::with_capacity(b);
    let mut next = 0usize;
    while accepted.len() < b && next < cap {
        let batch = (b - accepted.len()).min(cap - next);
        let draws = (next..next + batch)
            .into_par_iter()
            .map(|a| replicate(maj, min, grid, bw, cfg, boot.seed, a as u64))
            .collect::<Result<Vec<_>>>()?;
        next += batch;
        accepted.extend(draws.into_iter().flatten());
    }
    if accepted.len() < b {
        warn!(
            "only {} of {b} bootstrap replicates usable after {cap} attempts",
            accepted.len()
        );
    }
    if accepted.len() < 2 {
        return Err(Error::AllPointsExcluded);
    }

    let bands = Component::ALL
        .iter()
        .map(|&c| {
            let reps: Vec<Vec<Option<f64>>> =
                accepted.iter().map(|r| r.component(c).to_vec()).collect();
            let mut res = scb_from_replicates(c, grid.points(), point.component(c), &reps, boot.alpha)?;
            res.seed = boot.seed;
            if boot.keep_replicates {
                res.replicate_curves = Some(reps);
            }
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BootstrapOutput {
        estimate: point,
        bands,
        attempts: next,
    })
}

/// Tidy band table: `component,t,estimate,se,lower,upper`, one row per grid
/// point per band.
pub fn bands_to_csv(bands: &[ScbResult]) -> String {
    use crate::{fmt_f64, fmt_opt};
    let mut out = String::from("component,t,estimate,se,lower,upper\n");
    for b in bands {
        for k in 0..b.grid.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.component,
                fmt_f64(b.grid[k]),
                fmt_opt(b.point[k]),
                fmt_opt(b.se[k]),
                fmt_opt(b.lower[k]),
                fmt_opt(b.upper[k]),
            ));
        }
    }
    out
}

/// Per-component table `t,estimate,se,lower,upper`.
pub fn band_table_csv(band: &ScbResult) -> String {
    use crate::{fmt_f64, fmt_opt};
    let mut out = String::from("t,estimate,se,lower,upper\n");
    for k in 0..band.grid.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(band.grid[k]),
            fmt_opt(band.point[k]),
            fmt_opt(band.se[k]),
            fmt_opt(band.lower[k]),
            fmt_opt(band.upper[k])
        ));
    }
    out
}

/// Plotting table `component,t,estimate,lower,upper`; header only for an
/// empty list.
pub fn plot_data_csv(bands: &[ScbResult]) -> String {
    use crate::{fmt_f64, fmt_opt};
    let mut out = String::from("component,t,estimate,lower,upper\n");
    for b in bands {
        for k in 0..b.grid.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.component,
                fmt_f64(b.grid[k]),
                fmt_opt(b.point[k]),
                fmt_opt(b.lower[k]),
                fmt_opt(b.upper[k])
            ));
        }
    }
    out
}

pub fn write_plot_data(bands: &[ScbResult], path: impl AsRef<std::path::Path>) -> Result<()> {
    std::fs::write(path.as_ref(), plot_data_csv(bands))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_example() {
        let reps = vec![
            vec![Some(1.0), Some(2.0)],
            vec![Some(3.0), Some(2.0)],
            vec![Some(2.0), Some(2.0)],
        ];
        let point = [Some(2.0), Some(2.0)];
        let r = scb_from_replicates(Component::D, &[0.0, 1.0], &point, &reps, 0.05).unwrap();
        assert_eq!(r.se, vec![Some(1.0), Some(0.0)]);
        assert_eq!(r.excluded, vec![1]);
        assert_eq!(r.sup_stats, vec![1.0, 1.0, 0.0]);
        assert_eq!(quantile_index(0.05, 3), 2);
        assert_eq!(r.q_alpha, 1.0);
        assert_eq!(r.lower, vec![Some(1.0), Some(2.0)]);
        assert_eq!(r.upper, vec![Some(3.0), Some(2.0)]);
    }

    #[test]
    fn quantile_index_convention() {
        assert_eq!(quantile_index(0.05, 200), 189);
        assert_eq!(quantile_index(0.05, 500), 474);
        assert_eq!(quantile_index(0.5, 4), 1);
        assert_eq!(quantile_index(0.999, 10), 0);
    }

    #[test]
    fn all_excluded_is_error() {
        let reps = vec![vec![Some(1.0)], vec![Some(1.0)]];
        assert_eq!(
            scb_from_replicates(Component::D, &[0.0], &[Some(1.0)], &reps, 0.1).unwrap_err(),
            Error::AllPointsExcluded
        );
    }

    #[test]
    fn missing_point_gets_no_band() {
        let reps = vec![vec![Some(1.0), None], vec![Some(2.0), Some(1.0)], vec![Some(0.0), None]];
        let r = scb_from_replicates(Component::D1, &[0.0, 1.0], &[Some(1.0), None], &reps, 0.1).unwrap();
        assert_eq!(r.lower[1], None);
        assert_eq!(r.excluded, vec![1]);
        assert_eq!(r.sup_stats.len(), 3);
    }

    #[test]
    fn resampling_is_reproducible() {
        let a = resample_indices(11, 3, 10, 7);
        let b = resample_indices(11, 3, 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 10);
        assert_eq!(a.1.len(), 7);
        assert!(a.0.iter().all(|&i| i < 10) && a.1.iter().all(|&i| i < 7));
        assert_ne!(resample_indices(11, 4, 10, 7), a);
    }

    #[test]
    fn plot_data_without_bands_is_header_only() {
        assert_eq!(plot_data_csv(&[]), "component,t,estimate,lower,upper\n");
    }
}
