//! Plug-in estimates of the longitudinal disparity decompositions.
//!
//! All three methods report `D(t) = D1(t) + D2(t) + D3(t)` on a time grid:
//!
//! - `D1`, the unexplained part, weighs the coefficient gap
//!   `beta^M - beta^m` by the majority covariate means;
//! - `D2` is the covariate-explained part with the majority modifier law
//!   imposed on both groups;
//! - `D3` is the part explained by the modifier (its mean shift for the
//!   time-only method, its whole law for the marginal method, the two
//!   conditioning values for the conditional one).
//!
//! The pseudo-outcome always pairs majority covariates with minority
//! coefficients.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{mean_sd, LongitudinalDataset, ModifierKind};
use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, KernelSpec};
use crate::vc::{dot, BetaSlice, Design, FitOptions, MeanSlice, ModifierWindow};

/// Decomposition flavour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    /// Modifier as an ordinary regressor with time-only coefficients.
    Ldd,
    /// Marginal over both groups' modifier distributions.
    Mldd,
    /// Conditional on a majority value `z_major` and a minority value `z_minor`.
    Cmldd { z_major: f64, z_minor: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ldd => "ldd",
            Method::Mldd => "mldd",
            Method::Cmldd { .. } => "cmldd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Component {
    D,
    D1,
    D2,
    D3,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::D, Component::D1, Component::D2, Component::D3];

    pub fn name(self) -> &'static str {
        match self {
            Component::D => "D",
            Component::D1 => "D1",
            Component::D2 => "D2",
            Component::D3 => "D3",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "D" => Ok(Component::D),
            "D1" => Ok(Component::D1),
            "D2" => Ok(Component::D2),
            "D3" => Ok(Component::D3),
            other => Err(Error::Domain(format!("unknown component `{other}`"))),
        }
    }
}

/// Strictly increasing evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("time grid is empty".into()));
        }
        if points.iter().any(|t| !t.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
        }
        Ok(TimeGrid { points })
    }

    /// `n` equally spaced points on `[lo, hi]` after trimming `trim * (hi - lo)` from each end.
    pub fn trimmed(lo: f64, hi: f64, n: usize, trim: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&trim) {
            return Err(Error::Domain(format!("trim {trim} outside [0, 0.5)")));
        }
        if !(hi > lo) {
            return Err(Error::Domain(format!("empty time range [{lo}, {hi}]")));
        }
        let a = lo + trim * (hi - lo);
        let b = hi - trim * (hi - lo);
        match n {
            0 => Err(Error::Domain("time grid needs at least one point".into())),
            1 => Self::new(vec![0.5 * (a + b)]),
            _ => Self::new(
                (0..n)
                    .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                    .collect(),
            ),
        }
    }

    /// Grid over the common support of both groups' observation times.
    pub fn common_support(
        maj: &LongitudinalDataset,
        min: &LongitudinalDataset,
        n: usize,
        trim: f64,
    ) -> Result<Self> {
        let (a0, a1) = maj.time_range();
        let (b0, b1) = min.time_range();
        Self::trimmed(a0.max(b0), a1.min(b1), n, trim)
    }

    /// Default grid: 50 points, 5% trimmed from each end of the common support.
    pub fn default_for(maj: &LongitudinalDataset, min: &LongitudinalDataset) -> Result<Self> {
        Self::common_support(maj, min, 50, 0.05)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Time bandwidth plus, for continuous modifiers, the modifier bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthPair {
    pub time: f64,
    pub modifier: Option<f64>,
}

impl BandwidthPair {
    pub fn new(time: f64, modifier: Option<f64>) -> Self {
        BandwidthPair { time, modifier }
    }
}

/// One group's bandwidths: coefficients and each covariate's conditional mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bandwidths {
    pub beta: BandwidthPair,
    pub cond_means: Vec<BandwidthPair>,
}

impl Bandwidths {
    /// The same pair for the coefficients and all `p` conditional means.
    pub fn uniform(pair: BandwidthPair, p: usize) -> Self {
        Bandwidths {
            beta: pair,
            cond_means: vec![pair; p],
        }
    }

    fn validate(&self, ds: &LongitudinalDataset, time_only: bool) -> Result<()> {
        if self.cond_means.len() != ds.p() {
            return Err(Error::Domain(format!(
                "group `{}`: {} conditional-mean bandwidths for {} covariates",
                ds.group(),
                self.cond_means.len(),
                ds.p()
            )));
        }
        let needs_b2 = !time_only && !ds.modifier_kind().is_discrete();
        for pair in std::iter::once(&self.beta).chain(&self.cond_means) {
            check_bandwidth(pair.time)?;
            match (needs_b2, pair.modifier) {
                (true, Some(b)) => check_bandwidth(b)?,
                (true, None) => {
                    return Err(Error::Domain(format!(
                        "group `{}`: continuous modifier needs a modifier bandwidth",
                        ds.group()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthBundle {
    pub majority: Bandwidths,
    pub minority: Bandwidths,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionConfig {
    pub method: Method,
    pub kernel: KernelSpec,
    pub fit: FitOptions,
}

impl DecompositionConfig {
    pub fn new(method: Method) -> Self {
        DecompositionConfig {
            method,
            kernel: KernelSpec::default(),
            fit: FitOptions::default(),
        }
    }
}

/// The four component curves on a grid; `None` marks a gap where a required
/// local fit failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionCurve {
    pub method: Method,
    pub grid: TimeGrid,
    pub d: Vec<Option<f64>>,
    pub d1: Vec<Option<f64>>,
    pub d2: Vec<Option<f64>>,
    pub d3: Vec<Option<f64>>,
    /// `(z^M, z^m)` for conditional decompositions.
    pub conditioning: Option<(f64, f64)>,
}

impl DecompositionCurve {
    pub fn component(&self, c: Component) -> &[Option<f64>] {
        match c {
            Component::D => &self.d,
            Component::D1 => &self.d1,
            Component::D2 => &self.d2,
            Component::D3 => &self.d3,
        }
    }

    pub fn n_missing(&self) -> usize {
        self.d.iter().filter(|v| v.is_none()).count()
    }

    fn from_points(method: Method, grid: TimeGrid, pts: Vec<Option<[f64; 3]>>) -> Self {
        let conditioning = match method {
            Method::Cmldd { z_major, z_minor } => Some((z_major, z_minor)),
            _ => None,
        };
        let mut c = DecompositionCurve {
            method,
            grid,
            d: Vec::with_capacity(pts.len()),
            d1: Vec::with_capacity(pts.len()),
            d2: Vec::with_capacity(pts.len()),
            d3: Vec::with_capacity(pts.len()),
            conditioning,
        };
        for p in pts {
            c.d1.push(p.map(|v| v[0]));
            c.d2.push(p.map(|v| v[1]));
            c.d3.push(p.map(|v| v[2]));
            c.d.push(p.map(|v| v[0] + v[1] + v[2]));
        }
        c
    }

    /// Tab-free CSV with columns `t,D,D1,D2,D3`; gaps written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,D,D1,D2,D3\n");
        for (k, t) in self.grid.points().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::fmt_f64(*t),
                crate::fmt_opt(self.d[k]),
                crate::fmt_opt(self.d1[k]),
                crate::fmt_opt(self.d2[k]),
                crate::fmt_opt(self.d3[k]),
            ));
        }
        out
    }

    /// Table `t,estimate,se,lower,upper` for one component, without bands.
    pub fn component_table_csv(&self, c: Component) -> String {
        let mut out = String::from("t,estimate,se,lower,upper\n");
        for (t, v) in self.grid.points().iter().zip(self.component(c)) {
            out.push_str(&format!("{},{},NA,NA,NA\n", crate::fmt_f64(*t), crate::fmt_opt(*v)));
        }
        out
    }
}

fn check_inputs(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    bw: &BandwidthBundle,
    method: Method,
) -> Result<()> {
    if maj.p() != min.p() {
        return Err(Error::Validation(format!(
            "groups differ in covariate count ({} vs {})",
            maj.p(),
            min.p()
        )));
    }
    if !maj.modifier_kind().same_variant(min.modifier_kind()) {
        return Err(Error::Validation("groups differ in modifier kind".into()));
    }
    let time_only = method == Method::Ldd;
    bw.majority.validate(maj, time_only)?;
    bw.minority.validate(min, time_only)?;

    let has_level = |ds: &LongitudinalDataset, z: f64| ds.modifiers().contains(&z);
    if let ModifierKind::Discrete(_) = maj.modifier_kind() {
        match method {
            Method::Mldd => {
                for z in maj.modifiers() {
                    if !has_level(min, z) {
                        return Err(Error::EmptyLevel { level: z });
                    }
                }
            }
            Method::Cmldd { z_major, z_minor } => {
                if !has_level(maj, z_major) || !has_level(min, z_major) {
                    return Err(Error::EmptyLevel { level: z_major });
                }
                if !has_level(min, z_minor) {
                    return Err(Error::EmptyLevel { level: z_minor });
                }
            }
            Method::Ldd => {}
        }
    }
    Ok(())
}

/// Computes the curve without the missing-fraction limit; gaps are kept.
pub fn estimate_unchecked(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
) -> Result<DecompositionCurve> {
    check_inputs(maj, min, bw, cfg.method)?;
    let pts = grid
        .points()
        .par_iter()
        .map(|&t| {
            let r = match cfg.method {
                Method::Ldd => ldd_point(maj, min, t, bw, cfg),
                Method::Mldd => mldd_point(maj, min, t, bw, cfg),
                Method::Cmldd { z_major, z_minor } => {
                    cmldd_point(maj, min, t, bw, cfg, z_major, z_minor)
                }
            };
            match r {
                Ok(v) => Ok(Some(v)),
                Err(e) if e.is_local_fit_failure() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionCurve::from_points(cfg.method, grid.clone(), pts))
}

/// Estimates the decomposition selected by `cfg.method`. Grid points with a
/// failed local fit become gaps; more than 20% gaps is an error.
pub fn estimate(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
) -> Result<DecompositionCurve> {
    let curve = estimate_unchecked(maj, min, grid, bw, cfg)?;
    let missing = curve.n_missing();
    if missing * 5 > grid.len() {
        return Err(Error::TooManyMissing {
            missing,
            total: grid.len(),
        });
    }
    if missing > 0 {
        warn!("{missing} of {} grid points have no estimate", grid.len());
    }
    Ok(curve)
}

pub fn estimate_mldd(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    kernel: KernelSpec,
) -> Result<DecompositionCurve> {
    estimate(maj, min, grid, bw, &DecompositionConfig { kernel, ..DecompositionConfig::new(Method::Mldd) })
}

pub fn estimate_ldd(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    kernel: KernelSpec,
) -> Result<DecompositionCurve> {
    estimate(maj, min, grid, bw, &DecompositionConfig { kernel, ..DecompositionConfig::new(Method::Ldd) })
}

pub fn estimate_cmldd(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    grid: &TimeGrid,
    bw: &BandwidthBundle,
    kernel: KernelSpec,
    z_major: f64,
    z_minor: f64,
) -> Result<DecompositionCurve> {
    let method = Method::Cmldd { z_major, z_minor };
    estimate(maj, min, grid, bw, &DecompositionConfig { kernel, ..DecompositionConfig::new(method) })
}

/// Local fits of one group at one time, memoized by modifier value.
struct GroupAtTime<'a> {
    ds: &'a LongitudinalDataset,
    bw: &'a Bandwidths,
    beta: BetaSlice,
    means: Vec<MeanSlice>,
    fit: &'a FitOptions,
    beta_cache: HashMap<u64, Vec<f64>>,
    mean_cache: HashMap<u64, Vec<f64>>,
}

impl<'a> GroupAtTime<'a> {
    fn new(
        ds: &'a LongitudinalDataset,
        bw: &'a Bandwidths,
        t: f64,
        cfg: &'a DecompositionConfig,
        design: Design,
    ) -> Result<Self> {
        let beta = BetaSlice::new(ds, t, bw.beta.time, cfg.kernel, design)?;
        let means = (1..=ds.p())
            .map(|r| MeanSlice::new(ds, r, t, bw.cond_means[r - 1].time, cfg.kernel))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupAtTime {
            ds,
            bw,
            beta,
            means,
            fit: &cfg.fit,
            beta_cache: HashMap::new(),
            mean_cache: HashMap::new(),
        })
    }

    fn beta_at(&mut self, z: f64) -> Result<&[f64]> {
        let key = z.to_bits();
        if !self.beta_cache.contains_key(&key) {
            let w = ModifierWindow::for_dataset(self.ds, z, self.bw.beta.modifier)?;
            let est = self.beta.fit(w, None, self.fit)?;
            self.beta_cache.insert(key, est.beta);
        }
        Ok(&self.beta_cache[&key])
    }

    /// `(1, E{X_1(t)|z}, .., E{X_p(t)|z})`.
    fn means_at(&mut self, z: f64) -> Result<&[f64]> {
        let key = z.to_bits();
        if !self.mean_cache.contains_key(&key) {
            let mut m = Vec::with_capacity(self.means.len() + 1);
            m.push(1.0);
            for (slice, pair) in self.means.iter().zip(&self.bw.cond_means) {
                let w = ModifierWindow::for_dataset(self.ds, z, pair.modifier)?;
                m.push(slice.fit(w, None, self.fit)?.value);
            }
            self.mean_cache.insert(key, m);
        }
        Ok(&self.mean_cache[&key])
    }

    /// `(1, X̄_1(t), .., X̄_p(t))` pooled over all subjects.
    fn pooled_means(&self) -> Result<Vec<f64>> {
        let mut m = Vec::with_capacity(self.means.len() + 2);
        m.push(1.0);
        for slice in &self.means {
            m.push(slice.fit(ModifierWindow::All, None, self.fit)?.value);
        }
        Ok(m)
    }

    fn pooled_beta(&self) -> Result<Vec<f64>> {
        Ok(self.beta.fit(ModifierWindow::All, None, self.fit)?.beta)
    }
}

fn mldd_point(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    t: f64,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
) -> Result<[f64; 3]> {
    let mut gm = GroupAtTime::new(maj, &bw.majority, t, cfg, Design::VaryingCoefficient)?;
    let mut gn = GroupAtTime::new(min, &bw.minority, t, cfg, Design::VaryingCoefficient)?;
    let (mut s1, mut s2, mut s3a, mut s3b) = (0.0, 0.0, 0.0, 0.0);
    for z in maj.modifiers() {
        let b_maj = gm.beta_at(z)?.to_vec();
        let m_maj = gm.means_at(z)?.to_vec();
        let b_min = gn.beta_at(z)?.to_vec();
        let m_min = gn.means_at(z)?;
        let gap: Vec<f64> = b_maj.iter().zip(&b_min).map(|(a, b)| a - b).collect();
        let xgap: Vec<f64> = m_maj.iter().zip(m_min).map(|(a, b)| a - b).collect();
        s1 += dot(&m_maj, &gap);
        s2 += dot(&xgap, &b_min);
        s3a += dot(m_min, &b_min);
    }
    for z in min.modifiers() {
        let b_min = gn.beta_at(z)?.to_vec();
        let m_min = gn.means_at(z)?;
        s3b += dot(m_min, &b_min);
    }
    let nm = maj.n_subjects() as f64;
    let nn = min.n_subjects() as f64;
    Ok([s1 / nm, s2 / nm, s3a / nm - s3b / nn])
}

fn cmldd_point(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    t: f64,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
    z_major: f64,
    z_minor: f64,
) -> Result<[f64; 3]> {
    let mut gm = GroupAtTime::new(maj, &bw.majority, t, cfg, Design::VaryingCoefficient)?;
    let mut gn = GroupAtTime::new(min, &bw.minority, t, cfg, Design::VaryingCoefficient)?;
    let b_maj = gm.beta_at(z_major)?.to_vec();
    let m_maj = gm.means_at(z_major)?.to_vec();
    let b_min_zm = gn.beta_at(z_major)?.to_vec();
    let m_min_zm = gn.means_at(z_major)?.to_vec();
    let b_min_zn = gn.beta_at(z_minor)?.to_vec();
    let m_min_zn = gn.means_at(z_minor)?.to_vec();
    let gap: Vec<f64> = b_maj.iter().zip(&b_min_zm).map(|(a, b)| a - b).collect();
    let xgap: Vec<f64> = m_maj.iter().zip(&m_min_zm).map(|(a, b)| a - b).collect();
    Ok([
        dot(&m_maj, &gap),
        dot(&xgap, &b_min_zm),
        dot(&m_min_zm, &b_min_zm) - dot(&m_min_zn, &b_min_zn),
    ])
}

fn ldd_point(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    t: f64,
    bw: &BandwidthBundle,
    cfg: &DecompositionConfig,
) -> Result<[f64; 3]> {
    let gm = GroupAtTime::new(maj, &bw.majority, t, cfg, Design::TimeOnly)?;
    let gn = GroupAtTime::new(min, &bw.minority, t, cfg, Design::TimeOnly)?;
    let b_maj = gm.pooled_beta()?;
    let b_min = gn.pooled_beta()?;
    let mut x_maj = gm.pooled_means()?;
    let mut x_min = gn.pooled_means()?;
    let z_maj = mean_sd(&maj.modifiers()).0;
    let z_min = mean_sd(&min.modifiers()).0;
    x_maj.push(z_maj);
    x_min.push(z_min);
    let p = maj.p();
    let gap: Vec<f64> = b_maj.iter().zip(&b_min).map(|(a, b)| a - b).collect();
    let d1 = dot(&x_maj, &gap);
    let d2: f64 = (0..=p).map(|a| (x_maj[a] - x_min[a]) * b_min[a]).sum();
    let d3 = (z_maj - z_min) * b_min[p + 1];
    Ok([d1, d2, d3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;

    fn dataset(seed: u64, kind: ModifierKind, n: usize) -> LongitudinalDataset {
        // small deterministic pseudo-random data without pulling in the simulator
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let subjects = (0..n)
            .map(|i| {
                let z = if kind.is_discrete() { (next() < 0.5) as i32 as f64 } else { next() };
                let times: Vec<f64> = (0..4).map(|_| next()).collect();
                let xs: Vec<Vec<f64>> = times.iter().map(|_| vec![next() + z]).collect();
                let ys = times
                    .iter()
                    .zip(&xs)
                    .map(|(t, x)| 1.0 + t + z * x[0] + 0.3 * next())
                    .collect();
                Subject::new(format!("s{i:03}"), z, times, ys, xs).unwrap()
            })
            .collect();
        LongitudinalDataset::new("g", subjects, kind).unwrap()
    }

    fn bundle(p: usize, b2: Option<f64>) -> BandwidthBundle {
        let pair = BandwidthPair::new(0.4, b2);
        BandwidthBundle {
            majority: Bandwidths::uniform(pair, p),
            minority: Bandwidths::uniform(pair, p),
        }
    }

    #[test]
    fn grid_construction() {
        let g = TimeGrid::trimmed(0.0, 1.0, 50, 0.05).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g.points()[0] - 0.05).abs() < 1e-15);
        assert!((g.points()[49] - 0.95).abs() < 1e-15);
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.2, 0.1]).is_err());
        assert!(TimeGrid::trimmed(0.0, 1.0, 10, 0.6).is_err());
    }

    #[test]
    fn identical_groups_give_zero() {
        let maj = dataset(1, ModifierKind::Continuous, 30);
        let min = maj.with_group("m");
        let grid = TimeGrid::trimmed(0.1, 0.9, 9, 0.0).unwrap();
        let bw = bundle(1, Some(0.5));
        for method in [
            Method::Mldd,
            Method::Ldd,
            Method::Cmldd { z_major: 0.4, z_minor: 0.4 },
        ] {
            let cfg = DecompositionConfig::new(method);
            let c = estimate(&maj, &min, &grid, &bw, &cfg).unwrap();
            for comp in Component::ALL {
                assert!(c.component(comp).iter().all(|v| *v == Some(0.0)), "{method} {comp}");
            }
        }
    }

    #[test]
    fn cmldd_same_values_cancel_d3() {
        let maj = dataset(2, ModifierKind::Continuous, 30);
        let min = dataset(3, ModifierKind::Continuous, 25);
        let grid = TimeGrid::trimmed(0.1, 0.9, 5, 0.0).unwrap();
        let c = estimate_cmldd(&maj, &min, &grid, &bundle(1, Some(0.5)), KernelSpec::Epanechnikov, 0.5, 0.5).unwrap();
        assert!(c.d3.iter().all(|v| *v == Some(0.0)));
        assert_eq!(c.conditioning, Some((0.5, 0.5)));
    }

    #[test]
    fn components_add_up() {
        let maj = dataset(4, ModifierKind::Discrete(vec![]), 40);
        let min = dataset(5, ModifierKind::Discrete(vec![]), 30);
        let grid = TimeGrid::trimmed(0.1, 0.9, 7, 0.0).unwrap();
        for method in [Method::Mldd, Method::Ldd, Method::Cmldd { z_major: 1.0, z_minor: 0.0 }] {
            let c = estimate(&maj, &min, &grid, &bundle(1, None), &DecompositionConfig::new(method)).unwrap();
            for k in 0..grid.len() {
                let s = c.d1[k].unwrap() + c.d2[k].unwrap() + c.d3[k].unwrap();
                assert!((c.d[k].unwrap() - s).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn missing_points_flagged_then_rejected() {
        let maj = dataset(6, ModifierKind::Continuous, 20);
        let min = dataset(7, ModifierKind::Continuous, 20);
        // grid far outside the data: every point empty
        let grid = TimeGrid::new(vec![5.0, 6.0]).unwrap();
        let cfg = DecompositionConfig::new(Method::Mldd);
        let raw = estimate_unchecked(&maj, &min, &grid, &bundle(1, Some(0.5)), &cfg).unwrap();
        assert_eq!(raw.n_missing(), 2);
        assert_eq!(
            estimate(&maj, &min, &grid, &bundle(1, Some(0.5)), &cfg).unwrap_err(),
            Error::TooManyMissing { missing: 2, total: 2 }
        );
    }

    #[test]
    fn discrete_cmldd_needs_minority_support() {
        let maj = dataset(8, ModifierKind::Discrete(vec![0, 1, 2]), 20);
        let min = dataset(9, ModifierKind::Discrete(vec![0, 1, 2]), 20);
        let grid = TimeGrid::trimmed(0.1, 0.9, 3, 0.0).unwrap();
        assert_eq!(
            estimate_cmldd(&maj, &min, &grid, &bundle(1, None), KernelSpec::Epanechnikov, 1.0, 2.0).unwrap_err(),
            Error::EmptyLevel { level: 2.0 }
        );
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let maj = dataset(10, ModifierKind::Continuous, 20);
        let min = dataset(11, ModifierKind::Discrete(vec![]), 20);
        let grid = TimeGrid::trimmed(0.1, 0.9, 3, 0.0).unwrap();
        assert!(estimate_mldd(&maj, &min, &grid, &bundle(1, Some(0.5)), KernelSpec::Epanechnikov).is_err());
        let min = dataset(12, ModifierKind::Continuous, 20);
        assert!(estimate_mldd(&maj, &min, &grid, &bundle(1, None), KernelSpec::Epanechnikov).is_err());
        assert!(estimate_mldd(&maj, &min, &grid, &bundle(2, Some(0.5)), KernelSpec::Epanechnikov).is_err());
    }

    #[test]
    fn outcome_shift_leaves_overall_disparity() {
        let maj = dataset(13, ModifierKind::Continuous, 40);
        let min = dataset(14, ModifierKind::Continuous, 35);
        let grid = TimeGrid::trimmed(0.15, 0.85, 6, 0.0).unwrap();
        let bw = bundle(1, Some(0.6));
        for method in [Method::Mldd, Method::Ldd] {
            let cfg = DecompositionConfig::new(method);
            let a = estimate(&maj, &min, &grid, &bw, &cfg).unwrap();
            let b = estimate(&maj.map_outcomes(|y| y + 7.5), &min.map_outcomes(|y| y + 7.5), &grid, &bw, &cfg).unwrap();
            for k in 0..grid.len() {
                assert!((a.d[k].unwrap() - b.d[k].unwrap()).abs() < 1e-10, "{method}");
            }
        }
    }
}
