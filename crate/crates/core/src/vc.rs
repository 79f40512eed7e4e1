//! Local-constant estimation of varying coefficients `beta(t, z)` and of
//! conditional covariate means `E{X_r(t) | z}`.
//!
//! Fits at a fixed time share per-subject kernel moments: a [`BetaSlice`]
//! accumulates each subject's time-weighted Gram matrix and cross-product
//! once, after which any modifier value (or any held-out subject) costs a
//! pass over subjects rather than observations.

use serde::Serialize;

use crate::data::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, KernelSpec};
use crate::linalg::pivoted_cholesky_solve;

/// Relative ridge added to the Gram diagonal when the ridge fallback is on.
pub const RIDGE_SCALE: f64 = 1e-8;

/// Default threshold on the reciprocal condition estimate.
pub const RCOND_MIN: f64 = 1e-12;

/// How subjects are weighted along the modifier axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModifierWindow {
    /// `K((Z_i - z) / bandwidth)`.
    Kernel { z: f64, bandwidth: f64 },
    /// `I(Z_i = z)`.
    Level(f64),
    /// Every subject at full weight.
    All,
}

impl ModifierWindow {
    /// Kernel window for continuous datasets (needs `b2`), level window for discrete ones.
    pub fn for_dataset(ds: &LongitudinalDataset, z: f64, b2: Option<f64>) -> Result<Self> {
        if ds.modifier_kind().is_discrete() {
            Ok(ModifierWindow::Level(z))
        } else {
            let bandwidth = b2.ok_or_else(|| {
                Error::Domain("continuous modifier requires a modifier bandwidth".into())
            })?;
            check_bandwidth(bandwidth)?;
            Ok(ModifierWindow::Kernel { z, bandwidth })
        }
    }

    fn z(&self) -> Option<f64> {
        match *self {
            ModifierWindow::Kernel { z, .. } | ModifierWindow::Level(z) => Some(z),
            ModifierWindow::All => None,
        }
    }

    #[inline]
    fn weight(&self, kernel: KernelSpec, zi: f64) -> f64 {
        match *self {
            ModifierWindow::Kernel { z, bandwidth } => kernel.eval((zi - z) / bandwidth),
            ModifierWindow::Level(z) => {
                if zi == z {
                    1.0
                } else {
                    0.0
                }
            }
            ModifierWindow::All => 1.0,
        }
    }

    fn peak(&self, kernel: KernelSpec) -> f64 {
        match self {
            ModifierWindow::Kernel { .. } => kernel.peak(),
            _ => 1.0,
        }
    }
}

/// Regressors of the local fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Design {
    /// `(1, X_1, .., X_p)`, coefficients vary with `(t, z)`.
    VaryingCoefficient,
    /// `(1, X_1, .., X_p, Z)`, coefficients vary with `t` only.
    TimeOnly,
}

impl Design {
    pub fn n_coef(self, p: usize) -> usize {
        match self {
            Design::VaryingCoefficient => p + 1,
            Design::TimeOnly => p + 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Minimum effective weight, in units of observations at full kernel
    /// height. `None` uses `n_coef + 1` for coefficient fits and "any positive
    /// weight" for conditional means.
    pub min_weight_obs: Option<f64>,
    /// Fall back to a small ridge instead of failing on singular Gram matrices.
    pub ridge: bool,
    pub rcond_min: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            min_weight_obs: None,
            ridge: false,
            rcond_min: RCOND_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    pub t: f64,
    pub z: Option<f64>,
    /// Intercept first.
    pub beta: Vec<f64>,
    pub effective_weight: f64,
    /// Reciprocal condition estimate of the weighted Gram matrix (before any ridge).
    pub condition_diagnostic: f64,
    /// Ridge added to the diagonal, if the fallback was used.
    pub ridge: Option<f64>,
}

impl CoefficientEstimate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(x, &self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondMeanEstimate {
    pub t: f64,
    pub z: Option<f64>,
    /// Covariate index, 1-based.
    pub r: usize,
    pub value: f64,
    pub effective_weight: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn packed_len(q: usize) -> usize {
    q * (q + 1) / 2
}

/// Per-subject kernel moments for coefficient fits at one time point.
#[derive(Debug, Clone)]
pub struct BetaSlice {
    t: f64,
    q: usize,
    kernel: KernelSpec,
    /// Subjects with positive time weight.
    subject: Vec<usize>,
    modifier: Vec<f64>,
    wsum: Vec<f64>,
    /// Packed upper triangles, `packed_len(q)` per entry.
    gram: Vec<f64>,
    rhs: Vec<f64>,
    has_level: Vec<f64>,
}

impl BetaSlice {
    pub fn new(
        ds: &LongitudinalDataset,
        t: f64,
        b1: f64,
        kernel: KernelSpec,
        design: Design,
    ) -> Result<Self> {
        check_bandwidth(b1)?;
        let p = ds.p();
        let q = design.n_coef(p);
        let pl = packed_len(q);
        let mut slice = BetaSlice {
            t,
            q,
            kernel,
            subject: Vec::new(),
            modifier: Vec::new(),
            wsum: Vec::new(),
            gram: Vec::new(),
            rhs: Vec::new(),
            has_level: Vec::new(),
        };
        let mut x = vec![0.0; q];
        for (i, s) in ds.subjects().iter().enumerate() {
            let mut g = vec![0.0; pl];
            let mut r = vec![0.0; q];
            let mut ws = 0.0;
            for j in 0..s.n_obs() {
                let w = kernel.eval((s.times()[j] - t) / b1);
                if w == 0.0 {
                    continue;
                }
                x[0] = 1.0;
                x[1..=p].copy_from_slice(s.covariate_row(j));
                if design == Design::TimeOnly {
                    x[p + 1] = s.modifier();
                }
                let y = s.outcomes()[j];
                ws += w;
                let mut k = 0;
                for a in 0..q {
                    let wxa = w * x[a];
                    r[a] += wxa * y;
                    for c in a..q {
                        g[k] += wxa * x[c];
                        k += 1;
                    }
                }
            }
            if ws > 0.0 {
                slice.subject.push(i);
                slice.modifier.push(s.modifier());
                slice.wsum.push(ws);
                slice.gram.extend_from_slice(&g);
                slice.rhs.extend_from_slice(&r);
            }
        }
        if ds.modifier_kind().is_discrete() {
            slice.has_level = ds.modifiers();
        }
        Ok(slice)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_coef(&self) -> usize {
        self.q
    }

    /// Weighted least-squares coefficients at modifier window `window`,
    /// optionally leaving subject `exclude` (dataset index) out.
    pub fn fit(
        &self,
        window: ModifierWindow,
        exclude: Option<usize>,
        opts: &FitOptions,
    ) -> Result<CoefficientEstimate> {
        let q = self.q;
        let pl = packed_len(q);
        if let ModifierWindow::Level(z) = window {
            if !self.has_level.iter().enumerate().any(|(i, &zi)| zi == z && Some(i) != exclude) {
                return Err(Error::EmptyLevel { level: z });
            }
        }
        let mut g = vec![0.0; pl];
        let mut r = vec![0.0; q];
        let mut eff = 0.0;
        for k in 0..self.subject.len() {
            if Some(self.subject[k]) == exclude {
                continue;
            }
            let wz = window.weight(self.kernel, self.modifier[k]);
            if wz == 0.0 {
                continue;
            }
            eff += wz * self.wsum[k];
            for (acc, v) in g.iter_mut().zip(&self.gram[k * pl..(k + 1) * pl]) {
                *acc += wz * v;
            }
            for (acc, v) in r.iter_mut().zip(&self.rhs[k * q..(k + 1) * q]) {
                *acc += wz * v;
            }
        }
        let floor = opts.min_weight_obs.unwrap_or((q + 1) as f64)
            * self.kernel.peak()
            * window.peak(self.kernel);
        if !(eff > 0.0) || eff < floor {
            return Err(Error::EmptyWindow {
                t: self.t,
                z: window.z(),
            });
        }
        let mut full = vec![0.0; q * q];
        let mut k = 0;
        for a in 0..q {
            for c in a..q {
                full[a * q + c] = g[k];
                full[c * q + a] = g[k];
                k += 1;
            }
        }
        let (sol, rcond) = pivoted_cholesky_solve(&full, &r, q);
        match sol {
            Some(beta) if rcond >= opts.rcond_min => Ok(CoefficientEstimate {
                t: self.t,
                z: window.z(),
                beta,
                effective_weight: eff,
                condition_diagnostic: rcond,
                ridge: None,
            }),
            _ if opts.ridge => {
                let trace: f64 = (0..q).map(|a| full[a * q + a]).sum();
                let lambda = RIDGE_SCALE * trace / q as f64;
                for a in 0..q {
                    full[a * q + a] += lambda;
                }
                match pivoted_cholesky_solve(&full, &r, q) {
                    (Some(beta), _) => Ok(CoefficientEstimate {
                        t: self.t,
                        z: window.z(),
                        beta,
                        effective_weight: eff,
                        condition_diagnostic: rcond,
                        ridge: Some(lambda),
                    }),
                    (None, _) => Err(Error::SingularFit {
                        t: self.t,
                        z: window.z(),
                        rcond,
                    }),
                }
            }
            _ => Err(Error::SingularFit {
                t: self.t,
                z: window.z(),
                rcond,
            }),
        }
    }
}

/// Per-subject kernel moments for one covariate's conditional mean at one time point.
#[derive(Debug, Clone)]
pub struct MeanSlice {
    t: f64,
    r: usize,
    kernel: KernelSpec,
    subject: Vec<usize>,
    modifier: Vec<f64>,
    wsum: Vec<f64>,
    wx: Vec<f64>,
    has_level: Vec<f64>,
}

impl MeanSlice {
    /// `r` is the 1-based covariate index.
    pub fn new(ds: &LongitudinalDataset, r: usize, t: f64, b1: f64, kernel: KernelSpec) -> Result<Self> {
        check_bandwidth(b1)?;
        if r == 0 || r > ds.p() {
            return Err(Error::Domain(format!(
                "covariate index {r} outside 1..={}",
                ds.p()
            )));
        }
        let mut slice = MeanSlice {
            t,
            r,
            kernel,
            subject: Vec::new(),
            modifier: Vec::new(),
            wsum: Vec::new(),
            wx: Vec::new(),
            has_level: Vec::new(),
        };
        for (i, s) in ds.subjects().iter().enumerate() {
            let mut ws = 0.0;
            let mut wx = 0.0;
            for j in 0..s.n_obs() {
                let w = kernel.eval((s.times()[j] - t) / b1);
                if w == 0.0 {
                    continue;
                }
                ws += w;
                wx += w * s.covariate_row(j)[r - 1];
            }
            if ws > 0.0 {
                slice.subject.push(i);
                slice.modifier.push(s.modifier());
                slice.wsum.push(ws);
                slice.wx.push(wx);
            }
        }
        if ds.modifier_kind().is_discrete() {
            slice.has_level = ds.modifiers();
        }
        Ok(slice)
    }

    pub fn fit(
        &self,
        window: ModifierWindow,
        exclude: Option<usize>,
        opts: &FitOptions,
    ) -> Result<CondMeanEstimate> {
        if let ModifierWindow::Level(z) = window {
            if !self.has_level.iter().enumerate().any(|(i, &zi)| zi == z && Some(i) != exclude) {
                return Err(Error::EmptyLevel { level: z });
            }
        }
        let mut sw = 0.0;
        let mut swx = 0.0;
        for k in 0..self.subject.len() {
            if Some(self.subject[k]) == exclude {
                continue;
            }
            let wz = window.weight(self.kernel, self.modifier[k]);
            if wz == 0.0 {
                continue;
            }
            sw += wz * self.wsum[k];
            swx += wz * self.wx[k];
        }
        let floor = opts.min_weight_obs.unwrap_or(0.0) * self.kernel.peak() * window.peak(self.kernel);
        if !(sw > 0.0) || sw < floor {
            return Err(Error::EmptyWindow {
                t: self.t,
                z: window.z(),
            });
        }
        Ok(CondMeanEstimate {
            t: self.t,
            z: window.z(),
            r: self.r,
            value: swx / sw,
            effective_weight: sw,
        })
    }
}

fn require_continuous(ds: &LongitudinalDataset) -> Result<()> {
    if ds.modifier_kind().is_discrete() {
        Err(Error::Domain("dataset has a discrete modifier".into()))
    } else {
        Ok(())
    }
}

fn require_level(ds: &LongitudinalDataset, z: f64) -> Result<()> {
    match ds.modifier_kind() {
        crate::data::ModifierKind::Discrete(levels) => {
            if z.fract() == 0.0 && levels.contains(&(z as i64)) {
                Ok(())
            } else {
                Err(Error::Domain(format!("{z} is not a declared modifier level")))
            }
        }
        crate::data::ModifierKind::Continuous => {
            Err(Error::Domain("dataset has a continuous modifier".into()))
        }
    }
}

/// `beta(t, z)` with product kernel weights in time and modifier.
pub fn fit_beta_continuous(
    ds: &LongitudinalDataset,
    t: f64,
    z: f64,
    b1: f64,
    b2: f64,
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<CoefficientEstimate> {
    require_continuous(ds)?;
    check_bandwidth(b2)?;
    BetaSlice::new(ds, t, b1, kernel, Design::VaryingCoefficient)?.fit(
        ModifierWindow::Kernel { z, bandwidth: b2 },
        None,
        opts,
    )
}

/// `beta(t, z)` from the subjects at modifier level `z`.
pub fn fit_beta_discrete(
    ds: &LongitudinalDataset,
    t: f64,
    z: f64,
    b1: f64,
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<CoefficientEstimate> {
    require_level(ds, z)?;
    BetaSlice::new(ds, t, b1, kernel, Design::VaryingCoefficient)?.fit(
        ModifierWindow::Level(z),
        None,
        opts,
    )
}

/// Time-only coefficients `(beta_0(t), .., beta_p(t), beta_{p+1}(t))` with the
/// modifier entering as the last regressor.
pub fn fit_beta_time_only(
    ds: &LongitudinalDataset,
    t: f64,
    b1: f64,
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<CoefficientEstimate> {
    BetaSlice::new(ds, t, b1, kernel, Design::TimeOnly)?.fit(ModifierWindow::All, None, opts)
}

/// Local-constant `E{X_r(t) | z}`; `b_r2` is the modifier bandwidth for
/// continuous datasets and ignored (level indicator) for discrete ones.
#[allow(clippy::too_many_arguments)]
pub fn fit_cond_mean(
    ds: &LongitudinalDataset,
    r: usize,
    t: f64,
    z: f64,
    b_r1: f64,
    b_r2: Option<f64>,
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<CondMeanEstimate> {
    if ds.modifier_kind().is_discrete() {
        require_level(ds, z)?;
    }
    let window = ModifierWindow::for_dataset(ds, z, b_r2)?;
    MeanSlice::new(ds, r, t, b_r1, kernel)?.fit(window, None, opts)
}
