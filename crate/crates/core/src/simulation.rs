//! Synthetic two-group longitudinal data from a varying-coefficient model
//! with closed-form coefficient surfaces, so every decomposition has an
//! exactly computable truth.
//!
//! Each observation follows `Y = X(t) beta(t, Z) + sigma * eps` with
//! `X(t) = (1, X_1(t), .., X_p(t))`, `X_r = m_r(t, Z) + noise` and
//! `eps ~ N(0, 1)`. Times are uniform on `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::{LongitudinalDataset, ModifierKind, Subject};
use crate::decomposition::{DecompositionCurve, Method, TimeGrid};
use crate::error::{Error, Result};
use crate::vc::dot;

/// Absolute tolerance of the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-8;

/// `c + a t + b z + d t z`: constant, linear-in-t, linear-in-z and bilinear
/// surfaces are special cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Surface {
    pub c: f64,
    pub t: f64,
    pub z: f64,
    pub tz: f64,
}

impl Surface {
    pub const fn constant(c: f64) -> Self {
        Surface { c, t: 0.0, z: 0.0, tz: 0.0 }
    }

    pub const fn linear_t(c: f64, t: f64) -> Self {
        Surface { c, t, z: 0.0, tz: 0.0 }
    }

    pub const fn linear_z(c: f64, z: f64) -> Self {
        Surface { c, t: 0.0, z, tz: 0.0 }
    }

    pub const fn bilinear(c: f64, t: f64, z: f64, tz: f64) -> Self {
        Surface { c, t, z, tz }
    }

    #[inline]
    pub fn eval(&self, t: f64, z: f64) -> f64 {
        self.c + self.t * t + self.z * z + self.tz * t * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ModifierLaw {
    TruncatedNormal { mean: f64, sd: f64, lower: f64, upper: f64 },
    /// Levels 0 and 1 with `P(Z = 1) = p`.
    Bernoulli { p: f64 },
}

impl ModifierLaw {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ModifierLaw::Bernoulli { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModifierLaw::TruncatedNormal { mean, sd, lower, upper } => {
                if !(sd > 0.0) || !(upper > lower) || !mean.is_finite() {
                    return Err(Error::Domain("invalid truncated normal modifier law".into()));
                }
                if self.normal()?.cdf(upper) - self.normal()?.cdf(lower) < 1e-6 {
                    return Err(Error::Domain("truncation leaves no probability mass".into()));
                }
                Ok(())
            }
            ModifierLaw::Bernoulli { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("Bernoulli probability {p} outside [0, 1]")))
                }
            }
        }
    }

    fn normal(&self) -> Result<Normal> {
        match *self {
            ModifierLaw::TruncatedNormal { mean, sd, .. } => {
                Normal::new(mean, sd).map_err(|e| Error::Domain(e.to_string()))
            }
            ModifierLaw::Bernoulli { .. } => Err(Error::Domain("not a normal law".into())),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, normal: Option<&Normal>) -> f64 {
        match *self {
            ModifierLaw::TruncatedNormal { lower, upper, .. } => {
                let n = normal.expect("normal law prepared");
                let (a, b) = (n.cdf(lower), n.cdf(upper));
                let u = a + (b - a) * rng.random::<f64>();
                n.inverse_cdf(u).clamp(lower, upper)
            }
            ModifierLaw::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E f(Z)`: adaptive quadrature for the truncated normal, a level sum
    /// for the Bernoulli law.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        match *self {
            ModifierLaw::TruncatedNormal { lower, upper, .. } => {
                let n = self.normal()?;
                let mass = n.cdf(upper) - n.cdf(lower);
                let g = |z: f64| f(z) * n.pdf(z);
                Ok(adaptive_simpson(&g, lower, upper, QUAD_TOL * mass)? / mass)
            }
            ModifierLaw::Bernoulli { p } => Ok((1.0 - p) * f(0.0) + p * f(1.0)),
        }
    }
}

/// Number of observations per subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ObsLaw {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

/// One group's population law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupLaw {
    pub label: String,
    pub n_subjects: usize,
    pub modifier: ModifierLaw,
    /// `p + 1` surfaces, intercept first.
    pub beta: Vec<Surface>,
    /// `p` conditional covariate means `m_r(t, z)`.
    pub cond_means: Vec<Surface>,
}

impl GroupLaw {
    pub fn p(&self) -> usize {
        self.cond_means.len()
    }

    pub fn beta_at(&self, t: f64, z: f64) -> Vec<f64> {
        self.beta.iter().map(|s| s.eval(t, z)).collect()
    }

    /// `(1, m_1(t, z), .., m_p(t, z))`.
    pub fn means_at(&self, t: f64, z: f64) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.cond_means.iter().map(|s| s.eval(t, z)))
            .collect()
    }

    /// `E{Y(t) | z}`.
    pub fn mean_outcome(&self, t: f64, z: f64) -> f64 {
        dot(&self.means_at(t, z), &self.beta_at(t, z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpConfig {
    pub majority: GroupLaw,
    pub minority: GroupLaw,
    pub obs: ObsLaw,
    /// Outcome noise scale `sigma`.
    pub noise_sd: f64,
    pub covariate_noise_sd: f64,
    pub seed: u64,
}

/// Names accepted by [`DgpConfig::preset`].
pub const PRESETS: [&str; 6] = [
    "null",
    "null-discrete",
    "bilinear",
    "additive",
    "education",
    "no-modifier-effect",
];

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        for g in [&self.majority, &self.minority] {
            if g.n_subjects < 2 {
                return Err(Error::Domain(format!("group `{}` needs at least 2 subjects", g.label)));
            }
            if g.beta.len() != g.p() + 1 {
                return Err(Error::Domain(format!(
                    "group `{}`: {} coefficient surfaces for {} covariates",
                    g.label,
                    g.beta.len(),
                    g.p()
                )));
            }
            g.modifier.validate()?;
        }
        if self.majority.p() != self.minority.p() {
            return Err(Error::Domain("groups differ in covariate count".into()));
        }
        if self.majority.modifier.is_discrete() != self.minority.modifier.is_discrete() {
            return Err(Error::Domain("groups differ in modifier kind".into()));
        }
        if self.majority.label == self.minority.label {
            return Err(Error::Domain("group labels must differ".into()));
        }
        if !(self.noise_sd >= 0.0) || !(self.covariate_noise_sd >= 0.0) {
            return Err(Error::Domain("noise scales must be non-negative".into()));
        }
        match self.obs {
            ObsLaw::Fixed(0) => Err(Error::Domain("subjects need at least one observation".into())),
            ObsLaw::Uniform { min, max } if min == 0 || max < min => {
                Err(Error::Domain("invalid observation-count range".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn p(&self) -> usize {
        self.majority.p()
    }

    pub fn modifier_kind(&self) -> ModifierKind {
        if self.majority.modifier.is_discrete() {
            ModifierKind::Discrete(vec![0, 1])
        } else {
            ModifierKind::Continuous
        }
    }

    /// Same configuration with the group roles exchanged.
    pub fn swapped(&self) -> Self {
        DgpConfig {
            majority: self.minority.clone(),
            minority: self.majority.clone(),
            ..self.clone()
        }
    }

    /// Named configurations with `n` subjects per group:
    ///
    /// - `null`, `null-discrete`: both groups share one law;
    /// - `bilinear`: continuous modifier, bilinear surfaces differing by group;
    /// - `additive`: modifier enters the intercept only, no interaction with `X`;
    /// - `education`: binary modifier with majority/minority shares 0.77/0.26
    ///   and a modifier effect growing over time;
    /// - `no-modifier-effect`: groups differ only in the binary modifier law,
    ///   which affects neither coefficients nor covariates.
    pub fn preset(name: &str, n: usize, seed: u64) -> Result<Self> {
        let tn = |mean: f64| ModifierLaw::TruncatedNormal { mean, sd: 1.0, lower: -1.0, upper: 1.0 };
        let group = |label: &str, modifier, beta: Vec<Surface>, cond_means: Vec<Surface>| GroupLaw {
            label: label.to_string(),
            n_subjects: n,
            modifier,
            beta,
            cond_means,
        };
        let base = |majority, minority| DgpConfig {
            majority,
            minority,
            obs: ObsLaw::Uniform { min: 3, max: 7 },
            noise_sd: 0.5,
            covariate_noise_sd: 0.5,
            seed,
        };
        let cfg = match name {
            "null" | "null-discrete" => {
                let modifier = if name == "null" { tn(0.0) } else { ModifierLaw::Bernoulli { p: 0.5 } };
                let beta = vec![Surface::bilinear(0.5, 1.0, 0.3, 0.2), Surface::linear_z(0.5, 0.2)];
                let means = vec![Surface::bilinear(0.0, 0.3, 0.4, 0.0)];
                base(
                    group("majority", modifier, beta.clone(), means.clone()),
                    group("minority", modifier, beta, means),
                )
            }
            "bilinear" => base(
                group(
                    "majority",
                    tn(0.3),
                    vec![Surface::bilinear(0.2, 0.5, 0.3, 0.2), Surface::bilinear(0.4, 0.2, -0.1, 0.1)],
                    vec![Surface::bilinear(0.5, 0.3, 0.2, 0.0)],
                ),
                group(
                    "minority",
                    tn(-0.3),
                    vec![Surface::bilinear(0.0, 0.3, 0.3, 0.1), Surface::bilinear(0.3, 0.1, 0.1, 0.0)],
                    vec![Surface::bilinear(0.2, 0.3, 0.2, 0.0)],
                ),
            ),
            "additive" => base(
                group(
                    "majority",
                    tn(0.4),
                    vec![Surface::bilinear(0.2, 0.8, 0.3, 0.4), Surface::linear_t(0.5, 0.3)],
                    vec![Surface::bilinear(0.2, 0.3, 0.5, 0.0)],
                ),
                group(
                    "minority",
                    tn(-0.3),
                    vec![Surface::bilinear(0.0, 0.6, 0.3, 0.2), Surface::linear_t(0.4, 0.2)],
                    vec![Surface::bilinear(0.0, 0.3, 0.5, 0.0)],
                ),
            ),
            "education" => {
                let beta = |c: f64| vec![Surface::bilinear(c, 0.6, 0.2, 0.5), Surface::bilinear(0.3, 0.1, 0.2, 0.0)];
                let means = |c: f64| vec![Surface::bilinear(c, 0.2, 0.6, 0.0)];
                base(
                    group("majority", ModifierLaw::Bernoulli { p: 0.77 }, beta(0.2), means(0.3)),
                    group("minority", ModifierLaw::Bernoulli { p: 0.26 }, beta(0.0), means(0.1)),
                )
            }
            "no-modifier-effect" => {
                let beta = vec![Surface::linear_t(0.3, 0.8), Surface::linear_t(0.5, 0.2)];
                let means = vec![Surface::linear_t(0.2, 0.4)];
                base(
                    group("majority", ModifierLaw::Bernoulli { p: 0.77 }, beta.clone(), means.clone()),
                    group("minority", ModifierLaw::Bernoulli { p: 0.26 }, beta, means),
                )
            }
            other => {
                return Err(Error::Domain(format!(
                    "unknown preset `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }
}

fn generate_group(law: &GroupLaw, cfg: &DgpConfig, stream: u64) -> Result<LongitudinalDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let normal = match law.modifier {
        ModifierLaw::TruncatedNormal { .. } => Some(law.modifier.normal()?),
        _ => None,
    };
    let width = law.n_subjects.saturating_sub(1).to_string().len();
    let p = law.p();
    let mut subjects = Vec::with_capacity(law.n_subjects);
    for i in 0..law.n_subjects {
        let z = law.modifier.sample(&mut rng, normal.as_ref());
        let n_obs = match cfg.obs {
            ObsLaw::Fixed(k) => k,
            ObsLaw::Uniform { min, max } => rng.random_range(min..=max),
        };
        let mut times: Vec<f64> = (0..n_obs).map(|_| rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        let mut outcomes = Vec::with_capacity(n_obs);
        let mut covs = Vec::with_capacity(n_obs);
        for &t in &times {
            let x: Vec<f64> = law
                .cond_means
                .iter()
                .map(|m| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    m.eval(t, z) + cfg.covariate_noise_sd * e
                })
                .collect();
            let beta = law.beta_at(t, z);
            let mean = beta[0] + (0..p).map(|r| beta[r + 1] * x[r]).sum::<f64>();
            let eps: f64 = StandardNormal.sample(&mut rng);
            outcomes.push(mean + cfg.noise_sd * eps);
            covs.push(x);
        }
        subjects.push(Subject::new(
            format!("{}-{i:0width$}", law.label),
            z,
            times,
            outcomes,
            covs,
        )?);
    }
    LongitudinalDataset::new(law.label.clone(), subjects, cfg.modifier_kind())
}

/// Draws the majority and minority datasets. Each group uses its own
/// ChaCha8 stream of `config.seed`.
pub fn generate(config: &DgpConfig) -> Result<(LongitudinalDataset, LongitudinalDataset)> {
    config.validate()?;
    Ok((
        generate_group(&config.majority, config, 0)?,
        generate_group(&config.minority, config, 1)?,
    ))
}

/// Exact marginal decomposition of the configured model on `grid`.
pub fn true_decomposition(config: &DgpConfig, grid: &TimeGrid) -> Result<DecompositionCurve> {
    config.validate()?;
    let (maj, min) = (&config.majority, &config.minority);
    let mut pts = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let d1 = maj.modifier.expect(|z| {
            let gap: Vec<f64> = maj.beta_at(t, z).iter().zip(min.beta_at(t, z)).map(|(a, b)| a - b).collect();
            dot(&maj.means_at(t, z), &gap)
        })?;
        let d2 = maj.modifier.expect(|z| {
            let xgap: Vec<f64> = maj.means_at(t, z).iter().zip(min.means_at(t, z)).map(|(a, b)| a - b).collect();
            dot(&xgap, &min.beta_at(t, z))
        })?;
        let d3 = maj.modifier.expect(|z| min.mean_outcome(t, z))? - min.modifier.expect(|z| min.mean_outcome(t, z))?;
        pts.push([d1, d2, d3]);
    }
    Ok(curve(Method::Mldd, grid, pts))
}

/// Exact conditional decomposition at `(z_major, z_minor)`.
pub fn true_conditional_decomposition(
    config: &DgpConfig,
    grid: &TimeGrid,
    z_major: f64,
    z_minor: f64,
) -> Result<DecompositionCurve> {
    config.validate()?;
    let (maj, min) = (&config.majority, &config.minority);
    let pts = grid
        .points()
        .iter()
        .map(|&t| {
            let bm = maj.beta_at(t, z_major);
            let bn = min.beta_at(t, z_major);
            let mm = maj.means_at(t, z_major);
            let mn = min.means_at(t, z_major);
            let gap: Vec<f64> = bm.iter().zip(&bn).map(|(a, b)| a - b).collect();
            let xgap: Vec<f64> = mm.iter().zip(&mn).map(|(a, b)| a - b).collect();
            [
                dot(&mm, &gap),
                dot(&xgap, &bn),
                dot(&mn, &bn) - min.mean_outcome(t, z_minor),
            ]
        })
        .collect();
    Ok(curve(Method::Cmldd { z_major, z_minor }, grid, pts))
}

fn curve(method: Method, grid: &TimeGrid, pts: Vec<[f64; 3]>) -> DecompositionCurve {
    let conditioning = match method {
        Method::Cmldd { z_major, z_minor } => Some((z_major, z_minor)),
        _ => None,
    };
    DecompositionCurve {
        method,
        grid: grid.clone(),
        d: pts.iter().map(|v| Some(v[0] + v[1] + v[2])).collect(),
        d1: pts.iter().map(|v| Some(v[0])).collect(),
        d2: pts.iter().map(|v| Some(v[1])).collect(),
        d3: pts.iter().map(|v| Some(v[2])).collect(),
        conditioning,
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!("no convergence on [{a}, {b}]")));
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    // force a few levels so narrow features are not missed on the first pass
    let n = 8;
    let h = (b - a) / n as f64;
    if whole.is_nan() {
        return Err(Error::Quadrature("integrand is not finite".into()));
    }
    let mut total = 0.0;
    for k in 0..n {
        let lo = a + k as f64 * h;
        let hi = if k == n - 1 { b } else { lo + h };
        let (flo, fhi, fmid) = (f(lo), f(hi), f(0.5 * (lo + hi)));
        total += recurse(f, lo, hi, flo, fmid, fhi, simpson(flo, fmid, fhi, lo, hi), tol / n as f64, 40)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_on_known_integrals() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let law = ModifierLaw::TruncatedNormal { mean: 0.0, sd: 1.0, lower: -8.0, upper: 8.0 };
        assert!((law.expect(|z| z * z).unwrap() - 1.0).abs() < 1e-7);
        assert!(law.expect(|z| z).unwrap().abs() < 1e-8);
    }

    #[test]
    fn noiseless_constant_model() {
        let mut cfg = DgpConfig::preset("null", 5, 3).unwrap();
        for g in [&mut cfg.majority, &mut cfg.minority] {
            g.beta = vec![Surface::constant(2.0), Surface::constant(3.0)];
            g.cond_means = vec![Surface::constant(1.0)];
        }
        cfg.noise_sd = 0.0;
        cfg.covariate_noise_sd = 0.0;
        let (a, b) = generate(&cfg).unwrap();
        for ds in [a, b] {
            for s in ds.subjects() {
                assert!(s.outcomes().iter().all(|&y| y == 5.0));
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = DgpConfig::preset("bilinear", 20, 9).unwrap();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = DgpConfig { seed: 10, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn identical_laws_zero_truth() {
        let cfg = DgpConfig::preset("null", 10, 0).unwrap();
        let grid = TimeGrid::trimmed(0.0, 1.0, 5, 0.05).unwrap();
        let truth = true_decomposition(&cfg, &grid).unwrap();
        for c in crate::Component::ALL {
            assert!(truth.component(c).iter().all(|v| v.unwrap().abs() < 1e-12));
        }
    }

    #[test]
    fn bilinear_intercept_only_truth() {
        // beta_0 = t z with no covariates: D(t) = t (E Z^M - E Z^m)
        let mut cfg = DgpConfig::preset("bilinear", 10, 0).unwrap();
        for g in [&mut cfg.majority, &mut cfg.minority] {
            g.beta = vec![Surface::bilinear(0.0, 0.0, 0.0, 1.0)];
            g.cond_means = vec![];
        }
        let grid = TimeGrid::new(vec![0.25, 0.5, 1.0]).unwrap();
        let truth = true_decomposition(&cfg, &grid).unwrap();
        let ez = |law: &ModifierLaw| law.expect(|z| z).unwrap();
        let diff = ez(&cfg.majority.modifier) - ez(&cfg.minority.modifier);
        for (k, &t) in grid.points().iter().enumerate() {
            assert!((truth.d[k].unwrap() - t * diff).abs() < 1e-8);
        }
        // symmetric truncation around mirrored means: E Z^M = -E Z^m
        assert!((ez(&cfg.majority.modifier) + ez(&cfg.minority.modifier)).abs() < 1e-8);
    }

    #[test]
    fn swapping_groups_negates_truth() {
        let cfg = DgpConfig::preset("bilinear", 10, 0).unwrap();
        let grid = TimeGrid::trimmed(0.0, 1.0, 7, 0.05).unwrap();
        let a = true_decomposition(&cfg, &grid).unwrap();
        let b = true_decomposition(&cfg.swapped(), &grid).unwrap();
        for k in 0..grid.len() {
            assert!((a.d[k].unwrap() + b.d[k].unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = DgpConfig::preset("education", 10, 0).unwrap();
        cfg.majority.modifier = ModifierLaw::Bernoulli { p: 1.5 };
        assert!(generate(&cfg).is_err());
        assert!(DgpConfig::preset("nope", 10, 0).is_err());
        let mut cfg = DgpConfig::preset("bilinear", 10, 0).unwrap();
        cfg.minority.beta.pop();
        assert!(cfg.validate().is_err());
    }
}
