//! Brute-force reference implementations shared by the integration tests.
//! Everything here works row by row from the raw observations and solves
//! with Gaussian elimination, sharing no code path with the library fits.
#![allow(dead_code)]

use ldd::{LongitudinalDataset, ModifierKind, Subject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn epan(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Window {
    Kernel { z: f64, b2: f64 },
    Level(f64),
    All,
}

impl Window {
    fn weight(self, zi: f64) -> f64 {
        match self {
            Window::Kernel { z, b2 } => epan((zi - z) / b2),
            Window::Level(z) => (zi == z) as u8 as f64,
            Window::All => 1.0,
        }
    }

    fn peak(self) -> f64 {
        match self {
            Window::Kernel { .. } => 0.75,
            _ => 1.0,
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Weighted least squares over explicit rows; `None` when the effective
/// weight is below `floor` or the system is singular.
pub fn wls(rows: &[(Vec<f64>, f64, f64)], floor: f64) -> Option<Vec<f64>> {
    let q = rows.first()?.0.len();
    let eff: f64 = rows.iter().map(|r| r.2).sum();
    if !(eff > 0.0) || eff < floor {
        return None;
    }
    let mut a = vec![vec![0.0; q]; q];
    let mut b = vec![0.0; q];
    for (x, y, w) in rows {
        for i in 0..q {
            b[i] += w * x[i] * y;
            for j in 0..q {
                a[i][j] += w * x[i] * x[j];
            }
        }
    }
    gauss_solve(a, b)
}

/// Local-constant coefficients at `(t, window)`; `time_only` appends the
/// modifier as a regressor. Subject `exclude` is dropped.
pub fn beta(
    ds: &LongitudinalDataset,
    t: f64,
    window: Window,
    b1: f64,
    time_only: bool,
    exclude: Option<usize>,
) -> Option<Vec<f64>> {
    let q = ds.p() + 1 + time_only as usize;
    let mut rows = Vec::new();
    for (i, s) in ds.subjects().iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        for j in 0..s.n_obs() {
            let w = epan((s.times()[j] - t) / b1) * window.weight(s.modifier());
            if w == 0.0 {
                continue;
            }
            let mut x = vec![1.0];
            x.extend_from_slice(s.covariate_row(j));
            if time_only {
                x.push(s.modifier());
            }
            rows.push((x, s.outcomes()[j], w));
        }
    }
    wls(&rows, (q + 1) as f64 * 0.75 * window.peak())
}

/// Kernel-weighted mean of covariate `r` (1-based).
pub fn cond_mean(
    ds: &LongitudinalDataset,
    r: usize,
    t: f64,
    window: Window,
    b1: f64,
    exclude: Option<usize>,
) -> Option<f64> {
    let (mut sw, mut swx) = (0.0, 0.0);
    for (i, s) in ds.subjects().iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        for j in 0..s.n_obs() {
            let w = epan((s.times()[j] - t) / b1) * window.weight(s.modifier());
            sw += w;
            swx += w * s.covariate_row(j)[r - 1];
        }
    }
    (sw > 0.0).then(|| swx / sw)
}

fn window_for(ds: &LongitudinalDataset, z: f64, b2: f64) -> Window {
    if ds.modifier_kind().is_discrete() {
        Window::Level(z)
    } else {
        Window::Kernel { z, b2 }
    }
}

fn means_at(ds: &LongitudinalDataset, t: f64, z: f64, b1: f64, b2: f64) -> Option<Vec<f64>> {
    let mut m = vec![1.0];
    for r in 1..=ds.p() {
        m.push(cond_mean(ds, r, t, window_for(ds, z, b2), b1, None)?);
    }
    Some(m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Marginal decomposition `[D1, D2, D3]` at one time with one bandwidth
/// pair for every fit.
pub fn mldd(
    maj: &LongitudinalDataset,
    min: &LongitudinalDataset,
    t: f64,
    b1: f64,
    b2: f64,
) -> Option<[f64; 3]> {
    let (mut d1, mut d2, mut a, mut c) = (0.0, 0.0, 0.0, 0.0);
    let nm = maj.n_subjects() as f64;
    for z in maj.modifiers() {
        let bm = beta(maj, t, window_for(maj, z, b2), b1, false, None)?;
        let bn = beta(min, t, window_for(min, z, b2), b1, false, None)?;
        let mm = means_at(maj, t, z, b1, b2)?;
        let mn = means_at(min, t, z, b1, b2)?;
        let gap: Vec<f64> = bm.iter().zip(&bn).map(|(x, y)| x - y).collect();
        let xgap: Vec<f64> = mm.iter().zip(&mn).map(|(x, y)| x - y).collect();
        d1 += dot(&mm, &gap) / nm;
        d2 += dot(&xgap, &bn) / nm;
        a += dot(&mn, &bn) / nm;
    }
    for z in min.modifiers() {
        let bn = beta(min, t, window_for(min, z, b2), b1, false, None)?;
        let mn = means_at(min, t, z, b1, b2)?;
        c += dot(&mn, &bn) / min.n_subjects() as f64;
    }
    Some([d1, d2, a - c])
}

/// Exact held-out sum of squares for the coefficient target, refitting
/// without each subject in turn. Returns `(sum, used, skipped)`.
pub fn loso_beta(ds: &LongitudinalDataset, b1: f64, b2: Option<f64>) -> (f64, usize, usize) {
    let (mut ss, mut used, mut skipped) = (0.0, 0, 0);
    for (i, s) in ds.subjects().iter().enumerate() {
        let w = match b2 {
            Some(b2) => Window::Kernel { z: s.modifier(), b2 },
            None => Window::Level(s.modifier()),
        };
        for j in 0..s.n_obs() {
            match beta(ds, s.times()[j], w, b1, false, Some(i)) {
                Some(b) => {
                    let mut x = vec![1.0];
                    x.extend_from_slice(s.covariate_row(j));
                    let r = s.outcomes()[j] - dot(&x, &b);
                    ss += r * r;
                    used += 1;
                }
                None => skipped += 1,
            }
        }
    }
    (ss, used, skipped)
}

/// `|a - b| <= tol * max(1, |b|)` elementwise.
pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
}

/// Random dataset with `n` subjects, `p` covariates and 4 to 9 observations
/// per subject on `[0, 1]`. Discrete modifiers use levels 0 and 1, each
/// present at least once.
pub fn random_dataset(seed: u64, group: &str, n: usize, p: usize, discrete: bool) -> LongitudinalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = (0..n)
        .map(|i| {
            let z = if discrete {
                if i < 2 {
                    i as f64
                } else {
                    rng.random_range(0..2) as f64
                }
            } else {
                rng.random_range(-1.0..1.0)
            };
            let k = rng.random_range(4..10);
            let times: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let covs: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let ys = (0..k)
                .map(|j| 1.0 + times[j] + z * covs[j].iter().sum::<f64>() + rng.random_range(-0.5..0.5))
                .collect();
            Subject::new(format!("{group}{i:02}"), z, times, ys, covs).unwrap()
        })
        .collect();
    let kind = if discrete {
        ModifierKind::Discrete(vec![0, 1])
    } else {
        ModifierKind::Continuous
    };
    LongitudinalDataset::new(group, subjects, kind).unwrap()
}

/// Time-only decomposition `[D1, D2, D3]` at one time.
pub fn ldd(maj: &LongitudinalDataset, min: &LongitudinalDataset, t: f64, b1: f64) -> Option<[f64; 3]> {
    let p = maj.p();
    let pooled = |ds: &LongitudinalDataset| -> Option<Vec<f64>> {
        let mut x = vec![1.0];
        for r in 1..=p {
            x.push(cond_mean(ds, r, t, Window::All, b1, None)?);
        }
        let z = ds.modifiers();
        x.push(z.iter().sum::<f64>() / z.len() as f64);
        Some(x)
    };
    let (xm, xn) = (pooled(maj)?, pooled(min)?);
    let bm = beta(maj, t, Window::All, b1, true, None)?;
    let bn = beta(min, t, Window::All, b1, true, None)?;
    let d1 = (0..p + 2).map(|a| xm[a] * (bm[a] - bn[a])).sum();
    let d2 = (0..=p).map(|a| (xm[a] - xn[a]) * bn[a]).sum();
    Some([d1, d2, (xm[p + 1] - xn[p + 1]) * bn[p + 1]])
}
