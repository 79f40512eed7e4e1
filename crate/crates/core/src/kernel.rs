//! Compactly supported smoothing kernels.
//!
//! Every family here is symmetric, non-negative, integrates to one and
//! vanishes outside `[-1, 1]`, so weight vectors are sparse once the
//! bandwidth is small relative to the spread of the data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    #[default]
    Epanechnikov,
    Triweight,
    Uniform,
}

impl KernelSpec {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            KernelSpec::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelSpec::Triweight => {
                let s = 1.0 - u * u;
                (35.0 / 32.0) * s * s * s
            }
            KernelSpec::Uniform => 0.5,
        }
    }

    /// Kernel height at the origin, i.e. the largest weight one observation can carry.
    pub fn peak(self) -> f64 {
        self.eval(0.0)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelSpec::Epanechnikov => "epanechnikov",
            KernelSpec::Triweight => "triweight",
            KernelSpec::Uniform => "uniform",
        };
        f.write_str(name)
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelSpec::Epanechnikov),
            "triweight" => Ok(KernelSpec::Triweight),
            "uniform" | "box" => Ok(KernelSpec::Uniform),
            other => Err(Error::Domain(format!("unknown kernel `{other}`"))),
        }
    }
}

pub fn kernel_eval(spec: KernelSpec, u: f64) -> f64 {
    spec.eval(u)
}

/// Unnormalized weights `K((c - target) / bandwidth)` for each center `c`.
pub fn weight_vector(
    spec: KernelSpec,
    centers: &[f64],
    target: f64,
    bandwidth: f64,
) -> Result<Vec<f64>> {
    check_bandwidth(bandwidth)?;
    Ok(centers
        .iter()
        .map(|&c| spec.eval((c - target) / bandwidth))
        .collect())
}

pub(crate) fn check_bandwidth(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("bandwidth must be positive, got {b}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [KernelSpec; 3] = [
        KernelSpec::Epanechnikov,
        KernelSpec::Triweight,
        KernelSpec::Uniform,
    ];

    #[test]
    fn epanechnikov_values() {
        let k = KernelSpec::Epanechnikov;
        assert_eq!(kernel_eval(k, 0.0), 0.75);
        assert_eq!(kernel_eval(k, 1.2), 0.0);
        assert_eq!(kernel_eval(k, 0.5), 0.5625);
        assert_eq!(kernel_eval(k, -1.0), 0.0);
    }

    #[test]
    fn weight_vector_edges() {
        let k = KernelSpec::Epanechnikov;
        assert_eq!(weight_vector(k, &[0.3], 0.3, 0.7).unwrap(), vec![0.75]);
        let b = 0.25;
        assert_eq!(
            weight_vector(k, &[0.0, 2.0 * b], 0.0, b).unwrap(),
            vec![0.75, 0.0]
        );
        assert!(matches!(
            weight_vector(k, &[0.0], 0.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(weight_vector(k, &[0.0], 0.0, -1.0).is_err());
    }

    #[test]
    fn kernels_integrate_to_one() {
        // composite Simpson on [-1, 1]
        let n = 2000;
        let h = 2.0 / n as f64;
        for k in ALL {
            let mut s = k.eval(-1.0) + k.eval(1.0);
            for i in 1..n {
                let u = -1.0 + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * k.eval(u);
            }
            let integral = s * h / 3.0;
            // the uniform kernel jumps at the endpoints, Simpson sees half-height there
            let tol = if k == KernelSpec::Uniform { 1e-3 } else { 1e-10 };
            assert!((integral - 1.0).abs() < tol, "{k}: {integral}");
        }
    }

    #[test]
    fn parse_roundtrip() {
        for k in ALL {
            assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
        }
        assert!("gaussian".parse::<KernelSpec>().is_err());
    }

    proptest! {
        #[test]
        fn weight_vector_matches_scalar(
            centers in proptest::collection::vec(-3.0f64..3.0, 0..20),
            target in -2.0f64..2.0,
            b in 0.01f64..2.0,
        ) {
            let w = weight_vector(KernelSpec::Epanechnikov, &centers, target, b).unwrap();
            for (c, wk) in centers.iter().zip(&w) {
                prop_assert_eq!(*wk, kernel_eval(KernelSpec::Epanechnikov, (c - target) / b));
            }
        }

        #[test]
        fn symmetric_and_bounded(u in -3.0f64..3.0) {
            for k in ALL {
                prop_assert_eq!(k.eval(u), k.eval(-u));
                prop_assert!(k.eval(u) >= 0.0);
                if u.abs() > 1.0 {
                    prop_assert_eq!(k.eval(u), 0.0);
                }
            }
        }

        #[test]
        fn reflected_center_same_weight(c in -2.0f64..2.0, t in -2.0f64..2.0, b in 0.05f64..3.0) {
            let k = KernelSpec::Epanechnikov;
            let a = k.eval((c - t) / b);
            let r = k.eval(((2.0 * t - c) - t) / b);
            prop_assert!((a - r).abs() <= 1e-15);
        }

        #[test]
        fn epanechnikov_monotone(a in 0.0f64..1.0, d in 0.0f64..1.0) {
            let k = KernelSpec::Epanechnikov;
            prop_assert!(k.eval(a) >= k.eval(a + d));
        }
    }
}
