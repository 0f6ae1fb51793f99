use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Matérn smoothness `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Smoothness {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[default]
    #[serde(rename = "5/2")]
    FiveHalves,
}

impl Smoothness {
    pub fn as_str(self) -> &'static str {
        match self {
            Smoothness::Half => "1/2",
            Smoothness::ThreeHalves => "3/2",
            Smoothness::FiveHalves => "5/2",
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Smoothness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/2" | "0.5" => Ok(Smoothness::Half),
            "3/2" | "1.5" => Ok(Smoothness::ThreeHalves),
            "5/2" | "2.5" => Ok(Smoothness::FiveHalves),
            other => Err(Error::InvalidConfig(format!("unknown Matérn smoothness {other:?}"))),
        }
    }
}

/// Matérn covariance hyperparameters with one lengthscale per input dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    #[serde(default)]
    pub smoothness: Smoothness,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, smoothness: Smoothness) -> Result<Self> {
        let k = Self { lengthscales, signal_variance, smoothness };
        k.validate()?;
        Ok(k)
    }

    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, smoothness: Smoothness) -> Result<Self> {
        Self::new(alloc::vec![lengthscale; dim], signal_variance, smoothness)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidConfig(format!("lengthscales must be positive: {:?}", self.lengthscales)));
        }
        if !positive(self.signal_variance) {
            return Err(Error::InvalidConfig(format!("signal variance must be positive: {}", self.signal_variance)));
        }
        Ok(())
    }

    /// Lengthscale-weighted Euclidean distance.
    pub fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        let mut s = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let t = (x - y) / l;
            s += t * t;
        }
        libm::sqrt(s)
    }

    /// Covariance as a function of scaled distance.
    pub fn profile(&self, r: f64) -> f64 {
        let s2 = self.signal_variance;
        match self.smoothness {
            Smoothness::Half => s2 * libm::exp(-r),
            Smoothness::ThreeHalves => {
                let t = libm::sqrt(3.0) * r;
                s2 * (1.0 + t) * libm::exp(-t)
            }
            Smoothness::FiveHalves => {
                let t = libm::sqrt(5.0) * r;
                s2 * (1.0 + t + t * t / 3.0) * libm::exp(-t)
            }
        }
    }
}

pub fn matern_kernel(a: &[f64], b: &[f64], params: &KernelParams) -> f64 {
    params.profile(params.scaled_distance(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_distance_is_signal_variance() {
        for nu in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let k = KernelParams::new(vec![0.3, 2.0], 1.7, nu).unwrap();
            assert_eq!(matern_kernel(&[0.4, -1.0], &[0.4, -1.0], &k), 1.7);
        }
    }

    #[test]
    fn exponential_case_at_one_lengthscale() {
        let k = KernelParams::new(vec![0.7], 1.0, Smoothness::Half).unwrap();
        let v = matern_kernel(&[0.1], &[0.8], &k);
        assert!((v - 0.36788).abs() < 1e-5);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn decays_monotonically() {
        for nu in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let k = KernelParams::new(vec![1.0], 1.0, nu).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let v = matern_kernel(&[0.0], &[i as f64 * 0.25], &k);
                assert!(v <= prev && v >= 0.0);
                prev = v;
            }
            assert!(prev < 1e-10);
        }
    }

    #[test]
    fn parses_smoothness() {
        assert_eq!("3/2".parse::<Smoothness>().unwrap(), Smoothness::ThreeHalves);
        assert_eq!("2.5".parse::<Smoothness>().unwrap(), Smoothness::FiveHalves);
        assert!("7/2".parse::<Smoothness>().is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(KernelParams::new(vec![], 1.0, Smoothness::Half).is_err());
        assert!(KernelParams::new(vec![0.0], 1.0, Smoothness::Half).is_err());
        assert!(KernelParams::new(vec![1.0], f64::NAN, Smoothness::Half).is_err());
    }
}
