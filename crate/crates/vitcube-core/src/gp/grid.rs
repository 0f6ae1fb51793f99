use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::GpModel;
use crate::{Error, Result};

/// Posterior over a rectangular grid. Values are stored row-major with one
/// row per `y` coordinate: node `(i, j)` sits at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSurface {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl PosteriorSurface {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.x.len() + i
    }

    pub fn mean_at(&self, i: usize, j: usize) -> f64 {
        self.mean[self.index(i, j)]
    }

    pub fn variance_at(&self, i: usize, j: usize) -> f64 {
        self.variance[self.index(i, j)]
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|k| if k == n - 1 { hi } else { lo + step * k as f64 }).collect()
        }
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::Shape(format!("{name} axis needs at least 2 points, got {}", axis.len())));
    }
    if !axis.iter().all(|v| v.is_finite()) {
        return Err(Error::Input(format!("{name} axis has non-finite values")));
    }
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

/// Evaluates the posterior at every node of `x × y`, reusing the model's
/// factorization for all queries.
pub fn predict_grid(model: &GpModel, x: &[f64], y: &[f64]) -> Result<PosteriorSurface> {
    if model.dim() != 2 {
        return Err(Error::Shape(format!("grid prediction needs a 2-D model, got {}-D", model.dim())));
    }
    check_axis("x", x)?;
    check_axis("y", y)?;
    let mut surface = PosteriorSurface {
        x: x.to_vec(),
        y: y.to_vec(),
        mean: Vec::with_capacity(x.len() * y.len()),
        variance: Vec::with_capacity(x.len() * y.len()),
    };
    let mut buf = Vec::with_capacity(model.dataset().len());
    for &yj in y {
        for &xi in x {
            let p = model.predict_unchecked(&[xi, yj], &mut buf);
            surface.mean.push(p.mean);
            surface.variance.push(p.variance);
        }
    }
    Ok(surface)
}

/// The grid node with the highest posterior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridArgmax {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Highest mean wins; ties go to the lower variance, then to the smaller
/// `x`, then the smaller `y`.
pub fn argmax_posterior(surface: &PosteriorSurface) -> Result<GridArgmax> {
    if surface.x.is_empty() || surface.y.is_empty() || surface.mean.len() != surface.nx() * surface.ny() {
        return Err(Error::Shape("empty or inconsistent posterior surface".into()));
    }
    let mut best: Option<GridArgmax> = None;
    for i in 0..surface.nx() {
        for j in 0..surface.ny() {
            let cand = GridArgmax {
                i,
                j,
                x: surface.x[i],
                y: surface.y[j],
                mean: surface.mean_at(i, j),
                variance: surface.variance_at(i, j),
            };
            let better = match &best {
                None => true,
                Some(b) => cand.mean > b.mean || (cand.mean == b.mean && cand.variance < b.variance),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("nonempty surface"))
}
