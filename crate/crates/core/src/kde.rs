//! Two-dimensional product-Gaussian kernel density on a regular grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Scott's rule for a product kernel in two dimensions: `n^(-1/6) * sd`.
pub fn scott_bandwidth(values: &[f64]) -> f64 {
    (values.len() as f64).powf(-1.0 / 6.0) * crate::stats::sd(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Explicit axis ranges; by default the sample range padded by `pad`
    /// bandwidths on each side.
    pub x_range: Option<[f64; 2]>,
    pub y_range: Option<[f64; 2]>,
    /// Explicit bandwidths; Scott's rule per axis by default.
    pub bandwidth: Option<[f64; 2]>,
    pub pad: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 101,
            ny: 101,
            x_range: None,
            y_range: None,
            bandwidth: None,
            pad: 5.0,
        }
    }
}

/// Densities at grid nodes, row-major: `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub bandwidth: [f64; 2],
    pub values: Vec<f64>,
}

fn axis(range: [f64; 2], count: usize) -> Vec<f64> {
    let step = (range[1] - range[0]) / (count - 1) as f64;
    (0..count).map(|i| range[0] + step * i as f64).collect()
}

impl DensityGrid {
    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_range, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.y_range, self.ny)
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_area(&self) -> f64 {
        (self.x_range[1] - self.x_range[0]) / (self.nx - 1) as f64 * (self.y_range[1] - self.y_range[0])
            / (self.ny - 1) as f64
    }

    /// Riemann sum of the density over the grid.
    pub fn mass(&self) -> f64 {
        crate::stats::sum(self.values.iter().copied()) * self.cell_area()
    }

    /// Grid node with the largest density (first one on ties).
    pub fn mode(&self) -> [f64; 2] {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        let (ix, iy) = (best % self.nx, best / self.nx);
        [self.xs()[ix], self.ys()[iy]]
    }
}

fn check_axis(name: &str, values: &[f64], explicit_bandwidth: bool) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite {name} sample")));
    }
    if !explicit_bandwidth && crate::stats::sd(values) <= 0.0 {
        return Err(Error::Data(format!(
            "{name} samples have zero variance; add a small jitter or pass an explicit bandwidth"
        )));
    }
    Ok(())
}

/// Gaussian KDE of `(x, y)` samples evaluated on a grid.
///
/// Without explicit bandwidths each axis needs non-zero sample variance.
pub fn gkde2d(x: &[f64], y: &[f64], spec: &GridSpec) -> Result<DensityGrid> {
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} x samples but {} y samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Data("density estimate needs at least 2 samples".into()));
    }
    if spec.nx < 2 || spec.ny < 2 {
        return Err(Error::Config(format!(
            "grid must be at least 2x2, got {}x{}",
            spec.nx, spec.ny
        )));
    }
    check_axis("x", x, spec.bandwidth.is_some())?;
    check_axis("y", y, spec.bandwidth.is_some())?;
    let h = spec.bandwidth.unwrap_or([scott_bandwidth(x), scott_bandwidth(y)]);
    if !(h[0] > 0.0 && h[1] > 0.0 && h[0].is_finite() && h[1].is_finite()) {
        return Err(Error::Config(format!("bandwidths must be positive, got {h:?}")));
    }
    let padded = |v: &[f64], h: f64| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        [lo - spec.pad * h, hi + spec.pad * h]
    };
    let x_range = spec.x_range.unwrap_or_else(|| padded(x, h[0]));
    let y_range = spec.y_range.unwrap_or_else(|| padded(y, h[1]));
    for r in [x_range, y_range] {
        if !(r[1] > r[0]) {
            return Err(Error::Config(format!("empty grid range {r:?}")));
        }
    }
    let n = x.len();
    let kernel = |grid: &[f64], s: &[f64], h: f64| {
        let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
        DMatrix::from_fn(grid.len(), s.len(), |g, i| {
            let t = (grid[g] - s[i]) / h;
            norm * (-0.5 * t * t).exp()
        })
    };
    let (gx, gy) = (axis(x_range, spec.nx), axis(y_range, spec.ny));
    // Accumulated over sample chunks to bound the kernel matrices' size.
    let mut dens = DMatrix::<f64>::zeros(spec.ny, spec.nx);
    for (cx, cy) in x.chunks(CHUNK).zip(y.chunks(CHUNK)) {
        dens += kernel(&gy, cy, h[1]) * kernel(&gx, cx, h[0]).transpose();
    }
    dens /= n as f64;
    // `dens` is ny x nx; nalgebra stores column-major, so its row-major order
    // is the storage of the transpose.
    let values = dens.transpose().as_slice().to_vec();
    Ok(DensityGrid {
        x_range,
        y_range,
        nx: spec.nx,
        ny: spec.ny,
        bandwidth: h,
        values,
    })
}

/// KDE value at one point with given bandwidths.
pub fn density_at(x: &[f64], y: &[f64], bandwidth: [f64; 2], point: [f64; 2]) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bandwidth[0] * bandwidth[1]);
    let total = crate::stats::sum(x.iter().zip(y).map(|(xi, yi)| {
        let a = (point[0] - xi) / bandwidth[0];
        let b = (point[1] - yi) / bandwidth[1];
        (-0.5 * (a * a + b * b)).exp()
    }));
    norm * total / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn two_point_symmetry() {
        let spec = GridSpec {
            nx: 41,
            ny: 21,
            x_range: Some([-3.0, 3.0]),
            y_range: Some([-1.0, 1.0]),
            bandwidth: Some([0.5, 0.5]),
            ..Default::default()
        };
        let g = gkde2d(&[-1.0, 1.0], &[0.0, 0.0], &spec).unwrap();
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                assert!((g.at(ix, iy) - g.at(g.nx - 1 - ix, iy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_matches_pointwise_density() {
        let x = [0.1, -0.4, 0.9, 0.3];
        let y = [1.0, 0.2, -0.5, 0.0];
        let g = gkde2d(
            &x,
            &y,
            &GridSpec {
                nx: 7,
                ny: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let (xs, ys) = (g.xs(), g.ys());
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let want = density_at(&x, &y, g.bandwidth, [xs[ix], ys[iy]]);
                assert!((g.at(ix, iy) - want).abs() < 1e-12 * want.max(1e-300).max(1.0));
            }
        }
    }

    #[test]
    fn normal_mode_and_mass() {
        let mut rng = crate::seed::stream(17);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let g = gkde2d(&x, &y, &GridSpec::default()).unwrap();
        let step = [
            (g.x_range[1] - g.x_range[0]) / 100.0,
            (g.y_range[1] - g.y_range[0]) / 100.0,
        ];
        let m = g.mode();
        // One cell plus sampling noise of the KDE mode.
        assert!(m[0].abs() <= step[0] + 0.1 && m[1].abs() <= step[1] + 0.1, "{m:?}");
        assert!((g.mass() - 1.0).abs() < 0.02, "{}", g.mass());
        assert!(g.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn far_tail_is_negligible() {
        let x = [0.0, 0.5, 1.0];
        let y = [0.0, -0.5, 0.25];
        let h = [scott_bandwidth(&x), scott_bandwidth(&y)];
        let peak = density_at(&x, &y, h, [0.5, 0.0]);
        let far = density_at(&x, &y, h, [1.0 + 10.0 * h[0], 0.25 + 10.0 * h[1]]);
        assert!(far < 1e-8 * peak);
    }

    #[test]
    fn zero_variance_suggests_jitter() {
        let err = gkde2d(&[1.0, 1.0], &[0.0, 1.0], &GridSpec::default()).unwrap_err();
        assert!(err.to_string().contains("jitter"));
    }
}
