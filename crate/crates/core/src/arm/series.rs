//! Uniformly sampled vector-valued time series.
//!
//! Samples are stored row-major: sample `k` occupies `data[k * dim..(k + 1) * dim]`.
//! Stacking a series into a single `N * dim` column (the discretized function used
//! by the least-squares routines) is therefore a plain copy of `data`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    dt: f64,
    dim: usize,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("series dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                context: "time series data",
                expected: dim * (data.len() / dim + 1),
                found: data.len(),
            });
        }
        if data.len() / dim < 2 {
            return Err(Error::InvalidConfig("a time series needs at least 2 samples".into()));
        }
        Ok(Self { dt, dim, data })
    }

    pub fn from_samples(dt: f64, samples: &[Vec<f64>]) -> Result<Self> {
        let dim = samples.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in samples {
            check_dim("time series sample", dim, s.len())?;
            data.extend_from_slice(s);
        }
        Self::new(dt, dim, data)
    }

    pub fn zeros(dt: f64, dim: usize, len: usize) -> Result<Self> {
        Self::new(dt, dim, vec![0.0; dim * len])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Duration `(N - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.sample(0)
    }

    pub fn last(&self) -> &[f64] {
        self.sample(self.len() - 1)
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Stacked `N * dim` representation.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.samples().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when both series share `(N, dt, dim)`.
    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.len() == other.len() && self.dim == other.dim && self.dt == other.dt
    }

    pub(crate) fn check_grid(&self, other: &TimeSeries, context: &'static str) -> Result<()> {
        check_dim(context, self.dim, other.dim)?;
        check_dim(context, self.len(), other.len())?;
        if self.dt != other.dt {
            return Err(Error::InvalidConfig(format!(
                "{context}: time steps differ ({} vs {})",
                self.dt, other.dt
            )));
        }
        Ok(())
    }

    pub(crate) fn map_data(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dt: self.dt,
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            dt: self.dt,
            dim: self.dim,
            data,
        }
    }
}

/// Finite-difference weights for the `order`-th derivative at offset 0 over
/// the given sample offsets (Fornberg's recursion).
fn stencil(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for m in (1..=mn).rev() {
                    c[i][m] = c1 * (m as f64 * c[i - 1][m - 1] - c5 * c[i - 1][m]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for m in (1..=mn).rev() {
                c[j][m] = (c4 * c[j][m] - m as f64 * c[j][m - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// First and second time derivatives by fourth-order finite differences:
/// centred five-point stencils in the interior, six-point one-sided windows
/// near the ends.
///
/// Series shorter than six samples use every sample they have.
pub fn differentiate(series: &TimeSeries) -> (TimeSeries, TimeSeries) {
    let n = series.len();
    let d = series.dim();
    let h = series.dt();
    let x = series.as_slice();
    let mut vel = vec![0.0; n * d];
    let mut acc = vec![0.0; n * d];

    for k in 0..n {
        let (lo, width) = if k >= 2 && k + 2 < n {
            (k - 2, 5)
        } else {
            let w = n.min(6);
            (k.saturating_sub(w / 2).min(n - w), w)
        };
        let offsets: Vec<f64> = (lo..lo + width).map(|i| i as f64 - k as f64).collect();
        let wv = stencil(&offsets, 1);
        let wa = if width >= 3 { stencil(&offsets, 2) } else { vec![0.0; width] };
        for j in 0..d {
            let qk = x[k * d + j];
            // differences from the centre sample keep constant series exact
            let (mut v, mut a) = (0.0, 0.0);
            for (i, idx) in (lo..lo + width).enumerate() {
                let dq = x[idx * d + j] - qk;
                v += wv[i] * dq;
                a += wa[i] * dq;
            }
            vel[k * d + j] = v / h;
            acc[k * d + j] = a / (h * h);
        }
    }
    (series.with_data(vel), series.with_data(acc))
}
