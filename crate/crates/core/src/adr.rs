//! Accelerometer-derived respiration: breathing tilts the chest, which
//! shows up as a slow oscillation of the gravity projection on each axis.
//! The axes are band-passed, brought to 4 Hz, and the dominant direction of
//! motion within each window (first principal component) is kept.

use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::ecg_resp::Surrogate;
use crate::signal::{bandpass, resample_to_rate, znorm_flagged, SampledSignal, TimeSpan, RESP_FS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdrConfig {
    pub band_hz: (f64, f64),
    pub band_order: usize,
}

impl Default for AdrConfig {
    fn default() -> Self {
        Self { band_hz: (0.1, 1.0), band_order: 4 }
    }
}

/// Band-passed accelerometer axes at 4 Hz, ready to be cut into windows.
#[derive(Debug, Clone, PartialEq)]
pub struct AdrPrepared {
    axes: [Vec<f64>; 3],
    t0: f64,
}

/// Filters and resamples a 3-axis accelerometer record once, so that many
/// windows can be extracted from it.
pub fn adr_prepare(accel: &SampledSignal, cfg: &AdrConfig) -> Result<AdrPrepared> {
    if accel.n_channels() < 3 {
        return Err(Error::InvalidSignal(alloc::format!(
            "accelerometer needs 3 channels, got {}",
            accel.n_channels()
        )));
    }
    if accel.fs() < 32.0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "accelerometer rate must be >= 32 Hz, got {}",
            accel.fs()
        )));
    }
    let three = SampledSignal::new(
        accel.channels()[..3].to_vec(),
        accel.labels()[..3].to_vec(),
        accel.fs(),
        accel.t0(),
    )?;
    let filtered = bandpass(&three, cfg.band_hz.0, cfg.band_hz.1, cfg.band_order)?;
    let slow = resample_to_rate(&filtered, RESP_FS)?;
    let t0 = slow.t0();
    let [x, y, z]: [Vec<f64>; 3] = slow.into_channels().try_into().expect("three channels");
    Ok(AdrPrepared { axes: [x, y, z], t0 })
}

impl AdrPrepared {
    /// First principal component of the three axes over `span`,
    /// z-normalised, with its sign chosen so it correlates non-negatively
    /// with the highest-variance axis.
    pub fn window(&self, span: &TimeSpan) -> Result<Surrogate> {
        let n = (span.length_s * RESP_FS).round() as usize;
        let start = ((span.start_s - self.t0) * RESP_FS).round();
        let len = self.axes[0].len();
        if start < 0.0 || start as usize + n > len {
            return Err(Error::InvalidArgument(alloc::format!(
                "window [{}, {}) s lies outside the accelerometer record",
                span.start_s,
                span.end_s()
            )));
        }
        let start = start as usize;
        let cols: [&[f64]; 3] = core::array::from_fn(|a| &self.axes[a][start..start + n]);
        Ok(principal_component(cols))
    }

    pub fn axes(&self) -> &[Vec<f64>; 3] {
        &self.axes
    }
}

/// One-shot extraction for a single window.
pub fn adr_extract(accel: &SampledSignal, span: &TimeSpan) -> Result<Surrogate> {
    adr_prepare(accel, &AdrConfig::default())?.window(span)
}

/// Principal axes of three equally long series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pca3 {
    pub means: [f64; 3],
    /// Variances along the axes, largest first.
    pub variances: [f64; 3],
    /// Unit directions matching `variances`.
    pub directions: [[f64; 3]; 3],
    /// Per-series variance before rotation.
    pub axis_variances: [f64; 3],
}

impl Pca3 {
    pub fn new(cols: [&[f64]; 3]) -> Self {
        let n = cols[0].len().max(1);
        let means: [f64; 3] = core::array::from_fn(|a| cols[a].iter().sum::<f64>() / n as f64);
        let cov = covariance(cols, means);
        let (values, vectors) = symmetric_eigen3(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(core::cmp::Ordering::Equal));
        Self {
            means,
            variances: order.map(|k| values[k]),
            directions: order.map(|k| core::array::from_fn(|r| vectors[r][k])),
            axis_variances: core::array::from_fn(|a| cov[a][a]),
        }
    }

    /// Centred projection on axis `k`.
    pub fn project(&self, cols: [&[f64]; 3], k: usize) -> Vec<f64> {
        let d = self.directions[k];
        (0..cols[0].len())
            .map(|i| (0..3).map(|a| d[a] * (cols[a][i] - self.means[a])).sum())
            .collect()
    }
}

fn principal_component(cols: [&[f64]; 3]) -> Surrogate {
    let mut pca = Pca3::new(cols);
    let v = &pca.axis_variances;
    let loudest = (0..3).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).unwrap();
    if pca.directions[0][loudest] < 0.0 {
        pca.directions[0].iter_mut().for_each(|d| *d = -*d);
    }
    let (samples, degenerate) = znorm_flagged(&pca.project(cols, 0));
    Surrogate { samples, degenerate }
}

fn covariance(cols: [&[f64]; 3], means: [f64; 3]) -> [[f64; 3]; 3] {
    let n = cols[0].len() as f64;
    let mut c = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let s: f64 = cols[a].iter().zip(cols[b]).map(|(x, y)| (x - means[a]) * (y - means[b])).sum();
            c[a][b] = s / n;
            c[b][a] = s / n;
        }
    }
    c
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix; returns
/// eigenvalues and eigenvectors as columns.
pub fn symmetric_eigen3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let scale = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}
