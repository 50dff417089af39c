//! Gaussian kernel density estimation of a posterior density from draws.
//!
//! Two evaluation routes are offered: exact kernel sums at arbitrary points
//! and a binned grid fit with linear interpolation between grid nodes.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 / sqrt(2 pi)`
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
fn std_normal_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "h", rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.349) * N^(-1/5)`
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Exact kernel sum at each query point.
    Direct,
    /// Linear interpolation on the binned grid fit.
    GridInterp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth: BandwidthRule,
    pub grid_size: usize,
    /// Grid extends this many bandwidths beyond the sample range.
    pub padding_bandwidths: f64,
    pub eval_mode: EvalMode,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: BandwidthRule::Silverman,
            grid_size: 401,
            padding_bandwidths: 6.0,
            eval_mode: EvalMode::Direct,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidScale(h));
            }
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid_size must be at least 2 (got {})",
                self.grid_size
            )));
        }
        if !(self.padding_bandwidths.is_finite() && self.padding_bandwidths > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "padding_bandwidths must be positive (got {})",
                self.padding_bandwidths
            )));
        }
        Ok(())
    }

    /// Resolves the bandwidth for `sample`.
    pub fn bandwidth_for(&self, sample: &[f64]) -> Result<f64> {
        match self.bandwidth {
            BandwidthRule::Silverman => silverman_bandwidth(sample),
            BandwidthRule::Fixed(h) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidScale(h));
                }
                Ok(h)
            }
        }
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall { got: sample.len() });
    }
    if let Some((index, &value)) = sample.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidDraw { index, value });
    }
    Ok(())
}

/// Quantile `q` of sorted data, interpolating linearly at index `q * (N - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Silverman's rule-of-thumb bandwidth.
///
/// Uses the sample sd with divisor `N - 1` and the interquartile range from
/// [`quantile_sorted`]. When the IQR is zero but the sd is not, the sd alone
/// sets the spread.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    check_sample(sample)?;
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();

    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] || sd == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Exact kernel density estimate `(1/(N h)) Σ φ((theta - x_i)/h)`.
///
/// Summation runs in sample order. Far from the sample the value underflows
/// towards zero; callers decide how to treat that.
pub fn kde_eval_direct(sample: &[f64], h: f64, theta: f64) -> f64 {
    let inv_h = 1.0 / h;
    let sum: f64 = sample
        .iter()
        .map(|x| std_normal_pdf((theta - x) * inv_h))
        .sum();
    sum * inv_h / sample.len() as f64
}

/// A density estimate tabulated on an equally spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
    bandwidth: f64,
}

impl DensityGrid {
    /// Assembles a grid from parts, checking the structural invariants
    /// (matching lengths, at least two strictly increasing nodes, nonnegative
    /// ordinates, positive bandwidth).
    pub fn from_parts(abscissae: Vec<f64>, ordinates: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if abscissae.len() < 2 || abscissae.len() != ordinates.len() {
            return Err(Error::InvalidConfig(
                "a density grid needs at least two nodes and one ordinate per node".into(),
            ));
        }
        if abscissae
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidConfig(
                "grid abscissae must be strictly increasing".into(),
            ));
        }
        if ordinates.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            return Err(Error::InvalidConfig(
                "grid ordinates must be finite and nonnegative".into(),
            ));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidScale(bandwidth));
        }
        Ok(DensityGrid {
            abscissae,
            ordinates,
            bandwidth,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.abscissae[0], self.abscissae[self.abscissae.len() - 1])
    }

    pub fn max_ordinate(&self) -> f64 {
        self.ordinates.iter().copied().fold(0.0, f64::max)
    }

    pub fn trapezoid_integral(&self) -> f64 {
        self.abscissae
            .windows(2)
            .zip(self.ordinates.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Linear interpolation between the bracketing nodes.
    pub fn interp_linear(&self, theta: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(theta >= lo && theta <= hi) {
            return Err(Error::OutOfGridRange { theta, lo, hi });
        }
        // first node strictly greater than theta
        let k = self.abscissae.partition_point(|&x| x <= theta);
        if k == 0 {
            return Ok(self.ordinates[0]);
        }
        if k == self.abscissae.len() {
            return Ok(self.ordinates[k - 1]);
        }
        let (x0, x1) = (self.abscissae[k - 1], self.abscissae[k]);
        let (y0, y1) = (self.ordinates[k - 1], self.ordinates[k]);
        if theta == x0 {
            return Ok(y0);
        }
        let t = (theta - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }

    /// Writes `x,density` CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,density")?;
        for (x, y) in self.abscissae.iter().zip(&self.ordinates) {
            writeln!(out, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }
}

/// Free-function form of [`DensityGrid::interp_linear`].
pub fn interp_linear(grid: &DensityGrid, theta: f64) -> Result<f64> {
    grid.interp_linear(theta)
}

/// Fits a binned Gaussian KDE on a grid spanning the sample range padded by
/// `padding_bandwidths * h` on each side.
///
/// Each draw is split between its two neighbouring nodes in proportion to
/// proximity (linear binning); the bin counts are then convolved with the
/// kernel by direct summation.
pub fn kde_fit_grid(sample: &[f64], cfg: &KdeConfig) -> Result<DensityGrid> {
    cfg.validate()?;
    check_sample(sample)?;
    let h = cfg.bandwidth_for(sample)?;

    let (min, max) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let lo = min - cfg.padding_bandwidths * h;
    let hi = max + cfg.padding_bandwidths * h;
    let g = cfg.grid_size;
    let delta = (hi - lo) / (g - 1) as f64;
    let abscissae: Vec<f64> = (0..g).map(|k| lo + k as f64 * delta).collect();

    let mut counts = vec![0.0; g];
    for &x in sample {
        let pos = (x - lo) / delta;
        let j = (pos.floor() as usize).min(g - 2);
        let frac = (pos - j as f64).clamp(0.0, 1.0);
        counts[j] += 1.0 - frac;
        counts[j + 1] += frac;
    }

    // kernel depends only on the node offset
    let kernel: Vec<f64> = (0..g)
        .map(|m| std_normal_pdf(m as f64 * delta / h))
        .collect();
    let norm = 1.0 / (sample.len() as f64 * h);
    let occupied: Vec<(usize, f64)> = counts
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, c)| c > 0.0)
        .collect();
    let ordinates = (0..g)
        .map(|k| {
            let s: f64 = occupied
                .iter()
                .map(|&(j, c)| c * kernel[k.abs_diff(j)])
                .sum();
            s * norm
        })
        .collect();

    DensityGrid::from_parts(abscissae, ordinates, h)
}

/// A fitted posterior density estimate, evaluated according to its mode.
#[derive(Debug, Clone)]
pub struct PosteriorKde {
    sample: Vec<f64>,
    bandwidth: f64,
    mode: EvalMode,
    grid: Option<DensityGrid>,
}

impl PosteriorKde {
    pub fn fit(sample: &[f64], cfg: &KdeConfig) -> Result<Self> {
        cfg.validate()?;
        check_sample(sample)?;
        let (bandwidth, grid) = match cfg.eval_mode {
            EvalMode::Direct => (cfg.bandwidth_for(sample)?, None),
            EvalMode::GridInterp => {
                let grid = kde_fit_grid(sample, cfg)?;
                (grid.bandwidth(), Some(grid))
            }
        };
        Ok(PosteriorKde {
            sample: sample.to_vec(),
            bandwidth,
            mode: cfg.eval_mode,
            grid,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn grid(&self) -> Option<&DensityGrid> {
        self.grid.as_ref()
    }

    pub fn density(&self, theta: f64) -> Result<f64> {
        match &self.grid {
            Some(grid) => grid.interp_linear(theta),
            None => Ok(kde_eval_direct(&self.sample, self.bandwidth, theta)),
        }
    }
}
