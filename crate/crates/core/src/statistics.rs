//! Exit-time histograms and straight-line fits on transformed axes.
//!
//! Slopes are reported signed: the middle fit returns `d ln P / dT` and the
//! tail fit returns `d ln P / d ln T`, both negative for decaying data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scattering::linear_fit;

pub const MIN_PDF_SAMPLES: usize = 1000;
pub const MIN_FIT_BINS: usize = 5;
pub const DEFAULT_LINEAR_BINS: usize = 2000;
pub const DEFAULT_LOG_BINS: usize = 60;
pub const DEFAULT_MIDDLE_PERCENTILES: (f64, f64) = (40.0, 80.0);
pub const DEFAULT_TAIL_PERCENTILES: (f64, f64) = (90.0, 99.5);
/// Log bins with fewer counts are dropped from the tail fit.
pub const DEFAULT_TAIL_MIN_COUNT: u64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("insufficient samples: {finite} finite exit times, need {required}")]
    InsufficientSamples { finite: usize, required: usize },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("invalid fit window [{lo}, {hi}]: {reason}")]
    InvalidWindow { lo: f64, hi: f64, reason: String },
    #[error("empty window [{lo}, {hi}]: {bins} usable bins, need {required}")]
    EmptyWindow {
        lo: f64,
        hi: f64,
        bins: usize,
        required: usize,
    },
    #[error("sparse tail in [{lo}, {hi}]: {kept} of {total} bins reach {min_count} counts")]
    SparseTail {
        lo: f64,
        hi: f64,
        kept: usize,
        total: usize,
        min_count: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub scale: BinScale,
    pub bins: usize,
}

impl Binning {
    pub fn linear(bins: usize) -> Self {
        Self {
            scale: BinScale::Linear,
            bins,
        }
    }

    pub fn log(bins: usize) -> Self {
        Self {
            scale: BinScale::Log,
            bins,
        }
    }
}

/// Histogram over `[min T, max T]` of the finite samples. Densities are
/// normalized by the full sample count, so they integrate to the finite
/// fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimePdf {
    pub binning: Binning,
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_count: usize,
    pub timeout_count: usize,
}

/// Non-finite entries are timeouts.
pub fn build_pdf(times: &[f64], binning: Binning) -> Result<ExitTimePdf, StatsError> {
    if binning.bins == 0 {
        return Err(StatsError::InvalidBinning(
            "bin count must be positive".into(),
        ));
    }
    let finite: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    if finite.len() < MIN_PDF_SAMPLES {
        return Err(StatsError::InsufficientSamples {
            finite: finite.len(),
            required: MIN_PDF_SAMPLES,
        });
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo >= hi {
        return Err(StatsError::InvalidBinning(format!(
            "all samples equal {lo}"
        )));
    }
    let nb = binning.bins;
    let bin_edges: Vec<f64> = match binning.scale {
        BinScale::Linear => (0..=nb)
            .map(|i| {
                if i == nb {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64 / nb as f64)
                }
            })
            .collect(),
        BinScale::Log => {
            if lo <= 0.0 {
                return Err(StatsError::InvalidBinning(format!(
                    "log bins need positive samples, minimum is {lo}"
                )));
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..=nb)
                .map(|i| match i {
                    0 => lo,
                    i if i == nb => hi,
                    i => (a + (b - a) * (i as f64 / nb as f64)).exp(),
                })
                .collect()
        }
    };
    let mut counts = vec![0u64; nb];
    for t in &finite {
        let k = bin_edges
            .partition_point(|e| e <= t)
            .saturating_sub(1)
            .min(nb - 1);
        counts[k] += 1;
    }
    let total = times.len() as f64;
    let densities = counts
        .iter()
        .zip(bin_edges.windows(2))
        .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
        .collect();
    Ok(ExitTimePdf {
        binning,
        bin_edges,
        densities,
        counts,
        sample_count: times.len(),
        timeout_count: times.len() - finite.len(),
    })
}

impl ExitTimePdf {
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// Arithmetic center for linear bins, geometric for log bins.
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| match self.binning.scale {
                BinScale::Linear => 0.5 * (e[0] + e[1]),
                BinScale::Log => (e[0] * e[1]).sqrt(),
            })
            .collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.bin_edges[0], self.bin_edges[self.bin_edges.len() - 1])
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["bin_lo", "bin_hi", "density", "count"])?;
        for (k, e) in self.bin_edges.windows(2).enumerate() {
            wtr.write_record([
                e[0].to_string(),
                e[1].to_string(),
                self.densities[k].to_string(),
                self.counts[k].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    ExponentialMiddle,
    PowerLawTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub parameter: f64,
    #[serde(rename = "window")]
    pub fit_window: [f64; 2],
    /// Root-mean-square residual of `ln P` about the fitted line.
    pub residual: f64,
    pub point_count: usize,
    /// Standard error of the slope.
    pub std_error: f64,
    pub intercept: f64,
}

/// Linearly interpolated percentile of the finite entries, `q` in [0, 100].
pub fn percentile(times: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    if v.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    Some(if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    })
}

/// Window between two percentiles of the finite exit times.
pub fn percentile_window(times: &[f64], (lo, hi): (f64, f64)) -> Option<[f64; 2]> {
    Some([percentile(times, lo)?, percentile(times, hi)?])
}

fn check_window(pdf: &ExitTimePdf, w: [f64; 2]) -> Result<(), StatsError> {
    let (a, b) = pdf.range();
    let bad = |reason: String| StatsError::InvalidWindow {
        lo: w[0],
        hi: w[1],
        reason,
    };
    if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
        return Err(bad("bounds must be finite with lo < hi".into()));
    }
    if w[0] < a || w[1] > b {
        return Err(bad(format!("outside data range [{a}, {b}]")));
    }
    Ok(())
}

fn fit(model: FitModel, window: [f64; 2], pts: &[(f64, f64)]) -> FitReport {
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (slope, intercept, _) = linear_fit(&x, &y);
    let n = x.len() as f64;
    let ss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    FitReport {
        model,
        parameter: slope,
        fit_window: window,
        residual: (ss / n).sqrt(),
        point_count: x.len(),
        std_error: (ss / (n - 2.0) / sxx).sqrt(),
        intercept,
    }
}

/// Line through `(T, ln P)` over nonempty bins centered inside `window`.
pub fn fit_exponential_middle(
    pdf: &ExitTimePdf,
    window: [f64; 2],
) -> Result<FitReport, StatsError> {
    check_window(pdf, window)?;
    let pts: Vec<(f64, f64)> = pdf
        .bin_centers()
        .into_iter()
        .zip(&pdf.densities)
        .filter(|(c, d)| *c >= window[0] && *c <= window[1] && **d > 0.0)
        .map(|(c, d)| (c, d.ln()))
        .collect();
    if pts.len() < MIN_FIT_BINS {
        return Err(StatsError::EmptyWindow {
            lo: window[0],
            hi: window[1],
            bins: pts.len(),
            required: MIN_FIT_BINS,
        });
    }
    Ok(fit(FitModel::ExponentialMiddle, window, &pts))
}

/// Line through `(ln T, ln P)` over bins centered inside `window` holding
/// at least `min_count` samples.
pub fn fit_powerlaw_tail(
    pdf: &ExitTimePdf,
    window: [f64; 2],
    min_count: u64,
) -> Result<FitReport, StatsError> {
    check_window(pdf, window)?;
    if window[0] <= 0.0 {
        return Err(StatsError::InvalidWindow {
            lo: window[0],
            hi: window[1],
            reason: "power-law window must be positive".into(),
        });
    }
    let in_window: Vec<(f64, f64, u64)> = pdf
        .bin_centers()
        .into_iter()
        .zip(&pdf.densities)
        .zip(&pdf.counts)
        .filter(|((c, _), _)| *c >= window[0] && *c <= window[1])
        .map(|((c, d), n)| (c, *d, *n))
        .collect();
    if in_window.len() < MIN_FIT_BINS {
        return Err(StatsError::EmptyWindow {
            lo: window[0],
            hi: window[1],
            bins: in_window.len(),
            required: MIN_FIT_BINS,
        });
    }
    let pts: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|(_, _, n)| *n >= min_count.max(1))
        .map(|(c, d, _)| (c.ln(), d.ln()))
        .collect();
    if pts.len() < MIN_FIT_BINS {
        return Err(StatsError::SparseTail {
            lo: window[0],
            hi: window[1],
            kept: pts.len(),
            total: in_window.len(),
            min_count,
        });
    }
    Ok(fit(FitModel::PowerLawTail, window, &pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn uniform_density_is_flat() {
        let pdf = build_pdf(&uniform(10_000), Binning::linear(10)).unwrap();
        for d in &pdf.densities {
            assert!((d - 1.0).abs() < 0.01, "{d}");
        }
        assert!((pdf.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn timeouts_are_counted_not_binned() {
        let mut t = uniform(3000);
        t.extend([f64::NAN; 1000]);
        let pdf = build_pdf(&t, Binning::log(20)).unwrap();
        assert_eq!(pdf.timeout_count, 1000);
        assert_eq!(pdf.counts.iter().sum::<u64>(), 3000);
        assert!((pdf.integral() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            build_pdf(&uniform(999), Binning::linear(10)),
            Err(StatsError::InsufficientSamples { finite: 999, .. })
        ));
        let mut t = uniform(1000);
        t[0] = 0.0;
        assert!(build_pdf(&t, Binning::log(10)).is_err());
    }

    #[test]
    fn flat_window_has_zero_slope() {
        let pdf = build_pdf(&uniform(10_000), Binning::linear(50)).unwrap();
        let r = fit_exponential_middle(&pdf, [0.2, 0.8]).unwrap();
        assert!(r.parameter.abs() < 1e-9, "{}", r.parameter);
        assert_eq!(r.point_count, 30);
    }

    #[test]
    fn window_checks() {
        let pdf = build_pdf(&uniform(2000), Binning::linear(100)).unwrap();
        assert!(matches!(
            fit_exponential_middle(&pdf, [0.5, 0.52]),
            Err(StatsError::EmptyWindow { .. })
        ));
        assert!(matches!(
            fit_exponential_middle(&pdf, [0.5, 2.0]),
            Err(StatsError::InvalidWindow { .. })
        ));
        assert!(matches!(
            fit_powerlaw_tail(&pdf, [0.2, 0.8], 1000),
            Err(StatsError::SparseTail { .. })
        ));
    }

    #[test]
    fn percentiles() {
        let t = [4.0, 1.0, 3.0, 2.0, f64::INFINITY];
        assert_eq!(percentile(&t, 0.0), Some(1.0));
        assert_eq!(percentile(&t, 50.0), Some(2.5));
        assert_eq!(percentile(&t, 100.0), Some(4.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn csv_layout() {
        let pdf = build_pdf(&uniform(1000), Binning::linear(2)).unwrap();
        let mut buf = Vec::new();
        pdf.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "bin_lo,bin_hi,density,count");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",500"));
    }
}
