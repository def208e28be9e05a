//! Exit-time scattering functions: sweeps of one control or initial
//! quantity, recursive magnification of unresolved structure, and the
//! uncertainty exponent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AtomState, ControlParams};
use crate::integrator::{integrate, EventKind, IntegrateError, IntegratorSettings};
use crate::parallel::Workers;

/// Default scan horizon; atoms still inside at this time are timeouts.
pub const DEFAULT_SCAN_T_MAX: f64 = 2e5;
/// Detuning window of the regular reference scan.
pub const REGULAR_WINDOW: (f64, f64) = (0.9, 1.1);
/// Adjacent `|ΔT|` above this multiple of the regular median is unresolved.
pub const UNRESOLVED_FACTOR: f64 = 10.0;
/// Exit-time resolution used to decide whether a perturbed point is uncertain.
pub const DEFAULT_UNCERTAINTY_BIN: f64 = 5.0;
/// Perturbation sizes below this uncertain count are left out of the fit.
pub const MIN_FIT_COUNT: usize = 10;
/// Required uncertain count at the largest perturbation.
pub const MIN_UNCERTAIN_AT_LARGEST: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("invalid scan spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("zoom resolved at level {level}: no adjacent |dT| above {threshold}")]
    Resolved {
        level: usize,
        threshold: f64,
        ladder: Box<ZoomLadder>,
    },
    #[error("invalid epsilon list: {0}")]
    InvalidEpsilons(String),
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    Detuning,
    InitialPosition,
    InitialMomentum,
}

impl ScanAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanAxis::Detuning => "detuning",
            ScanAxis::InitialPosition => "initial_position",
            ScanAxis::InitialMomentum => "initial_momentum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Control parameters; the swept one is overwritten per sample.
    pub params: ControlParams,
    /// Initial state; the swept coordinate is overwritten per sample.
    pub initial: AtomState,
    pub settings: IntegratorSettings,
}

impl ScanSpec {
    /// Scan with default parameters, ground-state start at `x=0, p=10`
    /// and the default horizon.
    pub fn new(axis: ScanAxis, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            axis,
            lo,
            hi,
            n,
            params: ControlParams::default(),
            initial: AtomState::ground(0.0, 10.0),
            settings: IntegratorSettings::default().with_t_max(DEFAULT_SCAN_T_MAX),
        }
    }

    pub fn with_interval(self, lo: f64, hi: f64) -> Self {
        Self { lo, hi, ..self }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(ScanError::InvalidSpec(format!(
                "interval [{}, {}] must be finite with lo < hi",
                self.lo, self.hi
            )));
        }
        if self.n < 2 {
            return Err(ScanError::InvalidSpec(format!(
                "n = {} must be at least 2",
                self.n
            )));
        }
        self.params.validate().map_err(IntegrateError::from)?;
        self.settings.validate()?;
        let v = self.axis_values();
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScanError::InvalidSpec(format!(
                "interval [{}, {}] too narrow for {} distinct samples",
                self.lo, self.hi, self.n
            )));
        }
        Ok(())
    }

    pub fn axis_values(&self) -> Vec<f64> {
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * (i as f64 / last)
                }
            })
            .collect()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Control parameters and initial state with the swept quantity set to `a`.
    pub fn context_at(&self, a: f64) -> (ControlParams, AtomState) {
        let mut c = self.params;
        let mut s = self.initial;
        match self.axis {
            ScanAxis::Detuning => c.delta = a,
            ScanAxis::InitialPosition => s.x = a,
            ScanAxis::InitialMomentum => s.p = a,
        }
        (c, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    ExitTime(f64),
    Timeout,
    ImmediateExit,
    Failed(String),
}

impl Outcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::ExitTime(_) => "exit",
            Outcome::Timeout => "timeout",
            Outcome::ImmediateExit => "immediate_exit",
            Outcome::Failed(_) => "failed",
        }
    }

    /// Exit time as written to CSV: 0 for an immediate exit, NaN when the
    /// atom never left.
    pub fn time(&self) -> f64 {
        match self {
            Outcome::ExitTime(t) => *t,
            Outcome::ImmediateExit => 0.0,
            Outcome::Timeout | Outcome::Failed(_) => f64::NAN,
        }
    }

    pub fn finite_exit(&self) -> Option<f64> {
        match self {
            Outcome::ExitTime(t) => Some(*t),
            _ => None,
        }
    }
}

/// Exit time for the swept quantity set to `a`.
pub fn exit_time(spec: &ScanSpec, a: f64) -> Outcome {
    let (c, s) = spec.context_at(a);
    let cfg = IntegratorSettings {
        sample_interval: None,
        ..spec.settings
    };
    match integrate(&s, &c, &cfg, true) {
        Ok(r) if r.termination == EventKind::ExitCrossing => {
            if r.final_tau == 0.0 {
                Outcome::ImmediateExit
            } else {
                Outcome::ExitTime(r.final_tau)
            }
        }
        Ok(_) => Outcome::Timeout,
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub axis_value: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub spec: ScanSpec,
    pub samples: Vec<Sample>,
}

pub fn scan(spec: &ScanSpec, workers: &Workers) -> Result<ScanResult, ScanError> {
    spec.validate()?;
    let values = spec.axis_values();
    let outcomes = workers.map_indexed(values.len(), |i| exit_time(spec, values[i]));
    let samples = values
        .into_iter()
        .zip(outcomes)
        .map(|(axis_value, outcome)| Sample {
            axis_value,
            outcome,
        })
        .collect();
    Ok(ScanResult {
        spec: *spec,
        samples,
    })
}

impl ScanResult {
    pub fn exit_times(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter_map(|s| s.outcome.finite_exit())
            .collect()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.samples
            .iter()
            .filter(|s| s.outcome.kind() == kind)
            .count()
    }

    pub fn mean_exit_time(&self) -> Option<f64> {
        let t = self.exit_times();
        (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
    }

    /// `|T(i+1) − T(i)|` for each adjacent pair. Timeouts count as the
    /// horizon; pairs touching a failed sample give NaN.
    pub fn adjacent_variation(&self) -> Vec<f64> {
        let t_max = self.spec.settings.t_max;
        let value = |o: &Outcome| match o {
            Outcome::Timeout => t_max,
            o => o.time(),
        };
        self.samples
            .windows(2)
            .map(|w| (value(&w[1].outcome) - value(&w[0].outcome)).abs())
            .collect()
    }

    pub fn max_variation(&self) -> f64 {
        self.adjacent_variation()
            .into_iter()
            .filter(|d| !d.is_nan())
            .fold(0.0, f64::max)
    }

    pub fn unresolved_pairs(&self, threshold: f64) -> usize {
        self.adjacent_variation()
            .into_iter()
            .filter(|d| *d > threshold)
            .count()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["axis_value", "outcome_kind", "T"])?;
        for s in &self.samples {
            wtr.write_record([
                s.axis_value.to_string(),
                s.outcome.kind().to_string(),
                s.outcome.time().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnresolvedThreshold {
    pub regular_median: f64,
    pub factor: f64,
    pub threshold: f64,
}

/// Calibrates the unresolved threshold on a detuning scan of the regular
/// window with the same sample count and fixed quantities as `spec`.
pub fn calibrate_unresolved_threshold(
    spec: &ScanSpec,
    workers: &Workers,
) -> Result<UnresolvedThreshold, ScanError> {
    let reference = ScanSpec {
        axis: ScanAxis::Detuning,
        lo: REGULAR_WINDOW.0,
        hi: REGULAR_WINDOW.1,
        ..*spec
    };
    let result = scan(&reference, workers)?;
    let finite: Vec<f64> = result
        .adjacent_variation()
        .into_iter()
        .filter(|d| !d.is_nan())
        .collect();
    if finite.is_empty() {
        return Err(ScanError::InsufficientStatistics(
            "regular reference scan has no finite adjacent pairs".into(),
        ));
    }
    let regular_median = median(finite);
    Ok(UnresolvedThreshold {
        regular_median,
        factor: UNRESOLVED_FACTOR,
        threshold: UNRESOLVED_FACTOR * regular_median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomLadder {
    pub levels: Vec<ScanResult>,
    pub magnification: f64,
    pub unresolved_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomLevelSummary {
    pub level: usize,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mean_exit_time: Option<f64>,
    pub max_variation: f64,
    pub unresolved_pairs: usize,
    pub timeouts: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomManifest {
    pub axis: ScanAxis,
    pub magnification: f64,
    pub unresolved_threshold: f64,
    pub levels: Vec<ZoomLevelSummary>,
}

impl ZoomLadder {
    pub fn manifest(&self) -> ZoomManifest {
        ZoomManifest {
            axis: self.levels[0].spec.axis,
            magnification: self.magnification,
            unresolved_threshold: self.unresolved_threshold,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(level, r)| ZoomLevelSummary {
                    level,
                    lo: r.spec.lo,
                    hi: r.spec.hi,
                    n: r.spec.n,
                    mean_exit_time: r.mean_exit_time(),
                    max_variation: r.max_variation(),
                    unresolved_pairs: r.unresolved_pairs(self.unresolved_threshold),
                    timeouts: r.count("timeout"),
                    failures: r.count("failed"),
                })
                .collect(),
        }
    }
}

/// Center of the run of `ceil((n−1)/magnification)` adjacent intervals
/// with the largest summed `|ΔT|`. Ties go to the leftmost run.
pub fn auto_center(result: &ScanResult, magnification: f64) -> f64 {
    let var: Vec<f64> = result
        .adjacent_variation()
        .into_iter()
        .map(|d| if d.is_nan() { 0.0 } else { d })
        .collect();
    let k = ((var.len() as f64 / magnification).ceil() as usize).clamp(1, var.len());
    let mut sum: f64 = var[..k].iter().sum();
    let (mut best, mut best_start) = (sum, 0);
    for start in 1..=var.len() - k {
        sum += var[start + k - 1] - var[start - 1];
        if sum > best {
            best = sum;
            best_start = start;
        }
    }
    let a = result.samples[best_start].axis_value;
    let b = result.samples[best_start + k].axis_value;
    0.5 * (a + b)
}

/// Interval of width `width` centered on `center`, shifted to lie inside
/// `[lo, hi]`.
fn sub_interval(lo: f64, hi: f64, center: f64, width: f64) -> (f64, f64) {
    let a = (center - 0.5 * width).clamp(lo, hi - width);
    (a, a + width)
}

/// Magnification ladder of `levels` scans; level 0 is `spec` itself and
/// each following level covers `1/magnification` of the previous width.
/// `center` places level 1; deeper levels and a `None` center use
/// [`auto_center`].
pub fn zoom(
    spec: &ScanSpec,
    center: Option<f64>,
    magnification: f64,
    levels: usize,
    unresolved_threshold: f64,
    workers: &Workers,
) -> Result<ZoomLadder, ScanError> {
    spec.validate()?;
    if !(magnification.is_finite() && magnification > 1.0) {
        return Err(ScanError::InvalidSpec(format!(
            "magnification {magnification} must exceed 1"
        )));
    }
    if levels == 0 {
        return Err(ScanError::InvalidSpec("levels must be at least 1".into()));
    }
    if let Some(c) = center {
        if !(c >= spec.lo && c <= spec.hi) {
            return Err(ScanError::InvalidSpec(format!(
                "center {c} outside [{}, {}]",
                spec.lo, spec.hi
            )));
        }
    }
    let mut ladder = ZoomLadder {
        levels: Vec::with_capacity(levels),
        magnification,
        unresolved_threshold,
    };
    let mut current = *spec;
    for level in 0..levels {
        if level > 0 {
            let prev = &ladder.levels[level - 1];
            let c = match (level, center) {
                (1, Some(c)) => c,
                _ => auto_center(prev, magnification),
            };
            let (lo, hi) = sub_interval(
                prev.spec.lo,
                prev.spec.hi,
                c,
                prev.spec.width() / magnification,
            );
            current = current.with_interval(lo, hi);
        }
        let result = scan(&current, workers)?;
        let unresolved = result.unresolved_pairs(unresolved_threshold) > 0;
        ladder.levels.push(result);
        if !unresolved {
            return Err(ScanError::Resolved {
                level,
                threshold: unresolved_threshold,
                ladder: Box::new(ladder),
            });
        }
    }
    Ok(ladder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Category {
    Exit(i64),
    Immediate,
    Timeout,
    Failed,
}

fn category(o: &Outcome, bin_width: f64) -> Category {
    match o {
        Outcome::ExitTime(t) => Category::Exit((t / bin_width).floor() as i64),
        Outcome::ImmediateExit => Category::Immediate,
        Outcome::Timeout => Category::Timeout,
        Outcome::Failed(_) => Category::Failed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyPoint {
    pub epsilon: f64,
    pub uncertain: usize,
    pub fraction: f64,
    /// Whether this point entered the log-log fit.
    pub fitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub exponent: f64,
    pub correlation: f64,
    pub bin_width: f64,
    pub point_count: usize,
    pub points: Vec<UncertaintyPoint>,
}

fn check_epsilons(eps: &[f64]) -> Result<(), ScanError> {
    if eps.len() < 4 {
        return Err(ScanError::InvalidEpsilons(format!(
            "need at least 4 values, got {}",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(ScanError::InvalidEpsilons(
            "values must be positive and finite".into(),
        ));
    }
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 100.0 {
        return Err(ScanError::InvalidEpsilons(format!(
            "values span {:.3} decades, need 2",
            (hi / lo).log10()
        )));
    }
    Ok(())
}

/// Least-squares slope, intercept and correlation coefficient of `y`
/// against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let r = sxy / (sxx * syy).sqrt();
    (slope, my - slope * mx, r)
}

/// Uncertainty exponent of an arbitrary exit function sampled at `points`.
///
/// A point `a` is ε-uncertain when the outcome at `a − ε` or `a + ε` falls
/// in a different category than at `a`. Categories are timeout, immediate
/// exit, failure, and the exit-time bin `floor(T / bin_width)`.
pub fn uncertainty_exponent_with<F>(
    points: &[f64],
    epsilons: &[f64],
    bin_width: f64,
    exit: F,
    workers: &Workers,
) -> Result<UncertaintyReport, ScanError>
where
    F: Fn(f64) -> Outcome + Sync + Send,
{
    check_epsilons(epsilons)?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(ScanError::InvalidSpec(format!(
            "bin width {bin_width} must be positive"
        )));
    }
    let n = points.len();
    let stride = 1 + 2 * epsilons.len();
    let outcomes = workers.map_indexed(n * stride, |idx| {
        let (i, j) = (idx / stride, idx % stride);
        let a = points[i];
        let arg = match j {
            0 => a,
            j if j % 2 == 1 => a - epsilons[j / 2],
            j => a + epsilons[j / 2 - 1],
        };
        exit(arg)
    });
    let cats: Vec<Category> = outcomes.iter().map(|o| category(o, bin_width)).collect();
    let mut pts: Vec<UncertaintyPoint> = epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let uncertain = (0..n)
                .filter(|&i| {
                    let row = &cats[i * stride..(i + 1) * stride];
                    row[1 + 2 * k] != row[0] || row[2 + 2 * k] != row[0]
                })
                .count();
            UncertaintyPoint {
                epsilon,
                uncertain,
                fraction: uncertain as f64 / n as f64,
                fitted: uncertain >= MIN_FIT_COUNT,
            }
        })
        .collect();
    pts.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let largest = pts.last().expect("checked non-empty");
    if largest.uncertain < MIN_UNCERTAIN_AT_LARGEST {
        return Err(ScanError::InsufficientStatistics(format!(
            "{} uncertain points at epsilon {}, need {}",
            largest.uncertain, largest.epsilon, MIN_UNCERTAIN_AT_LARGEST
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .filter(|p| p.fitted)
        .map(|p| (p.epsilon.log10(), p.fraction.log10()))
        .unzip();
    if x.len() < 3 {
        return Err(ScanError::InsufficientStatistics(format!(
            "only {} epsilon values reach {} uncertain points",
            x.len(),
            MIN_FIT_COUNT
        )));
    }
    let (exponent, _, correlation) = linear_fit(&x, &y);
    Ok(UncertaintyReport {
        exponent,
        correlation,
        bin_width,
        point_count: x.len(),
        points: pts,
    })
}

/// Uncertainty exponent of the scan described by `spec`.
pub fn uncertainty_exponent(
    spec: &ScanSpec,
    epsilons: &[f64],
    bin_width: f64,
    workers: &Workers,
) -> Result<UncertaintyReport, ScanError> {
    spec.validate()?;
    uncertainty_exponent_with(
        &spec.axis_values(),
        epsilons,
        bin_width,
        |a| exit_time(spec, a),
        workers,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(values: &[f64]) -> ScanResult {
        let spec = ScanSpec::new(ScanAxis::Detuning, 0.0, 1.0, values.len());
        let samples = spec
            .axis_values()
            .into_iter()
            .zip(values)
            .map(|(axis_value, t)| Sample {
                axis_value,
                outcome: if t.is_nan() {
                    Outcome::Timeout
                } else {
                    Outcome::ExitTime(*t)
                },
            })
            .collect();
        ScanResult { spec, samples }
    }

    #[test]
    fn spec_validation() {
        let s = ScanSpec::new(ScanAxis::Detuning, 0.1, 0.2, 2);
        assert!(s.validate().is_ok());
        assert!(ScanSpec { n: 1, ..s }.validate().is_err());
        assert!(s.with_interval(0.2, 0.1).validate().is_err());
        let tiny = s.with_interval(0.15, 0.15 + 1e-17);
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn context_overrides_one_quantity() {
        let s = ScanSpec::new(ScanAxis::InitialMomentum, 5.0, 6.0, 3);
        let (c, st) = s.context_at(5.5);
        assert_eq!(c, ControlParams::default());
        assert_eq!(st.p, 5.5);
        assert_eq!(st.x, 0.0);
        let s = ScanSpec {
            axis: ScanAxis::Detuning,
            ..s
        };
        assert_eq!(s.context_at(0.7).0.delta, 0.7);
    }

    #[test]
    fn variation_counts_timeout_as_horizon() {
        let r = result(&[1.0, 3.0, f64::NAN]);
        assert_eq!(r.adjacent_variation(), vec![2.0, DEFAULT_SCAN_T_MAX - 3.0]);
        assert_eq!(r.mean_exit_time(), Some(2.0));
        assert_eq!(r.unresolved_pairs(2.5), 1);
    }

    #[test]
    fn auto_center_finds_largest_variation() {
        let mut t = vec![1.0; 101];
        t[70] = 50.0;
        let r = result(&t);
        let c = auto_center(&r, 50.0);
        // runs of 2 intervals; the one straddling the spike wins
        assert!((c - 0.70).abs() < 1e-12, "{c}");
    }

    #[test]
    fn sub_interval_is_clamped() {
        assert_eq!(sub_interval(0.0, 1.0, 0.99, 0.1), (0.9, 1.0));
        assert_eq!(sub_interval(0.0, 1.0, 0.0, 0.1), (0.0, 0.1));
        let (a, b) = sub_interval(0.0, 1.0, 0.5, 0.1);
        assert!((a - 0.45).abs() < 1e-15 && (b - 0.55).abs() < 1e-15);
    }

    #[test]
    fn epsilon_preconditions() {
        assert!(check_epsilons(&[1e-3, 1e-2, 1e-1]).is_err());
        assert!(check_epsilons(&[1e-3, 2e-3, 4e-3, 8e-3]).is_err());
        assert!(check_epsilons(&[1e-3, 1e-2, 1e-1, -1.0]).is_err());
        assert!(check_epsilons(&[1e-4, 1e-3, 1e-2, 1e-1]).is_ok());
    }

    #[test]
    fn csv_layout() {
        let mut r = result(&[2.5, f64::NAN]);
        r.samples.push(Sample {
            axis_value: 2.0,
            outcome: Outcome::ImmediateExit,
        });
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "axis_value,outcome_kind,T\n0,exit,2.5\n1,timeout,NaN\n2,immediate_exit,0\n"
        );
    }

    #[test]
    fn fit_of_exact_line() {
        let (s, b, r) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
    }
}
