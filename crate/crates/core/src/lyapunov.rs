//! Maximal finite-time Lyapunov exponents and their sign over the
//! (detuning, force) control plane.
//!
//! The exponent is computed with a single tangent vector co-integrated
//! along the trajectory and renormalized at a fixed cadence; after a short
//! transient the tangent aligns with the most expanding direction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AtomState, ControlParams, TangentVector};
use crate::integrator::{integrate_with_tangent, IntegrateError, IntegratorSettings};
use crate::parallel::Workers;

pub const DEFAULT_HORIZON: f64 = 1e4;
pub const DEFAULT_RENORM_INTERVAL: f64 = 1.0;
/// Number of regular-regime runs used to calibrate the positivity threshold.
pub const REFERENCE_RUNS: usize = 10;
/// The threshold sits this many standard deviations above the reference mean.
pub const THRESHOLD_SIGMAS: f64 = 3.0;
/// Detuning of the regular reference regime.
pub const REFERENCE_DELTA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error(
        "horizon {horizon} must be at least 100 renormalization intervals ({renorm_interval})"
    )]
    HorizonTooShort { horizon: f64, renorm_interval: f64 },
    #[error("empty grid axis `{axis}`")]
    EmptyGrid { axis: &'static str },
    #[error("invalid grid axis `{axis}`: {reason}")]
    InvalidGrid { axis: &'static str, reason: String },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtleResult {
    pub lambda: f64,
    pub horizon: f64,
    pub params: ControlParams,
    pub initial_state: AtomState,
}

/// Uniformly sampled axis: `n` points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn validate(&self, axis: &'static str) -> Result<(), LyapunovError> {
        if self.n == 0 {
            return Err(LyapunovError::EmptyGrid { axis });
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(LyapunovError::InvalidGrid {
                axis,
                reason: "non-finite bound".into(),
            });
        }
        if self.n > 1 && self.lo >= self.hi {
            return Err(LyapunovError::InvalidGrid {
                axis,
                reason: format!("lo {} must be below hi {}", self.lo, self.hi),
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
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

    /// Grid spacing; zero for a single point.
    pub fn step(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

/// Finite-time exponent from the diagonal unit tangent.
pub fn ftle(
    s0: &AtomState,
    c: &ControlParams,
    horizon: f64,
    renorm_interval: f64,
    cfg: &IntegratorSettings,
) -> Result<FtleResult, LyapunovError> {
    ftle_from_tangent(
        s0,
        &TangentVector::diagonal(),
        c,
        horizon,
        renorm_interval,
        cfg,
    )
}

pub fn ftle_from_tangent(
    s0: &AtomState,
    t0: &TangentVector,
    c: &ControlParams,
    horizon: f64,
    renorm_interval: f64,
    cfg: &IntegratorSettings,
) -> Result<FtleResult, LyapunovError> {
    if matches!(
        horizon.partial_cmp(&(100.0 * renorm_interval)),
        None | Some(std::cmp::Ordering::Less)
    ) {
        return Err(LyapunovError::HorizonTooShort {
            horizon,
            renorm_interval,
        });
    }
    let cfg = cfg.with_t_max(horizon);
    let out = integrate_with_tangent(s0, t0, c, &cfg, renorm_interval)?;
    Ok(FtleResult {
        lambda: out.log_growth / horizon,
        horizon,
        params: *c,
        initial_state: *s0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtleMap {
    pub delta_axis: Vec<f64>,
    pub kappa_axis: Vec<f64>,
    /// `values[i][j]` is the exponent at `(delta_axis[i], kappa_axis[j])`;
    /// `None` marks a cell whose integration failed.
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapRequest {
    pub delta: AxisGrid,
    pub kappa: AxisGrid,
    pub omega_r: f64,
    pub initial_state: AtomState,
    pub horizon: f64,
    pub renorm_interval: f64,
}

pub fn ftle_map(
    req: &MapRequest,
    cfg: &IntegratorSettings,
    workers: &Workers,
) -> Result<FtleMap, LyapunovError> {
    req.delta.validate("delta")?;
    req.kappa.validate("kappa")?;
    if matches!(
        req.horizon.partial_cmp(&(100.0 * req.renorm_interval)),
        None | Some(std::cmp::Ordering::Less)
    ) {
        return Err(LyapunovError::HorizonTooShort {
            horizon: req.horizon,
            renorm_interval: req.renorm_interval,
        });
    }
    ControlParams::new(req.omega_r, 0.0, 0.0).map_err(IntegrateError::from)?;
    let deltas = req.delta.values();
    let kappas = req.kappa.values();
    let nk = kappas.len();
    let flat = workers.map_indexed(deltas.len() * nk, |idx| {
        let c = ControlParams {
            omega_r: req.omega_r,
            delta: deltas[idx / nk],
            kappa: kappas[idx % nk],
        };
        ftle(
            &req.initial_state,
            &c,
            req.horizon,
            req.renorm_interval,
            cfg,
        )
        .ok()
        .map(|r| r.lambda)
    });
    let values = flat.chunks(nk).map(|row| row.to_vec()).collect();
    Ok(FtleMap {
        delta_axis: deltas,
        kappa_axis: kappas,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
}

impl FtleMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn missing_cells(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Smallest axis-aligned box containing every cell with `lambda > threshold`.
    pub fn positive_region(&self, threshold: f64) -> Option<BoundingBox> {
        let mut bbox: Option<BoundingBox> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_some_and(|l| l > threshold) {
                    let (d, k) = (self.delta_axis[i], self.kappa_axis[j]);
                    bbox = Some(match bbox {
                        None => BoundingBox {
                            delta_lo: d,
                            delta_hi: d,
                            kappa_lo: k,
                            kappa_hi: k,
                        },
                        Some(b) => BoundingBox {
                            delta_lo: b.delta_lo.min(d),
                            delta_hi: b.delta_hi.max(d),
                            kappa_lo: b.kappa_lo.min(k),
                            kappa_hi: b.kappa_hi.max(k),
                        },
                    });
                }
            }
        }
        bbox
    }

    pub fn positive_cells(&self, threshold: f64) -> usize {
        self.values
            .iter()
            .flatten()
            .filter(|v| v.is_some_and(|l| l > threshold))
            .count()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["delta", "kappa", "lambda"])?;
        for (i, d) in self.delta_axis.iter().enumerate() {
            for (j, k) in self.kappa_axis.iter().enumerate() {
                let l = self.values[i][j].unwrap_or(f64::NAN);
                wtr.write_record([d.to_string(), k.to_string(), l.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Positivity threshold calibrated on the regular regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub reference: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub threshold: f64,
}

impl Threshold {
    pub fn from_reference(reference: Vec<f64>) -> Self {
        let n = reference.len() as f64;
        let mean = reference.iter().sum::<f64>() / n;
        let var = reference.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let std_dev = var.sqrt();
        Self {
            threshold: mean + THRESHOLD_SIGMAS * std_dev,
            reference,
            mean,
            std_dev,
        }
    }

    pub fn is_positive(&self, lambda: f64) -> bool {
        lambda > self.threshold
    }
}

/// Runs [`REFERENCE_RUNS`] exponents at `delta = REFERENCE_DELTA` and sets
/// the threshold [`THRESHOLD_SIGMAS`] standard deviations above their mean.
/// The runs differ in initial momentum, spread over `p0 · [0.90, 1.08]` in
/// steps of 2%.
pub fn calibrate_threshold(
    s0: &AtomState,
    c: &ControlParams,
    horizon: f64,
    renorm_interval: f64,
    cfg: &IntegratorSettings,
    workers: &Workers,
) -> Result<Threshold, LyapunovError> {
    let reference_params = c.with_delta(REFERENCE_DELTA);
    let runs = workers.map_indexed(REFERENCE_RUNS, |k| {
        let start = AtomState {
            p: s0.p * (0.90 + 0.02 * k as f64),
            ..*s0
        };
        ftle(&start, &reference_params, horizon, renorm_interval, cfg).map(|r| r.lambda)
    });
    let reference = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Threshold::from_reference(reference))
}

/// JSON companion of the map CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtleMapSummary {
    pub delta: AxisGrid,
    pub kappa: AxisGrid,
    pub omega_r: f64,
    pub horizon: f64,
    pub renorm_interval: f64,
    pub threshold: Threshold,
    pub positive_cells: usize,
    pub missing_cells: usize,
    pub positive_region: Option<BoundingBox>,
}

impl FtleMapSummary {
    pub fn new(req: &MapRequest, map: &FtleMap, threshold: Threshold) -> Self {
        Self {
            delta: req.delta,
            kappa: req.kappa,
            omega_r: req.omega_r,
            horizon: req.horizon,
            renorm_interval: req.renorm_interval,
            positive_cells: map.positive_cells(threshold.threshold),
            missing_cells: map.missing_cells(),
            positive_region: map.positive_region(threshold.threshold),
            threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = AxisGrid::new(-0.6, 0.6, 11);
        let v = g.values();
        assert_eq!(v.len(), 11);
        assert_eq!(v[0], -0.6);
        assert_eq!(v[10], 0.6);
        assert!((v[5]).abs() < 1e-15);
        assert_eq!(AxisGrid::new(0.3, 0.3, 1).values(), vec![0.3]);
        assert!(AxisGrid::new(0.0, 1.0, 0).validate("delta").is_err());
        assert!(AxisGrid::new(1.0, 0.0, 3).validate("delta").is_err());
    }

    #[test]
    fn horizon_precondition() {
        let r = ftle(
            &AtomState::ground(0.0, 10.0),
            &ControlParams::default(),
            50.0,
            1.0,
            &IntegratorSettings::default(),
        );
        assert!(matches!(r, Err(LyapunovError::HorizonTooShort { .. })));
    }

    #[test]
    fn threshold_statistics() {
        let t = Threshold::from_reference(vec![1.0, 2.0, 3.0]);
        assert_eq!(t.mean, 2.0);
        assert!((t.std_dev - 1.0).abs() < 1e-15);
        assert_eq!(t.threshold, 5.0);
        assert!(t.is_positive(5.1));
        assert!(!t.is_positive(5.0));
    }

    #[test]
    fn bounding_box_and_missing() {
        let map = FtleMap {
            delta_axis: vec![0.0, 1.0, 2.0],
            kappa_axis: vec![10.0, 20.0],
            values: vec![
                vec![Some(0.0), Some(5.0)],
                vec![None, Some(0.1)],
                vec![Some(3.0), Some(0.0)],
            ],
        };
        let b = map.positive_region(1.0).unwrap();
        assert_eq!(
            b,
            BoundingBox {
                delta_lo: 0.0,
                delta_hi: 2.0,
                kappa_lo: 10.0,
                kappa_hi: 20.0
            }
        );
        assert_eq!(map.positive_cells(1.0), 2);
        assert_eq!(map.missing_cells(), 1);
        assert!(map.positive_region(10.0).is_none());
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta,kappa,lambda\n0,10,0\n"));
        assert!(text.contains("1,10,NaN"));
    }
}
