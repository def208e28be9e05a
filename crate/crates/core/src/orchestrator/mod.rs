//! Command dispatch, output files and run manifests.
//!
//! Every command writes its data files plus `manifest.json` into the output
//! directory. Data files depend only on the configuration; the manifest
//! additionally records wall times and the worker count.

mod config;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    load_config, parse_axis, parse_bins, parse_grid, parse_interval, parse_list, parse_scan_axis,
    Command, ConfigError, InitialSection, MapSection, Overrides, ParamsSection, PdfSection,
    RunConfig, ScanSection, TrajectorySection, ZoomSection, DEFAULT_SAMPLE_INTERVAL,
};

use crate::integrator::{integrate, IntegrateError, IntegratorSettings, TrajectoryRecord};
use crate::lyapunov::{calibrate_threshold, ftle_map, FtleMapSummary, LyapunovError, MapRequest};
use crate::parallel::{default_worker_count, Workers};
use crate::scattering::{
    calibrate_unresolved_threshold, scan, uncertainty_exponent, zoom, ScanError, ScanResult,
    UnresolvedThreshold,
};
use crate::statistics::{
    build_pdf, fit_exponential_middle, fit_powerlaw_tail, percentile_window, Binning, StatsError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad input {path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl RunError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Parse { .. } | ConfigError::Read { .. }) => {
                "config-parse-error"
            }
            RunError::Config(_) => "config-validation-error",
            RunError::Io { .. } => "io-error",
            RunError::Input { .. } => "input-error",
            RunError::Integrate(_) => "integrate-error",
            RunError::Lyapunov(_) => "lyapunov-error",
            RunError::Scan(ScanError::Resolved { .. }) => "resolved",
            RunError::Scan(_) => "scan-error",
            RunError::Stats(_) => "statistics-error",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
        });
        if let RunError::Config(ConfigError::Invalid { field, .. }) = self {
            v["field"] = field.clone().into();
        }
        if let RunError::Config(ConfigError::Parse {
            path, line, column, ..
        }) = self
        {
            v["path"] = path.clone().into();
            v["line"] = (*line).into();
            v["column"] = (*column).into();
        }
        if let RunError::Io { path, .. } | RunError::Input { path, .. } = self {
            v["path"] = path.clone().into();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.push(OutputFile {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_vec_pretty(value).expect("serializable output");
        s.push(b'\n');
        self.write(name, &s)
    }

    fn csv(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    ) -> Result<(), RunError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| RunError::Io {
            path: self.dir.join(name).display().to_string(),
            source: std::io::Error::other(e),
        })?;
        self.write(name, &buf)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Validates `cfg`, runs its command and writes outputs and manifest.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, RunError> {
    cfg.validate()?;
    let command = cfg.command.ok_or(ConfigError::MissingCommand)?;
    let workers = Workers::new(cfg.workers.unwrap_or_else(default_worker_count));
    let started_unix = unix_now();
    let clock = Instant::now();
    let mut out = Outputs::new(&cfg.out)?;
    let result = match command {
        Command::Trajectory | Command::Bloch => run_trajectory(cfg, command, &mut out),
        Command::LyapunovMap => run_map(cfg, &workers, &mut out),
        Command::Scan => run_scan(cfg, &workers, &mut out),
        Command::Zoom => run_zoom(cfg, &workers, &mut out),
        Command::Pdf => run_pdf(cfg, &workers, &mut out),
    };
    let manifest = RunManifest {
        config: cfg.clone(),
        version: VERSION.to_string(),
        workers: workers.count(),
        started_unix,
        finished_unix: unix_now(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
    };
    out.json(MANIFEST_NAME, &manifest)?;
    result.map(|()| manifest)
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    termination: &'a str,
    final_tau: f64,
    final_state: crate::dynamics::AtomState,
    node_crossings: usize,
    exit_tau: Option<f64>,
    accepted_steps: u64,
    rejected_steps: u64,
    max_norm_drift: f64,
    max_energy_drift: f64,
}

fn write_record(rec: &TrajectoryRecord, bloch: bool, out: &mut Outputs) -> Result<(), RunError> {
    if bloch {
        out.csv("bloch.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["tau", "u", "v", "z"])?;
            for (t, s) in &rec.samples {
                w.write_record([t, &s.u, &s.v, &s.z].map(|x| x.to_string()))?;
            }
            w.flush()?;
            Ok(())
        })?;
    } else {
        out.csv("trajectory.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["tau", "x", "p", "u", "v", "z"])?;
            for (t, s) in &rec.samples {
                w.write_record([t, &s.x, &s.p, &s.u, &s.v, &s.z].map(|x| x.to_string()))?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    out.csv("events.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["tau", "kind", "x", "p", "u", "v", "z"])?;
        for e in &rec.events {
            let s = e.state;
            let mut row = vec![e.tau.to_string(), e.kind.as_str().to_string()];
            row.extend([s.x, s.p, s.u, s.v, s.z].map(|x| x.to_string()));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.json(
        "trajectory_summary.json",
        &TrajectorySummary {
            termination: rec.termination.as_str(),
            final_tau: rec.final_tau,
            final_state: rec.final_state,
            node_crossings: rec.node_crossings().count(),
            exit_tau: rec.exit_event().map(|e| e.tau),
            accepted_steps: rec.accepted_steps,
            rejected_steps: rec.rejected_steps,
            max_norm_drift: rec.max_norm_drift,
            max_energy_drift: rec.max_energy_drift,
        },
    )
}

fn run_trajectory(cfg: &RunConfig, command: Command, out: &mut Outputs) -> Result<(), RunError> {
    let settings = IntegratorSettings {
        sample_interval: Some(
            cfg.integrator
                .sample_interval
                .unwrap_or(DEFAULT_SAMPLE_INTERVAL),
        ),
        ..cfg.integrator
    };
    let bloch = command == Command::Bloch;
    match integrate(
        &cfg.initial_state(),
        &cfg.control_params(),
        &settings,
        cfg.trajectory.stop_on_exit,
    ) {
        Ok(rec) => write_record(&rec, bloch, out),
        Err(IntegrateError::InvariantDrift {
            tau,
            energy_drift,
            norm_drift,
            record,
        }) => {
            // keep the data up to the abort for inspection
            write_record(&record, bloch, out)?;
            Err(IntegrateError::InvariantDrift {
                tau,
                energy_drift,
                norm_drift,
                record,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn run_map(cfg: &RunConfig, workers: &Workers, out: &mut Outputs) -> Result<(), RunError> {
    let m = &cfg.lyapunov_map;
    let req = MapRequest {
        delta: m.delta,
        kappa: m.kappa,
        omega_r: cfg.params.omega_r,
        initial_state: cfg.initial_state(),
        horizon: m.horizon,
        renorm_interval: m.renorm_interval,
    };
    let map = ftle_map(&req, &cfg.integrator, workers)?;
    let threshold = calibrate_threshold(
        &req.initial_state,
        &cfg.control_params(),
        m.horizon,
        m.renorm_interval,
        &cfg.integrator,
        workers,
    )?;
    out.csv("ftle_map.csv", |buf| map.write_csv(buf))?;
    out.json("ftle_map.json", &FtleMapSummary::new(&req, &map, threshold))
}

#[derive(Serialize)]
struct ScanSummary {
    spec: crate::scattering::ScanSpec,
    exits: usize,
    timeouts: usize,
    immediate_exits: usize,
    failures: usize,
    mean_exit_time: Option<f64>,
    max_variation: f64,
}

fn scan_summary(r: &ScanResult) -> ScanSummary {
    ScanSummary {
        spec: r.spec,
        exits: r.count("exit"),
        timeouts: r.count("timeout"),
        immediate_exits: r.count("immediate_exit"),
        failures: r.count("failed"),
        mean_exit_time: r.mean_exit_time(),
        max_variation: r.max_variation(),
    }
}

fn run_scan(cfg: &RunConfig, workers: &Workers, out: &mut Outputs) -> Result<(), RunError> {
    let spec = cfg.scan_spec();
    let result = scan(&spec, workers)?;
    out.csv("scan.csv", |buf| result.write_csv(buf))?;
    out.json("scan.json", &scan_summary(&result))?;
    if !cfg.scan.eps_list.is_empty() {
        let report = uncertainty_exponent(&spec, &cfg.scan.eps_list, cfg.scan.bin_width, workers)?;
        out.json("uncertainty.json", &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ZoomOutput {
    calibration: UnresolvedThreshold,
    resolved_at: Option<usize>,
    #[serde(flatten)]
    ladder: crate::scattering::ZoomManifest,
}

fn run_zoom(cfg: &RunConfig, workers: &Workers, out: &mut Outputs) -> Result<(), RunError> {
    let spec = cfg.scan_spec();
    let calibration = calibrate_unresolved_threshold(&spec, workers)?;
    let z = &cfg.zoom;
    let (ladder, resolved) = match zoom(
        &spec,
        z.center,
        z.magnification,
        z.levels,
        calibration.threshold,
        workers,
    ) {
        Ok(l) => (l, None),
        Err(ScanError::Resolved {
            level,
            threshold,
            ladder,
        }) => (
            (*ladder).clone(),
            Some(ScanError::Resolved {
                level,
                threshold,
                ladder,
            }),
        ),
        Err(e) => return Err(e.into()),
    };
    for (k, level) in ladder.levels.iter().enumerate() {
        out.csv(&format!("zoom_level_{k}.csv"), |buf| level.write_csv(buf))?;
    }
    out.json(
        "zoom.json",
        &ZoomOutput {
            calibration,
            resolved_at: match &resolved {
                Some(ScanError::Resolved { level, .. }) => Some(*level),
                _ => None,
            },
            ladder: ladder.manifest(),
        },
    )?;
    match resolved {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// Exit times from the `T` column of a scan CSV; empty or non-numeric
/// cells read as timeouts.
pub fn read_scan_times(path: &Path) -> Result<Vec<f64>, RunError> {
    let bad = |message: String| RunError::Input {
        path: path.display().to_string(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "T")
        .ok_or_else(|| bad("no `T` column".into()))?;
    let kind_col = headers.iter().position(|h| h == "outcome_kind");
    let mut times = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if kind_col.is_some_and(|k| &row[k] == "immediate_exit") {
            continue;
        }
        times.push(
            row.get(col)
                .and_then(|t| t.parse().ok())
                .unwrap_or(f64::NAN),
        );
    }
    Ok(times)
}

#[derive(Serialize)]
struct PdfSummary {
    source: String,
    sample_count: usize,
    timeout_count: usize,
    finite_fraction: f64,
    middle_percentiles: [f64; 2],
    tail_percentiles: [f64; 2],
    alpha: f64,
    gamma: f64,
}

fn run_pdf(cfg: &RunConfig, workers: &Workers, out: &mut Outputs) -> Result<(), RunError> {
    let p = &cfg.pdf;
    let (times, source) = match &p.input {
        Some(path) => (read_scan_times(path)?, path.display().to_string()),
        None => {
            let result = scan(&cfg.scan_spec(), workers)?;
            out.csv("scan.csv", |buf| result.write_csv(buf))?;
            // immediate exits carry no dwell time
            let times = result
                .samples
                .iter()
                .filter(|s| s.outcome.kind() != "immediate_exit")
                .map(|s| s.outcome.time())
                .collect();
            (times, "scan".to_string())
        }
    };
    let linear = build_pdf(&times, Binning::linear(p.linear_bins))?;
    let log = build_pdf(&times, Binning::log(p.log_bins))?;
    out.csv("pdf_linear.csv", |buf| linear.write_csv(buf))?;
    out.csv("pdf_log.csv", |buf| log.write_csv(buf))?;
    let finite: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    let middle = percentile_window(&finite, (p.middle[0], p.middle[1])).expect("non-empty");
    let tail = percentile_window(&finite, (p.tail[0], p.tail[1])).expect("non-empty");
    let expo = fit_exponential_middle(&linear, middle)?;
    let power = fit_powerlaw_tail(&log, tail, p.tail_min_count)?;
    out.json("fit_exponential.json", &expo)?;
    out.json("fit_powerlaw.json", &power)?;
    out.json(
        "pdf.json",
        &PdfSummary {
            source,
            sample_count: linear.sample_count,
            timeout_count: linear.timeout_count,
            finite_fraction: linear.integral(),
            middle_percentiles: p.middle,
            tail_percentiles: p.tail,
            alpha: expo.parameter,
            gamma: power.parameter,
        },
    )
}
