//! Run configuration: a TOML file with one table per concern, overridden
//! by command-line flags. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AtomState, ControlParams, DynamicsError};
use crate::integrator::IntegratorSettings;
use crate::lyapunov::{AxisGrid, DEFAULT_HORIZON, DEFAULT_RENORM_INTERVAL};
use crate::scattering::{ScanAxis, ScanSpec, DEFAULT_SCAN_T_MAX, DEFAULT_UNCERTAINTY_BIN};
use crate::statistics::{
    DEFAULT_LINEAR_BINS, DEFAULT_LOG_BINS, DEFAULT_MIDDLE_PERCENTILES, DEFAULT_TAIL_MIN_COUNT,
    DEFAULT_TAIL_PERCENTILES,
};

/// Sample cadence of trajectory output when the config leaves it unset.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("no command given")]
    MissingCommand,
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Trajectory,
    Bloch,
    LyapunovMap,
    Scan,
    Zoom,
    Pdf,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Trajectory,
        Command::Bloch,
        Command::LyapunovMap,
        Command::Scan,
        Command::Zoom,
        Command::Pdf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::Bloch => "bloch",
            Command::LyapunovMap => "lyapunov-map",
            Command::Scan => "scan",
            Command::Zoom => "zoom",
            Command::Pdf => "pdf",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.as_str()).collect();
                format!(
                    "unknown command `{s}`, expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub omega_r: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let c = ControlParams::default();
        Self {
            omega_r: c.omega_r,
            delta: c.delta,
            kappa: c.kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub x: f64,
    pub p: f64,
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let s = AtomState::ground(0.0, 10.0);
        Self {
            x: s.x,
            p: s.p,
            u: s.u,
            v: s.v,
            z: s.z,
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub stop_on_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSection {
    pub delta: AxisGrid,
    pub kappa: AxisGrid,
    pub horizon: f64,
    pub renorm_interval: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            delta: AxisGrid::new(-0.6, 0.6, 11),
            kappa: AxisGrid::new(-0.3, 0.65, 11),
            horizon: DEFAULT_HORIZON,
            renorm_interval: DEFAULT_RENORM_INTERVAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub axis: ScanAxis,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub t_max: f64,
    /// Perturbation sizes for the uncertainty exponent; empty skips it.
    pub eps_list: Vec<f64>,
    pub bin_width: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            axis: ScanAxis::Detuning,
            lo: 0.1,
            hi: 0.2,
            n: 2048,
            t_max: DEFAULT_SCAN_T_MAX,
            eps_list: Vec::new(),
            bin_width: DEFAULT_UNCERTAINTY_BIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZoomSection {
    pub center: Option<f64>,
    pub magnification: f64,
    pub levels: usize,
}

impl Default for ZoomSection {
    fn default() -> Self {
        Self {
            center: None,
            magnification: 50.0,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdfSection {
    /// Existing scan CSV to read exit times from instead of scanning.
    pub input: Option<PathBuf>,
    pub linear_bins: usize,
    pub log_bins: usize,
    /// Percentile window of the exponential fit.
    pub middle: [f64; 2],
    /// Percentile window of the power-law fit.
    pub tail: [f64; 2],
    pub tail_min_count: u64,
}

impl Default for PdfSection {
    fn default() -> Self {
        Self {
            input: None,
            linear_bins: DEFAULT_LINEAR_BINS,
            log_bins: DEFAULT_LOG_BINS,
            middle: [DEFAULT_MIDDLE_PERCENTILES.0, DEFAULT_MIDDLE_PERCENTILES.1],
            tail: [DEFAULT_TAIL_PERCENTILES.0, DEFAULT_TAIL_PERCENTILES.1],
            tail_min_count: DEFAULT_TAIL_MIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Worker threads; `None` defers to `ATOMWALK_WORKERS` or the CPU count.
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub params: ParamsSection,
    pub initial: InitialSection,
    pub integrator: IntegratorSettings,
    pub trajectory: TrajectorySection,
    pub lyapunov_map: MapSection,
    pub scan: ScanSection,
    pub zoom: ZoomSection,
    pub pdf: PdfSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            workers: None,
            out: PathBuf::from("out"),
            params: ParamsSection::default(),
            initial: InitialSection::default(),
            integrator: IntegratorSettings::default(),
            trajectory: TrajectorySection::default(),
            lyapunov_map: MapSection::default(),
            scan: ScanSection::default(),
            zoom: ZoomSection::default(),
            pdf: PdfSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub omega_r: Option<f64>,
    pub p0: Option<f64>,
    pub x0: Option<f64>,
    /// Horizon of the selected command.
    pub t_max: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub grid: Option<(AxisGrid, AxisGrid)>,
    pub interval: Option<(f64, f64)>,
    pub n: Option<usize>,
    pub mag: Option<f64>,
    pub levels: Option<usize>,
    pub eps_list: Option<Vec<f64>>,
    pub bins: Option<(usize, Option<usize>)>,
    pub axis: Option<ScanAxis>,
    pub center: Option<f64>,
    pub input: Option<PathBuf>,
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.chars().rev().take_while(|&c| c != '\n').count() + 1;
    (line, column)
}

impl RunConfig {
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(src, s.start))
                .unwrap_or((0, 0));
            ConfigError::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn control_params(&self) -> ControlParams {
        ControlParams {
            omega_r: self.params.omega_r,
            delta: self.params.delta,
            kappa: self.params.kappa,
        }
    }

    pub fn initial_state(&self) -> AtomState {
        let i = self.initial;
        AtomState::from_array([i.x, i.p, i.u, i.v, i.z])
    }

    pub fn scan_spec(&self) -> ScanSpec {
        ScanSpec {
            axis: self.scan.axis,
            lo: self.scan.lo,
            hi: self.scan.hi,
            n: self.scan.n,
            params: self.control_params(),
            initial: self.initial_state(),
            settings: IntegratorSettings {
                sample_interval: None,
                ..self.integrator.with_t_max(self.scan.t_max)
            },
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = o.command {
            self.command = Some(c);
        }
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.delta => self.params.delta);
        set!(o.kappa => self.params.kappa);
        set!(o.omega_r => self.params.omega_r);
        set!(o.p0 => self.initial.p);
        set!(o.x0 => self.initial.x);
        set!(o.out => self.out);
        set!(o.n => self.scan.n);
        set!(o.mag => self.zoom.magnification);
        set!(o.levels => self.zoom.levels);
        set!(o.eps_list => self.scan.eps_list);
        set!(o.axis => self.scan.axis);
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if o.center.is_some() {
            self.zoom.center = o.center;
        }
        if o.input.is_some() {
            self.pdf.input = o.input.clone();
        }
        if let Some((d, k)) = o.grid {
            self.lyapunov_map.delta = d;
            self.lyapunov_map.kappa = k;
        }
        if let Some((lo, hi)) = o.interval {
            self.scan.lo = lo;
            self.scan.hi = hi;
        }
        if let Some((lin, log)) = o.bins {
            self.pdf.linear_bins = lin;
            if let Some(log) = log {
                self.pdf.log_bins = log;
            }
        }
        if let Some(t) = o.t_max {
            match self.command {
                Some(Command::LyapunovMap) => self.lyapunov_map.horizon = t,
                Some(Command::Scan | Command::Zoom | Command::Pdf) => self.scan.t_max = t,
                _ => self.integrator.t_max = t,
            }
        }
    }

    /// Checks every section; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let command = self.command.ok_or(ConfigError::MissingCommand)?;
        if self.workers == Some(0) {
            return Err(ConfigError::invalid("workers", "must be at least 1"));
        }
        self.control_params().validate().map_err(|e| match e {
            DynamicsError::InvalidControlParams { field, reason } => {
                ConfigError::invalid(format!("params.{field}"), reason)
            }
            e => ConfigError::invalid("params", e.to_string()),
        })?;
        AtomState::new(
            self.initial.x,
            self.initial.p,
            self.initial.u,
            self.initial.v,
            self.initial.z,
        )
        .map_err(|e| ConfigError::invalid("initial", e.to_string()))?;
        self.integrator.validate().map_err(|e| match e {
            crate::integrator::IntegrateError::InvalidSettings { field, value } => {
                ConfigError::invalid(
                    format!("integrator.{field}"),
                    format!("must be > 0, got {value}"),
                )
            }
            e => ConfigError::invalid("integrator", e.to_string()),
        })?;
        match command {
            Command::Trajectory | Command::Bloch => {}
            Command::LyapunovMap => self.validate_map()?,
            Command::Scan | Command::Zoom | Command::Pdf => {
                self.validate_scan()?;
                if command == Command::Zoom {
                    self.validate_zoom()?;
                }
                if command == Command::Pdf {
                    self.validate_pdf()?;
                }
            }
        }
        Ok(())
    }

    fn validate_map(&self) -> Result<(), ConfigError> {
        let m = &self.lyapunov_map;
        m.delta
            .validate("delta")
            .map_err(|e| ConfigError::invalid("lyapunov_map.delta", e.to_string()))?;
        m.kappa
            .validate("kappa")
            .map_err(|e| ConfigError::invalid("lyapunov_map.kappa", e.to_string()))?;
        if !(m.renorm_interval.is_finite() && m.renorm_interval > 0.0) {
            return Err(ConfigError::invalid(
                "lyapunov_map.renorm_interval",
                "must be > 0",
            ));
        }
        if matches!(
            m.horizon.partial_cmp(&(100.0 * m.renorm_interval)),
            None | Some(std::cmp::Ordering::Less)
        ) {
            return Err(ConfigError::invalid(
                "lyapunov_map.horizon",
                format!(
                    "must be at least 100 renormalization intervals, got {}",
                    m.horizon
                ),
            ));
        }
        Ok(())
    }

    fn validate_scan(&self) -> Result<(), ConfigError> {
        let s = &self.scan;
        if !(s.t_max.is_finite() && s.t_max > 0.0) {
            return Err(ConfigError::invalid("scan.t_max", "must be > 0"));
        }
        if !(s.bin_width.is_finite() && s.bin_width > 0.0) {
            return Err(ConfigError::invalid("scan.bin_width", "must be > 0"));
        }
        self.scan_spec()
            .validate()
            .map_err(|e| ConfigError::invalid("scan", e.to_string()))
    }

    fn validate_zoom(&self) -> Result<(), ConfigError> {
        let z = &self.zoom;
        if !(z.magnification.is_finite() && z.magnification > 1.0) {
            return Err(ConfigError::invalid("zoom.magnification", "must exceed 1"));
        }
        if z.levels == 0 {
            return Err(ConfigError::invalid("zoom.levels", "must be at least 1"));
        }
        if let Some(c) = z.center {
            if !(c >= self.scan.lo && c <= self.scan.hi) {
                return Err(ConfigError::invalid(
                    "zoom.center",
                    "must lie inside the scan interval",
                ));
            }
        }
        Ok(())
    }

    fn validate_pdf(&self) -> Result<(), ConfigError> {
        let p = &self.pdf;
        if p.linear_bins == 0 {
            return Err(ConfigError::invalid("pdf.linear_bins", "must be positive"));
        }
        if p.log_bins == 0 {
            return Err(ConfigError::invalid("pdf.log_bins", "must be positive"));
        }
        for (field, w) in [("pdf.middle", p.middle), ("pdf.tail", p.tail)] {
            if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 100.0) {
                return Err(ConfigError::invalid(
                    field,
                    format!("percentiles must satisfy 0 <= lo < hi <= 100, got {w:?}"),
                ));
            }
        }
        Ok(())
    }
}

/// Reads `path` (if any), applies `overrides` and validates.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            RunConfig::from_toml_str(&src, &p.display().to_string())?
        }
        None => RunConfig::default(),
    };
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

/// `lo:hi:n`.
pub fn parse_axis(s: &str) -> Result<AxisGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:n, got `{s}`"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let n = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("`{}`: {e}", parts[2]))?;
    Ok(AxisGrid::new(num(parts[0])?, num(parts[1])?, n))
}

/// `dlo:dhi:dn,klo:khi:kn`, detuning axis first.
pub fn parse_grid(s: &str) -> Result<(AxisGrid, AxisGrid), String> {
    let (d, k) = s
        .split_once(',')
        .ok_or_else(|| format!("expected delta-axis,kappa-axis, got `{s}`"))?;
    Ok((parse_axis(d)?, parse_axis(k)?))
}

/// `lo:hi`.
pub fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(a)?, num(b)?))
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// `linear` or `linear,log` bin counts.
pub fn parse_bins(s: &str) -> Result<(usize, Option<usize>), String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once(',') {
        Some((a, b)) => Ok((num(a)?, Some(num(b)?))),
        None => Ok((num(s)?, None)),
    }
}

pub fn parse_scan_axis(s: &str) -> Result<ScanAxis, String> {
    match s {
        "detuning" | "delta" => Ok(ScanAxis::Detuning),
        "initial_position" | "x0" => Ok(ScanAxis::InitialPosition),
        "initial_momentum" | "p0" => Ok(ScanAxis::InitialMomentum),
        _ => Err(format!(
            "unknown axis `{s}`, expected detuning, initial_position or initial_momentum"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_command(c: Command) -> Overrides {
        Overrides {
            command: Some(c),
            ..Default::default()
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let mut cfg = RunConfig::from_toml_str("", "empty.toml").unwrap();
        cfg.apply(&with_command(Command::Trajectory));
        cfg.validate().unwrap();
        assert_eq!(cfg.params.omega_r, 1e-3);
        assert_eq!(cfg.params.kappa, 0.01);
        assert_eq!(cfg.params.delta, 0.15);
        assert_eq!(cfg.initial_state(), AtomState::ground(0.0, 10.0));
    }

    #[test]
    fn negative_recoil_names_the_field() {
        let mut cfg = RunConfig::from_toml_str("[params]\nomega_r = -1.0\n", "c.toml").unwrap();
        cfg.apply(&with_command(Command::Trajectory));
        match cfg.validate() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "params.omega_r"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flag_overrides_file() {
        let mut cfg = RunConfig::from_toml_str("[params]\ndelta = 0.15\n", "c.toml").unwrap();
        cfg.apply(&Overrides {
            delta: Some(1.0),
            ..with_command(Command::Scan)
        });
        assert_eq!(cfg.params.delta, 1.0);
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = RunConfig::from_toml_str("[params]\ndelta = 0.15\ndetla = 0.2\n", "c.toml")
            .unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("detla"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_toml_str("bogus = 1\n", "c.toml").is_err());
        assert!(RunConfig::from_toml_str("[integrator]\nrtol = 1\n", "c.toml").is_err());
    }

    #[test]
    fn t_max_goes_to_the_command_horizon() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            t_max: Some(500.0),
            ..with_command(Command::Scan)
        });
        assert_eq!(cfg.scan.t_max, 500.0);
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            t_max: Some(500.0),
            ..with_command(Command::LyapunovMap)
        });
        assert_eq!(cfg.lyapunov_map.horizon, 500.0);
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            t_max: Some(500.0),
            ..with_command(Command::Bloch)
        });
        assert_eq!(cfg.integrator.t_max, 500.0);
    }

    #[test]
    fn missing_command() {
        assert_eq!(
            RunConfig::default().validate(),
            Err(ConfigError::MissingCommand)
        );
    }

    #[test]
    fn flag_parsers() {
        let (d, k) = parse_grid("-0.6:0.6:11,-0.3:0.65:11").unwrap();
        assert_eq!(d, AxisGrid::new(-0.6, 0.6, 11));
        assert_eq!(k, AxisGrid::new(-0.3, 0.65, 11));
        assert_eq!(parse_interval("0.1:0.2").unwrap(), (0.1, 0.2));
        assert_eq!(parse_list("1e-9, 1e-8").unwrap(), vec![1e-9, 1e-8]);
        assert_eq!(parse_bins("2000,60").unwrap(), (2000, Some(60)));
        assert_eq!(parse_bins("100").unwrap(), (100, None));
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_interval("0.1").is_err());
        assert_eq!("lyapunov-map".parse::<Command>(), Ok(Command::LyapunovMap));
        assert!("map".parse::<Command>().is_err());
    }

    #[test]
    fn pdf_windows_are_checked() {
        let mut cfg = RunConfig {
            command: Some(Command::Pdf),
            ..Default::default()
        };
        cfg.pdf.tail = [99.0, 90.0];
        assert!(
            matches!(cfg.validate(), Err(ConfigError::Invalid { field, .. }) if field == "pdf.tail")
        );
    }
}
