use std::path::PathBuf;
use std::process::ExitCode;

use atomwalk_core::lyapunov::AxisGrid;
use atomwalk_core::orchestrator::{
    load_config, parse_bins, parse_grid, parse_interval, parse_scan_axis, run, Command, Overrides,
    RunError,
};
use atomwalk_core::scattering::ScanAxis;
use clap::Parser;

/// Two-level atom in a tilted optical lattice: trajectories, Lyapunov
/// maps, exit-time scans and exit-time statistics.
#[derive(Debug, Parser)]
#[command(name = "atomwalk", version)]
struct Cli {
    /// trajectory, bloch, lyapunov-map, scan, zoom or pdf
    #[arg(value_parser = str::parse::<Command>)]
    command: Command,
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Horizon of the command: integration time, FTLE horizon or scan timeout
    #[arg(long)]
    t_max: Option<f64>,
    /// Worker threads [default: ATOMWALK_WORKERS or CPU count]
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lyapunov map grid, `dlo:dhi:dn,klo:khi:kn`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
    grid: Option<(AxisGrid, AxisGrid)>,
    /// Scan interval, `lo:hi`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_interval)]
    interval: Option<(f64, f64)>,
    /// Scan sample count
    #[arg(long)]
    n: Option<usize>,
    /// Scanned quantity: detuning, initial_position or initial_momentum
    #[arg(long, value_parser = parse_scan_axis)]
    axis: Option<ScanAxis>,
    /// Zoom magnification per level
    #[arg(long)]
    mag: Option<f64>,
    /// Zoom levels, counting the base scan
    #[arg(long)]
    levels: Option<usize>,
    /// Center of the first magnification [default: auto]
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    /// Perturbation sizes for the uncertainty exponent, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps_list: Option<Vec<f64>>,
    /// Histogram bins, `linear` or `linear,log`
    #[arg(long, value_parser = parse_bins)]
    bins: Option<(usize, Option<usize>)>,
    /// Scan CSV to build the PDF from instead of scanning
    #[arg(long)]
    input: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            command: Some(self.command),
            delta: self.delta,
            kappa: self.kappa,
            omega_r: self.omega_r,
            p0: self.p0,
            x0: self.x0,
            t_max: self.t_max,
            workers: self.workers,
            out: self.out.clone(),
            grid: self.grid,
            interval: self.interval,
            n: self.n,
            mag: self.mag,
            levels: self.levels,
            eps_list: self.eps_list.clone(),
            bins: self.bins,
            axis: self.axis,
            center: self.center,
            input: self.input.clone(),
        }
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides())?;
    let manifest = run(&cfg)?;
    for f in &manifest.outputs {
        println!("{}  {}", f.sha256, cfg.out.join(&f.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e
                .kind()
                .as_str()
                .map_or_else(|| e.to_string(), str::to_string);
            let detail = e.render().to_string();
            eprintln!(
                "{}",
                serde_json::json!({ "error": "usage-error", "message": msg, "detail": detail.trim() })
            );
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
