//! Command-line front end for the `sagnac-im` simulator.
//!
//! Each command reads one JSON config, writes its data files into the
//! `--out` directory and finishes with a JSON summary carrying a
//! [`RunManifest`]. Exit codes: 0 success, 1 runtime failure, 2 usage or
//! config error.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sagnac_im::drift::{
    ensemble_normalized_std, fit_drift_sigma, fit_mixing_epsilon, DriftSpec, PolarizationMixing, StabilityDevice,
    StabilitySampling, CALIBRATED_EPSILON, CALIBRATED_SIGMA_RAD_PER_SQRT_S, DEFAULT_DRIFT_DT_S, METER_WINDOW_S,
};
use sagnac_im::interference::{interference_intensity, max_extinction_ratio_db, CouplingRatio, PhaseDifference};
use sagnac_im::pattern::{
    classify_transitions, max_abs_decoy_deviation, max_abs_deviation, quadrature_decoy_baseline, simulate_pattern,
    stability_experiment, write_transition_csv, CouplingSpec, Device, ExperimentConfig,
};
use sagnac_im::traveling_wave::{
    anti_parallel_overlap_count, max_clock_rate, simulated_overlap_count, ModulatorGeometry, DEFAULT_V_PI,
};

pub const VERSION: &str = concat!("sagnac-im ", env!("CARGO_PKG_VERSION"));

/// Clock rate quoted as the practical limit of a 5 cm bulk modulator.
const QUOTED_LIMIT_HZ: f64 = 3e9;
const OVERLAP_PHASE_SAMPLES: usize = 1024;
const OVERLAP_TIME_STEPS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<sagnac_im::Error> for CliError {
    fn from(e: sagnac_im::Error) -> Self {
        match e {
            sagnac_im::Error::InvalidParameter { .. } => Self::Config(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "sagnac-im",
    version,
    about = "Sagnac-loop and Mach-Zehnder intensity modulator simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum extinction ratio against splitter ratio.
    ErCurve {
        #[arg(long, default_value_t = 0.5)]
        r_min: f64,
        #[arg(long, default_value_t = 0.99)]
        r_max: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transition-conditioned pulse intensities of a PRBS run.
    Patterning {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Power-meter traces of unmodulated Sagnac and MZM devices under drift.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Highest clock rate free of anti-parallel double modulation.
    MaxClock {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Static transmission against drive voltage.
    TransferCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 201)]
        steps: usize,
    },
    /// Fit the drift diffusion and mixing fraction to the target spreads.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
    },
}

/// Provenance block embedded in every JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// SHA-256 of the compact JSON of `config`.
    pub config_digest: String,
    /// Resolved config, every default filled in.
    pub config: Value,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>, outputs: &[&str]) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self {
            command: command.to_owned(),
            version: VERSION.to_owned(),
            seed,
            config_digest: digest(&config),
            config,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Whether `config_digest` matches the embedded config.
    pub fn verify(&self) -> bool {
        digest(&self.config) == self.config_digest
    }
}

/// Hex SHA-256 of the compact JSON rendering; object keys are sorted.
pub fn digest(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Drift-stability experiment: an unmodulated Sagnac and a quadrature MZM
/// sharing one bias-phase random walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_sagnac_coupling")]
    pub sagnac_coupling: CouplingSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_mzm_coupling")]
    pub mzm_coupling: CouplingSpec,
    #[serde(default = "default_bias")]
    pub mzm_bias_phase_rad: f64,
    #[serde(default = "default_sigma")]
    pub sigma_rad_per_sqrt_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "default_drift_dt")]
    pub dt_s: f64,
    #[serde(default = "default_meter_window")]
    pub meter_window_s: f64,
    /// Runs averaged for the ensemble statistics, seeds `seed..seed + n`.
    #[serde(default = "default_ensemble")]
    pub ensemble_runs: usize,
    #[serde(default = "default_mzm_target")]
    pub target_mzm_std_pct: f64,
    #[serde(default = "default_sagnac_target")]
    pub target_sagnac_std_pct: f64,
    /// Search interval for the diffusion fit, rad/√s.
    #[serde(default = "default_sigma_bracket")]
    pub sigma_bracket: (f64, f64),
}

fn default_sagnac_coupling() -> CouplingSpec {
    CouplingSpec::Ratio(CouplingRatio::new(0.8).expect("valid ratio"))
}
fn default_epsilon() -> f64 {
    CALIBRATED_EPSILON
}
fn default_mzm_coupling() -> CouplingSpec {
    CouplingSpec::Ratio(CouplingRatio::balanced())
}
fn default_bias() -> f64 {
    FRAC_PI_2
}
fn default_sigma() -> f64 {
    CALIBRATED_SIGMA_RAD_PER_SQRT_S
}
fn default_drift_dt() -> f64 {
    DEFAULT_DRIFT_DT_S
}
fn default_meter_window() -> f64 {
    METER_WINDOW_S
}
fn default_ensemble() -> usize {
    1
}
fn default_mzm_target() -> f64 {
    61.2
}
fn default_sagnac_target() -> f64 {
    1.4
}
fn default_sigma_bracket() -> (f64, f64) {
    (0.8, 3.0)
}

impl StabilityConfig {
    fn resolved(&self) -> CliResult<Self> {
        let mut out = self.clone();
        out.sagnac_coupling = CouplingSpec::Ratio(
            self.sagnac_coupling
                .ratio()
                .map_err(|e| e.in_field("sagnac_coupling"))?,
        );
        out.mzm_coupling = CouplingSpec::Ratio(self.mzm_coupling.ratio().map_err(|e| e.in_field("mzm_coupling"))?);
        PolarizationMixing::new(self.epsilon)?;
        DriftSpec::new(self.sigma_rad_per_sqrt_s, self.seed)?;
        for (field, v) in [
            ("mzm_bias_phase_rad", self.mzm_bias_phase_rad),
            ("duration_s", self.duration_s),
        ] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("invalid {field}: must be finite, got {v}")));
            }
        }
        if self.ensemble_runs == 0 {
            return Err(CliError::Config("invalid ensemble_runs: must be >= 1".into()));
        }
        if self.duration_s < self.meter_window_s {
            return Err(CliError::Config(format!(
                "invalid duration_s: {} s is shorter than the {} s meter window",
                self.duration_s, self.meter_window_s
            )));
        }
        Ok(out)
    }

    fn devices(&self) -> CliResult<(StabilityDevice, StabilityDevice)> {
        let sagnac = StabilityDevice::Sagnac {
            coupling: self.sagnac_coupling.ratio()?,
            mixing: PolarizationMixing::new(self.epsilon)?,
        };
        let mzm = StabilityDevice::Mzm {
            coupling: self.mzm_coupling.ratio()?,
            bias_phase_rad: self.mzm_bias_phase_rad,
        };
        Ok((sagnac, mzm))
    }

    fn sampling(&self) -> StabilitySampling {
        StabilitySampling {
            duration_s: self.duration_s,
            dt_s: self.dt_s,
            meter_window_s: self.meter_window_s,
        }
    }

    fn ensemble_seeds(&self) -> Vec<u64> {
        (0..self.ensemble_runs as u64)
            .map(|k| self.seed.wrapping_add(k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxClockConfig {
    pub geometry: ModulatorGeometry,
}

/// Static transfer curve of a Sagnac splitter next to a balanced reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub coupling: CouplingSpec,
    #[serde(default = "default_v_pi")]
    pub v_pi: f64,
    /// Sweep end in units of `v_pi`.
    #[serde(default = "default_sweep")]
    pub sweep_vpi: f64,
}

fn default_v_pi() -> f64 {
    DEFAULT_V_PI
}
fn default_sweep() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErCurveParams {
    pub r_min: f64,
    pub r_max: f64,
    pub steps: usize,
}

/// Run one parsed command. Returns text for standard output.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::ErCurve {
            r_min,
            r_max,
            steps,
            out,
        } => cmd_er_curve(ErCurveParams { r_min, r_max, steps }, &out),
        Command::Patterning { config, out, seed } => cmd_patterning(&config, &out, seed),
        Command::Stability {
            config,
            out,
            seed,
            duration,
        } => cmd_stability(&config, &out, seed, duration),
        Command::MaxClock { config, out } => cmd_max_clock(&config, out.as_deref()),
        Command::TransferCurve { config, out, steps } => cmd_transfer_curve(&config, steps, &out),
        Command::Calibrate { config, out, duration } => cmd_calibrate(&config, &out, duration),
    }
}

/// Parse `args` (program name first), run, and map the outcome to an exit
/// code, printing results to `stdout` and messages to `stderr`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load<C: DeserializeOwned>(path: &Path) -> CliResult<C> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    let path = dir.join(name);
    let wrap = |e: io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let file = fs::File::create(&path).map_err(wrap)?;
    let mut w = BufWriter::new(file);
    fill(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

fn summary_text(manifest: &RunManifest, results: Value) -> String {
    let doc = json!({ "manifest": manifest, "results": results });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    text.push('\n');
    text
}

fn write_summary(dir: &Path, name: &str, manifest: &RunManifest, results: Value) -> CliResult<String> {
    let text = summary_text(manifest, results);
    write_file(dir, name, |w| w.write_all(text.as_bytes()))?;
    Ok(text)
}

pub fn cmd_er_curve(params: ErCurveParams, out: &Path) -> CliResult<String> {
    let ErCurveParams { r_min, r_max, steps } = params;
    if !(r_min > 0.0 && r_min < r_max && r_max < 1.0) {
        return Err(CliError::Usage(format!(
            "need 0 < r_min < r_max < 1, got r_min {r_min}, r_max {r_max}"
        )));
    }
    if steps < 2 {
        return Err(CliError::Usage(format!("need steps >= 2, got {steps}")));
    }
    let rows = (0..steps)
        .map(|i| {
            let r = r_min + (r_max - r_min) * i as f64 / (steps - 1) as f64;
            Ok((r, max_extinction_ratio_db(CouplingRatio::new(r)?)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    prepare_out(out)?;
    write_file(out, "er_curve.csv", |w| {
        writeln!(w, "r,er_db")?;
        rows.iter().try_for_each(|(r, er)| writeln!(w, "{r},{er}"))
    })?;
    let manifest = RunManifest::new("er-curve", &params, None, &["er_curve.csv", "er_curve.json"])?;
    write_summary(out, "er_curve.json", &manifest, json!({ "rows": steps }))
}

pub fn cmd_patterning(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<String> {
    let mut cfg: ExperimentConfig = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let cfg = cfg.resolved()?;
    let stats = match cfg.device {
        Device::MzmQuadratureDecoy => quadrature_decoy_baseline(&cfg)?,
        _ => classify_transitions(&simulate_pattern(&cfg)?)?,
    };
    prepare_out(out)?;
    write_file(out, "patterning.csv", |w| write_transition_csv(&stats, w))?;
    let manifest = RunManifest::new(
        "patterning",
        &cfg,
        Some(cfg.seed),
        &["patterning.csv", "patterning.json"],
    )?;
    let rows: Vec<Value> = stats
        .iter()
        .map(|s| {
            json!({
                "transition": s.transition.to_string(),
                "count": s.count,
                "mean": s.mean,
                "std": s.std,
                "deviation_pct": s.deviation_pct,
            })
        })
        .collect();
    let results = json!({
        "rows": rows,
        "max_abs_deviation_pct": max_abs_deviation(&stats),
        "max_abs_decoy_deviation_pct": max_abs_decoy_deviation(&stats),
    });
    write_summary(out, "patterning.json", &manifest, results)
}

pub fn cmd_stability(config: &Path, out: &Path, seed: Option<u64>, duration: Option<f64>) -> CliResult<String> {
    let mut cfg: StabilityConfig = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    let cfg = cfg.resolved()?;
    let (sagnac, mzm) = cfg.devices()?;
    let drift = DriftSpec::new(cfg.sigma_rad_per_sqrt_s, cfg.seed)?;
    let sampling = cfg.sampling();
    let (sagnac_series, sagnac_std) = stability_experiment(&sagnac, drift, &sampling)?;
    let (mzm_series, mzm_std) = stability_experiment(&mzm, drift, &sampling)?;
    let seeds = cfg.ensemble_seeds();
    let sagnac_mean = ensemble_normalized_std(&sagnac, drift, &sampling, &seeds)?;
    let mzm_mean = ensemble_normalized_std(&mzm, drift, &sampling, &seeds)?;
    prepare_out(out)?;
    write_file(out, "stability_sagnac.csv", |w| sagnac_series.write_csv(w))?;
    write_file(out, "stability_mzm.csv", |w| mzm_series.write_csv(w))?;
    let manifest = RunManifest::new(
        "stability",
        &cfg,
        Some(cfg.seed),
        &["stability_sagnac.csv", "stability_mzm.csv", "stability.json"],
    )?;
    let results = json!({
        "sagnac_std_pct": sagnac_std,
        "mzm_std_pct": mzm_std,
        "ensemble_runs": cfg.ensemble_runs,
        "ensemble_sagnac_std_pct": sagnac_mean,
        "ensemble_mzm_std_pct": mzm_mean,
    });
    write_summary(out, "stability.json", &manifest, results)
}

pub fn cmd_max_clock(config: &Path, out: Option<&Path>) -> CliResult<String> {
    let cfg: MaxClockConfig = load(config)?;
    let geom = cfg.geometry;
    geom.validate()?;
    let f_max = max_clock_rate(&geom)?;
    let oracle = |f| simulated_overlap_count(&geom, f, OVERLAP_PHASE_SAMPLES, OVERLAP_TIME_STEPS);
    let results = json!({
        "walk_through_s": geom.walk_through_time(),
        "f_max_hz": f_max,
        "overlap_count_at_f_max": oracle(f_max)?,
        "overlap_count_at_1_5_f_max": oracle(1.5 * f_max)?,
        "formula_count_at_1_5_f_max": anti_parallel_overlap_count(&geom, 1.5 * f_max)?,
        "quoted_limit_hz": QUOTED_LIMIT_HZ,
        "note": "the quoted 3 GHz for a 5 cm crystal is an order-of-magnitude figure; the walk-through formula is authoritative",
    });
    let manifest = RunManifest::new(
        "max-clock",
        &cfg,
        None,
        if out.is_some() { &["max_clock.json"] } else { &[] },
    )?;
    match out {
        Some(dir) => {
            prepare_out(dir)?;
            write_summary(dir, "max_clock.json", &manifest, results)
        }
        None => Ok(summary_text(&manifest, results)),
    }
}

pub fn cmd_transfer_curve(config: &Path, steps: usize, out: &Path) -> CliResult<String> {
    let cfg: TransferConfig = load(config)?;
    if steps < 2 {
        return Err(CliError::Usage(format!("need steps >= 2, got {steps}")));
    }
    let r = cfg.coupling.ratio().map_err(|e| e.in_field("coupling"))?;
    if !(cfg.v_pi.is_finite() && cfg.v_pi > 0.0) {
        return Err(CliError::Config(format!("invalid v_pi: must be > 0, got {}", cfg.v_pi)));
    }
    if !(cfg.sweep_vpi.is_finite() && cfg.sweep_vpi > 0.0) {
        return Err(CliError::Config(format!(
            "invalid sweep_vpi: must be > 0, got {}",
            cfg.sweep_vpi
        )));
    }
    let resolved = TransferConfig {
        coupling: CouplingSpec::Ratio(r),
        ..cfg
    };
    let v_max = cfg.sweep_vpi * cfg.v_pi;
    let balanced = CouplingRatio::balanced();
    prepare_out(out)?;
    write_file(out, "transfer_curve.csv", |w| {
        writeln!(w, "volts,transmission,reference_transmission")?;
        (0..steps).try_for_each(|i| {
            let v = v_max * i as f64 / (steps - 1) as f64;
            let dphi = PhaseDifference(PI * v / cfg.v_pi);
            let t = interference_intensity(r, dphi).value();
            let t_ref = interference_intensity(balanced, dphi).value();
            writeln!(w, "{v},{t},{t_ref}")
        })
    })?;
    let manifest = RunManifest::new(
        "transfer-curve",
        &resolved,
        None,
        &["transfer_curve.csv", "transfer_curve.json"],
    )?;
    let results = json!({
        "steps": steps,
        "coupling_r": r.r(),
        "minimum_transmission": r.contrast_floor(),
    });
    write_summary(out, "transfer_curve.json", &manifest, results)
}

pub fn cmd_calibrate(config: &Path, out: &Path, duration: Option<f64>) -> CliResult<String> {
    let mut cfg: StabilityConfig = load(config)?;
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    let cfg = cfg.resolved()?;
    let sampling = cfg.sampling();
    let seeds = cfg.ensemble_seeds();
    let mzm_r = cfg.mzm_coupling.ratio()?;
    let sigma = fit_drift_sigma(
        cfg.target_mzm_std_pct,
        mzm_r,
        cfg.mzm_bias_phase_rad,
        &sampling,
        &seeds,
        cfg.sigma_bracket,
    )?;
    let epsilon = fit_mixing_epsilon(
        cfg.target_sagnac_std_pct,
        cfg.sagnac_coupling.ratio()?,
        sigma,
        &sampling,
        &seeds,
    )?;
    prepare_out(out)?;
    let manifest = RunManifest::new("calibrate", &cfg, Some(cfg.seed), &["calibrate.json"])?;
    let results = json!({
        "sigma_rad_per_sqrt_s": sigma,
        "epsilon": epsilon,
        "shipped_sigma_rad_per_sqrt_s": CALIBRATED_SIGMA_RAD_PER_SQRT_S,
        "shipped_epsilon": CALIBRATED_EPSILON,
    });
    write_summary(out, "calibrate.json", &manifest, results)
}
