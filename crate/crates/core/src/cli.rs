//! Configuration files, subcommands and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{TiltFeasibility, UpaConfig};
use crate::beamform::{oracle, solve, tilt_2d_baseline, Design, SolverOptions, StackWeighting};
use crate::channel::{LinkGeometry, RadiationParams, Scenario};
use crate::geo::{DirectionAngles, GeodeticPoint, Heading, OrbitModel};
use crate::sim::{
    classify_scenario, evaluate_snr, improvement_summary, run_lv_sweep, run_m_sweep, run_time_sweep, scenario1_closed_form_snr, square_panels,
    BlockageModel, NodePlacement, SimulationConfig, SweepKind, SweepRecord,
};

pub const DEFAULT_SEED: u64 = 42;
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::error::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn field_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

// ---- configuration file -------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    earth: EarthSection,
    orbit: OrbitSection,
    nodes: NodesSection,
    arrays: ArraysSection,
    radiation: RadiationSection,
    power: PowerSection,
    blockage: BlockageSection,
    sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EarthSection {
    radius_m: f64,
}

impl Default for EarthSection {
    fn default() -> Self {
        Self { radius_m: 6_371_000.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OrbitSection {
    altitude_m: f64,
    speed_mps: f64,
    /// [latitude, longitude] in degrees.
    start_deg: [f64; 2],
    end_deg: [f64; 2],
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self {
            altitude_m: 740e3,
            speed_mps: 7.5e3,
            start_deg: [51.49, -0.5],
            end_deg: [51.512, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NodeSection {
    lat_deg: f64,
    lon_deg: f64,
    height_m: f64,
    heading_deg: f64,
}

impl Default for NodeSection {
    fn default() -> Self {
        Self {
            lat_deg: 0.0,
            lon_deg: 0.0,
            height_m: 0.0,
            heading_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NodesSection {
    irs: NodeSection,
    gu: NodeSection,
    l_h_m: f64,
    l_v_m: f64,
}

impl Default for NodesSection {
    fn default() -> Self {
        Self {
            irs: NodeSection {
                lat_deg: 51.512,
                lon_deg: 0.0,
                height_m: 150.0,
                heading_deg: 180.0,
            },
            gu: NodeSection {
                lat_deg: 51.509,
                lon_deg: -0.009,
                height_m: 30.0,
                heading_deg: 0.0,
            },
            l_h_m: 333.0,
            l_v_m: 623.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TransceiverArray {
    n_x: usize,
    n_y: usize,
    d_x: f64,
    d_y: f64,
}

impl Default for TransceiverArray {
    fn default() -> Self {
        Self {
            n_x: 15,
            n_y: 15,
            d_x: 0.25,
            d_y: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SurfaceArray {
    m_x: usize,
    m_y: usize,
    d_x: f64,
    d_y: f64,
}

impl Default for SurfaceArray {
    fn default() -> Self {
        Self {
            m_x: 20,
            m_y: 20,
            d_x: 0.25,
            d_y: 0.25,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ArraysSection {
    satellite: TransceiverArray,
    gu: TransceiverArray,
    irs: SurfaceArray,
    wavelength_m: f64,
}

impl Default for ArraysSection {
    fn default() -> Self {
        Self {
            satellite: TransceiverArray::default(),
            gu: TransceiverArray::default(),
            irs: SurfaceArray::default(),
            wavelength_m: 2.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RadiationSection {
    k: f64,
    k_t: f64,
    k_r: f64,
    gain_gu_db: f64,
    gain_sat_db: f64,
    gain_irs_db: f64,
}

impl Default for RadiationSection {
    fn default() -> Self {
        Self {
            k: 2.0,
            k_t: 1.0,
            k_r: 1.0,
            gain_gu_db: 4.0,
            gain_sat_db: 4.0,
            gain_irs_db: 6.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PowerSection {
    tx_dbw: f64,
    noise_dbw: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            tx_dbw: 15.0,
            noise_dbw: -120.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BlockageSection {
    mode: String,
    mask_deg: f64,
    /// Earth-centred coordinates, metres; default is the surface centre.
    plane_point_m: Option<[f64; 3]>,
    /// Default is the surface boresight.
    plane_normal: Option<[f64; 3]>,
}

impl Default for BlockageSection {
    fn default() -> Self {
        Self {
            mode: "plane-halfspace".into(),
            mask_deg: 10.0,
            plane_point_m: None,
            plane_normal: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    time_step_s: f64,
    methods: Option<Vec<String>>,
    lv_values_m: Option<Vec<f64>>,
    lv_start_m: f64,
    lv_stop_m: f64,
    lv_step_m: f64,
    lv_satellites_deg: Vec<[f64; 2]>,
    lv_scenario: String,
    m_values: Vec<usize>,
    m_panels: Option<Vec<[usize; 2]>>,
    m_satellite_deg: [f64; 2],
    m_scenario: String,
    satellite_heading_deg: f64,
    stack_weighting: String,
    eval_time_s: f64,
    eval_oracle_candidates: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            time_step_s: 1.0,
            methods: None,
            lv_values_m: None,
            lv_start_m: -1000.0,
            lv_stop_m: 1000.0,
            lv_step_m: 50.0,
            lv_satellites_deg: vec![[51.5056, -0.2], [46.30, -15.03]],
            lv_scenario: "I".into(),
            m_values: vec![64, 100, 144, 196, 256, 324, 400],
            m_panels: None,
            m_satellite_deg: [46.30, -15.03],
            m_scenario: "I".into(),
            satellite_heading_deg: 90.0,
            stack_weighting: "unweighted".into(),
            eval_time_s: 0.0,
            eval_oracle_candidates: 10_000,
        }
    }
}

/// Settings of the single-point evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub time: f64,
    pub oracle_candidates: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub sim: SimulationConfig,
    pub eval: EvalSettings,
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, "must be finite"))
    }
}

fn latlon(field: &str, [lat, lon]: [f64; 2], radius: f64) -> Result<GeodeticPoint, CliError> {
    GeodeticPoint::from_degrees(lat, lon, radius).map_err(|e| field_err(field, e.to_string()))
}

fn parse_scenario(field: &str, s: &str) -> Result<Option<Scenario>, CliError> {
    match s {
        "I" => Ok(Some(Scenario::ReflectedOnly)),
        "II" => Ok(Some(Scenario::WithDirect)),
        "auto" => Ok(None),
        other => Err(field_err(field, format!("expected \"I\", \"II\" or \"auto\", got \"{other}\""))),
    }
}

pub fn parse_methods(field: &str, names: &[String]) -> Result<Vec<Design>, CliError> {
    if names.is_empty() {
        return Err(field_err(field, "must list at least one method"));
    }
    names
        .iter()
        .map(|n| n.parse::<Design>().map_err(|e| field_err(field, e.to_string())))
        .collect()
}

fn node(field: &str, n: &NodeSection, earth_radius: f64) -> Result<NodePlacement, CliError> {
    finite(&format!("{field}.heading_deg"), n.heading_deg)?;
    if !(n.height_m >= 0.0) || !n.height_m.is_finite() {
        return Err(field_err(&format!("{field}.height_m"), format!("must be >= 0, got {}", n.height_m)));
    }
    let p = NodePlacement::from_degrees(n.lat_deg, n.lon_deg, n.height_m, Heading::from_degrees(n.heading_deg));
    p.position(earth_radius).map_err(|e| field_err(field, e.to_string()))?;
    Ok(p)
}

fn upa(field: &str, n_x: (&str, usize), n_y: (&str, usize), d_x: f64, d_y: f64) -> Result<UpaConfig, CliError> {
    for (name, n) in [n_x, n_y] {
        if n == 0 {
            return Err(field_err(&format!("{field}.{name}"), "must be at least 1"));
        }
    }
    positive(&format!("{field}.d_x"), d_x)?;
    positive(&format!("{field}.d_y"), d_y)?;
    UpaConfig::new(n_x.1, n_y.1, d_x, d_y).map_err(|e| field_err(field, e.to_string()))
}

fn build_config(file: ConfigFile) -> Result<LoadedConfig, CliError> {
    let earth_radius = positive("earth.radius_m", file.earth.radius_m)?;
    let o = &file.orbit;
    let altitude = positive("orbit.altitude_m", o.altitude_m)?;
    let orbit_radius = earth_radius + altitude;
    let orbit = OrbitModel::new(
        earth_radius,
        orbit_radius,
        positive("orbit.speed_mps", o.speed_mps)?,
        latlon("orbit.start_deg", o.start_deg, orbit_radius)?,
        latlon("orbit.end_deg", o.end_deg, orbit_radius)?,
    )
    .map_err(|e| field_err("orbit", e.to_string()))?;

    let nodes = &file.nodes;
    let irs = node("nodes.irs", &nodes.irs, earth_radius)?;
    let gu = node("nodes.gu", &nodes.gu, earth_radius)?;

    let a = &file.arrays;
    let sat_array = upa("arrays.satellite", ("n_x", a.satellite.n_x), ("n_y", a.satellite.n_y), a.satellite.d_x, a.satellite.d_y)?;
    let gu_array = upa("arrays.gu", ("n_x", a.gu.n_x), ("n_y", a.gu.n_y), a.gu.d_x, a.gu.d_y)?;
    let irs_array = upa("arrays.irs", ("m_x", a.irs.m_x), ("m_y", a.irs.m_y), a.irs.d_x, a.irs.d_y)?;
    let wavelength = positive("arrays.wavelength_m", a.wavelength_m)?;

    let r = &file.radiation;
    for (name, v) in [("k", r.k), ("k_t", r.k_t), ("k_r", r.k_r)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(field_err(&format!("radiation.{name}"), format!("must be >= 0, got {v}")));
        }
    }
    for (name, v) in [("gain_gu_db", r.gain_gu_db), ("gain_sat_db", r.gain_sat_db), ("gain_irs_db", r.gain_irs_db)] {
        finite(&format!("radiation.{name}"), v)?;
    }
    let radiation = RadiationParams::from_db(r.k, r.k_t, r.k_r, r.gain_gu_db, r.gain_sat_db, r.gain_irs_db)?;

    let tx_power_dbw = finite("power.tx_dbw", file.power.tx_dbw)?;
    let noise_dbw = finite("power.noise_dbw", file.power.noise_dbw)?;

    let b = &file.blockage;
    let blockage = match b.mode.as_str() {
        "plane-halfspace" => match (b.plane_point_m, b.plane_normal) {
            (None, None) => None,
            (point, normal) => {
                let frame = irs.frame(earth_radius)?;
                let point = point.map(Vector3::from).unwrap_or(frame.origin);
                let normal = normal.map(Vector3::from).unwrap_or(frame.z_axis);
                Some(BlockageModel::plane(point, normal).map_err(|_| field_err("blockage.plane_normal", "must be nonzero"))?)
            }
        },
        "elevation-mask" => Some(BlockageModel::ElevationMask {
            mask: finite("blockage.mask_deg", b.mask_deg)?.to_radians(),
        }),
        "always-direct" => Some(BlockageModel::AlwaysDirect),
        "never-direct" => Some(BlockageModel::NeverDirect),
        other => {
            return Err(field_err(
                "blockage.mode",
                format!("unknown mode \"{other}\", expected plane-halfspace, elevation-mask, always-direct or never-direct"),
            ))
        }
    };

    let s = &file.sweep;
    let time_step = positive("sweep.time_step_s", s.time_step_s)?;
    let methods = s.methods.as_ref().map(|m| parse_methods("sweep.methods", m)).transpose()?;
    let lv_values = match &s.lv_values_m {
        Some(v) => {
            for x in v {
                finite("sweep.lv_values_m", *x)?;
            }
            v.clone()
        }
        None => {
            let step = positive("sweep.lv_step_m", s.lv_step_m)?;
            let (start, stop) = (finite("sweep.lv_start_m", s.lv_start_m)?, finite("sweep.lv_stop_m", s.lv_stop_m)?);
            if stop < start {
                return Err(field_err("sweep.lv_stop_m", "must not be below sweep.lv_start_m"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + step * i as f64).collect()
        }
    };
    let lv_satellites = s
        .lv_satellites_deg
        .iter()
        .map(|p| latlon("sweep.lv_satellites_deg", *p, orbit_radius))
        .collect::<Result<Vec<_>, _>>()?;
    let m_panels = match &s.m_panels {
        Some(p) => {
            if p.iter().any(|[a, b]| *a == 0 || *b == 0) {
                return Err(field_err("sweep.m_panels", "panel sizes must be at least 1"));
            }
            p.iter().map(|[a, b]| (*a, *b)).collect()
        }
        None => square_panels(&s.m_values).map_err(|e| field_err("sweep.m_values", e.to_string()))?,
    };
    let stack_weighting = match s.stack_weighting.as_str() {
        "unweighted" => StackWeighting::Unweighted,
        "amplitude" => StackWeighting::AmplitudeWeighted,
        other => return Err(field_err("sweep.stack_weighting", format!("expected \"unweighted\" or \"amplitude\", got \"{other}\""))),
    };
    if !(s.eval_time_s >= 0.0) || !s.eval_time_s.is_finite() {
        return Err(field_err("sweep.eval_time_s", "must be >= 0"));
    }

    let sim = SimulationConfig {
        earth_radius,
        orbit,
        irs,
        gu,
        nominal_l_h: positive("nodes.l_h_m", nodes.l_h_m)?,
        nominal_l_v: finite("nodes.l_v_m", nodes.l_v_m)?,
        sat_array,
        gu_array,
        irs_array,
        radiation,
        wavelength,
        tx_power_dbw,
        noise_dbw,
        blockage,
        time_step,
        methods,
        lv_values,
        lv_satellites,
        lv_scenario: parse_scenario("sweep.lv_scenario", &s.lv_scenario)?,
        m_panels,
        m_satellite: latlon("sweep.m_satellite_deg", s.m_satellite_deg, orbit_radius)?,
        m_scenario: parse_scenario("sweep.m_scenario", &s.m_scenario)?,
        fixed_satellite_heading: Heading::from_degrees(finite("sweep.satellite_heading_deg", s.satellite_heading_deg)?),
        solver: SolverOptions { stack_weighting },
    };
    sim.validate()?;
    Ok(LoadedConfig {
        sim,
        eval: EvalSettings {
            time: s.eval_time_s,
            oracle_candidates: s.eval_oracle_candidates,
        },
    })
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<LoadedConfig, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    build_config(file)
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

// ---- command line -------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "leo-irs", version, about = "Tilted-IRS LEO downlink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    TimeSweep,
    LvSweep,
    MSweep,
    Eval,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SNR along the satellite pass.
    TimeSweep(RunArgs),
    /// SNR against the user offset across the surface.
    LvSweep(RunArgs),
    /// SNR against the number of surface elements.
    MSweep(RunArgs),
    /// Full solution at one instant, as JSON.
    Eval(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub subcommand: CommandKind,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub methods: Option<Vec<String>>,
    pub format_version: String,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::TimeSweep => "time-sweep",
            CommandKind::LvSweep => "lv-sweep",
            CommandKind::MSweep => "m-sweep",
            CommandKind::Eval => "eval",
        }
    }
}

impl Command {
    pub fn manifest(self) -> RunManifest {
        let (kind, args) = match self {
            Command::TimeSweep(a) => (CommandKind::TimeSweep, a),
            Command::LvSweep(a) => (CommandKind::LvSweep, a),
            Command::MSweep(a) => (CommandKind::MSweep, a),
            Command::Eval(a) => (CommandKind::Eval, a),
        };
        RunManifest {
            config_path: args.config,
            subcommand: kind,
            out_dir: args.out,
            seed: args.seed,
            methods: args.methods,
            format_version: FORMAT_VERSION.to_string(),
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub records: usize,
    pub flagged: usize,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.records > self.flagged
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli.command.manifest()) {
        Ok(outcome) if outcome.success() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("error: all {} records were flagged", outcome.records);
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn execute(manifest: &RunManifest) -> Result<RunOutcome, CliError> {
    let mut loaded = parse_config(&manifest.config_path)?;
    if let Some(m) = &manifest.methods {
        loaded.sim.methods = Some(parse_methods("--methods", m)?);
    }
    fs::create_dir_all(&manifest.out_dir).map_err(|source| CliError::Io {
        path: manifest.out_dir.display().to_string(),
        source,
    })?;
    match manifest.subcommand {
        CommandKind::TimeSweep => cmd_time_sweep(manifest, &loaded.sim),
        CommandKind::LvSweep => cmd_lv_sweep(manifest, &loaded.sim),
        CommandKind::MSweep => cmd_m_sweep(manifest, &loaded.sim),
        CommandKind::Eval => cmd_eval(manifest, &loaded),
    }
}

// ---- output -------------------------------------------------------------

/// Plain decimal with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

fn header_line(manifest: &RunManifest) -> String {
    format!(
        "# format_version={} command={} seed={}\n",
        manifest.format_version,
        manifest.subcommand.name(),
        manifest.seed
    )
}

pub fn sweep_csv(manifest: &RunManifest, x_name: &str, methods: &[Design], records: &[SweepRecord]) -> String {
    let mut out = header_line(manifest);
    out.push_str(x_name);
    out.push_str(",scenario");
    for m in methods {
        let _ = write!(out, ",snr_db_{}", m.name());
    }
    out.push_str(",eta_deg,phi_tilde_in_deg,phi_tilde_out_deg\n");
    for r in records {
        out.push_str(&format_sig(r.x, 9));
        out.push(',');
        out.push_str(r.scenario.label());
        for v in &r.snr_db {
            out.push(',');
            out.push_str(&format_sig(*v, 9));
        }
        for v in [r.eta, r.phi_tilde_in, r.phi_tilde_out] {
            out.push(',');
            out.push_str(&format_sig(v.to_degrees(), 9));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn report_flags(records: &[SweepRecord]) -> usize {
    let mut n = 0;
    for r in records.iter().filter(|r| r.is_flagged()) {
        eprintln!("warning: point {} flagged: {}", format_sig(r.x, 9), r.flagged.as_deref().unwrap_or(""));
        n += 1;
    }
    n
}

pub fn cmd_time_sweep(manifest: &RunManifest, cfg: &SimulationConfig) -> Result<RunOutcome, CliError> {
    let records = run_time_sweep(cfg)?;
    let methods = cfg.methods_for(SweepKind::Time);
    let mut files = vec![write_file(manifest.out_dir.join("time_sweep.csv"), &sweep_csv(manifest, "t_s", &methods, &records))?];

    let mut summary = header_line(manifest);
    summary.push_str("scenario,method,baseline,mean_gain_db,peak_gain_db,points\n");
    for baseline in methods.iter().filter(|&&d| d != Design::Proposed) {
        for s in improvement_summary(&records, &methods, Design::Proposed, *baseline) {
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{}",
                s.scenario.label(),
                Design::Proposed.name(),
                baseline.name(),
                format_sig(s.mean_db, 9),
                format_sig(s.peak_db, 9),
                s.count
            );
        }
    }
    files.push(write_file(manifest.out_dir.join("time_sweep_summary.csv"), &summary)?);
    Ok(RunOutcome {
        files,
        records: records.len(),
        flagged: report_flags(&records),
    })
}

pub fn cmd_lv_sweep(manifest: &RunManifest, cfg: &SimulationConfig) -> Result<RunOutcome, CliError> {
    let methods = cfg.methods_for(SweepKind::Lv);
    let mut outcome = RunOutcome {
        files: Vec::new(),
        records: 0,
        flagged: 0,
    };
    for (i, sat) in cfg.lv_satellites.iter().enumerate() {
        let records = run_lv_sweep(cfg, sat, &cfg.lv_values)?;
        let name = format!("lv_sweep_s{}.csv", i + 1);
        outcome
            .files
            .push(write_file(manifest.out_dir.join(name), &sweep_csv(manifest, "l_v_m", &methods, &records))?);
        outcome.records += records.len();
        outcome.flagged += report_flags(&records);
    }
    Ok(outcome)
}

pub fn cmd_m_sweep(manifest: &RunManifest, cfg: &SimulationConfig) -> Result<RunOutcome, CliError> {
    let records = run_m_sweep(cfg, &cfg.m_panels)?;
    let methods = cfg.methods_for(SweepKind::M);
    let file = write_file(manifest.out_dir.join("m_sweep.csv"), &sweep_csv(manifest, "m", &methods, &records))?;
    Ok(RunOutcome {
        files: vec![file],
        records: records.len(),
        flagged: report_flags(&records),
    })
}

// ---- single-point evaluation -------------------------------------------

#[derive(Debug, Serialize)]
struct AnglesDeg {
    azimuth: f64,
    elevation: f64,
}

impl From<DirectionAngles> for AnglesDeg {
    fn from(a: DirectionAngles) -> Self {
        Self {
            azimuth: a.azimuth.to_degrees(),
            elevation: a.elevation.to_degrees(),
        }
    }
}

#[derive(Debug, Serialize)]
struct GeometryReport {
    sat_to_irs: AnglesDeg,
    sat_to_gu: AnglesDeg,
    irs_incident: AnglesDeg,
    irs_departure: AnglesDeg,
    gu_from_irs: AnglesDeg,
    gu_from_sat: AnglesDeg,
    d_si_m: f64,
    d_ig_m: f64,
    d_sg_m: f64,
}

#[derive(Debug, Serialize)]
struct TiltReport {
    alpha_incident_deg: f64,
    alpha_departure_deg: f64,
    eta_deg: f64,
    eta_2d_deg: f64,
}

#[derive(Debug, Serialize)]
struct GainReport {
    delta: f64,
    pattern: f64,
    beta_eff: f64,
    phi_tilde_incident_deg: f64,
    phi_tilde_departure_deg: f64,
}

#[derive(Debug, Serialize)]
struct BreakdownReport {
    h_g: f64,
    h_s: f64,
    h_i: f64,
    g_g: f64,
    g_s: f64,
}

#[derive(Debug, Serialize)]
struct MethodReport {
    method: &'static str,
    eta_deg: f64,
    snr_db: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SolutionReport {
    rho_deg: f64,
    w_s: Vec<[f64; 2]>,
    w_g: Vec<[f64; 2]>,
    theta_phase_deg: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct OracleReport {
    candidates: usize,
    reflection_closed_form: f64,
    reflection_best_random: f64,
    receive_closed_form: f64,
    receive_best_random: f64,
    transmit_closed_form: f64,
    transmit_best_random: f64,
    closed_form_dominates: bool,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    format_version: String,
    command: &'static str,
    seed: u64,
    time_s: f64,
    scenario: &'static str,
    geometry: GeometryReport,
    tilt: TiltReport,
    gain: GainReport,
    objective: f64,
    snr_db: Option<f64>,
    closed_form_snr_db: Option<f64>,
    breakdown: BreakdownReport,
    methods: Vec<MethodReport>,
    solution: SolutionReport,
    oracle: OracleReport,
}

fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn pairs(v: &nalgebra::DVector<Complex64>) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn cmd_eval(manifest: &RunManifest, loaded: &LoadedConfig) -> Result<RunOutcome, CliError> {
    let cfg = &loaded.sim;
    let t = loaded.eval.time;
    let deployment = cfg.deployment()?;
    let sat = cfg.orbit.frame(t)?;
    let scenario = classify_scenario(&sat.origin, &deployment.gu.origin, &cfg.blockage_model(&deployment));
    let geom = LinkGeometry::from_frames(&sat, &deployment.irs, &deployment.gu)?;
    let feas = TiltFeasibility::from_angles(&geom.irs_incident, &geom.irs_departure)?;
    let model = cfg.channel_model();
    let (p_t, n0) = (cfg.tx_power(), cfg.noise_power());

    let best = solve(&model, &geom, scenario, Design::Proposed, &cfg.solver)?;
    let objective = best.objective();
    let snr = evaluate_snr(&best.composite, &best.solution, p_t, n0)?;
    let ch = &best.channels;

    let methods = cfg
        .methods_for(SweepKind::Time)
        .into_iter()
        .map(|d| match solve(&model, &geom, scenario, d, &cfg.solver).and_then(|s| {
            let snr = evaluate_snr(&s.composite, &s.solution, p_t, n0)?;
            Ok((s.solution.eta, snr))
        }) {
            Ok((eta, snr)) => MethodReport {
                method: d.name(),
                eta_deg: eta.to_degrees(),
                snr_db: finite_or_none(snr),
                error: None,
            },
            Err(e) => MethodReport {
                method: d.name(),
                eta_deg: f64::NAN,
                snr_db: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let n = loaded.eval.oracle_candidates;
    let m = ch.irs_incident_resp.len() as f64;
    let reflection_best_random = oracle::best_random_reflection(&ch.irs_departure_resp, &ch.irs_incident_resp, n, &mut rng);
    let receive_best_random = oracle::best_random_beam(&ch.gu_from_irs_resp.0, n, &mut rng);
    let transmit_best_random = oracle::best_random_beam(&ch.sat_to_irs_resp.0, n, &mut rng);
    let receive_closed_form = ch.gu_from_irs_resp.len() as f64;
    let transmit_closed_form = ch.sat_to_irs_resp.len() as f64;
    let oracle = OracleReport {
        candidates: n,
        reflection_closed_form: m,
        reflection_best_random,
        receive_closed_form,
        receive_best_random,
        transmit_closed_form,
        transmit_best_random,
        closed_form_dominates: m >= reflection_best_random - 1e-9
            && receive_closed_form >= receive_best_random - 1e-9
            && transmit_closed_form >= transmit_best_random - 1e-9,
    };

    let b = best.breakdown;
    let report = EvalReport {
        format_version: manifest.format_version.clone(),
        command: manifest.subcommand.name(),
        seed: manifest.seed,
        time_s: t,
        scenario: scenario.label(),
        geometry: GeometryReport {
            sat_to_irs: geom.sat_to_irs.into(),
            sat_to_gu: geom.sat_to_gu.into(),
            irs_incident: geom.irs_incident.into(),
            irs_departure: geom.irs_departure.into(),
            gu_from_irs: geom.gu_from_irs.into(),
            gu_from_sat: geom.gu_from_sat.into(),
            d_si_m: geom.d_si,
            d_ig_m: geom.d_ig,
            d_sg_m: geom.d_sg,
        },
        tilt: TiltReport {
            alpha_incident_deg: feas.alpha_incident.to_degrees(),
            alpha_departure_deg: feas.alpha_departure.to_degrees(),
            eta_deg: best.solution.eta.to_degrees(),
            eta_2d_deg: tilt_2d_baseline(&geom.irs_incident, &geom.irs_departure).to_degrees(),
        },
        gain: GainReport {
            delta: ch.gain.delta,
            pattern: ch.gain.pattern,
            beta_eff: ch.gain.beta_eff,
            phi_tilde_incident_deg: ch.gain.phi_tilde_incident.to_degrees(),
            phi_tilde_departure_deg: ch.gain.phi_tilde_departure.to_degrees(),
        },
        objective,
        snr_db: finite_or_none(snr),
        closed_form_snr_db: (scenario == Scenario::ReflectedOnly)
            .then(|| {
                scenario1_closed_form_snr(ch.gain.beta_eff, ch.irs_incident_resp.len(), cfg.gu_array.len(), cfg.sat_array.len(), p_t, n0)
            })
            .and_then(finite_or_none),
        breakdown: BreakdownReport {
            h_g: b.h_g,
            h_s: b.h_s,
            h_i: b.h_i,
            g_g: b.g_g,
            g_s: b.g_s,
        },
        methods,
        solution: SolutionReport {
            rho_deg: best.solution.rho.to_degrees(),
            w_s: pairs(&best.solution.w_s),
            w_g: pairs(&best.solution.w_g),
            theta_phase_deg: best.solution.theta.diagonal().iter().map(|z| z.arg().to_degrees()).collect(),
        },
        oracle,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    let file = write_file(manifest.out_dir.join("eval.json"), &json)?;
    Ok(RunOutcome {
        files: vec![file],
        records: 1,
        flagged: 0,
    })
}
