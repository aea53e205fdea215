//! Scenario classification, SNR evaluation and the three sweeps.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::UpaConfig;
use crate::beamform::{bilinear_gain, solve, BeamformingSolution, Design, SolverOptions};
use crate::channel::{db_to_linear, ChannelModel, LinkGeometry, RadiationParams, Scenario};
use crate::error::{invalid, Error, Result};
use crate::geo::{make_local_frame, ArrayFace, CartesianVector, GeodeticPoint, Heading, LocalFrame, OrbitModel, EARTH_RADIUS};

/// Position and orientation of a ground node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePlacement {
    /// Radians.
    pub latitude: f64,
    /// Radians.
    pub longitude: f64,
    /// Height above the sphere, metres.
    pub height: f64,
    pub heading: Heading,
}

impl NodePlacement {
    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64, heading: Heading) -> Self {
        Self {
            latitude: lat_deg.to_radians(),
            longitude: lon_deg.to_radians(),
            height,
            heading,
        }
    }

    pub fn position(&self, earth_radius: f64) -> Result<GeodeticPoint> {
        GeodeticPoint::new(self.latitude, self.longitude, earth_radius + self.height)
    }

    /// Horizon-facing array frame at the node.
    pub fn frame(&self, earth_radius: f64) -> Result<LocalFrame> {
        make_local_frame(&self.position(earth_radius)?, self.heading, ArrayFace::HorizonFacing)
    }
}

/// Rule deciding whether the direct satellite → user path exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockageModel {
    /// Direct path iff satellite and user lie strictly on the same side of the plane.
    PlaneHalfspace { point: CartesianVector, normal: Vector3<f64> },
    /// Direct path iff the satellite is above `mask` (radians) in the user's horizon.
    ElevationMask { mask: f64 },
    AlwaysDirect,
    NeverDirect,
}

impl BlockageModel {
    pub fn plane(point: CartesianVector, normal: Vector3<f64>) -> Result<Self> {
        let normal = normal
            .try_normalize(0.0)
            .ok_or(Error::ZeroVector("BlockageModel::plane"))?;
        Ok(BlockageModel::PlaneHalfspace { point, normal })
    }

    /// Plane of the untilted surface.
    pub fn surface_plane(irs: &LocalFrame) -> Self {
        BlockageModel::PlaneHalfspace {
            point: irs.origin,
            normal: irs.z_axis,
        }
    }
}

pub fn classify_scenario(sat: &CartesianVector, gu: &CartesianVector, blockage: &BlockageModel) -> Scenario {
    let direct = match blockage {
        BlockageModel::AlwaysDirect => true,
        BlockageModel::NeverDirect => false,
        BlockageModel::PlaneHalfspace { point, normal } => {
            let s = (sat - point).dot(normal);
            let g = (gu - point).dot(normal);
            (s > 0.0 && g > 0.0) || (s < 0.0 && g < 0.0)
        }
        BlockageModel::ElevationMask { mask } => {
            let up = gu.normalize();
            let d = sat - gu;
            let norm = d.norm();
            norm > 0.0 && (d.dot(&up) / norm).clamp(-1.0, 1.0).asin() > *mask
        }
    };
    if direct {
        Scenario::WithDirect
    } else {
        Scenario::ReflectedOnly
    }
}

/// 10·log10(P_t·|w_Gᵀ H w_S|² / N0), powers in watts.
pub fn evaluate_snr(composite: &DMatrix<Complex64>, solution: &BeamformingSolution, p_t: f64, n0: f64) -> Result<f64> {
    if composite.nrows() != solution.w_g.len() || composite.ncols() != solution.w_s.len() {
        return Err(Error::DimensionMismatch {
            context: "evaluate_snr",
            expected: format!("{} x {}", solution.w_g.len(), solution.w_s.len()),
            actual: format!("{} x {}", composite.nrows(), composite.ncols()),
        });
    }
    Ok(10.0 * (p_t * bilinear_gain(&solution.w_g, composite, &solution.w_s) / n0).log10())
}

/// 10·log10(P_t β_eff² M² N_G N_S / N0).
pub fn scenario1_closed_form_snr(beta_eff: f64, m: usize, n_g: usize, n_s: usize, p_t: f64, n0: f64) -> f64 {
    let m = m as f64;
    10.0 * (p_t * beta_eff * beta_eff * m * m * n_g as f64 * n_s as f64 / n0).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Time,
    Lv,
    M,
}

impl SweepKind {
    pub fn default_methods(self) -> Vec<Design> {
        match self {
            SweepKind::Time => vec![Design::Proposed, Design::OptTilt2d, Design::FixedTiltZero, Design::NoIrs],
            SweepKind::Lv => vec![Design::Proposed, Design::OptTilt2d, Design::FixedTiltZero],
            SweepKind::M => vec![Design::Proposed, Design::OptTilt2d, Design::FixedTiltZero, Design::IsotropicBeams],
        }
    }
}

/// Every parameter of a run. `Default` gives the reference deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub earth_radius: f64,
    pub orbit: OrbitModel,
    pub irs: NodePlacement,
    pub gu: NodePlacement,
    /// Expected horizontal separation along the surface boresight, metres.
    pub nominal_l_h: f64,
    /// Expected separation across the surface, metres.
    pub nominal_l_v: f64,
    pub sat_array: UpaConfig,
    pub gu_array: UpaConfig,
    pub irs_array: UpaConfig,
    pub radiation: RadiationParams,
    pub wavelength: f64,
    pub tx_power_dbw: f64,
    pub noise_dbw: f64,
    /// `None` puts the plane through the surface.
    pub blockage: Option<BlockageModel>,
    pub time_step: f64,
    /// Overrides the per-sweep default method lists.
    pub methods: Option<Vec<Design>>,
    /// Signed offsets of the user along the surface x axis.
    pub lv_values: Vec<f64>,
    pub lv_satellites: Vec<GeodeticPoint>,
    /// `None` classifies with the blockage model.
    pub lv_scenario: Option<Scenario>,
    pub m_panels: Vec<(usize, usize)>,
    pub m_satellite: GeodeticPoint,
    pub m_scenario: Option<Scenario>,
    /// Heading of a satellite held at a fixed position.
    pub fixed_satellite_heading: Heading,
    pub solver: SolverOptions,
}

pub const ORBIT_ALTITUDE: f64 = 740e3;

fn sat_point(lat_deg: f64, lon_deg: f64) -> GeodeticPoint {
    GeodeticPoint::from_degrees(lat_deg, lon_deg, EARTH_RADIUS + ORBIT_ALTITUDE).expect("valid constant")
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let upa = |n| UpaConfig::new(n, n, 0.25, 0.25).expect("valid constant");
        Self {
            earth_radius: EARTH_RADIUS,
            orbit: OrbitModel::new(EARTH_RADIUS, EARTH_RADIUS + ORBIT_ALTITUDE, 7.5e3, sat_point(51.49, -0.5), sat_point(51.512, 0.5))
                .expect("valid constant"),
            irs: NodePlacement::from_degrees(51.512, 0.0, 150.0, Heading::SOUTH),
            gu: NodePlacement::from_degrees(51.509, -0.009, 30.0, Heading::NORTH),
            nominal_l_h: 333.0,
            nominal_l_v: 623.0,
            sat_array: upa(15),
            gu_array: upa(15),
            irs_array: upa(20),
            radiation: RadiationParams::from_db(2.0, 1.0, 1.0, 4.0, 4.0, 6.0).expect("valid constant"),
            wavelength: 2.0,
            tx_power_dbw: 15.0,
            noise_dbw: -120.0,
            blockage: None,
            time_step: 1.0,
            methods: None,
            lv_values: (-20..=20).map(|i| 50.0 * i as f64).collect(),
            lv_satellites: vec![sat_point(51.5056, -0.2), sat_point(46.30, -15.03)],
            lv_scenario: Some(Scenario::ReflectedOnly),
            m_panels: [8, 10, 12, 14, 16, 18, 20].iter().map(|&n| (n, n)).collect(),
            m_satellite: sat_point(46.30, -15.03),
            m_scenario: Some(Scenario::ReflectedOnly),
            fixed_satellite_heading: Heading::EAST,
            solver: SolverOptions::default(),
        }
    }
}

/// Array frames of the two ground nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deployment {
    pub irs: LocalFrame,
    pub gu: LocalFrame,
}

impl Deployment {
    /// User position in surface-frame coordinates.
    pub fn gu_offset(&self) -> Vector3<f64> {
        self.irs.to_local(&(self.gu.origin - self.irs.origin))
    }

    /// The user moved rigidly along the surface x axis to offset `l_v`.
    pub fn with_lv(&self, l_v: f64) -> Self {
        let shift = l_v - self.gu_offset().x;
        Self {
            irs: self.irs,
            gu: self.gu.translated(&(self.irs.x_axis * shift)),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("earth_radius", self.earth_radius),
            ("wavelength", self.wavelength),
            ("time_step", self.time_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("tx_power_dbw", self.tx_power_dbw), ("noise_dbw", self.noise_dbw)] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if let Some(m) = &self.methods {
            if m.is_empty() {
                return Err(invalid("methods must not be empty"));
            }
        }
        if self.m_panels.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(invalid("panel sizes must be positive"));
        }
        Ok(())
    }

    pub fn tx_power(&self) -> f64 {
        db_to_linear(self.tx_power_dbw)
    }

    pub fn noise_power(&self) -> f64 {
        db_to_linear(self.noise_dbw)
    }

    pub fn methods_for(&self, kind: SweepKind) -> Vec<Design> {
        self.methods.clone().unwrap_or_else(|| kind.default_methods())
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            sat: self.sat_array,
            gu: self.gu_array,
            irs: self.irs_array,
            radiation: self.radiation,
            wavelength: self.wavelength,
        }
    }

    pub fn deployment(&self) -> Result<Deployment> {
        Ok(Deployment {
            irs: self.irs.frame(self.earth_radius)?,
            gu: self.gu.frame(self.earth_radius)?,
        })
    }

    pub fn blockage_model(&self, deployment: &Deployment) -> BlockageModel {
        self.blockage.unwrap_or_else(|| BlockageModel::surface_plane(&deployment.irs))
    }

    /// Sky-facing frame of a satellite parked at `p`.
    pub fn fixed_satellite_frame(&self, p: &GeodeticPoint) -> Result<LocalFrame> {
        make_local_frame(p, self.fixed_satellite_heading, ArrayFace::SkyFacing)
    }

    /// Sample times covering the pass.
    pub fn time_grid(&self) -> Vec<f64> {
        let steps = (self.orbit.pass_duration() / self.time_step + 1e-9).floor() as usize;
        (0..=steps).map(|k| k as f64 * self.time_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Swept variable: seconds, metres or element count.
    pub x: f64,
    pub scenario: Scenario,
    /// One entry per method; −∞ for a dead channel, NaN when the method failed.
    pub snr_db: Vec<f64>,
    /// Tilt of the first method, radians.
    pub eta: f64,
    pub phi_tilde_in: f64,
    pub phi_tilde_out: f64,
    pub flagged: Option<String>,
}

impl SweepRecord {
    pub fn is_flagged(&self) -> bool {
        self.flagged.is_some()
    }
}

/// Solves every method at one geometry.
pub fn evaluate_point(
    cfg: &SimulationConfig,
    model: &ChannelModel,
    x: f64,
    sat: &LocalFrame,
    deployment: &Deployment,
    scenario: Scenario,
    methods: &[Design],
) -> SweepRecord {
    let mut record = SweepRecord {
        x,
        scenario,
        snr_db: vec![f64::NAN; methods.len()],
        eta: f64::NAN,
        phi_tilde_in: f64::NAN,
        phi_tilde_out: f64::NAN,
        flagged: None,
    };
    let geom = match LinkGeometry::from_frames(sat, &deployment.irs, &deployment.gu) {
        Ok(g) => g,
        Err(e) => {
            record.flagged = Some(e.to_string());
            return record;
        }
    };
    let (p_t, n0) = (cfg.tx_power(), cfg.noise_power());
    let mut failures = Vec::new();
    for (i, &design) in methods.iter().enumerate() {
        let outcome = solve(model, &geom, scenario, design, &cfg.solver)
            .and_then(|s| evaluate_snr(&s.composite, &s.solution, p_t, n0).map(|snr| (s, snr)));
        match outcome {
            Ok((s, snr)) => {
                record.snr_db[i] = snr;
                if i == 0 {
                    record.eta = s.solution.eta;
                    record.phi_tilde_in = s.channels.gain.phi_tilde_incident;
                    record.phi_tilde_out = s.channels.gain.phi_tilde_departure;
                }
            }
            Err(e) => failures.push(format!("{design}: {e}")),
        }
    }
    if !failures.is_empty() {
        record.flagged = Some(failures.join("; "));
    }
    record
}

pub fn run_time_sweep(cfg: &SimulationConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let deployment = cfg.deployment()?;
    let blockage = cfg.blockage_model(&deployment);
    let model = cfg.channel_model();
    let methods = cfg.methods_for(SweepKind::Time);
    Ok(cfg
        .time_grid()
        .par_iter()
        .map(|&t| match cfg.orbit.frame(t) {
            Ok(sat) => {
                let scenario = classify_scenario(&sat.origin, &deployment.gu.origin, &blockage);
                evaluate_point(cfg, &model, t, &sat, &deployment, scenario, &methods)
            }
            Err(e) => flagged_record(t, methods.len(), e),
        })
        .collect())
}

pub fn run_lv_sweep(cfg: &SimulationConfig, sat_position: &GeodeticPoint, lv_values: &[f64]) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let base = cfg.deployment()?;
    let blockage = cfg.blockage_model(&base);
    let model = cfg.channel_model();
    let methods = cfg.methods_for(SweepKind::Lv);
    let sat = cfg.fixed_satellite_frame(sat_position)?;
    Ok(lv_values
        .par_iter()
        .map(|&lv| {
            let deployment = base.with_lv(lv);
            let scenario = cfg
                .lv_scenario
                .unwrap_or_else(|| classify_scenario(&sat.origin, &deployment.gu.origin, &blockage));
            evaluate_point(cfg, &model, lv, &sat, &deployment, scenario, &methods)
        })
        .collect())
}

pub fn run_m_sweep(cfg: &SimulationConfig, panels: &[(usize, usize)]) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let deployment = cfg.deployment()?;
    let blockage = cfg.blockage_model(&deployment);
    let methods = cfg.methods_for(SweepKind::M);
    let sat = cfg.fixed_satellite_frame(&cfg.m_satellite)?;
    let scenario = cfg
        .m_scenario
        .unwrap_or_else(|| classify_scenario(&sat.origin, &deployment.gu.origin, &blockage));
    panels
        .par_iter()
        .map(|&(m_x, m_y)| {
            let mut model = cfg.channel_model();
            model.irs = UpaConfig::new(m_x, m_y, cfg.irs_array.d_x, cfg.irs_array.d_y)?;
            Ok(evaluate_point(cfg, &model, (m_x * m_y) as f64, &sat, &deployment, scenario, &methods))
        })
        .collect()
}

/// Square panels for a list of element counts.
pub fn square_panels(m_values: &[usize]) -> Result<Vec<(usize, usize)>> {
    m_values
        .iter()
        .map(|&m| {
            let side = (m as f64).sqrt().round() as usize;
            if side == 0 || side * side != m {
                Err(invalid(format!("element count {m} is not a positive perfect square")))
            } else {
                Ok((side, side))
            }
        })
        .collect()
}

fn flagged_record(x: f64, n: usize, e: Error) -> SweepRecord {
    SweepRecord {
        x,
        scenario: Scenario::ReflectedOnly,
        snr_db: vec![f64::NAN; n],
        eta: f64::NAN,
        phi_tilde_in: f64::NAN,
        phi_tilde_out: f64::NAN,
        flagged: Some(e.to_string()),
    }
}

/// Gain of one method over another on one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementStats {
    pub scenario: Scenario,
    pub mean_db: f64,
    pub peak_db: f64,
    /// Records with finite SNR for both methods.
    pub count: usize,
}

/// Mean and peak dB gap of `method` over `baseline`, per scenario present.
pub fn improvement_summary(records: &[SweepRecord], methods: &[Design], method: Design, baseline: Design) -> Vec<ImprovementStats> {
    let (Some(a), Some(b)) = (
        methods.iter().position(|&d| d == method),
        methods.iter().position(|&d| d == baseline),
    ) else {
        return Vec::new();
    };
    [Scenario::ReflectedOnly, Scenario::WithDirect]
        .into_iter()
        .filter_map(|scenario| {
            let gaps: Vec<f64> = records
                .iter()
                .filter(|r| r.scenario == scenario && !r.is_flagged())
                .map(|r| r.snr_db[a] - r.snr_db[b])
                .filter(|g| g.is_finite())
                .collect();
            if gaps.is_empty() {
                return None;
            }
            Some(ImprovementStats {
                scenario,
                mean_db: gaps.iter().sum::<f64>() / gaps.len() as f64,
                peak_db: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                count: gaps.len(),
            })
        })
        .collect()
}
