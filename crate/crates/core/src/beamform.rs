//! Closed-form joint design of tilt, surface phases and transceiver beams,
//! the comparison designs, and the brute-force searches used to check them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{SteeringVector, TiltFeasibility};
use crate::channel::{composite_scenario1, composite_scenario2, CascadeChannels, ChannelModel, LinkGeometry, PhaseShiftMatrix, Scenario};
use crate::error::{invalid, Error, Result};
use crate::geo::{wrap_angle, DirectionAngles};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub w_s: DVector<Complex64>,
    pub w_g: DVector<Complex64>,
    pub theta: PhaseShiftMatrix,
    pub eta: f64,
    /// Common phase applied at the surface.
    pub rho: f64,
}

impl BeamformingSolution {
    /// Unit beams, unit-modulus phases and, if given, a feasible tilt.
    pub fn check(&self, feasibility: Option<&TiltFeasibility>) -> Result<()> {
        for (name, w) in [("w_s", &self.w_s), ("w_g", &self.w_g)] {
            if (w.norm() - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("{name} has norm {}", w.norm())));
            }
        }
        if self.theta.diagonal().iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(invalid("reflection coefficient off the unit circle"));
        }
        if let Some(f) = feasibility {
            if self.eta < f.alpha_departure - 1e-12 || self.eta > f.alpha_incident + 1e-12 {
                return Err(invalid(format!(
                    "tilt {} outside [{}, {}]",
                    self.eta, f.alpha_departure, f.alpha_incident
                )));
            }
        }
        Ok(())
    }
}

/// Factors of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// |w_Gᵀ a_A^{I→G}|².
    pub h_g: f64,
    /// |(a_D^{S→I})ᵀ w_S|².
    pub h_s: f64,
    /// |ε_G ε_S ã_Dᵀ Θ ã_A|².
    pub h_i: f64,
    /// |w_Gᵀ H^G|².
    pub g_g: f64,
    /// ‖H^S w_S‖².
    pub g_s: f64,
}

/// Midpoint of the feasible tilt interval.
pub fn optimal_tilt(feas: &TiltFeasibility) -> Result<f64> {
    let (lo, hi) = (feas.alpha_departure, feas.alpha_incident);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(invalid("tilt bounds must be finite"));
    }
    if lo > hi {
        return Err(Error::InfeasibleTilt {
            alpha_departure: lo,
            alpha_incident: hi,
        });
    }
    Ok((0.5 * (lo + hi)).clamp(lo, hi))
}

/// Elevation-only tilt that ignores the azimuths.
pub fn tilt_2d_baseline(incident: &DirectionAngles, departure: &DirectionAngles) -> f64 {
    0.5 * (incident.elevation - departure.elevation)
}

/// Θ = e^{jρ}·conj(ε_G ε_S ã_D ⊙ ã_A).
pub fn optimal_phase_shifts(
    departure: &SteeringVector,
    incident: &SteeringVector,
    eps_g: Complex64,
    eps_s: Complex64,
    rho: f64,
) -> Result<PhaseShiftMatrix> {
    if departure.len() != incident.len() {
        return Err(Error::DimensionMismatch {
            context: "optimal_phase_shifts",
            expected: format!("{} entries", departure.len()),
            actual: format!("{} entries", incident.len()),
        });
    }
    let common = Complex64::from_polar(1.0, rho);
    let diag = departure
        .0
        .zip_map(&incident.0, |d, i| {
            let z = eps_g * eps_s * d * i;
            // renormalise so rounding cannot push entries off the unit circle
            common * (z.conj() / z.norm())
        });
    PhaseShiftMatrix::new(diag)
}

/// a*/‖a‖.
pub fn matched_beam(resp: &DVector<Complex64>, context: &'static str) -> Result<DVector<Complex64>> {
    let n = resp.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector(context));
    }
    Ok(resp.map(|z| z.conj() / n))
}

/// Maximum-ratio combining at the user and transmission at the satellite.
pub fn mrt_mrc(gu_resp: &SteeringVector, sat_resp: &SteeringVector) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    Ok((matched_beam(&gu_resp.0, "mrt_mrc (user)")?, matched_beam(&sat_resp.0, "mrt_mrc (satellite)")?))
}

/// Unit-norm conjugate of the stacked receive channel.
pub fn scenario2_receive_beam(h_g: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    matched_beam(h_g, "scenario2_receive_beam")
}

/// ρ = ∠ε_SG − ∠((a_A^{S→G})^H a_A^{I→G}), zero when the inner product vanishes.
pub fn scenario2_common_phase(sat_gu_arrival: &SteeringVector, irs_gu_arrival: &SteeringVector, eps_sg: Complex64) -> f64 {
    let inner = sat_gu_arrival.0.dotc(&irs_gu_arrival.0);
    if inner.norm() == 0.0 {
        return 0.0;
    }
    wrap_angle(eps_sg.arg() - inner.arg())
}

/// Dominant right singular vector of the stacked transmit matrix.
pub fn scenario2_transmit_beam(h_s: &DMatrix<Complex64>) -> Result<DVector<Complex64>> {
    if h_s.ncols() == 0 || h_s.norm() == 0.0 {
        return Err(Error::ZeroVector("scenario2_transmit_beam"));
    }
    let svd = h_s
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Svd("no convergence".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Svd("right singular vectors missing".into()))?;
    // nalgebra does not promise an ordering of the singular values
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let w = v_t.row(best).transpose().map(|z| z.conj());
    let n = w.norm();
    Ok(w / Complex64::new(n, 0.0))
}

/// 1 − |a^H b| / (‖a‖‖b‖).
pub fn lemma1_deviation(sat_to_gu: &SteeringVector, sat_to_irs: &SteeringVector) -> Result<f64> {
    let (na, nb) = (sat_to_gu.0.norm(), sat_to_irs.0.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("lemma1_deviation"));
    }
    Ok((1.0 - sat_to_gu.0.dotc(&sat_to_irs.0).norm() / (na * nb)).clamp(0.0, 1.0))
}

/// Uniform, zero-phase, unit-norm beam.
pub fn isotropic_beam(n: usize) -> Result<DVector<Complex64>> {
    if n == 0 {
        return Err(invalid("isotropic beam needs at least one element"));
    }
    Ok(DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0)))
}

/// |w_Gᵀ H w_S|².
pub fn bilinear_gain(w_g: &DVector<Complex64>, h: &DMatrix<Complex64>, w_s: &DVector<Complex64>) -> f64 {
    (w_g.transpose() * h * w_s)[(0, 0)].norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    /// Optimal 3D tilt with optimal phases and beams.
    Proposed,
    /// Elevation-only tilt.
    OptTilt2d,
    /// Untilted surface.
    FixedTiltZero,
    /// Optimal surface, uniform transceiver beams.
    IsotropicBeams,
    /// Direct link only.
    NoIrs,
}

impl Design {
    pub const ALL: [Design; 5] = [
        Design::Proposed,
        Design::OptTilt2d,
        Design::FixedTiltZero,
        Design::IsotropicBeams,
        Design::NoIrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::Proposed => "proposed",
            Design::OptTilt2d => "opt-2d-tilt",
            Design::FixedTiltZero => "fixed-eta0",
            Design::IsotropicBeams => "isotropic",
            Design::NoIrs => "no-irs",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| {
                let known: Vec<_> = Design::ALL.iter().map(|d| d.name()).collect();
                invalid(format!("unknown method '{s}', expected one of {}", known.join(", ")))
            })
    }
}

/// Row weighting of the stacked transmit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StackWeighting {
    /// Both rows are bare steering vectors.
    #[default]
    Unweighted,
    /// Rows scaled by the direct amplitude and by β_eff·M.
    AmplitudeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverOptions {
    pub stack_weighting: StackWeighting,
}

/// A design evaluated on one geometry.
#[derive(Debug, Clone)]
pub struct Solved {
    pub design: Design,
    pub scenario: Scenario,
    pub solution: BeamformingSolution,
    pub channels: CascadeChannels,
    /// Effective end-to-end matrix (user elements × satellite elements).
    pub composite: DMatrix<Complex64>,
    pub breakdown: ObjectiveBreakdown,
}

impl Solved {
    /// |w_Gᵀ H w_S|² by direct matrix arithmetic.
    pub fn objective(&self) -> f64 {
        bilinear_gain(&self.solution.w_g, &self.composite, &self.solution.w_s)
    }
}

/// H^G = β_SG ε_SG a_A^{S→G} + β_eff M e^{jρ} a_A^{I→G}.
pub fn stacked_receive_channel(ch: &CascadeChannels, rho: f64) -> DVector<Complex64> {
    let m = ch.irs_incident_resp.len() as f64;
    let direct = ch.direct.propagation_phase * ch.direct.amplitude_gain;
    let reflected = Complex64::from_polar(ch.gain.beta_eff * m, rho);
    ch.gu_from_sat_resp.0.map(|z| z * direct) + ch.gu_from_irs_resp.0.map(|z| z * reflected)
}

/// Rows (a_D^{S→G})ᵀ and (a_D^{S→I})ᵀ, optionally amplitude weighted.
pub fn stacked_transmit_matrix(ch: &CascadeChannels, weighting: StackWeighting) -> DMatrix<Complex64> {
    let (w_direct, w_reflected) = match weighting {
        StackWeighting::Unweighted => (1.0, 1.0),
        StackWeighting::AmplitudeWeighted => (
            ch.direct.amplitude_gain,
            ch.gain.beta_eff * ch.irs_incident_resp.len() as f64,
        ),
    };
    let n = ch.sat_to_gu_resp.len();
    DMatrix::from_fn(2, n, |r, c| {
        if r == 0 {
            ch.sat_to_gu_resp.0[c] * w_direct
        } else {
            ch.sat_to_irs_resp.0[c] * w_reflected
        }
    })
}

pub fn breakdown(ch: &CascadeChannels, sol: &BeamformingSolution) -> ObjectiveBreakdown {
    let eps = ch.irs_gu.propagation_phase * ch.sat_irs.propagation_phase;
    let h_i = ch
        .irs_departure_resp
        .0
        .iter()
        .zip(sol.theta.diagonal().iter())
        .zip(ch.irs_incident_resp.0.iter())
        .fold(ZERO, |acc, ((d, t), i)| acc + d * t * i)
        * eps;
    let h_g = sol.w_g.transpose() * &ch.gu_from_irs_resp.0;
    let h_s = ch.sat_to_irs_resp.0.transpose() * &sol.w_s;
    let g_g = sol.w_g.transpose() * stacked_receive_channel(ch, sol.rho);
    let g_s = stacked_transmit_matrix(ch, StackWeighting::Unweighted) * &sol.w_s;
    ObjectiveBreakdown {
        h_g: h_g[(0, 0)].norm_sqr(),
        h_s: h_s[(0, 0)].norm_sqr(),
        h_i: h_i.norm_sqr(),
        g_g: g_g[(0, 0)].norm_sqr(),
        g_s: g_s.norm_squared(),
    }
}

/// Tilt used by a design.
pub fn design_tilt(design: Design, geom: &LinkGeometry) -> Result<f64> {
    match design {
        Design::Proposed | Design::IsotropicBeams => {
            optimal_tilt(&TiltFeasibility::from_angles(&geom.irs_incident, &geom.irs_departure)?)
        }
        Design::OptTilt2d => Ok(tilt_2d_baseline(&geom.irs_incident, &geom.irs_departure)),
        Design::FixedTiltZero | Design::NoIrs => Ok(0.0),
    }
}

pub fn solve(model: &ChannelModel, geom: &LinkGeometry, scenario: Scenario, design: Design, opts: &SolverOptions) -> Result<Solved> {
    let eta = design_tilt(design, geom)?;
    let ch = model.build(geom, eta)?;
    let m = ch.irs_incident_resp.len();
    let eps_g = ch.irs_gu.propagation_phase;
    let eps_s = ch.sat_irs.propagation_phase;

    let (solution, composite) = if design == Design::NoIrs {
        let (w_g, w_s) = mrt_mrc(&ch.gu_from_sat_resp, &ch.sat_to_gu_resp)?;
        let composite = match scenario {
            Scenario::ReflectedOnly => DMatrix::zeros(ch.direct.matrix.nrows(), ch.direct.matrix.ncols()),
            Scenario::WithDirect => ch.direct.matrix.clone(),
        };
        let theta = PhaseShiftMatrix::identity(m);
        (BeamformingSolution { w_s, w_g, theta, eta, rho: 0.0 }, composite)
    } else {
        let rho = match scenario {
            Scenario::ReflectedOnly => 0.0,
            Scenario::WithDirect => scenario2_common_phase(&ch.gu_from_sat_resp, &ch.gu_from_irs_resp, ch.direct.propagation_phase),
        };
        let theta = optimal_phase_shifts(&ch.irs_departure_resp, &ch.irs_incident_resp, eps_g, eps_s, rho)?;
        let (w_g, w_s) = if design == Design::IsotropicBeams {
            (isotropic_beam(ch.gu_from_irs_resp.len())?, isotropic_beam(ch.sat_to_irs_resp.len())?)
        } else {
            match scenario {
                Scenario::ReflectedOnly => mrt_mrc(&ch.gu_from_irs_resp, &ch.sat_to_irs_resp)?,
                Scenario::WithDirect => {
                    // with both paths dead any unit beam is optimal; fall back to the cascade beams
                    let h_g = stacked_receive_channel(&ch, rho);
                    let w_g = match scenario2_receive_beam(&h_g) {
                        Ok(w) => w,
                        Err(Error::ZeroVector(_)) => matched_beam(&ch.gu_from_irs_resp.0, "solve")?,
                        Err(e) => return Err(e),
                    };
                    let h_s = stacked_transmit_matrix(&ch, opts.stack_weighting);
                    let w_s = match scenario2_transmit_beam(&h_s) {
                        Ok(w) => w,
                        Err(Error::ZeroVector(_)) => matched_beam(&ch.sat_to_irs_resp.0, "solve")?,
                        Err(e) => return Err(e),
                    };
                    (w_g, w_s)
                }
            }
        };
        let cascade = composite_scenario1(&ch.irs_gu, &theta, &ch.sat_irs)?;
        let composite = match scenario {
            Scenario::ReflectedOnly => cascade,
            Scenario::WithDirect => composite_scenario2(&ch.direct, &cascade)?,
        };
        (BeamformingSolution { w_s, w_g, theta, eta, rho }, composite)
    };

    let breakdown = breakdown(&ch, &solution);
    Ok(Solved {
        design,
        scenario,
        solution,
        channels: ch,
        composite,
        breakdown,
    })
}

/// Seeded brute-force searches that the closed forms are checked against.
pub mod oracle {
    use super::*;
    use crate::array::{modified_elevation, Side};
    use crate::channel::radiation_pattern;
    use rand::Rng;

    /// Random complex direction with unit norm.
    pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
        loop {
            let v = DVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let norm = v.norm();
            if norm > 1e-12 {
                return v / Complex64::new(norm, 0.0);
            }
        }
    }

    pub fn random_phase_matrix<R: Rng + ?Sized>(m: usize, rng: &mut R) -> PhaseShiftMatrix {
        let diag = DVector::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)));
        PhaseShiftMatrix::new(diag).expect("unit modulus by construction")
    }

    /// Best |ε ã_Dᵀ Θ ã_A| over random diagonals.
    pub fn best_random_reflection<R: Rng + ?Sized>(
        departure: &SteeringVector,
        incident: &SteeringVector,
        candidates: usize,
        rng: &mut R,
    ) -> f64 {
        let m = departure.len();
        let cascade = departure.0.component_mul(&incident.0);
        (0..candidates)
            .map(|_| {
                let t = random_phase_matrix(m, rng);
                cascade.iter().zip(t.diagonal().iter()).fold(ZERO, |acc, (c, t)| acc + c * t).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Best |wᵀ a|² over random unit beams.
    pub fn best_random_beam<R: Rng + ?Sized>(resp: &DVector<Complex64>, candidates: usize, rng: &mut R) -> f64 {
        (0..candidates)
            .map(|_| (random_unit_vector(resp.len(), rng).transpose() * resp)[(0, 0)].norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Best ‖H w‖² over random unit beams.
    pub fn best_random_stack_beam<R: Rng + ?Sized>(h: &DMatrix<Complex64>, candidates: usize, rng: &mut R) -> f64 {
        (0..candidates)
            .map(|_| (h * random_unit_vector(h.ncols(), rng)).norm_squared())
            .fold(0.0, f64::max)
    }

    /// F at tilt η.
    pub fn pattern_at(incident: &DirectionAngles, departure: &DirectionAngles, eta: f64, k: f64) -> f64 {
        radiation_pattern(
            modified_elevation(incident, eta, Side::Incident),
            modified_elevation(departure, eta, Side::Departure),
            k,
        )
    }

    /// Largest F over an evenly spaced grid on [lo, hi], with its tilt.
    pub fn grid_best_pattern(
        incident: &DirectionAngles,
        departure: &DirectionAngles,
        lo: f64,
        hi: f64,
        points: usize,
        k: f64,
    ) -> (f64, f64) {
        let steps = points.max(2) - 1;
        (0..=steps)
            .map(|i| {
                let eta = lo + (hi - lo) * i as f64 / steps as f64;
                (eta, pattern_at(incident, departure, eta, k))
            })
            .fold((lo, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
    }
}
