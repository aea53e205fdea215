//! Steering vectors for ULAs and UPAs and the array response of a
//! mechanically tilted reflecting surface.
//!
//! The tilted response has two constructions that must agree: the direct
//! one, which projects the incident direction on the rotated element
//! positions, and the one that rewrites the direction into modified
//! (tilt-compensated) angles and reuses the untilted UPA formula.

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geo::{wrap_angle, DirectionAngles};

const SINGULAR_EPS: f64 = 1e-12;

/// Geometry of a uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaConfig {
    pub n_x: usize,
    pub n_y: usize,
    /// Element spacing along x in meters.
    pub d_x: f64,
    /// Element spacing along y in meters.
    pub d_y: f64,
}

impl UpaConfig {
    pub fn new(n_x: usize, n_y: usize, d_x: f64, d_y: f64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(invalid(format!("element counts must be >= 1, got {n_x}x{n_y}")));
        }
        if !(d_x > 0.0 && d_y > 0.0) || !d_x.is_finite() || !d_y.is_finite() {
            return Err(invalid(format!("element spacings must be positive, got ({d_x}, {d_y})")));
        }
        Ok(Self { n_x, n_y, d_x, d_y })
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Complex array response with unit-modulus entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub DVector<Complex64>);

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<Complex64> {
        self.0
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SteeringVector) -> SteeringVector {
        SteeringVector(self.0.kronecker(&other.0))
    }

    /// Largest deviation of an entry's modulus from one.
    pub fn max_modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Element indices ⌊−N/2+1⌋, …, 0, …, ⌊N/2⌋ of an N-element line.
pub fn element_indices(n: usize) -> impl Iterator<Item = i64> + Clone {
    let start = -(((n as i64) - 1) / 2);
    start..start + n as i64
}

pub fn wavenumber(wavelength: f64) -> f64 {
    2.0 * std::f64::consts::PI / wavelength
}

/// ULA steering vector with entries e^{j·k_w·m·δ}.
pub fn ula_steering(delta: f64, n: usize, k_w: f64) -> SteeringVector {
    SteeringVector(DVector::from_iterator(
        n,
        element_indices(n).map(|m| Complex64::from_polar(1.0, k_w * m as f64 * delta)),
    ))
}

/// UPA response v(d_x cosφcosθ, n_x) ⊗ v(d_y cosφsinθ, n_y).
pub fn upa_response(angles: &DirectionAngles, cfg: &UpaConfig, k_w: f64) -> SteeringVector {
    let r = angles.unit_vector();
    upa_from_direction(&r, cfg, k_w)
}

fn upa_from_direction(r: &Vector3<f64>, cfg: &UpaConfig, k_w: f64) -> SteeringVector {
    ula_steering(cfg.d_x * r.x, cfg.n_x, k_w).kron(&ula_steering(cfg.d_y * r.y, cfg.n_y, k_w))
}

/// Rotation of the panel by η about its x axis.
pub fn rotation_matrix(eta: f64) -> Matrix3<f64> {
    let (s, c) = eta.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Path difference of element (m_x, m_y) of a panel tilted by η, relative
/// to the center element.
pub fn tilted_path_difference(angles: &DirectionAngles, eta: f64, m_x: i64, m_y: i64, d_x: f64, d_y: f64) -> f64 {
    let (st, ct) = angles.azimuth.sin_cos();
    let (sp, cp) = angles.elevation.sin_cos();
    let (se, ce) = eta.sin_cos();
    let (mx, my) = (m_x as f64, m_y as f64);
    mx * cp * ct * d_x + my * cp * st * ce * d_y + my * sp * se * d_y
}

/// Incident direction seen from the untilted panel after rotating the
/// source by −η: r̃ = R(−η)·r(ψ).
pub fn rotate_direction(angles: &DirectionAngles, eta: f64) -> Vector3<f64> {
    let (st, ct) = angles.azimuth.sin_cos();
    let (sp, cp) = angles.elevation.sin_cos();
    let (se, ce) = eta.sin_cos();
    Vector3::new(cp * ct, cp * st * ce + se * sp, sp * ce - cp * st * se)
}

/// Which hop of the cascade a direction belongs to at the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Satellite → surface; azimuth expected in (0, π).
    Incident,
    /// Surface → ground user; azimuth expected in (−π, 0).
    Departure,
}

impl Side {
    fn matches(self, sin_theta: f64) -> bool {
        match self {
            Side::Incident => sin_theta > SINGULAR_EPS,
            Side::Departure => sin_theta < -SINGULAR_EPS,
        }
    }
}

/// α = tan⁻¹(tanφ / sinθ) with the principal branch.
pub fn tilt_alpha(angles: &DirectionAngles) -> f64 {
    let b = angles.elevation.cos() * angles.azimuth.sin();
    let c = angles.elevation.sin();
    // atan(c/b) without dividing; the sign of b picks the principal branch
    (c * b.signum()).atan2(b.abs())
}

/// B = (cosφcosθ)² / ((cosφsinθ)² + sin²φ).
pub fn tilt_b(angles: &DirectionAngles) -> f64 {
    let r = angles.unit_vector();
    r.x * r.x / (r.y * r.y + r.z * r.z)
}

/// Tilt bounds: the panel keeps both the satellite and the ground user in
/// front of it for α_departure ≤ η ≤ α_incident.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltFeasibility {
    pub alpha_incident: f64,
    pub alpha_departure: f64,
    pub b_incident: f64,
    pub b_departure: f64,
}

impl TiltFeasibility {
    pub fn from_angles(incident: &DirectionAngles, departure: &DirectionAngles) -> Result<Self> {
        let out = Self {
            alpha_incident: tilt_alpha(incident),
            alpha_departure: tilt_alpha(departure),
            b_incident: tilt_b(incident),
            b_departure: tilt_b(departure),
        };
        if [out.alpha_incident, out.alpha_departure, out.b_incident, out.b_departure]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(out)
        } else {
            Err(invalid("direction lies along the panel x axis; tilt bounds are undefined"))
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.alpha_departure <= self.alpha_incident
    }
}

/// Elevation of a direction relative to the panel tilted by η.
///
/// Uses the α/B closed form when the azimuth lies in the side's expected
/// half-plane, otherwise falls back to arcsin of r̃'s out-of-plane
/// component.
pub fn modified_elevation(angles: &DirectionAngles, eta: f64, side: Side) -> f64 {
    let sin_theta = angles.azimuth.sin();
    let r = angles.unit_vector();
    let in_plane = r.y * r.y + r.z * r.z;
    if !side.matches(sin_theta) || in_plane < SINGULAR_EPS {
        return rotate_direction(angles, eta).z.clamp(-1.0, 1.0).asin();
    }
    let alpha = tilt_alpha(angles);
    let b = r.x * r.x / in_plane;
    let x = match side {
        Side::Incident => alpha - eta,
        Side::Departure => eta - alpha,
    };
    let c = x.cos();
    (x.sin() / (b + c * c).sqrt()).atan()
}

/// Azimuth of a direction relative to the panel tilted by η,
/// θ̃ = tan⁻¹(tanθ·cosη + tanφ·secθ·sinη), placed in the quadrant of
/// (r̃_x, r̃_y).
pub fn modified_azimuth(angles: &DirectionAngles, eta: f64) -> f64 {
    let (st, ct) = angles.azimuth.sin_cos();
    let cp = angles.elevation.cos();
    if ct.abs() < SINGULAR_EPS || cp.abs() < SINGULAR_EPS {
        let r = rotate_direction(angles, eta);
        return wrap_angle(r.y.atan2(r.x));
    }
    let (se, ce) = eta.sin_cos();
    let ratio = (st / ct) * ce + angles.elevation.tan() / ct * se;
    let base = ratio.atan();
    let theta = if ct > 0.0 {
        base
    } else if base <= 0.0 {
        // r̃_x < 0 and r̃_y >= 0
        base + std::f64::consts::PI
    } else {
        base - std::f64::consts::PI
    };
    wrap_angle(theta)
}

/// Modified (θ̃, φ̃) of a direction at the panel tilted by η.
pub fn modified_angles(angles: &DirectionAngles, eta: f64, side: Side) -> DirectionAngles {
    DirectionAngles::new(modified_azimuth(angles, eta), modified_elevation(angles, eta, side))
}

/// Response of the tilted panel built from the modified angles.
pub fn tilted_irs_response(
    angles: &DirectionAngles,
    eta: f64,
    cfg: &UpaConfig,
    k_w: f64,
    side: Side,
) -> Result<SteeringVector> {
    let modified = modified_angles(angles, eta, side);
    if !modified.azimuth.is_finite() || !modified.elevation.is_finite() {
        return Err(Error::InvalidInput(format!(
            "modified angles are not finite for {angles:?} at tilt {eta}"
        )));
    }
    Ok(upa_response(&modified, cfg, k_w))
}

/// Response of the tilted panel built element by element from the path
/// differences of the rotated element positions.
pub fn tilted_irs_response_by_path_difference(
    angles: &DirectionAngles,
    eta: f64,
    cfg: &UpaConfig,
    k_w: f64,
) -> SteeringVector {
    let mut entries = Vec::with_capacity(cfg.len());
    for m_x in element_indices(cfg.n_x) {
        for m_y in element_indices(cfg.n_y) {
            let dl = tilted_path_difference(angles, eta, m_x, m_y, cfg.d_x, cfg.d_y);
            entries.push(Complex64::from_polar(1.0, k_w * dl));
        }
    }
    SteeringVector(DVector::from_vec(entries))
}
