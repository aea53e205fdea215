//! Spherical-Earth geometry: coordinate conversion, circular-orbit
//! propagation, local array frames and angle extraction.
//!
//! The Earth is a non-rotating sphere. Cartesian vectors are Earth-centered
//! with the x axis through (0°N, 0°E) and z through the north pole.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

/// Earth-centered Cartesian position in meters.
pub type CartesianVector = Vector3<f64>;

/// A point on (or above) the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPoint {
    /// Radians, positive north.
    pub latitude: f64,
    /// Radians, positive east.
    pub longitude: f64,
    /// Distance from the Earth center in meters.
    pub radius: f64,
}

impl GeodeticPoint {
    pub fn new(latitude: f64, longitude: f64, radius: f64) -> Result<Self> {
        if !latitude.is_finite() || latitude.abs() > FRAC_PI_2 + 1e-15 {
            return Err(invalid(format!("latitude {latitude} rad outside [-pi/2, pi/2]")));
        }
        if !longitude.is_finite() {
            return Err(invalid("longitude must be finite"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            latitude: latitude.clamp(-FRAC_PI_2, FRAC_PI_2),
            longitude,
            radius,
        })
    }

    /// Convenience constructor taking degrees (east-positive longitude).
    pub fn from_degrees(lat_deg: f64, lon_deg: f64, radius: f64) -> Result<Self> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), radius)
    }

    pub fn to_cartesian(&self) -> CartesianVector {
        geodetic_to_cartesian(self)
    }

    /// Unit vectors (east, north, up) of the local tangent frame.
    ///
    /// East and north are undefined at the poles; callers that need them
    /// check for that first.
    pub fn enu_basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (slat, clat) = self.latitude.sin_cos();
        let (slon, clon) = self.longitude.sin_cos();
        let east = Vector3::new(-slon, clon, 0.0);
        let north = Vector3::new(-slat * clon, -slat * slon, clat);
        let up = Vector3::new(clat * clon, clat * slon, slat);
        (east, north, up)
    }
}

pub fn geodetic_to_cartesian(p: &GeodeticPoint) -> CartesianVector {
    let (slat, clat) = p.latitude.sin_cos();
    let (slon, clon) = p.longitude.sin_cos();
    Vector3::new(p.radius * clat * clon, p.radius * clat * slon, p.radius * slat)
}

/// Inverse of [`geodetic_to_cartesian`]. Longitude at the poles is pinned
/// to zero.
pub fn cartesian_to_geodetic(v: &CartesianVector) -> Result<GeodeticPoint> {
    let radius = v.norm();
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::ZeroVector("cartesian_to_geodetic"));
    }
    let horizontal = v.x.hypot(v.y);
    let latitude = v.z.atan2(horizontal);
    let longitude = if horizontal == 0.0 { 0.0 } else { v.y.atan2(v.x) };
    Ok(GeodeticPoint {
        latitude,
        longitude,
        radius,
    })
}

pub fn distance(a: &CartesianVector, b: &CartesianVector) -> f64 {
    (a - b).norm()
}

/// Compass bearing in radians, clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heading(pub f64);

impl Heading {
    pub const NORTH: Heading = Heading(0.0);
    pub const EAST: Heading = Heading(FRAC_PI_2);
    pub const SOUTH: Heading = Heading(PI);
    pub const WEST: Heading = Heading(-FRAC_PI_2);

    pub fn from_degrees(deg: f64) -> Self {
        Heading(deg.to_radians())
    }
}

/// Which way the array plane looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayFace {
    /// Boresight along the nadir, array plane horizontal (satellite).
    SkyFacing,
    /// Array plane vertical, boresight horizontal along the heading
    /// (ground user, building-mounted IRS).
    HorizonFacing,
}

/// Array-plane basis of a node: x horizontal, y vertical, z boresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: CartesianVector,
    pub x_axis: Vector3<f64>,
    pub y_axis: Vector3<f64>,
    pub z_axis: Vector3<f64>,
}

impl LocalFrame {
    /// Frame for a sky-facing array whose y axis follows `along`
    /// (typically the velocity). `along` is projected onto the tangent plane.
    pub fn sky_facing_along(origin: CartesianVector, along: Vector3<f64>) -> Result<Self> {
        let up = origin
            .try_normalize(0.0)
            .ok_or(Error::ZeroVector("sky_facing_along origin"))?;
        let tangent = along - up * along.dot(&up);
        let y_axis = tangent
            .try_normalize(1e-12 * along.norm().max(f64::MIN_POSITIVE))
            .ok_or_else(|| Error::DegenerateFrame("direction is parallel to the local vertical".into()))?;
        let z_axis = -up;
        Ok(Self {
            origin,
            x_axis: y_axis.cross(&z_axis),
            y_axis,
            z_axis,
        })
    }

    /// Components of a global direction in this frame's basis.
    pub fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(v.dot(&self.x_axis), v.dot(&self.y_axis), v.dot(&self.z_axis))
    }

    /// Global vector for local components.
    pub fn from_local(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.x_axis * local.x + self.y_axis * local.y + self.z_axis * local.z
    }

    /// Same orientation, origin moved by `offset` (global coordinates).
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            origin: self.origin + offset,
            ..*self
        }
    }

    /// Largest deviation from an orthonormal right-handed basis.
    pub fn orthonormality_error(&self) -> f64 {
        let (x, y, z) = (&self.x_axis, &self.y_axis, &self.z_axis);
        [
            x.dot(y).abs(),
            y.dot(z).abs(),
            z.dot(x).abs(),
            (x.norm() - 1.0).abs(),
            (y.norm() - 1.0).abs(),
            (z.norm() - 1.0).abs(),
            (x.cross(y) - z).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Builds the array frame of a node at `position`.
///
/// Horizon-facing: y is the local vertical, z the horizontal heading.
/// Sky-facing: z points to the nadir and y along the heading.
/// In both cases x = y × z.
pub fn make_local_frame(position: &GeodeticPoint, heading: Heading, face: ArrayFace) -> Result<LocalFrame> {
    if position.latitude.cos().abs() < 1e-12 {
        return Err(Error::DegenerateFrame("heading is undefined at a pole".into()));
    }
    let (east, north, up) = position.enu_basis();
    let (sb, cb) = heading.0.sin_cos();
    let horizontal = north * cb + east * sb;
    let (y_axis, z_axis) = match face {
        ArrayFace::HorizonFacing => (up, horizontal),
        ArrayFace::SkyFacing => (horizontal, -up),
    };
    Ok(LocalFrame {
        origin: position.to_cartesian(),
        x_axis: y_axis.cross(&z_axis),
        y_axis,
        z_axis,
    })
}

/// Azimuth/elevation pair of a direction in a local array frame.
///
/// The unit direction is r = (cosφ·cosθ, cosφ·sinθ, sinφ) with components
/// along the frame's (x, y, z) axes: φ is the angle off the array plane and
/// θ is measured in the plane from x toward y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionAngles {
    /// θ in (−π, π].
    pub azimuth: f64,
    /// φ in [−π/2, π/2].
    pub elevation: f64,
}

impl DirectionAngles {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// r(ψ) in local components.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.azimuth.sin_cos();
        let (sp, cp) = self.elevation.sin_cos();
        Vector3::new(cp * ct, cp * st, sp)
    }

    /// Angles of a local direction (need not be normalized).
    pub fn from_local_vector(v: &Vector3<f64>) -> Result<Self> {
        let d = v
            .try_normalize(0.0)
            .ok_or(Error::ZeroVector("DirectionAngles::from_local_vector"))?;
        let elevation = d.z.clamp(-1.0, 1.0).asin();
        Ok(Self {
            azimuth: wrap_angle(d.y.atan2(d.x)),
            elevation,
        })
    }
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Angles of `target` as seen from the frame origin.
pub fn direction_angles(frame: &LocalFrame, target: &CartesianVector) -> Result<DirectionAngles> {
    let d = target - frame.origin;
    if d.norm() == 0.0 {
        return Err(invalid("target coincides with the frame origin"));
    }
    DirectionAngles::from_local_vector(&frame.to_local(&d))
}

/// Circular orbit following the great circle from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitModel {
    pub orbit_radius: f64,
    pub speed: f64,
    pub start: GeodeticPoint,
    pub end: GeodeticPoint,
    start_dir: Vector3<f64>,
    normal_dir: Vector3<f64>,
    arc_angle: f64,
}

impl OrbitModel {
    pub fn new(
        earth_radius: f64,
        orbit_radius: f64,
        speed: f64,
        start: GeodeticPoint,
        end: GeodeticPoint,
    ) -> Result<Self> {
        if !(orbit_radius > earth_radius) {
            return Err(invalid(format!(
                "orbit radius {orbit_radius} m must exceed the Earth radius {earth_radius} m"
            )));
        }
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(invalid(format!("orbital speed must be positive, got {speed}")));
        }
        let a = start.to_cartesian().normalize();
        let b = end.to_cartesian().normalize();
        let cos_arc = a.dot(&b).clamp(-1.0, 1.0);
        if cos_arc > 1.0 - 1e-15 {
            return Err(invalid("orbit start and end coincide"));
        }
        let in_plane = b - a * cos_arc;
        if in_plane.norm() < 1e-12 {
            return Err(Error::AmbiguousArc);
        }
        Ok(Self {
            orbit_radius,
            speed,
            start,
            end,
            start_dir: a,
            normal_dir: in_plane.normalize(),
            arc_angle: cos_arc.acos(),
        })
    }

    pub fn angular_rate(&self) -> f64 {
        self.speed / self.orbit_radius
    }

    /// Time to fly from start to end.
    pub fn pass_duration(&self) -> f64 {
        self.arc_angle / self.angular_rate()
    }

    pub fn position(&self, t: f64) -> Result<CartesianVector> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("orbit time must be finite and non-negative, got {t}")));
        }
        let (s, c) = (self.angular_rate() * t).sin_cos();
        Ok((self.start_dir * c + self.normal_dir * s) * self.orbit_radius)
    }

    /// Unit velocity direction at time `t`.
    pub fn velocity_direction(&self, t: f64) -> Result<Vector3<f64>> {
        self.position(t)?;
        let (s, c) = (self.angular_rate() * t).sin_cos();
        Ok(self.normal_dir * c - self.start_dir * s)
    }

    /// Sky-facing satellite frame at time `t`, y axis along the velocity.
    pub fn frame(&self, t: f64) -> Result<LocalFrame> {
        LocalFrame::sky_facing_along(self.position(t)?, self.velocity_direction(t)?)
    }
}

pub fn propagate_orbit(orbit: &OrbitModel, t: f64) -> Result<CartesianVector> {
    orbit.position(t)
}
