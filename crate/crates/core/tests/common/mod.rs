#![allow(dead_code)]

use leo_irs::array::TiltFeasibility;
use leo_irs::channel::LinkGeometry;
use leo_irs::geo::{cartesian_to_geodetic, make_local_frame, ArrayFace, GeodeticPoint, Heading, LocalFrame};
use leo_irs::sim::{Deployment, SimulationConfig, ORBIT_ALTITUDE};
use nalgebra::Vector3;
use rand::Rng;

pub const SEED: u64 = 20_240_601;

pub fn reference() -> SimulationConfig {
    SimulationConfig::default()
}

/// A satellite somewhere south of the surface at orbit height, a user
/// somewhere in front of the surface, both with feasible tilt.
pub fn random_leo_geometry<R: Rng>(cfg: &SimulationConfig, rng: &mut R) -> (LocalFrame, Deployment, LinkGeometry) {
    let base = cfg.deployment().unwrap();
    loop {
        let lat = rng.random_range(40.0..51.3);
        let lon = rng.random_range(-15.0..15.0);
        let p = GeodeticPoint::from_degrees(lat, lon, cfg.earth_radius + ORBIT_ALTITUDE).unwrap();
        let sat = make_local_frame(&p, Heading(rng.random_range(-3.1..3.1)), ArrayFace::SkyFacing).unwrap();
        let offset = Vector3::new(rng.random_range(-1000.0..1000.0), -120.0, rng.random_range(100.0..1000.0));
        let gu = base.gu.translated(&(base.irs.origin + base.irs.from_local(&offset) - base.gu.origin));
        let deployment = Deployment { irs: base.irs, gu };
        let geom = LinkGeometry::from_frames(&sat, &deployment.irs, &deployment.gu).unwrap();
        let feas = TiltFeasibility::from_angles(&geom.irs_incident, &geom.irs_departure).unwrap();
        if feas.is_feasible() {
            return (sat, deployment, geom);
        }
    }
}

/// Point on the orbit sphere seen from the surface centre along local
/// direction `dir`.
pub fn orbit_point_along(cfg: &SimulationConfig, irs: &LocalFrame, dir: Vector3<f64>) -> GeodeticPoint {
    let u = irs.from_local(&dir.normalize());
    let o = irs.origin;
    let r = cfg.earth_radius + ORBIT_ALTITUDE;
    let b = o.dot(&u);
    let s = -b + (b * b - o.norm_squared() + r * r).sqrt();
    cartesian_to_geodetic(&(o + u * s)).unwrap()
}
