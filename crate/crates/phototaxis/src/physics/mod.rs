//! Forward simulation of actuated mass-spring bodies over procedural
//! terrain, recorded step by step so the reverse pass can replay it.

mod heightmap;
mod sim;

pub use heightmap::{HeightMap, TerrainField, CENTRAL_DIFF_EPS, HEIGHTMAP_N, TERRAIN_EXTENT_M};
pub use sim::{
    rollout, sense_light, spring_forces, step, step_audited, ContactAudit, ContactRecord,
    Recording, RolloutOutput, RolloutRecord, RolloutSummary, SimBody, SimState, StepAudit,
    StepRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("light placed within {0} m of the robot's initial center of mass")]
    DegenerateTarget(f64),
    #[error("phenotype has no masses")]
    EmptyBody,
    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },
}

/// Integrator and material constants.
///
/// Defaults satisfy the explicit-integration stability bound
/// `dt * sqrt(k / node_mass) < 2` with room for the stiffer collective
/// lattice modes, whose effective stiffness is roughly an order of
/// magnitude above a single spring's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Timestep, seconds.
    pub dt: f64,
    /// Steps per rollout.
    pub steps: usize,
    /// Spring stiffness, N/m.
    pub stiffness: f64,
    /// Rest lengths actuate within `(1 ± actuation_bound) * rest`.
    pub actuation_bound: f64,
    /// Gravitational acceleration along -z, m/s^2.
    pub gravity: f64,
    /// Mass per lattice point, kg.
    pub node_mass: f64,
    /// Per-step velocity retention factor.
    pub velocity_damping: f64,
    /// Bisection iterations when resolving a contact.
    pub contact_bisection_iters: usize,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            dt: 0.004,
            steps: 1000,
            stiffness: 1.5e4,
            actuation_bound: 0.2,
            gravity: 9.81,
            node_mass: 1.0,
            velocity_damping: 0.999,
            contact_bisection_iters: 16,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.stiffness > 0.0 && self.node_mass > 0.0) {
            return Err(SimError::BadConfig(
                "dt, stiffness, and node_mass must be positive".into(),
            ));
        }
        let omega_dt = self.dt * (self.stiffness / self.node_mass).sqrt();
        if omega_dt >= 2.0 {
            return Err(SimError::BadConfig(format!(
                "dt * sqrt(stiffness / node_mass) = {omega_dt:.3} breaches the stability bound 2"
            )));
        }
        if !(self.actuation_bound > 0.0 && self.actuation_bound < 1.0) {
            return Err(SimError::BadConfig(
                "actuation_bound must lie in (0, 1)".into(),
            ));
        }
        if !(self.velocity_damping > 0.0 && self.velocity_damping <= 1.0) {
            return Err(SimError::BadConfig(
                "velocity_damping must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A terrain plus the light the robot should reach.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub terrain: HeightMap,
    /// Light source; its z always equals the terrain height at its x-y.
    pub light: [f64; 3],
}

impl Environment {
    /// Place a light at `(x, y)` on the terrain surface.
    pub fn with_light_on_terrain(terrain: HeightMap, x: f64, y: f64) -> Environment {
        let z = terrain.height_at(x, y);
        Environment {
            terrain,
            light: [x, y, z],
        }
    }
}
