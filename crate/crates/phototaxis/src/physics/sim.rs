//! Mass-spring integration: semi-implicit Euler with bisected contacts and
//! a velocity-level friction model.

use serde::{Deserialize, Serialize};

use super::heightmap::TerrainField;
use super::{Environment, SimConfig, SimError};
use crate::controller::{
    cpg_signals, forward_active, ControllerParams, CpgConfig, ForwardStash, CPG_WAVES, INPUT_DIM,
    N_SENSORS,
};
use crate::math::{add, axpy, dot3, norm3, scale, sub, Real, V3};
use crate::morphospace::Phenotype;

/// Speed above which a rollout is declared divergent, m/s.
const MAX_SPEED: f64 = 1e3;
/// Squared-distance floor in the inverse-square sensor law.
const SENSE_D2_FLOOR: f64 = 1e-6;
/// Springs shorter than this contribute no force.
const DEGENERATE_SPRING_M: f64 = 1e-9;
/// Rollouts reject light targets closer than this to the initial center of
/// mass.
const MIN_D0_M: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
struct BodySpring<T> {
    a: u32,
    b: u32,
    rest: T,
}

/// A phenotype lowered to the simulation scalar type.
#[derive(Clone, Debug)]
pub struct SimBody<T> {
    /// Global mass site per local mass (ascending).
    pub mass_sites: Vec<usize>,
    /// Global spring site per local spring (ascending).
    pub spring_sites: Vec<usize>,
    springs: Vec<BodySpring<T>>,
    /// Rest positions on the lattice, before the grounding shift.
    pub rest_positions: Vec<V3<T>>,
}

impl<T: Real> SimBody<T> {
    pub fn from_phenotype(p: &Phenotype) -> SimBody<T> {
        SimBody {
            mass_sites: p.masses.iter().map(|m| m.site).collect(),
            spring_sites: p.springs.iter().map(|s| s.site).collect(),
            springs: p
                .springs
                .iter()
                .map(|s| BodySpring {
                    a: s.a as u32,
                    b: s.b as u32,
                    rest: T::of(s.rest),
                })
                .collect(),
            rest_positions: p
                .masses
                .iter()
                .map(|m| [T::of(m.pos[0]), T::of(m.pos[1]), T::of(m.pos[2])])
                .collect(),
        }
    }

    /// Assemble a body directly from parts; useful for focused physics
    /// tests (single masses, bare spring pairs).
    pub fn from_raw_parts(
        rest_positions: Vec<V3<T>>,
        springs: Vec<(usize, usize, T)>,
        mass_sites: Vec<usize>,
        spring_sites: Vec<usize>,
    ) -> SimBody<T> {
        assert_eq!(rest_positions.len(), mass_sites.len());
        assert_eq!(springs.len(), spring_sites.len());
        SimBody {
            mass_sites,
            spring_sites,
            springs: springs
                .into_iter()
                .map(|(a, b, rest)| BodySpring {
                    a: a as u32,
                    b: b as u32,
                    rest,
                })
                .collect(),
            rest_positions,
        }
    }

    pub fn n_masses(&self) -> usize {
        self.rest_positions.len()
    }

    pub fn n_springs(&self) -> usize {
        self.springs.len()
    }

    /// Endpoints and rest length of local spring `s`.
    pub fn spring(&self, s: usize) -> (usize, usize, T) {
        let sp = self.springs[s];
        (sp.a as usize, sp.b as usize, sp.rest)
    }
}

/// Positions and velocities of every mass at a time index.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState<T> {
    pub positions: Vec<V3<T>>,
    pub velocities: Vec<V3<T>>,
    pub step: usize,
}

impl<T: Real> SimState<T> {
    /// At rest on the body's rest positions.
    pub fn at_rest(body: &SimBody<T>) -> SimState<T> {
        SimState {
            positions: body.rest_positions.clone(),
            velocities: vec![[T::zero(); 3]; body.n_masses()],
            step: 0,
        }
    }

    pub fn center_of_mass(&self) -> V3<T> {
        center_of_mass(&self.positions)
    }
}

pub(crate) fn center_of_mass<T: Real>(positions: &[V3<T>]) -> V3<T> {
    let mut c = [T::zero(); 3];
    for p in positions {
        c = add(c, *p);
    }
    scale(c, T::one() / T::of(positions.len() as f64))
}

pub(crate) struct StepConsts<T> {
    dt: T,
    stiffness: T,
    actuation_bound: T,
    gravity: T,
    inv_mass: T,
    damping: T,
    bisect_iters: usize,
    max_speed: T,
}

impl<T: Real> StepConsts<T> {
    fn new(cfg: &SimConfig) -> StepConsts<T> {
        StepConsts {
            dt: T::of(cfg.dt),
            stiffness: T::of(cfg.stiffness),
            actuation_bound: T::of(cfg.actuation_bound),
            gravity: T::of(cfg.gravity),
            inv_mass: T::of(1.0 / cfg.node_mass),
            damping: T::of(cfg.velocity_damping),
            bisect_iters: cfg.contact_bisection_iters,
            max_speed: T::of(MAX_SPEED),
        }
    }
}

/// Mean-centered inverse-square light readings.
///
/// Active masses read `1 / max(d^2, 1e-6)` minus the mean over active
/// sensors; the returned 245-vector is exactly zero at absent sites.
pub fn sense_light<T: Real>(
    positions: &[V3<T>],
    mass_sites: &[usize],
    light: V3<T>,
) -> Result<Vec<T>, SimError> {
    if positions.is_empty() {
        return Err(SimError::EmptyBody);
    }
    let mut readings = vec![T::zero(); N_SENSORS];
    sense_into(positions, mass_sites, light, &mut readings);
    Ok(readings)
}

pub(crate) fn sense_into<T: Real>(
    positions: &[V3<T>],
    mass_sites: &[usize],
    light: V3<T>,
    out: &mut [T],
) {
    let floor = T::of(SENSE_D2_FLOOR);
    let mut sum = T::zero();
    for (p, site) in positions.iter().zip(mass_sites) {
        let d = sub(light, *p);
        let d2 = dot3(d, d).max(floor);
        let raw = T::one() / d2;
        out[*site] = raw;
        sum += raw;
    }
    let mean = sum / T::of(positions.len() as f64);
    for site in mass_sites {
        out[*site] -= mean;
    }
}

/// Per-mass spring forces under the modulated Hooke law
/// `F = k (L - rest * (1 + bound * a))` along the spring axis, equal and
/// opposite on the endpoints. Springs shorter than 1e-9 m contribute
/// nothing.
pub fn spring_forces<T: Real>(
    body: &SimBody<T>,
    positions: &[V3<T>],
    actuations: &[T],
    cfg: &SimConfig,
) -> Vec<V3<T>> {
    let consts = StepConsts::new(cfg);
    let mut forces = vec![[T::zero(); 3]; positions.len()];
    accumulate_spring_forces(body, positions, actuations, &consts, &mut forces);
    forces
}

fn accumulate_spring_forces<T: Real>(
    body: &SimBody<T>,
    positions: &[V3<T>],
    actuations: &[T],
    consts: &StepConsts<T>,
    forces: &mut [V3<T>],
) {
    let guard = T::of(DEGENERATE_SPRING_M);
    for (s, spring) in body.springs.iter().enumerate() {
        let (a, b) = (spring.a as usize, spring.b as usize);
        let d = sub(positions[b], positions[a]);
        let len = norm3(d);
        if len < guard {
            continue;
        }
        let rest = spring.rest * (T::one() + consts.actuation_bound * actuations[s]);
        let coeff = consts.stiffness * (len - rest) / len;
        let f = scale(d, coeff);
        forces[a] = add(forces[a], f);
        forces[b] = sub(forces[b], f);
    }
}

/// Frozen geometry of one resolved contact, kept for the reverse pass.
#[derive(Clone, Copy, Debug)]
pub struct ContactRecord<T> {
    pub mass: usize,
    /// Bisected time of impact within the step, seconds.
    pub tau: T,
    /// Whether the post-slide position had to be lifted back to the surface.
    pub z_clamped: bool,
}

/// Diagnostic velocities around one contact, for invariant checks.
#[derive(Clone, Copy, Debug)]
pub struct ContactAudit<T> {
    pub mass: usize,
    pub normal_speed_before: T,
    pub tangent_speed_before: T,
    pub tangent_speed_after: T,
}

/// Per-step contact diagnostics.
#[derive(Clone, Debug, Default)]
pub struct StepAudit<T> {
    pub contacts: Vec<ContactAudit<T>>,
}

pub(crate) struct ContactResolution<T> {
    pub position: V3<T>,
    pub velocity: V3<T>,
    pub tau: T,
    pub z_clamped: bool,
    pub audit: ContactAudit<T>,
}

/// Resolve a mass whose candidate update penetrates the terrain.
///
/// Three phases: bisect the impact time on `[0, dt]` and advance to the
/// contact point; split the velocity against the contact normal; negate the
/// tangential part with its magnitude clamped to the normal part's and drop
/// the normal part, then spend the remaining time sliding along the tangent.
/// A final lift keeps curved terrain from swallowing the slide.
pub(crate) fn resolve_contact<T: Real>(
    terrain: &TerrainField<T>,
    x: V3<T>,
    v: V3<T>,
    dt: T,
    iters: usize,
    mass: usize,
) -> ContactResolution<T> {
    let half = T::of(0.5);
    let mut lo = T::zero();
    let mut hi = dt;
    for _ in 0..iters {
        let mid = (lo + hi) * half;
        let p = add(x, scale(v, mid));
        if p[2] - terrain.value(p[0], p[1]) < T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let tau = lo;
    let contact = add(x, scale(v, tau));
    let normal = terrain.normal(contact[0], contact[1]);

    let c = dot3(v, normal);
    let v_tan = sub(v, scale(normal, c));
    let tangent_speed = norm3(v_tan);
    let normal_speed = c.abs();
    let new_velocity = if tangent_speed > T::zero() {
        scale(v_tan, -(tangent_speed.min(normal_speed)) / tangent_speed)
    } else {
        [T::zero(); 3]
    };

    let mut position = add(contact, scale(new_velocity, dt - tau));
    let floor = terrain.value(position[0], position[1]);
    let z_clamped = position[2] < floor;
    if z_clamped {
        position[2] = floor;
    }

    ContactResolution {
        position,
        velocity: new_velocity,
        tau,
        z_clamped,
        audit: ContactAudit {
            mass,
            normal_speed_before: normal_speed,
            tangent_speed_before: tangent_speed,
            tangent_speed_after: norm3(new_velocity),
        },
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into<T: Real>(
    body: &SimBody<T>,
    terrain: &TerrainField<T>,
    consts: &StepConsts<T>,
    x: &[V3<T>],
    v: &[V3<T>],
    actuations: &[T],
    forces: &mut Vec<V3<T>>,
    x_out: &mut Vec<V3<T>>,
    v_out: &mut Vec<V3<T>>,
    vprime_out: &mut Vec<V3<T>>,
    contacts: &mut Vec<ContactRecord<T>>,
    mut audit: Option<&mut StepAudit<T>>,
) -> bool {
    let n = x.len();
    forces.clear();
    forces.resize(n, [T::zero(); 3]);
    x_out.resize(n, [T::zero(); 3]);
    v_out.resize(n, [T::zero(); 3]);
    vprime_out.resize(n, [T::zero(); 3]);
    contacts.clear();

    accumulate_spring_forces(body, x, actuations, consts, forces);

    let mut ok = true;
    for i in 0..n {
        let mut accel = scale(forces[i], consts.inv_mass);
        accel[2] -= consts.gravity;
        let mut vp = v[i];
        axpy(&mut vp, consts.dt, accel);
        let vp = scale(vp, consts.damping);
        vprime_out[i] = vp;

        let cand = add(x[i], scale(vp, consts.dt));
        if cand[2] - terrain.value(cand[0], cand[1]) < T::zero() {
            let res = resolve_contact(terrain, x[i], vp, consts.dt, consts.bisect_iters, i);
            x_out[i] = res.position;
            v_out[i] = res.velocity;
            contacts.push(ContactRecord {
                mass: i,
                tau: res.tau,
                z_clamped: res.z_clamped,
            });
            if let Some(a) = audit.as_deref_mut() {
                a.contacts.push(res.audit);
            }
        } else {
            x_out[i] = cand;
            v_out[i] = vp;
        }

        let p = x_out[i];
        let speed = norm3(v_out[i]);
        if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite())
            || !speed.is_finite()
            || speed > consts.max_speed
        {
            ok = false;
        }
    }
    ok
}

/// Advance one timestep: damped semi-implicit Euler plus contact
/// resolution. Fails with [`SimError::Diverged`] on non-finite state or
/// speeds above 1e3 m/s.
pub fn step<T: Real>(
    body: &SimBody<T>,
    terrain: &TerrainField<T>,
    cfg: &SimConfig,
    state: &SimState<T>,
    actuations: &[T],
) -> Result<SimState<T>, SimError> {
    step_audited(body, terrain, cfg, state, actuations).map(|(s, _)| s)
}

/// [`step`] plus contact diagnostics.
pub fn step_audited<T: Real>(
    body: &SimBody<T>,
    terrain: &TerrainField<T>,
    cfg: &SimConfig,
    state: &SimState<T>,
    actuations: &[T],
) -> Result<(SimState<T>, StepAudit<T>), SimError> {
    let consts = StepConsts::new(cfg);
    let mut forces = Vec::new();
    let mut x_out = Vec::new();
    let mut v_out = Vec::new();
    let mut vprime = Vec::new();
    let mut contacts = Vec::new();
    let mut audit = StepAudit::default();
    let ok = step_into(
        body,
        terrain,
        &consts,
        &state.positions,
        &state.velocities,
        actuations,
        &mut forces,
        &mut x_out,
        &mut v_out,
        &mut vprime,
        &mut contacts,
        Some(&mut audit),
    );
    if !ok {
        return Err(SimError::Diverged { step: state.step });
    }
    Ok((
        SimState {
            positions: x_out,
            velocities: v_out,
            step: state.step + 1,
        },
        audit,
    ))
}

/// What a rollout keeps while it runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recording {
    /// Loss only.
    None,
    /// Per-step positions, for trajectory export.
    Positions,
    /// Everything the reverse pass needs.
    Full,
}

/// Scalar outcome of a rollout.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RolloutSummary {
    /// Initial center-of-mass distance to the light.
    pub d0: f64,
    /// Final center-of-mass distance to the light.
    pub d1: f64,
    /// `d1 / d0`; 1.0 when the rollout diverged.
    pub loss: f64,
    pub diverged: bool,
    pub steps_run: usize,
}

/// Everything saved about one step of a recorded rollout.
#[derive(Clone, Debug)]
pub struct StepRecord<T> {
    /// Positions at the start of the step.
    pub x: Vec<V3<T>>,
    /// Velocities at the start of the step.
    pub v: Vec<V3<T>>,
    /// Velocities after force and damping, before contact handling.
    pub vprime: Vec<V3<T>>,
    /// Controller input (sensors then CPG).
    pub input: Vec<T>,
    /// Controller intermediates.
    pub ctrl: ForwardStash<T>,
    /// Contacts resolved this step, with frozen impact times.
    pub contacts: Vec<ContactRecord<T>>,
}

/// The saved forward trajectory a reverse pass replays.
pub struct RolloutRecord<T> {
    pub steps: Vec<StepRecord<T>>,
    pub final_positions: Vec<V3<T>>,
    pub light: V3<T>,
    pub terrain: TerrainField<T>,
    pub d0: T,
    pub d1: T,
}

pub struct RolloutOutput<T> {
    pub summary: RolloutSummary,
    pub record: Option<RolloutRecord<T>>,
    /// Positions per step (initial state included) when requested.
    pub trace: Option<Vec<Vec<V3<T>>>>,
}

/// Run `cfg.steps` iterations of sense -> control -> step.
///
/// The body starts at its rest positions shifted vertically into contact
/// with the terrain. Divergence is not an error: the summary comes back
/// flagged with loss 1.0 and no record, and the caller leaves the sample
/// out of gradient averages.
pub fn rollout<T: Real>(
    body: &SimBody<T>,
    env: &Environment,
    params: &ControllerParams<T>,
    cpg: &CpgConfig,
    cfg: &SimConfig,
    recording: Recording,
) -> Result<RolloutOutput<T>, SimError> {
    if body.n_masses() == 0 {
        return Err(SimError::EmptyBody);
    }
    let consts = StepConsts::<T>::new(cfg);
    let terrain = TerrainField::<T>::new(&env.terrain);
    let light = [T::of(env.light[0]), T::of(env.light[1]), T::of(env.light[2])];

    // Grounding shift: rest the body on the terrain surface.
    let mut x: Vec<V3<T>> = body.rest_positions.clone();
    let mut shift = T::of(f64::NEG_INFINITY);
    for p in &x {
        let gap = terrain.value(p[0], p[1]) - p[2];
        shift = shift.max(gap);
    }
    for p in x.iter_mut() {
        p[2] += shift;
    }
    let mut v: Vec<V3<T>> = vec![[T::zero(); 3]; body.n_masses()];

    let com0 = center_of_mass(&x);
    let d0 = norm3(sub(com0, light));
    if d0.to_f64_lossless() <= MIN_D0_M {
        return Err(SimError::DegenerateTarget(d0.to_f64_lossless()));
    }

    let mut input = vec![T::zero(); INPUT_DIM];
    let mut actuations = vec![T::zero(); body.n_springs()];
    let mut forces: Vec<V3<T>> = Vec::new();
    let mut x_next: Vec<V3<T>> = Vec::new();
    let mut v_next: Vec<V3<T>> = Vec::new();
    let mut vprime: Vec<V3<T>> = Vec::new();
    let mut contacts: Vec<ContactRecord<T>> = Vec::new();

    let mut steps: Vec<StepRecord<T>> = Vec::new();
    let mut trace: Option<Vec<Vec<V3<T>>>> = match recording {
        Recording::Positions => Some(vec![x.clone()]),
        _ => None,
    };

    for t in 0..cfg.steps {
        sense_into(&x, &body.mass_sites, light, &mut input[..N_SENSORS]);
        let cpg_vals = cpg_signals(t as f64 * cfg.dt, cpg);
        for m in 0..CPG_WAVES {
            input[N_SENSORS + m] = T::of(cpg_vals[m]);
        }

        let mut stash = if recording == Recording::Full {
            Some(ForwardStash::default())
        } else {
            None
        };
        forward_active(
            params,
            &input,
            &body.spring_sites,
            &mut actuations,
            stash.as_mut(),
        );

        let ok = step_into(
            body,
            &terrain,
            &consts,
            &x,
            &v,
            &actuations,
            &mut forces,
            &mut x_next,
            &mut v_next,
            &mut vprime,
            &mut contacts,
            None,
        );
        if !ok {
            return Ok(RolloutOutput {
                summary: RolloutSummary {
                    d0: d0.to_f64_lossless(),
                    d1: d0.to_f64_lossless(),
                    loss: 1.0,
                    diverged: true,
                    steps_run: t,
                },
                record: None,
                trace: None,
            });
        }

        if recording == Recording::Full {
            steps.push(StepRecord {
                x: x.clone(),
                v: v.clone(),
                vprime: vprime.clone(),
                input: input.clone(),
                ctrl: stash.unwrap(),
                contacts: contacts.clone(),
            });
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut v, &mut v_next);
        if let Some(trace) = trace.as_mut() {
            trace.push(x.clone());
        }
    }

    let d1 = norm3(sub(center_of_mass(&x), light));
    let summary = RolloutSummary {
        d0: d0.to_f64_lossless(),
        d1: d1.to_f64_lossless(),
        loss: (d1 / d0).to_f64_lossless(),
        diverged: false,
        steps_run: cfg.steps,
    };
    let record = if recording == Recording::Full {
        Some(RolloutRecord {
            steps,
            final_positions: x,
            light,
            terrain,
            d0,
            d1,
        })
    } else {
        None
    };
    Ok(RolloutOutput {
        summary,
        record,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
#[test]
fn debug_settle_trace() {
    use crate::controller::{ControllerParams, CpgConfig, TENSORS};
    use crate::math::*;
    use crate::morphospace::{express, Genotype};
    use crate::physics::*;
    let g = Genotype::from_voxels([(2, 2, 0)]);
    let body = SimBody::<f64>::from_phenotype(&express(&g).unwrap());
    let env = Environment::with_light_on_terrain(HeightMap::flat(0.0), 1.8, 0.3);
    let mut p = ControllerParams::<f64>::init(0);
    for t in [12, 13] {
        let spec = TENSORS[t];
        p.as_mut_slice()[spec.offset..spec.offset + spec.len()].fill(0.0);
    }
    let cfg = SimConfig::default();
    let out = rollout(&body, &env, &p, &CpgConfig::default(), &cfg, Recording::Positions).unwrap();
    let trace = out.trace.unwrap();
    for (t, frame) in trace.iter().enumerate() {
        if t % 50 == 0 || t == trace.len() - 1 {
            let com = frame.iter().fold([0.0; 3], |acc, p| add(acc, *p));
            let com = scale(com, 1.0 / frame.len() as f64);
            // spring PE
            let mut pe = 0.0;
            for s in 0..body.n_springs() {
                let (a, b, rest) = body.spring(s);
                let d = sub(frame[b], frame[a]);
                let l = norm3(d);
                pe += 0.5 * cfg.stiffness * (l - rest).powi(2);
            }
            let gpe: f64 = frame.iter().map(|p| cfg.node_mass * cfg.gravity * p[2]).sum();
            // velocity unavailable from trace; report energy proxy
            println!("t={t} com_z={:.5} pe={pe:.4} gpe={gpe:.4}", com[2]);
        }
    }
    println!("loss={} d0={} d1={}", out.summary.loss, out.summary.d0, out.summary.d1);
}

    use crate::controller::TENSORS;
    use crate::morphospace::{express, Genotype};
    use crate::physics::HeightMap;

    fn zero_output_params<T: Real>() -> ControllerParams<T> {
        let mut p = ControllerParams::<T>::init(0);
        for t in [12, 13] {
            let spec = TENSORS[t];
            p.as_mut_slice()[spec.offset..spec.offset + spec.len()].fill(T::zero());
        }
        p
    }

    fn voxel_body() -> SimBody<f64> {
        let g = Genotype::from_voxels([(2, 2, 0)]);
        SimBody::from_phenotype(&express(&g).unwrap())
    }

    fn lone_mass(pos: V3<f64>) -> SimBody<f64> {
        SimBody::from_raw_parts(vec![pos], vec![], vec![0], vec![])
    }

    fn flat_field(h: f64) -> TerrainField<f64> {
        TerrainField::new(&HeightMap::flat(h))
    }

    fn env_with_light(x: f64, y: f64) -> Environment {
        Environment::with_light_on_terrain(HeightMap::flat(0.0), x, y)
    }

    #[test]
    fn hooke_force_magnitudes() {
        let cfg = SimConfig::default();
        // Two masses 0.12 m apart with rest 0.1: magnitude k * 0.02 = 300 N,
        // pulling the endpoints together.
        let body =
            SimBody::<f64>::from_raw_parts(vec![[0.0; 3], [0.12, 0.0, 0.0]], vec![(0, 1, 0.1)], vec![0, 1], vec![0]);
        let f = spring_forces(&body, &body.rest_positions, &[0.0], &cfg);
        assert!((f[0][0] - 300.0).abs() < 1e-9);
        assert!((f[1][0] + 300.0).abs() < 1e-9);

        // At rest length: zero.
        let body =
            SimBody::<f64>::from_raw_parts(vec![[0.0; 3], [0.1, 0.0, 0.0]], vec![(0, 1, 0.1)], vec![0, 1], vec![0]);
        let f = spring_forces(&body, &body.rest_positions, &[0.0], &cfg);
        assert_eq!(f[0], [0.0; 3]);

        // Full positive actuation at rest: modulated rest 0.12, so the
        // spring pushes the endpoints apart with magnitude 300 N.
        let f = spring_forces(&body, &body.rest_positions, &[1.0], &cfg);
        assert!((f[0][0] + 300.0).abs() < 1e-9);
        assert!((f[1][0] - 300.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_spring_contributes_nothing() {
        let cfg = SimConfig::default();
        let body = SimBody::from_raw_parts(
            vec![[0.0; 3], [0.0, 0.0, 1e-12]],
            vec![(0, 1, 0.1)],
            vec![0, 1],
            vec![0],
        );
        let f = spring_forces(&body, &body.rest_positions, &[0.0], &cfg);
        assert_eq!(f[0], [0.0; 3]);
        assert_eq!(f[1], [0.0; 3]);
    }

    #[test]
    fn unsupported_mass_single_step() {
        let cfg = SimConfig::default();
        let body = lone_mass([0.0, 0.0, 5.0]);
        let state = SimState::at_rest(&body);
        let next = step(&body, &flat_field(0.0), &cfg, &state, &[]).unwrap();
        let expect_vz = -cfg.velocity_damping * cfg.gravity * cfg.dt;
        assert!((next.velocities[0][2] - expect_vz).abs() < 1e-12);
        assert!((next.positions[0][2] - (5.0 + cfg.dt * expect_vz)).abs() < 1e-12);
    }

    #[test]
    fn undamped_force_free_motion_is_ballistic() {
        let cfg = SimConfig {
            gravity: 0.0,
            velocity_damping: 1.0,
            ..SimConfig::default()
        };
        let body = lone_mass([0.0, 0.0, 5.0]);
        let mut state = SimState::at_rest(&body);
        state.velocities[0] = [0.3, -0.2, 0.1];
        let next = step(&body, &flat_field(0.0), &cfg, &state, &[]).unwrap();
        for c in 0..3 {
            assert_eq!(next.velocities[0][c], state.velocities[0][c]);
            assert_eq!(
                next.positions[0][c],
                state.positions[0][c] + cfg.dt * state.velocities[0][c]
            );
        }
    }

    #[test]
    fn resting_mass_stays_put() {
        let cfg = SimConfig::default();
        let body = lone_mass([0.0, 0.0, 0.0]);
        let state = SimState::at_rest(&body);
        let next = step(&body, &flat_field(0.0), &cfg, &state, &[]).unwrap();
        assert!(norm3(sub(next.positions[0], state.positions[0])) < 1e-6);
        assert_eq!(next.velocities[0], [0.0; 3]);
    }

    #[test]
    fn falling_mass_lands_without_bounce() {
        let cfg = SimConfig::default();
        let body = lone_mass([0.0, 0.0, 0.001]);
        let mut state = SimState::at_rest(&body);
        state.velocities[0] = [0.0, 0.0, -1.0];
        let (next, audit) = step_audited(&body, &flat_field(0.0), &cfg, &state, &[]).unwrap();
        assert!(next.positions[0][2].abs() <= 1e-4);
        assert_eq!(next.velocities[0][2], 0.0);
        assert_eq!(audit.contacts.len(), 1);
    }

    #[test]
    fn mass_above_terrain_is_untouched_by_contact_handling() {
        let cfg = SimConfig {
            gravity: 0.0,
            velocity_damping: 1.0,
            ..SimConfig::default()
        };
        let body = lone_mass([0.0, 0.0, 2.0]);
        let mut state = SimState::at_rest(&body);
        state.velocities[0] = [0.5, 0.0, 0.0];
        let (next, audit) = step_audited(&body, &flat_field(0.0), &cfg, &state, &[]).unwrap();
        assert!(audit.contacts.is_empty());
        assert_eq!(next.positions[0], [0.5 * cfg.dt, 0.0, 2.0]);
    }

    #[test]
    fn friction_negates_and_clamps_tangential_velocity() {
        let terrain = flat_field(0.0);
        let res = resolve_contact(&terrain, [0.0, 0.0, 1e-4], [1.0, 0.0, -0.2], 0.004, 16, 0);
        // Tangential speed 1.0, normal approach 0.2: reversed and clamped.
        assert!((res.velocity[0] + 0.2).abs() < 1e-9);
        assert_eq!(res.velocity[2], 0.0);
        assert!(res.audit.tangent_speed_after <= res.audit.normal_speed_before + 1e-12);

        // Slow slide, fast approach: tangential part merely reverses.
        let res = resolve_contact(&terrain, [0.0, 0.0, 1e-4], [0.1, 0.0, -0.5], 0.004, 16, 0);
        assert!((res.velocity[0] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn sensor_readings_mean_centered() {
        // Equidistant sensors all read zero.
        let positions = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
        let r = sense_light::<f64>(&positions, &[3, 9], [0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r[3], 0.0);
        assert_eq!(r[9], 0.0);

        // Distances 1 and 2: readings 1 and 1/4 centered to +-0.375.
        let positions = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let r = sense_light::<f64>(&positions, &[0, 1], [0.0, 0.0, 0.0]).unwrap();
        assert!((r[0] - 0.375).abs() < 1e-12);
        assert!((r[1] + 0.375).abs() < 1e-12);

        // Slots without a mass stay exactly zero.
        assert!(r[2..].iter().all(|&x| x == 0.0));

        assert!(sense_light::<f64>(&[], &[], [0.0; 3]).is_err());
    }

    #[test]
    fn zero_actuation_rollout_settles_in_place() {
        let body = voxel_body();
        let env = env_with_light(1.8, 0.3);
        let cfg = SimConfig::default();
        let out = rollout(
            &body,
            &env,
            &zero_output_params::<f64>(),
            &CpgConfig::default(),
            &cfg,
            Recording::None,
        )
        .unwrap();
        assert!(!out.summary.diverged);
        assert!(
            out.summary.loss > 0.98 && out.summary.loss < 1.02,
            "loss {}",
            out.summary.loss
        );
    }

    #[test]
    fn zero_steps_rollout_reports_unit_loss() {
        let body = voxel_body();
        let env = env_with_light(1.5, 0.3);
        let cfg = SimConfig {
            steps: 0,
            ..SimConfig::default()
        };
        let out = rollout(
            &body,
            &env,
            &zero_output_params::<f64>(),
            &CpgConfig::default(),
            &cfg,
            Recording::None,
        )
        .unwrap();
        assert_eq!(out.summary.loss, 1.0);
        assert_eq!(out.summary.d0, out.summary.d1);
    }

    #[test]
    fn light_at_center_of_mass_is_rejected() {
        let body = voxel_body();
        let phen = express(&Genotype::from_voxels([(2, 2, 0)])).unwrap();
        let com = phen.center_of_mass();
        let env = Environment {
            terrain: HeightMap::flat(0.0),
            light: com,
        };
        let err = rollout(
            &body,
            &env,
            &zero_output_params::<f64>(),
            &CpgConfig::default(),
            &SimConfig::default(),
            Recording::None,
        );
        assert!(matches!(err, Err(SimError::DegenerateTarget(_))));
    }

    #[test]
    fn momentum_conserved_without_contact_or_gravity() {
        let cfg = SimConfig {
            gravity: 0.0,
            velocity_damping: 1.0,
            ..SimConfig::default()
        };
        // A stretched spring pair drifting sideways, far above any terrain.
        let body = SimBody::from_raw_parts(
            vec![[0.0, 0.0, 10.0], [0.13, 0.0, 10.0]],
            vec![(0, 1, 0.1)],
            vec![0, 1],
            vec![0],
        );
        let terrain = flat_field(-100.0);
        let mut state = SimState::at_rest(&body);
        state.velocities[0] = [0.05, 0.02, 0.01];
        state.velocities[1] = [0.05, 0.02, 0.01];
        let p0: V3<f64> = add(state.velocities[0], state.velocities[1]);
        for _ in 0..1000 {
            state = step(&body, &terrain, &cfg, &state, &[0.0]).unwrap();
        }
        let p1 = add(state.velocities[0], state.velocities[1]);
        for c in 0..3 {
            assert!(
                (p1[c] - p0[c]).abs() <= 1e-9 * p0[c].abs().max(1.0),
                "momentum drifted: {:?} vs {:?}",
                p0,
                p1
            );
        }
    }

    #[test]
    fn passive_rollout_dissipates_kinetic_energy() {
        let body = voxel_body();
        let terrain = flat_field(0.0);
        let cfg = SimConfig::default();
        let mut state = SimState::at_rest(&body);
        // Start slightly above ground with a push.
        for p in state.positions.iter_mut() {
            p[2] += 0.02;
        }
        for v in state.velocities.iter_mut() {
            *v = [0.4, 0.0, 0.0];
        }
        let acts = vec![0.0; body.n_springs()];
        let ke = |s: &SimState<f64>| -> f64 {
            s.velocities.iter().map(|v| dot3(*v, *v)).sum::<f64>()
        };
        let mut max_ke: f64 = ke(&state);
        for _ in 0..1000 {
            state = step(&body, &terrain, &cfg, &state, &acts).unwrap();
            max_ke = max_ke.max(ke(&state));
        }
        assert!(ke(&state) < max_ke);
    }

    #[test]
    fn rollout_never_penetrates_terrain() {
        let map = HeightMap::from_fn(|x, y| 0.05 * (3.0 * x).sin() + 0.04 * (2.0 * y).cos());
        let env = Environment::with_light_on_terrain(map, 1.6, -0.4);
        let g = Genotype::from_voxels([(2, 2, 0), (3, 2, 0)]).center_and_ground().unwrap();
        let body = SimBody::<f64>::from_phenotype(&express(&g).unwrap());
        // A controller with random weights actually actuates.
        let params = ControllerParams::<f64>::init(7);
        let cfg = SimConfig {
            steps: 300,
            ..SimConfig::default()
        };
        let out = rollout(&body, &env, &params, &CpgConfig::default(), &cfg, Recording::Positions)
            .unwrap();
        assert!(!out.summary.diverged);
        let terrain = TerrainField::<f64>::new(&env.terrain);
        for frame in out.trace.unwrap() {
            for p in frame {
                assert!(p[2] >= terrain.value(p[0], p[1]) - 1e-4);
            }
        }
    }

    #[test]
    fn rollouts_are_bit_deterministic() {
        let body = voxel_body();
        let env = env_with_light(1.2, 0.9);
        let params = ControllerParams::<f64>::init(3);
        let cfg = SimConfig {
            steps: 120,
            ..SimConfig::default()
        };
        let run = || {
            rollout(&body, &env, &params, &CpgConfig::default(), &cfg, Recording::Positions)
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.summary.loss.to_bits(), b.summary.loss.to_bits());
        assert_eq!(a.trace.unwrap(), b.trace.unwrap());
    }

    #[test]
    fn lattice_mass_below_stability_threshold_diverges() {
        // A node mass an order of magnitude under the default puts the
        // two-mass stretch mode beyond the explicit integrator's stable
        // region; the step must flag it rather than return garbage.
        let cfg = SimConfig {
            node_mass: 0.1,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_ok(), "single-mass bound alone admits it");
        let body = voxel_body();
        let terrain = flat_field(0.0);
        let mut state = SimState::at_rest(&body);
        state.positions.iter_mut().for_each(|p| p[2] += 0.01);
        let acts = vec![0.0; body.n_springs()];
        let mut diverged = false;
        for _ in 0..1000 {
            match step(&body, &terrain, &cfg, &state, &acts) {
                Ok(next) => state = next,
                Err(SimError::Diverged { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(diverged);

        // The default mass keeps the same scenario stable for 1000 steps.
        let cfg = SimConfig::default();
        let mut state = SimState::at_rest(&body);
        state.positions.iter_mut().for_each(|p| p[2] += 0.01);
        for _ in 0..1000 {
            state = step(&body, &terrain, &cfg, &state, &acts).unwrap();
        }
        let speed: f64 = state.velocities.iter().map(|v| norm3(*v)).fold(0.0, f64::max);
        assert!(speed < 1.0, "settled body should be nearly still, got {speed}");
    }
}
