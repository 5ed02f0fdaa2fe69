//! Genotype-to-phenotype expression: occupied voxels become shared point
//! masses and springs on a 0.1 m cubic lattice.

use super::lattice::{
    mass_site_coords, spring_sites, voxel_corner_sites, voxel_spring_sites, MASS_SITES,
    SPRING_SITES,
};
use super::{Genotype, MorphospaceError};

/// Lattice cell edge length in meters.
pub const VOXEL_EDGE_M: f64 = 0.1;

/// x-y center of the workspace in world meters; terrain extents and the
/// evaluation light rings are centered here.
pub const WORKSPACE_CENTER_XY: (f64, f64) = (0.3, 0.3);

/// A point mass at a lattice corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mass {
    /// Global mass-site index (sensor slot).
    pub site: usize,
    /// Rest position in workspace coordinates, meters.
    pub pos: [f64; 3],
}

/// A spring between two of the phenotype's masses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spring {
    /// Global spring-site index (actuator slot).
    pub site: usize,
    /// Endpoint indices into [`Phenotype::masses`].
    pub a: usize,
    pub b: usize,
    /// Rest length in meters.
    pub rest: f64,
}

/// The expressed mass-spring network of a grounded body plan.
#[derive(Clone, Debug)]
pub struct Phenotype {
    pub masses: Vec<Mass>,
    pub springs: Vec<Spring>,
    /// True at the global mass sites present in this body.
    pub sensor_mask: Vec<bool>,
    /// True at the global spring sites present in this body.
    pub actuator_mask: Vec<bool>,
}

impl Phenotype {
    /// Mean of the rest positions.
    pub fn center_of_mass(&self) -> [f64; 3] {
        let n = self.masses.len() as f64;
        let mut c = [0.0; 3];
        for m in &self.masses {
            c[0] += m.pos[0];
            c[1] += m.pos[1];
            c[2] += m.pos[2];
        }
        [c[0] / n, c[1] / n, c[2] / n]
    }
}

/// Expand a non-empty, connected, grounded genotype into its mass-spring
/// network. Masses and springs shared between adjacent voxels are emitted
/// exactly once, in global site order.
pub fn express(g: &Genotype) -> Result<Phenotype, MorphospaceError> {
    if g.is_empty() {
        return Err(MorphospaceError::Empty);
    }
    if !g.is_connected() {
        return Err(MorphospaceError::Disconnected);
    }
    if g.bounds().unwrap().0 .2 != 0 {
        return Err(MorphospaceError::Ungrounded);
    }

    let mut mass_present = vec![false; MASS_SITES];
    let mut spring_present = vec![false; SPRING_SITES];
    for (i, j, k) in g.voxels() {
        for site in voxel_corner_sites(i, j, k) {
            mass_present[site as usize] = true;
        }
        for site in voxel_spring_sites(i, j, k) {
            spring_present[site as usize] = true;
        }
    }

    let mut masses = Vec::new();
    let mut local_of_site = vec![usize::MAX; MASS_SITES];
    for site in 0..MASS_SITES {
        if mass_present[site] {
            let (ci, cj, ck) = mass_site_coords(site);
            local_of_site[site] = masses.len();
            masses.push(Mass {
                site,
                pos: [
                    ci as f64 * VOXEL_EDGE_M,
                    cj as f64 * VOXEL_EDGE_M,
                    ck as f64 * VOXEL_EDGE_M,
                ],
            });
        }
    }

    let endpoints = spring_sites();
    let mut springs = Vec::new();
    for site in 0..SPRING_SITES {
        if spring_present[site] {
            let (sa, sb) = endpoints[site];
            let a = local_of_site[sa as usize];
            let b = local_of_site[sb as usize];
            let pa = masses[a].pos;
            let pb = masses[b].pos;
            let rest = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                .sqrt();
            springs.push(Spring { site, a, b, rest });
        }
    }

    Ok(Phenotype {
        masses,
        springs,
        sensor_mask: mass_present,
        actuator_mask: spring_present,
    })
}
