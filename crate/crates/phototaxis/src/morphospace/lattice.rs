//! Fixed enumeration of every potential mass and spring site in the 6x6x4
//! workspace.
//!
//! Mass sites are the 7 x 7 x 5 = 245 lattice corners, indexed
//! `(ci * 7 + cj) * 5 + ck`. Spring sites are enumerated in six blocks, each
//! block scanned in row-major corner order:
//!
//! 1. x-edges (210), 2. y-edges (210), 3. z-edges (196),
//! 4. x-normal face diagonals (336), 5. y-normal face diagonals (336),
//! 6. z-normal face diagonals (360),
//!
//! for 616 axial + 1032 diagonal = 1648 springs total. Controller outputs,
//! actuator masks, and checkpointed weights all share this order.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{GRID_H, GRID_L, GRID_W};

/// Corner sites along x/y/z: 7 x 7 x 5.
pub const MASS_SITES: usize = (GRID_L + 1) * (GRID_W + 1) * (GRID_H + 1);
/// Distinct springs over the full workspace.
pub const SPRING_SITES: usize = 1648;

/// Global index of the lattice corner `(ci, cj, ck)`.
#[inline]
pub fn mass_site_index(ci: usize, cj: usize, ck: usize) -> usize {
    debug_assert!(ci <= GRID_L && cj <= GRID_W && ck <= GRID_H);
    (ci * (GRID_W + 1) + cj) * (GRID_H + 1) + ck
}

/// Inverse of [`mass_site_index`].
pub fn mass_site_coords(site: usize) -> (usize, usize, usize) {
    let ck = site % (GRID_H + 1);
    let rest = site / (GRID_H + 1);
    let cj = rest % (GRID_W + 1);
    let ci = rest / (GRID_W + 1);
    (ci, cj, ck)
}

struct SpringTable {
    /// Endpoint mass sites per spring, in enumeration order.
    endpoints: Vec<(u16, u16)>,
    /// Normalized endpoint pair -> spring site.
    by_pair: HashMap<(u16, u16), u16>,
}

fn table() -> &'static SpringTable {
    static TABLE: OnceLock<SpringTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut endpoints: Vec<(u16, u16)> = Vec::with_capacity(SPRING_SITES);
        let mut push = |a: (usize, usize, usize), b: (usize, usize, usize)| {
            let ia = mass_site_index(a.0, a.1, a.2) as u16;
            let ib = mass_site_index(b.0, b.1, b.2) as u16;
            endpoints.push((ia.min(ib), ia.max(ib)));
        };
        // Axial edges.
        for ci in 0..GRID_L {
            for cj in 0..=GRID_W {
                for ck in 0..=GRID_H {
                    push((ci, cj, ck), (ci + 1, cj, ck));
                }
            }
        }
        for ci in 0..=GRID_L {
            for cj in 0..GRID_W {
                for ck in 0..=GRID_H {
                    push((ci, cj, ck), (ci, cj + 1, ck));
                }
            }
        }
        for ci in 0..=GRID_L {
            for cj in 0..=GRID_W {
                for ck in 0..GRID_H {
                    push((ci, cj, ck), (ci, cj, ck + 1));
                }
            }
        }
        // Face diagonals, both diagonals per face.
        for ci in 0..=GRID_L {
            for cj in 0..GRID_W {
                for ck in 0..GRID_H {
                    push((ci, cj, ck), (ci, cj + 1, ck + 1));
                    push((ci, cj + 1, ck), (ci, cj, ck + 1));
                }
            }
        }
        for ci in 0..GRID_L {
            for cj in 0..=GRID_W {
                for ck in 0..GRID_H {
                    push((ci, cj, ck), (ci + 1, cj, ck + 1));
                    push((ci + 1, cj, ck), (ci, cj, ck + 1));
                }
            }
        }
        for ci in 0..GRID_L {
            for cj in 0..GRID_W {
                for ck in 0..=GRID_H {
                    push((ci, cj, ck), (ci + 1, cj + 1, ck));
                    push((ci + 1, cj, ck), (ci, cj + 1, ck));
                }
            }
        }
        assert_eq!(endpoints.len(), SPRING_SITES);
        let by_pair = endpoints
            .iter()
            .enumerate()
            .map(|(s, &pair)| (pair, s as u16))
            .collect();
        SpringTable { endpoints, by_pair }
    })
}

/// Endpoint mass sites of every spring, in enumeration order.
pub fn spring_sites() -> &'static [(u16, u16)] {
    &table().endpoints
}

/// The eight corner sites of voxel `(i, j, k)`, in row-major corner order.
pub fn voxel_corner_sites(i: usize, j: usize, k: usize) -> [u16; 8] {
    let mut out = [0u16; 8];
    let mut n = 0;
    for di in 0..2 {
        for dj in 0..2 {
            for dk in 0..2 {
                out[n] = mass_site_index(i + di, j + dj, k + dk) as u16;
                n += 1;
            }
        }
    }
    out
}

/// The 24 spring sites of voxel `(i, j, k)`: 12 cube edges plus 2 diagonals
/// on each of its 6 faces.
pub fn voxel_spring_sites(i: usize, j: usize, k: usize) -> [u16; 24] {
    let by_pair = &table().by_pair;
    let corner = |di: usize, dj: usize, dk: usize| mass_site_index(i + di, j + dj, k + dk) as u16;
    let mut out = [0u16; 24];
    let mut n = 0;
    let mut push = |a: u16, b: u16| {
        let pair = (a.min(b), a.max(b));
        out[n] = *by_pair.get(&pair).expect("voxel spring in table");
        n += 1;
    };
    // Edges along x, y, z.
    for dj in 0..2 {
        for dk in 0..2 {
            push(corner(0, dj, dk), corner(1, dj, dk));
        }
    }
    for di in 0..2 {
        for dk in 0..2 {
            push(corner(di, 0, dk), corner(di, 1, dk));
        }
    }
    for di in 0..2 {
        for dj in 0..2 {
            push(corner(di, dj, 0), corner(di, dj, 1));
        }
    }
    // Face diagonals: x-normal, y-normal, z-normal faces.
    for di in 0..2 {
        push(corner(di, 0, 0), corner(di, 1, 1));
        push(corner(di, 1, 0), corner(di, 0, 1));
    }
    for dj in 0..2 {
        push(corner(0, dj, 0), corner(1, dj, 1));
        push(corner(1, dj, 0), corner(0, dj, 1));
    }
    for dk in 0..2 {
        push(corner(0, 0, dk), corner(1, 1, dk));
        push(corner(1, 0, dk), corner(0, 1, dk));
    }
    out
}
