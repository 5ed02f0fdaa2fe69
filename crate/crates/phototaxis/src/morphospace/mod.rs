//! The genotype workspace: binary voxel grids, their validity rules, and the
//! mapping from body plans to mass-spring networks.
//!
//! A body plan is a set of occupied voxels in a 6 x 6 x 4 grid. Two plans are
//! the same design if one maps onto the other by a translation composed with
//! any symmetry of the square footprint (z-rotations and x/y reflections);
//! [`Genotype::canonicalize`] picks a unique representative per equivalence
//! class. [`express`](phenotype::express) turns a grounded plan into the
//! point masses and springs the simulator integrates.

mod lattice;
mod phenotype;

pub use lattice::{
    mass_site_coords, mass_site_index, spring_sites, voxel_corner_sites, voxel_spring_sites,
    MASS_SITES, SPRING_SITES,
};
pub use phenotype::{express, Mass, Phenotype, Spring, VOXEL_EDGE_M, WORKSPACE_CENTER_XY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid length (x, index `i`).
pub const GRID_L: usize = 6;
/// Grid width (y, index `j`).
pub const GRID_W: usize = 6;
/// Grid height (z, index `k`).
pub const GRID_H: usize = 4;
/// Total voxel count, `6 * 6 * 4`.
pub const VOXEL_COUNT: usize = GRID_L * GRID_W * GRID_H;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorphospaceError {
    #[error("genotype has no occupied voxels")]
    Empty,
    #[error("genotype is not face-connected")]
    Disconnected,
    #[error("genotype is not grounded (no voxel at k = 0)")]
    Ungrounded,
    #[error("bit string must be {VOXEL_COUNT} characters of '0'/'1', got {0:?}")]
    BadBitString(String),
    #[error("hex string must be 36 hex digits, got {0:?}")]
    BadHex(String),
}

/// A voxel occupancy grid: the unit of evolutionary variation.
///
/// Bit order is row-major with `i` outermost: bit `((i * 6) + j) * 4 + k`.
/// The same order defines the text serialization and all lexicographic
/// comparisons.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Genotype {
    words: [u64; 3],
}

#[inline]
fn bit_index(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < GRID_L && j < GRID_W && k < GRID_H);
    (i * GRID_W + j) * GRID_H + k
}

impl Genotype {
    pub const EMPTY: Genotype = Genotype { words: [0; 3] };

    pub fn from_voxels<I: IntoIterator<Item = (usize, usize, usize)>>(voxels: I) -> Genotype {
        let mut g = Genotype::EMPTY;
        for (i, j, k) in voxels {
            g.set(i, j, k, true);
        }
        g
    }

    /// Fully occupied 6 x 6 x 4 grid.
    pub fn full() -> Genotype {
        let mut g = Genotype::EMPTY;
        for i in 0..GRID_L {
            for j in 0..GRID_W {
                for k in 0..GRID_H {
                    g.set(i, j, k, true);
                }
            }
        }
        g
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        let b = bit_index(i, j, k);
        self.words[b >> 6] >> (b & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, on: bool) {
        let b = bit_index(i, j, k);
        if on {
            self.words[b >> 6] |= 1 << (b & 63);
        } else {
            self.words[b >> 6] &= !(1 << (b & 63));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words == [0; 3]
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupied voxels in lexicographic `(i, j, k)` order.
    pub fn voxels(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for i in 0..GRID_L {
            for j in 0..GRID_W {
                for k in 0..GRID_H {
                    if self.get(i, j, k) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }

    /// Number of differing voxels between two grids.
    pub fn hamming(&self, other: &Genotype) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Bitwise exclusive or; the recombination primitive.
    pub fn xor(&self, other: &Genotype) -> Genotype {
        Genotype {
            words: [
                self.words[0] ^ other.words[0],
                self.words[1] ^ other.words[1],
                self.words[2] ^ other.words[2],
            ],
        }
    }

    /// Inclusive voxel bounds `(min, max)` per axis; `None` when empty.
    pub fn bounds(&self) -> Option<((usize, usize, usize), (usize, usize, usize))> {
        let vs = self.voxels();
        if vs.is_empty() {
            return None;
        }
        let mut lo = (GRID_L, GRID_W, GRID_H);
        let mut hi = (0, 0, 0);
        for &(i, j, k) in &vs {
            lo = (lo.0.min(i), lo.1.min(j), lo.2.min(k));
            hi = (hi.0.max(i), hi.1.max(j), hi.2.max(k));
        }
        Some((lo, hi))
    }

    /// Translate all voxels by `(di, dj, dk)`; `None` if anything leaves the
    /// grid.
    pub fn translate(&self, di: isize, dj: isize, dk: isize) -> Option<Genotype> {
        let mut out = Genotype::EMPTY;
        for (i, j, k) in self.voxels() {
            let (ni, nj, nk) = (i as isize + di, j as isize + dj, k as isize + dk);
            if ni < 0
                || nj < 0
                || nk < 0
                || ni >= GRID_L as isize
                || nj >= GRID_W as isize
                || nk >= GRID_H as isize
            {
                return None;
            }
            out.set(ni as usize, nj as usize, nk as usize, true);
        }
        Some(out)
    }

    /// True when the occupied voxels form a single face-connected component.
    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let first = self.voxels()[0];
        flood_fill(self, first).count() == self.count()
    }

    /// 144-character '0'/'1' string in the documented bit order.
    pub fn to_bit_string(&self) -> String {
        let mut s = String::with_capacity(VOXEL_COUNT);
        for b in 0..VOXEL_COUNT {
            s.push(if self.words[b >> 6] >> (b & 63) & 1 == 1 {
                '1'
            } else {
                '0'
            });
        }
        s
    }

    pub fn from_bit_string(s: &str) -> Result<Genotype, MorphospaceError> {
        if s.len() != VOXEL_COUNT {
            return Err(MorphospaceError::BadBitString(s.to_owned()));
        }
        let mut g = Genotype::EMPTY;
        for (b, c) in s.chars().enumerate() {
            match c {
                '1' => g.words[b >> 6] |= 1 << (b & 63),
                '0' => {}
                _ => return Err(MorphospaceError::BadBitString(s.to_owned())),
            }
        }
        Ok(g)
    }

    /// Pack into 18 bytes: bit `b` goes to byte `b / 8`, most significant
    /// bit first within each byte. Byte-lexicographic order on the packed
    /// form therefore agrees with character order on the bit string.
    pub fn to_bytes(&self) -> [u8; 18] {
        let mut out = [0u8; 18];
        for b in 0..VOXEL_COUNT {
            if self.words[b >> 6] >> (b & 63) & 1 == 1 {
                out[b >> 3] |= 1 << (7 - (b & 7));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 18]) -> Genotype {
        let mut g = Genotype::EMPTY;
        for b in 0..VOXEL_COUNT {
            if bytes[b >> 3] >> (7 - (b & 7)) & 1 == 1 {
                g.words[b >> 6] |= 1 << (b & 63);
            }
        }
        g
    }

    /// 36-digit lowercase hex of [`Genotype::to_bytes`]; the archive form.
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Genotype, MorphospaceError> {
        if s.len() != 36 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(MorphospaceError::BadHex(s.to_owned()));
        }
        let mut bytes = [0u8; 18];
        for (n, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16).unwrap() as u8;
            let lo = (chunk[1] as char).to_digit(16).unwrap() as u8;
            bytes[n] = hi << 4 | lo;
        }
        Ok(Genotype::from_bytes(&bytes))
    }

    /// Keep only the largest face-connected component.
    ///
    /// Size ties go to the component whose lexicographically smallest voxel
    /// is smallest. An empty input yields an (explicitly empty) empty grid.
    pub fn largest_connected_component(&self) -> Genotype {
        let mut best = Genotype::EMPTY;
        let mut best_size = 0;
        let mut visited = Genotype::EMPTY;
        // Scan order is lexicographic, so the first component reaching the
        // maximum size is also the tie-break winner.
        for seed in self.voxels() {
            if visited.get(seed.0, seed.1, seed.2) {
                continue;
            }
            let component = flood_fill(self, seed);
            for (i, j, k) in component.voxels() {
                visited.set(i, j, k, true);
            }
            let size = component.count();
            if size > best_size {
                best = component;
                best_size = size;
            }
        }
        best
    }

    /// Translate so the voxel center of mass is as close as possible to the
    /// grid's x-y center (index mean 2.5 per axis) and the body rests on
    /// k = 0. Ties in the rounding go toward the lower index.
    pub fn center_and_ground(&self) -> Result<Genotype, MorphospaceError> {
        let vs = self.voxels();
        if vs.is_empty() {
            return Err(MorphospaceError::Empty);
        }
        let ((lo_i, lo_j, lo_k), (hi_i, hi_j, _)) = self.bounds().unwrap();
        let n = vs.len() as f64;
        let mean_i = vs.iter().map(|v| v.0 as f64).sum::<f64>() / n;
        let mean_j = vs.iter().map(|v| v.1 as f64).sum::<f64>() / n;
        let target = (GRID_L as f64 - 1.0) / 2.0;
        let di = round_half_down(target - mean_i).clamp(-(lo_i as isize), (GRID_L - 1 - hi_i) as isize);
        let dj = round_half_down(target - mean_j).clamp(-(lo_j as isize), (GRID_W - 1 - hi_j) as isize);
        let dk = -(lo_k as isize);
        Ok(self
            .translate(di, dj, dk)
            .expect("clamped shift stays in bounds"))
    }

    /// Apply one of the eight footprint symmetries (`rot` quarter-turns
    /// about z, then an x-reflection when `reflect` is set) and re-align the
    /// result to the origin.
    pub fn apply_symmetry(&self, rot: usize, reflect: bool) -> Genotype {
        let mut pts: Vec<(isize, isize, isize)> = self
            .voxels()
            .into_iter()
            .map(|(i, j, k)| (i as isize, j as isize, k as isize))
            .collect();
        for p in pts.iter_mut() {
            for _ in 0..rot % 4 {
                *p = (-p.1, p.0, p.2);
            }
            if reflect {
                p.0 = -p.0;
            }
        }
        align_to_origin(&pts)
    }

    /// The unique representative of this design's symmetry class.
    pub fn canonicalize(&self) -> Result<CanonicalGenotype, MorphospaceError> {
        if self.is_empty() {
            return Err(MorphospaceError::Empty);
        }
        let mut best: Option<(Genotype, [u8; 18])> = None;
        for rot in 0..4 {
            for reflect in [false, true] {
                let candidate = self.apply_symmetry(rot, reflect);
                let key = candidate.to_bytes();
                let better = match &best {
                    None => true,
                    Some((_, k)) => key < *k,
                };
                if better {
                    best = Some((candidate, key));
                }
            }
        }
        let (genotype, key) = best.unwrap();
        Ok(CanonicalGenotype { genotype, key })
    }
}

impl std::fmt::Debug for Genotype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Genotype({})", self.to_hex())
    }
}

/// A genotype known to be the fixed point of [`Genotype::canonicalize`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct CanonicalGenotype {
    genotype: Genotype,
    key: [u8; 18],
}

impl CanonicalGenotype {
    pub fn genotype(&self) -> &Genotype {
        &self.genotype
    }

    /// Packed canonical occupancy; doubles as the design's archive hash.
    pub fn key(&self) -> [u8; 18] {
        self.key
    }

    /// Lowercase hex of the key. Decoding it with [`Genotype::from_hex`]
    /// recovers the canonical body, so lineage records are self-describing.
    pub fn hex(&self) -> String {
        self.genotype.to_hex()
    }
}

fn round_half_down(t: f64) -> isize {
    (t - 0.5).ceil() as isize
}

fn align_to_origin(pts: &[(isize, isize, isize)]) -> Genotype {
    let min_i = pts.iter().map(|p| p.0).min().unwrap_or(0);
    let min_j = pts.iter().map(|p| p.1).min().unwrap_or(0);
    let min_k = pts.iter().map(|p| p.2).min().unwrap_or(0);
    let mut g = Genotype::EMPTY;
    for &(i, j, k) in pts {
        g.set(
            (i - min_i) as usize,
            (j - min_j) as usize,
            (k - min_k) as usize,
            true,
        );
    }
    g
}

pub(crate) fn flood_fill(g: &Genotype, seed: (usize, usize, usize)) -> Genotype {
    let mut component = Genotype::EMPTY;
    let mut stack = vec![seed];
    component.set(seed.0, seed.1, seed.2, true);
    while let Some((i, j, k)) = stack.pop() {
        let mut push = |ni: isize, nj: isize, nk: isize| {
            if ni < 0
                || nj < 0
                || nk < 0
                || ni >= GRID_L as isize
                || nj >= GRID_W as isize
                || nk >= GRID_H as isize
            {
                return;
            }
            let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
            if g.get(ni, nj, nk) && !component.get(ni, nj, nk) {
                component.set(ni, nj, nk, true);
                stack.push((ni, nj, nk));
            }
        };
        let (i, j, k) = (i as isize, j as isize, k as isize);
        push(i - 1, j, k);
        push(i + 1, j, k);
        push(i, j - 1, k);
        push(i, j + 1, k);
        push(i, j, k - 1);
        push(i, j, k + 1);
    }
    component
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(voxels: &[(usize, usize, usize)]) -> Genotype {
        Genotype::from_voxels(voxels.iter().copied())
    }

    #[test]
    fn lcc_keeps_connected_body() {
        let body = g(&[(0, 0, 0), (1, 0, 0)]);
        assert_eq!(body.largest_connected_component(), body);
    }

    #[test]
    fn lcc_picks_larger_component() {
        let body = g(&[(0, 0, 0), (2, 0, 0), (3, 0, 0)]);
        assert_eq!(
            body.largest_connected_component(),
            g(&[(2, 0, 0), (3, 0, 0)])
        );
    }

    #[test]
    fn lcc_of_empty_is_empty() {
        assert!(Genotype::EMPTY.largest_connected_component().is_empty());
    }

    #[test]
    fn lcc_size_tie_breaks_on_smallest_min_voxel() {
        // Two single-voxel components; (0,0,0) wins the tie.
        let body = g(&[(0, 0, 0), (1, 1, 0)]);
        assert_eq!(body.largest_connected_component(), g(&[(0, 0, 0)]));
    }

    #[test]
    fn center_single_voxel_ties_toward_lower_index() {
        // Shift to index mean 2.5 from 5 is -2.5; the tie goes down, so -3.
        let centered = g(&[(5, 5, 3)]).center_and_ground().unwrap();
        assert_eq!(centered, g(&[(2, 2, 0)]));
    }

    #[test]
    fn center_slab_exact_shift() {
        let slab = g(&[(4, 4, 2), (5, 4, 2), (4, 5, 2), (5, 5, 2)]);
        let expect = g(&[(2, 2, 0), (3, 2, 0), (2, 3, 0), (3, 3, 0)]);
        assert_eq!(slab.center_and_ground().unwrap(), expect);
    }

    #[test]
    fn center_already_centered_is_identity() {
        let body = g(&[(2, 2, 0), (3, 2, 0), (2, 3, 0), (3, 3, 0)]);
        assert_eq!(body.center_and_ground().unwrap(), body);
    }

    #[test]
    fn center_rejects_empty() {
        assert_eq!(
            Genotype::EMPTY.center_and_ground(),
            Err(MorphospaceError::Empty)
        );
    }

    #[test]
    fn center_clamps_shift_into_bounds() {
        // Mass concentrated at i = 0 with one voxel at i = 5: the centering
        // shift would push past the boundary and must clamp to zero.
        let body = g(&[
            (0, 0, 0),
            (1, 0, 0),
            (2, 0, 0),
            (3, 0, 0),
            (4, 0, 0),
            (5, 0, 0),
            (0, 1, 0),
            (0, 2, 0),
        ]);
        let centered = body.center_and_ground().unwrap();
        assert_eq!(centered.bounds().unwrap().0 .0, 0);
        assert_eq!(centered.count(), body.count());
    }

    #[test]
    fn canonical_domino_orientation_invariant() {
        let x_domino = g(&[(0, 0, 0), (1, 0, 0)]);
        let y_domino = g(&[(0, 0, 0), (0, 1, 0)]);
        let cx = x_domino.canonicalize().unwrap();
        let cy = y_domino.canonicalize().unwrap();
        assert_eq!(cx, cy);
        // Hand-enumerated orbit: the x-aligned form sets bit 24 (voxel
        // (1,0,0)) instead of bit 4 (voxel (0,1,0)); '1' sorts after '0', so
        // the later second bit is the lexicographic minimum.
        assert_eq!(cx.genotype(), &x_domino);
    }

    #[test]
    fn canonical_single_voxel_is_origin() {
        let c = g(&[(4, 2, 3)]).canonicalize().unwrap();
        assert_eq!(c.genotype(), &g(&[(0, 0, 0)]));
    }

    #[test]
    fn canonical_l_tromino_reflection_invariant() {
        let l = g(&[(0, 0, 0), (1, 0, 0), (1, 1, 0)]);
        let reflected = l.apply_symmetry(0, true);
        assert_eq!(l.canonicalize().unwrap(), reflected.canonicalize().unwrap());
    }

    #[test]
    fn canonicalize_rejects_empty() {
        assert!(Genotype::EMPTY.canonicalize().is_err());
    }

    #[test]
    fn bit_string_order_is_documented_row_major() {
        let mut s = vec!['0'; VOXEL_COUNT];
        s[bit_index(1, 2, 3)] = '1';
        assert_eq!(g(&[(1, 2, 3)]).to_bit_string(), s.iter().collect::<String>());
    }

    #[test]
    fn hex_matches_msb_first_packing() {
        // Bit 0 is the most significant bit of byte 0.
        assert_eq!(
            g(&[(0, 0, 0)]).to_hex(),
            "800000000000000000000000000000000000"
        );
    }

    fn arb_genotype() -> impl Strategy<Value = Genotype> {
        (proptest::collection::vec(any::<bool>(), VOXEL_COUNT), 0usize..VOXEL_COUNT).prop_map(
            |(bits, fallback)| {
                let mut out = Genotype::EMPTY;
                for (b, on) in bits.iter().enumerate() {
                    if *on {
                        out.words[b >> 6] |= 1 << (b & 63);
                    }
                }
                if out.is_empty() {
                    out.words[fallback >> 6] |= 1 << (fallback & 63);
                }
                out
            },
        )
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(body in arb_genotype()) {
            let c = body.canonicalize().unwrap();
            prop_assert_eq!(c.genotype().canonicalize().unwrap(), c);
        }

        #[test]
        fn canonicalize_symmetry_invariant(
            body in arb_genotype(),
            rot in 0usize..4,
            reflect in any::<bool>(),
            shift in (0usize..6, 0usize..6, 0usize..4),
        ) {
            let moved = body.apply_symmetry(rot, reflect);
            let (_, (hi_i, hi_j, hi_k)) = moved.bounds().unwrap();
            let moved = moved
                .translate(
                    (shift.0 % (GRID_L - hi_i)) as isize,
                    (shift.1 % (GRID_W - hi_j)) as isize,
                    (shift.2 % (GRID_H - hi_k)) as isize,
                )
                .unwrap();
            prop_assert_eq!(
                moved.canonicalize().unwrap(),
                body.canonicalize().unwrap()
            );
        }

        #[test]
        fn lcc_is_idempotent(body in arb_genotype()) {
            let once = body.largest_connected_component();
            prop_assert_eq!(once.largest_connected_component(), once);
        }

        #[test]
        fn center_and_ground_is_idempotent(body in arb_genotype()) {
            let body = body.largest_connected_component();
            let once = body.center_and_ground().unwrap();
            prop_assert_eq!(once.center_and_ground().unwrap(), once);
        }

        #[test]
        fn serialization_roundtrips(body in arb_genotype()) {
            prop_assert_eq!(Genotype::from_bit_string(&body.to_bit_string()).unwrap(), body);
            prop_assert_eq!(Genotype::from_hex(&body.to_hex()).unwrap(), body);
        }
    }
}
