//! Procedural terrain: an 8 x 8 grid of heights queried by bilinear
//! interpolation, clamped to the edge cells outside its extent.

use serde::{Deserialize, Serialize};

use crate::math::{normalize3, Real, V3};
use crate::morphospace::WORKSPACE_CENTER_XY;

/// Grid nodes per side.
pub const HEIGHTMAP_N: usize = 8;

/// Square side length in meters spanned by the grid corners. Sized to
/// contain the farthest light ring plus the robot's reachable extent.
pub const TERRAIN_EXTENT_M: f64 = 6.0;

/// Step used by the central-difference surface normal, meters.
pub const CENTRAL_DIFF_EPS: f64 = 1e-4;

/// Discrete terrain heights with a physical placement in the world.
///
/// The grid is centered on the workspace x-y center; node `(a, b)` sits at
/// `center - extent/2 + spacing * (a, b)` with `spacing = extent / 7`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    pub heights: [[f64; HEIGHTMAP_N]; HEIGHTMAP_N],
    pub extent: f64,
    pub center: (f64, f64),
}

impl HeightMap {
    pub fn new(heights: [[f64; HEIGHTMAP_N]; HEIGHTMAP_N]) -> HeightMap {
        HeightMap {
            heights,
            extent: TERRAIN_EXTENT_M,
            center: WORKSPACE_CENTER_XY,
        }
    }

    /// Terrain with the same height everywhere.
    pub fn flat(height: f64) -> HeightMap {
        HeightMap::new([[height; HEIGHTMAP_N]; HEIGHTMAP_N])
    }

    /// Sample a closed-form surface at the grid nodes.
    pub fn from_fn(mut f: impl FnMut(f64, f64) -> f64) -> HeightMap {
        let mut heights = [[0.0; HEIGHTMAP_N]; HEIGHTMAP_N];
        let field = HeightMap::flat(0.0);
        for a in 0..HEIGHTMAP_N {
            for b in 0..HEIGHTMAP_N {
                let (x, y) = field.node_position(a, b);
                heights[a][b] = f(x, y);
            }
        }
        HeightMap::new(heights)
    }

    /// World x-y position of grid node `(a, b)`.
    pub fn node_position(&self, a: usize, b: usize) -> (f64, f64) {
        let spacing = self.extent / (HEIGHTMAP_N - 1) as f64;
        (
            self.center.0 - self.extent / 2.0 + spacing * a as f64,
            self.center.1 - self.extent / 2.0 + spacing * b as f64,
        )
    }

    /// Bilinearly interpolated height; out-of-extent queries clamp to the
    /// edge cells.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        TerrainField::<f64>::new(self).value(x, y)
    }

    /// Unit surface normal from central differences of [`Self::height_at`]
    /// with step [`CENTRAL_DIFF_EPS`].
    pub fn surface_normal(&self, x: f64, y: f64) -> V3<f64> {
        TerrainField::<f64>::new(self).normal(x, y)
    }
}

/// A height map lowered to the simulation scalar type for fast, precision-
/// consistent queries during rollouts and their reverse passes.
#[derive(Clone, Debug)]
pub struct TerrainField<T> {
    heights: [[T; HEIGHTMAP_N]; HEIGHTMAP_N],
    origin: (T, T),
    inv_spacing: T,
}

impl<T: Real> TerrainField<T> {
    pub fn new(map: &HeightMap) -> TerrainField<T> {
        let mut heights = [[T::zero(); HEIGHTMAP_N]; HEIGHTMAP_N];
        for a in 0..HEIGHTMAP_N {
            for b in 0..HEIGHTMAP_N {
                heights[a][b] = T::of(map.heights[a][b]);
            }
        }
        let spacing = map.extent / (HEIGHTMAP_N - 1) as f64;
        TerrainField {
            heights,
            origin: (
                T::of(map.center.0 - map.extent / 2.0),
                T::of(map.center.1 - map.extent / 2.0),
            ),

            inv_spacing: T::of(1.0 / spacing),
        }
    }

    /// Grid coordinate of a world coordinate plus its derivative, which is
    /// zero in the clamped region.
    #[inline]
    fn grid_coord(&self, world: T, origin: T) -> (T, T) {
        let max = T::of((HEIGHTMAP_N - 1) as f64);
        let u = (world - origin) * self.inv_spacing;
        if u <= T::zero() {
            (T::zero(), T::zero())
        } else if u >= max {
            (max, T::zero())
        } else {
            (u, self.inv_spacing)
        }
    }

    #[inline]
    fn cell(u: T) -> (usize, T) {
        let max_cell = HEIGHTMAP_N - 2;
        let i = (u.to_f64_lossless().floor() as usize).min(max_cell);
        (i, u - T::of(i as f64))
    }

    pub fn value(&self, x: T, y: T) -> T {
        self.value_and_grad(x, y).0
    }

    /// Height plus its analytic gradient with respect to the world
    /// coordinates, respecting the clamp branches of the forward query.
    pub fn value_and_grad(&self, x: T, y: T) -> (T, T, T) {
        let (ux, dux) = self.grid_coord(x, self.origin.0);
        let (uy, duy) = self.grid_coord(y, self.origin.1);
        let (i, fx) = Self::cell(ux);
        let (j, fy) = Self::cell(uy);
        let one = T::one();
        let h00 = self.heights[i][j];
        let h10 = self.heights[i + 1][j];
        let h01 = self.heights[i][j + 1];
        let h11 = self.heights[i + 1][j + 1];
        let value = (one - fx) * (one - fy) * h00
            + fx * (one - fy) * h10
            + (one - fx) * fy * h01
            + fx * fy * h11;
        let dv_dfx = (one - fy) * (h10 - h00) + fy * (h11 - h01);
        let dv_dfy = (one - fx) * (h01 - h00) + fx * (h11 - h10);
        (value, dv_dfx * dux, dv_dfy * duy)
    }

    /// Central-difference estimate of the height gradient, the quantity the
    /// contact model's normal is built from.
    pub fn central_gradient(&self, x: T, y: T) -> (T, T) {
        let eps = T::of(CENTRAL_DIFF_EPS);
        let two_eps = eps + eps;
        let gx = (self.value(x + eps, y) - self.value(x - eps, y)) / two_eps;
        let gy = (self.value(x, y + eps) - self.value(x, y - eps)) / two_eps;
        (gx, gy)
    }

    /// Jacobian of [`Self::central_gradient`] with respect to `(x, y)`,
    /// assembled from the analytic per-query gradients. Row `r` is
    /// `d g_r / d (x, y)`.
    pub fn central_gradient_jacobian(&self, x: T, y: T) -> [[T; 2]; 2] {
        let eps = T::of(CENTRAL_DIFF_EPS);
        let two_eps = eps + eps;
        let (_, px_dx, px_dy) = self.value_and_grad(x + eps, y);
        let (_, mx_dx, mx_dy) = self.value_and_grad(x - eps, y);
        let (_, py_dx, py_dy) = self.value_and_grad(x, y + eps);
        let (_, my_dx, my_dy) = self.value_and_grad(x, y - eps);
        [
            [(px_dx - mx_dx) / two_eps, (px_dy - mx_dy) / two_eps],
            [(py_dx - my_dx) / two_eps, (py_dy - my_dy) / two_eps],
        ]
    }

    /// Unit surface normal at `(x, y)`.
    pub fn normal(&self, x: T, y: T) -> V3<T> {
        let (gx, gy) = self.central_gradient(x, y);
        normalize3([-gx, -gy, T::one()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_node_query_returns_stored_height() {
        let mut heights = [[0.0; 8]; 8];
        heights[3][5] = 0.17;
        let map = HeightMap::new(heights);
        let (x, y) = map.node_position(3, 5);
        assert!((map.height_at(x, y) - 0.17).abs() < 1e-12);
    }

    #[test]
    fn cell_center_averages_corners() {
        // Corner heights (0, 0, 0, 1): the bilinear value at the cell
        // center is 1/4.
        let mut heights = [[0.0; 8]; 8];
        heights[1][1] = 1.0;
        let map = HeightMap::new(heights);
        let (x0, y0) = map.node_position(0, 0);
        let (x1, y1) = map.node_position(1, 1);
        let h = map.height_at((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        assert!((h - 0.25).abs() < 1e-12);
    }

    #[test]
    fn far_queries_clamp_to_edge() {
        let map = HeightMap::from_fn(|x, _| x);
        let (x_edge, y_edge) = map.node_position(HEIGHTMAP_N - 1, 3);
        assert!((map.height_at(1e6, y_edge) - map.height_at(x_edge, y_edge)).abs() < 1e-12);
        let (x0, _) = map.node_position(0, 3);
        assert!((map.height_at(-1e6, y_edge) - map.height_at(x0, y_edge)).abs() < 1e-12);
    }

    #[test]
    fn flat_normal_is_up() {
        let map = HeightMap::flat(0.3);
        assert_eq!(map.surface_normal(0.1, -0.4), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn plane_normals_match_analytic_gradient() {
        // h = x has normal ~ (-1, 0, 1) / sqrt(2).
        let map = HeightMap::from_fn(|x, _| x);
        let n = map.surface_normal(0.2, 0.1);
        let s = 2f64.sqrt();
        assert!((n[0] + 1.0 / s).abs() < 1e-9);
        assert!(n[1].abs() < 1e-9);
        assert!((n[2] - 1.0 / s).abs() < 1e-9);

        // h = 2y has normal ~ (0, -2, 1) / sqrt(5).
        let map = HeightMap::from_fn(|_, y| 2.0 * y);
        let n = map.surface_normal(-0.3, 0.4);
        let s = 5f64.sqrt();
        assert!(n[0].abs() < 1e-9);
        assert!((n[1] + 2.0 / s).abs() < 1e-9);
        assert!((n[2] - 1.0 / s).abs() < 1e-9);
    }

    #[test]
    fn analytic_grad_matches_finite_differences() {
        let mut heights = [[0.0; 8]; 8];
        for (a, row) in heights.iter_mut().enumerate() {
            for (b, h) in row.iter_mut().enumerate() {
                *h = (a as f64 * 0.7).sin() * 0.1 + (b as f64 * 1.3).cos() * 0.05;
            }
        }
        let field = TerrainField::<f64>::new(&HeightMap::new(heights));
        let probe = [(0.21, 0.13), (-1.4, 2.2), (2.9, -2.65)];
        for (x, y) in probe {
            let (_, gx, gy) = field.value_and_grad(x, y);
            let e = 1e-7;
            let fd_x = (field.value(x + e, y) - field.value(x - e, y)) / (2.0 * e);
            let fd_y = (field.value(x, y + e) - field.value(x, y - e)) / (2.0 * e);
            assert!((gx - fd_x).abs() < 1e-6, "gx {gx} vs {fd_x}");
            assert!((gy - fd_y).abs() < 1e-6, "gy {gy} vs {fd_y}");
        }
    }
}
