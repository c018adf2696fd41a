//! Uniform grid with cell size `2k`.

use std::time::Instant;

use super::{for_each_vertex, BackendId, Exec, PhaseTimes, RepulsiveBackend};
use crate::error::{LayoutError, Result};
use crate::geometry::{Aabb, Vec2};
use crate::layout::{accumulate_repulsion, cutoff_radius, within_radius};

/// Buckets of vertex ids over the layout's bounding box, stored CSR-style.
/// Ids inside a bucket are ascending.
#[derive(Clone, Debug)]
pub struct UniformGrid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub dims: (usize, usize),
    cell_start: Vec<u32>,
    items: Vec<u32>,
}

impl UniformGrid {
    fn axis_cell(&self, coord: f64, origin: f64, dim: usize) -> usize {
        let c = ((coord - origin) / self.cell_size).floor();
        if c <= 0.0 || c.is_nan() {
            0
        } else {
            (c as usize).min(dim - 1)
        }
    }

    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        (
            self.axis_cell(p.x, self.origin.x, self.dims.0),
            self.axis_cell(p.y, self.origin.y, self.dims.1),
        )
    }

    pub fn bucket(&self, cx: usize, cy: usize) -> &[u32] {
        let c = cy * self.dims.0 + cx;
        &self.items[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
    }

    pub fn cell_count(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    /// Ids `u != v` with `|p(v) - p(u)| < r`, where `r` must not exceed the
    /// cell size. Candidates come from the cells spanned by
    /// `[p - r, p + r]`, normally a 3×3 block.
    pub fn neighbors_within(&self, positions: &[Vec2], v: usize, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let p = positions[v];
        let (x0, y0) = self.cell_of(Vec2::new(p.x - r, p.y - r));
        let (x1, y1) = self.cell_of(Vec2::new(p.x + r, p.y + r));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &u in self.bucket(cx, cy) {
                    if u as usize != v && within_radius(p - positions[u as usize], r) {
                        out.push(u);
                    }
                }
            }
        }
    }
}

pub fn build_grid(positions: &[Vec2], cutoff_radius: f64) -> Result<UniformGrid> {
    if !(cutoff_radius > 0.0 && cutoff_radius.is_finite()) {
        return Err(LayoutError::InvalidParameter(format!(
            "grid cell size must be positive, got {cutoff_radius}"
        )));
    }
    let bounds = Aabb::from_points(positions);
    let (origin, w, h) = if bounds.is_empty() {
        (Vec2::ZERO, 0.0, 0.0)
    } else {
        (bounds.min, bounds.width(), bounds.height())
    };
    let axis_dim = |extent: f64| ((extent / cutoff_radius).ceil() as usize).max(1);
    let dims = (axis_dim(w), axis_dim(h));
    let cells = dims
        .0
        .checked_mul(dims.1)
        .filter(|&c| c < u32::MAX as usize)
        .ok_or_else(|| LayoutError::InvalidParameter("grid too fine for layout extent".into()))?;

    let mut grid = UniformGrid {
        origin,
        cell_size: cutoff_radius,
        dims,
        cell_start: vec![0; cells + 1],
        items: vec![0; positions.len()],
    };
    let cell_ids: Vec<usize> = positions
        .iter()
        .map(|&p| {
            let (cx, cy) = grid.cell_of(p);
            cy * dims.0 + cx
        })
        .collect();
    for &c in &cell_ids {
        grid.cell_start[c + 1] += 1;
    }
    for c in 0..cells {
        grid.cell_start[c + 1] += grid.cell_start[c];
    }
    let mut fill: Vec<u32> = grid.cell_start[..cells].to_vec();
    for (v, &c) in cell_ids.iter().enumerate() {
        grid.items[fill[c] as usize] = v as u32;
        fill[c] += 1;
    }
    Ok(grid)
}

pub fn repulsive_grid(grid: &UniformGrid, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<()> {
    let r = cutoff_radius(k);
    for_each_vertex(disp, exec.parallel, |v, scratch| {
        grid.neighbors_within(positions, v, r, scratch);
        if exec.deterministic {
            scratch.sort_unstable();
        }
        Ok(accumulate_repulsion(positions, v, k, scratch))
    })
}

pub struct GridBackend;

impl RepulsiveBackend for GridBackend {
    fn id(&self) -> BackendId {
        BackendId::Grid
    }

    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes> {
        let start = Instant::now();
        let grid = build_grid(positions, cutoff_radius(k))?;
        let built = Instant::now();
        repulsive_grid(&grid, positions, k, disp, exec)?;
        Ok(PhaseTimes {
            build: built - start,
            traversal: built.elapsed(),
        })
    }
}
