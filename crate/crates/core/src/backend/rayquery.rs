//! Reversed neighbor query: instead of gathering points inside a circle
//! around each vertex, place a disc of radius `2k` on every vertex and ask
//! which discs contain the query vertex. A zero-length probe ray at `p(v)`
//! reduces to a point-containment walk over a BVH of disc bounds.

use std::time::Instant;

use super::lbvh::{world_bounds, Lbvh};
use super::{for_each_vertex, BackendId, Exec, PhaseTimes, RepulsiveBackend};
use crate::error::{LayoutError, Result};
use crate::geometry::{Aabb, Vec2};
use crate::layout::{accumulate_repulsion, cutoff_radius, within_radius};

/// Equal-radius discs centered on the layout positions.
#[derive(Clone, Copy, Debug)]
pub struct DiscSet<'a> {
    pub centers: &'a [Vec2],
    pub radius: f64,
}

impl DiscSet<'_> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Square of side `2·radius` around disc `i`.
    pub fn aabb(&self, i: usize) -> Aabb {
        Aabb::around(self.centers[i], self.radius)
    }

    pub fn aabbs(&self) -> Vec<Aabb> {
        (0..self.len()).map(|i| self.aabb(i)).collect()
    }
}

/// Zero-length probe cast from a vertex position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonRay {
    pub origin: Vec2,
    pub owner: u32,
}

/// BVH whose leaves are disc bounds; Morton keys come from the centers.
#[derive(Clone, Debug)]
pub struct DiscBvh {
    pub bvh: Lbvh,
    pub radius: f64,
}

pub fn build_disc_bvh(centers: &[Vec2], cutoff_radius: f64) -> Result<DiscBvh> {
    if !(cutoff_radius > 0.0 && cutoff_radius.is_finite()) {
        return Err(LayoutError::InvalidParameter(format!(
            "disc radius must be positive, got {cutoff_radius}"
        )));
    }
    if centers.is_empty() {
        return Err(LayoutError::InvalidParameter("no discs to build over".into()));
    }
    let discs = DiscSet {
        centers,
        radius: cutoff_radius,
    };
    Ok(DiscBvh {
        bvh: Lbvh::build(centers, &discs.aabbs(), &world_bounds(centers)),
        radius: cutoff_radius,
    })
}

/// Discs other than the ray owner's that contain the ray origin, unsorted.
/// Returns the visited node count.
pub fn trace_unsorted(discs: &DiscBvh, centers: &[Vec2], ray: EpsilonRay, out: &mut Vec<u32>) -> Result<usize> {
    out.clear();
    let r = discs.radius;
    discs.bvh.traverse(
        |b| b.contains_point(ray.origin),
        |u| {
            if u != ray.owner && within_radius(ray.origin - centers[u as usize], r) {
                out.push(u);
            }
        },
    )
}

/// Ascending ids `u != self_id` with `|center(u) - origin| < radius`.
pub fn point_query(discs: &DiscBvh, centers: &[Vec2], origin: Vec2, self_id: u32, out: &mut Vec<u32>) -> Result<usize> {
    let visited = trace_unsorted(discs, centers, EpsilonRay { origin, owner: self_id }, out)?;
    out.sort_unstable();
    Ok(visited)
}

pub fn repulsive_rayquery(discs: &DiscBvh, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<()> {
    for_each_vertex(disp, exec.parallel, |v, scratch| {
        let ray = EpsilonRay {
            origin: positions[v],
            owner: v as u32,
        };
        trace_unsorted(discs, positions, ray, scratch)?;
        if exec.deterministic {
            scratch.sort_unstable();
        }
        Ok(accumulate_repulsion(positions, v, k, scratch))
    })
}

pub struct RayQueryBackend;

impl RepulsiveBackend for RayQueryBackend {
    fn id(&self) -> BackendId {
        BackendId::RayQuery
    }

    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes> {
        let start = Instant::now();
        let discs = build_disc_bvh(positions, cutoff_radius(k))?;
        let built = Instant::now();
        repulsive_rayquery(&discs, positions, k, disp, exec)?;
        Ok(PhaseTimes {
            build: built - start,
            traversal: built.elapsed(),
        })
    }
}
