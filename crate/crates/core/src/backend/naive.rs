//! All-pairs reference backends.

use std::time::Instant;

use super::{for_each_vertex, BackendId, Exec, PhaseTimes, RepulsiveBackend};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::layout::{cutoff_radius, repulsion_pair, repulsion_pair_cutoff};

/// Full double loop without cutoff.
pub fn repulsive_naive(positions: &[Vec2], k: f64, disp: &mut [Vec2], parallel: bool) {
    let _ = for_each_vertex(disp, parallel, |v, _| {
        let mut acc = Vec2::ZERO;
        for u in 0..positions.len() {
            if u != v {
                acc += repulsion_pair(positions, v, u, k);
            }
        }
        Ok(acc)
    });
}

/// Double loop with the `2k` cutoff, summed in ascending `u`. This is the
/// oracle every accelerated backend is compared against.
pub fn repulsive_naive_cutoff(positions: &[Vec2], k: f64, disp: &mut [Vec2], parallel: bool) {
    let r = cutoff_radius(k);
    let _ = for_each_vertex(disp, parallel, |v, _| {
        let pv = positions[v];
        let mut acc = Vec2::ZERO;
        for (u, pu) in positions.iter().enumerate() {
            // |dx| >= r implies the computed norm is >= r as well
            if u == v || (pv.x - pu.x).abs() >= r {
                continue;
            }
            if let Some(f) = repulsion_pair_cutoff(positions, v, u, k) {
                acc += f;
            }
        }
        Ok(acc)
    });
}

pub struct NaiveBackend;

impl RepulsiveBackend for NaiveBackend {
    fn id(&self) -> BackendId {
        BackendId::Naive
    }

    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes> {
        let start = Instant::now();
        repulsive_naive(positions, k, disp, exec.parallel);
        Ok(PhaseTimes {
            build: Default::default(),
            traversal: start.elapsed(),
        })
    }
}

pub struct NaiveCutoffBackend;

impl RepulsiveBackend for NaiveCutoffBackend {
    fn id(&self) -> BackendId {
        BackendId::NaiveCutoff
    }

    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes> {
        let start = Instant::now();
        repulsive_naive_cutoff(positions, k, disp, exec.parallel);
        Ok(PhaseTimes {
            build: Default::default(),
            traversal: start.elapsed(),
        })
    }
}
