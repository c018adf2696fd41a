//! Repulsive-phase backends.
//!
//! Every backend produces, for each vertex `v`, the sum of cutoff repulsion
//! from all `u != v` with `|p(v) - p(u)| < 2k`. With deterministic
//! accumulation the contributions are summed in ascending `u`, which makes
//! all backends bitwise interchangeable.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;

use crate::error::{LayoutError, Result};
use crate::geometry::Vec2;

pub mod grid;
pub mod lbvh;
pub mod naive;
pub mod rayquery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackendId {
    Naive,
    NaiveCutoff,
    Grid,
    Lbvh,
    RayQuery,
}

impl BackendId {
    pub const ALL: [BackendId; 5] = [
        BackendId::Naive,
        BackendId::NaiveCutoff,
        BackendId::Grid,
        BackendId::Lbvh,
        BackendId::RayQuery,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendId::Naive => "naive",
            BackendId::NaiveCutoff => "naive-cutoff",
            BackendId::Grid => "grid",
            BackendId::Lbvh => "lbvh",
            BackendId::RayQuery => "rayquery",
        }
    }

    /// Whether the backend builds a spatial structure each iteration.
    pub fn has_build_phase(self) -> bool {
        matches!(self, BackendId::Grid | BackendId::Lbvh | BackendId::RayQuery)
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendId {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self> {
        BackendId::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| LayoutError::UnknownBackend(s.to_string()))
    }
}

/// How a backend may execute its query loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    pub parallel: bool,
    /// Sum neighbor contributions in ascending id order.
    pub deterministic: bool,
}

impl Default for Exec {
    fn default() -> Self {
        Exec {
            parallel: false,
            deterministic: true,
        }
    }
}

/// Wall time split of one repulsive phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub build: Duration,
    pub traversal: Duration,
}

pub trait RepulsiveBackend: Send {
    fn id(&self) -> BackendId;

    /// Overwrites `disp` with the repulsive dispersion for `positions`.
    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes>;
}

pub fn make_backend(id: BackendId) -> Box<dyn RepulsiveBackend> {
    match id {
        BackendId::Naive => Box::new(naive::NaiveBackend),
        BackendId::NaiveCutoff => Box::new(naive::NaiveCutoffBackend),
        BackendId::Grid => Box::new(grid::GridBackend),
        BackendId::Lbvh => Box::new(lbvh::LbvhBackend),
        BackendId::RayQuery => Box::new(rayquery::RayQueryBackend),
    }
}

/// Runs `per_vertex(v, scratch)` for every vertex, sequentially or on the
/// rayon pool. Each call owns only its own output slot.
pub(crate) fn for_each_vertex<F>(disp: &mut [Vec2], parallel: bool, per_vertex: F) -> Result<()>
where
    F: Fn(usize, &mut Vec<u32>) -> Result<Vec2> + Sync,
{
    if parallel {
        disp.par_iter_mut()
            .enumerate()
            .try_for_each_init(Vec::new, |scratch, (v, d)| {
                *d = per_vertex(v, scratch)?;
                Ok(())
            })
    } else {
        let mut scratch = Vec::new();
        for (v, d) in disp.iter_mut().enumerate() {
            *d = per_vertex(v, &mut scratch)?;
        }
        Ok(())
    }
}
