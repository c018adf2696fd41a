//! The iteration loop: recompute `k`, repulse via the selected backend,
//! attract along edges, displace with a cooling temperature.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use crate::backend::{make_backend, BackendId, Exec, RepulsiveBackend};
use crate::error::{LayoutError, Result};
use crate::geometry::Vec2;
use crate::graph::Graph;
use crate::layout::{
    attractive_phase, attractive_phase_parallel, compute_k, cool, displace, displace_parallel, init_layout, Layout,
};

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub backend: BackendId,
    pub iterations: usize,
    pub seed: u64,
    pub initial_extent: f64,
    /// Sum contributions in a fixed order (ascending neighbor id, canonical
    /// edge order). Off allows traversal-order sums and a parallel
    /// attractive phase.
    pub deterministic: bool,
    pub parallel: bool,
    /// Worker threads when `parallel`; 0 uses rayon's global pool.
    pub threads: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            backend: BackendId::Lbvh,
            iterations: 100,
            seed: 42,
            initial_extent: 100.0,
            deterministic: true,
            parallel: false,
            threads: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(LayoutError::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.initial_extent > 0.0 && self.initial_extent.is_finite()) {
            return Err(LayoutError::InvalidParameter(format!(
                "initial extent must be positive, got {}",
                self.initial_extent
            )));
        }
        Ok(())
    }

    /// Starting temperature: a tenth of the initial square.
    pub fn initial_temperature(&self) -> f64 {
        self.initial_extent / 10.0
    }

    fn exec(&self) -> Exec {
        Exec {
            parallel: self.parallel,
            deterministic: self.deterministic,
        }
    }
}

/// Wall times of one iteration, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IterationTiming {
    pub iteration: usize,
    pub build_ms: f64,
    pub traversal_ms: f64,
    pub attract_ms: f64,
    pub displace_ms: f64,
    pub total_ms: f64,
}

impl IterationTiming {
    pub fn repulsive_ms(&self) -> f64 {
        self.build_ms + self.traversal_ms
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingReport {
    pub backend: Option<BackendId>,
    pub iterations: Vec<IterationTiming>,
}

pub const TIMING_CSV_HEADER: &str = "iteration,build_ms,traversal_ms,attract_ms,displace_ms,total_ms";

impl TimingReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TIMING_CSV_HEADER}")?;
        for t in &self.iterations {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                t.iteration, t.build_ms, t.traversal_ms, t.attract_ms, t.displace_ms, t.total_ms
            )?;
        }
        Ok(())
    }

    /// Mean over the iterations after the first `skip`.
    pub fn mean_after(&self, skip: usize) -> IterationTiming {
        let rows = &self.iterations[skip.min(self.iterations.len())..];
        let n = rows.len().max(1) as f64;
        let mut m = IterationTiming::default();
        for r in rows {
            m.build_ms += r.build_ms;
            m.traversal_ms += r.traversal_ms;
            m.attract_ms += r.attract_ms;
            m.displace_ms += r.displace_ms;
            m.total_ms += r.total_ms;
        }
        m.build_ms /= n;
        m.traversal_ms /= n;
        m.attract_ms /= n;
        m.displace_ms /= n;
        m.total_ms /= n;
        m
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn check_finite(values: &[Vec2], phase: &'static str, iteration: usize) -> Result<()> {
    match values.iter().position(|p| !p.is_finite()) {
        Some(vertex) => Err(LayoutError::NonFinite {
            vertex,
            phase,
            iteration,
        }),
        None => Ok(()),
    }
}

/// Random initial placement followed by [`run_layout_from`].
pub fn run_layout(g: &Graph, config: &EngineConfig) -> Result<(Layout, TimingReport)> {
    config.validate()?;
    let layout = init_layout(g, config.initial_extent, config.seed)?;
    run_layout_from(g, layout, config)
}

pub fn run_layout_from(g: &Graph, layout: Layout, config: &EngineConfig) -> Result<(Layout, TimingReport)> {
    config.validate()?;
    if layout.len() != g.vertex_count() {
        return Err(LayoutError::InvalidParameter(format!(
            "layout has {} positions for {} vertices",
            layout.len(),
            g.vertex_count()
        )));
    }
    check_finite(&layout.positions, "initial", 0)?;
    let mut backend = make_backend(config.backend);
    if config.parallel && config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| LayoutError::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| iterate(g, layout, config, backend.as_mut()))
    } else {
        iterate(g, layout, config, backend.as_mut())
    }
}

fn iterate(
    g: &Graph,
    mut layout: Layout,
    config: &EngineConfig,
    backend: &mut dyn RepulsiveBackend,
) -> Result<(Layout, TimingReport)> {
    let exec = config.exec();
    let t0 = config.initial_temperature();
    let n = g.vertex_count();
    let mut disp = vec![Vec2::ZERO; n];
    let mut report = TimingReport {
        backend: Some(backend.id()),
        iterations: Vec::with_capacity(config.iterations),
    };

    for i in 0..config.iterations {
        let start = Instant::now();
        let k = compute_k(&layout.positions);
        disp.fill(Vec2::ZERO);

        let rep = backend.repulse(&layout.positions, k, &mut disp, exec)?;
        check_finite(&disp, "repulsive", i)?;

        let attract_start = Instant::now();
        if exec.deterministic || !exec.parallel {
            attractive_phase(g, &layout.positions, k, &mut disp);
        } else {
            attractive_phase_parallel(g, &layout.positions, k, &mut disp);
        }
        check_finite(&disp, "attractive", i)?;
        let attract = attract_start.elapsed();

        let displace_start = Instant::now();
        let t = cool(t0, i, config.iterations);
        if exec.parallel {
            displace_parallel(&mut layout.positions, &disp, t);
        } else {
            displace(&mut layout.positions, &disp, t);
        }
        check_finite(&layout.positions, "displace", i)?;
        let displaced = displace_start.elapsed();

        report.iterations.push(IterationTiming {
            iteration: i,
            build_ms: ms(rep.build),
            traversal_ms: ms(rep.traversal),
            attract_ms: ms(attract),
            displace_ms: ms(displaced),
            total_ms: ms(start.elapsed()),
        });
    }
    Ok((layout, report))
}
