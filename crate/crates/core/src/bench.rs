//! Per-phase benchmark records and the binary-tree scaling study.

use std::io::{self, Write};
use std::ops::RangeInclusive;

use crate::backend::BackendId;
use crate::engine::{run_layout, EngineConfig};
use crate::error::{LayoutError, Result};
use crate::graph::{gen_binary_tree, Graph};

pub const BENCH_CSV_HEADER: &str =
    "dataset,backend,iterations,build_ms,traversal_ms,build_pct,repulsive_ms,full_iter_ms,speedup";

/// Mean per-iteration times for one (dataset, backend) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub dataset: String,
    pub backend: BackendId,
    /// Measured iterations, warm-up excluded.
    pub iterations: usize,
    pub build_ms: f64,
    pub traversal_ms: f64,
    /// `build / (build + traversal) · 100`.
    pub build_pct: f64,
    pub repulsive_ms: f64,
    pub full_iter_ms: f64,
    /// Reference repulsive time over this repulsive time.
    pub speedup: Option<f64>,
}

impl BenchRecord {
    pub fn traversal_pct(&self) -> f64 {
        if self.repulsive_ms > 0.0 {
            100.0 - self.build_pct
        } else {
            0.0
        }
    }

    pub fn csv_row(&self) -> String {
        let speedup = self.speedup.map(|s| format!("{s:?}")).unwrap_or_default();
        format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            self.dataset,
            self.backend,
            self.iterations,
            self.build_ms,
            self.traversal_ms,
            self.build_pct,
            self.repulsive_ms,
            self.full_iter_ms,
            speedup
        )
    }
}

pub fn write_bench_csv<W: Write>(records: &[BenchRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{BENCH_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    /// Iterations averaged per run.
    pub iterations: usize,
    /// Leading iterations discarded.
    pub warmup: usize,
    pub seed: u64,
    pub initial_extent: f64,
    pub parallel: bool,
    pub threads: usize,
    /// Backend whose repulsive time is the speedup numerator.
    pub reference: BackendId,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            iterations: 20,
            warmup: 2,
            seed: 42,
            initial_extent: 100.0,
            parallel: false,
            threads: 0,
            reference: BackendId::NaiveCutoff,
        }
    }
}

/// Runs every backend on `graph` in turn. Speedups are filled in when the
/// reference backend is among `backends`.
pub fn bench_graph(
    label: &str,
    graph: &Graph,
    backends: &[BackendId],
    opts: &BenchOptions,
) -> Result<Vec<BenchRecord>> {
    if opts.iterations == 0 {
        return Err(LayoutError::InvalidParameter(
            "bench needs at least one measured iteration".into(),
        ));
    }
    let mut records = Vec::with_capacity(backends.len());
    for &backend in backends {
        let cfg = EngineConfig {
            backend,
            iterations: opts.warmup + opts.iterations,
            seed: opts.seed,
            initial_extent: opts.initial_extent,
            deterministic: true,
            parallel: opts.parallel,
            threads: opts.threads,
        };
        let (_, report) = run_layout(graph, &cfg)?;
        let mean = report.mean_after(opts.warmup);
        let repulsive = mean.build_ms + mean.traversal_ms;
        records.push(BenchRecord {
            dataset: label.to_string(),
            backend,
            iterations: opts.iterations,
            build_ms: mean.build_ms,
            traversal_ms: mean.traversal_ms,
            build_pct: if repulsive > 0.0 {
                mean.build_ms / repulsive * 100.0
            } else {
                0.0
            },
            repulsive_ms: repulsive,
            full_iter_ms: mean.total_ms,
            speedup: None,
        });
    }
    if let Some(reference) = records
        .iter()
        .find(|r| r.backend == opts.reference)
        .map(|r| r.repulsive_ms)
    {
        for r in &mut records {
            if r.repulsive_ms > 0.0 {
                r.speedup = Some(reference / r.repulsive_ms);
            }
        }
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRow {
    pub depth: u32,
    pub vertices: usize,
    pub record: BenchRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleReport {
    pub rows: Vec<ScaleRow>,
    /// Log-log slope of repulsive time against vertex count, per backend;
    /// absent with fewer than two depths.
    pub slopes: Vec<(BackendId, f64)>,
}

impl ScaleReport {
    pub fn slope(&self, backend: BackendId) -> Option<f64> {
        self.slopes.iter().find(|(b, _)| *b == backend).map(|&(_, s)| s)
    }

    pub fn records(&self) -> Vec<BenchRecord> {
        self.rows.iter().map(|r| r.record.clone()).collect()
    }

    /// `(depth, speedup)` for one backend, ascending depth.
    pub fn speedups(&self, backend: BackendId) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .filter(|r| r.record.backend == backend)
            .filter_map(|r| r.record.speedup.map(|s| (r.depth, s)))
            .collect()
    }

    pub fn write_slopes_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "backend,slope")?;
        for (b, s) in &self.slopes {
            writeln!(out, "{b},{s:?}")?;
        }
        Ok(())
    }
}

pub const MAX_SCALE_DEPTH: u32 = 18;
pub const MIN_SCALE_DEPTH: u32 = 4;

/// Complete binary trees over `depths`, every backend per depth.
pub fn bench_scale(depths: RangeInclusive<u32>, backends: &[BackendId], opts: &BenchOptions) -> Result<ScaleReport> {
    let (lo, hi) = (*depths.start(), *depths.end());
    if lo < MIN_SCALE_DEPTH || hi > MAX_SCALE_DEPTH || lo > hi {
        return Err(LayoutError::InvalidParameter(format!(
            "depth range {lo}..={hi} outside {MIN_SCALE_DEPTH}..={MAX_SCALE_DEPTH}"
        )));
    }
    let mut rows = Vec::new();
    for depth in depths {
        let g = gen_binary_tree(depth)?;
        for record in bench_graph(&format!("btree-d{depth}"), &g, backends, opts)? {
            rows.push(ScaleRow {
                depth,
                vertices: g.vertex_count(),
                record,
            });
        }
    }
    let slopes = backends
        .iter()
        .filter_map(|&b| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.record.backend == b)
                .map(|r| (r.vertices as f64, r.record.repulsive_ms))
                .collect();
            loglog_slope(&pts).map(|s| (b, s))
        })
        .collect();
    Ok(ScaleReport { rows, slopes })
}

/// Least-squares slope of `ln y` against `ln x`. Points with non-positive
/// coordinates are ignored; `None` with fewer than two distinct `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let quad: Vec<_> = (1..8)
            .map(|i| (i as f64 * 10.0, 3.0 * (i as f64 * 10.0).powi(2)))
            .collect();
        assert!((loglog_slope(&quad).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<_> = (1..8).map(|i| (2f64.powi(i), 0.5 * 2f64.powi(i))).collect();
        assert!((loglog_slope(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(4.0, 1.0)]), None);
        assert_eq!(loglog_slope(&[(4.0, 1.0), (4.0, 2.0)]), None);
    }

    #[test]
    fn record_fields_are_consistent() {
        let g = gen_binary_tree(6).unwrap();
        let opts = BenchOptions {
            iterations: 3,
            ..Default::default()
        };
        let recs = bench_graph("t", &g, &[BackendId::NaiveCutoff, BackendId::Lbvh], &opts).unwrap();
        assert_eq!(recs.len(), 2);
        let naive = &recs[0];
        assert_eq!(naive.build_ms, 0.0);
        assert_eq!(naive.build_pct, 0.0);
        assert_eq!(naive.speedup, Some(1.0));
        let lb = &recs[1];
        assert!((lb.build_pct + lb.traversal_pct() - 100.0).abs() < 1e-9);
        assert!((lb.repulsive_ms - (lb.build_ms + lb.traversal_ms)).abs() < 1e-12);
        let expect = naive.repulsive_ms / lb.repulsive_ms;
        assert!((lb.speedup.unwrap() - expect).abs() <= 1e-12 * expect);
        assert!(lb.full_iter_ms >= lb.repulsive_ms);
    }

    #[test]
    fn no_speedup_without_reference() {
        let g = gen_binary_tree(4).unwrap();
        let opts = BenchOptions {
            iterations: 1,
            warmup: 0,
            ..Default::default()
        };
        let recs = bench_graph("t", &g, &[BackendId::Grid], &opts).unwrap();
        assert_eq!(recs[0].speedup, None);
        assert!(recs[0].csv_row().ends_with(','));
    }

    #[test]
    fn scale_rows_and_slopes() {
        let opts = BenchOptions {
            iterations: 2,
            warmup: 1,
            ..Default::default()
        };
        let rep = bench_scale(4..=6, &[BackendId::NaiveCutoff, BackendId::RayQuery], &opts).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert!(rep.slope(BackendId::NaiveCutoff).is_some());
        let single = bench_scale(5..=5, &[BackendId::Lbvh], &opts).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.slopes.is_empty());
        assert!(bench_scale(2..=5, &[BackendId::Lbvh], &opts).is_err());
        assert!(bench_scale(4..=19, &[BackendId::Lbvh], &opts).is_err());
    }

    #[test]
    fn csv_header_and_columns() {
        let r = BenchRecord {
            dataset: "d".into(),
            backend: BackendId::Lbvh,
            iterations: 20,
            build_ms: 0.92,
            traversal_ms: 10.0,
            build_pct: 8.424908424908425,
            repulsive_ms: 10.92,
            full_iter_ms: 11.0,
            speedup: Some(2.5),
        };
        let mut buf = Vec::new();
        write_bench_csv(&[r], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), BENCH_CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "d,lbvh,20,0.92,10.0,8.424908424908425,10.92,11.0,2.5"
        );
    }
}
