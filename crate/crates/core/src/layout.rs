//! Layout state and the spring-embedder force model.

use std::io::{self, BufRead, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LayoutError, Result};
use crate::geometry::{Aabb, Vec2};
use crate::graph::Graph;

/// Below this separation two vertices count as coincident and the pair's
/// offset is replaced by a deterministic jitter vector of this length.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Lower bound applied to each extent of the layout box in [`compute_k`].
pub const MIN_EXTENT: f64 = 1.0;

/// Per-vertex positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub positions: Vec<Vec2>,
}

pub const LAYOUT_CSV_HEADER: &str = "id,x,y";

impl Layout {
    pub fn new(positions: Vec<Vec2>) -> Self {
        Layout { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.positions)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.positions.iter().position(|p| !p.is_finite())
    }

    /// `id,x,y` rows; floats use the shortest representation that parses
    /// back to the same bits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{LAYOUT_CSV_HEADER}")?;
        for (i, p) in self.positions.iter().enumerate() {
            writeln!(out, "{i},{:?},{:?}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut positions = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if lineno == 1 {
                if line.trim() != LAYOUT_CSV_HEADER {
                    return Err(LayoutError::Parse {
                        line: 1,
                        message: format!("expected header `{LAYOUT_CSV_HEADER}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| LayoutError::Parse { line: lineno, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let id: usize = fields[0].trim().parse().map_err(|e| err(format!("bad id: {e}")))?;
            if id != positions.len() {
                return Err(err(format!("ids must be dense and ascending, found {id}")));
            }
            let x: f64 = fields[1].trim().parse().map_err(|e| err(format!("bad x: {e}")))?;
            let y: f64 = fields[2].trim().parse().map_err(|e| err(format!("bad y: {e}")))?;
            positions.push(Vec2::new(x, y));
        }
        Ok(Layout { positions })
    }
}

/// Uniform i.i.d. placement in `[0, extent]²`.
///
/// The stream is ChaCha8 seeded via `seed_from_u64`; each coordinate takes
/// the top 53 bits of one `next_u64` scaled by `2^-53 · extent`, x before y.
pub fn init_layout(g: &Graph, extent: f64, seed: u64) -> Result<Layout> {
    init_positions(g.vertex_count(), extent, seed)
}

pub fn init_positions(vertex_count: usize, extent: f64, seed: u64) -> Result<Layout> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(LayoutError::InvalidParameter(format!(
            "initial extent must be positive and finite, got {extent}"
        )));
    }
    if vertex_count == 0 {
        return Err(LayoutError::InvalidParameter("graph has no vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let positions = (0..vertex_count)
        .map(|_| {
            let x = unit() * extent;
            let y = unit() * extent;
            Vec2::new(x, y)
        })
        .collect();
    Ok(Layout { positions })
}

/// Ideal edge length `sqrt(A / |V|)` over the layout's bounding box, each
/// side clamped below by [`MIN_EXTENT`].
pub fn compute_k(positions: &[Vec2]) -> f64 {
    let n = positions.len().max(1);
    let b = Aabb::from_points(positions);
    let (w, h) = if b.is_empty() {
        (0.0, 0.0)
    } else {
        (b.width(), b.height())
    };
    let area = w.max(MIN_EXTENT) * h.max(MIN_EXTENT);
    (area / n as f64).sqrt()
}

/// Scalars for one iteration. `cutoff_radius` is always exactly `2k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceParams {
    pub k: f64,
    pub cutoff_radius: f64,
    pub temperature: f64,
    pub iterations: usize,
    pub initial_extent: f64,
    pub min_separation_epsilon: f64,
}

impl ForceParams {
    pub fn new(k: f64, temperature: f64, iterations: usize, initial_extent: f64) -> Self {
        ForceParams {
            k,
            cutoff_radius: cutoff_radius(k),
            temperature,
            iterations,
            initial_extent,
            min_separation_epsilon: MIN_SEPARATION,
        }
    }
}

#[inline]
pub fn cutoff_radius(k: f64) -> f64 {
    2.0 * k
}

/// Repulsion `unit(Δ) · k²/|Δ|`.
#[inline]
pub fn f_rep(delta: Vec2, k: f64) -> Vec2 {
    let len = delta.length();
    delta / len * (k * k / len)
}

/// Repulsion truncated at `|Δ| >= 2k`.
#[inline]
pub fn f_rep_cutoff(delta: Vec2, k: f64) -> Vec2 {
    if within_radius(delta, cutoff_radius(k)) {
        f_rep(delta, k)
    } else {
        Vec2::ZERO
    }
}

/// Attraction `unit(Δ) · |Δ|²/k`.
#[inline]
pub fn f_att(delta: Vec2, k: f64) -> Vec2 {
    let len = delta.length();
    delta / len * (len * len / k)
}

/// The one neighbor predicate every backend shares: `|Δ| < r`, strict.
#[inline]
pub fn within_radius(delta: Vec2, r: f64) -> bool {
    delta.length() < r
}

/// Deterministic unit vector keyed on an unordered vertex pair.
pub fn pair_direction(a: usize, b: usize) -> Vec2 {
    let (lo, hi) = (a.min(b) as u64, a.max(b) as u64);
    let mut state = lo.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.rotate_left(32);
    let mut next = || {
        // splitmix64
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    for _ in 0..16 {
        let x = (next() >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0;
        let y = (next() >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0;
        let len = (x * x + y * y).sqrt();
        if len > 1e-3 && len <= 1.0 {
            return Vec2::new(x / len, y / len);
        }
    }
    Vec2::new(1.0, 0.0)
}

/// Offset `p(v) - p(u)`, replaced by an `ε`-length jitter when the two
/// vertices (nearly) coincide. The jitter is antisymmetric in `(v, u)`.
#[inline]
pub fn separated_delta(delta: Vec2, v: usize, u: usize) -> Vec2 {
    if delta.length() >= MIN_SEPARATION {
        return delta;
    }
    let dir = pair_direction(v, u) * MIN_SEPARATION;
    if v < u {
        dir
    } else {
        -dir
    }
}

/// Force on `v` from `u` without cutoff.
#[inline]
pub fn repulsion_pair(positions: &[Vec2], v: usize, u: usize, k: f64) -> Vec2 {
    f_rep(separated_delta(positions[v] - positions[u], v, u), k)
}

/// Force on `v` from `u` with the `2k` cutoff; `None` outside the radius.
#[inline]
pub fn repulsion_pair_cutoff(positions: &[Vec2], v: usize, u: usize, k: f64) -> Option<Vec2> {
    let delta = positions[v] - positions[u];
    if within_radius(delta, cutoff_radius(k)) {
        Some(f_rep(separated_delta(delta, v, u), k))
    } else {
        None
    }
}

/// Sums cutoff repulsion on `v` over `candidates`, in the given order.
///
/// Every backend funnels through this so that, given the same ascending
/// neighbor list, the floating-point sums are identical.
#[inline]
pub fn accumulate_repulsion(positions: &[Vec2], v: usize, k: f64, candidates: &[u32]) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for &u in candidates {
        let u = u as usize;
        if u == v {
            continue;
        }
        if let Some(f) = repulsion_pair_cutoff(positions, v, u, k) {
            acc += f;
        }
    }
    acc
}

/// Edge attraction in canonical edge order: `D(v) -= F`, `D(u) += F` with
/// `F = f_att(p(v) - p(u), k)`.
pub fn attractive_phase(g: &Graph, positions: &[Vec2], k: f64, disp: &mut [Vec2]) {
    for &(u, v) in g.edges() {
        let f = attraction_edge(positions, u as usize, v as usize, k);
        disp[v as usize] -= f;
        disp[u as usize] += f;
    }
}

/// Chunked attraction with per-chunk buffers merged at the end. Summation
/// order differs from [`attractive_phase`], so results match only to rounding.
pub fn attractive_phase_parallel(g: &Graph, positions: &[Vec2], k: f64, disp: &mut [Vec2]) {
    use rayon::prelude::*;
    let n = disp.len();
    let merged = g
        .edges()
        .par_chunks(4096)
        .fold(
            || vec![Vec2::ZERO; n],
            |mut local, chunk| {
                for &(u, v) in chunk {
                    let f = attraction_edge(positions, u as usize, v as usize, k);
                    local[v as usize] -= f;
                    local[u as usize] += f;
                }
                local
            },
        )
        .reduce(
            || vec![Vec2::ZERO; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    disp.iter_mut().zip(merged).for_each(|(d, m)| *d += m);
}

#[inline]
fn attraction_edge(positions: &[Vec2], u: usize, v: usize, k: f64) -> Vec2 {
    f_att(separated_delta(positions[v] - positions[u], v, u), k)
}

/// Moves each vertex along its dispersion by at most `t`.
pub fn displace(positions: &mut [Vec2], disp: &[Vec2], t: f64) {
    for (p, &d) in positions.iter_mut().zip(disp) {
        *p = displaced(*p, d, t);
    }
}

pub fn displace_parallel(positions: &mut [Vec2], disp: &[Vec2], t: f64) {
    use rayon::prelude::*;
    positions
        .par_iter_mut()
        .zip(disp.par_iter())
        .for_each(|(p, &d)| *p = displaced(*p, d, t));
}

#[inline]
fn displaced(p: Vec2, d: Vec2, t: f64) -> Vec2 {
    let len = d.length();
    if len > 0.0 {
        p + d / len * len.min(t)
    } else {
        p
    }
}

/// Linear cooling `t0 · (1 - i/N)`.
pub fn cool(t0: f64, iteration: usize, total: usize) -> f64 {
    t0 * (1.0 - iteration as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_binary_tree;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn close(a: Vec2, b: Vec2) -> bool {
        (a.x - b.x).abs() <= TOL && (a.y - b.y).abs() <= TOL
    }

    #[test]
    fn f_rep_examples() {
        assert!(close(f_rep(Vec2::new(1.0, 0.0), 1.0), Vec2::new(1.0, 0.0)));
        assert!(close(f_rep(Vec2::new(0.0, 2.0), 1.0), Vec2::new(0.0, 0.5)));
        assert!(close(f_rep(Vec2::new(3.0, 4.0), 2.0), Vec2::new(0.48, 0.64)));
    }

    #[test]
    fn f_rep_cutoff_examples() {
        assert_eq!(f_rep_cutoff(Vec2::new(3.0, 0.0), 1.0), Vec2::ZERO);
        assert!(close(f_rep_cutoff(Vec2::new(1.0, 0.0), 1.0), Vec2::new(1.0, 0.0)));
        assert_eq!(f_rep_cutoff(Vec2::new(2.0, 0.0), 1.0), Vec2::ZERO);
    }

    #[test]
    fn f_att_examples() {
        assert!(close(f_att(Vec2::new(2.0, 0.0), 1.0), Vec2::new(4.0, 0.0)));
        assert!(close(f_att(Vec2::new(0.0, 1.0), 2.0), Vec2::new(0.0, 0.5)));
        assert!(close(f_att(Vec2::new(3.0, 4.0), 5.0), Vec2::new(3.0, 4.0)));
    }

    #[test]
    fn compute_k_examples() {
        let grid: Vec<Vec2> = (0..100)
            .map(|i| Vec2::new((i % 10) as f64 * 100.0 / 9.0, (i / 10) as f64 * 100.0 / 9.0))
            .collect();
        assert!((compute_k(&grid) - 10.0).abs() <= TOL);
        let line: Vec<Vec2> = [0.0, 2.0, 5.0, 8.0].iter().map(|&x| Vec2::new(x, 3.0)).collect();
        assert!((compute_k(&line) - 2f64.sqrt()).abs() <= TOL);
        assert_eq!(compute_k(&[Vec2::new(4.0, -1.0)]), 1.0);
    }

    #[test]
    fn cool_examples() {
        assert_eq!(cool(10.0, 0, 100), 10.0);
        assert!((cool(10.0, 50, 100) - 5.0).abs() <= TOL);
        assert!((cool(10.0, 99, 100) - 0.1).abs() <= TOL);
    }

    #[test]
    fn displace_examples() {
        let mut p = vec![Vec2::ZERO; 3];
        let d = [Vec2::new(3.0, 0.0), Vec2::new(0.5, 0.0), Vec2::ZERO];
        displace(&mut p, &d, 1.0);
        assert!(close(p[0], Vec2::new(1.0, 0.0)));
        assert!(close(p[1], Vec2::new(0.5, 0.0)));
        assert_eq!(p[2], Vec2::ZERO);
    }

    #[test]
    fn attractive_single_edge() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let pos = [Vec2::ZERO, Vec2::new(2.0, 0.0)];
        let mut disp = [Vec2::ZERO; 2];
        attractive_phase(&g, &pos, 1.0, &mut disp);
        assert!(close(disp[1], Vec2::new(-4.0, 0.0)));
        assert!(close(disp[0], Vec2::new(4.0, 0.0)));
    }

    #[test]
    fn attractive_without_edges_is_noop() {
        let g = Graph::new(3, []).unwrap();
        let pos = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let mut disp = [Vec2::new(1.5, -2.0); 3];
        attractive_phase(&g, &pos, 1.0, &mut disp);
        assert_eq!(disp, [Vec2::new(1.5, -2.0); 3]);
    }

    #[test]
    fn parallel_attraction_matches_to_rounding() {
        let g = gen_binary_tree(9).unwrap();
        let pos = init_layout(&g, 50.0, 3).unwrap().positions;
        let mut a = vec![Vec2::ZERO; g.vertex_count()];
        let mut b = a.clone();
        attractive_phase(&g, &pos, 2.0, &mut a);
        attractive_phase_parallel(&g, &pos, 2.0, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.x - y.x).abs() <= 1e-9 * (1.0 + x.x.abs()));
            assert!((x.y - y.y).abs() <= 1e-9 * (1.0 + x.y.abs()));
        }
    }

    #[test]
    fn init_layout_is_deterministic_and_in_range() {
        let g = gen_binary_tree(12).unwrap();
        let a = init_layout(&g, 100.0, 7).unwrap();
        let b = init_layout(&g, 100.0, 7).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert!(a
            .positions
            .iter()
            .all(|p| (0.0..=100.0).contains(&p.x) && (0.0..=100.0).contains(&p.y)));
        assert_ne!(a, init_layout(&g, 100.0, 8).unwrap());
    }

    #[test]
    fn init_layout_mean_is_centered() {
        let l = init_positions(100_000, 1.0, 42).unwrap();
        let n = l.len() as f64;
        let mx = l.positions.iter().map(|p| p.x).sum::<f64>() / n;
        let my = l.positions.iter().map(|p| p.y).sum::<f64>() / n;
        assert!((mx - 0.5).abs() < 0.01 && (my - 0.5).abs() < 0.01, "{mx} {my}");
    }

    #[test]
    fn init_layout_rejects_bad_extent() {
        let g = gen_binary_tree(1).unwrap();
        assert!(init_layout(&g, 0.0, 1).is_err());
        assert!(init_layout(&g, -1.0, 1).is_err());
        assert!(init_layout(&g, f64::NAN, 1).is_err());
    }

    #[test]
    fn coincident_pair_gets_opposite_jitter() {
        let pos = [Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)];
        let a = repulsion_pair(&pos, 0, 1, 1.0);
        let b = repulsion_pair(&pos, 1, 0, 1.0);
        assert!(a.is_finite() && a.length() > 0.0);
        assert_eq!(a, -b);
        assert_eq!(pair_direction(3, 9), pair_direction(9, 3));
        assert!((pair_direction(3, 9).length() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn layout_csv_roundtrips_bits() {
        let l = Layout::new(vec![Vec2::new(0.1, 1e-300), Vec2::new(-3.5e17, 1.0 / 3.0)]);
        let back = Layout::read_csv(l.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, l);
        assert!(Layout::read_csv("id,x\n".as_bytes()).is_err());
    }

    fn arb_delta() -> impl Strategy<Value = Vec2> {
        (-1e3f64..1e3, -1e3f64..1e3)
            .prop_filter("nonzero", |(x, y)| (x * x + y * y).sqrt() > 1e-6)
            .prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn f_rep_antisymmetric_with_inverse_magnitude(d in arb_delta(), k in 0.01f64..100.0) {
            let f = f_rep(d, k);
            prop_assert_eq!(f_rep(-d, k), -f);
            let expect = k * k / d.length();
            prop_assert!((f.length() - expect).abs() <= 1e-12 * expect.max(1.0));
        }

        #[test]
        fn cutoff_matches_inside_and_vanishes_outside(d in arb_delta(), k in 0.01f64..100.0) {
            let f = f_rep_cutoff(d, k);
            if d.length() < 2.0 * k {
                prop_assert_eq!(f, f_rep(d, k));
            } else {
                prop_assert_eq!(f, Vec2::ZERO);
            }
        }

        #[test]
        fn attraction_conserves_momentum(seed in any::<u64>(), depth in 1u32..7, k in 0.1f64..10.0) {
            let g = gen_binary_tree(depth).unwrap();
            let pos = init_layout(&g, 10.0, seed).unwrap().positions;
            let mut disp = vec![Vec2::ZERO; g.vertex_count()];
            attractive_phase(&g, &pos, k, &mut disp);
            let total = disp.iter().fold(Vec2::ZERO, |a, &b| a + b);
            let scale: f64 = disp.iter().map(|d| d.length()).sum::<f64>().max(1.0);
            prop_assert!(total.length() <= 1e-12 * scale);
        }

        #[test]
        fn displace_bounded_by_temperature(dx in -1e6f64..1e6, dy in -1e6f64..1e6, t in 0.0f64..50.0) {
            let start = Vec2::new(3.0, -2.0);
            let mut p = [start];
            displace(&mut p, &[Vec2::new(dx, dy)], t);
            prop_assert!((p[0] - start).length() <= t * (1.0 + 1e-12));
        }
    }
}
