//! Linear BVH over 2-D primitives.
//!
//! Primitives are ordered along a 32-bit Morton curve (16 bits per axis)
//! and the hierarchy is Karras' radix tree over the sorted codes: internal
//! node `i` covers a contiguous key range and splits it at the highest
//! differing bit, which amounts to a middle split of the quantized domain.
//! Duplicate codes are disambiguated by their position in the sorted order.

use std::time::Instant;

use super::{for_each_vertex, BackendId, Exec, PhaseTimes, RepulsiveBackend};
use crate::error::{LayoutError, Result};
use crate::geometry::{Aabb, Vec2};
use crate::layout::{accumulate_repulsion, cutoff_radius, within_radius};

/// Capacity of the fixed traversal stack.
pub const STACK_DEPTH: usize = 64;

const QUANT_MAX: f64 = 65535.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MortonCode {
    pub code: u32,
    pub primitive: u32,
}

/// Spreads the 16 low bits of `v` onto the even bit positions.
#[inline]
pub fn part1by1(v: u16) -> u32 {
    let mut x = v as u32;
    x = (x | (x << 8)) & 0x00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333;
    x = (x | (x << 1)) & 0x5555_5555;
    x
}

#[inline]
pub fn compact1by1(v: u32) -> u16 {
    let mut x = v & 0x5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF;
    x as u16
}

/// x on even bits, y on odd bits.
#[inline]
pub fn interleave(x: u16, y: u16) -> u32 {
    part1by1(x) | (part1by1(y) << 1)
}

#[inline]
pub fn deinterleave(code: u32) -> (u16, u16) {
    (compact1by1(code), compact1by1(code >> 1))
}

#[inline]
fn quantize_axis(v: f64, min: f64, extent: f64) -> u16 {
    if extent.is_nan() || extent <= 0.0 {
        return 0;
    }
    let q = ((v - min) / extent * QUANT_MAX).floor();
    if q.is_nan() || q <= 0.0 {
        0
    } else if q >= QUANT_MAX {
        u16::MAX
    } else {
        q as u16
    }
}

pub fn quantize(p: Vec2, world: &Aabb) -> (u16, u16) {
    (
        quantize_axis(p.x, world.min.x, world.width()),
        quantize_axis(p.y, world.min.y, world.height()),
    )
}

pub fn morton_encode(p: Vec2, world: &Aabb) -> u32 {
    let (x, y) = quantize(p, world);
    interleave(x, y)
}

/// Codes for `centers` sorted by `(code, primitive)`.
pub fn sorted_morton_codes(centers: &[Vec2], world: &Aabb) -> Vec<MortonCode> {
    let mut keys: Vec<u64> = centers
        .iter()
        .enumerate()
        .map(|(i, &c)| ((morton_encode(c, world) as u64) << 32) | i as u64)
        .collect();
    keys.sort_unstable();
    keys.into_iter()
        .map(|k| MortonCode {
            code: (k >> 32) as u32,
            primitive: k as u32,
        })
        .collect()
}

/// Bounding box of `points` padded by `1e-6` of its larger extent, used as
/// the quantization domain.
pub fn world_bounds(points: &[Vec2]) -> Aabb {
    let b = Aabb::from_points(points);
    if b.is_empty() {
        return Aabb::from_point(Vec2::ZERO);
    }
    let pad = 1e-6 * b.width().max(b.height());
    Aabb {
        min: Vec2::new(b.min.x - pad, b.min.y - pad),
        max: Vec2::new(b.max.x + pad, b.max.y + pad),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Internal(u32),
    /// Index into the sorted leaf order, not a primitive id.
    Leaf(u32),
}

#[derive(Clone, Copy, Debug)]
pub struct InternalNode {
    pub left: NodeRef,
    pub right: NodeRef,
    pub aabb: Aabb,
}

#[derive(Clone, Debug)]
pub struct Lbvh {
    /// `order[i]` is the primitive held by leaf `i`.
    pub order: Vec<u32>,
    pub codes: Vec<u32>,
    pub leaf_aabbs: Vec<Aabb>,
    pub internal: Vec<InternalNode>,
    pub root: NodeRef,
}

/// Karras' prefix length between sorted keys `i` and `j`; `-1` outside the
/// range. Equal codes fall back to comparing the indices themselves.
#[inline]
fn prefix_len(codes: &[u32], i: i64, j: i64) -> i32 {
    if j < 0 || j >= codes.len() as i64 {
        return -1;
    }
    let (a, b) = (codes[i as usize], codes[j as usize]);
    if a == b {
        32 + ((i as u32) ^ (j as u32)).leading_zeros() as i32
    } else {
        (a ^ b).leading_zeros() as i32
    }
}

impl Lbvh {
    /// Builds over primitives whose Morton keys come from `centers` and
    /// whose bounds are `boxes`.
    pub fn build(centers: &[Vec2], boxes: &[Aabb], world: &Aabb) -> Self {
        assert_eq!(centers.len(), boxes.len(), "one box per center");
        assert!(!centers.is_empty(), "LBVH needs at least one primitive");
        let n = centers.len();

        let sorted = sorted_morton_codes(centers, world);
        let order: Vec<u32> = sorted.iter().map(|m| m.primitive).collect();
        let codes: Vec<u32> = sorted.iter().map(|m| m.code).collect();
        let leaf_aabbs: Vec<Aabb> = order.iter().map(|&p| boxes[p as usize]).collect();

        if n == 1 {
            return Lbvh {
                order,
                codes,
                leaf_aabbs,
                internal: Vec::new(),
                root: NodeRef::Leaf(0),
            };
        }

        let mut internal = Vec::with_capacity(n - 1);
        // parent of internal i at [i], parent of leaf i at [n - 1 + i]
        let mut parent = vec![u32::MAX; 2 * n - 1];
        for i in 0..(n - 1) as i64 {
            let (left, right) = karras_children(&codes, i);
            for child in [left, right] {
                match child {
                    NodeRef::Internal(c) => parent[c as usize] = i as u32,
                    NodeRef::Leaf(c) => parent[n - 1 + c as usize] = i as u32,
                }
            }
            internal.push(InternalNode {
                left,
                right,
                aabb: Aabb::EMPTY,
            });
        }

        // bottom-up bounds: the second child to arrive finishes its parent
        let mut arrivals = vec![0u8; n - 1];
        for leaf in 0..n {
            let mut p = parent[n - 1 + leaf];
            while p != u32::MAX {
                let node = p as usize;
                arrivals[node] += 1;
                if arrivals[node] < 2 {
                    break;
                }
                let bounds = |r: NodeRef| match r {
                    NodeRef::Internal(c) => internal[c as usize].aabb,
                    NodeRef::Leaf(c) => leaf_aabbs[c as usize],
                };
                internal[node].aabb = bounds(internal[node].left).union(bounds(internal[node].right));
                p = parent[node];
            }
        }

        Lbvh {
            order,
            codes,
            leaf_aabbs,
            internal,
            root: NodeRef::Internal(0),
        }
    }

    /// Point primitives, quantized over their padded bounding box.
    pub fn over_points(points: &[Vec2]) -> Self {
        let boxes: Vec<Aabb> = points.iter().map(|&p| Aabb::from_point(p)).collect();
        Self::build(points, &boxes, &world_bounds(points))
    }

    pub fn leaf_count(&self) -> usize {
        self.order.len()
    }

    pub fn node_aabb(&self, r: NodeRef) -> &Aabb {
        match r {
            NodeRef::Internal(i) => &self.internal[i as usize].aabb,
            NodeRef::Leaf(i) => &self.leaf_aabbs[i as usize],
        }
    }

    pub fn root_aabb(&self) -> &Aabb {
        self.node_aabb(self.root)
    }

    /// Depth-first walk with a fixed stack of [`STACK_DEPTH`] entries.
    /// Descends into nodes accepted by `descend` and hands every accepted
    /// leaf's primitive to `on_leaf`. Returns the number of accepted nodes.
    #[inline]
    pub fn traverse<D, L>(&self, mut descend: D, mut on_leaf: L) -> Result<usize>
    where
        D: FnMut(&Aabb) -> bool,
        L: FnMut(u32),
    {
        let mut stack = [NodeRef::Leaf(0); STACK_DEPTH];
        let mut top = 1;
        stack[0] = self.root;
        let mut visited = 0;
        while top > 0 {
            top -= 1;
            let node = stack[top];
            match node {
                NodeRef::Leaf(i) => {
                    if descend(&self.leaf_aabbs[i as usize]) {
                        visited += 1;
                        on_leaf(self.order[i as usize]);
                    }
                }
                NodeRef::Internal(i) => {
                    let n = &self.internal[i as usize];
                    if descend(&n.aabb) {
                        visited += 1;
                        if top + 2 > STACK_DEPTH {
                            return Err(LayoutError::TraversalStackOverflow(STACK_DEPTH));
                        }
                        stack[top] = n.right;
                        stack[top + 1] = n.left;
                        top += 2;
                    }
                }
            }
        }
        Ok(visited)
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((r, d)) = stack.pop() {
            match r {
                NodeRef::Leaf(_) => best = best.max(d),
                NodeRef::Internal(i) => {
                    let n = &self.internal[i as usize];
                    stack.push((n.left, d + 1));
                    stack.push((n.right, d + 1));
                }
            }
        }
        best
    }

    /// Structural checks: `n - 1` internal nodes, leaves in bijection with
    /// primitives, parents enclosing children, every node reached once.
    /// Returns a description of each violation found.
    pub fn verify(&self, primitive_boxes: &[Aabb]) -> Vec<String> {
        let mut problems = Vec::new();
        let n = self.leaf_count();
        if n != primitive_boxes.len() {
            problems.push(format!("{n} leaves for {} primitives", primitive_boxes.len()));
        }
        if self.internal.len() != n.saturating_sub(1) {
            problems.push(format!("{} internal nodes for {n} leaves", self.internal.len()));
        }
        let mut prim_seen = vec![0u32; primitive_boxes.len()];
        for (i, &p) in self.order.iter().enumerate() {
            match prim_seen.get_mut(p as usize) {
                Some(s) => *s += 1,
                None => problems.push(format!("leaf {i} references primitive {p} out of range")),
            }
            if let Some(b) = primitive_boxes.get(p as usize) {
                if self.leaf_aabbs[i] != *b {
                    problems.push(format!("leaf {i} box differs from primitive {p}"));
                }
            }
        }
        for (p, &s) in prim_seen.iter().enumerate() {
            if s != 1 {
                problems.push(format!("primitive {p} referenced by {s} leaves"));
            }
        }
        if self.codes.windows(2).any(|w| w[0] > w[1]) {
            problems.push("Morton codes not sorted".into());
        }

        let mut leaf_visits = vec![0u32; n];
        let mut internal_visits = vec![0u32; self.internal.len()];
        let mut stack = vec![self.root];
        while let Some(r) = stack.pop() {
            match r {
                NodeRef::Leaf(i) => match leaf_visits.get_mut(i as usize) {
                    Some(v) => *v += 1,
                    None => problems.push(format!("dangling leaf ref {i}")),
                },
                NodeRef::Internal(i) => {
                    let Some(v) = internal_visits.get_mut(i as usize) else {
                        problems.push(format!("dangling internal ref {i}"));
                        continue;
                    };
                    *v += 1;
                    if *v > 1 {
                        problems.push(format!("internal node {i} reached twice"));
                        continue;
                    }
                    let node = &self.internal[i as usize];
                    for c in [node.left, node.right] {
                        let in_range = match c {
                            NodeRef::Leaf(j) => (j as usize) < n,
                            NodeRef::Internal(j) => (j as usize) < self.internal.len(),
                        };
                        if in_range && !node.aabb.contains_box(self.node_aabb(c)) {
                            problems.push(format!("internal node {i} does not contain child {c:?}"));
                        }
                        stack.push(c);
                    }
                }
            }
        }
        if let Some(i) = leaf_visits.iter().position(|&v| v != 1) {
            problems.push(format!("leaf {i} reached {} times", leaf_visits[i]));
        }
        if let Some(i) = internal_visits.iter().position(|&v| v != 1) {
            problems.push(format!("internal node {i} reached {} times", internal_visits[i]));
        }
        problems
    }
}

fn karras_children(codes: &[u32], i: i64) -> (NodeRef, NodeRef) {
    let n = codes.len() as i64;
    let d: i64 = if prefix_len(codes, i, i + 1) - prefix_len(codes, i, i - 1) >= 0 {
        1
    } else {
        -1
    };
    let delta_min = prefix_len(codes, i, i - d);

    let mut l_max: i64 = 2;
    while prefix_len(codes, i, i + l_max * d) > delta_min {
        l_max *= 2;
    }
    let mut l: i64 = 0;
    let mut t = l_max / 2;
    while t >= 1 {
        if prefix_len(codes, i, i + (l + t) * d) > delta_min {
            l += t;
        }
        t /= 2;
    }
    let j = i + l * d;
    let delta_node = prefix_len(codes, i, j);

    let mut s: i64 = 0;
    let mut div: i64 = 2;
    loop {
        let t = (l + div - 1) / div;
        if prefix_len(codes, i, i + (s + t) * d) > delta_node {
            s += t;
        }
        if t <= 1 {
            break;
        }
        div *= 2;
    }
    let gamma = i + s * d + d.min(0);
    debug_assert!(gamma >= 0 && gamma < n - 1);

    let left = if i.min(j) == gamma {
        NodeRef::Leaf(gamma as u32)
    } else {
        NodeRef::Internal(gamma as u32)
    };
    let right = if i.max(j) == gamma + 1 {
        NodeRef::Leaf((gamma + 1) as u32)
    } else {
        NodeRef::Internal((gamma + 1) as u32)
    };
    (left, right)
}

/// All `u != q` with `|p(u) - p(q)| < r` in a point BVH built over
/// `positions`, unsorted. Returns the visited node count.
pub fn radius_gather_unsorted(bvh: &Lbvh, positions: &[Vec2], q: usize, r: f64, out: &mut Vec<u32>) -> Result<usize> {
    out.clear();
    let p = positions[q];
    bvh.traverse(
        |b| b.overlaps_square(p, r),
        |u| {
            if u as usize != q && within_radius(p - positions[u as usize], r) {
                out.push(u);
            }
        },
    )
}

/// Ascending ids `u != q` with `|p(u) - p(q)| < r`.
pub fn radius_gather(bvh: &Lbvh, positions: &[Vec2], q: usize, r: f64, out: &mut Vec<u32>) -> Result<usize> {
    let visited = radius_gather_unsorted(bvh, positions, q, r, out)?;
    out.sort_unstable();
    Ok(visited)
}

pub fn repulsive_lbvh(bvh: &Lbvh, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<()> {
    let r = cutoff_radius(k);
    for_each_vertex(disp, exec.parallel, |v, scratch| {
        radius_gather_unsorted(bvh, positions, v, r, scratch)?;
        if exec.deterministic {
            scratch.sort_unstable();
        }
        Ok(accumulate_repulsion(positions, v, k, scratch))
    })
}

pub struct LbvhBackend;

impl RepulsiveBackend for LbvhBackend {
    fn id(&self) -> BackendId {
        BackendId::Lbvh
    }

    fn repulse(&mut self, positions: &[Vec2], k: f64, disp: &mut [Vec2], exec: Exec) -> Result<PhaseTimes> {
        let start = Instant::now();
        let bvh = Lbvh::over_points(positions);
        let built = Instant::now();
        repulsive_lbvh(&bvh, positions, k, disp, exec)?;
        Ok(PhaseTimes {
            build: built - start,
            traversal: built.elapsed(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::naive::repulsive_naive_cutoff;
    use crate::layout::init_positions;
    use proptest::prelude::*;

    #[test]
    fn interleave_by_hand() {
        assert_eq!(interleave(3, 1), 0b0111);
        assert_eq!(interleave(0, 0), 0);
        assert_eq!(interleave(u16::MAX, 0), 0x5555_5555);
        assert_eq!(interleave(0, u16::MAX), 0xAAAA_AAAA);
    }

    #[test]
    fn quantization_clamps() {
        let w = Aabb {
            min: Vec2::ZERO,
            max: Vec2::new(10.0, 20.0),
        };
        assert_eq!(quantize(Vec2::ZERO, &w), (0, 0));
        assert_eq!(quantize(Vec2::new(10.0, 20.0), &w), (65535, 65535));
        assert_eq!(quantize(Vec2::new(-5.0, 99.0), &w), (0, 65535));
        assert_eq!(quantize(Vec2::new(5.0, 5.0), &w), (32767, 16383));
        let flat = Aabb::from_point(Vec2::new(1.0, 1.0));
        assert_eq!(quantize(Vec2::new(1.0, 1.0), &flat), (0, 0));
    }

    #[test]
    fn single_primitive_is_a_leaf() {
        let bvh = Lbvh::over_points(&[Vec2::new(1.0, 2.0)]);
        assert_eq!(bvh.root, NodeRef::Leaf(0));
        assert!(bvh.internal.is_empty());
        assert!(bvh.verify(&[Aabb::from_point(Vec2::new(1.0, 2.0))]).is_empty());
    }

    #[test]
    fn structure_of_random_builds() {
        for (n, seed) in [(2, 1), (3, 2), (17, 3), (1000, 4), (4096, 5)] {
            let p = init_positions(n, 10.0, seed).unwrap().positions;
            let bvh = Lbvh::over_points(&p);
            assert_eq!(bvh.internal.len(), n - 1);
            let boxes: Vec<_> = p.iter().map(|&q| Aabb::from_point(q)).collect();
            assert_eq!(bvh.verify(&boxes), Vec::<String>::new());
        }
    }

    #[test]
    fn duplicate_codes_stay_balanced() {
        let p = vec![Vec2::new(3.0, 3.0); 5000];
        let bvh = Lbvh::over_points(&p);
        let boxes: Vec<_> = p.iter().map(|&q| Aabb::from_point(q)).collect();
        assert!(bvh.verify(&boxes).is_empty());
        assert!(bvh.depth() <= 13, "depth {}", bvh.depth());
    }

    #[test]
    fn every_point_found_by_containment_walk() {
        let p = init_positions(10_000, 100.0, 21).unwrap().positions;
        let bvh = Lbvh::over_points(&p);
        for (i, &q) in p.iter().enumerate() {
            let mut found = false;
            bvh.traverse(|b| b.contains_point(q), |u| found |= u as usize == i)
                .unwrap();
            assert!(found, "point {i} not reachable");
        }
    }

    #[test]
    fn gather_small_example() {
        let p = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(5.0, 0.0)];
        let bvh = Lbvh::over_points(&p);
        let mut out = Vec::new();
        radius_gather(&bvh, &p, 0, 2.0, &mut out).unwrap();
        assert_eq!(out, vec![1]);
        for q in 0..3 {
            radius_gather(&bvh, &p, q, 0.5, &mut out).unwrap();
            assert!(out.is_empty());
        }
    }

    #[test]
    fn lbvh_matches_oracle_bitwise() {
        for (n, seed) in [(1, 0), (2, 9), (300, 1), (5000, 2)] {
            let p = init_positions(n, 100.0, seed).unwrap().positions;
            let k = 100.0 / (n as f64).sqrt();
            let mut a = vec![Vec2::ZERO; n];
            let mut b = vec![Vec2::ZERO; n];
            repulsive_naive_cutoff(&p, k, &mut a, false);
            LbvhBackend.repulse(&p, k, &mut b, Exec::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn far_apart_vertices_have_zero_dispersion() {
        let p: Vec<Vec2> = (0..20).map(|i| Vec2::new(i as f64 * 10.0, 0.0)).collect();
        let mut d = vec![Vec2::new(1.0, 1.0); p.len()];
        LbvhBackend.repulse(&p, 1.0, &mut d, Exec::default()).unwrap();
        assert!(d.iter().all(|&x| x == Vec2::ZERO));
    }

    proptest! {
        #[test]
        fn morton_roundtrip(x in any::<u16>(), y in any::<u16>()) {
            prop_assert_eq!(deinterleave(interleave(x, y)), (x, y));
        }

        #[test]
        fn gather_matches_brute_force_and_is_symmetric(
            seed in any::<u64>(), n in 1usize..400, r in 0.01f64..30.0
        ) {
            let p = init_positions(n, 100.0, seed).unwrap().positions;
            let bvh = Lbvh::over_points(&p);
            let mut sets = Vec::with_capacity(n);
            let mut out = Vec::new();
            for q in 0..n {
                radius_gather(&bvh, &p, q, r, &mut out).unwrap();
                let brute: Vec<u32> = (0..n as u32)
                    .filter(|&u| u as usize != q && (p[q] - p[u as usize]).length() < r)
                    .collect();
                prop_assert_eq!(&out, &brute);
                sets.push(out.clone());
            }
            for (v, s) in sets.iter().enumerate() {
                for &u in s {
                    prop_assert!(sets[u as usize].binary_search(&(v as u32)).is_ok());
                }
            }
        }
    }
}
