//! Simple undirected graphs: ingestion, synthetic generators and statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::{LayoutError, Result};

/// Immutable simple undirected graph with dense 0-based vertex ids.
///
/// Edges are stored canonically as `(u, v)` with `u < v`, sorted
/// lexicographically and without duplicates. Adjacency is kept in CSR form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

/// What `Graph::from_raw_edges` threw away.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CleanupReport {
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

impl Graph {
    /// Builds a graph from edges that must already be simple: endpoints in
    /// range, no self-loops, no duplicates (in either orientation).
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let (graph, report) = Self::from_raw_edges(vertex_count, edges)?;
        if report.self_loops_dropped > 0 {
            return Err(LayoutError::InvalidGraph("self-loop in edge list".into()));
        }
        if report.duplicates_dropped > 0 {
            return Err(LayoutError::InvalidGraph("duplicate edge in edge list".into()));
        }
        Ok(graph)
    }

    /// Canonicalizes arbitrary edges, dropping self-loops and duplicates.
    /// Out-of-range endpoints are still an error.
    pub fn from_raw_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<(Self, CleanupReport)> {
        if vertex_count > u32::MAX as usize {
            return Err(LayoutError::InvalidGraph(format!(
                "vertex count {vertex_count} exceeds 32-bit ids"
            )));
        }
        let mut report = CleanupReport::default();
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a as usize >= vertex_count || b as usize >= vertex_count {
                return Err(LayoutError::InvalidGraph(format!(
                    "edge ({a}, {b}) has an endpoint >= vertex count {vertex_count}"
                )));
            }
            if a == b {
                report.self_loops_dropped += 1;
                continue;
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        report.duplicates_dropped = before - canon.len();

        let mut degree = vec![0usize; vertex_count];
        for &(u, v) in &canon {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..vertex_count].to_vec();
        let mut neighbors = vec![0u32; 2 * canon.len()];
        for &(u, v) in &canon {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..vertex_count {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok((
            Graph {
                vertex_count,
                edges: canon,
                offsets,
                neighbors,
            },
            report,
        ))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical storage order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Edge-list text with a `|V| n` header, readable by [`parse_edge_list`].
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "|V| {}", self.vertex_count)?;
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "|V| {}", self.vertex_count);
        for &(u, v) in &self.edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Map sparse ids onto `0..distinct` in ascending id order.
    pub remap_ids: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub cleanup: CleanupReport,
    /// `original_ids[dense]` when ids were remapped.
    pub original_ids: Option<Vec<u64>>,
}

/// Parses whitespace-separated edge lists.
///
/// Blank lines and lines starting with `#` are skipped. A line `|V| n` fixes
/// the vertex count; otherwise it is one more than the largest id seen.
pub fn parse_edge_list(text: &str) -> Result<(Graph, ParseReport)> {
    parse_edge_list_with(text, ParseOptions::default())
}

pub fn parse_edge_list_with(text: &str, opts: ParseOptions) -> Result<(Graph, ParseReport)> {
    let mut header: Option<usize> = None;
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| LayoutError::Parse { line: lineno, message };
        if let Some(rest) = line.strip_prefix("|V|") {
            if header.is_some() {
                return Err(parse_err("repeated |V| header".into()));
            }
            let n = rest
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad vertex count `{}`: {e}", rest.trim())))?;
            header = Some(n);
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut id = || -> Result<u64> {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err("expected two vertex ids".into()))?;
            tok.parse::<u64>()
                .map_err(|e| parse_err(format!("bad vertex id `{tok}`: {e}")))
        };
        let a = id()?;
        let b = id()?;
        if let Some(extra) = tokens.next() {
            return Err(parse_err(format!("unexpected token `{extra}`")));
        }
        raw.push((a, b));
    }
    if raw.is_empty() && header.is_none() {
        return Err(LayoutError::EmptyInput);
    }

    let (vertex_count, edges, original_ids) = if opts.remap_ids {
        let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        let dense: BTreeMap<u64, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        let edges: Vec<(u32, u32)> = raw.iter().map(|(a, b)| (dense[a], dense[b])).collect();
        let n = match header {
            Some(h) if h < ids.len() => {
                return Err(LayoutError::InvalidGraph(format!(
                    "|V| header {h} is smaller than the {} distinct ids",
                    ids.len()
                )))
            }
            Some(h) => h,
            None => ids.len(),
        };
        (n, edges, Some(ids))
    } else {
        let max_id = raw.iter().map(|&(a, b)| a.max(b)).max();
        let needed = max_id.map_or(0, |m| m as usize + 1);
        if max_id.is_some_and(|m| m >= u32::MAX as u64) {
            return Err(LayoutError::InvalidGraph(
                "vertex id does not fit in 32 bits; use id remapping".into(),
            ));
        }
        let n = match header {
            Some(h) if h < needed => {
                return Err(LayoutError::InvalidGraph(format!(
                    "|V| header {h} but vertex id {} present",
                    needed - 1
                )))
            }
            Some(h) => h,
            None => needed,
        };
        let edges = raw.iter().map(|&(a, b)| (a as u32, b as u32)).collect();
        (n, edges, None)
    };

    let (graph, cleanup) = Graph::from_raw_edges(vertex_count, edges)?;
    Ok((graph, ParseReport { cleanup, original_ids }))
}

/// `cluster_count` disjoint K5 cliques; with `connected`, vertex 0 of each
/// clique is joined to vertex 0 of the next one.
pub fn gen_k5_cluster_graph(cluster_count: usize, connected: bool) -> Result<Graph> {
    if cluster_count == 0 {
        return Err(LayoutError::InvalidParameter("cluster count must be at least 1".into()));
    }
    let n = cluster_count
        .checked_mul(5)
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| LayoutError::InvalidParameter("too many clusters".into()))?;
    let mut edges = Vec::with_capacity(cluster_count * 11);
    for c in 0..cluster_count {
        let base = (5 * c) as u32;
        for a in 0..5 {
            for b in a + 1..5 {
                edges.push((base + a, base + b));
            }
        }
        if connected && c + 1 < cluster_count {
            edges.push((base, base + 5));
        }
    }
    Graph::new(n, edges)
}

/// Complete binary tree with the root at depth 0: `2^(depth+1) - 1` vertices,
/// vertex `i` has children `2i + 1` and `2i + 2`.
pub fn gen_binary_tree(depth: u32) -> Result<Graph> {
    if depth == 0 {
        return Err(LayoutError::InvalidParameter("tree depth must be at least 1".into()));
    }
    if depth > 30 {
        return Err(LayoutError::InvalidParameter(format!("tree depth {depth} too large")));
    }
    let n = (1usize << (depth + 1)) - 1;
    let edges = (1..n as u32).map(|c| ((c - 1) / 2, c));
    Graph::new(n, edges)
}

/// Exact counts in the shape of the dataset table.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphStats {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub component_count: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    /// `2|E| / |V|`, zero for the empty graph.
    pub mean_degree: f64,
    pub min_component_size: usize,
    pub max_component_size: usize,
    pub mean_component_size: f64,
}

pub const STATS_CSV_HEADER: &str = "vertices,edges,components,min_deg,max_deg,mean_deg,min_cvert,max_cvert,mean_cvert";

impl GraphStats {
    pub fn to_csv(&self) -> String {
        format!(
            "{STATS_CSV_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
            self.vertex_count,
            self.edge_count,
            self.component_count,
            self.min_degree,
            self.max_degree,
            self.mean_degree,
            self.min_component_size,
            self.max_component_size,
            self.mean_component_size
        )
    }
}

/// Connected-component labels; components are numbered in order of their
/// smallest vertex id.
pub fn component_labels(g: &Graph) -> (Vec<u32>, usize) {
    let n = g.vertex_count();
    let mut label = vec![u32::MAX; n];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        label[s] = count;
        stack.push(s as u32);
        while let Some(v) = stack.pop() {
            for &w in g.neighbors(v as usize) {
                if label[w as usize] == u32::MAX {
                    label[w as usize] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    (label, count as usize)
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    let n = g.vertex_count();
    let (labels, components) = component_labels(g);
    let mut sizes = vec![0usize; components];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let degrees = (0..n).map(|v| g.degree(v));
    GraphStats {
        vertex_count: n,
        edge_count: g.edge_count(),
        component_count: components,
        min_degree: degrees.clone().min().unwrap_or(0),
        max_degree: degrees.max().unwrap_or(0),
        mean_degree: if n == 0 {
            0.0
        } else {
            2.0 * g.edge_count() as f64 / n as f64
        },
        min_component_size: sizes.iter().copied().min().unwrap_or(0),
        max_component_size: sizes.iter().copied().max().unwrap_or(0),
        mean_component_size: if components == 0 {
            0.0
        } else {
            n as f64 / components as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_edge_list() {
        let (g, rep) = parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(rep.cleanup, CleanupReport::default());
    }

    #[test]
    fn drops_duplicates_and_self_loops() {
        let (g, rep) = parse_edge_list("0 1\n1 0\n2 2").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(rep.cleanup.duplicates_dropped, 1);
        assert_eq!(rep.cleanup.self_loops_dropped, 1);
    }

    #[test]
    fn skips_comments_and_sizes_by_max_id() {
        let (g, _) = parse_edge_list("# c\n0 3").unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edges(), &[(0, 3)]);
        assert_eq!(g.degree(1), 0);
    }

    #[test]
    fn header_overrides_vertex_count() {
        let (g, _) = parse_edge_list("|V| 10\n0 3\n").unwrap();
        assert_eq!(g.vertex_count(), 10);
        assert!(parse_edge_list("|V| 2\n0 3\n").is_err());
        let (g, _) = parse_edge_list("|V| 4\n").unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 0));
    }

    #[test]
    fn reports_line_of_malformed_token() {
        match parse_edge_list("0 1\n# x\n2 b\n") {
            Err(LayoutError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse_edge_list("0\n"),
            Err(LayoutError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 2\n"),
            Err(LayoutError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_edge_list("-1 2\n"), Err(LayoutError::Parse { .. })));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_edge_list(""), Err(LayoutError::EmptyInput)));
        assert!(matches!(parse_edge_list("# only\n\n"), Err(LayoutError::EmptyInput)));
    }

    #[test]
    fn remaps_sparse_ids() {
        let opts = ParseOptions { remap_ids: true };
        let (g, rep) = parse_edge_list_with("100 7\n7 5000000000\n", opts).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(rep.original_ids, Some(vec![7, 100, 5_000_000_000]));
    }

    #[test]
    fn single_k5() {
        let g = gen_k5_cluster_graph(1, false).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.vertex_count, s.edge_count, s.component_count), (5, 10, 1));
    }

    #[test]
    fn connected_k5_chain_counts() {
        let g = gen_k5_cluster_graph(5000, true).unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.vertex_count, s.edge_count, s.component_count), (25000, 54999, 1));
        assert_eq!((s.min_degree, s.max_degree), (4, 6));
        let g = gen_k5_cluster_graph(2, true).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (10, 21));
    }

    #[test]
    fn zero_clusters_rejected() {
        assert!(gen_k5_cluster_graph(0, false).is_err());
        assert!(gen_binary_tree(0).is_err());
    }

    #[test]
    fn small_binary_trees() {
        let g = gen_binary_tree(1).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (3, 2));
        assert_eq!(g.neighbors(0), &[1, 2]);
        let g = gen_binary_tree(4).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (31, 30));
        assert_eq!(g.neighbors(3), &[1, 7, 8]);
    }

    #[test]
    fn stats_of_isolated_vertices() {
        let g = Graph::new(3, []).unwrap();
        let s = graph_stats(&g);
        assert_eq!(s.component_count, 3);
        assert_eq!((s.min_degree, s.max_degree, s.mean_degree), (0, 0, 0.0));
        assert_eq!((s.min_component_size, s.max_component_size), (1, 1));
    }

    #[test]
    fn strict_constructor_rejects_bad_edges() {
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(2, [(1, 1)]).is_err());
        assert!(Graph::new(2, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn stats_csv_shape() {
        let csv = graph_stats(&gen_binary_tree(1).unwrap()).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], STATS_CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 9);
        assert!(lines[1].starts_with("3,2,1,1,2,"));
    }

    fn arb_generated() -> impl Strategy<Value = Graph> {
        prop_oneof![
            (1usize..40, any::<bool>()).prop_map(|(c, conn)| gen_k5_cluster_graph(c, conn).unwrap()),
            (1u32..9).prop_map(|d| gen_binary_tree(d).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn handshake_and_roundtrip(g in arb_generated()) {
            let degree_sum: usize = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
            prop_assert_eq!(degree_sum, 2 * g.edge_count());
            let (back, rep) = parse_edge_list(&g.to_edge_list_string()).unwrap();
            prop_assert_eq!(rep.cleanup, CleanupReport::default());
            prop_assert_eq!(back, g);
        }

        #[test]
        fn k5_component_count(c in 1usize..60, connected in any::<bool>()) {
            let s = graph_stats(&gen_k5_cluster_graph(c, connected).unwrap());
            prop_assert_eq!(s.component_count, if connected { 1 } else { c });
            prop_assert_eq!(s.mean_degree, 2.0 * s.edge_count as f64 / s.vertex_count as f64);
        }

        #[test]
        fn raw_edges_canonicalize(n in 1usize..30, raw in proptest::collection::vec((0u32..30, 0u32..30), 0..80)) {
            let raw: Vec<_> = raw.into_iter().filter(|&(a, b)| (a as usize) < n && (b as usize) < n).collect();
            let (g, rep) = Graph::from_raw_edges(n, raw.iter().copied()).unwrap();
            prop_assert!(g.edges().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.edges().iter().all(|&(u, v)| u < v));
            prop_assert_eq!(g.edge_count() + rep.duplicates_dropped + rep.self_loops_dropped, raw.len());
        }
    }
}
