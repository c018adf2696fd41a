use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fr_layout::bench::{bench_scale, write_bench_csv, BenchOptions};
use fr_layout::graph::{parse_edge_list_with, ParseOptions};
use fr_layout::svg::{write_svg, SvgStyle};
use fr_layout::{gen_binary_tree, gen_k5_cluster_graph, graph_stats, run_layout, BackendId, EngineConfig, Graph};

#[derive(Parser)]
#[command(
    name = "frlayout",
    version,
    about = "Fruchterman-Reingold layouts with pluggable neighbor backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic graph as an edge list plus a stats CSV.
    Gen {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Run the spring embedder on an edge list.
    Layout(LayoutArgs),
    /// Repulsive-phase timings over complete binary trees.
    BenchScale(BenchScaleArgs),
    /// Print graph statistics as CSV.
    Stats(StatsArgs),
}

#[derive(Subcommand)]
enum Generator {
    /// Complete binary tree, root at depth 0.
    Btree {
        #[arg(long)]
        depth: u32,
        #[command(flatten)]
        out: GenOutput,
    },
    /// Disjoint K5 cliques, optionally chained by one edge each.
    K5 {
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        connected: bool,
        #[command(flatten)]
        out: GenOutput,
    },
}

#[derive(Args)]
struct GenOutput {
    /// Edge-list output path.
    #[arg(long)]
    out: PathBuf,
    /// Stats CSV path (defaults to `<out>.stats.csv`).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Map sparse vertex ids to dense ones and write the mapping CSV here.
    #[arg(long)]
    remap_ids: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

fn parse_backend(s: &str) -> Result<BackendId, String> {
    s.parse::<BackendId>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct LayoutArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_backend, default_value = "lbvh")]
    backend: BackendId,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Side of the initial random square.
    #[arg(long, default_value_t = 100.0)]
    extent: f64,
    #[arg(long, value_enum, default_value = "on")]
    deterministic: OnOff,
    /// Worker threads; 0 picks automatically, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Final positions CSV (stdout when omitted).
    #[arg(long)]
    positions: Option<PathBuf>,
    /// Per-iteration phase timings CSV.
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct BenchScaleArgs {
    #[arg(long, default_value_t = 4)]
    min_depth: u32,
    #[arg(long, default_value_t = 18)]
    max_depth: u32,
    #[arg(long, value_delimiter = ',', value_parser = parse_backend, default_value = "naive-cutoff,lbvh,rayquery")]
    backends: Vec<BackendId>,
    /// Measured iterations per run.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Discarded leading iterations per run.
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    extent: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Backend whose repulsive time is the speedup numerator.
    #[arg(long, value_parser = parse_backend, default_value = "naive-cutoff")]
    reference: BackendId,
    /// Bench CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-backend log-log slope CSV.
    #[arg(long)]
    slopes: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Stats CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { generator } => cmd_gen(generator),
        Command::Layout(args) => cmd_layout(args),
        Command::BenchScale(args) => cmd_bench_scale(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn cmd_gen(generator: Generator) -> Result<()> {
    let (graph, out) = match generator {
        Generator::Btree { depth, out } => (gen_binary_tree(depth)?, out),
        Generator::K5 {
            clusters,
            connected,
            out,
        } => (gen_k5_cluster_graph(clusters, connected)?, out),
    };
    let stats_path = out.stats.clone().unwrap_or_else(|| {
        let mut s = out.out.clone().into_os_string();
        s.push(".stats.csv");
        PathBuf::from(s)
    });
    write_file(&out.out, graph.to_edge_list_string().as_bytes())?;
    write_file(&stats_path, graph_stats(&graph).to_csv().as_bytes())?;
    Ok(())
}

fn load_graph(input: &InputArgs) -> Result<Graph> {
    let text = fs::read_to_string(&input.input).with_context(|| format!("reading {}", input.input.display()))?;
    let opts = ParseOptions {
        remap_ids: input.remap_ids.is_some(),
    };
    let (graph, report) =
        parse_edge_list_with(&text, opts).with_context(|| format!("parsing {}", input.input.display()))?;
    let c = report.cleanup;
    if c.duplicates_dropped + c.self_loops_dropped > 0 {
        eprintln!(
            "dropped {} duplicate edge(s) and {} self-loop(s)",
            c.duplicates_dropped, c.self_loops_dropped
        );
    }
    if let (Some(path), Some(ids)) = (&input.remap_ids, &report.original_ids) {
        let mut csv = String::from("id,original_id\n");
        for (dense, orig) in ids.iter().enumerate() {
            csv.push_str(&format!("{dense},{orig}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    Ok(graph)
}

fn cmd_layout(args: LayoutArgs) -> Result<()> {
    let graph = load_graph(&args.input)?;
    if graph.vertex_count() == 0 {
        bail!("graph has no vertices");
    }
    let config = EngineConfig {
        backend: args.backend,
        iterations: args.iterations,
        seed: args.seed,
        initial_extent: args.extent,
        deterministic: matches!(args.deterministic, OnOff::On),
        parallel: args.threads != 1,
        threads: args.threads,
    };
    let (layout, timings) = run_layout(&graph, &config)?;

    if let Some(path) = &args.svg {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_svg(&layout, &graph, &SvgStyle::default(), &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.timings {
        let mut buf = Vec::new();
        timings.write_csv(&mut buf)?;
        write_file(path, &buf)?;
    }
    emit(args.positions.as_deref(), layout.to_csv_string().as_bytes())
}

fn cmd_bench_scale(args: BenchScaleArgs) -> Result<()> {
    if args.backends.is_empty() {
        bail!("no backends given");
    }
    let opts = BenchOptions {
        iterations: args.iterations,
        warmup: args.warmup,
        seed: args.seed,
        initial_extent: args.extent,
        parallel: args.threads != 1,
        threads: args.threads,
        reference: args.reference,
    };
    let report = bench_scale(args.min_depth..=args.max_depth, &args.backends, &opts)?;
    let mut csv = Vec::new();
    write_bench_csv(&report.records(), &mut csv)?;
    emit(args.out.as_deref(), &csv)?;

    let mut slopes = Vec::new();
    report.write_slopes_csv(&mut slopes)?;
    match &args.slopes {
        Some(p) => write_file(p, &slopes)?,
        None => eprint!("{}", String::from_utf8_lossy(&slopes)),
    }
    eprintln!("speedup reference: {}", args.reference);
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let graph = load_graph(&args.input)?;
    emit(args.out.as_deref(), graph_stats(&graph).to_csv().as_bytes())
}
