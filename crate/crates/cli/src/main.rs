use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parclust::data::{add_uniform_outliers, generate_blobs, write_csv, write_labels};
use parclust::dbscan::{dbscan_report, ddbc, DbscanParams, DdbcParams, ModelKind};
use parclust::fcm::{fcm_centralized, pfcm, FcmParams};
use parclust::kmeans::{centralized_report, kmeans_centralized, pkm, KMeansParams};
use parclust::kwindows::{k_windows, KWindowsParams};
use parclust::pca::{cpca_cluster, CpcaClusterParams, DbscanLocal, KMeansLocal, LocalClusterer};
use parclust::pddp::{pddp_km, pddp_report};
use parclust::{
    adjusted_rand_index, load_csv, BlobSpec, ClusterReport, CommWorld, DataSet, Timings,
};

/// Parallel clustering algorithms on a simulated multi-node machine.
#[derive(Debug, Parser)]
#[command(name = "parclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate Gaussian blobs: a data CSV plus a labels CSV next to it.
    Gen(GenArgs),
    /// Run one algorithm and print a JSON report.
    Run(RunArgs),
    /// Run a parallel algorithm at several node counts against a baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    per_cluster: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Minimum distance between cluster centers.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    /// Uniform noise points added around the blobs (labeled -1).
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    /// Data CSV path; labels go to the same path with a `.labels.csv` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Kmeans,
    Pkm,
    Fcm,
    Pfcm,
    Kwindows,
    CpcaCluster,
    Dbscan,
    Ddbc,
    Pddp,
    PddpKm,
}

impl Algo {
    fn centralized(self) -> bool {
        matches!(self, Algo::Kmeans | Algo::Fcm | Algo::Dbscan)
    }

    fn counterpart(self) -> Algo {
        match self {
            Algo::Pkm | Algo::PddpKm | Algo::CpcaCluster => Algo::Kmeans,
            Algo::Pfcm => Algo::Fcm,
            Algo::Ddbc => Algo::Dbscan,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LocalAlgo {
    Kmeans,
    Dbscan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// k-means centroids seeded by the specific core points.
    RepKmeans,
    /// The specific core points themselves.
    RepScor,
}

#[derive(Debug, Clone, Args)]
struct AlgoArgs {
    /// Input CSV, one row per point.
    #[arg(long)]
    data: PathBuf,
    /// Number of clusters.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Fuzzifier for fcm/pfcm.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// DBSCAN radius (local radius for ddbc).
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 5)]
    min_pts: usize,
    /// Number of k-windows windows.
    #[arg(long, default_value_t = 3)]
    windows: usize,
    /// Initial k-windows half-width.
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    /// PDDP tree height.
    #[arg(long, default_value_t = 2)]
    height: usize,
    /// Seed for every randomized choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    /// Global DBSCAN radius for ddbc [default: 2 * eps].
    #[arg(long)]
    eps_global: Option<f64>,
    #[arg(long, default_value_t = 1)]
    min_pts_global: usize,
    /// ddbc local model.
    #[arg(long, value_enum, default_value_t = Model::RepKmeans)]
    model: Model,
    #[arg(long, default_value_t = 0.95)]
    variance_fraction: f64,
    #[arg(long, default_value_t = 5)]
    reps_per_cluster: usize,
    /// Local algorithm for cpca-cluster.
    #[arg(long, value_enum, default_value_t = LocalAlgo::Kmeans)]
    local_algo: LocalAlgo,
    /// Disable data parallelism inside each node.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    /// Number of simulated nodes.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    nodes: u64,
    #[command(flatten)]
    common: AlgoArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    /// Comma-separated node counts, e.g. 1,2,4,8.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..,
          value_parser = clap::value_parser!(u64).range(1..))]
    nodes: Vec<u64>,
    /// Baseline algorithm [default: the centralized counterpart].
    #[arg(long, value_enum)]
    baseline: Option<Algo>,
    #[command(flatten)]
    common: AlgoArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<parclust::Error> for Failure {
    fn from(e: parclust::Error) -> Self {
        match e {
            parclust::Error::InvalidParam(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.labels.csv"))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let spec = BlobSpec {
        seed: args.seed,
        clusters: args.clusters,
        per_cluster: args.per_cluster,
        dim: args.dim,
        spread: args.spread,
        separation: args.separation,
    };
    let (mut data, mut labels) = generate_blobs(&spec)?;
    if args.outliers > 0 {
        (data, labels) =
            add_uniform_outliers(&data, &labels, args.outliers, 2.0 * args.spread, args.seed)?;
    }
    let labels_out = labels_path(&args.out);
    let written = |path: &Path, r: parclust::Result<()>| {
        r.map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    };
    written(&args.out, write_csv(&args.out, &data))?;
    written(&labels_out, write_labels(&labels_out, &labels))
}

fn run_algo(
    algo: Algo,
    nodes: usize,
    a: &AlgoArgs,
    data: &DataSet,
) -> Result<ClusterReport, Failure> {
    if algo.centralized() && nodes != 1 {
        return Err(Failure::Usage(format!(
            "{} is centralized and runs on one node",
            algo.to_possible_value().expect("named").get_name()
        )));
    }
    let world = CommWorld::new(nodes).map_err(parclust::Error::from)?;
    let km = KMeansParams {
        k: a.k,
        max_iter: a.max_iter,
        tol: a.tol,
        seed: a.seed,
    };
    let t0 = Instant::now();
    let report = match algo {
        Algo::Kmeans => {
            let r = kmeans_centralized(data, &km)?;
            let mut report = centralized_report(data, &km, r);
            report.timings_ms = Timings::new(Default::default(), t0.elapsed(), Default::default());
            report
        }
        Algo::Pkm => pkm(&world, data, &km)?,
        Algo::Fcm | Algo::Pfcm => {
            let params = FcmParams {
                k: a.k,
                m: a.m,
                max_iter: a.max_iter,
                tol: a.tol,
                seed: a.seed,
            };
            if algo == Algo::Fcm {
                fcm_centralized(data, &params)?
            } else {
                pfcm(&world, data, &params)?
            }
        }
        Algo::Kwindows => {
            let params = KWindowsParams {
                seed: a.seed,
                ..KWindowsParams::new(a.windows, a.half_width)
            };
            k_windows(&world, data, &params)?
        }
        Algo::CpcaCluster => {
            let params = CpcaClusterParams {
                k: a.k,
                reps_per_cluster: a.reps_per_cluster,
                variance_fraction: a.variance_fraction,
                seed: a.seed,
            };
            let kmeans = KMeansLocal {
                max_iter: a.max_iter,
                tol: a.tol,
                seed: a.seed,
                ..KMeansLocal::default()
            };
            let density = DbscanLocal(DbscanParams::new(a.eps, a.min_pts));
            let local: &dyn LocalClusterer = match a.local_algo {
                LocalAlgo::Kmeans => &kmeans,
                LocalAlgo::Dbscan => &density,
            };
            cpca_cluster(&world, data, local, &params)?
        }
        Algo::Dbscan => dbscan_report(data, &DbscanParams::new(a.eps, a.min_pts))?,
        Algo::Ddbc => {
            let mut params = DdbcParams::new(DbscanParams::new(a.eps, a.min_pts));
            if let Some(e) = a.eps_global {
                params.eps_global = e;
            }
            params.min_pts_global = a.min_pts_global;
            params.model = match a.model {
                Model::RepKmeans => ModelKind::RepKMeans,
                Model::RepScor => ModelKind::RepScor,
            };
            ddbc(&world, data, &params)?
        }
        Algo::Pddp => pddp_report(&world, data, a.height)?,
        Algo::PddpKm => pddp_km(&world, data, a.height, &km)?,
    };
    Ok(report)
}

fn load(a: &AlgoArgs) -> Result<DataSet, Failure> {
    parclust::exec::set_parallel(!a.sequential);
    load_csv(&a.data).map_err(|e| Failure::Runtime(format!("{}: {e}", a.data.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed reader (e.g. `| head`) is not our failure.
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Failure::Runtime(e.to_string())),
        _ => Ok(()),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let data = load(&args.common)?;
    let report = run_algo(args.algo, args.nodes as usize, &args.common, &data)?;
    print_json(&report)
}

#[derive(Debug, Serialize)]
struct BenchRow {
    p: usize,
    wall_ms: f64,
    timings_ms: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    ari_vs_baseline: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    algo: String,
    baseline: String,
    n: usize,
    d: usize,
    baseline_wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_j: Option<f64>,
    runs: Vec<BenchRow>,
}

fn timed(
    algo: Algo,
    nodes: usize,
    a: &AlgoArgs,
    data: &DataSet,
) -> Result<(ClusterReport, f64), Failure> {
    let t0 = Instant::now();
    let report = run_algo(algo, nodes, a, data)?;
    Ok((report, t0.elapsed().as_secs_f64() * 1e3))
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let data = load(&args.common)?;
    let baseline = args.baseline.unwrap_or(args.algo.counterpart());
    let (base, base_ms) = timed(baseline, 1, &args.common, &data)?;
    let mut runs = Vec::with_capacity(args.nodes.len());
    for &p in &args.nodes {
        let (mut report, wall_ms) = timed(args.algo, p as usize, &args.common, &data)?;
        let ari = adjusted_rand_index(&base.partition, &report.partition)?;
        report.ari_vs_baseline = Some(ari);
        runs.push(BenchRow {
            p: p as usize,
            wall_ms,
            timings_ms: report.timings_ms,
            j: report.j,
            iterations: report.iterations,
            ari_vs_baseline: ari,
        });
    }
    print_json(&BenchReport {
        algo: report_name(args.algo),
        baseline: report_name(baseline),
        n: data.len(),
        d: data.dim(),
        baseline_wall_ms: base_ms,
        baseline_j: base.j,
        runs,
    })
}

fn report_name(algo: Algo) -> String {
    algo.to_possible_value()
        .expect("named")
        .get_name()
        .to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
