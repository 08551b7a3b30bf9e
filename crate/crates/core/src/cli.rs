//! Command-line front end: reproducible analysis pipelines over CSV inputs.
//!
//! Every command is deterministic given its flags (seeds included): value
//! outputs are byte-identical across runs and worker counts. Timing lines
//! go to stderr so they never perturb the primary output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adtree::{AdTree, DEFAULT_LEAF_THRESHOLD};
use crate::dataset::{CategoricalTable, CoarseningMap, SubjectSet};
use crate::error::{Error, Result};
use crate::filter::SubjectFilter;
use crate::shapley::{
    self, AggregateReport, NaiveCounter, Provenance, ShapleyMatrix, DEFAULT_EXACT_D_LIMIT,
};

#[derive(Debug, Parser)]
#[command(
    name = "uniqshap",
    version,
    about = "Per-subject uniqueness attribution for categorical data",
    after_help = "Set UNIQ_SHAP_LOG=debug for progress logging."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-subject values for every variable, one CSV row per subject
    Shapley(ShapleyCmd),
    /// Aggregated values over a subject subset, with entropy baselines
    Aggregate(AggregateCmd),
    /// Tree engine vs linear-scan engine: verify agreement, then time them
    Benchmark(BenchmarkCmd),
    /// Aggregated values across a sequence of coarsening maps
    CoarsenStudy(CoarsenStudyCmd),
    /// Per-subject rows sorted by total value, for stacked plots
    Plotdata(PlotdataCmd),
}

#[derive(Debug, Args)]
struct InputOpts {
    /// Input CSV file (UTF-8, header row, RFC 4180 quoting)
    #[arg(long)]
    input: PathBuf,

    /// Columns to analyze, in order (default: all columns)
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
}

impl InputOpts {
    fn load(&self) -> Result<CategoricalTable> {
        CategoricalTable::ingest_csv(&self.input, self.columns.as_deref())
    }
}

#[derive(Debug, Args)]
struct EngineOpts {
    /// Value computation mode
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,

    /// Monte Carlo permutations per subject
    #[arg(long, default_value_t = 10_000)]
    permutations: usize,

    /// Seed for Monte Carlo permutation sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    workers: usize,

    /// Cohort count at or below which tree nodes store explicit row lists
    #[arg(long, default_value_t = DEFAULT_LEAF_THRESHOLD)]
    leaf_threshold: usize,

    /// Run exact or keyed mode even when d exceeds the exact-mode limit
    #[arg(long)]
    force_exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
    Keyed,
}

#[derive(Debug, Args)]
struct OutputOpts {
    /// Output file (default: stdout). Written atomically.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ShapleyCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    engine: EngineOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Args)]
struct AggregateCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    engine: EngineOpts,
    #[command(flatten)]
    output: OutputOpts,

    /// Subject subset as `col=level[,col=level...]` (default: all subjects)
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Debug, Args)]
struct BenchmarkCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    engine: EngineOpts,
    #[command(flatten)]
    output: OutputOpts,

    /// Skip the linear-scan engine above this many rows
    #[arg(long, default_value_t = 50_000)]
    naive_cutoff: usize,
}

#[derive(Debug, Args)]
struct CoarsenStudyCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    engine: EngineOpts,
    #[command(flatten)]
    output: OutputOpts,

    /// Column the coarsening maps apply to
    #[arg(long)]
    coarsen_column: String,

    /// Colon-separated coarsening map files (each `old_level,new_bucket`),
    /// each applied independently to the baseline table
    #[arg(long, value_delimiter = ':', required = true)]
    coarsen_map: Vec<PathBuf>,

    /// Optional subject subset, as for aggregate
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Debug, Args)]
struct PlotdataCmd {
    #[command(flatten)]
    input: InputOpts,
    #[command(flatten)]
    engine: EngineOpts,
    #[command(flatten)]
    output: OutputOpts,

    /// Keep every k-th subject after sorting (1 = keep all)
    #[arg(long, default_value_t = 1)]
    every: usize,
}

/// Parse the process arguments, run the selected command, and map the
/// outcome to an exit code: 0 success, 1 input/validation error, 2 internal
/// correctness failure.
pub fn run() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err @ Error::EngineMismatch(_)) => {
            eprintln!("error: {err}");
            2
        }
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Shapley(cmd) => cmd_shapley(cmd),
        Command::Aggregate(cmd) => cmd_aggregate(cmd),
        Command::Benchmark(cmd) => cmd_benchmark(cmd),
        Command::CoarsenStudy(cmd) => cmd_coarsen_study(cmd),
        Command::Plotdata(cmd) => cmd_plotdata(cmd),
    }
}

struct Computed {
    matrix: ShapleyMatrix,
    build_secs: f64,
    compute_secs: f64,
}

fn effective_mode(engine: &EngineOpts, d: usize) -> Mode {
    // Only exact mode falls back: Monte Carlo estimates the plain value, so
    // a silent switch from keyed mode would change what is being computed.
    // Keyed mode over the limit errors out unless --force-exact is given.
    if engine.mode == Mode::Exact && d > DEFAULT_EXACT_D_LIMIT && !engine.force_exact {
        log::warn!(
            "d = {d} exceeds the exact-mode limit {DEFAULT_EXACT_D_LIMIT}; \
             switching to Monte Carlo (pass --force-exact to override)"
        );
        Mode::Mc
    } else {
        engine.mode
    }
}

fn compute_matrix(table: &CategoricalTable, engine: &EngineOpts) -> Result<Computed> {
    let build_start = Instant::now();
    let tree = AdTree::build(table, engine.leaf_threshold);
    let build_secs = build_start.elapsed().as_secs_f64();

    let mode = effective_mode(engine, table.d());
    // --force-exact lifts the limit to exactly this table's d.
    let limit = if engine.force_exact {
        table.d().max(DEFAULT_EXACT_D_LIMIT)
    } else {
        DEFAULT_EXACT_D_LIMIT
    };

    let compute_start = Instant::now();
    let matrix = match mode {
        Mode::Exact => shapley::shapley_all_with_limit(&tree, engine.workers, limit)?,
        Mode::Keyed => shapley::shapley_all_keyed_with_limit(&tree, engine.workers, limit)?,
        Mode::Mc => {
            if engine.permutations == 0 {
                return Err(Error::BadArgument {
                    flag: "--permutations".into(),
                    reason: "Monte Carlo mode requires at least one permutation".into(),
                });
            }
            shapley::shapley_all_mc(&tree, engine.workers, engine.permutations, engine.seed)?
        }
    };
    let compute_secs = compute_start.elapsed().as_secs_f64();
    eprintln!(
        "tree build: {:.3}s ({} nodes); {} compute: {:.3}s",
        build_secs,
        tree.node_count(),
        match mode {
            Mode::Exact => "exact",
            Mode::Mc => "monte-carlo",
            Mode::Keyed => "keyed",
        },
        compute_secs
    );
    Ok(Computed {
        matrix,
        build_secs,
        compute_secs,
    })
}

fn subject_set(table: &CategoricalTable, filter: Option<&str>) -> Result<SubjectSet> {
    match filter {
        None => Ok(SubjectSet::all(table.n())),
        Some(text) => SubjectFilter::parse(text)?.apply(table),
    }
}

fn cmd_shapley(cmd: ShapleyCmd) -> Result<()> {
    let table = cmd.input.load()?;
    let computed = compute_matrix(&table, &cmd.engine)?;
    let bytes = match cmd.output.format {
        Format::Csv => matrix_csv(&computed.matrix, table.names())?,
        Format::Json => matrix_json(&computed.matrix, table.names())?,
    };
    write_atomic(cmd.output.output.as_deref(), &bytes)
}

fn cmd_aggregate(cmd: AggregateCmd) -> Result<()> {
    let table = cmd.input.load()?;
    let subjects = subject_set(&table, cmd.filter.as_deref())?;
    let computed = compute_matrix(&table, &cmd.engine)?;
    let report = shapley::aggregate(&computed.matrix, &subjects, &table)?;
    let bytes = match cmd.output.format {
        Format::Csv => aggregate_csv(&report)?,
        Format::Json => to_json(&report)?,
    };
    write_atomic(cmd.output.output.as_deref(), &bytes)
}

fn cmd_benchmark(cmd: BenchmarkCmd) -> Result<()> {
    let table = cmd.input.load()?;
    let exact_engine = EngineOpts {
        mode: Mode::Exact,
        ..cmd.engine
    };
    let tree_run = compute_matrix(&table, &exact_engine)?;

    let naive = if table.n() <= cmd.naive_cutoff {
        let start = Instant::now();
        let counter = NaiveCounter::new(&table);
        let matrix = shapley::shapley_all_with_limit(
            &counter,
            cmd.engine.workers,
            DEFAULT_EXACT_D_LIMIT.max(table.d()),
        )?;
        let secs = start.elapsed().as_secs_f64();

        // Correctness outranks timing: nothing is reported on disagreement.
        for t in 0..table.n() {
            for j in 0..table.d() {
                let a = tree_run.matrix.get(t, j);
                let b = matrix.get(t, j);
                if (a - b).abs() > 1e-9 {
                    return Err(Error::EngineMismatch(format!(
                        "subject {t}, variable {}: tree {a} vs naive {b}",
                        table.name(j)
                    )));
                }
            }
        }
        Some(secs)
    } else {
        None
    };

    let mut out = String::new();
    out.push_str("engine,build_seconds,compute_seconds\n");
    out.push_str(&format!(
        "adtree,{:.3},{:.3}\n",
        tree_run.build_secs, tree_run.compute_secs
    ));
    match naive {
        Some(secs) => {
            out.push_str(&format!("naive,0.000,{secs:.3}\n"));
            let tree_total = tree_run.build_secs + tree_run.compute_secs;
            out.push_str(&format!("speedup,,{:.2}\n", secs / tree_total));
        }
        None => {
            out.push_str("naive,n/a,n/a\n");
            log::info!(
                "naive engine skipped: n = {} exceeds cutoff {}",
                table.n(),
                cmd.naive_cutoff
            );
        }
    }
    write_atomic(cmd.output.output.as_deref(), out.as_bytes())
}

fn cmd_coarsen_study(cmd: CoarsenStudyCmd) -> Result<()> {
    let table = cmd.input.load()?;
    let column = table
        .column_index(&cmd.coarsen_column)
        .ok_or_else(|| Error::MissingColumn(cmd.coarsen_column.clone()))?;

    let mut variants: Vec<(String, CategoricalTable)> = vec![("baseline".into(), table.clone())];
    for path in &cmd.coarsen_map {
        let map = CoarseningMap::from_csv_path(column, path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        variants.push((label, table.coarsen(&map)?));
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["level".to_string()];
    header.extend(table.names().iter().cloned());
    writer.write_record(&header).map_err(csv_write_error)?;

    for (label, variant) in &variants {
        let subjects = subject_set(variant, cmd.filter.as_deref())?;
        let computed = compute_matrix(variant, &cmd.engine)?;
        let report = shapley::aggregate(&computed.matrix, &subjects, variant)?;
        let mut record = vec![label.clone()];
        record.extend(
            report
                .variables
                .iter()
                .map(|v| format!("{:.6}", v.shapley_bits)),
        );
        writer.write_record(&record).map_err(csv_write_error)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    write_atomic(cmd.output.output.as_deref(), &bytes)
}

fn cmd_plotdata(cmd: PlotdataCmd) -> Result<()> {
    if cmd.every == 0 {
        return Err(Error::BadArgument {
            flag: "--every".into(),
            reason: "subsampling step must be >= 1".into(),
        });
    }
    let table = cmd.input.load()?;
    let computed = compute_matrix(&table, &cmd.engine)?;
    let matrix = &computed.matrix;

    let mut order: Vec<usize> = (0..matrix.n()).collect();
    order.sort_by(|&a, &b| {
        matrix
            .row_total(a)
            .total_cmp(&matrix.row_total(b))
            .then(a.cmp(&b))
    });

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject_id".to_string()];
    header.extend(table.names().iter().cloned());
    header.push("total".into());
    writer.write_record(&header).map_err(csv_write_error)?;
    for &t in order.iter().step_by(cmd.every) {
        let mut record = vec![t.to_string()];
        record.extend(matrix.row(t).iter().map(|v| format!("{v:.9}")));
        record.push(format!("{:.9}", matrix.row_total(t)));
        writer.write_record(&record).map_err(csv_write_error)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    write_atomic(cmd.output.output.as_deref(), &bytes)
}

fn matrix_csv(matrix: &ShapleyMatrix, names: &[String]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject_id".to_string()];
    header.extend(names.iter().cloned());
    writer.write_record(&header).map_err(csv_write_error)?;
    for t in 0..matrix.n() {
        let mut record = vec![t.to_string()];
        record.extend(matrix.row(t).iter().map(|v| format!("{v:.9}")));
        writer.write_record(&record).map_err(csv_write_error)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))
}

#[derive(Serialize)]
struct MatrixDoc<'a> {
    provenance: Provenance,
    variables: &'a [String],
    values: Vec<&'a [f64]>,
}

fn matrix_json(matrix: &ShapleyMatrix, names: &[String]) -> Result<Vec<u8>> {
    let doc = MatrixDoc {
        provenance: matrix.provenance(),
        variables: names,
        values: (0..matrix.n()).map(|t| matrix.row(t)).collect(),
    };
    to_json(&doc)
}

fn aggregate_csv(report: &AggregateReport) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["variable", "entropy_bits", "shapley_bits", "subset_pct"])
        .map_err(csv_write_error)?;
    for var in &report.variables {
        writer
            .write_record([
                var.name.clone(),
                format!("{:.6}", var.entropy_bits),
                format!("{:.6}", var.shapley_bits),
                format!("{:.2}", report.subset_pct),
            ])
            .map_err(csv_write_error)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_write_error(err: csv::Error) -> Error {
    Error::Serialize(err.to_string())
}

/// Write the full output, then move it into place; a failed command never
/// leaves a partial output file behind.
fn write_atomic(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(parent) if !parent.as_os_str().is_empty() => parent,
                _ => Path::new("."),
            };
            let io_err = |source: std::io::Error| Error::Io {
                path: path.to_path_buf(),
                source,
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
            tmp.write_all(bytes).map_err(io_err)?;
            tmp.persist(path).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}
