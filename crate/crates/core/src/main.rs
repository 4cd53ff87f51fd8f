use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pkg_balance::estimation::Estimation;
use pkg_balance::partition::PartitionerKind;
use pkg_balance::report;
use pkg_balance::sim::{self, RoutingPlan, SourceSplit};
use pkg_balance::wordcount;
use pkg_balance::workload::{power_law_edges, IngestMode, Workload, WorkloadKind, WorkloadSpec};
use pkg_balance::{Error, RunConfig};

#[derive(Parser)]
#[command(
    name = "pkg-balance",
    version,
    about = "Stream partitioning load-imbalance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and emit the imbalance time series as CSV.
    Simulate(SimulateArgs),
    /// Run a grid of simulations in parallel and emit one summary row per run.
    Sweep(SweepArgs),
    /// Check how greedy-d imbalance scales with the number of workers.
    TheoryCheck(TheoryArgs),
    /// Streaming top-k word count with counter memory accounting.
    Wordcount(WordcountArgs),
    /// Peak counter memory per policy and worker count.
    Memory(MemoryArgs),
    /// Write a synthetic key stream (one key per line) or edge list.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Synthetic workload, e.g. `lognormal:1.789,2.366,16384,1000000`.
    #[arg(long, conflicts_with = "input")]
    gen: Option<String>,
    /// Read messages from a file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    /// How to parse --input: lines, text or edges.
    #[arg(long, default_value = "lines")]
    mode: String,
    /// Limit the stream to its first N messages (replaces M for --gen).
    #[arg(long)]
    messages: Option<u64>,
    /// Seed for the synthetic key draws; defaults to --seed.
    #[arg(long)]
    workload_seed: Option<u64>,
}

impl InputArgs {
    fn load(&self, seed: u64) -> Result<Workload, Error> {
        let seed = self.workload_seed.unwrap_or(seed);
        match (&self.gen, &self.input) {
            (Some(g), None) => {
                let mut kind: WorkloadKind = g.parse()?;
                if let Some(m) = self.messages {
                    set_messages(&mut kind, m)?;
                }
                Workload::load(WorkloadSpec::new(kind, seed))
            }
            (None, Some(path)) => {
                let mode: IngestMode = self.mode.parse()?;
                let w = Workload::load(WorkloadSpec::new(
                    WorkloadKind::File {
                        path: path.clone(),
                        mode,
                    },
                    seed,
                ))?;
                Ok(match (self.messages, w) {
                    (Some(m), Workload::Materialized { messages, interner }) => {
                        Workload::Materialized {
                            messages: messages[..messages.len().min(m as usize)].into(),
                            interner,
                        }
                    }
                    (_, w) => w,
                })
            }
            _ => Err(Error::Usage(
                "exactly one of --gen or --input is required".into(),
            )),
        }
    }
}

fn set_messages(kind: &mut WorkloadKind, m: u64) -> Result<(), Error> {
    match kind {
        WorkloadKind::Synthetic { messages, .. } => {
            *messages = m;
            kind.validate()
        }
        WorkloadKind::Drift { inner, .. } => set_messages(inner, m),
        WorkloadKind::File { .. } => Ok(()),
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    sources: usize,
    #[arg(long, default_value = "pkg")]
    partitioner: String,
    #[arg(long, default_value_t = 2)]
    choices: usize,
    /// global or local (pkg only; default global).
    #[arg(long)]
    estimation: Option<String>,
    /// Probe true loads every N messages; implies local estimation.
    #[arg(long)]
    probe_period: Option<u64>,
    /// Probe period in minutes, converted with --messages-per-minute.
    #[arg(
        long,
        requires = "messages_per_minute",
        conflicts_with = "probe_period"
    )]
    probe_minutes: Option<f64>,
    #[arg(long)]
    messages_per_minute: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    /// shuffle or keyed.
    #[arg(long, default_value = "shuffle")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sample_interval: Option<u64>,
    /// Write the per-message routing trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Emit one summary row instead of the sample series.
    #[arg(long)]
    summary: bool,
}

fn parse_plan(
    partitioner: &str,
    estimation: Option<&str>,
    probe_period: Option<u64>,
    split: &str,
) -> Result<RoutingPlan, Error> {
    let kind: PartitionerKind = partitioner.parse()?;
    let estimation = match (estimation, probe_period) {
        (None, None) => None,
        (Some(e), None) => Some(e.parse::<Estimation>()?),
        (None | Some("local"), Some(period)) => Some(Estimation::Probing { period }),
        (Some(e), Some(_)) => {
            return Err(Error::Usage(format!(
                "--probe-period implies local estimation, got --estimation {e}"
            )))
        }
    };
    let plan = RoutingPlan {
        kind,
        estimation,
        split: split.parse()?,
    };
    plan.validate()?;
    Ok(plan)
}

fn probe_period(args: &SimulateArgs) -> Result<Option<u64>, Error> {
    match (
        args.probe_period,
        args.probe_minutes,
        args.messages_per_minute,
    ) {
        (Some(p), _, _) => Ok(Some(p)),
        (None, Some(min), Some(rate)) => {
            let p = (min * rate).round();
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Usage(format!(
                    "probe period of {min} min at {rate} msg/min is under one message"
                )));
            }
            Ok(Some(p as u64))
        }
        _ => Ok(None),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let plan = parse_plan(
        &args.partitioner,
        args.estimation.as_deref(),
        probe_period(&args)?,
        &args.split,
    )?;
    let mut config = RunConfig::new(args.workers, args.sources)
        .with_choices(args.choices)
        .with_seed(args.seed);
    config.sample_interval = args.sample_interval;
    config.validate()?;
    let workload = args.input.load(args.seed)?;
    let result = sim::run(&config, &plan, &workload, args.trace.is_some())?;
    if let Some(path) = &args.trace {
        let out = create(path)?;
        report::write_trace(out, &result, workload.stream().map(|m| m.key))
            .map_err(|e| csv_err(path, e))?;
    }
    with_output(args.output.as_deref(), |out| {
        if args.summary {
            report::write_run_summaries(out, std::slice::from_ref(&result))
        } else {
            report::write_runs(out, std::slice::from_ref(&result))
        }
    })
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "kg,pkg")]
    partitioners: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    workers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    sources: Vec<usize>,
    /// Estimations applied to pkg runs: global, local, probing:N.
    #[arg(long, value_delimiter = ',', default_value = "global")]
    estimations: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    choices: usize,
    #[arg(long, default_value = "shuffle")]
    split: String,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    sample_interval: Option<u64>,
    /// Emit the full sample series instead of summaries.
    #[arg(long)]
    series: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let split: SourceSplit = args.split.parse()?;
    let mut plans = Vec::new();
    for p in &args.partitioners {
        let kind: PartitionerKind = p.parse()?;
        if kind == PartitionerKind::Pkg {
            for e in &args.estimations {
                plans.push(RoutingPlan::pkg(e.parse()?).with_split(split));
            }
        } else {
            plans.push(RoutingPlan::new(kind).with_split(split));
        }
    }
    // Each seed drives the hash family and, unless --workload-seed is set, the key draws.
    let mut results = Vec::new();
    for &seed in &args.seeds {
        let workload = args.input.load(seed)?;
        let mut jobs = Vec::new();
        for plan in &plans {
            for &w in &args.workers {
                for &s in &args.sources {
                    let mut c = RunConfig::new(w, s)
                        .with_choices(args.choices)
                        .with_seed(seed);
                    c.sample_interval = args.sample_interval;
                    c.validate()?;
                    jobs.push((c, *plan));
                }
            }
        }
        results.extend(sim::sweep(jobs, &workload, false)?);
    }
    with_output(args.output.as_deref(), |out| {
        if args.series {
            report::write_runs(out, &results)
        } else {
            report::write_run_summaries(out, &results)
        }
    })
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    /// Run the heavy-key check with this p1 instead of the scaling grid.
    #[arg(long)]
    heavykey: Option<f64>,
    /// Keys for the heavy-key check.
    #[arg(long, default_value_t = 10)]
    keys: u64,
    /// Workers for the heavy-key check.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Messages for the heavy-key check.
    #[arg(long, default_value_t = 100_000)]
    messages: u64,
    /// Flag threshold on I(m)/m for the heavy-key check.
    #[arg(long, default_value_t = 0.14)]
    threshold: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn theory_check(args: TheoryArgs) -> Result<(), Error> {
    if let Some(p1) = args.heavykey {
        let seed = args.seeds.first().copied().unwrap_or(0);
        let r = sim::heavy_key_check(p1, args.keys, args.n, args.d, args.messages, seed)?;
        return with_output(args.output.as_deref(), |out| {
            report::write_heavy_key(out, &r, args.threshold)
        });
    }
    let r = sim::theory_check(&args.n_list, args.d, &args.seeds)?;
    with_output(args.output.as_deref(), |out| report::write_theory(out, &r))
}

#[derive(Args)]
struct WordcountArgs {
    #[arg(long, default_value = "pkg")]
    policy: String,
    #[arg(long, default_value_t = 10)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    sources: usize,
    /// pkg only: global or local.
    #[arg(long)]
    estimation: Option<String>,
    /// Aggregation period in messages; 0 flushes only at the end.
    #[arg(long, default_value_t = 0)]
    period: u64,
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit one row per flush.
    #[arg(long)]
    per_flush: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn wordcount_cmd(args: WordcountArgs) -> Result<(), Error> {
    let kind: PartitionerKind = args.policy.parse()?;
    let estimation = args
        .estimation
        .as_deref()
        .map(str::parse::<Estimation>)
        .transpose()?;
    let config = RunConfig::new(args.workers, args.sources).with_seed(args.seed);
    config.validate()?;
    let workload = args.input.load(args.seed)?;
    let period = (args.period > 0).then_some(args.period);
    let r = wordcount::run_wordcount(&config, kind, estimation, &workload, period, args.topk)?;
    with_output(args.output.as_deref(), |out| {
        report::write_wordcount(out, &r, workload.interner(), args.per_flush)
    })
}

#[derive(Args)]
struct MemoryArgs {
    #[arg(long, value_delimiter = ',', default_value = "kg,sg,pkg")]
    policies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,50,100")]
    workers: Vec<usize>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn memory(args: MemoryArgs) -> Result<(), Error> {
    let policies = args
        .policies
        .iter()
        .map(|p| p.parse())
        .collect::<Result<Vec<PartitionerKind>, _>>()?;
    let base = RunConfig::new(1, 1).with_seed(args.seed);
    for &w in &args.workers {
        RunConfig { workers: w, ..base }.validate()?;
    }
    let workload = args.input.load(args.seed)?;
    let rows = wordcount::memory_comparison(&base, &workload, &args.workers, &policies)?;
    with_output(args.output.as_deref(), |out| {
        report::write_memory(out, &rows)
    })
}

#[derive(Args)]
struct GenerateArgs {
    /// Synthetic key workload to write, one key id per line.
    #[arg(long, conflicts_with = "edges")]
    gen: Option<String>,
    /// Power-law edge list `VERTICES,EDGES,SRC_EXP,DST_EXP`.
    #[arg(long)]
    edges: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let target = args.output.clone();
    let write = |f: &mut dyn FnMut(&mut dyn Write) -> io::Result<()>| -> Result<(), Error> {
        let path = target.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
        let io_err = |source| Error::Io {
            path: path.clone(),
            source,
        };
        match &target {
            Some(p) => {
                let mut out = BufWriter::new(create(p)?);
                f(&mut out).and_then(|_| out.flush()).map_err(io_err)
            }
            None => {
                let stdout = io::stdout();
                let mut out = BufWriter::new(stdout.lock());
                f(&mut out).and_then(|_| out.flush()).map_err(io_err)
            }
        }
    };
    match (&args.gen, &args.edges) {
        (Some(g), None) => {
            let workload = Workload::load(WorkloadSpec::parse(g, args.seed)?)?;
            write(&mut |out| {
                for m in workload.stream() {
                    writeln!(out, "{}", m.key)?;
                }
                Ok(())
            })
        }
        (None, Some(e)) => {
            let parts: Vec<&str> = e.split(',').collect();
            let [v, n, se, de] = parts[..] else {
                return Err(Error::Usage(
                    "--edges takes VERTICES,EDGES,SRC_EXP,DST_EXP".into(),
                ));
            };
            let bad = |what: &str| Error::Usage(format!("invalid {what} in --edges"));
            let edges = power_law_edges(
                v.parse().map_err(|_| bad("vertex count"))?,
                n.parse().map_err(|_| bad("edge count"))?,
                se.parse().map_err(|_| bad("source exponent"))?,
                de.parse().map_err(|_| bad("destination exponent"))?,
                args.seed,
            )?;
            write(&mut |out| {
                for (s, d) in &edges {
                    writeln!(out, "{s} {d}")?;
                }
                Ok(())
            })
        }
        _ => Err(Error::Usage(
            "exactly one of --gen or --edges is required".into(),
        )),
    }
}

fn create(path: &Path) -> Result<File, Error> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => io::Error::other(format!("{other:?}")),
    };
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> csv::Result<()>,
) -> Result<(), Error> {
    match path {
        Some(p) => {
            let mut out = BufWriter::new(create(p)?);
            f(&mut out).map_err(|e| csv_err(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            f(&mut out).map_err(|e| csv_err(Path::new("<stdout>"), e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::TheoryCheck(a) => theory_check(a),
        Command::Wordcount(a) => wordcount_cmd(a),
        Command::Memory(a) => memory(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pkg-balance: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
