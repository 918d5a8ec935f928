use std::fmt;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pdaseq::bench::{bench_model, exponents, run_bench, write_bench_csv};
use pdaseq::cachesim::{measure, parse_demands, run_round, write_trace_csv, FileLibrary, TraceRow, DEFAULT_PACKET_LEN};
use pdaseq::graph::{augment, graph_to_pda, greedy_strong_color, BipartiteColoredGraph, DeltaPolicy, EdgeOrder};
use pdaseq::neural::{
    load_checkpoint, rollout, save_checkpoint, train, write_log_csv, DecodeMode, ModelConfig, TrainConfig, TrainError,
};
use pdaseq::pda::{format_text, parse_text, subsets};
use pdaseq::seqcodec::{cyclic_star_pattern, placement_to_adjacency, read_jsonl, write_jsonl, TrainingPair};
use pdaseq::{construct_mn_pda, verify, Pda};

/// Placement delivery arrays: construction, verification, coloring,
/// training and coded-caching simulation.
///
/// Exit codes: 0 success, 1 invalid PDA, 2 input or parse error,
/// 3 training failure.
#[derive(Parser)]
#[command(name = "pdaseq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a PDA text file and print the verification report.
    Verify {
        path: PathBuf,
    },
    /// Write the Maddah-Ali-Niesen PDA for K users and t = KM/N.
    Construct {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
        /// PDA text output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the colored bipartite graph as JSON.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Placement, coloring, verification and simulation in one run.
    Pipeline(PipelineArgs),
    /// Mint a training corpus by edge subsampling of source PDAs.
    Augment(AugmentArgs),
    /// Train the neural colorer on a corpus.
    Train(TrainArgs),
    /// Run coded-caching rounds on a PDA.
    Simulate(SimulateArgs),
    /// Time greedy coloring against neural inference.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Colorer {
    Greedy,
    Neural,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    f: usize,
    #[arg(long)]
    z: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    colorer: Colorer,
    /// Required with `--colorer neural`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Decode without the feasibility mask.
    #[arg(long)]
    no_mask: bool,
    /// Visit edges in seeded random order when coloring greedily.
    #[arg(long)]
    shuffle: bool,
    /// Library size N (defaults to K).
    #[arg(long)]
    n_files: Option<usize>,
    /// Random demand vectors to simulate.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// PDA text output.
    #[arg(long, default_value = "pda.txt")]
    out: PathBuf,
    /// Summary CSV output.
    #[arg(long, default_value = "summary.csv")]
    summary: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Source PDA text files.
    #[arg(long = "source")]
    sources: Vec<PathBuf>,
    /// MN sources given as `K:t`.
    #[arg(long = "mn", value_parser = parse_k_t)]
    mn: Vec<(usize, usize)>,
    /// Edges kept per user; random in 1..Δ when omitted.
    #[arg(long)]
    delta: Option<usize>,
    /// Cap on K·δ for random δ.
    #[arg(long)]
    max_edges: Option<usize>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corpus JSONL output; a `.meta.json` file is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Held-out corpus for the valid_rate column (defaults to the corpus).
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "train_log.csv")]
    log: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 16)]
    embed: usize,
    /// Largest F the model accepts (defaults to the corpus maximum).
    #[arg(long)]
    f_max: Option<usize>,
    /// Largest K the model accepts (defaults to the corpus maximum).
    #[arg(long)]
    k_max: Option<usize>,
    /// Attention half-span and back-pointer budget.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 30)]
    supervised_epochs: usize,
    #[arg(long, default_value_t = 30)]
    reinforce_epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    lr_supervised: f64,
    #[arg(long, default_value_t = 0.1)]
    lr_reinforce: f64,
    /// Apply the feasibility mask during training.
    #[arg(long)]
    train_mask: bool,
    /// Subtract a moving-average reward baseline.
    #[arg(long)]
    baseline: bool,
    /// Write 0 in the wall_ms column so logs compare byte for byte.
    #[arg(long)]
    no_wall_clock: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// PDA text file.
    #[arg(long)]
    pda: PathBuf,
    /// Library size N (defaults to K).
    #[arg(long)]
    n_files: Option<usize>,
    /// One demand vector of 1-based file indices, e.g. `1,3`.
    #[arg(long, conflicts_with = "trials")]
    demands: Option<String>,
    /// Random demand vectors to simulate.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PACKET_LEN)]
    packet_len: usize,
    /// Transcript JSON of the `--demands` round.
    #[arg(long, requires = "demands")]
    transcript: Option<PathBuf>,
    /// Demand trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Edge counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Take the hidden and embedding widths from a trained model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 16)]
    embed: usize,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
}

#[derive(Debug)]
struct TrainingFailed(String);

impl fmt::Display for TrainingFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TrainingFailed {}

fn parse_k_t(s: &str) -> Result<(usize, usize), String> {
    let (k, t) = s.split_once(':').ok_or_else(|| format!("expected K:t, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(k)?, num(t)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_pda(path: &Path) -> Result<std::result::Result<Pda, String>> {
    let text = parse_text(&read(path)?).with_context(|| path.display().to_string())?;
    let report = text.verify();
    if report.valid {
        Ok(Ok(text.into_pda()?))
    } else {
        Ok(Err(report.to_string()))
    }
}

fn cmd_verify(path: &Path) -> Result<u8> {
    let text = parse_text(&read(path)?).with_context(|| path.display().to_string())?;
    let report = text.verify();
    print!("{report}");
    Ok(if report.valid { 0 } else { 1 })
}

fn cmd_construct(k: usize, t: usize, out: Option<&Path>, graph: Option<&Path>) -> Result<u8> {
    let p = construct_mn_pda(k, t)?;
    match out {
        Some(path) => write(path, p.to_text().as_bytes())?,
        None => print!("{}", p.to_text()),
    }
    if let Some(path) = graph {
        write(path, BipartiteColoredGraph::from(&p).to_json().as_bytes())?;
    }
    Ok(0)
}

fn binomial(n: usize, r: usize) -> usize {
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// MN star pattern when `t = KZ/F` is integral and `F = C(K,t)`, otherwise
/// the cyclic one.
fn star_pattern(k: usize, f: usize, z: usize) -> (Vec<Vec<usize>>, &'static str) {
    if f > 0 && (k * z) % f == 0 {
        let t = k * z / f;
        if t <= k && binomial(k, t) == f {
            let pattern = (0..k)
                .map(|user| {
                    subsets(k, t)
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.contains(&user))
                        .map(|(row, _)| row)
                        .collect()
                })
                .collect();
            return (pattern, "mn");
        }
    }
    (cyclic_star_pattern(f, k, z), "cyclic")
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<u8> {
    let (pattern, placement) = star_pattern(a.k, a.f, a.z);
    let adjacency = placement_to_adjacency(a.z, a.f, a.k, &pattern)?;
    let mask = !a.no_mask;
    let grid = match a.colorer {
        Colorer::Greedy => {
            let order = if a.shuffle { EdgeOrder::Shuffled { seed: a.seed } } else { EdgeOrder::Lexicographic };
            graph_to_pda(&greedy_strong_color(&adjacency.to_graph(), order))?.into_grid()
        }
        Colorer::Neural => {
            let path = a.checkpoint.as_deref().context("--colorer neural needs --checkpoint")?;
            let params = load_checkpoint(&read(path)?).with_context(|| path.display().to_string())?;
            rollout(&adjacency, &params, DecodeMode::Greedy, mask, a.seed)?.grid
        }
    };
    let s = grid.distinct_colors();
    write(&a.out, format_text(&grid, a.z, s).as_bytes())?;
    let report = verify(&grid);
    if !report.valid {
        eprint!("{report}");
        return Ok(1);
    }
    let pda = Pda::new(grid)?;
    let n_files = a.n_files.unwrap_or(a.k);
    let m = measure(&pda, n_files, a.trials, a.seed)?;
    let colorer = match a.colorer {
        Colorer::Greedy => "greedy",
        Colorer::Neural => "neural",
    };
    let mut csv = Vec::new();
    writeln!(
        csv,
        "# seed={} colorer={colorer} placement={placement} mask={mask} n_files={n_files} trials={}",
        a.seed, a.trials
    )?;
    writeln!(csv, "k,f,z,s,delivery_rate,uncoded_rate,all_decoded,max_packets_sent")?;
    writeln!(
        csv,
        "{},{},{},{},{},{},{},{}",
        pda.k(),
        pda.f(),
        pda.z(),
        pda.s(),
        m.delivery_rate,
        m.uncoded_rate,
        m.all_decoded,
        m.max_packets_sent
    )?;
    write(&a.summary, &csv)?;
    println!(
        "({},{},{},{}) PDA, {placement} placement, {colorer} coloring: rate {} (uncoded {}), all decoded: {}",
        pda.k(),
        pda.f(),
        pda.z(),
        pda.s(),
        m.delivery_rate,
        m.uncoded_rate,
        m.all_decoded
    );
    Ok(if m.all_decoded { 0 } else { 1 })
}

fn cmd_augment(a: &AugmentArgs) -> Result<u8> {
    let mut sources = Vec::new();
    let mut names = Vec::new();
    for path in &a.sources {
        match load_pda(path)? {
            Ok(p) => sources.push(p),
            Err(report) => bail!("{} is not a PDA:\n{report}", path.display()),
        }
        names.push(path.display().to_string());
    }
    for &(k, t) in &a.mn {
        sources.push(construct_mn_pda(k, t)?);
        names.push(format!("mn:{k}:{t}"));
    }
    let policy = match a.delta {
        Some(d) => DeltaPolicy::Fixed(d),
        None => DeltaPolicy::Random { max_edges: a.max_edges },
    };
    let pairs = if a.count == 0 {
        Vec::new()
    } else {
        if sources.is_empty() {
            bail!("no sources given");
        }
        let out = augment(&sources, policy, a.count, a.seed)?;
        for i in out.skipped {
            eprintln!("warning: skipping {}: no legal delta", names[i]);
        }
        out.pdas.iter().map(TrainingPair::from_pda).collect::<Vec<_>>()
    };
    for p in &pairs {
        p.check()?;
    }
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &pairs)?;
    write(&a.out, &buf)?;
    let meta = format!(
        "{{\"seed\":{},\"count\":{},\"delta\":{},\"max_edges\":{},\"sources\":[{}]}}\n",
        a.seed,
        a.count,
        a.delta.map_or("null".into(), |d| d.to_string()),
        a.max_edges.map_or("null".into(), |d| d.to_string()),
        names.iter().map(|n| format!("{n:?}")).collect::<Vec<_>>().join(",")
    );
    write(&sidecar(&a.out), meta.as_bytes())?;
    eprintln!("wrote {} pairs to {}", pairs.len(), a.out.display());
    Ok(0)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn read_corpus(path: &Path) -> Result<Vec<TrainingPair>> {
    let file = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| path.display().to_string())
}

fn cmd_train(a: &TrainArgs) -> Result<u8> {
    let corpus = read_corpus(&a.corpus)?;
    if corpus.is_empty() {
        bail!("{} holds no training pairs", a.corpus.display());
    }
    let eval = match &a.eval {
        Some(p) => read_corpus(p)?,
        None => Vec::new(),
    };
    let all = corpus.iter().chain(&eval);
    let f_max = a.f_max.unwrap_or_else(|| all.clone().map(|p| p.f).max().unwrap_or(1));
    let k_max = a.k_max.unwrap_or_else(|| all.map(|p| p.k).max().unwrap_or(1));
    let config = TrainConfig {
        model: ModelConfig { hidden: a.hidden, embed: a.embed, f_max, k_max, window: a.window, seed: a.seed },
        supervised_epochs: a.supervised_epochs,
        reinforce_epochs: a.reinforce_epochs,
        batch_size: a.batch_size,
        lr_supervised: a.lr_supervised,
        lr_reinforce: a.lr_reinforce,
        train_mask: a.train_mask,
        baseline: a.baseline,
        wall_clock: !a.no_wall_clock,
        ..TrainConfig::default()
    };
    let comment = format!(
        "seed={} hidden={} embed={} f_max={f_max} k_max={k_max} window={} supervised_epochs={} reinforce_epochs={} \
         batch_size={} lr_supervised={} lr_reinforce={} train_mask={} baseline={}",
        a.seed,
        a.hidden,
        a.embed,
        a.window.map_or("none".into(), |w| w.to_string()),
        a.supervised_epochs,
        a.reinforce_epochs,
        a.batch_size,
        a.lr_supervised,
        a.lr_reinforce,
        a.train_mask,
        a.baseline
    );
    let write_log = |log: &[_]| -> Result<()> {
        let mut buf = Vec::new();
        write_log_csv(&mut buf, Some(&comment), log)?;
        write(&a.log, &buf)
    };
    match train(&corpus, &eval, &config) {
        Ok(out) => {
            write(&a.checkpoint, save_checkpoint(&out.params).as_bytes())?;
            write_log(&out.log)?;
            let last = out.log.last().expect("log has the init row");
            println!(
                "epoch {}: loss {:.6}, valid rate {:.4} (epoch 0: {:.4})",
                last.epoch, last.loss, last.valid_rate, out.log[0].valid_rate
            );
            Ok(0)
        }
        Err(TrainError::Divergence { epoch, last_good, log }) => {
            write(&a.checkpoint, save_checkpoint(&last_good).as_bytes())?;
            write_log(&log)?;
            Err(TrainingFailed(format!(
                "training diverged in epoch {epoch}; last good parameters saved to {}",
                a.checkpoint.display()
            ))
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<u8> {
    let pda = match load_pda(&a.pda)? {
        Ok(p) => p,
        Err(report) => {
            eprint!("{report}");
            return Ok(1);
        }
    };
    let n_files = a.n_files.unwrap_or(pda.k());
    let comment = format!("seed={} n_files={n_files} packet_len={}", a.seed, a.packet_len);
    let (trace, all_decoded): (Vec<TraceRow>, bool) = match &a.demands {
        Some(text) => {
            let d = parse_demands(text, n_files)?;
            if d.len() != pda.k() {
                bail!("{} demands for K={}", d.len(), pda.k());
            }
            let lib = FileLibrary::random(n_files, pda.f(), a.packet_len, a.seed);
            let round = run_round(pda.grid(), &lib, &d)?;
            if let Some(path) = &a.transcript {
                write(path, round.transcript.to_json().as_bytes())?;
            }
            let rows = round
                .users
                .iter()
                .map(|u| TraceRow { trial: 0, user: u.user, demand: u.demand, decoded_ok: u.decoded_ok() })
                .collect();
            (rows, round.all_decoded())
        }
        None => {
            let m = measure(&pda, n_files, a.trials, a.seed)?;
            (m.trace, m.all_decoded)
        }
    };
    if let Some(path) = &a.trace {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, Some(&comment), &trace)?;
        write(path, &buf)?;
    }
    let rates = pda.rate();
    println!(
        "({},{},{},{}) PDA: rate {}, memory ratio {}, all decoded: {all_decoded}",
        pda.k(),
        pda.f(),
        pda.z(),
        pda.s(),
        rates.delivery_rate,
        rates.memory_ratio
    );
    Ok(if all_decoded { 0 } else { 1 })
}

fn cmd_bench(a: &BenchArgs) -> Result<u8> {
    let (hidden, embed) = match &a.checkpoint {
        Some(path) => {
            let p = load_checkpoint(&read(path)?).with_context(|| path.display().to_string())?;
            (p.config.hidden, p.config.embed)
        }
        None => (a.hidden, a.embed),
    };
    let max_edges = a.sizes.iter().copied().max().unwrap_or(0);
    let params = bench_model(hidden, embed, a.window, max_edges, a.seed);
    let rows = run_bench(&a.sizes, a.reps, &params)?;
    let mut buf = Vec::new();
    let comment = format!("seed={} hidden={hidden} embed={embed} window={} reps={}", a.seed, a.window, a.reps);
    write_bench_csv(&mut buf, Some(&comment), &rows)?;
    write(&a.out, &buf)?;
    let (g, n) = exponents(&rows);
    let show = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!("scaling exponents: greedy {}, neural {}", show(g), show(n));
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify { path } => cmd_verify(&path),
        Command::Construct { k, t, out, graph } => cmd_construct(k, t, out.as_deref(), graph.as_deref()),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Augment(a) => cmd_augment(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            ExitCode::from(if e.is::<TrainingFailed>() { 3 } else { 2 })
        }
    }
}
