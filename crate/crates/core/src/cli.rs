//! The `kaemsim` command line: `run`, `check`, `score` and `fmt`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::crn::{Network, SpeciesId};
use crate::dmf::{check_trace, compile_protocol, storyboard_svg, trace_jsonl, DeviceConfig, Frame, STORYBOARD_EVERY};
use crate::eval::{eval_program, EvalConfig, ExecutionTrace};
use crate::lang::{format_ast, parse_source};
use crate::protocol::check_linear_use;
use crate::score::{export_dot, layout_score, render_svg, resolve_order, ScoreStyle, SpeciesOrder};
use crate::sim::{
    symbolic_odes, timecourse_csv, timecourse_svg, Tolerances, DEFAULT_ATOL, DEFAULT_POINTS, DEFAULT_RTOL,
};
use crate::Error;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "KAEMSIM_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Emit {
    /// One CSV per simulation run.
    Csv,
    /// One SVG line plot per run.
    Plot,
    /// Reaction score of the final network.
    Score,
    /// Graphviz export of the final network.
    Dot,
    /// Device frame trace and storyboard (with --device).
    Trace,
    /// The ODE system as text.
    Odes,
    /// Everything above.
    All,
}

/// Which artifacts to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitSet {
    pub csv: bool,
    pub plot: bool,
    pub score: bool,
    pub dot: bool,
    pub trace: bool,
    pub odes: bool,
}

impl Default for EmitSet {
    fn default() -> Self {
        Self { csv: true, plot: true, score: true, dot: false, trace: true, odes: false }
    }
}

impl EmitSet {
    pub fn from_list(list: &[Emit]) -> Self {
        let all = list.contains(&Emit::All);
        let has = |e: Emit| all || list.contains(&e);
        Self {
            csv: has(Emit::Csv),
            plot: has(Emit::Plot),
            score: has(Emit::Score),
            dot: has(Emit::Dot),
            trace: has(Emit::Trace),
            odes: has(Emit::Odes),
        }
    }
}

/// How species lines are ordered in a score, before it is resolved
/// against a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderArg {
    Creation,
    Alpha,
    Barycenter,
    File(PathBuf),
}

impl std::str::FromStr for OrderArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "creation" => Ok(OrderArg::Creation),
            "alpha" => Ok(OrderArg::Alpha),
            "barycenter" => Ok(OrderArg::Barycenter),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(OrderArg::File(PathBuf::from(p))),
                _ => Err(format!("expected creation, alpha, barycenter or file:PATH, got '{s}'")),
            },
        }
    }
}

/// Turns an order argument into a concrete species order. Permutation
/// files list display names separated by whitespace or commas.
pub fn resolve_order_arg(network: &Network, arg: &OrderArg) -> Result<SpeciesOrder, Error> {
    Ok(match arg {
        OrderArg::Creation => SpeciesOrder::Creation,
        OrderArg::Alpha => SpeciesOrder::Alpha,
        OrderArg::Barycenter => SpeciesOrder::Barycenter,
        OrderArg::File(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read order file {}: {e}", path.display())))?;
            let ids = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|w| !w.is_empty())
                .map(|name| {
                    network
                        .find(name)
                        .ok_or_else(|| Error::Config(format!("order file names unknown species '{name}'")))
                })
                .collect::<Result<Vec<SpeciesId>, Error>>()?;
            SpeciesOrder::Explicit(ids)
        }
    })
}

/// Settings for one `run`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lna: bool,
    pub tolerances: Tolerances,
    pub binomial_split: bool,
    pub device: Option<DeviceConfig>,
    pub emit: EmitSet,
    pub order: OrderArg,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lna: false,
            tolerances: Tolerances::default(),
            binomial_split: false,
            device: None,
            emit: EmitSet::default(),
            order: OrderArg::Creation,
        }
    }
}

/// A file to be written, by name within the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: ExecutionTrace,
    pub frames: Option<Vec<Frame>>,
    pub artifacts: Vec<Artifact>,
}

fn score_artifacts(network: &Network, order: &OrderArg, score: bool, dot: bool) -> Result<Vec<Artifact>, Error> {
    let mut out = Vec::new();
    if score {
        let order = resolve_order(network, &resolve_order_arg(network, order)?);
        let model = layout_score(network, Some(&order))?;
        out.push(Artifact { name: "score.svg".into(), contents: render_svg(&model, &ScoreStyle::default()) });
    }
    if dot {
        out.push(Artifact { name: "network.dot".into(), contents: export_dot(network) });
    }
    Ok(out)
}

/// Parses, evaluates and simulates a script, and renders the requested
/// artifacts in memory.
pub fn run_source(source: &str, config: &RunConfig) -> Result<RunOutput, Error> {
    let program = parse_source(source)?;
    let eval = EvalConfig {
        lna: config.lna,
        tolerances: config.tolerances.clone(),
        binomial_split: config.binomial_split,
        ..EvalConfig::default()
    };
    let trace = eval_program(&program, &eval)?;
    check_linear_use(&trace.protocol)?;
    let mut artifacts = Vec::new();
    for tc in &trace.runs {
        if config.emit.csv {
            artifacts.push(Artifact { name: format!("{}.csv", tc.label), contents: timecourse_csv(tc) });
        }
        if config.emit.plot {
            artifacts.push(Artifact { name: format!("{}.plot.svg", tc.label), contents: timecourse_svg(tc) });
        }
    }
    for ex in &trace.exports {
        artifacts.push(Artifact { name: format!("{}.csv", ex.name), contents: ex.dataset.to_csv() });
    }
    artifacts.extend(score_artifacts(&trace.network, &config.order, config.emit.score, config.emit.dot)?);
    if config.emit.odes {
        artifacts.push(Artifact { name: "odes.txt".into(), contents: symbolic_odes(&trace.network, config.lna) });
    }
    let frames = match &config.device {
        Some(dc) => {
            let device = compile_protocol(dc, &trace.protocol)?;
            let violations = check_trace(dc, device.frames());
            if let Some(v) = violations.first() {
                return Err(Error::Config(format!(
                    "device trace failed validation at tick {}: {} ({} violations)",
                    v.tick,
                    v.message,
                    violations.len()
                )));
            }
            if config.emit.trace {
                artifacts.push(Artifact { name: "device.jsonl".into(), contents: trace_jsonl(device.frames()) });
                artifacts.push(Artifact {
                    name: "device.svg".into(),
                    contents: storyboard_svg(dc, device.frames(), STORYBOARD_EVERY),
                });
            }
            Some(device.into_frames())
        }
        None => None,
    };
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = artifacts.iter().find(|a| !seen.insert(a.name.clone())) {
        return Err(Error::Config(format!("two artifacts would both be named {}", dup.name)));
    }
    Ok(RunOutput { trace, frames, artifacts })
}

/// Result of a static check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSummary {
    pub species: usize,
    pub reactions: usize,
    pub steps: usize,
    /// Names of samples that are never consumed.
    pub leftovers: Vec<String>,
}

/// Parses and runs the generative pass with equilibrations stubbed out,
/// then checks linear sample use.
pub fn check_source(source: &str) -> Result<(CheckSummary, ExecutionTrace), Error> {
    let program = parse_source(source)?;
    let trace = eval_program(&program, &EvalConfig { check_only: true, ..EvalConfig::default() })?;
    check_linear_use(&trace.protocol)?;
    let summary = CheckSummary {
        species: trace.network.species.len(),
        reactions: trace.network.reactions.len(),
        steps: trace.protocol.len(),
        leftovers: trace.leftover_samples().iter().map(|s| s.name.clone()).collect(),
    };
    Ok((summary, trace))
}

/// Loads a network from a `.json` file or by evaluating a script without
/// simulating.
pub fn load_network(path: &Path, source: &str) -> Result<Network, Error> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(source)?)
    } else {
        Ok(check_source(source)?.1.network)
    }
}

/// Writes every artifact or none: on failure the files already written
/// are removed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, Error> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in artifacts {
        let path = dir.join(&a.name);
        if let Err(e) = fs::write(&path, &a.contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

#[derive(Parser, Debug)]
#[command(name = "kaemsim", version, about = "Reaction network scripting, simulation and protocol compilation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate and simulate a script, writing artifacts.
    Run(RunArgs),
    /// Parse and statically check a script without simulating.
    Check(InputArgs),
    /// Render the generated network as a score and a DOT graph.
    Score(ScoreArgs),
    /// Print a script in canonical layout.
    Fmt(InputArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    input: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    input: PathBuf,
    /// Output directory [default: $KAEMSIM_OUT, else ./out].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also integrate covariances (linear noise approximation).
    #[arg(long)]
    lna: bool,
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    rtol: f64,
    #[arg(long, default_value_t = DEFAULT_ATOL)]
    atol: f64,
    /// Output grid size per run, end points included.
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Add binomial partition noise when splitting.
    #[arg(long)]
    binomial_split: bool,
    /// Compile the protocol onto the virtual device.
    #[arg(long)]
    device: bool,
    #[arg(long, default_value_t = 16)]
    device_width: i32,
    #[arg(long, default_value_t = 8)]
    device_height: i32,
    /// Seed for the router's restart order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Artifacts to write [default: csv,plot,score,trace].
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Vec<Emit>,
    /// Score line order: creation, alpha, barycenter or file:PATH.
    #[arg(long, default_value = "creation")]
    order: OrderArg,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// A script, or a network serialized as .json.
    input: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Line order: creation, alpha, barycenter or file:PATH.
    #[arg(long, default_value = "creation")]
    order: OrderArg,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn report(file: &Path, e: &Error) {
    match e.location() {
        Some((l, c)) => eprintln!("{}:{l}:{c}: {}", file.display(), e.message()),
        None => eprintln!("{}: {e}", file.display()),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read input: {e}")))
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    if !(args.rtol > 0.0 && args.atol > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    if args.points < 2 {
        return Err(Error::Config("--points must be at least 2".into()));
    }
    let device = args
        .device
        .then(|| DeviceConfig { seed: args.seed, ..DeviceConfig::with_size(args.device_width, args.device_height) });
    if let Some(d) = &device {
        d.validate()?;
    }
    let config = RunConfig {
        lna: args.lna,
        tolerances: Tolerances { rtol: args.rtol, atol: args.atol, points: args.points, events: Vec::new() },
        binomial_split: args.binomial_split,
        device,
        emit: if args.emit.is_empty() { EmitSet::default() } else { EmitSet::from_list(&args.emit) },
        order: args.order,
    };
    let source = read(&args.input)?;
    let output = run_source(&source, &config)?;
    for w in &output.trace.warnings {
        eprintln!("{}: warning: {w}", args.input.display());
    }
    let dir = out_dir(args.out);
    for p in write_artifacts(&dir, &output.artifacts)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_check(args: &InputArgs) -> Result<(), Error> {
    let (summary, _) = check_source(&read(&args.input)?)?;
    println!("ok: {} species, {} reactions, {} protocol steps", summary.species, summary.reactions, summary.steps);
    for name in &summary.leftovers {
        println!("leftover sample: {name}");
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), Error> {
    let network = load_network(&args.input, &read(&args.input)?)?;
    let artifacts = score_artifacts(&network, &args.order, true, true)?;
    for p in write_artifacts(&out_dir(args.out), &artifacts)? {
        println!("{}", p.display());
    }
    Ok(())
}

/// Runs the command line and returns the process exit code: 0 on
/// success, 1 for input and runtime errors, 2 for usage errors.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (input, result) = match cli.command {
        Command::Run(a) => (a.input.clone(), cmd_run(a)),
        Command::Check(a) => (a.input.clone(), cmd_check(&a)),
        Command::Score(a) => (a.input.clone(), cmd_score(a)),
        Command::Fmt(a) => {
            let r = read(&a.input).and_then(|s| Ok(parse_source(&s)?)).map(|p| print!("{}", format_ast(&p)));
            (a.input, r)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            report(&input, &e);
            1
        }
    }
}
