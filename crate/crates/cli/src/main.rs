use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use forcelog::epmem::export::{write_trajectory, Format};
use forcelog::epmem::trace::{write_events, TraceReader};
use forcelog::epmem::Store;
use forcelog::query::{Engine, QueryDocument};
use forcelog::tracegen::{library, simulate_with, ScenarioScript};
use forcelog::{Config, EntityId, Error, Interval, Result};

/// `println!` that reports write failures instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

#[derive(Debug, Parser)]
#[command(name = "forcelog", version, about = "Simulate, parse and query manipulation episodes")]
struct Cli {
    /// Episodic memory store directory.
    #[arg(long, global = true, env = "FORCELOG_STORE", default_value = "forcelog-store")]
    store: PathBuf,

    /// Thresholds file (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for deterministic ids; random ids when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format for exports: ndjson or csv.
    #[arg(long, global = true, default_value = "ndjson")]
    format: String,

    /// More log output (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario script and write a trace plus ground-truth sidecar.
    Simulate {
        /// Scenario TOML file, or the name of a built-in scenario.
        scenario: String,
        /// Output prefix; writes <out>.trace.ndjson and <out>.truth.ndjson.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream a trace through the monitors into the store.
    Parse {
        trace: PathBuf,
        /// Task name; defaults to the trace header task.
        #[arg(long)]
        task: Option<String>,
        /// Also write the emitted events as NDJSON.
        #[arg(long)]
        events_out: Option<PathBuf>,
    },
    /// Run query documents against the store; results as NDJSON.
    Query {
        document: PathBuf,
        /// Attach trajectory samples to each match.
        #[arg(long)]
        trajectory: bool,
    },
    /// Export the pose trajectory of one entity.
    Export {
        /// Entity id or local name.
        #[arg(long)]
        entity: String,
        #[arg(long)]
        episode: Option<EntityId>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        end: Option<f64>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in scenario scripts as TOML files.
    Scenarios {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn closed_pipe(e: &Error) -> bool {
    match e {
        Error::Io(e) => e.kind() == io::ErrorKind::BrokenPipe,
        Error::Json(e) => e.io_error_kind() == Some(io::ErrorKind::BrokenPipe),
        _ => false,
    }
}

fn check_paths(cli: &Cli) -> Result<()> {
    if let Some(c) = &cli.config {
        if !c.is_file() {
            return Err(Error::validation(format!("config file {} does not exist", c.display())));
        }
    }
    if cli.store.exists() && !cli.store.is_dir() {
        return Err(Error::validation(format!("store path {} is not a directory", cli.store.display())));
    }
    let input = match &cli.command {
        Command::Parse { trace, .. } => Some(trace),
        Command::Query { document, .. } => Some(document),
        _ => None,
    };
    if let Some(p) = input {
        if !p.is_file() {
            return Err(Error::validation(format!("input file {} does not exist", p.display())));
        }
    }
    if matches!(cli.command, Command::Query { .. } | Command::Export { .. }) && !cli.store.is_dir() {
        return Err(Error::NotFound(format!("store {} does not exist", cli.store.display())));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    check_paths(cli)?;
    let format: Format = cli.format.parse()?;
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Simulate { scenario, out } => cmd_simulate(scenario, out, cli.seed, &config),
        Command::Parse { trace, task, events_out } => {
            cmd_parse(trace, &cli.store, task.as_deref(), events_out.as_deref(), cli.seed, &config)
        }
        Command::Query { document, trajectory } => cmd_query(&cli.store, document, *trajectory, cli.seed, &config),
        Command::Export {
            entity,
            episode,
            start,
            end,
            out,
        } => cmd_export(&cli.store, entity, episode.as_ref(), (*start, *end), format, out.as_deref(), &config),
        Command::Scenarios { out } => cmd_scenarios(out),
    }
}

fn load_scenario(arg: &str) -> Result<ScenarioScript> {
    let path = Path::new(arg);
    if path.is_file() {
        return ScenarioScript::load(path);
    }
    library::by_name(arg).ok_or_else(|| {
        Error::validation(format!(
            "{arg} is neither a scenario file nor a built-in scenario (known: {})",
            library::scenarios().iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ")
        ))
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(scenario: &str, out: &Path, seed: Option<u64>, config: &Config) -> Result<()> {
    let script = load_scenario(scenario)?;
    let seed = seed.unwrap_or(script.seed);
    let sim = simulate_with(&script, config, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let trace_path = with_suffix(out, ".trace.ndjson");
    let truth_path = with_suffix(out, ".truth.ndjson");
    sim.trace.save(&trace_path)?;
    let mut w = BufWriter::new(File::create(&truth_path)?);
    write_events(&mut w, &sim.truth)?;
    w.flush()?;
    let frames = sim.trace.frames.len();
    let duration = match (sim.trace.frames.first(), sim.trace.frames.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    say!("scenario {}", script.name);
    say!("frames {frames}");
    say!("duration {duration:.3} s");
    say!("trace {}", trace_path.display());
    say!("truth {}", truth_path.display());
    Ok(())
}

fn cmd_parse(
    trace: &Path,
    store_path: &Path,
    task: Option<&str>,
    events_out: Option<&Path>,
    seed: Option<u64>,
    config: &Config,
) -> Result<()> {
    let reader = TraceReader::new(BufReader::new(File::open(trace)?), &trace.display().to_string())?;
    let header = reader.header.clone();
    let entities = header.validate()?;
    let mut store = Store::open(store_path, seed)?;
    let name = task.unwrap_or(&header.task).to_string();
    let task_id = match store.task_by_name(&name) {
        Some(t) => {
            let mut have = t.entities.clone();
            let mut want = header.entities.clone();
            have.sort_by_key(|d| d.id);
            want.sort_by_key(|d| d.id);
            if have != want {
                return Err(Error::Conflict(format!("task {name:?} exists with different entities")));
            }
            t.id
        }
        None => store.create_task_with(&name, header.entities.clone())?.id,
    };
    let episode = store.create_episode(&task_id, Some(header.frame_rate))?;
    info!("parsing {} into episode {}", trace.display(), episode.id);
    let namespace = store.minter().is_seeded().then(|| episode.id.derive("events"));
    let mut parser = forcelog::monitors::Parser::new(&entities, config, namespace)?;
    let mut all = Vec::new();
    for frame in reader {
        let frame = frame?;
        let events = parser.step(&frame)?;
        store.append_frame(&episode.id, &frame)?;
        for e in &events {
            store.store_event(&episode.id, e)?;
        }
        all.extend(events);
    }
    let tail = parser.finish();
    for e in &tail {
        store.store_event(&episode.id, e)?;
    }
    all.extend(tail);
    let sealed = store.seal_episode(&episode.id)?;
    if let Some(p) = events_out {
        let mut w = BufWriter::new(File::create(p)?);
        write_events(&mut w, &all)?;
        w.flush()?;
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in &all {
        *counts.entry(e.kind.as_str().to_string()).or_default() += 1;
    }
    say!("task {name} {task_id}");
    say!("episode {}", sealed.id);
    say!("frames {}", sealed.frame_count);
    say!("events {}", all.len());
    for (k, n) in counts {
        say!("  {k} {n}");
    }
    Ok(())
}

fn cmd_query(store_path: &Path, document: &Path, trajectory: bool, seed: Option<u64>, config: &Config) -> Result<()> {
    let text = std::fs::read_to_string(document)?;
    let docs = QueryDocument::parse_many(&text, &document.display().to_string())?;
    let store = Store::open(store_path, seed)?;
    let engine = Engine::new(&store, config);
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    for doc in &docs {
        for line in engine.run(doc, trajectory)? {
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_export(
    store_path: &Path,
    entity: &str,
    episode: Option<&EntityId>,
    (start, end): (Option<f64>, Option<f64>),
    format: Format,
    out: Option<&Path>,
    config: &Config,
) -> Result<()> {
    let store = Store::open(store_path, None)?;
    let engine = Engine::new(&store, config);
    let id: EntityId = match entity.parse() {
        Ok(id) => id,
        Err(_) => {
            let hits: Vec<EntityId> = store
                .tasks()
                .filter_map(|t| t.entities.iter().find(|d| d.name == entity).map(|d| d.id))
                .collect();
            match hits.as_slice() {
                [id] => *id,
                [] => return Err(Error::NotFound(format!("entity {entity:?}"))),
                _ => return Err(Error::validation(format!("entity name {entity:?} is ambiguous; use its id"))),
            }
        }
    };
    let ep = engine.episode_of(&id, episode)?;
    let range = store
        .episode(&ep)?
        .time_range
        .ok_or_else(|| Error::NotFound(format!("episode {ep} has no frames")))?;
    let interval = Interval::new(start.unwrap_or(range.start), end.unwrap_or(range.end))?;
    let samples = engine.trajectory(&ep, &id, &interval)?;
    match out {
        Some(p) => write_trajectory(&samples, format, BufWriter::new(File::create(p)?))?,
        None => write_trajectory(&samples, format, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_scenarios(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for s in library::scenarios() {
        let path = out.join(format!("{}.toml", s.name));
        std::fs::write(&path, s.to_toml_string())?;
        say!("{}", path.display());
    }
    Ok(())
}
