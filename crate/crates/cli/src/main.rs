use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biasaudit::fixtures::{synthetic_universe, write_universe, FixtureSpec};
use biasaudit::inference::BackendRegistry;
use biasaudit::protocol::{build_schedule, dump_schedule};
use biasaudit::reporting::{cmd_report_rq1, cmd_report_rq2, cmd_report_rq3, cmd_run, ReportOutput, RunConfig};
use biasaudit::universe::load_universe;
use biasaudit::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Pairwise-comparison representation-bias audit for language models.
#[derive(Parser, Debug)]
#[command(name = "biasaudit", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the schedule shuffle, bootstrap and synthetic backend.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score the schedule into the result store, resuming if it exists.
    Run {
        #[command(flatten)]
        live: LiveBackend,
        /// Stop after attempting this many tasks (the store stays resumable).
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Compute one report from the result store.
    Report {
        #[arg(value_enum)]
        which: ReportKind,
        /// Store to read; defaults to `<out>/store.jsonl`.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Schedule utilities.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Check the config, universe and templates without running anything.
    Validate,
    /// Generate a synthetic universe, run the synthetic backend and report.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct LiveBackend {
    /// OpenAI-compatible completions endpoint; selects the live backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Name of the environment variable that holds the API key.
    #[arg(long)]
    api_key_env: Option<String>,
}

#[derive(Subcommand, Debug)]
enum ScheduleAction {
    /// Write the shuffled task list as JSONL.
    Dump {
        /// Destination file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ReportKind {
    Rq1,
    Rq2,
    Rq3,
}

/// With `--config` the universe and backend settings come from the file and
/// the fixture options are ignored.
#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    firms: usize,
    #[arg(long, default_value_t = 12)]
    months: usize,
    #[arg(long, default_value_t = 1.0)]
    size_coeff: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.0)]
    category_offset_sd: f64,
    #[arg(long, default_value_t = 0.0)]
    order_coeff: f64,
    /// Only run; skip the three reports.
    #[arg(long)]
    no_report: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        command => {
            let mut config = load_config(cli)?;
            match command {
                Command::Run { live, stop_after } => {
                    apply_live(&mut config, live);
                    run(&config, *stop_after)
                }
                Command::Report { which, store } => {
                    let store = store.clone().unwrap_or_else(|| config.store_path());
                    print_report(&report(&config, *which, &store)?);
                    Ok(ExitCode::SUCCESS)
                }
                Command::Schedule {
                    action: ScheduleAction::Dump { output },
                } => schedule_dump(&config, output.as_deref()),
                Command::Validate => validate(&config),
                Command::Simulate(_) => unreachable!(),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required for this command".into()))?;
    let mut config = RunConfig::load(path)?;
    apply_globals(&mut config, cli);
    Ok(config)
}

fn apply_globals(config: &mut RunConfig, cli: &Cli) {
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.schedule.seed = seed;
        config.stats.bootstrap_seed = seed;
        config.backend.synthetic.seed = seed;
    }
    if let Some(p) = cli.parallelism {
        config.run.parallelism = p;
    }
}

fn apply_live(config: &mut RunConfig, live: &LiveBackend) {
    if live.endpoint.is_some() || live.model.is_some() {
        config.backend.kind = "openai".into();
    }
    if let Some(endpoint) = &live.endpoint {
        config.backend.endpoint = Some(endpoint.clone());
    }
    if let Some(model) = &live.model {
        config.backend.model = Some(model.clone());
    }
    if let Some(var) = &live.api_key_env {
        config.backend.api_key_env = Some(var.clone());
    }
}

fn run(config: &RunConfig, stop_after: Option<usize>) -> Result<ExitCode> {
    let outcome = cmd_run(config, &BackendRegistry::default(), stop_after)?;
    let s = &outcome.summary;
    println!(
        "completed: {}, skipped: {}, failed: {}, remaining: {}",
        s.completed, s.skipped, s.failed, s.remaining
    );
    println!("store: {}", config.store_path().display());
    if let Some(reason) = &s.aborted {
        eprintln!("error: run aborted: {reason}");
        return Ok(ExitCode::from(3));
    }
    if s.failed > 0 {
        eprintln!(
            "error: {} task(s) failed; see {}",
            s.failed,
            config.store_path().with_extension("errors.jsonl").display()
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn report(config: &RunConfig, which: ReportKind, store: &Path) -> Result<ReportOutput> {
    match which {
        ReportKind::Rq1 => cmd_report_rq1(config, store),
        ReportKind::Rq2 => cmd_report_rq2(config, store),
        ReportKind::Rq3 => cmd_report_rq3(config, store),
    }
}

fn print_report(output: &ReportOutput) {
    println!("report: {}", output.dir.display());
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
}

fn schedule_dump(config: &RunConfig, output: Option<&Path>) -> Result<ExitCode> {
    config.validate()?;
    let universe = load_universe(&config.universe)?;
    let tasks = build_schedule(&universe.firms, &config.templates()?, &config.schedule)?;
    match output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            let mut w = BufWriter::new(file);
            dump_schedule(&tasks, &mut w)?;
            w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            eprintln!("{} tasks written to {}", tasks.len(), path.display());
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            dump_schedule(&tasks, &mut w)?;
            w.flush().map_err(|e| Error::io("writing stdout", e))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(config: &RunConfig) -> Result<ExitCode> {
    config.validate()?;
    let universe = load_universe(&config.universe)?;
    let templates = config.templates()?;
    for category in &config.schedule.categories {
        for variant in 1..=config.schedule.variants {
            templates.get(category, variant)?;
        }
    }
    let (firms, months, features) = universe.panel.shape();
    let n = universe.firms.len();
    println!("universe: {n} firms, panel {firms} firms x {months} months x {features} features");
    println!("templates: {} ({})", templates.templates().len(), templates.hash());
    println!(
        "schedule: {} tasks, {} per firm",
        config.schedule.total_tasks(n),
        config.schedule.per_firm_tasks(n)
    );
    println!("ok");
    Ok(ExitCode::SUCCESS)
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(_) => load_config(cli)?,
        None => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            // absolute paths keep the written config usable from any directory
            fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
            let out = out
                .canonicalize()
                .map_err(|e| Error::io(format!("resolving {}", out.display()), e))?;
            let universe = synthetic_universe(&FixtureSpec {
                n_firms: args.firms,
                months: args.months,
                seed: cli.seed.unwrap_or(0),
            })?;
            let paths = write_universe(&universe, &out.join("universe"))?;
            let mut config = RunConfig::new(paths, out);
            let synthetic = &mut config.backend.synthetic;
            synthetic.size_coeff = args.size_coeff;
            synthetic.noise_sd = args.noise_sd;
            synthetic.category_offset_sd = args.category_offset_sd;
            synthetic.order_coeff = args.order_coeff;
            apply_globals(&mut config, cli);
            let path = config.out.join("audit.toml");
            fs::write(&path, config.to_toml()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            println!("config: {}", path.display());
            config
        }
    };
    config.backend.kind = "synthetic".into();
    let code = run(&config, None)?;
    if code != ExitCode::SUCCESS || args.no_report {
        return Ok(code);
    }
    let store = config.store_path();
    for which in [ReportKind::Rq1, ReportKind::Rq2, ReportKind::Rq3] {
        print_report(&report(&config, which, &store)?);
    }
    Ok(ExitCode::SUCCESS)
}
