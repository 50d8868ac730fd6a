use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relog::config::{ConfigError, ProviderChoice, RunConfig};
use relog::eval::{load_benchmark, write_report, EvalError, Evaluator, Generator, ValidationCache};
use relog::fixtures;
use relog::gateway::stub::StubConfig;
use relog::miner::{self, MinerConfig, MinerError};
use relog::pipeline::{run_loop, FailureKind, Mode, RunLedger, Subject, Termination};
use relog::report;
use relog::toolchain::{Program, Toolchain, ToolchainError};

mod exit {
    pub const SUFFICIENT: u8 = 0;
    pub const BUDGET_EXHAUSTED: u8 = 2;
    pub const COMPILE_FAILED: u8 = 3;
    pub const EXECUTION_ERROR: u8 = 4;
    pub const CONFIG: u8 = 10;
    pub const IO: u8 = 11;
    pub const TOOLCHAIN_UNAVAILABLE: u8 = 12;
    pub const REPO_UNREADABLE: u8 = 13;
    pub const MANIFEST_INVALID: u8 = 14;
}

#[derive(Parser)]
#[command(name = "relog", version, about = "Generate, repair and refine logging with runtime feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct LoopFlags {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderChoice>,
    #[arg(long)]
    max_iterations: Option<u32>,
    #[arg(long)]
    fix_budget: Option<u32>,
    /// Skip compilation repair: a failed build ends the run.
    #[arg(long)]
    ablate_fixer: bool,
    /// Stop after the first evaluation instead of refining.
    #[arg(long)]
    ablate_refine: bool,
    /// Directory of recorded answers; implies the replay provider.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record validated answers into this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the loop on one program.
    Run {
        /// Main file of the program.
        main: PathBuf,
        /// File to instrument, relative to the main file's directory.
        #[arg(long)]
        target: Option<String>,
        /// Further source files of the program.
        #[arg(long = "file")]
        files: Vec<String>,
        #[arg(long, value_enum, default_value = "direct")]
        mode: ModeArg,
        /// JSON settings for the stub provider: key variables, expectations.
        #[arg(long)]
        stub: Option<PathBuf>,
        #[command(flatten)]
        flags: LoopFlags,
    },
    /// Evaluate a benchmark manifest.
    Eval {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "relog")]
        generator: GeneratorArg,
        /// Plan directory for `--generator plan-file`.
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Only instances of this mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        flags: LoopFlags,
    },
    /// Mine logging-statement changes from a git history.
    Mine {
        repo: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        /// Logging API regex, matching through the opening parenthesis. Repeatable.
        #[arg(long = "pattern")]
        patterns: Vec<String>,
        /// File extension to scan. Repeatable.
        #[arg(long = "ext")]
        extensions: Vec<String>,
        #[arg(long, default_value = "relog-out/mine")]
        out: PathBuf,
    },
    /// Render a run ledger as a readable trace.
    Report {
        ledger: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in benchmark corpus.
    Fixtures {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "convergent")]
        set: FixtureSet,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Indirect,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => Mode::Direct,
            ModeArg::Indirect => Mode::Indirect,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Relog,
    None,
    PlanFile,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureSet {
    Convergent,
    Ablation,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }

    fn io(context: &str, e: impl std::fmt::Display) -> Self {
        Self::new(exit::IO, format!("{context}: {e}"))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::new(exit::CONFIG, e)
    }
}

impl From<ToolchainError> for Failure {
    fn from(e: ToolchainError) -> Self {
        match e {
            ToolchainError::Unavailable { .. } => Self::new(exit::TOOLCHAIN_UNAVAILABLE, e),
            ToolchainError::Workspace(_) => Self::new(exit::IO, e),
            _ => Self::new(exit::CONFIG, e),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::ManifestInvalid(_) => Self::new(exit::MANIFEST_INVALID, e),
            EvalError::Io(_) => Self::new(exit::IO, e),
            EvalError::Toolchain(t) => t.into(),
            EvalError::ToolchainUnavailable(_) => Self::new(exit::TOOLCHAIN_UNAVAILABLE, e),
            EvalError::Config(c) => c.into(),
        }
    }
}

impl From<MinerError> for Failure {
    fn from(e: MinerError) -> Self {
        match e {
            MinerError::RepoUnreadable(_) => Self::new(exit::REPO_UNREADABLE, e),
            _ => Self::new(exit::CONFIG, e),
        }
    }
}

fn load_config(flags: &LoopFlags) -> Result<RunConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = flags.provider {
        cfg.provider.kind = p;
    }
    if let Some(dir) = &flags.replay {
        cfg.provider.kind = ProviderChoice::Replay;
        cfg.provider.replay_dir = Some(dir.clone());
    }
    if let Some(dir) = &flags.record {
        cfg.provider.record_dir = Some(dir.clone());
    }
    if let Some(n) = flags.max_iterations {
        cfg.budgets.max_iterations = n;
    }
    if let Some(n) = flags.fix_budget {
        cfg.budgets.fix_budget = n;
    }
    cfg.ablate_fixer |= flags.ablate_fixer;
    cfg.ablate_refine |= flags.ablate_refine;
    if let Some(out) = &flags.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn termination_code(ledger: &RunLedger) -> u8 {
    if ledger.footer.failure.as_ref().is_some_and(|f| f.kind == FailureKind::ToolchainUnavailable) {
        return exit::TOOLCHAIN_UNAVAILABLE;
    }
    match ledger.termination() {
        Termination::Sufficient => exit::SUFFICIENT,
        Termination::BudgetExhausted => exit::BUDGET_EXHAUSTED,
        Termination::CompileFailed => exit::COMPILE_FAILED,
        Termination::ExecutionError => exit::EXECUTION_ERROR,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Failure::io(&parent.display().to_string(), e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(&path.display().to_string(), e))
}

fn cmd_run(
    main: &Path,
    target: Option<String>,
    files: Vec<String>,
    mode: Mode,
    stub: Option<PathBuf>,
    flags: &LoopFlags,
) -> Result<u8, Failure> {
    let cfg = load_config(flags)?;
    let stub: StubConfig = match stub {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Failure::io(&p.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", p.display())))?
        }
        None => StubConfig::default(),
    };
    let profile = cfg.toolchain_profile().map_err(|e| Failure::new(exit::CONFIG, e))?;
    let toolchain = Toolchain::new(profile)?;
    let root = main.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let main_name = main
        .file_name()
        .ok_or_else(|| Failure::new(exit::CONFIG, "main file has no name"))?
        .to_string_lossy()
        .into_owned();
    let target = target.unwrap_or_else(|| main_name.clone());
    let mut units = vec![target.clone()];
    for f in files {
        if !units.contains(&f) {
            units.push(f);
        }
    }
    let support: Vec<String> = if units.contains(&main_name) { Vec::new() } else { vec![main_name.clone()] };
    let program = Program::load(root, &units, &support, &main_name).map_err(|e| Failure::io(&root.display().to_string(), e))?;
    let gateway = cfg.gateway(&stub, &toolchain.profile)?;
    let ledger = run_loop(&Subject { program, target, mode }, &toolchain, &gateway, &cfg.loop_config());
    let run_dir = cfg.output_dir.join(format!("run-{}", ledger.header.plan_id));
    ledger.write(&run_dir.join("ledger.jsonl")).map_err(|e| Failure::io("ledger", e))?;
    write(&run_dir.join("trace.md"), &report::render(&ledger))?;
    if let Some(plan) = &ledger.footer.final_plan {
        write(&run_dir.join("plan.json"), &serde_json::to_string_pretty(plan).expect("plan serializes"))?;
    }
    println!(
        "{} after {} iteration(s); artifacts in {}",
        ledger.termination().as_str(),
        ledger.footer.iterations,
        run_dir.display()
    );
    if let Some(f) = &ledger.footer.failure {
        eprintln!("failure: {:?}: {}", f.kind, f.message);
    }
    Ok(termination_code(&ledger))
}

fn cmd_eval(
    manifest: &Path,
    generator: GeneratorArg,
    plans: Option<PathBuf>,
    jobs: Option<usize>,
    mode: Option<ModeArg>,
    flags: &LoopFlags,
) -> Result<u8, Failure> {
    let mut cfg = load_config(flags)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    let generator = match generator {
        GeneratorArg::Relog => Generator::Relog,
        GeneratorArg::None => Generator::None,
        GeneratorArg::PlanFile => Generator::PlanFile(
            plans.ok_or_else(|| Failure::new(exit::CONFIG, "--generator plan-file needs --plans"))?,
        ),
    };
    let manifest = if manifest.is_dir() { manifest.join("manifest.json") } else { manifest.to_path_buf() };
    if !manifest.exists() {
        return Err(Failure::new(exit::MANIFEST_INVALID, format!("no manifest at {}", manifest.display())));
    }
    let explicit = match &cfg.toolchain {
        Some(_) => Some(Toolchain::new(cfg.toolchain_profile().map_err(|e| Failure::new(exit::CONFIG, e))?)?),
        None => None,
    };
    let mut cache = ValidationCache::open(cfg.output_dir.join("validation-cache.json"));
    let mut bench = load_benchmark(&manifest, explicit.as_ref(), &mut cache)?;
    if let Some(m) = mode {
        let m = Mode::from(m);
        bench.instances.retain(|i| i.mode == m);
    }
    let toolchain = match explicit {
        Some(t) => t,
        None => Toolchain::new(bench.toolchain.clone().unwrap_or_else(relog::profile::ToolchainProfile::rustc))?,
    };
    let ledgers = cfg.output_dir.join("ledgers");
    std::fs::create_dir_all(&ledgers).map_err(|e| Failure::io(&ledgers.display().to_string(), e))?;
    let report = Evaluator::new(&cfg, &toolchain, generator)?.with_ledger_dir(&ledgers).run(&bench)?;
    write_report(&report, &cfg.output_dir).map_err(|e| Failure::io("report", e))?;
    print!("{}", report.table());
    for e in &report.excluded {
        println!("excluded {}: {}", e.instance_id, e.reason);
    }
    Ok(exit::SUFFICIENT)
}

fn cmd_mine(repo: &Path, theta: Option<f64>, patterns: Vec<String>, extensions: Vec<String>, out: &Path) -> Result<u8, Failure> {
    let mut cfg = MinerConfig::default();
    if let Some(t) = theta {
        if !(0.0..=1.0).contains(&t) {
            return Err(Failure::new(exit::CONFIG, "theta must lie in [0, 1]"));
        }
        cfg.theta = t;
    }
    if !patterns.is_empty() {
        cfg.patterns = patterns;
    }
    if !extensions.is_empty() {
        cfg.extensions = extensions.into_iter().map(|e| e.trim_start_matches('.').to_string()).collect();
    }
    let mined = miner::mine(repo, &cfg)?;
    write(&out.join("mine.json"), &serde_json::to_string_pretty(&mined.report).expect("report serializes"))?;
    write(&out.join("lineages.csv"), &miner::lineages_csv(&mined.lineages))?;
    let r = &mined.report;
    println!("{}: {} commits, {} lineages, {:.1}% modified (theta {})", r.project, r.commits, r.lineage_count, r.modified_share * 100.0, r.theta);
    for b in &r.distribution.buckets {
        println!("  {:>4} change(s): {} ({:.1}%)", b.label, b.count, b.percent);
    }
    Ok(exit::SUFFICIENT)
}

fn cmd_report(ledger: &Path, out: Option<PathBuf>) -> Result<u8, Failure> {
    let ledger = RunLedger::read(ledger).map_err(|e| Failure::io(&ledger.display().to_string(), e))?;
    let text = report::render(&ledger);
    match out {
        Some(p) => write(&p, &text)?,
        None => print!("{text}"),
    }
    Ok(exit::SUFFICIENT)
}

fn cmd_fixtures(dir: &Path, set: FixtureSet) -> Result<u8, Failure> {
    let instances = match set {
        FixtureSet::Convergent => fixtures::convergent_set(),
        FixtureSet::Ablation => fixtures::ablation_set(),
    };
    let manifest = fixtures::write_corpus(dir, &instances).map_err(|e| Failure::io(&dir.display().to_string(), e))?;
    println!("{} instances; manifest {}", instances.len(), manifest.display());
    Ok(exit::SUFFICIENT)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("RELOG_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { main, target, files, mode, stub, flags } => {
            cmd_run(&main, target, files, mode.into(), stub, &flags)
        }
        Command::Eval { manifest, generator, plans, jobs, mode, flags } => cmd_eval(&manifest, generator, plans, jobs, mode, &flags),
        Command::Mine { repo, theta, patterns, extensions, out } => cmd_mine(&repo, theta, patterns, extensions, &out),
        Command::Report { ledger, out } => cmd_report(&ledger, out),
        Command::Fixtures { dir, set } => cmd_fixtures(&dir, set),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
