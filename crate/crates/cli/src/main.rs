use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridhe::network::{parse_case, read_contingency_csv, write_contingency_csv, write_matpower};
use gridhe::phe::write_partition;
use gridhe::screening::{
    benchmark, n_minus_1, parse_methods, run_screen, sample_contingencies, verify_state, write_report, write_state_csv, Inputs,
    RunConfig, SampleRequest, ScreeningError, Status,
};
use gridhe::synthetic::{build_recipe, Recipe};

#[derive(Parser, Debug)]
#[command(name = "gridhe", version, about = "Contingency screening by holomorphic embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Screen a contingency list with one or more methods.
    Screen {
        #[command(flatten)]
        run: RunArgs,
        /// Write every solved state as `states/<id>_<method>.csv`.
        #[arg(long)]
        states: bool,
    },
    /// Draw seeded multi-branch outage samples.
    Sample(SampleArgs),
    /// Build a multi-area test system and its partition file.
    BuildSynthetic {
        /// syn161, syn419, polish9 or polish3.
        #[arg(long)]
        recipe: Recipe,
        /// Directory holding the constituent case files.
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Time each method over a contingency list.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        /// Contingencies solved once per method before timing.
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Traceback a candidate post-outage state to the pre-contingency solution.
    Verify {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        contingencies: PathBuf,
        /// Contingency id within the list.
        #[arg(long)]
        id: String,
        /// State file with columns bus_id,vm,va_deg.
        #[arg(long)]
        state: PathBuf,
        /// Series order.
        #[arg(long)]
        order: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration; flags and GRIDHE_* variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    contingencies: Option<PathBuf>,
    /// Comma-separated list, e.g. `HE,PHE,P2HE,NR(1.0,0.5)`.
    #[arg(long)]
    methods: Option<String>,
    /// Series order.
    #[arg(long)]
    order: Option<usize>,
    /// Total thread budget.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip traceback classification.
    #[arg(long)]
    no_verify: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    case: PathBuf,
    /// Number of samples.
    #[arg(long, short = 'k', default_value_t = 10)]
    count: usize,
    /// Branches out per sample.
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep nominal loading instead of scaling loads in [1.0, 1.2].
    #[arg(long)]
    nominal_load: bool,
    /// List every single-branch outage instead of sampling.
    #[arg(long)]
    n1: bool,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(args: &RunArgs, verify_default: bool) -> Result<RunConfig, ScreeningError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig { verify: verify_default, ..RunConfig::default() },
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(x) = &args.case {
        cfg.case = Some(x.clone());
    }
    if let Some(x) = &args.partition {
        cfg.partition = Some(x.clone());
    }
    if let Some(x) = &args.contingencies {
        cfg.contingencies = Some(x.clone());
    }
    if let Some(x) = &args.methods {
        cfg.methods = parse_methods(x)?;
    }
    if let Some(x) = args.order {
        cfg.solver.order = x;
    }
    if let Some(x) = args.workers {
        cfg.workers = x;
    }
    if let Some(x) = args.seed {
        cfg.seed = x;
    }
    if let Some(x) = &args.out {
        cfg.out = x.clone();
    }
    if args.no_verify {
        cfg.verify = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> ScreeningError {
    ScreeningError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), ScreeningError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn screen(run: &RunArgs, states: bool) -> Result<ExitCode, ScreeningError> {
    let cfg = resolve(run, true)?;
    let (plan, results, report) = run_screen(&cfg)?;
    write_report(&report, &cfg.out)?;
    if states {
        let model = &plan.nominal().model;
        for c in &results {
            for r in &c.runs {
                if let Some(s) = &r.state {
                    let tag: String = r.method.to_string().chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' { ch } else { '-' }).collect();
                    let name = format!("{}_{}.csv", c.id, tag.trim_end_matches('-'));
                    write(&cfg.out.join("states").join(name), &write_state_csv(model, s))?;
                }
            }
        }
    }
    print!("{}", report.summary());
    let failed = report.records.iter().filter(|r| r.status == Status::Failed).count();
    if failed > 0 {
        eprintln!("{failed} runs failed; see {}", cfg.out.join("report.jsonl").display());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn sample(a: &SampleArgs) -> Result<ExitCode, ScreeningError> {
    let case = parse_case(&a.case).map_err(|e| ScreeningError::Input(e.to_string()))?;
    let list = if a.n1 {
        n_minus_1(&case)
    } else {
        let req = SampleRequest::new(a.count, a.order, a.seed);
        sample_contingencies(&case, &if a.nominal_load { req.nominal() } else { req })?
    };
    let text = write_contingency_csv(&list);
    match &a.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn build_synthetic(recipe: Recipe, data: &Path, out: &Path) -> Result<ExitCode, ScreeningError> {
    let b = build_recipe(recipe, data).map_err(|e| ScreeningError::Input(e.to_string()))?;
    let case_path = out.join(format!("{recipe}.m"));
    let part_path = out.join(format!("{recipe}.partition.toml"));
    write(&case_path, &write_matpower(&b.case))?;
    write(&part_path, &write_partition(&b.partition))?;
    println!("{}: {} buses, {} branches, {} subsystems", recipe, b.case.n_buses(), b.case.branches.len(), b.partition.subsystems.len());
    println!("wrote {} and {}", case_path.display(), part_path.display());
    Ok(ExitCode::SUCCESS)
}

fn bench(run: &RunArgs, warmup: usize) -> Result<ExitCode, ScreeningError> {
    let cfg = resolve(run, false)?;
    let inputs = Inputs::load(&cfg)?;
    let plan = inputs.plan(&cfg)?;
    let report = benchmark(&plan, cfg.workers, warmup);
    let text = report.to_text();
    write(&cfg.out.join("benchmark.txt"), &text)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn verify(case: &Path, list: &Path, id: &str, state: &Path, order: Option<usize>) -> Result<ExitCode, ScreeningError> {
    let input = |e: String| ScreeningError::Input(e);
    let grid = parse_case(case).map_err(|e| input(e.to_string()))?;
    let entries = read_contingency_csv(list).map_err(|e| input(e.to_string()))?;
    let entry = entries.iter().find(|e| e.id == id).ok_or_else(|| ScreeningError::Usage(format!("no contingency `{id}` in {}", list.display())))?;
    let text = std::fs::read_to_string(state).map_err(|e| input(format!("{}: {e}", state.display())))?;
    let mut cfg = gridhe::he::HeConfig::default();
    if let Some(n) = order {
        cfg.order = n;
    }
    let r = verify_state(&grid, entry, &text, &cfg)?;
    println!("verdict: {:?}", r.verdict);
    println!("reached alpha: {}", r.reached_alpha);
    match r.endpoint_diff {
        Some(d) => println!("endpoint difference: {d:.3e} pu"),
        None => println!("endpoint difference: n/a"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Screen { run, states } => screen(run, *states),
        Command::Sample(a) => sample(a),
        Command::BuildSynthetic { recipe, data, out } => build_synthetic(*recipe, data, out),
        Command::Benchmark { run, warmup } => bench(run, *warmup),
        Command::Verify { case, contingencies, id, state, order } => verify(case, contingencies, id, state, *order),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
