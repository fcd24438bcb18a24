mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eraser_core::analysis::{cell_z_scores, power_sweep, JointTable, PairsNeeded, SweepRow};
use eraser_core::harness::{
    match_coincidences_with_delay, run_experiment, run_screen_experiment, DetectorPreset, HarnessError,
};
use eraser_core::io::{self, IoError};
use eraser_core::models::{declared_distribution, ModelError, ModelKind};
use eraser_core::sampling::stream_rng;
use eraser_core::screen::{
    conditioned_pattern_on, sample_screen_position, visibility, Condition, ScreenGrid, SlitGeometry,
};
use serde::Serialize;

use config::{parse_condition, RunConfig};
use report::{analyze, cells, count_cells, print_report, AnalysisReport, RunMeta, Selection, Settings};

const EXIT_CONFIG: u8 = 2;
const EXIT_NO_HISTORY: u8 = 3;
const EXIT_LOGS: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "eraser", version, about = "Delayed-choice eraser simulator with feedback")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an experiment and write clicks.csv, outcomes.csv and summary.json.
    Run(RunArgs),
    /// Re-analyze the logs of a previous run and write report.json.
    Analyze(AnalyzeArgs),
    /// Write screen patterns (and optional sampled histograms) as CSV.
    Fringe(FringeArgs),
    /// Pairs needed to reject a rival model across detector settings.
    Sweep,
    /// List detector presets, or print the configuration reference.
    Presets {
        /// Print the reference page for every configuration key.
        #[arg(long)]
        reference: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment (E1..E6), overriding the configuration.
    #[arg(long)]
    experiment: Option<String>,
    /// Model, overriding the configuration.
    #[arg(long)]
    model: Option<String>,
    /// Number of pairs, overriding the configuration.
    #[arg(long)]
    pairs: Option<u64>,
    /// Detector preset, overriding the configuration.
    #[arg(long)]
    detector: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Sequence,
    ChiSquare,
    Correlation,
    All,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `eraser run`.
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    test: TestArg,
    /// Significance level (default from configuration, else 1e-6).
    #[arg(long)]
    alpha: Option<f64>,
    /// Model whose prediction the chi-square test uses.
    #[arg(long)]
    against: Option<String>,
    /// Row condition: none or no-d1.
    #[arg(long)]
    condition: Option<String>,
}

#[derive(Args)]
struct FringeArgs {
    /// Conditions to write (on-d1..on-d4, none); all when omitted.
    #[arg(long)]
    condition: Vec<String>,
    /// Also sample this many screen positions per condition into a histogram.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    slit_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    slit_separation: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    wavelength: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    screen_distance: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    envelope_shift: Option<f64>,
}

struct CliError {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, CliError>;

fn fail(code: u8, message: impl std::fmt::Display) -> CliError {
    CliError {
        code,
        message: message.to_string(),
    }
}

fn harness_error(e: HarnessError) -> CliError {
    match e {
        HarnessError::Model(ModelError::NoConsistentHistory) => fail(EXIT_NO_HISTORY, e),
        _ => fail(EXIT_CONFIG, e),
    }
}

fn write_error(e: IoError) -> CliError {
    fail(EXIT_OTHER, e)
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| fail(EXIT_OTHER, format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct Summary {
    run: RunMeta,
    clicks: u64,
    coincidences: u64,
    singles: u64,
    accidentals: u64,
    empirical: Vec<report::Cell>,
    raw: Vec<report::Cell>,
    oracle: Vec<report::Cell>,
    z_scores: Vec<report::Cell>,
    analysis: AnalysisReport,
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    if let Some(e) = &args.experiment {
        cfg.experiment.name = e.clone();
    }
    if let Some(m) = &args.model {
        cfg.model.kind = m.clone();
        cfg.model.retro_policy = None;
    }
    if let Some(p) = args.pairs {
        cfg.experiment.pairs = p;
    }
    if let Some(d) = &args.detector {
        cfg.detector.preset = Some(d.clone());
    }
    let r = cfg.resolve().map_err(|e| fail(EXIT_CONFIG, e))?;
    let det = r.detector;
    let dir = r.out_dir.clone();

    let (mut clicks, raw_table, screen_hits) = if r.config.screen {
        let run = run_screen_experiment(&r.config, r.model, &r.geometry, &det).map_err(harness_error)?;
        (run.clicks, None, Some(run.hits))
    } else {
        let out = run_experiment(&r.config, r.model, &det).map_err(harness_error)?;
        let table = JointTable::from_raw(&out.raw);
        ensure_dir(&dir)?;
        io::write_outcomes_file(&dir.join("outcomes.csv"), &out.raw).map_err(write_error)?;
        (out.clicks, Some(table), None)
    };
    ensure_dir(&dir)?;
    if let Some(hits) = &screen_hits {
        io::write_screen_hits_file(&dir.join("outcomes.csv"), hits, r.config.lower_basis).map_err(write_error)?;
    }
    io::quantize_clicks(&mut clicks);
    io::write_clicks_file(&dir.join("clicks.csv"), &clicks).map_err(write_error)?;

    let meta = RunMeta {
        experiment: r.experiment,
        model: r.model.to_string(),
        pairs: r.config.pair_count,
        seed: r.config.seed,
        upper_basis: (!r.config.screen).then_some(r.config.upper_basis),
        lower_basis: r.config.lower_basis,
        feedback: r.config.feedback.is_some(),
        detector: det,
        geometry: r.config.screen.then_some(r.geometry),
    };
    let matched = match_coincidences_with_delay(&clicks, det.coincidence_window, det.lower_delay);
    let table = eraser_core::analysis::build_table(&matched.coincidences, r.config.lower_basis);
    let (oracle, z) = if r.config.screen {
        (Vec::new(), Vec::new())
    } else {
        let predicted = declared_distribution(r.model, &r.config).map_err(|e| harness_error(e.into()))?;
        (cells(predicted.cells.clone()), cells(cell_z_scores(&table, &predicted)))
    };
    let settings = Settings {
        selection: Selection::All,
        alpha: r.alpha,
        against: r.against,
        condition: r.condition,
        true_only: r.true_only,
    };
    let analysis = analyze(&matched.coincidences, &meta, &settings);
    let summary = Summary {
        run: meta,
        clicks: clicks.len() as u64,
        coincidences: matched.coincidences.len() as u64,
        singles: matched.singles() as u64,
        accidentals: matched.accidentals() as u64,
        empirical: count_cells(&table.counts),
        raw: raw_table.map(|t| count_cells(&t.counts)).unwrap_or_default(),
        oracle,
        z_scores: z,
        analysis,
    };
    io::write_json(&dir.join("summary.json"), &summary).map_err(write_error)?;
    if !cli.quiet {
        println!(
            "{} / {} / {} pairs: {} clicks, {} coincidences ({} accidental), {} singles -> {}",
            r.experiment,
            r.model,
            r.config.pair_count,
            summary.clicks,
            summary.coincidences,
            summary.accidentals,
            summary.singles,
            dir.display()
        );
        for c in &summary.empirical {
            let frac = if table.total > 0 { c.value / table.total as f64 } else { 0.0 };
            println!("  ({}, {}) {:>10} {:.5}", c.upper, c.lower, c.value, frac);
        }
        print_report(&summary.analysis);
    }
    Ok(())
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let summary_path = args.dir.join("summary.json");
    let value: serde_json::Value =
        io::read_json(&summary_path).map_err(|e| fail(EXIT_LOGS, e))?;
    let meta: RunMeta = value
        .get("run")
        .cloned()
        .ok_or_else(|| fail(EXIT_LOGS, format!("{}: no run metadata", summary_path.display())))
        .and_then(|v| {
            serde_json::from_value(v).map_err(|e| fail(EXIT_LOGS, format!("{}: {e}", summary_path.display())))
        })?;
    let clicks_path = args.dir.join("clicks.csv");
    let clicks =
        io::read_clicks_file(&clicks_path).map_err(|e| match e {
            IoError::File { .. } => fail(EXIT_LOGS, e),
            other => fail(EXIT_LOGS, format!("{}: {other}", clicks_path.display())),
        })?;

    let alpha = args.alpha.unwrap_or(cfg.analysis.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(fail(EXIT_CONFIG, "--alpha must lie in (0, 1)"));
    }
    let against = config::parse_model("--against", args.against.as_deref().unwrap_or(&cfg.analysis.against), None)
        .map_err(|e| fail(EXIT_CONFIG, e))?;
    let condition = parse_condition("--condition", args.condition.as_deref().unwrap_or(&cfg.analysis.condition))
        .map_err(|e| fail(EXIT_CONFIG, e))?;
    let settings = Settings {
        selection: match args.test {
            TestArg::Sequence => Selection::Sequence,
            TestArg::ChiSquare => Selection::ChiSquare,
            TestArg::Correlation => Selection::Correlation,
            TestArg::All => Selection::All,
        },
        alpha,
        against,
        condition,
        true_only: cfg.analysis.true_coincidences_only,
    };
    let matched = match_coincidences_with_delay(&clicks, meta.detector.coincidence_window, meta.detector.lower_delay);
    let report = analyze(&matched.coincidences, &meta, &settings);
    let out_dir = cli.out.clone().unwrap_or_else(|| args.dir.clone());
    ensure_dir(&out_dir)?;
    io::write_json(&out_dir.join("report.json"), &report).map_err(write_error)?;
    if !cli.quiet {
        println!("{} / {}: {} coincidences", meta.experiment, meta.model, report.coincidences);
        print_report(&report);
    }
    Ok(())
}

fn cmd_fringe(cli: &Cli, args: &FringeArgs) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let g = SlitGeometry {
        slit_width: args.slit_width.unwrap_or(cfg.geometry.slit_width),
        slit_separation: args.slit_separation.unwrap_or(cfg.geometry.slit_separation),
        wavelength: args.wavelength.unwrap_or(cfg.geometry.wavelength),
        screen_distance: args.screen_distance.unwrap_or(cfg.geometry.screen_distance),
        envelope_shift: args.envelope_shift.unwrap_or(cfg.geometry.envelope_shift),
    };
    g.validate().map_err(|e| fail(EXIT_CONFIG, e))?;
    let conditions: Vec<Condition> = if args.condition.is_empty() {
        vec![Condition::OnD1, Condition::OnD2, Condition::OnD3, Condition::OnD4, Condition::NoCondition]
    } else {
        args.condition
            .iter()
            .map(|c| c.parse::<Condition>().map_err(|e| fail(EXIT_CONFIG, e)))
            .collect::<CliResult<_>>()?
    };
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;
    let grid = ScreenGrid::default_for(&g);
    for (i, &c) in conditions.iter().enumerate() {
        io::write_pattern_file(&dir.join(format!("pattern_{}.csv", c.label())), &g, c, &grid).map_err(write_error)?;
        let pattern = conditioned_pattern_on(&g, c, &grid).map_err(|e| fail(EXIT_CONFIG, e))?;
        if let Some(n) = args.samples {
            let mut rng = stream_rng(cfg.experiment.seed, i as u64);
            let hits: Vec<f64> = (0..n)
                .map(|_| sample_screen_position(&pattern, &mut rng))
                .collect::<Result<_, _>>()
                .map_err(|e| fail(EXIT_CONFIG, e))?;
            io::write_histogram_file(&dir.join(format!("hist_{}.csv", c.label())), &grid, &hits)
                .map_err(write_error)?;
        }
        if !cli.quiet {
            let v = visibility(&pattern, g.envelope_zero())
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|e| e.to_string());
            println!("{:<6} visibility {v}", c.label());
        }
    }
    if !cli.quiet && !g.is_far_field() {
        println!("warning: geometry is outside the far-field regime");
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let r = cfg.resolve().map_err(|e| fail(EXIT_CONFIG, e))?;
    let (pair, grid, options) = cfg.sweep_plan().map_err(|e| fail(EXIT_CONFIG, e))?;
    let rows = power_sweep(pair, &r.config, &grid, r.alpha, &options).map_err(|e| match e {
        eraser_core::analysis::AnalysisError::Harness(h) => harness_error(h),
        eraser_core::analysis::AnalysisError::Model(ModelError::NoConsistentHistory) => fail(EXIT_NO_HISTORY, e),
        other => fail(EXIT_CONFIG, other),
    })?;
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;

    #[derive(Serialize)]
    struct SweepFile<'a> {
        experiment: String,
        truth: ModelKind,
        rival: ModelKind,
        alpha: f64,
        trials: usize,
        max_pairs: u64,
        rows: &'a [SweepRow],
    }
    io::write_json(
        &dir.join("sweep.json"),
        &SweepFile {
            experiment: r.experiment.to_string(),
            truth: pair.truth,
            rival: pair.rival,
            alpha: r.alpha,
            trials: options.trials,
            max_pairs: options.max_pairs,
            rows: &rows,
        },
    )
    .map_err(write_error)?;
    let mut csv = String::from("efficiency,dark_rate,trials,censored,median_pairs,ci_low,ci_high,mean_pairs\n");
    for row in &rows {
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let (median, lo, hi, mean) = match row.pairs_needed {
            PairsNeeded::Reached {
                median,
                ci_low,
                ci_high,
                mean,
            } => (Some(median), Some(ci_low), ci_high, mean),
            PairsNeeded::Unreachable => (None, None, None, None),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.efficiency,
            row.dark_rate,
            row.trials,
            row.censored,
            f(median),
            f(lo),
            f(hi),
            f(mean)
        ));
    }
    fs::write(dir.join("sweep.csv"), &csv).map_err(|e| fail(EXIT_OTHER, e))?;
    if !cli.quiet {
        println!("{}: {} data, rejecting {} at alpha = {}", r.experiment, pair.truth, pair.rival, r.alpha);
        print!("{csv}");
    }
    Ok(())
}

fn cmd_presets(reference: bool) {
    if reference {
        print!("{}", config::reference_page());
        return;
    }
    println!("{:<7} {:>10} {:>12} {:>12} {:>12}", "preset", "efficiency", "dark (1/s)", "jitter (s)", "window (s)");
    for p in DetectorPreset::ALL {
        let m = p.model();
        println!(
            "{:<7} {:>10} {:>12} {:>12.1e} {:>12.1e}",
            p.label(),
            m.efficiency,
            m.dark_rate,
            m.jitter_sigma,
            m.coincidence_window
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(&cli, args),
        Command::Analyze(args) => cmd_analyze(&cli, args),
        Command::Fringe(args) => cmd_fringe(&cli, args),
        Command::Sweep => cmd_sweep(&cli),
        Command::Presets { reference } => {
            cmd_presets(*reference);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
