//! Command-line interface: structural importance tables, single-road debug
//! simulation, the full intensity sweep, and scenario validation.
//!
//! Exit codes: 0 success, 1 scenario/validation error, 2 runtime error.

use clap::{Parser, Subcommand, ValueEnum};
use roadrank::importance::{self, Measure};
use roadrank::pipeline::{self, ReliabilitySource};
use roadrank::scenario::Scenario;
use roadrank::sim::{Road, StepControl};
use roadrank::structure::EvaluationMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "roadrank",
    about = "Rank road-network segments by their importance to network functionality"
)]
struct Cli {
    /// Scenario file (TOML); defaults to the bundled city network.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    PaperNaive,
}

impl From<ModeArg> for EvaluationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => EvaluationMode::Exact,
            ModeArg::PaperNaive => EvaluationMode::PaperNaive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Birnbaum,
    BarlowProschan,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Birnbaum => Measure::Birnbaum,
            MeasureArg::BarlowProschan => Measure::BarlowProschan,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    QOfMeanDelay,
    MeanOfQ,
}

impl From<SourceArg> for ReliabilitySource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::QOfMeanDelay => ReliabilitySource::QOfMeanDelay,
            SourceArg::MeanOfQ => ReliabilitySource::MeanOfQ,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Structural importance of the network segments (no simulation).
    Structural {
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = MeasureArg::Birnbaum)]
        measure: MeasureArg,
    },
    /// Debug run of a single segment's road at one intensity.
    Simulate {
        /// Segment id to simulate; defaults to the lowest id.
        #[arg(long)]
        segment: Option<u32>,
        #[arg(long, default_value_t = 0.2)]
        intensity: f64,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write a per-step trajectory CSV into the output directory.
        #[arg(long)]
        trajectory: bool,
    },
    /// Full pipeline: intensity sweep, reliabilities, importance tables.
    Sweep {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
        /// Intensity grid as start:stop:step, e.g. 0.05:0.6:0.025.
        #[arg(long)]
        intensities: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = SourceArg::QOfMeanDelay)]
        reliability_source: SourceArg,
    },
    /// Check a scenario file and report problems.
    Validate,
}

fn load_scenario(path: &Option<PathBuf>) -> Result<Scenario, ExitCode> {
    let result = match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::bundled()),
    };
    result.map_err(|e| {
        eprintln!("scenario error: {e}");
        ExitCode::from(1)
    })
}

fn parse_grid(text: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:step, got {text}"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.parse::<f64>().map_err(|e| format!("bad number {s}: {e}")))
        .collect::<Result<_, _>>()?;
    Ok((nums[0], nums[1], nums[2]))
}

fn run_structural(scenario: &Scenario, mode: EvaluationMode, measure: Measure) -> ExitCode {
    let phi = match scenario.structure_function() {
        Ok(phi) => phi,
        Err(e) => {
            eprintln!("structure error: {e}");
            return ExitCode::from(1);
        }
    };
    let half = vec![0.5; phi.component_count()];
    let report = match importance::compute_report(&phi, &half, mode, measure) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("importance error: {e}");
            return ExitCode::from(2);
        }
    };
    let segments = scenario.segments_by_id();
    println!("structural importance ({mode} mode), ranked:");
    println!("{:<4} {:<16} {:>10} {:>16}", "id", "name", "birnbaum", "barlow-proschan");
    for &idx in &report.ranking {
        let record = &report.records[idx];
        let seg = segments[record.component];
        println!(
            "{:<4} {:<16} {:>10.4} {:>16.4}",
            seg.id, seg.name, record.birnbaum, record.barlow_proschan
        );
    }
    ExitCode::SUCCESS
}

fn run_simulate(
    scenario: &Scenario,
    segment: Option<u32>,
    intensity: f64,
    steps: u64,
    seed: u64,
    trajectory: bool,
    out: &PathBuf,
) -> ExitCode {
    let segments = scenario.segments_by_id();
    let seg = match segment {
        Some(id) => match segments.iter().find(|s| s.id == id) {
            Some(s) => *s,
            None => {
                eprintln!("segment {id} not declared in the scenario");
                return ExitCode::from(1);
            }
        },
        None => segments[0],
    };
    if !(0.0..=1.0).contains(&intensity) {
        eprintln!("intensity {intensity} outside [0,1]");
        return ExitCode::from(1);
    }
    let mut road = Road::new(seg.length_cells(), scenario.sim, seed);
    let ctrl = StepControl::free(intensity);
    let mut dump = String::from("step,vehicle_id,position,velocity\n");
    for t in 0..steps {
        road.step(&ctrl);
        if trajectory {
            for v in road.vehicles() {
                dump.push_str(&format!("{},{},{},{}\n", t, v.id, v.position, v.velocity));
            }
        }
    }
    let exits = road.drain_exits();
    let completed = exits.len();
    println!("segment {} ({}), intensity {intensity}, {steps} steps", seg.id, seg.name);
    println!("vehicles completed: {completed}, still on road: {}", road.vehicle_count());
    if completed > 0 {
        let mean: f64 =
            exits.iter().map(|e| e.travel_time() as f64).sum::<f64>() / completed as f64;
        let min = exits.iter().map(|e| e.travel_time()).min().expect("nonempty");
        println!("mean travel {mean:.2} s, minimum travel {min} s");
    }
    if trajectory {
        if let Err(e) = std::fs::create_dir_all(out)
            .and_then(|_| std::fs::write(out.join("trajectory.csv"), dump))
        {
            eprintln!("cannot write trajectory: {e}");
            return ExitCode::from(2);
        }
        println!("trajectory written to {}", out.join("trajectory.csv").display());
    }
    ExitCode::SUCCESS
}

fn run_sweep_cmd(
    mut scenario: Scenario,
    seed: Option<u64>,
    replications: Option<u32>,
    intensities: Option<String>,
    mode: EvaluationMode,
    source: ReliabilitySource,
    out: &PathBuf,
) -> ExitCode {
    if let Some(seed) = seed {
        scenario.sweep.seed = seed;
    }
    if let Some(replications) = replications {
        scenario.sweep.replications = replications;
    }
    if let Some(grid) = intensities {
        match parse_grid(&grid) {
            Ok((start, stop, step)) => {
                scenario.sweep.intensity_start = start;
                scenario.sweep.intensity_stop = stop;
                scenario.sweep.intensity_step = step;
            }
            Err(e) => {
                eprintln!("bad --intensities: {e}");
                return ExitCode::from(1);
            }
        }
    }
    if let Err(e) = scenario.validate() {
        eprintln!("scenario error: {e}");
        return ExitCode::from(1);
    }
    let result = match pipeline::run_sweep(&scenario, mode, source) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("sweep failed: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = pipeline::emit(&result, out) {
        eprintln!("cannot write results: {e}");
        return ExitCode::from(2);
    }
    println!("sweep complete: {} intensity points", result.points.len());
    println!("results written to {}", out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate => match load_scenario(&cli.scenario) {
            Ok(scenario) => {
                println!(
                    "scenario '{}' is valid: {} segments, {} paths, {} routes",
                    scenario.name,
                    scenario.segments.len(),
                    scenario.structure.min_paths.len(),
                    scenario.routes.len()
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Structural { mode, measure } => match load_scenario(&cli.scenario) {
            Ok(scenario) => run_structural(&scenario, mode.into(), measure.into()),
            Err(code) => code,
        },
        Command::Simulate { segment, intensity, steps, seed, trajectory } => {
            match load_scenario(&cli.scenario) {
                Ok(scenario) => {
                    run_simulate(&scenario, segment, intensity, steps, seed, trajectory, &cli.out)
                }
                Err(code) => code,
            }
        }
        Command::Sweep { seed, replications, intensities, mode, reliability_source } => {
            match load_scenario(&cli.scenario) {
                Ok(scenario) => run_sweep_cmd(
                    scenario,
                    seed,
                    replications,
                    intensities,
                    mode.into(),
                    reliability_source.into(),
                    &cli.out,
                ),
                Err(code) => code,
            }
        }
    }
}
