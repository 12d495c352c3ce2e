//! The `jamlink` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 schema or validation error,
//! 3 infeasible design or layout, 4 I/O, 5 missing stiffness model,
//! 6 kinematic or formula domain error.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analyze::{
    analyze_diameters, analyze_set, load_trial_dir, parse_diameter_csv, trial_file_name,
    write_band_csv, write_trace_csv, AnalysisOptions, DiameterMetrics, SetMetrics,
};
use crate::config::Config;
use crate::design::{report_design, DesignFile};
use crate::error::{Error, Result};
use crate::kinematics::check_within_limit;
use crate::optimize::{search_designs, summary_csv, DesignTargets, SearchBounds, SearchOptions};
use crate::pattern::{export_svg, generate_cut_pattern};
use crate::sheath::{max_bend_angle_with, JammingState};
use crate::stiffness::{
    calibrate, synthesize_trace, CalibrationTarget, LinkVariant, StiffnessModelParams, VariantKind,
};

#[derive(Debug, Parser)]
#[command(
    name = "jamlink",
    version,
    about = "Design, simulate and analyze layer-jamming malleable links"
)]
pub struct Cli {
    /// TOML settings file; falls back to $JAMLINK_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the optimizer's refinement order.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress informational output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a design file and print its derived quantities.
    Report(ReportArgs),
    /// Export the flap cut pattern as SVG.
    Pattern(PatternArgs),
    /// Synthesize a force-displacement trial.
    Simulate(SimulateArgs),
    /// Fit the stiffness model to measured peak forces.
    Calibrate(CalibrateArgs),
    /// Search a parameter box for designs meeting targets.
    Optimize(OptimizeArgs),
    /// Compute metrics from trial logs or a diameter series.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub design: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PatternArgs {
    pub design: PathBuf,
    /// Output path; defaults to `<name>.pattern.svg`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// mm per SVG user unit.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub design: PathBuf,
    /// granular | layer | layer_with_spine
    #[arg(long, default_value = "layer")]
    pub variant: VariantKind,
    /// Bend angle, degrees.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub angle: f64,
    /// Gauge pressure, kPa; the design's jamming state when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub pressure: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub trial: u32,
    /// Trace CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use built-in model parameters when the design carries none.
    #[arg(long)]
    pub default_model: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    pub design: PathBuf,
    /// CSV with header `variant,angle_deg,max_force_N`.
    pub targets: PathBuf,
    /// Updated design path; the input file is left untouched when omitted
    /// and the result goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// JSON design targets.
    pub targets: PathBuf,
    /// JSON parameter box: `{"base": {...}, "parameters": {...}}`.
    pub bounds: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    /// Ranked designs JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV summary table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Keep only the best N designs in the report.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory of `<variant>_<angle>deg_trial<k>.csv` files, or a
    /// diameter CSV `angle_deg,diameter_mm`.
    pub input: PathBuf,
    /// Metrics JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for plot-ready band CSVs.
    #[arg(long)]
    pub series_dir: Option<PathBuf>,
    /// Variant label of a diameter series; the file stem when omitted.
    #[arg(long)]
    pub variant: Option<String>,
    /// Gauge pressure recorded into trial metadata, kPa.
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    pub pressure: f64,
    /// Skip contact-onset alignment.
    #[arg(long)]
    pub no_align: bool,
}

/// Parses `std::env::args`, runs, prints any error and returns the exit
/// code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = Config::resolve(cli.config.as_deref())?;
    let ctx = Context {
        config,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Report(a) => cmd_report(&ctx, a),
        Command::Pattern(a) => cmd_pattern(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&ctx, a),
        Command::Optimize(a) => cmd_optimize(&ctx, a),
        Command::Analyze(a) => cmd_analyze(&ctx, a),
    }
}

struct Context {
    config: Config,
    seed: u64,
    quiet: bool,
}

impl Context {
    fn say(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
            let _ = std::io::stdout().flush();
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn cmd_report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    let file = DesignFile::load(&a.design)?;
    let report = report_design(
        &file.name,
        &file.link(),
        ctx.config.angle_kernel,
        ctx.config.report_min_gap,
    )?;
    ctx.say(&report.to_text());
    if let Some(path) = &a.json {
        write_file(path, &to_json(&report))?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(Error::Infeasible(report.problems.join("; ")))
    }
}

fn cmd_pattern(ctx: &Context, a: &PatternArgs) -> Result<()> {
    let file = DesignFile::load(&a.design)?;
    let cut = generate_cut_pattern(&file.pattern, &ctx.config.pattern)?;
    let svg = export_svg(&cut, a.scale);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.pattern.svg", file.name)));
    write_file(&out, &svg)?;
    ctx.say(&format!(
        "wrote {}: {} loops, {} holes, {} slots, {} flaps\n",
        out.display(),
        cut.loop_count(),
        cut.holes.len(),
        cut.slots.len(),
        cut.flaps.len()
    ));
    Ok(())
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let file = DesignFile::load(&a.design)?;
    let params = match (&file.stiffness_model, a.default_model) {
        (Some(p), _) => p.clone(),
        (None, true) => StiffnessModelParams::default(),
        (None, false) => {
            return Err(Error::MissingModel(format!(
                "{} has no stiffness_model; run calibrate or pass --default-model",
                a.design.display()
            )))
        }
    };
    let max = max_bend_angle_with(&file.pattern, ctx.config.angle_kernel)?;
    check_within_limit(a.angle, max)?;
    let state = match a.pressure {
        Some(p) => JammingState {
            gauge_pressure_kpa: p,
            ..file.jamming
        },
        None => file.jamming,
    };
    let variant = LinkVariant::from_parts(a.variant, &file.pattern, file.spine.as_ref())?;
    let mut trace = synthesize_trace(&variant, a.angle, &state, &params)?;
    trace.metadata.trial = a.trial;
    emit(a.out.as_deref(), &write_trace_csv(&trace))?;
    if a.out.is_some() {
        ctx.say(&format!(
            "{} at {} deg, {} kPa: peak {:.3} N (suggested name {})\n",
            variant.kind,
            a.angle,
            state.gauge_pressure_kpa,
            trace.max_loading_force().unwrap_or(0.0),
            trial_file_name(&trace.metadata)
        ));
    }
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct TargetRow {
    variant: String,
    angle_deg: f64,
    #[serde(rename = "max_force_N")]
    max_force_n: f64,
}

fn read_targets(path: &Path, file: &DesignFile) -> Result<Vec<CalibrationTarget>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut targets = Vec::new();
    for row in reader.deserialize::<TargetRow>() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let kind: VariantKind = row.variant.parse()?;
        targets.push(CalibrationTarget {
            variant: LinkVariant::from_parts(kind, &file.pattern, file.spine.as_ref())?,
            bend_angle: row.angle_deg,
            measured_max_force: row.max_force_n,
        });
    }
    Ok(targets)
}

fn cmd_calibrate(ctx: &Context, a: &CalibrateArgs) -> Result<()> {
    let mut file = DesignFile::load(&a.design)?;
    let targets = read_targets(&a.targets, &file)?;
    let base = file.stiffness_model.clone().unwrap_or_default();
    let result = calibrate(&targets, &file.jamming, &base)?;

    let mut text = String::from("variant            angle   measured  predicted  rel.err\n");
    for r in &result.residuals {
        text += &format!(
            "{:<18} {:>5}  {:>9.3}  {:>9.3}  {:>+7.2}%{}\n",
            r.variant.label(),
            r.bend_angle,
            r.measured,
            r.predicted,
            100.0 * r.relative_error,
            if r.buckled { "  (buckled)" } else { "" }
        );
    }
    text += &format!(
        "max relative error: {:.2}%\n",
        100.0 * result.max_relative_error
    );
    let warn = result.max_relative_error > ctx.config.calibration_warn_threshold;
    file.stiffness_model = Some(result.params);
    match &a.out {
        Some(path) => {
            write_file(path, &file.to_json())?;
            ctx.say(&text);
        }
        None => emit(None, &file.to_json())?,
    }
    if warn {
        eprintln!(
            "warning: fit residual {:.2}% exceeds {:.0}%",
            100.0 * result.max_relative_error,
            100.0 * ctx.config.calibration_warn_threshold
        );
    }
    Ok(())
}

fn cmd_optimize(ctx: &Context, a: &OptimizeArgs) -> Result<()> {
    let targets: DesignTargets = read_json(&a.targets)?;
    let bounds: SearchBounds = read_json(&a.bounds)?;
    let options = SearchOptions {
        budget: a.budget,
        seed: ctx.seed,
        ..SearchOptions::default()
    };
    let mut result = search_designs(&targets, &bounds, &options)?;
    if let Some(top) = a.top {
        result.designs.truncate(top);
    }
    emit(a.out.as_deref(), &to_json(&result))?;
    if let Some(path) = &a.csv {
        write_file(path, &summary_csv(&result))?;
    }
    if let Some(inf) = &result.infeasibility {
        return Err(Error::Infeasible(format!(
            "no feasible design in bounds; binding constraint: {}",
            inf.binding_constraint
        )));
    }
    if a.out.is_some() {
        ctx.say(&format!(
            "{} feasible designs from {} evaluations (grid {})\n",
            result.designs.len(),
            result.evaluations,
            result.grid_size
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sets: Vec<SetMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diameter: Option<DiameterMetrics>,
}

fn cmd_analyze(ctx: &Context, a: &AnalyzeArgs) -> Result<()> {
    let report = if a.input.is_dir() {
        let options = AnalysisOptions {
            onset_threshold: ctx.config.onset_threshold_n,
            zero_threshold: ctx.config.zero_force_threshold_n,
            band_step: ctx.config.band_step_mm,
            align_onset: !a.no_align,
        };
        let sets = load_trial_dir(&a.input, a.pressure)?
            .iter()
            .map(|s| analyze_set(s, &options))
            .collect::<Result<Vec<_>>>()?;
        if let Some(dir) = &a.series_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for m in &sets {
                for (phase, points) in [
                    ("loading", &m.bands.loading),
                    ("unloading", &m.bands.unloading),
                ] {
                    let path = dir.join(format!("{}_{}deg_{phase}.csv", m.variant, m.bend_angle));
                    write_file(&path, &write_band_csv(points))?;
                }
            }
        }
        AnalysisReport {
            sets,
            diameter: None,
        }
    } else {
        let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
        let variant = a.variant.clone().unwrap_or_else(|| {
            a.input.file_stem().map_or_else(
                || "series".to_string(),
                |s| s.to_string_lossy().into_owned(),
            )
        });
        let series = parse_diameter_csv(&text, &a.input, &variant)?;
        AnalysisReport {
            sets: Vec::new(),
            diameter: Some(analyze_diameters(&series)?),
        }
    };
    emit(a.out.as_deref(), &to_json(&report))?;
    if a.out.is_some() {
        if let Some(d) = &report.diameter {
            ctx.say(&format!(
                "{}: minimum ratio {:.3} at {} deg\n",
                d.variant, d.min_ratio, d.min_angle
            ));
        }
        for m in &report.sets {
            ctx.say(&format!(
                "{} at {} deg: max force {:.3} +- {:.3} N over {} trials, residual {:.2} mm\n",
                m.variant,
                m.bend_angle,
                m.max_force.mean,
                m.max_force.std,
                m.trials,
                m.hysteresis.mean
            ));
        }
    }
    Ok(())
}
