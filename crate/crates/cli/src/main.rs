//! `cfzero` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use cfzero::circuit::{
    convergence_check, eigenfrequency_sweep, find_circuit_features, inductance_range_for_span, S11Evaluator,
};
use cfzero::config::{window_around, ModelKind, RunConfig};
use cfzero::metrics::{comparison_table, EvalTime, MetricsReport, Strategy};
use cfzero::model::ej_ec_ratios;
use cfzero::protocol::{plan_bloch, plan_circuit, run_bloch, run_circuit, DriveSpec, PlannedDrive};
use cfzero::response::{
    bloch_features, heatmap, heatmap_with, position_name, DominantMode, FeatureKind, FreqUnit, FreqWindow, HeatmapGrid,
    SpectralFeature,
};
use cfzero::{CircuitParams, Error};

#[derive(Parser, Debug)]
#[command(
    name = "cfzero",
    version,
    about = "Reflection zeros and coherent-feedback drives for bus-coupled qubits"
)]
struct Cli {
    /// JSON run configuration; reference parameters when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for batched runs; logical cores by default.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Evaluation time in ns; end of drive by default.
    #[arg(long, global = true, value_name = "NS")]
    t_eval: Option<f64>,

    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Bloch,
    Circuit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableKind {
    S3,
    S4,
}

#[derive(Args, Debug, Clone, Copy)]
struct ModelOpt {
    /// Model to use; the config's choice by default.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Poles and zeros of the reflection coefficient.
    Zeros {
        #[command(flatten)]
        model: ModelOpt,
        /// Also write |r| sampled around the features.
        #[arg(long)]
        heatmap: bool,
    },
    /// |r| over a complex-frequency window.
    Heatmap {
        #[command(flatten)]
        model: ModelOpt,
    },
    /// Drive one qubit and record the transient.
    Simulate {
        #[command(flatten)]
        model: ModelOpt,
        /// Target qubit (1-3).
        #[arg(long)]
        target: Option<usize>,
        /// Drive frequency strategy.
        #[arg(long, value_parser = parse_strategy)]
        freq_mode: Option<Strategy>,
        /// Run circuit drives that exceed the small-signal current limit.
        #[arg(long)]
        allow_nonlinear: bool,
    },
    /// Eigenfrequencies while tuning qubit 1.
    Sweep,
    /// Strategy comparison tables on the circuit model.
    Table {
        #[arg(value_enum)]
        which: TableKind,
        #[arg(long)]
        allow_nonlinear: bool,
    },
    /// Rerun a circuit drive at half the step and compare.
    Convergence {
        /// Step in ps.
        #[arg(long, default_value_t = 1.0)]
        dt_ps: f64,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, Failure>;

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    format: Format,
}

impl Ctx {
    fn comment(&self, what: &str) -> String {
        format!("cfzero {what} config_hash={}", self.cfg.hash)
    }

    fn write(&self, name: &str, body: &str) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, body)?;
        Ok(path)
    }

    fn write_json(&self, name: &str, mut value: Value) -> CliResult<PathBuf> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("config_hash".into(), Value::String(self.cfg.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| Failure::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn model(&self, opt: ModelOpt) -> ModelKind {
        match opt.model {
            Some(ModelArg::Bloch) => ModelKind::Bloch,
            Some(ModelArg::Circuit) => ModelKind::Circuit,
            None => self.cfg.model,
        }
    }

    /// Evaluation rule in the model's time unit.
    fn eval(&self, model: ModelKind) -> EvalTime {
        match (self.cfg.eval, model) {
            (EvalTime::At(t), ModelKind::Circuit) => EvalTime::At(t * 1e-9),
            (e, _) => e,
        }
    }
}

fn features(ctx: &Ctx, model: ModelKind) -> CliResult<(Vec<SpectralFeature>, Vec<SpectralFeature>)> {
    Ok(match model {
        ModelKind::Bloch => bloch_features(&ctx.cfg.bloch)?,
        ModelKind::Circuit => (
            find_circuit_features(&ctx.cfg.circuit, FeatureKind::Pole)?,
            find_circuit_features(&ctx.cfg.circuit, FeatureKind::Zero)?,
        ),
    })
}

fn is_qubit(f: &SpectralFeature) -> bool {
    matches!(f.dominant, Some(DominantMode::Qubit(_)))
}

fn heatmap_grid(ctx: &Ctx, model: ModelKind) -> CliResult<HeatmapGrid> {
    let h = ctx.cfg.heatmap;
    let (poles, zeros) = features(ctx, model)?;
    let auto = || -> CliResult<FreqWindow> {
        let mut near: Vec<SpectralFeature> = zeros.iter().chain(&poles).filter(|f| is_qubit(f)).cloned().collect();
        if near.is_empty() {
            near = zeros.iter().chain(&poles).cloned().collect();
        }
        window_around(&near).ok_or_else(|| Failure::Numerical("no features to frame a heatmap window".into()))
    };
    match model {
        ModelKind::Bloch => {
            let w = match h.window_rad_ns {
                Some(w) => w,
                None => auto()?,
            };
            Ok(heatmap(&ctx.cfg.bloch, w, h.n_re, h.n_im)?)
        }
        ModelKind::Circuit => {
            let w = match h.window_rad_ns {
                Some(w) => FreqWindow {
                    re_min: w.re_min * 1e9,
                    re_max: w.re_max * 1e9,
                    im_min: w.im_min * 1e9,
                    im_max: w.im_max * 1e9,
                },
                None => auto()?,
            };
            let ev = S11Evaluator::new(&ctx.cfg.circuit)?;
            Ok(heatmap_with(w, h.n_re, h.n_im, FreqUnit::RadPerS, |x| ev.eval(x))?)
        }
    }
}

fn write_heatmap(ctx: &Ctx, model: ModelKind) -> CliResult<PathBuf> {
    let grid = heatmap_grid(ctx, model)?;
    match ctx.format {
        Format::Csv => ctx.write("heatmap.csv", &grid.to_csv(Some(&ctx.comment("heatmap |r|")))),
        Format::Json => ctx.write_json("heatmap.json", json!({ "heatmap": grid })),
    }
}

fn cmd_zeros(ctx: &Ctx, model: ModelKind, with_heatmap: bool) -> CliResult<Vec<PathBuf>> {
    let (poles, zeros) = features(ctx, model)?;
    let rec = |v: &[SpectralFeature]| v.iter().map(|f| f.record()).collect::<Vec<_>>();
    let mut written = vec![ctx.write_json(
        "features.json",
        json!({ "model": ctx_model_name(model), "poles": rec(&poles), "zeros": rec(&zeros) }),
    )?];
    if with_heatmap {
        written.push(write_heatmap(ctx, model)?);
    }
    Ok(written)
}

fn ctx_model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Bloch => "bloch",
        ModelKind::Circuit => "circuit",
    }
}

fn metrics_csv(m: &MetricsReport, comment: &str) -> String {
    let mut s = format!("# {comment}\n");
    s.push_str("target,eta_1,eta_2,eta_3,S_1,S_2,S_3,C,C_infinite,reflected_fraction,dissipated_fraction,t_eval\n");
    s.push_str(&format!("{}", m.target));
    for v in m.eta.iter().chain(&m.selectivity) {
        s.push_str(&format!(",{v:.6}"));
    }
    s.push_str(&format!(
        ",{:.6},{},{:.6e},{:.6e},{:.12e}\n",
        m.crosstalk.value, m.crosstalk.infinite, m.reflected_fraction, m.dissipated_fraction, m.t_eval
    ));
    s
}

fn metrics_text(m: &MetricsReport, plan: &PlannedDrive, comment: &str) -> String {
    let mut s = format!("# {comment}\n");
    s.push_str(&format!("strategy            {}\n", plan.strategy.name()));
    s.push_str(&format!("target              Q{}\n", m.target));
    s.push_str(&format!("{:<20}{:>10}{:>10}{:>10}\n", "", "Q1", "Q2", "Q3"));
    s.push_str(&format!(
        "{:<20}{:>10.2}{:>10.2}{:>10.2}\n",
        "efficiency (%)", m.eta[0], m.eta[1], m.eta[2]
    ));
    s.push_str(&format!(
        "{:<20}{:>10.3}{:>10.3}{:>10.3}\n",
        "selectivity", m.selectivity[0], m.selectivity[1], m.selectivity[2]
    ));
    let c = if m.crosstalk.infinite {
        "inf".to_string()
    } else {
        format!("{:.3}", m.crosstalk.value)
    };
    s.push_str(&format!("crosstalk           {c}\n"));
    s.push_str(&format!("reflected fraction  {:.4e}\n", m.reflected_fraction));
    s.push_str(&format!("dissipated fraction {:.4e}\n", m.dissipated_fraction));
    s
}

fn summary(ctx: &Ctx, plan: &PlannedDrive, m: &MetricsReport, extra: Value) -> Value {
    json!({
        "config_hash": ctx.cfg.hash,
        "strategy": plan.strategy,
        "target": plan.target,
        "zero": plan.zero,
        "drive_freq": plan.drive_freq,
        "pulse": plan.waveform,
        "metrics": m,
        "run": extra,
    })
}

fn drive_spec(ctx: &Ctx, target: Option<usize>, mode: Option<Strategy>) -> DriveSpec {
    let mut d = ctx.cfg.drive;
    if let Some(t) = target {
        d.target = t;
    }
    if let Some(s) = mode {
        d.strategy = s;
    }
    d
}

fn guard_refusal(warnings: usize, peak: [f64; 3]) -> Failure {
    Failure::Config(format!(
        "drive leaves the small-signal regime ({warnings} guard warnings, peak |I|/I_c = {:.3}, {:.3}, {:.3}); rerun with --allow-nonlinear to accept",
        peak[0], peak[1], peak[2]
    ))
}

fn cmd_simulate(ctx: &Ctx, model: ModelKind, spec: DriveSpec, allow_nonlinear: bool) -> CliResult<Vec<PathBuf>> {
    let eval = ctx.eval(model);
    let mut written = Vec::new();
    let (plan, metrics, trajectory_csv, curves, ledger) = match model {
        ModelKind::Bloch => {
            let plan = plan_bloch(&ctx.cfg.bloch, &spec)?;
            let run = run_bloch(&ctx.cfg.bloch, &plan, &ctx.cfg.bloch_options, eval)?;
            let csv = run
                .trajectory
                .to_csv(Some(&ctx.comment("bloch trajectory, time in ns")));
            (
                plan,
                run.metrics,
                csv,
                run.curves,
                serde_json::to_value(run.trajectory.ledger),
            )
        }
        ModelKind::Circuit => {
            let plan = plan_circuit(&ctx.cfg.circuit, &spec)?;
            let run = run_circuit(&ctx.cfg.circuit, &plan, &ctx.cfg.transient, eval)?;
            if run.trace.violates_guard() && !allow_nonlinear {
                return Err(guard_refusal(run.trace.warnings.len(), run.trace.peak_current_ratio));
            }
            let csv = run.trace.to_csv(Some(&ctx.comment("circuit trace, SI units")));
            let ledger = json!({
                "ledger": run.trace.ledger,
                "peak_current_ratio": run.trace.peak_current_ratio,
                "guard_warnings": run.trace.warnings,
            });
            (plan, run.metrics, csv, run.curves, Ok(ledger))
        }
    };
    let ledger = ledger.map_err(|e| Failure::Numerical(e.to_string()))?;
    let hash_pair = ("config_hash", ctx.cfg.hash.as_str());
    written.push(ctx.write("pulse.csv", &plan.waveform.sample_csv(2001, Some(hash_pair)))?);
    match ctx.format {
        Format::Csv => {
            written.push(ctx.write("trajectory.csv", &trajectory_csv)?);
            written.push(ctx.write(
                "efficiency.csv",
                &curves.to_csv(Some(&ctx.comment("efficiencies in percent"))),
            )?);
        }
        Format::Json => written.push(ctx.write_json("efficiency.json", json!({ "curves": curves }))?),
    }
    written.push(ctx.write_json(
        "ledger.json",
        json!({ "model": ctx_model_name(model), "ledger": ledger }),
    )?);
    let comment = ctx.comment(&format!("{} drive on Q{}", plan.strategy.name(), plan.target));
    written.push(ctx.write("metrics.csv", &metrics_csv(&metrics, &comment))?);
    written.push(ctx.write("metrics.txt", &metrics_text(&metrics, &plan, &comment))?);
    written.push(ctx.write_json(
        "metrics.json",
        summary(ctx, &plan, &metrics, json!({ "model": ctx_model_name(model) })),
    )?);
    Ok(written)
}

fn cmd_sweep(ctx: &Ctx) -> CliResult<Vec<PathBuf>> {
    let p = &ctx.cfg.circuit;
    let sw = eigenfrequency_sweep(
        p,
        inductance_range_for_span(p, ctx.cfg.sweep.span),
        ctx.cfg.sweep.n_points,
        ctx.cfg.boundary,
    )?;
    let minima: Vec<Value> = sw
        .gap_minima()
        .iter()
        .map(|(i, c, g)| json!({ "index": i, "lower_curve": c + 1, "gap": g }))
        .collect();
    let mut written = vec![match ctx.format {
        Format::Csv => ctx.write("sweep.csv", &sw.to_csv(Some(&ctx.comment("eigenfrequencies in rad/s"))))?,
        Format::Json => ctx.write_json("sweep.json", json!({ "sweep": sw }))?,
    }];
    written.push(ctx.write_json(
        "sweep_summary.json",
        json!({ "gap_minima": minima, "ej_ec": ej_ec_ratios(p)?, "boundary": ctx.cfg.boundary }),
    )?);
    Ok(written)
}

fn cmd_table(ctx: &Ctx, which: TableKind, allow_nonlinear: bool) -> CliResult<Vec<PathBuf>> {
    let (name, params, cells): (&str, CircuitParams, Vec<(Strategy, usize)>) = match which {
        TableKind::S3 => (
            "s3",
            ctx.cfg.circuit.clone().with_r_shunt(None)?,
            Strategy::ALL
                .iter()
                .flat_map(|&s| (1..=3).map(move |q| (s, q)))
                .collect(),
        ),
        TableKind::S4 => {
            let r = ctx.cfg.circuit.r_shunt().or(CircuitParams::reference_lossy().r_shunt());
            (
                "s4",
                ctx.cfg.circuit.clone().with_r_shunt(r)?,
                vec![(Strategy::Zero, 1), (Strategy::ConjugatePole, 1)],
            )
        }
    };
    let eval = ctx.eval(ModelKind::Circuit);
    let zeros = find_circuit_features(&params, FeatureKind::Zero)?;
    let mut qubit_zeros: Vec<&SpectralFeature> = zeros.iter().filter(|f| is_qubit(f)).collect();
    qubit_zeros.sort_by(|a, b| a.location.re.total_cmp(&b.location.re));
    let label = |q: usize| {
        qubit_zeros
            .iter()
            .position(|f| f.dominant == Some(DominantMode::Qubit(q as u8)))
            .map_or_else(|| format!("Q{q}"), |i| position_name(i, qubit_zeros.len()))
    };

    let runs: Vec<CliResult<_>> = cells
        .par_iter()
        .map(|&(s, q)| -> CliResult<_> {
            let plan = plan_circuit(&params, &drive_spec(ctx, Some(q), Some(s)))?;
            let run = run_circuit(&params, &plan, &ctx.cfg.transient, eval)?;
            if run.trace.violates_guard() && !allow_nonlinear {
                return Err(guard_refusal(run.trace.warnings.len(), run.trace.peak_current_ratio));
            }
            Ok((plan, run.metrics, run.trace.ledger, run.trace.peak_current_ratio))
        })
        .collect();
    let runs = runs.into_iter().collect::<CliResult<Vec<_>>>()?;

    let mut written = Vec::new();
    let entries: Vec<_> = runs
        .iter()
        .map(|(plan, m, _, _)| (plan.strategy, plan.target, label(plan.target), m.eta, m.eval_rule))
        .collect();
    let table = comparison_table(&entries)?;
    for (plan, m, ledger, peak) in &runs {
        let cell = format!("{name}/{}_q{}", plan.strategy.name(), plan.target);
        let extra = json!({ "ledger": ledger, "peak_current_ratio": peak });
        written.push(ctx.write_json(&format!("{cell}/metrics.json"), summary(ctx, plan, m, extra))?);
        let hash_pair = ("config_hash", ctx.cfg.hash.as_str());
        written.push(ctx.write(
            &format!("{cell}/pulse.csv"),
            &plan.waveform.sample_csv(2001, Some(hash_pair)),
        )?);
    }
    let comment = ctx.comment(&format!("table {name}"));
    match ctx.format {
        Format::Csv => written.push(ctx.write(&format!("table_{name}.csv"), &table.to_csv(Some(&comment)))?),
        Format::Json => written.push(ctx.write_json(&format!("table_{name}.json"), json!({ "table": table }))?),
    }
    written.push(ctx.write(&format!("table_{name}.txt"), &table.to_text(Some(&comment)))?);
    let cells: Vec<Value> = runs
        .iter()
        .map(|(plan, m, _, _)| json!({ "strategy": plan.strategy, "target": plan.target, "zero": plan.zero, "drive_freq": plan.drive_freq, "pulse": plan.waveform, "metrics": m }))
        .collect();
    written.push(ctx.write_json(
        &format!("table_{name}_summary.json"),
        json!({ "table": name, "cells": cells }),
    )?);
    Ok(written)
}

fn cmd_convergence(ctx: &Ctx, dt_ps: f64) -> CliResult<Vec<PathBuf>> {
    let p = &ctx.cfg.circuit;
    let plan = plan_circuit(p, &ctx.cfg.drive)?;
    let (t0, t1) = plan.waveform.window();
    let t_end = match ctx.eval(ModelKind::Circuit) {
        EvalTime::At(t) => t.max(t1),
        EvalTime::EndOfDrive => t1,
    };
    let report = convergence_check(p, &plan.waveform, (t0, t_end), dt_ps * 1e-12)?;
    let max = if report.max_relative_change.is_finite() {
        json!(report.max_relative_change)
    } else {
        json!("inf")
    };
    Ok(vec![ctx.write_json(
        "convergence.json",
        json!({
            "strategy": plan.strategy,
            "target": plan.target,
            "dt": report.dt,
            "max_relative_change": max,
            "flagged": report.flagged,
            "unstable": report.unstable,
            "report": if report.unstable { Value::Null } else { json!(report) },
        }),
    )?])
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::defaults(),
    };
    if let Some(t) = cli.t_eval {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Config(format!("--t-eval must be positive, got {t}")));
        }
        cfg.eval = EvalTime::At(t);
    }
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        cfg,
        out: cli.out,
        format: cli.format,
    };
    match cli.command {
        Command::Zeros { model, heatmap } => cmd_zeros(&ctx, ctx.model(model), heatmap),
        Command::Heatmap { model } => Ok(vec![write_heatmap(&ctx, ctx.model(model))?]),
        Command::Simulate {
            model,
            target,
            freq_mode,
            allow_nonlinear,
        } => cmd_simulate(
            &ctx,
            ctx.model(model),
            drive_spec(&ctx, target, freq_mode),
            allow_nonlinear,
        ),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Table { which, allow_nonlinear } => cmd_table(&ctx, which, allow_nonlinear),
        Command::Convergence { dt_ps } => cmd_convergence(&ctx, dt_ps),
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", display(&f));
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
