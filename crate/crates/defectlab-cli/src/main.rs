//! Command-line front end: config ingestion, experiment orchestration,
//! built-in reproductions, structured JSON reports.
//!
//! Exit codes: 0 for any verdict (including dependent), 1 for config or
//! I/O errors, 2 for an inconclusive verdict under `--strict`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use defectlab::axioms::{classify_field, Adversarial};
use defectlab::builtin::{family, BuiltinFamily, FamilyKind};
use defectlab::config::{
    build, builtin_config, field_class_input, parse_config, Experiment, ExperimentConfig,
};
use defectlab::defect::{classify, normalized_generator_power, ClassificationReport, Verdict};
use defectlab::report::{
    axioms_json, classification_json, trace_probe_json, ReportJson,
};
use defectlab::trace::{euler_trace_table_holds, trace_ideal_probe, TraceError};

const PRECISION_ENV: &str = "DEFECTLAB_PRECISION";

#[derive(Parser)]
#[command(
    name = "defectlab",
    about = "Exact classification of degree-p defect extensions over tower fields",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunOpts {
    /// Refinement depth (overrides the config budget).
    #[arg(long)]
    depth: Option<usize>,
    /// Precision cap for equal-characteristic series arithmetic.
    #[arg(long)]
    precision: Option<i64>,
    /// Sample count for probes and axiom searches.
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed for all sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 2 on an inconclusive verdict.
    #[arg(long)]
    strict: bool,
    /// Output format.
    #[arg(long, default_value = "json", value_parser = ["json", "table"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config end to end without running anything.
    Validate {
        /// Path to the experiment config (JSON).
        config: PathBuf,
    },
    /// Classify the configured extension.
    Classify {
        /// Path to the experiment config (JSON).
        config: Option<PathBuf>,
        /// Classify every *.json config in a directory, concurrently.
        #[arg(long)]
        all: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Decide the field-class axioms for the configured tower.
    Axioms {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Trace computations and the trace-ideal probe.
    Trace {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Reproduce a built-in construction.
    Repro {
        /// Which construction: indep | dep | equalchar.
        #[arg(long)]
        example: String,
        /// The prime p.
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[command(flatten)]
        opts: RunOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let exp = build(&cfg).map_err(|e| anyhow!("{}", e))?;
            let doc = serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": "validate",
                "config": serde_json::to_value(&cfg)?,
                "status": "ok",
                "stages": exp.tower.stages().len(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify { config, all, opts } => match (config, all) {
            (Some(path), None) => {
                let cfg = overridden(load_config(&path)?, &opts);
                let (report, verdict) = run_pipeline("classify", cfg, None, false, false)?;
                emit(&report, &opts);
                Ok(exit_for(&verdict, &opts))
            }
            (None, Some(dir)) => run_batch(&dir, &opts),
            _ => bail!("give exactly one of a config path or --all <dir>"),
        },
        Command::Axioms { config, opts } => {
            let cfg = overridden(load_config(&config)?, &opts);
            let (report, verdict) = run_pipeline("axioms", cfg, None, false, true)?;
            emit(&report, &opts);
            Ok(exit_for(&verdict, &opts))
        }
        Command::Trace { config, opts } => {
            let cfg = overridden(load_config(&config)?, &opts);
            let (report, verdict) = run_pipeline("trace", cfg, None, true, false)?;
            emit(&report, &opts);
            Ok(exit_for(&verdict, &opts))
        }
        Command::Repro { example, p, opts } => {
            let kind = FamilyKind::from_name(&example)
                .ok_or_else(|| anyhow!("unknown example '{}'; use indep | dep | equalchar", example))?;
            let mut cfg = builtin_config(kind, p, Default::default());
            cfg = overridden(cfg, &opts);
            let fam = family(kind, p, 1).map_err(|e| anyhow!("{}", e))?;
            let (report, verdict) = run_pipeline("repro", cfg, Some(fam), true, true)?;
            emit(&report, &opts);
            Ok(exit_for(&verdict, &opts))
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).map_err(|e| anyhow!("{}", e))
}

/// Apply flag and environment overrides to the config budget
/// (flag > config > environment > built-in default).
fn overridden(mut cfg: ExperimentConfig, opts: &RunOpts) -> ExperimentConfig {
    if let Some(d) = opts.depth {
        cfg.budget.depth = d;
    }
    if let Some(s) = opts.samples {
        cfg.budget.samples = s;
    }
    if let Some(s) = opts.seed {
        cfg.budget.seed = s;
    }
    let env_precision = std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.parse::<i64>().ok());
    cfg.budget.precision = opts
        .precision
        .or(cfg.budget.precision)
        .or(env_precision);
    cfg
}

fn run_pipeline(
    command: &str,
    cfg: ExperimentConfig,
    fam: Option<BuiltinFamily>,
    with_probe: bool,
    with_axioms: bool,
) -> Result<(ReportJson, Option<Verdict>)> {
    let exp: Experiment = build(&cfg).map_err(|e| anyhow!("{}", e))?;
    let mut report = ReportJson {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config: serde_json::to_value(&cfg)?,
        classification: None,
        trace_probe: None,
        axioms: None,
    };

    let mut verdict = None;
    let mut classification: Option<ClassificationReport> = None;
    if let Some(spec) = &exp.spec {
        let checker = fam.as_ref().map(|f| &f.check);
        let class = classify(
            spec,
            exp.budget.depth,
            checker.map(|c| c as defectlab::defect::StepChecker),
        )
        .map_err(|e| anyhow!("{}", e))?;
        let mut json = classification_json(&class);
        if let Some(f) = &fam {
            json.notes.extend(f.notes.iter().cloned());
        }
        verdict = Some(class.verdict.clone());

        if with_probe {
            match trace_ideal_probe(&class, exp.budget.samples.min(100), exp.budget.seed) {
                Ok(probe) => report.trace_probe = Some(trace_probe_json(&probe)),
                Err(TraceError::UnsupportedKind) => {
                    json.notes.push(
                        "trace-ideal probe refused: not established for this kind/characteristic"
                            .to_string(),
                    );
                }
                Err(e) => return Err(anyhow!("{}", e)),
            }
            match euler_trace_table_holds(spec) {
                Ok(true) => json
                    .notes
                    .push("trace table of z^m/f'(z) verified (0 below m = p-1, then 1)".to_string()),
                Ok(false) => bail!("trace table check failed on this spec"),
                Err(e) => json.notes.push(format!("trace table skipped: {}", e)),
            }
        }
        report.classification = Some(json);
        classification = Some(class);
    } else if with_probe {
        bail!("the trace command needs an extension in the config");
    }

    if with_axioms {
        let mut adversarial = Vec::new();
        if let Some(class) = &classification {
            if let Some(w) = normalized_generator_power(class).map_err(|e| anyhow!("{}", e))? {
                adversarial.push(Adversarial {
                    label: "p-th power of the normalized defect generator".to_string(),
                    element: w,
                    proven_ceiling: matches!(class.verdict, Verdict::DependentDefect),
                });
            }
        }
        let input = field_class_input(&exp, adversarial).map_err(|e| anyhow!("{}", e))?;
        let v = classify_field(&input).map_err(|e| anyhow!("{}", e))?;
        report.axioms = Some(axioms_json(&v));
    }

    Ok((report, verdict))
}

fn exit_for(verdict: &Option<Verdict>, opts: &RunOpts) -> ExitCode {
    if opts.strict && matches!(verdict, Some(Verdict::Inconclusive(_))) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn emit(report: &ReportJson, opts: &RunOpts) {
    if opts.format == "table" {
        print!("{}", render_table(report));
    } else {
        println!("{}", report.to_pretty_string());
    }
}

fn render_table(report: &ReportJson) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "defectlab {} report (v{})", report.command, report.version);
    if let Some(c) = &report.classification {
        let _ = writeln!(out, "verdict: {}", c.verdict);
        if let Some(d) = &c.defect {
            let _ = writeln!(out, "defect: {}", d);
        }
        if let Some(cut) = &c.distance {
            let _ = writeln!(out, "dist E: {} ^{}", cut.boundary.join(","), cut.side);
        }
        if let Some(cut) = &c.generator_distance {
            let _ = writeln!(
                out,
                "generator distance: {} ^{}",
                cut.boundary.join(","),
                cut.side
            );
        }
        let _ = writeln!(
            out,
            "certification: {} (depth {})",
            c.certification.mode, c.certification.depth
        );
        if !c.steps.is_empty() {
            let _ = writeln!(out, "{:>3}  {:>12}  approximant", "i", "gap");
            for s in &c.steps {
                let _ = writeln!(out, "{:>3}  {:>12}  {}", s.i, s.gap, s.approximant);
            }
        }
        for n in &c.notes {
            let _ = writeln!(out, "note: {}", n);
        }
    }
    if let Some(p) = &report.trace_probe {
        let _ = writeln!(
            out,
            "trace probe: predicted cut {} ^{}, all above: {}, samples: {}",
            p.predicted_cut.boundary.join(","),
            p.predicted_cut.side,
            p.all_above,
            p.samples.len()
        );
    }
    if let Some(a) = &report.axioms {
        let _ = writeln!(
            out,
            "axioms: DRvg={} DRvp={} DRst={} DRvr={:?}",
            a.drvg, a.drvp, a.drst, a.drvr
        );
        let _ = writeln!(
            out,
            "classes: semitame={:?} deeply_ramified={:?} gdr={:?}",
            a.semitame, a.deeply_ramified, a.gdr
        );
    }
    out
}

type BatchResult = (String, Result<(ReportJson, Option<Verdict>)>);

fn run_batch(dir: &Path, opts: &RunOpts) -> Result<ExitCode> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no *.json configs in {}", dir.display());
    }

    let results: Vec<BatchResult> = std::thread::scope(|scope| {
            let handles: Vec<_> = paths
                .iter()
                .map(|path| {
                    let opts = opts.clone();
                    scope.spawn(move || {
                        let name = path.file_name().unwrap().to_string_lossy().to_string();
                        let res = load_config(path)
                            .map(|cfg| overridden(cfg, &opts))
                            .and_then(|cfg| run_pipeline("classify", cfg, None, false, false));
                        (name, res)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

    let mut any_inconclusive = false;
    let mut out = Vec::new();
    for (name, res) in results {
        match res {
            Ok((report, verdict)) => {
                if matches!(verdict, Some(Verdict::Inconclusive(_))) {
                    any_inconclusive = true;
                }
                out.push(serde_json::json!({"file": name, "report": report}));
            }
            Err(e) => {
                out.push(serde_json::json!({"file": name, "error": format!("{:#}", e)}));
            }
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    if opts.strict && any_inconclusive {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
