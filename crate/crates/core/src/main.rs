use clap::{Args, Parser, Subcommand};
use lrsplit::eigen;
use lrsplit::harness::{self, ExperimentConfig, HarnessError, Method, OutputKind, OutputSink, Problem};
use lrsplit::lr_series;
use lrsplit::shanks::{self, Transform};
use lrsplit::Execution;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "lrsplit", version, about = "Left-Right splitting series for rough-surface scattering")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for declared outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override the config term budget.
    #[arg(long, global = true)]
    max_terms: Option<usize>,
    /// Suppress the JSON summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline; writes the outputs listed in the config.
    Run { config: String },
    /// Ensemble statistics over roughness and grazing angle.
    Sweep {
        config: String,
        /// RMS heights in wavelengths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        rms: Vec<f64>,
        /// Grazing angles in degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        angle: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        ensemble: usize,
    },
    /// Spectrum of the iterating operator, optionally with subtraction.
    Eigen {
        config: String,
        /// Remove this many leading eigencomponents before iterating.
        #[arg(long)]
        subtract: Option<usize>,
    },
    /// Shanks acceleration of the partial sums.
    Shanks {
        config: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, group = "mode")]
        vector: bool,
        #[arg(long, group = "mode")]
        pointwise: bool,
        #[arg(long, group = "mode")]
        two_mode: bool,
    },
    /// Dense direct solve only.
    Oracle { config: String },
    /// Error curves of every method against the dense solve.
    Compare { config: String },
}

fn load(spec: &str, g: &Global) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(spec)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(m) = g.max_terms {
        cfg.max_terms = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sink(cfg: &ExperimentConfig, g: &Global, extra: &[OutputKind]) -> OutputSink {
    let mut s = OutputSink::new(&g.out_dir, cfg.outputs.iter().copied());
    for k in extra {
        s.declare(*k);
    }
    s
}

fn write_extra(g: &Global, name: &str, contents: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: g.out_dir.join(name),
        source,
    };
    std::fs::create_dir_all(&g.out_dir).map_err(io)?;
    std::fs::write(g.out_dir.join(name), contents).map_err(io)
}

fn execute(cli: &Cli) -> Result<serde_json::Value, HarnessError> {
    let g = &cli.global;
    let exec = if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, g)?;
            let report = harness::run(&cfg, exec, Some(&sink(&cfg, g, &[])))?;
            Ok(serde_json::to_value(&report).expect("report serializes"))
        }
        Command::Sweep {
            config,
            rms,
            angle,
            ensemble,
        } => {
            let cfg = load(config, g)?;
            let t = Instant::now();
            let cells = harness::sweep(&cfg, rms, angle, *ensemble, exec)?;
            write_extra(g, "sweep.csv", &harness::sweep_csv(&cells))?;
            let trend: Vec<serde_json::Value> = angle
                .iter()
                .map(|a| {
                    let row: Vec<_> = cells.iter().filter(|c| c.angle_deg == *a).collect();
                    let x: Vec<f64> = row.iter().map(|c| c.rms_height).collect();
                    let y: Vec<f64> = row.iter().map(|c| c.mean_dilating).collect();
                    json!({"angle_deg": a, "kendall_tau_dilating_vs_rms": harness::kendall_tau(&x, &y)})
                })
                .collect();
            Ok(json!({"cells": cells, "trend": trend, "seconds": t.elapsed().as_secs_f64()}))
        }
        Command::Eigen { config, subtract } => {
            let cfg = load(config, g)?;
            let out = sink(&cfg, g, &[OutputKind::Spectrum]);
            let p = Problem::build(&cfg, exec)?;
            let t = Instant::now();
            let basis = eigen::eigen_of_b(&p.disc, harness::EIGEN_TOL)?;
            let seconds = t.elapsed().as_secs_f64();
            out.write(OutputKind::Spectrum, &basis.spectrum_csv())?;
            let leading: Vec<_> = basis
                .pairs
                .iter()
                .take(8)
                .map(|q| json!({"re": q.lambda.re, "im": q.lambda.im, "abs": q.lambda.norm()}))
                .collect();
            let mut summary = json!({
                "n": cfg.n,
                "dilating_count": eigen::count_dilating(&basis),
                "condition": basis.condition,
                "leading": leading,
                "seconds": seconds,
            });
            if let Some(k) = subtract {
                let oracle = p.disc.direct_solve(&p.incident.values)?;
                let rows = harness::eigsub_curve(&p.disc, &p.incident.values, &basis, *k, cfg.max_terms, Some(&oracle))?;
                let mut out = out;
                out.declare(OutputKind::Eigsub);
                out.write(OutputKind::Eigsub, &shanks::trace_csv(&rows))?;
                let min = rows.iter().map(|r| r.error_vs_oracle).fold(f64::INFINITY, f64::min);
                summary["eigsub"] = json!({"k": k, "min_error": min});
            }
            Ok(summary)
        }
        Command::Shanks {
            config,
            order,
            pointwise,
            two_mode,
            ..
        } => {
            let cfg = load(config, g)?;
            let out = sink(&cfg, g, &[OutputKind::Shanks]);
            let p = Problem::build(&cfg, exec)?;
            let psi = &p.incident.values;
            let series = lr_series::iterate(&p.disc, psi, cfg.max_terms)?;
            let oracle = p.disc.direct_solve(psi)?;
            let raw = lr_series::error_vs_oracle(&series, &oracle);
            let (mode, rows, extra) = if *two_mode {
                let (rows, second) = harness::two_mode_rows(&p.disc, psi, &series, Some(&oracle), exec)?;
                (Method::TwoMode, rows, json!({"delta": {"re": second.delta.re, "im": second.delta.im}}))
            } else {
                let (m, t) = if *pointwise {
                    (Method::Pointwise, Transform::Pointwise)
                } else {
                    (Method::Vector, Transform::Vector)
                };
                let rows = harness::shanks_rows(&p.disc, psi, &series, t, *order, Some(&oracle), exec)?;
                (m, rows, serde_json::Value::Null)
            };
            out.write(OutputKind::Shanks, &shanks::trace_csv(&rows))?;
            let min = |f: fn(&shanks::TraceRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
            Ok(json!({
                "method": mode,
                "order": order,
                "min_error": min(|r| r.error_vs_oracle),
                "min_residual": min(|r| r.residual),
                "raw_min_error": raw.iter().copied().fold(f64::INFINITY, f64::min),
                "extra": extra,
            }))
        }
        Command::Oracle { config } => {
            let cfg = load(config, g)?;
            let out = sink(&cfg, g, &[OutputKind::Field]);
            let p = Problem::build(&cfg, exec)?;
            let t = Instant::now();
            let x = p.disc.direct_solve(&p.incident.values)?;
            let seconds = t.elapsed().as_secs_f64();
            out.write(
                OutputKind::Field,
                &harness::field_csv(p.surface.x(), &p.incident.values, &x),
            )?;
            Ok(json!({
                "n": cfg.n,
                "residual": p.disc.relative_residual(&x, &p.incident.values)?,
                "seconds": seconds,
            }))
        }
        Command::Compare { config } => {
            let cfg = load(config, g)?;
            let curves = harness::compare_methods(&cfg, exec)?;
            write_extra(g, "comparison.csv", &harness::comparison_csv(&curves))?;
            let summary: Vec<_> = curves
                .iter()
                .map(|c| {
                    json!({
                        "method": c.method,
                        "order": c.rows.first().map_or(0, |r| r.order),
                        "min_error": c.min_error(),
                    })
                })
                .collect();
            Ok(json!({"curves": summary}))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(v) => {
            if !cli.global.quiet {
                // a closed stdout (e.g. piped into head) is not an error
                let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
