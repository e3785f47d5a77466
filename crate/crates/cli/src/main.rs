//! Command-line front end for the explanation-robustness toolkit.
//!
//! Every subcommand reads the same TOML config; `--seed` overrides the
//! config's master seed so one file can drive a seed sweep. Exit codes:
//! 0 success, 2 config error, 3 data error, 4 runtime failure.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use xaudit::audit::{build_model, load_dataset, AuditMode, NoiseRow, NoiseTable, WorstPairRecord};
use xaudit::data::train_test_split;
use xaudit::model::save_model;
use xaudit::robustness::{
    lipschitz_continuous, lipschitz_discrete, noise_probe, worst_pair, NeighborhoodSpec,
};
use xaudit::{
    emit_report, explain, run_audit, AuditConfig, AuditError, Dataset, ExplanationMap, Method,
    Model,
};

#[derive(Parser)]
#[command(
    name = "xaudit",
    version,
    about = "Measure how fragile model explanations are under small input perturbations"
)]
struct Cli {
    /// Audit configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the config file's master seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output path. Commands print JSON to stdout when this is omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format. CSV output requires --out.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model and save it.
    Train,
    /// Attribute one test anchor with every configured method.
    Explain {
        /// Row index into the held-out test split.
        #[arg(long, default_value_t = 0)]
        anchor: usize,
    },
    /// Run the full robustness audit and write the report.
    Audit,
    /// Tabulate attribution change and prediction drift under Gaussian
    /// noise around one test anchor.
    NoiseProbe {
        #[arg(long, default_value_t = 0)]
        anchor: usize,
    },
    /// Search out and dump the worst explanation pair at one test anchor:
    /// both points, both attributions, both prediction vectors.
    WorstPair {
        #[arg(long, default_value_t = 0)]
        anchor: usize,
        /// Restrict to one method; defaults to every configured method.
        #[arg(long, value_name = "NAME")]
        method: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), AuditError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| AuditError::Config("--config <PATH> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| AuditError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = AuditConfig::from_toml_str(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match &cli.command {
        Command::Train => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("model.json"));
            let p = Pipeline::prepare(cfg)?;
            save_model(&p.model, &out)?;
            println!("saved {} model to {}", p.model.kind_name(), out.display());
            Ok(())
        }
        Command::Explain { anchor } => {
            let p = Pipeline::prepare(cfg)?;
            let x = p.anchor_row(*anchor)?;
            let ecfg = p.cfg.explainer_config();
            let target = p.model.predicted_class(&x)?;
            let mut attributions = Vec::new();
            for &m in &p.cfg.explainers.methods {
                attributions.push(explain(&p.model, &x, target, m, &ecfg)?);
            }
            match cli.format {
                Format::Json => write_json(cli.out.as_deref(), &attributions),
                Format::Csv => {
                    let mut lines = vec!["method,feature_index,value".to_string()];
                    for a in &attributions {
                        for (j, v) in a.values.iter().enumerate() {
                            lines.push(format!("{},{j},{v}", a.method.name()));
                        }
                    }
                    write_lines(cli.out.as_deref(), &lines)
                }
            }
        }
        Command::Audit => {
            let report = run_audit(&cfg)?;
            for f in &report.failures {
                eprintln!("warning: {}: {}", f.method.name(), f.error);
            }
            match (cli.format, cli.out.as_deref()) {
                (Format::Json, None) => write_json(None, &report),
                (Format::Json, Some(out)) => {
                    for p in emit_report(&report, xaudit::audit::ReportFormat::Json, out)? {
                        println!("wrote {}", p.display());
                    }
                    Ok(())
                }
                (Format::Csv, Some(out)) => {
                    for p in emit_report(&report, xaudit::audit::ReportFormat::Csv, out)? {
                        println!("wrote {}", p.display());
                    }
                    Ok(())
                }
                (Format::Csv, None) => {
                    Err(AuditError::Config("--format csv requires --out".into()))
                }
            }
        }
        Command::NoiseProbe { anchor } => {
            let p = Pipeline::prepare(cfg)?;
            let x = p.anchor_row(*anchor)?;
            let ecfg = p.cfg.explainer_config();
            let rc = &p.cfg.robustness;
            let mut tables = Vec::new();
            for &m in &p.cfg.explainers.methods {
                let map = ExplanationMap::new(&p.model, m, &ecfg);
                let result = noise_probe(&map, &x, rc.sigma, rc.perturbations, p.cfg.seed)?;
                tables.push(NoiseTable {
                    method: m,
                    rows: vec![NoiseRow {
                        anchor_index: *anchor,
                        result,
                    }],
                });
            }
            match cli.format {
                Format::Json => write_json(cli.out.as_deref(), &tables),
                Format::Csv => {
                    let mut lines =
                        vec!["method,anchor_index,perturbation,sigma,delta,prediction_drift"
                            .to_string()];
                    for t in &tables {
                        for row in &t.rows {
                            let r = &row.result;
                            for (k, (d, drift)) in
                                r.deltas.iter().zip(&r.prediction_drifts).enumerate()
                            {
                                lines.push(format!(
                                    "{},{},{k},{},{d},{drift}",
                                    t.method.name(),
                                    row.anchor_index,
                                    r.sigma
                                ));
                            }
                        }
                    }
                    write_lines(cli.out.as_deref(), &lines)
                }
            }
        }
        Command::WorstPair { anchor, method } => {
            let p = Pipeline::prepare(cfg)?;
            let x = p.anchor_row(*anchor)?;
            let ecfg = p.cfg.explainer_config();
            let rc = &p.cfg.robustness;
            let spec = NeighborhoodSpec::new(rc.epsilon)?.with_norm(rc.membership_norm);
            let methods = match method.as_deref() {
                Some(name) => vec![parse_method(name)?],
                None => p.cfg.explainers.methods.clone(),
            };
            let rows: Vec<Vec<f64>> =
                (0..p.test.n_rows()).map(|i| p.test.row(i).to_vec()).collect();
            let mut records = Vec::new();
            for m in methods {
                if m.requires_gradients() && !p.model.supports_gradients() {
                    return Err(AuditError::Config(format!(
                        "method {} requires gradients, but the {} model has none",
                        m.name(),
                        p.model.kind_name()
                    )));
                }
                let map = ExplanationMap::new(&p.model, m, &ecfg);
                // Noise mode has no witness to recover, so fall back to the
                // continuous search there.
                let estimate = match rc.mode {
                    AuditMode::Discrete => lipschitz_discrete(&map, &rows, *anchor, &spec)?,
                    AuditMode::Continuous | AuditMode::Noise => {
                        let budget =
                            rc.budget_for(m, p.cfg.seed.wrapping_add(*anchor as u64));
                        lipschitz_continuous(&map, &x, *anchor, &spec, &budget)?
                    }
                };
                let pair = worst_pair(&map, &x, &estimate)?;
                records.push(WorstPairRecord { method: m, pair });
            }
            match cli.format {
                Format::Json => write_json(cli.out.as_deref(), &records),
                Format::Csv => {
                    let mut lines = vec![
                        "method,feature_index,anchor_x,witness_x,anchor_attribution,witness_attribution"
                            .to_string(),
                    ];
                    for rec in &records {
                        let pair = &rec.pair;
                        for j in 0..pair.anchor.len() {
                            lines.push(format!(
                                "{},{j},{},{},{},{}",
                                rec.method.name(),
                                pair.anchor[j],
                                pair.witness[j],
                                pair.anchor_attribution.values[j],
                                pair.witness_attribution.values[j]
                            ));
                        }
                    }
                    write_lines(cli.out.as_deref(), &lines)
                }
            }
        }
    }
}

/// Shared load/split/train front half of every per-anchor subcommand.
struct Pipeline {
    cfg: AuditConfig,
    test: Dataset,
    model: Model,
}

impl Pipeline {
    fn prepare(cfg: AuditConfig) -> Result<Pipeline, AuditError> {
        let dataset = load_dataset(&cfg.dataset, cfg.seed)?;
        let (train, test) = train_test_split(&dataset, cfg.dataset.test_fraction, cfg.seed)?;
        let model = build_model(&cfg.model, &train, cfg.seed)?;
        Ok(Pipeline { cfg, test, model })
    }

    fn anchor_row(&self, anchor: usize) -> Result<Vec<f64>, AuditError> {
        if anchor >= self.test.n_rows() {
            return Err(AuditError::Config(format!(
                "anchor {anchor} out of range: the test split has {} rows",
                self.test.n_rows()
            )));
        }
        Ok(self.test.row(anchor).to_vec())
    }
}

fn parse_method(name: &str) -> Result<Method, AuditError> {
    Method::ALL
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            AuditError::Config(format!(
                "unknown method '{name}'; expected one of: {}",
                known.join(", ")
            ))
        })
}

fn write_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<(), AuditError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, &text)
}

fn write_lines(out: Option<&Path>, lines: &[String]) -> Result<(), AuditError> {
    let mut text = lines.join("\n");
    text.push('\n');
    write_text(out, &text)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), AuditError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
