mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use tower_entropy::cylinder::{self, Name};
use tower_entropy::entropy::{self, DEFAULT_ENUMERATION_CAP};
use tower_entropy::model::{Model, ModelSpec};
use tower_entropy::smb;
use tower_entropy::zoo::{self, ChainBuiltin, ConditionThresholds, RoofBuiltin, CHAIN_BUILTINS, DEFAULT_TRUNCATION};
use tower_entropy::Error;

use report::{Envelope, Units, SCHEMA_VERSION};

/// Entropy of towers over countable-state Markov chains.
#[derive(Debug, Parser)]
#[command(name = "tower-entropy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect a base chain
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Builtin models and their condition checks
    #[command(subcommand)]
    Zoo(ZooCmd),
    /// Exact entropy quantities of the tower
    #[command(subcommand)]
    Entropy(EntropyCmd),
    /// Seeded Monte Carlo runs
    #[command(subcommand)]
    Smb(SmbCmd),
    /// Search for histories showing the tower process is not Markov of a given order
    Nonmarkov {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        order: u64,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(long, default_value_t = 0.01)]
        min_tv: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ChainCmd {
    /// Check row sums, signs and irreducibility; exits 1 when a check fails
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Stationary law, entropy rate and, with a roof, tower masses
    Info {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated state ids whose cylinder measure is reported; repeatable
        #[arg(long = "name")]
        names: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ZooCmd {
    /// List builtin chains and roofs
    List {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Marginal entropy, entropy rate and mean roof across truncations
    Report {
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        roof_builtin: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
        truncations: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
enum EntropyCmd {
    /// Base entropy rate, gamma, tower entropy and one-step conditional entropy
    Exact {
        #[command(flatten)]
        model: ModelArgs,
        /// Prefix sizes for partial sums of the tower partition entropy
        #[arg(long, value_delimiter = ',')]
        prefixes: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// n-step conditional entropies for 1..=n
    Nstep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Sum over enumerated names instead of the cell recursion
        #[arg(long)]
        enumerate: bool,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64, value_parser = clap::value_parser!(u64).range(1..))]
        cap: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
enum SmbCmd {
    /// -(1/n) ln mu(C^n) on the tower
    Tower(SmbArgs),
    /// -(1/n) ln mu(C^n) on the base chain
    Base(SmbArgs),
    /// Mean of the supremum of the information function g_n over n
    Supg {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        n_max: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct SmbArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
struct ModelSource {
    /// JSON model spec file
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Builtin chain: pitskel, coin, three_state or four_state
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    source: ModelSource,
    /// State count of the truncated pitskel chain
    #[arg(long, requires = "builtin")]
    truncation: Option<usize>,
    /// Builtin roof: sqrtlog, unit or ramp
    #[arg(long, requires = "builtin")]
    roof_builtin: Option<String>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the plotting series as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Report entropies in bits instead of nats
    #[arg(long)]
    bits: bool,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

const ENTROPY_FIELDS: &[&str] = &[
    "h_base",
    "h_tilde",
    "one_step",
    "total",
    "good_part",
    "bad_part",
    "leading_order_total",
    "partial",
    "entropy_rate",
    "marginal_entropy",
];

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, Error> {
        match (&self.source.spec, &self.source.builtin) {
            (Some(path), _) => ModelSpec::from_path(path),
            (None, Some(name)) => Ok(ModelSpec::builtin(
                name,
                self.truncation,
                self.roof_builtin.as_deref(),
            )),
            (None, None) => unreachable!("clap enforces a model source"),
        }
    }

    fn load(&self) -> Result<(Model, Value), Error> {
        let spec = self.spec()?;
        let model = spec.build()?;
        info!("loaded model with {} states", model.chain.len());
        let source = match &self.source.spec {
            Some(path) => json!({"kind": "file", "path": path.display().to_string()}),
            None => json!({"kind": "builtin"}),
        };
        let value = json!({
            "source": source,
            "spec": spec,
            "states": model.chain.len(),
            "max_roof": model.roof.as_ref().map(|r| r.max()),
        });
        Ok((model, value))
    }
}

fn emit(command: &str, output: &OutputArgs, model: Value, result: impl Serialize, fields: &[&str]) -> Outcome {
    let units = if output.bits { Units::Bits } else { Units::Nats };
    let mut result = serde_json::to_value(result).map_err(|e| Failure::Io(e.to_string()))?;
    report::scale_fields(&mut result, fields, units.scale());
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        units,
        model,
        result,
    };
    report::emit(&envelope, output.out.as_deref())?;
    Ok(())
}

fn csv_path(output: &OutputArgs) -> Option<&Path> {
    output.csv.as_deref()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TOWER_ENTROPY_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match failure {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
                Failure::Validation(msg) => eprintln!("validation failed: {msg}"),
            }
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Chain(ChainCmd::Validate { model, output }) => chain_validate(&model, &output),
        Command::Chain(ChainCmd::Info { model, names, output }) => chain_info(&model, &names, &output),
        Command::Zoo(ZooCmd::List { output }) => zoo_list(&output),
        Command::Zoo(ZooCmd::Report {
            builtin,
            roof_builtin,
            truncations,
            output,
        }) => zoo_report(&builtin, roof_builtin.as_deref(), &truncations, &output),
        Command::Entropy(EntropyCmd::Exact { model, prefixes, output }) => entropy_exact(&model, &prefixes, &output),
        Command::Entropy(EntropyCmd::Nstep {
            model,
            n,
            enumerate,
            cap,
            output,
        }) => entropy_nstep(&model, n as usize, enumerate.then_some(cap as usize), &output),
        Command::Smb(SmbCmd::Tower(args)) => smb_run("smb tower", &args, true),
        Command::Smb(SmbCmd::Base(args)) => smb_run("smb base", &args, false),
        Command::Smb(SmbCmd::Supg {
            model,
            n_max,
            samples,
            seed,
            output,
        }) => smb_supg(&model, n_max as usize, samples as usize, seed, &output),
        Command::Nonmarkov {
            model,
            order,
            depth,
            min_tv,
            output,
        } => nonmarkov(&model, order as usize, depth as usize, min_tv, &output),
    }
}

fn chain_validate(args: &ModelArgs, output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let report = model.chain.validate();
    emit("chain validate", output, model_json, &report, &[])?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{} row defects, {} negative entries, {} communicating classes",
            report.row_defects.len(),
            report.negative_entries.len(),
            report.class_sizes.len()
        )))
    }
}

#[derive(Serialize)]
struct NameReport {
    name: Vec<String>,
    measure: f64,
    log_measure: Option<f64>,
    atom: Option<cylinder::AtomInfo>,
}

fn chain_info(args: &ModelArgs, names: &[String], output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let chain = &model.chain;
    let pi = chain.stationary()?;
    let marginal: f64 = pi.iter().map(|&p| tower_entropy::entropy_term(p)).sum();
    let mut result = json!({
        "states": chain.len(),
        "ids": chain.ids(),
        "stationary": pi,
        "entropy_rate": chain.entropy_rate()?,
        "marginal_entropy": marginal,
    });
    if model.roof.is_some() {
        let susp = model.suspension()?;
        let mut reports = Vec::with_capacity(names.len());
        for text in names {
            let name = Name::parse(&susp, text)?;
            let log_measure = cylinder::log_cylinder_measure(&susp, &name);
            let atom = if log_measure.is_finite() {
                Some(cylinder::classify_atom(&susp, &name)?)
            } else {
                None
            };
            reports.push(NameReport {
                name: name.ids(&susp),
                measure: log_measure.exp(),
                log_measure: log_measure.is_finite().then_some(log_measure),
                atom,
            });
        }
        result["tower"] = json!({
            "roof": susp.roof().values(),
            "gamma": susp.gamma(),
            "mean_roof": susp.mean_roof(),
            "atom_masses": susp.atom_masses(),
            "names": reports,
        });
    } else if !names.is_empty() {
        return Err(Failure::Core(Error::ModelSpec(
            "cylinder names need a roof; set `roof` or `roof_builtin`".into(),
        )));
    }
    emit("chain info", output, model_json, result, ENTROPY_FIELDS)
}

fn zoo_list(output: &OutputArgs) -> Outcome {
    let builtins: Vec<Value> = CHAIN_BUILTINS
        .iter()
        .map(|b| {
            json!({
                "name": b.to_string(),
                "description": b.description(),
                "default_roof": b.default_roof().to_string(),
                "truncatable": *b == ChainBuiltin::Pitskel,
            })
        })
        .collect();
    let roofs: Vec<String> = [RoofBuiltin::Sqrtlog, RoofBuiltin::Unit, RoofBuiltin::Ramp]
        .iter()
        .map(|r| r.to_string())
        .collect();
    let result = json!({
        "builtins": builtins,
        "roof_builtins": roofs,
        "default_truncation": DEFAULT_TRUNCATION,
    });
    emit("zoo list", output, Value::Null, result, &[])
}

fn zoo_report(builtin: &str, roof: Option<&str>, truncations: &[usize], output: &OutputArgs) -> Outcome {
    let b: ChainBuiltin = builtin.parse()?;
    let roof = roof.map(str::parse::<RoofBuiltin>).transpose()?;
    let report = zoo::check_conditions(b, roof, truncations, ConditionThresholds::default())?;
    let model = json!({"builtin": b, "roof_builtin": roof.unwrap_or(b.default_roof())});
    if let Some(path) = csv_path(output) {
        #[derive(Serialize)]
        struct Row {
            truncation: usize,
            marginal_entropy: f64,
            entropy_rate: f64,
            mean_roof: f64,
        }
        let scale = if output.bits { Units::Bits.scale() } else { 1.0 };
        report::write_csv(
            path,
            (0..report.truncations.len()).map(|i| Row {
                truncation: report.truncations[i],
                marginal_entropy: report.marginal_entropy[i] * scale,
                entropy_rate: report.entropy_rate[i] * scale,
                mean_roof: report.mean_roof[i],
            }),
        )?;
    }
    emit(
        "zoo report",
        output,
        model,
        &report,
        &["marginal_entropy", "entropy_rate", "min_entropy_increment"],
    )
}

fn entropy_exact(args: &ModelArgs, prefixes: &[usize], output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let susp = model.suspension()?;
    let report = entropy::entropy_report(&susp, 0, prefixes)?;
    let result = json!({
        "h_base": report.h_base,
        "gamma": report.gamma,
        "h_tilde": report.h_tilde,
        "one_step": report.one_step,
        "tilde_alpha_partials": report
            .tilde_alpha_partials
            .iter()
            .map(|&(prefix, partial)| json!({"prefix": prefix, "partial": partial}))
            .collect::<Vec<_>>(),
    });
    emit("entropy exact", output, model_json, result, ENTROPY_FIELDS)
}

fn entropy_nstep(args: &ModelArgs, n: usize, cap: Option<usize>, output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let susp = model.suspension()?;
    let series = match cap {
        Some(cap) => (1..=n)
            .map(|k| entropy::n_step_conditional_entropy_enumerated(&susp, k, cap))
            .collect::<Result<Vec<_>, _>>()?,
        None => entropy::n_step_series(&susp, n),
    };
    let h_tilde = entropy::abramov_entropy(&susp)?;
    if let Some(path) = csv_path(output) {
        #[derive(Serialize)]
        struct Row {
            n: usize,
            total: f64,
            good_part: f64,
            bad_part: f64,
        }
        let scale = if output.bits { Units::Bits.scale() } else { 1.0 };
        report::write_csv(
            path,
            series.iter().map(|s| Row {
                n: s.n,
                total: s.total * scale,
                good_part: s.good_part * scale,
                bad_part: s.bad_part * scale,
            }),
        )?;
    }
    let result = json!({
        "route": if cap.is_some() { "enumeration" } else { "cells" },
        "h_tilde": h_tilde,
        "series": series,
    });
    emit("entropy nstep", output, model_json, result, ENTROPY_FIELDS)
}

#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    value: f64,
}

#[derive(Serialize)]
struct GRow {
    n: usize,
    mean_g: f64,
}

const SMB_FIELDS: &[&str] = &["per_trial", "mean", "stddev", "stderr", "target"];

fn smb_run(command: &str, args: &SmbArgs, tower: bool) -> Outcome {
    let (model, model_json) = args.model.load()?;
    let (n, trials) = (args.n as usize, args.trials as usize);
    info!("{command}: n = {n}, trials = {trials}, seed = {}", args.seed);
    let run = if tower {
        smb::smb_estimate(&model.suspension()?, n, trials, args.seed)?
    } else {
        smb::base_smb_estimate(&model.chain, n, trials, args.seed)?
    };
    if let Some(path) = csv_path(&args.output) {
        let scale = if args.output.bits { Units::Bits.scale() } else { 1.0 };
        report::write_csv(
            path,
            run.per_trial
                .iter()
                .enumerate()
                .map(|(trial, &v)| TrialRow { trial, value: v * scale }),
        )?;
    }
    emit(command, &args.output, model_json, &run, SMB_FIELDS)
}

fn smb_supg(args: &ModelArgs, n_max: usize, samples: usize, seed: u64, output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let susp = model.suspension()?;
    info!("smb supg: n_max = {n_max}, samples = {samples}, seed = {seed}");
    let report = smb::sup_g_diagnostic(&susp, n_max, samples, seed)?;
    let scale = if output.bits { Units::Bits.scale() } else { 1.0 };
    if let Some(path) = csv_path(output) {
        report::write_csv(
            path,
            report
                .mean_g_by_n
                .iter()
                .enumerate()
                .map(|(i, &g)| GRow { n: i + 1, mean_g: g * scale }),
        )?;
    }
    emit(
        "smb supg",
        output,
        model_json,
        &report,
        &["mean_sup_g", "stderr", "bound", "h_base", "mean_g_by_n", "per_sample_sup"],
    )
}

fn nonmarkov(args: &ModelArgs, order: usize, depth: usize, min_tv: f64, output: &OutputArgs) -> Outcome {
    let (model, model_json) = args.load()?;
    let susp = model.suspension()?;
    let search = zoo::markov_violation_witness(&susp, order, depth, min_tv)?;
    let mut result = serde_json::to_value(&search).map_err(|e| Failure::Io(e.to_string()))?;
    if let zoo::WitnessSearch::Found(w) = &search {
        let ids = |h: &[usize]| h.iter().map(|&a| susp.chain().id(a).to_string()).collect::<Vec<_>>();
        result["history1_ids"] = json!(ids(&w.history1));
        result["history2_ids"] = json!(ids(&w.history2));
    }
    result["order"] = json!(order);
    result["search_depth"] = json!(depth);
    result["min_tv"] = json!(min_tv);
    emit("nonmarkov", output, model_json, result, &[])
}
