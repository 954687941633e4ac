//! Command-line front end. Exit codes: 0 success, 1 usage error,
//! 2 validation or data error, 3 numeric divergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codes::CodeBook;
use crate::data::{generate_synthetic, load_manifest, Dataset};
use crate::error::{Error, Result};
use crate::net::{cost_report, Network, NetworkConfig};
use crate::retrieval::{self, ApNormalization, DEFAULT_K};
use crate::train::{self, TrainConfig};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "MOBILEHASH_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mobilehash", version, about = "Depthwise-separable deep hashing: train, encode, retrieve, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network on a manifest and write a checkpoint plus training log
    Train(TrainArgs),
    /// Encode every manifest image into a code file
    Encode(EncodeArgs),
    /// Print the k nearest codes to one image of a code file
    IndexQuery(IndexQueryArgs),
    /// Leave-one-out MAP@k over a code file
    Eval(EvalArgs),
    /// Per-layer parameter and multiply-add counts for a config
    CostReport(CostReportArgs),
    /// Write a synthetic class-colored PPM dataset and its manifest
    GenSynth(GenSynthArgs),
    /// Summarize a checkpoint file
    InspectCheckpoint(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// toy network config, 2,000-iteration schedule at lr 0.05
    Toy,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Builtin config name or config file [default: table1-verbatim, or toy with --preset toy]
    #[arg(long)]
    pub config: Option<String>,
    /// Desk-scale defaults for config and schedule; explicit flags still win
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Training manifest (CSV `id,path,label`)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output checkpoint path
    #[arg(long)]
    pub out: PathBuf,
    /// Initialize from this checkpoint instead of random weights
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training log path [default: <out>.log]
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Seed for initialization and shuffling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial learning rate [default: 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning-rate multiplier per decay step [default: 0.1]
    #[arg(long)]
    pub decay: Option<f64>,
    /// Iterations between learning-rate decays [default: 10000]
    #[arg(long)]
    pub decay_every: Option<u64>,
    /// Number of mini-batch iterations [default: 30000]
    #[arg(long)]
    pub max_iters: Option<u64>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Heavy-ball momentum, 0 for plain SGD [default: 0]
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Iterations per training-log line [default: 100]
    #[arg(long)]
    pub log_every: Option<u64>,
    /// Override the latent code length K
    #[arg(long)]
    pub bits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Manifest of images to encode
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output code file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexQueryArgs {
    /// Code file to search
    #[arg(long)]
    pub codes: PathBuf,
    /// Image id of the query (excluded from its own results)
    #[arg(long)]
    pub query: String,
    /// Number of neighbors
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Code file to evaluate
    #[arg(long)]
    pub codes: PathBuf,
    /// Retrieval depth
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Average-precision denominator
    #[arg(long, default_value = "min-r-k")]
    pub ap_norm: ApNormalization,
    /// Also write the report here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-query AP as CSV here
    #[arg(long)]
    pub per_query: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Kv,
}

#[derive(Debug, Args)]
pub struct CostReportArgs {
    /// Builtin config name or config file
    #[arg(long)]
    pub config: String,
    /// Override the latent code length K
    #[arg(long)]
    pub bits: Option<usize>,
    /// Override the class count
    #[arg(long)]
    pub classes: Option<usize>,
    /// Output format
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Output directory for images and manifest.csv
    #[arg(long)]
    pub out: PathBuf,
    /// Number of classes
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Images per class
    #[arg(long, default_value_t = 40)]
    pub per_class: usize,
    /// Image side length in pixels
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Checkpoint to summarize
    #[arg(long)]
    pub checkpoint: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Encode(a) => cmd_encode(a, out),
        Command::IndexQuery(a) => cmd_index_query(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::CostReport(a) => cmd_cost_report(a, out),
        Command::GenSynth(a) => cmd_gen_synth(a, out),
        Command::InspectCheckpoint(a) => cmd_inspect(a, out),
    }
}

/// Resolves the training config from the preset and explicit flags.
pub fn train_config(a: &TrainArgs) -> TrainConfig {
    let base = match a.preset {
        Some(Preset::Toy) => TrainConfig::toy(),
        None => TrainConfig::default(),
    };
    TrainConfig {
        learning_rate: a.lr.unwrap_or(base.learning_rate),
        decay_factor: a.decay.unwrap_or(base.decay_factor),
        decay_interval: a.decay_every.unwrap_or(base.decay_interval),
        max_iterations: a.max_iters.unwrap_or(base.max_iterations),
        batch_size: a.batch.unwrap_or(base.batch_size),
        seed: a.seed.unwrap_or(base.seed),
        log_every: a.log_every.unwrap_or(base.log_every),
        momentum: a.momentum.unwrap_or(base.momentum),
    }
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg_name = a.config.clone().unwrap_or_else(|| {
        match a.preset {
            Some(Preset::Toy) => "toy",
            None => "table1-verbatim",
        }
        .to_string()
    });
    let mut net_cfg = NetworkConfig::load(&cfg_name)?;
    if let Some(bits) = a.bits {
        net_cfg = net_cfg.with_bits(bits);
    }
    let tc = train_config(&a);
    tc.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let dataset = Dataset::from_manifest(&manifest, net_cfg.input.height, net_cfg.input.width)?;
    let mut net = match &a.checkpoint {
        Some(p) => Network::load_checkpoint_into(p, &net_cfg)?,
        None => Network::build(&net_cfg, tc.seed)?,
    };
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    let log = train::train(&mut net, &dataset, &tc)?;
    net.round_to_f32();
    net.save_checkpoint(&a.out)?;
    write_file(&log_path, log.to_text())?;
    writeln!(
        out,
        "trained {} for {} iterations on {} images; final mean loss {}",
        net_cfg.name,
        tc.max_iterations,
        dataset.len(),
        log.final_loss().map_or("n/a".to_string(), |l| format!("{l:.6}")),
    )
    .map_err(stdout_err)?;
    writeln!(out, "checkpoint: {}\nlog: {}", a.out.display(), log_path.display()).map_err(stdout_err)
}

fn cmd_encode(a: EncodeArgs, out: &mut dyn Write) -> Result<()> {
    let net = Network::load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let input = net.config().input;
    let dataset = Dataset::from_manifest(&manifest, input.height, input.width)?;
    let book = retrieval::encode_dataset(&net, &dataset)?;
    book.save(&a.out)?;
    writeln!(out, "encoded {} images at K={} into {}", book.len(), book.bits(), a.out.display()).map_err(stdout_err)
}

fn cmd_index_query(a: IndexQueryArgs, out: &mut dyn Write) -> Result<()> {
    let book = CodeBook::load(&a.codes)?;
    let q = book
        .get(&a.query)
        .ok_or_else(|| Error::InvalidArgument(format!("image id `{}` not in {}", a.query, a.codes.display())))?;
    let result = retrieval::query(&book, q, a.k)?;
    let mut s = String::from("rank,image_id,label,distance,relevant\n");
    for (i, n) in result.neighbors.iter().enumerate() {
        s += &format!("{},{},{},{},{}\n", i + 1, n.image_id, n.label, n.distance, u8::from(n.label == q.label));
    }
    out.write_all(s.as_bytes()).map_err(stdout_err)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let book = CodeBook::load(&a.codes)?;
    let report = retrieval::evaluate_leave_one_out(&book, a.k, a.ap_norm)?;
    let text = report.to_kv();
    if let Some(p) = &a.out {
        write_file(p, &text)?;
    }
    if let Some(p) = &a.per_query {
        write_file(p, report.per_query_csv())?;
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_cost_report(a: CostReportArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = NetworkConfig::load(&a.config)?;
    if let Some(bits) = a.bits {
        cfg = cfg.with_bits(bits);
    }
    if let Some(classes) = a.classes {
        cfg = cfg.with_classes(classes);
    }
    let report = cost_report(&cfg)?;
    let text = match a.format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Kv => report.to_kv(),
    };
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_gen_synth(a: GenSynthArgs, out: &mut dyn Write) -> Result<()> {
    let ds = generate_synthetic(a.classes, a.per_class, a.size, a.seed)?;
    let manifest = ds.write_ppm_dir(&a.out)?;
    writeln!(out, "wrote {} images; manifest: {}", ds.len(), manifest.display()).map_err(stdout_err)
}

fn cmd_inspect(a: InspectArgs, out: &mut dyn Write) -> Result<()> {
    let net = Network::load_checkpoint(&a.checkpoint)?;
    let cfg = net.config();
    let tensors: usize = net.layers().iter().map(|l| l.state().len()).sum();
    let mut s = format!(
        "name={}\nstep={}\ninput={}\nbits={}\nclasses={}\nlayers={}\ntensors={}\nparams={}\n",
        cfg.name,
        net.step(),
        cfg.input,
        cfg.bits,
        cfg.classes,
        net.layers().len(),
        tensors,
        net.param_count()
    );
    s += "# config\n";
    s += &cfg.to_text();
    out.write_all(s.as_bytes()).map_err(stdout_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("mobilehash").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flag_registry_matches_help() {
        let registry: &[(&str, &[&str])] = &[
            ("train", &["config", "preset", "manifest", "out", "checkpoint", "log", "seed", "lr", "decay", "decay-every", "max-iters", "batch", "momentum", "log-every", "bits"]),
            ("encode", &["checkpoint", "manifest", "out"]),
            ("index-query", &["codes", "query", "k"]),
            ("eval", &["codes", "k", "ap-norm", "out", "per-query"]),
            ("cost-report", &["config", "bits", "classes", "format"]),
            ("gen-synth", &["out", "classes", "per-class", "size", "seed"]),
            ("inspect-checkpoint", &["checkpoint"]),
        ];
        let mut root = Cli::command();
        let names: Vec<String> = root.get_subcommands().map(|c| c.get_name().to_string()).collect();
        assert_eq!(names, registry.iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>());
        for (name, flags) in registry {
            let sub = root.find_subcommand_mut(name).unwrap();
            let declared: Vec<String> = sub
                .get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string))
                .filter(|l| l != "help")
                .collect();
            assert_eq!(declared, flags.iter().map(|s| s.to_string()).collect::<Vec<_>>(), "{name}");
            let help = sub.render_long_help().to_string();
            for f in *flags {
                assert!(help.contains(&format!("--{f}")), "{name} help lacks --{f}");
            }
        }
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_capture(&[]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["eval"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["eval", "--codes", "x", "--k", "ten"]).0, EXIT_USAGE);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("cost-report"));
    }

    #[test]
    fn preset_and_overrides() {
        let Cli { command: Command::Train(a) } =
            Cli::try_parse_from(["m", "train", "--preset", "toy", "--manifest", "m.csv", "--out", "o", "--lr", "0.2"]).unwrap()
        else {
            unreachable!()
        };
        let tc = train_config(&a);
        assert_eq!(tc.learning_rate, 0.2);
        assert_eq!(tc.max_iterations, TrainConfig::toy().max_iterations);
        let Cli { command: Command::Train(a) } =
            Cli::try_parse_from(["m", "train", "--manifest", "m.csv", "--out", "o"]).unwrap()
        else {
            unreachable!()
        };
        assert_eq!(train_config(&a), TrainConfig::default());
    }

    #[test]
    fn cost_report_runs() {
        let (code, out, _) = run_capture(&["cost-report", "--config", "mobilenet-standard", "--format", "kv"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("reference_params_total=4231976"), "{out}");
        let (code, _, err) = run_capture(&["cost-report", "--config", "/nonexistent/x.cfg"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("/nonexistent/x.cfg"), "{err}");
    }
}
