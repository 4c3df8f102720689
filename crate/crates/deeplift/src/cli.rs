//! The `deeplift` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use deeplift_core::baselines::EnsembleSpec;
use deeplift_core::deeplift::{
    attribute, mean_normalize_softmax_weights, normalize_constrained_weights, select_attribution_target,
    zeros_reference, AttributionRequest, ContributionReport, DeepLiftConfig, Head, Method, TargetSelection,
    EPSILON_STABLE,
};
use deeplift_core::genomics::{
    evaluate_example, generate_split, one_hot_encode, summarize, to_samples, DatasetSpec, Split, ALPHABET,
};
use deeplift_core::train::train_loop;
use deeplift_core::{Graph, Inputs, Target};
use serde::Serialize;

use crate::config::TrainFile;
use crate::error::{read_to_string, write_string, Error, Result};
use crate::formats::{self, VectorSample};
use crate::manifest::write_manifest;
use crate::model_io::{load_model, save_model};
use crate::parallel::{map_ordered, with_threads, RayonExecutor};

#[derive(Parser, Debug)]
#[command(name = "deeplift", version, about = "Difference-from-reference attribution for feedforward networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic motif dataset as train.fa, val.fa and test.fa.
    GenData(GenDataArgs),
    /// Train the motif CNN on a generated dataset.
    Train(TrainArgs),
    /// Attribute model outputs to input features.
    Attribute(AttributeArgs),
    /// Score DeepLIFT against gradient×input on planted motif positions.
    Compare(CompareArgs),
    /// Compare epsilon-LRP with gradient×input on random ReLU networks.
    CheckLrp(CheckLrpArgs),
    /// Apply the softmax-head and constrained-input weight normalizations.
    Normalize(NormalizeArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = DatasetSpec::default().n_train)]
    pub n_train: usize,
    #[arg(long, default_value_t = DatasetSpec::default().n_val)]
    pub n_val: usize,
    #[arg(long, default_value_t = DatasetSpec::default().n_test)]
    pub n_test: usize,
    /// Sequence length.
    #[arg(long, default_value_t = DatasetSpec::default().length)]
    pub length: usize,
    #[arg(long, default_value_t = DatasetSpec::default().seed)]
    pub seed: u64,
    /// Per-base probability of mutating a planted motif base.
    #[arg(long, default_value_t = DatasetSpec::default().substitution_rate)]
    pub substitution_rate: f64,
    /// Leave chance motif occurrences in the background.
    #[arg(long)]
    pub keep_background: bool,
    #[arg(long, default_value_t = DatasetSpec::default().min_instances)]
    pub min_instances: usize,
    #[arg(long, default_value_t = DatasetSpec::default().max_instances)]
    pub max_instances: usize,
    /// Output directory.
    #[arg(long, short)]
    pub output: PathBuf,
}

impl GenDataArgs {
    fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            n_train: self.n_train,
            n_val: self.n_val,
            n_test: self.n_test,
            length: self.length,
            seed: self.seed,
            substitution_rate: self.substitution_rate,
            purge_background: !self.keep_background,
            min_instances: self.min_instances,
            max_instances: self.max_instances,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Directory holding train.fa and val.fa.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML file with [train] and [model] tables; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Model file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Loss curve TSV [default: <output>.loss.tsv].
    #[arg(long)]
    pub loss: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Deeplift,
    GradInput,
    Lrp,
}

#[derive(Args, Debug, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// FASTA-like sequences (one-hot encoded) or a TSV of input vectors.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Deeplift)]
    pub method: MethodArg,
    /// Reference input: `zeros`, or a TSV file whose first row is used.
    #[arg(long, default_value = "zeros")]
    pub reference: String,
    /// `auto` (pre-activation of the sigmoid/softmax head) or `node[index]`.
    #[arg(long, default_value = "auto")]
    pub target: String,
    /// Class for automatic targeting on a softmax head.
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    #[arg(long, default_value_t = EPSILON_STABLE)]
    pub epsilon_stable: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub lrp_epsilon: f64,
    /// Apply the constrained-input weight normalization before attributing.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    /// Trained (unnormalized) model.
    #[arg(long)]
    pub model: PathBuf,
    /// FASTA-like dataset, usually test.fa.
    #[arg(long)]
    pub data: PathBuf,
    /// Per-sequence comparison table.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Per-position score tracks of the selected sequences.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckLrpArgs {
    #[arg(long, default_value_t = EnsembleSpec::default().nets)]
    pub nets: usize,
    #[arg(long, default_value_t = EnsembleSpec::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = EnsembleSpec::default().min_layers)]
    pub min_layers: usize,
    #[arg(long, default_value_t = EnsembleSpec::default().max_layers)]
    pub max_layers: usize,
    #[arg(long, default_value_t = EnsembleSpec::default().input_dim)]
    pub input_dim: usize,
    #[arg(long, default_value_t = EnsembleSpec::default().width)]
    pub width: usize,
    /// Resample nets with any hidden pre-activation smaller than this.
    #[arg(long, default_value_t = EnsembleSpec::default().min_preactivation)]
    pub min_preactivation: f64,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-5,1e-9")]
    pub epsilons: Vec<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Do not center softmax-head weights across classes.
    #[arg(long)]
    pub skip_softmax: bool,
    /// Do not normalize weights over constraint groups.
    #[arg(long)]
    pub skip_constraints: bool,
}

/// Parses `argv`, runs the command, and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = Error::Usage(first.to_string());
            eprintln!("{}", err.one_line());
            return err.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.one_line());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => with_threads(a.threads, || train(&a)),
        Command::Attribute(a) => with_threads(a.threads, || attribute_cmd(&a)),
        Command::Compare(a) => with_threads(a.threads, || compare(&a)),
        Command::CheckLrp(a) => check_lrp(&a),
        Command::Normalize(a) => normalize(&a),
    }
}

fn say(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = a.spec();
    spec.validate()?;
    for split in Split::ALL {
        let examples = generate_split(&spec, split)?;
        let path = a.output.join(format!("{}.fa", split.name()));
        write_string(&path, &formats::format_dataset(&examples))?;
        say(format_args!("wrote {} ({} sequences)", path.display(), examples.len()));
    }
    #[derive(Serialize)]
    struct Resolved<'a> {
        output: &'a Path,
        dataset: DatasetSpec,
    }
    write_manifest(&a.output, "gen-data", &Resolved { output: &a.output, dataset: spec })?;
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut file = match &a.config {
        Some(p) => TrainFile::load(p)?,
        None => TrainFile::default(),
    };
    let t = &mut file.train;
    t.seed = a.seed.unwrap_or(t.seed);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.weight_decay = a.weight_decay.unwrap_or(t.weight_decay);
    t.validate()?;
    let train_set = formats::read_dataset(&a.data.join("train.fa"))?;
    let val_set = formats::read_dataset(&a.data.join("val.fa"))?;
    if let Some(e) = train_set.iter().chain(&val_set).find(|e| e.sequence.len() != file.model.length) {
        return Err(Error::InvalidConfig {
            path: a.data.clone(),
            message: format!("{} has length {}, model expects {}", e.id, e.sequence.len(), file.model.length),
        });
    }
    let graph = deeplift_core::genomics::build_genomics_cnn(&file.model)?;
    let outcome = train_loop(
        &graph,
        &to_samples(&train_set)?,
        &to_samples(&val_set)?,
        &file.train,
        &RayonExecutor,
    )?;
    save_model(&a.output, &outcome.graph)?;
    let loss_path = a.loss.clone().unwrap_or_else(|| {
        let mut p = a.output.as_os_str().to_owned();
        p.push(".loss.tsv");
        PathBuf::from(p)
    });
    write_string(&loss_path, &formats::format_loss_curve(&outcome.curve, outcome.kept_epoch))?;
    let kept = &outcome.curve[outcome.kept_epoch.min(outcome.curve.len().saturating_sub(1))];
    say(format_args!(
        "kept epoch {} val_loss {} val_auroc {}",
        outcome.kept_epoch,
        kept.val_loss.map_or("NA".into(), |v| v.to_string()),
        kept.val_auroc.map_or("NA".into(), |v| v.to_string())
    ));
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a TrainArgs,
        loss: &'a Path,
        resolved: &'a TrainFile,
    }
    write_manifest(
        &a.output,
        "train",
        &Resolved {
            args: a,
            loss: &loss_path,
            resolved: &file,
        },
    )?;
    Ok(())
}

fn parse_target(text: &str, class: usize) -> Result<TargetSelection> {
    if text == "auto" {
        return Ok(TargetSelection::Auto { class });
    }
    let parsed = text
        .strip_suffix(']')
        .and_then(|t| t.split_once('['))
        .and_then(|(node, idx)| Some(Target::new(node, idx.parse().ok()?)));
    parsed
        .map(TargetSelection::Explicit)
        .ok_or_else(|| Error::Usage(format!("--target {text:?}: expected auto or node[index]")))
}

fn is_fasta(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with('>'))
}

fn attribute_cmd(a: &AttributeArgs) -> Result<()> {
    let mut graph = load_model(&a.model)?;
    if a.normalize {
        graph = normalize_constrained_weights(&graph)?;
    }
    let target = parse_target(&a.target, a.class)?;
    let text = read_to_string(&a.data)?;
    let fasta = is_fasta(&text);
    let samples: Vec<VectorSample> = if fasta {
        let inputs = graph.input_ids();
        let [node] = inputs.as_slice() else {
            return Err(Error::InvalidConfig {
                path: a.model.clone(),
                message: "sequence data needs a model with exactly one input node".into(),
            });
        };
        formats::parse_dataset(&text, &a.data)?
            .into_iter()
            .map(|e| {
                let mut inputs = Inputs::new();
                inputs.insert(node.to_string(), one_hot_encode(&e.sequence)?);
                Ok(VectorSample { id: e.id, inputs })
            })
            .collect::<Result<_>>()?
    } else {
        formats::parse_vectors(&text, &graph, &a.data)?
    };
    let reference = if a.reference == "zeros" {
        zeros_reference(&graph)
    } else {
        let path = PathBuf::from(&a.reference);
        formats::read_vectors(&path, &graph)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::parse(&path, 1, "reference file has no rows"))?
            .inputs
    };
    let method = match a.method {
        MethodArg::Deeplift => Method::DeepLift,
        MethodArg::GradInput => Method::GradInput,
        MethodArg::Lrp => Method::Lrp { epsilon: a.lrp_epsilon },
    };
    let config = DeepLiftConfig {
        epsilon_stable: a.epsilon_stable,
    };
    let reports: Vec<(String, ContributionReport)> = map_ordered(&samples, |s| {
        let request = AttributionRequest {
            input: s.inputs.clone(),
            reference: reference.clone(),
            target: target.clone(),
            method,
        };
        Ok((s.id.clone(), attribute(&graph, &request, &config)?))
    })?;
    let labels = |node: &str, index: usize| {
        if fasta {
            format!("{}:{}", index / 4, ALPHABET[index % 4] as char)
        } else {
            format!("{node}:{index}")
        }
    };
    let name = a.method.to_possible_value().expect("named").get_name().to_string();
    write_string(&a.output, &formats::format_attributions(&name, &reports, &labels))?;
    let worst = reports.iter().map(|(_, r)| r.residual).fold(0.0, f64::max);
    say(format_args!("attributed {} samples, max residual {worst:e}", reports.len()));
    let resolved = select_attribution_target(&graph, &target)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a AttributeArgs,
        resolved_target: String,
        softmax_normalized: bool,
    }
    write_manifest(
        &a.output,
        "attribute",
        &Resolved {
            args: a,
            resolved_target: resolved.target.to_string(),
            softmax_normalized: resolved.head == Some(Head::Softmax),
        },
    )?;
    Ok(())
}

fn compare(a: &CompareArgs) -> Result<()> {
    let graph = load_model(&a.model)?;
    let normalized = normalize_constrained_weights(&graph)?;
    let examples = formats::read_dataset(&a.data)?;
    let results = map_ordered(&examples, |e| Ok(evaluate_example(&graph, &normalized, e)?))?;
    let (rows, tracks): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let selected: Vec<_> = rows
        .iter()
        .zip(tracks)
        .filter(|(r, _)| r.selected)
        .map(|(_, t)| t)
        .collect();
    let table = summarize(rows);
    write_string(&a.output, &formats::format_comparison(&table))?;
    if let Some(path) = &a.tracks {
        write_string(path, &formats::format_score_tracks(&selected))?;
    }
    say(format_args!(
        "selected {} of {}: deeplift {:.4} grad_input {:.4} win_rate {:.3} gata_gap {:.4} cagatg_gap {:.4} residuals_ok {}",
        table.selected,
        table.evaluated,
        table.mean_deeplift,
        table.mean_grad_input,
        table.win_rate,
        table.gata_gap,
        table.cagatg_gap,
        table.residuals_ok
    ));
    write_manifest(&a.output, "compare", a)?;
    Ok(())
}

fn check_lrp(a: &CheckLrpArgs) -> Result<()> {
    let spec = EnsembleSpec {
        nets: a.nets,
        seed: a.seed,
        min_layers: a.min_layers,
        max_layers: a.max_layers,
        input_dim: a.input_dim,
        width: a.width,
        min_preactivation: a.min_preactivation,
    };
    let report = deeplift_core::baselines::equivalence_report(&spec, &a.epsilons)?;
    write_string(&a.output, &formats::format_equivalence(&report))?;
    for &e in &a.epsilons {
        say(format_args!("eps {e:e}: max relative deviation {:e}", report.max_deviation_at(e)));
    }
    say(format_args!("monotone fraction {}", report.monotone_fraction()));
    write_manifest(&a.output, "check-lrp", a)?;
    Ok(())
}

fn normalize(a: &NormalizeArgs) -> Result<()> {
    let mut graph: Graph = load_model(&a.model)?;
    let mut applied = Vec::new();
    let head = select_attribution_target(&graph, &TargetSelection::default()).ok().and_then(|r| r.head);
    if !a.skip_softmax && head == Some(Head::Softmax) {
        graph = mean_normalize_softmax_weights(&graph)?;
        applied.push("softmax-mean");
    }
    if !a.skip_constraints && !graph.constraint_groups().is_empty() {
        graph = normalize_constrained_weights(&graph)?;
        applied.push("constrained-inputs");
    }
    save_model(&a.output, &graph)?;
    say(format_args!(
        "applied: {}",
        if applied.is_empty() { "none".to_string() } else { applied.join(", ") }
    ));
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a NormalizeArgs,
        applied: &'a [&'static str],
    }
    write_manifest(&a.output, "normalize", &Resolved { args: a, applied: &applied })?;
    Ok(())
}
