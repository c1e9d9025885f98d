//! Command-line front end.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::corpus::build_corpus;
use crate::eval::{
    ablation_sweep, embed_graphs, make_split, repeat_runs, run_experiment, summarize_ablation,
    write_ablation_csv, AblationKind, DrugEmbeddings, EvalError, ExperimentConfig,
    ExperimentInputs, RunMetrics, SplitKind, SplitSpec,
};
use crate::fingerprint::morgan_fingerprint;
use crate::molgraph::{load_drug_file, MolecularGraph};
use crate::pairscore::{
    AdamConfig, ContextFeatureSet, FeatureMode, ScorerConfig, TrainConfig, TripleDataset,
};
use crate::par::Exec;
use crate::skipgram::{export_embeddings, import_embeddings, LrDecay, SkipgramConfig};
use crate::substructure::{build_vocabulary, Inducer};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "graphdr",
    version,
    about = "Molecular graph embeddings for drug pair scoring"
)]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report vocabulary size and per-graph pattern counts.
    Vocab(VocabArgs),
    /// Learn one embedding per drug and write the embedding file.
    Embed(EmbedArgs),
    /// Write folded circular fingerprints.
    Fp(FpCmdArgs),
    /// Split a triple file into train and test files.
    Split(SplitArgs),
    /// Train and evaluate the pair scorer over several seeds.
    TrainEval(TrainEvalArgs),
    /// Sweep embedding dimension or skipgram epochs.
    Ablate(AblateArgs),
    /// Generate a synthetic drug file and triple file.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Drug file with `<id>\t<smiles>` lines.
    #[arg(long)]
    pub drugs: PathBuf,
    /// Pattern inducer: `wl:K` or `sp`.
    #[arg(long, default_value = "wl:3")]
    pub inducer: Inducer,
    /// Write dense frequency vectors as TSV here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SkipgramArgs {
    /// Pattern inducer: `wl:K` or `sp`.
    #[arg(long, default_value = "wl:3")]
    pub inducer: Inducer,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Skipgram epochs over the corpus.
    #[arg(long, default_value_t = 1000)]
    pub sg_epochs: usize,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 10)]
    pub negatives: usize,
    /// Initial skipgram learning rate.
    #[arg(long, default_value_t = 0.025)]
    pub sg_lr: f64,
    /// Disable linear learning-rate decay.
    #[arg(long)]
    pub no_lr_decay: bool,
    /// Exponent applied to pattern counts in the negative-sampling table.
    #[arg(long, default_value_t = 1.0)]
    pub unigram_exponent: f64,
    /// Skipgram worker threads; more than one is not reproducible.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl SkipgramArgs {
    fn config(&self, seed: u64) -> SkipgramConfig {
        SkipgramConfig {
            dim: self.dim,
            epochs: self.sg_epochs,
            negatives: self.negatives,
            learning_rate: self.sg_lr,
            lr_decay: if self.no_lr_decay {
                LrDecay::None
            } else {
                LrDecay::Linear
            },
            seed,
            unigram_exponent: self.unigram_exponent,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub drugs: PathBuf,
    #[command(flatten)]
    pub skipgram: SkipgramArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `embeddings.txt`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FpArgs {
    /// Fingerprint radius.
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    /// Fingerprint length in bits.
    #[arg(long, default_value_t = 256)]
    pub bits: usize,
}

#[derive(Debug, Args)]
pub struct FpCmdArgs {
    #[arg(long)]
    pub drugs: PathBuf,
    #[command(flatten)]
    pub fp: FpArgs,
    /// Output directory; receives `fingerprints.tsv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Triple CSV with header `drug_a,drug_b,context,label`.
    #[arg(long)]
    pub triples: PathBuf,
    /// Drug file; needed for cold splits.
    #[arg(long)]
    pub drugs: Option<PathBuf>,
    /// `random:RATIO` or `cold`.
    #[arg(long, default_value = "random:0.5")]
    pub split: SplitSpec,
    #[command(flatten)]
    pub fp: FpArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `train.csv` and `test.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScorerArgs {
    /// Drug features: `fp`, `dr` or `fp+dr`.
    #[arg(long, default_value = "fp+dr")]
    pub mode: FeatureMode,
    /// Scorer training epochs.
    #[arg(long, default_value_t = 250)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8192)]
    pub batch_size: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.99)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Drug encoder hidden widths.
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub drug_hidden: Vec<usize>,
    /// Context encoder hidden widths.
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub context_hidden: Vec<usize>,
    /// Head hidden widths.
    #[arg(long, value_delimiter = ',', default_value = "32,32,32")]
    pub head_hidden: Vec<usize>,
    /// Also train on every pair with the drugs swapped.
    #[arg(long)]
    pub both_orders: bool,
    /// Ignore contexts; the head sees only the two drugs.
    #[arg(long)]
    pub no_context: bool,
    /// Context feature CSV (`context,f1,...`); one-hot when absent.
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    /// `random:RATIO` or `cold`.
    #[arg(long, default_value = "random:0.5")]
    pub split: SplitSpec,
    /// Permute labels before splitting (null-model control).
    #[arg(long)]
    pub shuffle_labels: bool,
}

#[derive(Debug, Args)]
pub struct TrainEvalArgs {
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub drugs: PathBuf,
    /// Precomputed embedding file; trained from `--drugs` when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub skipgram: SkipgramArgs,
    #[command(flatten)]
    pub fp: FpArgs,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    /// Seed of the skipgram run when embeddings are trained here.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `metrics.csv` and `summary.txt`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// `dimension` or `epochs`.
    #[arg(long)]
    pub kind: AblationKind,
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub drugs: PathBuf,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub skipgram: SkipgramArgs,
    #[command(flatten)]
    pub fp: FpArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `ablation_<kind>.csv` and a summary CSV.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n_drugs: usize,
    #[arg(long, default_value_t = 5)]
    pub n_contexts: usize,
    #[arg(long, default_value_t = 20_000)]
    pub n_triples: usize,
    /// Weight of pattern overlap in the planted label logit.
    #[arg(long, default_value_t = 6.0)]
    pub slope: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `drugs.tsv` and `triples.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::Vocab(a) => cmd_vocab(&a, exec),
        Command::Embed(a) => cmd_embed(&a, exec),
        Command::Fp(a) => cmd_fp(&a, exec),
        Command::Split(a) => cmd_split(&a),
        Command::TrainEval(a) => cmd_train_eval(&a, exec),
        Command::Ablate(a) => cmd_ablate(&a, exec),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn load_drugs(path: &Path) -> Result<Vec<MolecularGraph>> {
    load_drug_file(path).with_context(|| format!("[parse] {}", path.display()))
}

fn load_triples(path: &Path) -> Result<TripleDataset> {
    let f = File::open(path).with_context(|| format!("[input] {}", path.display()))?;
    TripleDataset::from_csv(BufReader::new(f))
        .with_context(|| format!("[input] {}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("[output] creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("[output] {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_vocab(a: &VocabArgs, exec: Exec) -> Result<()> {
    let graphs = load_drugs(&a.drugs)?;
    let (vocab, multisets) = build_vocabulary(&graphs, a.inducer, exec).context("[induce]")?;
    let totals: Vec<u64> = multisets.iter().map(|m| m.total()).collect();
    let min = totals.iter().min().copied().unwrap_or(0);
    let max = totals.iter().max().copied().unwrap_or(0);
    let mean = totals.iter().sum::<u64>() as f64 / totals.len() as f64;
    println!("inducer\t{}", a.inducer);
    println!("drugs\t{}", graphs.len());
    println!("vocabulary\t{}", vocab.len());
    println!("patterns_per_graph\tmin {min}\tmean {mean:.2}\tmax {max}");
    if let Some(path) = &a.dump {
        let corpus = build_corpus(&multisets, &vocab).context("[corpus]")?;
        let f = File::create(path).with_context(|| format!("[output] {}", path.display()))?;
        let mut w = BufWriter::new(f);
        for (i, g) in graphs.iter().enumerate() {
            let row: Vec<String> = corpus.graph_vector(i).iter().map(u32::to_string).collect();
            writeln!(w, "{}\t{}", g.source_id(), row.join("\t"))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_embed(a: &EmbedArgs, exec: Exec) -> Result<()> {
    let graphs = load_drugs(&a.drugs)?;
    let cfg = a.skipgram.config(a.seed);
    cfg.validate().context("[config]")?;
    let emb = embed_graphs(&graphs, a.skipgram.inducer, &cfg, exec).context("[embed]")?;
    let mut w = create(&a.out, "embeddings.txt")?;
    export_embeddings(&mut w, &emb.ids, &emb.matrix, &emb.inducer_tag).context("[output]")?;
    if let Some(last) = emb.loss_history.last() {
        println!("final epoch loss\t{last:.6}");
    }
    println!(
        "wrote {} embeddings of dimension {}",
        emb.ids.len(),
        cfg.dim
    );
    Ok(())
}

fn cmd_fp(a: &FpCmdArgs, exec: Exec) -> Result<()> {
    let graphs = load_drugs(&a.drugs)?;
    let fps = exec
        .try_map(&graphs, |g| morgan_fingerprint(g, a.fp.radius, a.fp.bits))
        .context("[fingerprint]")?;
    let mut w = create(&a.out, "fingerprints.tsv")?;
    for fp in &fps {
        writeln!(w, "{}\t{}", fp.drug_id, fp.to_bit_string())?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let data = load_triples(&a.triples)?;
    let fingerprints = match (&a.drugs, a.split) {
        (Some(path), _) => load_drugs(path)?
            .iter()
            .map(|g| morgan_fingerprint(g, a.fp.radius, a.fp.bits))
            .collect::<Result<Vec<_>, _>>()
            .context("[fingerprint]")?,
        (None, SplitSpec::Cold) => bail!("[config] a cold split needs --drugs"),
        (None, SplitSpec::Random(_)) => Vec::new(),
    };
    let inputs = ExperimentInputs {
        data: TripleDataset::default(),
        drugs: Default::default(),
        fingerprints,
        contexts: None,
    };
    let plan = make_split(&inputs, &data, a.split, a.seed).context("[split]")?;
    data.subset(&plan.train)
        .write_csv(create(&a.out, "train.csv")?)
        .context("[output]")?;
    data.subset(&plan.test)
        .write_csv(create(&a.out, "test.csv")?)
        .context("[output]")?;
    if let SplitKind::Cold { set_a, set_b } = &plan.kind {
        println!("|A|\t{}\n|B|\t{}", set_a.len(), set_b.len());
    }
    println!(
        "|Y_train|\t{}\n|Y_test|\t{}",
        plan.train.len(),
        plan.test.len()
    );
    Ok(())
}

fn experiment_config(
    s: &ScorerArgs,
    sg: &SkipgramArgs,
    fp: &FpArgs,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        inducer: sg.inducer,
        skipgram: sg.config(seed),
        train: TrainConfig {
            epochs: s.epochs,
            batch_size: s.batch_size,
            adam: AdamConfig {
                learning_rate: s.lr,
                beta1: s.beta1,
                beta2: s.beta2,
                epsilon: s.eps,
                weight_decay: s.weight_decay,
            },
            scorer: ScorerConfig {
                drug_hidden: s.drug_hidden.clone(),
                context_hidden: s.context_hidden.clone(),
                head_hidden: s.head_hidden.clone(),
                dropout: s.dropout,
                use_context: !s.no_context,
            },
            seed: 0,
            both_orders: s.both_orders,
        },
        mode: s.mode,
        split: s.split,
        fp_radius: fp.radius,
        fp_bits: fp.bits,
        shuffle_labels: s.shuffle_labels,
        use_context: !s.no_context,
    }
}

fn load_contexts(s: &ScorerArgs) -> Result<Option<ContextFeatureSet>> {
    let Some(path) = &s.contexts else {
        return Ok(None);
    };
    let f = File::open(path).with_context(|| format!("[input] {}", path.display()))?;
    let c = ContextFeatureSet::from_csv(BufReader::new(f))
        .with_context(|| format!("[input] {}", path.display()))?;
    Ok(Some(c))
}

fn cmd_train_eval(a: &TrainEvalArgs, exec: Exec) -> Result<()> {
    let cfg = experiment_config(&a.scorer, &a.skipgram, &a.fp, a.seed);
    cfg.train.scorer.validate().context("[config]")?;
    let graphs = load_drugs(&a.drugs)?;
    let data = load_triples(&a.triples)?;
    let contexts = load_contexts(&a.scorer)?;
    let embeddings: Option<DrugEmbeddings> = if !cfg.mode.uses_embedding() {
        None
    } else if let Some(path) = &a.embeddings {
        let f = File::open(path).with_context(|| format!("[input] {}", path.display()))?;
        let e = import_embeddings(BufReader::new(f))
            .with_context(|| format!("[input] {}", path.display()))?;
        Some(e.into())
    } else {
        cfg.skipgram.validate().context("[config]")?;
        Some(embed_graphs(&graphs, cfg.inducer, &cfg.skipgram, exec).context("[embed]")?)
    };
    let inputs =
        ExperimentInputs::prepare(&graphs, data, embeddings.as_ref(), contexts, &cfg, exec)
            .context("[features]")?;
    let per_seed: Vec<RunMetrics> = exec
        .try_map(&a.seeds, |&s| run_experiment(&inputs, &cfg, s))
        .context("[train-eval]")?;
    let (_, summary) = repeat_runs(&a.seeds, Exec::Sequential, |s| {
        let m = per_seed
            .iter()
            .find(|m| m.seed == s)
            .expect("every seed ran");
        Ok::<_, EvalError>(m.to_map())
    })
    .context("[train-eval]")?;

    let mut csv = create(&a.out, "metrics.csv")?;
    writeln!(csv, "seed,train_auroc,test_auroc,n_train,n_test")?;
    for m in &per_seed {
        writeln!(
            csv,
            "{},{:.17e},{:.17e},{},{}",
            m.seed, m.train_auroc, m.test_auroc, m.n_train, m.n_test
        )?;
    }
    csv.flush()?;

    let mut report = String::new();
    writeln!(report, "mode\t{}\nsplit\t{}", cfg.mode, cfg.split)?;
    if let Some((na, nb)) = per_seed.first().and_then(|m| m.clusters) {
        writeln!(report, "|A|\t{na}\n|B|\t{nb}")?;
    }
    writeln!(report, "seed\ttrain_auroc\ttest_auroc\t|Y_train|\t|Y_test|")?;
    for m in &per_seed {
        writeln!(
            report,
            "{}\t{:.4}\t{:.4}\t{}\t{}",
            m.seed, m.train_auroc, m.test_auroc, m.n_train, m.n_test
        )?;
    }
    for (name, s) in &summary {
        match s.std {
            Some(sd) => writeln!(report, "{name}\t{:.4} ± {:.4}", s.mean, sd)?,
            None => writeln!(report, "{name}\t{:.4}", s.mean)?,
        }
    }
    print!("{report}");
    let mut w = create(&a.out, "summary.txt")?;
    w.write_all(report.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, exec: Exec) -> Result<()> {
    let cfg = experiment_config(&a.scorer, &a.skipgram, &a.fp, a.seed);
    let graphs = load_drugs(&a.drugs)?;
    let data = load_triples(&a.triples)?;
    let contexts = load_contexts(&a.scorer)?;
    let rows = ablation_sweep(
        a.kind,
        &cfg,
        &graphs,
        &data,
        contexts.as_ref(),
        &a.seeds,
        exec,
    )
    .context("[ablate]")?;
    let name = format!("ablation_{}.csv", a.kind);
    write_ablation_csv(create(&a.out, &name)?, &rows).context("[output]")?;
    let mut w = create(&a.out, &format!("ablation_{}_summary.csv", a.kind))?;
    writeln!(w, "setting,mean_auroc,std_auroc,runs")?;
    for s in summarize_ablation(&rows) {
        let sd = s.std.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(w, "{},{:.6},{sd},{}", s.setting, s.mean, s.runs)?;
        println!(
            "{}\t{:.4} ± {}",
            s.setting,
            s.mean,
            if sd.is_empty() { "-" } else { &sd }
        );
    }
    w.flush()?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let data = generate(&SynthConfig {
        n_drugs: a.n_drugs,
        n_contexts: a.n_contexts,
        n_triples: a.n_triples,
        seed: a.seed,
        slope: a.slope,
    })
    .context("[synth]")?;
    data.write_drugs(create(&a.out, "drugs.tsv")?)?;
    data.triples
        .write_csv(create(&a.out, "triples.csv")?)
        .context("[output]")?;
    let pos = data.triples.labels().iter().filter(|&&l| l == 1).count();
    println!(
        "wrote {} drugs and {} triples ({pos} positive)",
        data.drugs.len(),
        data.triples.len()
    );
    Ok(())
}
