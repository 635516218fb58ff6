use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use vqsynth::balance::balance;
use vqsynth::config::PipelineConfig;
use vqsynth::miner::Corpus;
use vqsynth::pipeline::{generate, Resources};
use vqsynth::program::{parse_program, Executor};
use vqsynth::record::{read_records, write_records, ExampleRecord};
use vqsynth::scene::parse_scene_graphs;
use vqsynth::split::{build_split, partition_by_images, verify_split, BasePartition, SplitReport, SplitSpec};
use vqsynth::stats::compute_stats;

#[derive(Parser)]
#[command(name = "vqsynth", version, about = "Multi-image question synthesis from scene graphs")]
struct Cli {
    /// Global seed; overrides the config file and split specs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for `split`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate scene graphs and persist them with their masked index.
    Ingest { scenes: PathBuf },
    /// Generate examples from an ingested corpus or a scene file.
    Generate { corpus: PathBuf },
    /// Execute a program over the scenes of a file and print the answer.
    Exec { program: PathBuf, scenes: PathBuf },
    /// Downsample examples per template with flattened answers.
    Balance { examples: PathBuf },
    /// Build train/dev/test files and a report.
    Split {
        examples: PathBuf,
        /// Split spec (key = value lines).
        #[arg(long)]
        spec: PathBuf,
        /// Examples generated from evaluation-source scenes; without it the
        /// input is partitioned by image.
        #[arg(long)]
        eval: Option<PathBuf>,
    },
    /// Print corpus statistics.
    Stats { examples: PathBuf },
    /// Re-audit a split directory.
    Verify {
        dir: PathBuf,
        /// Defaults to the spec stored in the directory.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct IngestFile {
    header: serde_json::Value,
    corpus: Corpus,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    Ok(c)
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().context("--out is required")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn read_examples(path: &Path) -> Result<(Option<serde_json::Value>, Vec<ExampleRecord>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn write_examples(path: &Path, header: &serde_json::Value, records: &[ExampleRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_records(&mut w, Some(header), records)?;
    w.flush()?;
    Ok(())
}

fn read_scenes(path: &Path) -> Result<Vec<vqsynth::SceneGraph>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_scene_graphs(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_corpus(path: &Path, config: &PipelineConfig) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with("{\"header\"") {
        let f: IngestFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(f.corpus.reindexed());
    }
    let scenes = parse_scene_graphs(text.as_bytes()).with_context(|| format!("reading {}", path.display()))?;
    Ok(Corpus::new(scenes, config.limits()))
}

fn cmd_ingest(cli: &Cli, scenes: &Path) -> Result<()> {
    let c = config(cli)?;
    let scenes = read_scenes(scenes)?;
    let corpus = Corpus::new(scenes, c.limits());
    let n = corpus.len();
    let keys = corpus.index().key_count();
    let file = IngestFile {
        header: json!({"stage": "ingest", "config": c.header()}),
        corpus,
    };
    let mut w = create(out_path(cli)?)?;
    serde_json::to_writer(&mut w, &file)?;
    writeln!(w)?;
    w.flush()?;
    eprintln!("ingested {n} scenes, {keys} index keys");
    Ok(())
}

fn cmd_generate(cli: &Cli, corpus: &Path) -> Result<()> {
    let c = config(cli)?;
    let res = Resources::load(&c)?;
    let corpus = load_corpus(corpus, &c)?;
    let (records, summary) = generate(&corpus, &c, &res);
    let header = json!({"stage": "generate", "config": c.header()});
    write_examples(out_path(cli)?, &header, &records)?;
    eprintln!(
        "{} records ({} paired) from {} source subgraphs",
        summary.records, summary.paired, summary.subgraphs
    );
    for (t, n) in &summary.by_template {
        eprintln!("  {t} {n}");
    }
    for (reason, n) in &summary.skips {
        eprintln!("  skipped {reason}: {n}");
    }
    Ok(())
}

fn cmd_exec(cli: &Cli, program: &Path, scenes: &Path) -> Result<()> {
    let c = config(cli)?;
    let res = Resources::load(&c)?;
    let text = fs::read_to_string(program).with_context(|| format!("reading {}", program.display()))?;
    let p = parse_program(&text).with_context(|| format!("parsing {}", program.display()))?;
    let scenes = read_scenes(scenes)?;
    match Executor::new(&res.categories).run(&p, &scenes) {
        Ok(a) => {
            println!("{a}");
            Ok(())
        }
        Err(e) => bail!("{e}"),
    }
}

fn cmd_balance(cli: &Cli, examples: &Path) -> Result<()> {
    let seed = cli.seed.unwrap_or(config(cli)?.seed);
    let (h, records) = read_examples(examples)?;
    let kept = balance(&records, seed);
    let header = json!({"stage": "balance", "seed": seed, "input": h});
    write_examples(out_path(cli)?, &header, &kept)?;
    eprintln!("kept {} of {} records", kept.len(), records.len());
    Ok(())
}

fn read_spec(path: &Path, seed: Option<u64>) -> Result<SplitSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = SplitSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn print_report(r: &SplitReport) {
    eprintln!("mode {}: train {} dev {} test {} filtered {}", r.mode, r.train, r.dev, r.test, r.filtered);
    if let Some(n) = r.train_property_count {
        eprintln!("train property count = {n}");
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for v in &r.violations {
        eprintln!("violation: {v}");
    }
}

fn cmd_split(cli: &Cli, examples: &Path, spec: &Path, eval: Option<&Path>) -> Result<()> {
    let spec = read_spec(spec, cli.seed)?;
    let (_, records) = read_examples(examples)?;
    let base = match eval {
        Some(e) => BasePartition {
            train: records,
            eval: read_examples(e)?.1,
            filtered: 0,
        },
        None => partition_by_images(&records, spec.eval_fraction, spec.seed),
    };
    let out = build_split(&base, &spec)?;
    let mut report = verify_split(&out.train, &out.dev, &out.test, &spec, &out.holdout, out.filtered);
    for w in out.warnings.iter().rev() {
        if !report.warnings.contains(w) {
            report.warnings.insert(0, w.clone());
        }
    }
    let dir = out_path(cli)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let spec_text = spec.to_text();
    for (name, part) in [("train", &out.train), ("dev", &out.dev), ("test", &out.test)] {
        let header = json!({"stage": "split", "part": name, "spec": spec_text});
        write_examples(&dir.join(format!("{name}.jsonl")), &header, part)?;
    }
    fs::write(dir.join("spec.txt"), &spec_text)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    print_report(&report);
    if !report.passed {
        bail!("split failed its audit");
    }
    Ok(())
}

fn cmd_stats(cli: &Cli, examples: &Path) -> Result<()> {
    let (_, records) = read_examples(examples)?;
    let stats = compute_stats(&records);
    print!("{}", stats.to_report());
    if let Some(p) = &cli.out {
        let mut w = create(p)?;
        writeln!(w, "{}", json!({"header": {"stage": "stats", "input": examples.display().to_string()}}))?;
        writeln!(w, "{}", serde_json::to_string(&stats)?)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, dir: &Path, spec: Option<&Path>) -> Result<()> {
    let spec_path = spec.map(Path::to_path_buf).unwrap_or_else(|| dir.join("spec.txt"));
    let spec = read_spec(&spec_path, cli.seed)?;
    let stored: SplitReport = match fs::read_to_string(dir.join("report.json")) {
        Ok(t) => serde_json::from_str(&t).context("parsing report.json")?,
        Err(_) => SplitReport::default(),
    };
    let part = |name: &str| read_examples(&dir.join(format!("{name}.jsonl"))).map(|(_, r)| r);
    let (train, dev, test) = (part("train")?, part("dev")?, part("test")?);
    let report = verify_split(&train, &dev, &test, &spec, &stored.holdout(), stored.filtered);
    print_report(&report);
    if let Some(p) = &cli.out {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if !report.passed {
        bail!("{} violations", report.violations.len());
    }
    println!("pass");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Ingest { scenes } => cmd_ingest(cli, scenes),
        Command::Generate { corpus } => cmd_generate(cli, corpus),
        Command::Exec { program, scenes } => cmd_exec(cli, program, scenes),
        Command::Balance { examples } => cmd_balance(cli, examples),
        Command::Split { examples, spec, eval } => cmd_split(cli, examples, spec, eval.as_deref()),
        Command::Stats { examples } => cmd_stats(cli, examples),
        Command::Verify { dir, spec } => cmd_verify(cli, dir, spec.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
