use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use freqmia::attacks::{read_scores_csv, run_attack, write_scores_csv, NormOrder};
use freqmia::diffusion::{read_model, train_toy_denoiser, write_model};
use freqmia::evaluation::{
    compute_roc, proposition_mc_verify, write_roc_csv, McConfig, McMode, MetricsReport, PropositionInputs,
    ScoreColumn, ScoreSet,
};
use freqmia::harness::{export_pgm_dir, generate_dataset, render_report, run_experiment, ExperimentConfig, ExperimentReport};
use freqmia::{Error, FilterSpec, Result};

#[derive(Parser)]
#[command(name = "freqmia", version, about = "Frequency-filtered membership inference on toy diffusion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Overrides {
    /// Filter attenuation for every attack.
    #[arg(long = "s")]
    s: Option<f64>,
    /// Filter cut-off radius for every attack.
    #[arg(long = "rt")]
    rt: Option<f64>,
    /// Norm order (1 or 2) for every attack.
    #[arg(long = "q")]
    q: Option<u8>,
    /// Attack timestep for every attack.
    #[arg(long = "t-attack")]
    t_attack: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Wishart,
    Direct,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset and export it as PGM files.
    GenData(Common),
    /// Train the toy denoiser on the member split.
    Train(Common),
    /// Score every sample with the configured attacks.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
        /// Model file; defaults to `<out>/model.fmia`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compute metrics for a score CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the spread-ratio constraint and verify it by simulation.
    VerifyProp {
        #[arg(long)]
        lm: f64,
        #[arg(long)]
        lh: f64,
        #[arg(long)]
        hm: f64,
        #[arg(long)]
        hh: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Wishart)]
        mode: Mode,
    },
    /// Full pipeline: data, training, attacks, metrics and report files.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Render a stored report.json as tables.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(common: &Common, overrides: Option<&Overrides>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(o) = overrides {
        let q = o.q.map(NormOrder::try_from).transpose()?;
        for a in &mut cfg.attacks {
            if o.s.is_some() || o.rt.is_some() {
                let base = a.filter.unwrap_or_default();
                a.filter = Some(FilterSpec::new(o.s.unwrap_or(base.s), o.rt.unwrap_or(base.r_t))?);
            }
            if let Some(q) = q {
                a.q = q;
            }
            if let Some(t) = o.t_attack {
                a.t_attack = t;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenData(common) => {
            let cfg = load_config(&common, None)?;
            let samples = generate_dataset(&cfg.dataset)?;
            export_pgm_dir(&samples, &cfg.output_dir)?;
            println!("wrote {} images to {}", samples.len(), cfg.output_dir.display());
        }
        Command::Train(common) => {
            let cfg = load_config(&common, None)?;
            let sched = cfg.schedule.build()?;
            let members: Vec<_> = generate_dataset(&cfg.dataset)?
                .into_iter()
                .filter(|s| s.member)
                .map(|s| s.image)
                .collect();
            let (model, trace) = train_toy_denoiser(&members, &cfg.model, &cfg.training, &sched)?;
            create_dir(&cfg.output_dir)?;
            let mut buf = Vec::new();
            write_model(&model, &mut buf).expect("in-memory write");
            write(&cfg.output_dir.join("model.fmia"), &buf)?;
            let mut csv = String::from("epoch,loss\n");
            for (i, l) in trace.epoch_losses.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            write(&cfg.output_dir.join("training_loss.csv"), csv.as_bytes())?;
            if let Some(l) = trace.epoch_losses.last() {
                println!("final loss {l:.6}");
            }
        }
        Command::Attack {
            common,
            overrides,
            model,
        } => {
            let cfg = load_config(&common, Some(&overrides))?;
            let sched = cfg.schedule.build()?;
            let model_path = model.unwrap_or_else(|| cfg.output_dir.join("model.fmia"));
            let file = fs::File::open(&model_path).map_err(|e| Error::Io {
                path: model_path.clone(),
                source: e,
            })?;
            let model = read_model(std::io::BufReader::new(file))?;
            let samples = generate_dataset(&cfg.dataset)?;
            if samples[0].image.shape() != model.image_shape() {
                return Err(Error::Config(format!(
                    "model expects images of shape {:?}, dataset has {:?}",
                    model.image_shape(),
                    samples[0].image.shape()
                )));
            }
            create_dir(&cfg.output_dir)?;
            for attack in &cfg.attacks {
                let records = run_attack(&samples, attack, &model, &sched, cfg.evaluation.boundary_radius)?;
                let mut buf = Vec::new();
                write_scores_csv(&records, &mut buf).expect("in-memory write");
                let path = cfg.output_dir.join(format!("scores_{}.csv", attack.kind));
                write(&path, &buf)?;
                println!("{}", path.display());
            }
        }
        Command::Eval { scores, out } => {
            let file = fs::File::open(&scores).map_err(|e| Error::Io {
                path: scores.clone(),
                source: e,
            })?;
            let records = read_scores_csv(file, &scores.display().to_string())?;
            let stem = scores.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mut reports = serde_json::Map::new();
            for (tag, column) in [("raw", ScoreColumn::Raw), ("filtered", ScoreColumn::Filtered)] {
                if column == ScoreColumn::Filtered && records.iter().any(|r| r.score_filtered.is_none()) {
                    continue;
                }
                let set = ScoreSet::from_records(&records, column)?;
                let metrics = MetricsReport::from_set(&set)?;
                if let Some(dir) = &out {
                    create_dir(dir)?;
                    write(&dir.join(format!("metrics_{stem}_{tag}.json")), json(&metrics).as_bytes())?;
                    let mut roc = Vec::new();
                    write_roc_csv(&compute_roc(&set)?, &mut roc).expect("in-memory write");
                    write(&dir.join(format!("roc_{stem}_{tag}.csv")), &roc)?;
                }
                reports.insert(tag.into(), serde_json::to_value(&metrics).expect("serialisable"));
            }
            print!("{}", json(&reports));
        }
        Command::VerifyProp {
            lm,
            lh,
            hm,
            hh,
            samples,
            resamples,
            seed,
            mode,
        } => {
            let inputs = PropositionInputs::new(lm, lh, hm, hh)?;
            let config = McConfig {
                n_samples: samples,
                resamples,
                seed,
                mode: match mode {
                    Mode::Wishart => McMode::Wishart,
                    Mode::Direct => McMode::Direct,
                },
            };
            print!("{}", json(&proposition_mc_verify(&inputs, &config)?));
        }
        Command::Run { common, overrides } => {
            let cfg = load_config(&common, Some(&overrides))?;
            let outcome = run_experiment(&cfg)?;
            print!("{}", render_report(&outcome.report));
            println!("\noutputs in {}", cfg.output_dir.display());
        }
        Command::Report { input } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            let report: ExperimentReport = serde_json::from_str(&text).map_err(|e| Error::Ingestion {
                file: input.display().to_string(),
                reason: e.to_string(),
            })?;
            print!("{}", render_report(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
