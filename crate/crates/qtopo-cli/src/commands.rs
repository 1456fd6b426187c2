//! Command definitions and dispatch.
//!
//! Exit codes: 0 success, 2 usage, 3 data/format, 4 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use qtopo::dataset::{self, Dataset};
use qtopo::fmap;
use qtopo::nn::{self, ActKind, Arch, NetConfig, Network};
use qtopo::pca;
use qtopo::spin::HField;
use qtopo::{chern, rng, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser)]
#[command(
    name = "qtopo",
    about = "Quaternion-based classification of 2D Chern insulators",
    version
)]
pub struct Cli {
    /// Worker threads (default: all cores; env QTOPO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate datasets (train/test/predict corpora or the PCA map set).
    Gen(GenArgs),
    /// Lattice Chern number of a model texture or a stored sample.
    Chern(ChernArgs),
    /// Autocorrelation map of one field, written as CSV and PGM.
    Fmap(FmapArgs),
    /// Run the PCA experiment and emit spectrum/projection/confusion CSVs.
    Pca(PcaArgs),
    /// Train a classifier and write checkpoint plus learning curves.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset (optionally per prediction category).
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Which corpus to generate.
    #[arg(value_parser = ["train", "test", "predict", "pca"])]
    kind: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Field-noise standard deviation (pca kind only).
    #[arg(long, default_value_t = 0.0)]
    sd: f64,
}

#[derive(Args)]
struct ChernArgs {
    /// Vorticity of the model field.
    #[arg(long)]
    c: Option<u32>,
    /// Mass parameter of the model field.
    #[arg(long)]
    m: Option<f64>,
    /// Dataset file to read a sample from instead.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sample index within --input.
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Args)]
struct FmapArgs {
    #[arg(long)]
    c: u32,
    #[arg(long)]
    m: f64,
    /// Field-noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path prefix; writes <prefix>.csv and <prefix>.pgm.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long, default_value_t = 0.0)]
    sd: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of components for projection/confusion outputs.
    #[arg(long, default_value_t = 2)]
    components: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = ["qcnn", "cnn"])]
    arch: String,
    #[arg(long, default_value = "arctan", value_parser = ["arctan", "tanh", "relu"])]
    activation: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    first_layer_gain: Option<f64>,
    /// Directory containing train.qds, val.qds, test.qds.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoint and learning curves.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset file, or a directory of predict_*.qds with --by-category.
    #[arg(long)]
    data: PathBuf,
    /// Evaluate every prediction category found in --data.
    #[arg(long, default_value_t = false)]
    by_category: bool,
    /// Optional CSV report path (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format { .. } | Error::LayerConfig { .. } => EXIT_DATA,
        _ => EXIT_NUMERIC,
    }
}

pub fn run(cli: Cli) -> i32 {
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("QTOPO_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Chern(args) => cmd_chern(args),
        Command::Fmap(args) => cmd_fmap(args),
        Command::Pca(args) => cmd_pca(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn save_with_manifest(
    ds: &Dataset,
    kind: &str,
    seed: u64,
    extra: &[(String, String)],
    dir: &Path,
    stem: &str,
) -> qtopo::Result<()> {
    ds.save(&dir.join(format!("{stem}.qds")))?;
    dataset::write_manifest(ds, kind, seed, extra, &dir.join(format!("{stem}.manifest.txt")))?;
    println!("wrote {stem}.qds ({} samples)", ds.len());
    Ok(())
}

fn cmd_gen(args: GenArgs) -> qtopo::Result<i32> {
    std::fs::create_dir_all(&args.out)?;
    match args.kind.as_str() {
        "train" => {
            let (train, val) = dataset::build_training(args.seed)?;
            save_with_manifest(&train, "train", args.seed, &[], &args.out, "train")?;
            save_with_manifest(&val, "validation", args.seed, &[], &args.out, "val")?;
        }
        "test" => {
            let test = dataset::build_testing(args.seed)?;
            save_with_manifest(&test, "test", args.seed, &[], &args.out, "test")?;
        }
        "predict" => {
            for set in dataset::build_prediction(args.seed)? {
                let flagged: Vec<(String, String)> = set
                    .flagged
                    .iter()
                    .map(|(i, r)| (format!("flagged_{i}"), format!("residual={r:.3e}")))
                    .collect();
                save_with_manifest(
                    &set.dataset,
                    &format!("predict_{}", set.category.name()),
                    args.seed,
                    &flagged,
                    &args.out,
                    &format!("predict_{}", set.category.name()),
                )?;
            }
        }
        "pca" => {
            let maps = pca::build_pca_dataset(args.sd, args.seed)?;
            let path = args.out.join("pca_maps.csv");
            write_pca_maps_csv(&maps, &path)?;
            println!("wrote pca_maps.csv ({} maps, sd={})", maps.len(), args.sd);
        }
        _ => unreachable!("clap validates the kind"),
    }
    Ok(EXIT_OK)
}

fn write_pca_maps_csv(maps: &[(fmap::FMap, i32)], path: &Path) -> qtopo::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "id,label,c,m,sd,values...")?;
    for (i, (map, label)) in maps.iter().enumerate() {
        write!(
            out,
            "{i},{label},{},{},{}",
            map.meta.c, map.meta.m, map.meta.noise_sd
        )?;
        for v in &map.values {
            write!(out, ",{v:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn cmd_chern(args: ChernArgs) -> qtopo::Result<i32> {
    let measurement;
    match (&args.input, args.c, args.m) {
        (Some(path), _, _) => {
            let ds = Dataset::load(path)?;
            let Some(sample) = ds.samples.get(args.index) else {
                eprintln!(
                    "error: index {} out of range ({} samples)",
                    args.index,
                    ds.len()
                );
                return Ok(EXIT_USAGE);
            };
            measurement = chern::chern_measurement(&sample.texture)?;
            println!("chern = {}", measurement.chern);
            println!("residual = {:.3e}", measurement.residual);
            println!("stored_label = {}", sample.chern());
        }
        (None, Some(c), Some(m)) => {
            let field = HField::chern(c, m, qtopo::grid::DEFAULT_L);
            let gap = chern::min_gap(&field);
            let texture = field.normalize(qtopo::spin::model_label(c, m))?;
            measurement = chern::chern_measurement(&texture)?;
            println!("chern = {}", measurement.chern);
            println!("residual = {:.3e}", measurement.residual);
            println!("min_gap = {gap:.6}");
        }
        _ => {
            eprintln!("error: provide either --input (with --index) or both --c and --m");
            return Ok(EXIT_USAGE);
        }
    }
    if measurement.residual > chern::RESIDUAL_LIMIT {
        eprintln!(
            "error: ill-conditioned sum (residual {:.3e})",
            measurement.residual
        );
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

fn cmd_fmap(args: FmapArgs) -> qtopo::Result<i32> {
    let mut field = HField::chern(args.c, args.m, qtopo::grid::DEFAULT_L);
    let region = fmap::GaugeRegion::from_field(&field);
    if args.sd > 0.0 {
        let mut noise_rng = rng::stream(args.seed, &[rng::domain::PCA]);
        field = field.with_noise(args.sd, &mut noise_rng);
    }
    let map = fmap::f_map_in(&field, &region)?.with_provenance(args.sd, args.seed);
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let csv = args.out.with_extension("csv");
    let pgm = args.out.with_extension("pgm");
    map.write_csv(&csv)?;
    map.write_pgm(&pgm)?;
    println!("max|F| = {:.6e}", map.max_abs());
    println!("wrote {} and {}", csv.display(), pgm.display());
    Ok(EXIT_OK)
}

fn cmd_pca(args: PcaArgs) -> qtopo::Result<i32> {
    std::fs::create_dir_all(&args.out)?;
    let maps = pca::build_pca_dataset(args.sd, args.seed)?;
    let labels: Vec<i32> = maps.iter().map(|(_, l)| *l).collect();
    let rows: Vec<Vec<f64>> = maps.iter().map(|(m, _)| m.values.clone()).collect();
    let model = pca::fit(&rows);
    if args.components > model.n_components() {
        eprintln!(
            "error: {} components requested, only {} available",
            args.components,
            model.n_components()
        );
        return Ok(EXIT_USAGE);
    }

    let projections: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| pca::project(&model, r, args.components))
        .collect();
    let report = pca::cluster_report(&projections, &labels);

    pca::write_spectrum_csv(&model.lambdas[..model.lambdas.len().min(16)], &args.out.join("spectrum.csv"))?;
    pca::write_projections_csv(&labels, &projections, &args.out.join("projections.csv"))?;
    pca::write_confusion_csv(&report, &args.out.join("confusion.csv"))?;
    pca::write_report_csv(&report, &args.out.join("report.csv"))?;

    println!(
        "pca sd={} components={} nearest-centroid accuracy={:.4}",
        args.sd, args.components, report.accuracy
    );
    println!("mean-centered only (no per-feature standardization)");
    Ok(EXIT_OK)
}

fn cmd_train(args: TrainArgs) -> qtopo::Result<i32> {
    let arch = Arch::parse(&args.arch).expect("clap validates");
    let activation = ActKind::parse(&args.activation).expect("clap validates");

    let mut config = match arch {
        Arch::QCnn => NetConfig::qcnn(args.seed),
        Arch::Cnn => NetConfig::cnn(args.seed),
    };
    config.activation = activation;
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(lr) = args.lr {
        config.lr = lr;
    }
    if let Some(gain) = args.first_layer_gain {
        config.first_layer_gain = gain;
    }

    let train_set = Dataset::load(&args.data.join("train.qds"))?;
    let val_set = Dataset::load(&args.data.join("val.qds"))?;
    let test_set = Dataset::load(&args.data.join("test.qds"))?;
    if train_set.is_empty() {
        eprintln!("error: training dataset is empty");
        return Ok(EXIT_USAGE);
    }

    let mut net = Network::build(&config);
    println!("arch = {}", config.arch.name());
    println!("parameters = {}", net.param_count());

    let encode = nn::encoder_for(arch);
    let records = nn::train(
        &mut net,
        &train_set.samples,
        &val_set.samples,
        |s| encode(&s.texture),
        |s| s.class as usize,
        config.epochs,
    )?;

    std::fs::create_dir_all(&args.out)?;
    let model_path = args.out.join(format!("{}.qnn", config.arch.name()));
    let curves_path = args.out.join(format!("{}_curves.csv", config.arch.name()));
    nn::checkpoint::save(&net, &model_path)?;
    nn::write_curves_csv(&records, &curves_path)?;

    let (test_acc, _) = nn::evaluate(
        &net,
        &test_set.samples,
        |s| encode(&s.texture),
        |s| s.class as usize,
    )?;
    println!("test_accuracy = {test_acc:.4}");
    println!("wrote {} and {}", model_path.display(), curves_path.display());
    Ok(EXIT_OK)
}

/// Accuracy plus the spread across per-class accuracies within the set.
fn accuracy_with_spread(
    net: &Network,
    ds: &Dataset,
) -> qtopo::Result<(f64, f64, usize)> {
    let encode = nn::encoder_for(net.config.arch);
    let (acc, confusion) = nn::evaluate(
        net,
        &ds.samples,
        |s| encode(&s.texture),
        |s| s.class as usize,
    )?;
    let mut per_class = Vec::new();
    for (truth, row) in confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total > 0 {
            per_class.push(row[truth] as f64 / total as f64);
        }
    }
    let mean = per_class.iter().sum::<f64>() / per_class.len().max(1) as f64;
    let var = per_class
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / per_class.len().max(1) as f64;
    Ok((acc, var.sqrt(), ds.len()))
}

fn cmd_eval(args: EvalArgs) -> qtopo::Result<i32> {
    let net = nn::checkpoint::load(&args.model)?;
    let mut rows: Vec<(String, usize, f64, f64)> = Vec::new();

    if args.by_category {
        for category in dataset::PredictionCategory::ALL {
            let path = args.data.join(format!("predict_{}.qds", category.name()));
            if !path.exists() {
                continue;
            }
            let ds = Dataset::load(&path)?;
            if ds.is_empty() {
                eprintln!("error: dataset {} is empty", path.display());
                return Ok(EXIT_USAGE);
            }
            let (acc, spread, n) = accuracy_with_spread(&net, &ds)?;
            rows.push((category.name().to_string(), n, acc, spread));
        }
        if rows.is_empty() {
            eprintln!("error: no predict_*.qds files in {}", args.data.display());
            return Ok(EXIT_USAGE);
        }
    } else {
        let ds = Dataset::load(&args.data)?;
        if ds.is_empty() {
            eprintln!("error: dataset {} is empty", args.data.display());
            return Ok(EXIT_USAGE);
        }
        let (acc, spread, n) = accuracy_with_spread(&net, &ds)?;
        rows.push(("dataset".to_string(), n, acc, spread));
    }

    let mut csv = String::from("dataset,count,accuracy,per_class_std\n");
    for (name, n, acc, spread) in &rows {
        csv.push_str(&format!("{name},{n},{acc:.6},{spread:.6}\n"));
    }
    print!("{csv}");
    if let Some(out) = &args.out {
        std::fs::write(out, csv)?;
        println!("wrote {}", out.display());
    }
    Ok(EXIT_OK)
}
