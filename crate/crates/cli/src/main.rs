//! `mprs`: train prior sets, encode/decode images, benchmark, dump figures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mprs::bench::{cdf_dump, segmentation_map, stage_timings, CSV_HEADER};
use mprs::codec::{load_tables, Codec};
use mprs::coder::{encode_indices, encode_latent, select_priors, CostTable, LookupCounter};
use mprs::competition::{fit, FitReport, TrainerConfig, TrainerState};
use mprs::transform::{
    sample_synthetic, ImageLatentSource, LatentSource, PlanePolicy, SyntheticSource,
    SyntheticSourceSpec, TransformConfig, TRANSFORM_CHANNELS,
};
use mprs::{CdfTableSet, Error, Image, MonotoneCdfParams, QuantizedLatent, Result, SymbolAlphabet};

#[derive(Parser)]
#[command(name = "mprs", version, about = "Multi-prior learned entropy coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a prior set and write `<out>.cpm` parameters plus `<out>.cdf` tables.
    Train(TrainArgs),
    /// Compress a PGM/PPM image into an `.mprs` stream.
    Encode(EncodeArgs),
    /// Reconstruct an image from an `.mprs` stream.
    Decode(DecodeArgs),
    /// Per-image CSV of rate, distortion, stage timings and lookup counts.
    Bench(BenchArgs),
    /// Color every 16x16 patch by the prior that codes it.
    Segmap(SegmapArgs),
    /// Summarize a model and optionally dump per-prior CDF CSVs.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticKind {
    /// One regime, uniform over `--symbols` values.
    Uniform,
    /// `--regimes` well separated Laplacian regimes.
    Regimes,
    /// A narrow and a wide regime around zero.
    NarrowWide,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Train on a synthetic latent source instead of images.
    #[arg(long, value_enum)]
    synthetic: Option<SyntheticKind>,
    #[arg(long, default_value_t = 4)]
    regimes: usize,
    #[arg(long, default_value_t = 8)]
    symbols: usize,
    /// Side of the synthetic latent grid, in locations.
    #[arg(long, default_value_t = 16)]
    grid: usize,
}

impl SyntheticArgs {
    fn spec(&self, c_l: usize, seed: u64) -> Result<Option<SyntheticSourceSpec>> {
        let Some(kind) = self.synthetic else {
            return Ok(None);
        };
        if c_l == 0 || self.grid == 0 {
            return Err(usage("--c-l and --grid must be at least 1"));
        }
        Ok(Some(match kind {
            SyntheticKind::Uniform if self.symbols >= 1 => {
                SyntheticSourceSpec::uniform(c_l, self.symbols, seed)
            }
            SyntheticKind::Regimes if self.regimes >= 1 => {
                SyntheticSourceSpec::separated_regimes(c_l, self.regimes, seed)
            }
            SyntheticKind::NarrowWide => SyntheticSourceSpec::narrow_wide(c_l, seed),
            _ => return Err(usage("--symbols and --regimes must be at least 1")),
        }))
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Images or directories of PGM/PPM images.
    images: Vec<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 64)]
    n_cdf: usize,
    #[arg(long, default_value_t = 256)]
    c_l: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training crop side for images, in latent locations.
    #[arg(long, default_value_t = 16)]
    crop: usize,
    /// Code the three color planes separately instead of luma only.
    #[arg(long)]
    rgb: bool,
    /// Output path stem; `.cpm` and `.cdf` are appended.
    #[arg(long)]
    out: PathBuf,
    /// Also write the training log here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    image: PathBuf,
    /// `.cdf` table file or `.cpm` parameter file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    rgb: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    stream: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Images or directories of PGM/PPM images.
    images: Vec<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    /// Held-out synthetic latents to code.
    #[arg(long, default_value_t = 4)]
    samples: u64,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    rgb: bool,
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmapArgs {
    image: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    rgb: bool,
    /// Palette seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    model: PathBuf,
    /// Directory for `prior_NNN.csv` CDF dumps.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn transform_config(delta: f64, rgb: bool) -> Result<TransformConfig> {
    let planes = if rgb {
        PlanePolicy::Independent
    } else {
        PlanePolicy::Luma
    };
    TransformConfig::new(delta, planes)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Expands directories into their PNM files, sorted by name.
fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.is_file() && is_image(p));
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn image_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().replace(',', "_"))
        .unwrap_or_default()
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn train(args: TrainArgs) -> Result<()> {
    if args.n_cdf == 0 {
        return Err(usage("--n-cdf must be at least 1"));
    }
    if args.n_cdf > u16::MAX as usize {
        return Err(usage("--n-cdf is too large"));
    }
    if args.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let spec = args.synthetic.spec(args.c_l, args.seed)?;
    if spec.is_some() && !args.images.is_empty() {
        return Err(usage("give either images or --synthetic, not both"));
    }

    let (mut source, validation): (Box<dyn LatentSource>, Vec<QuantizedLatent>) = match spec {
        Some(spec) => {
            let grid = args.synthetic.grid;
            let validation = (0..4)
                .map(|i| {
                    let held_out = SyntheticSourceSpec {
                        seed: spec.seed.wrapping_add(1000 + i),
                        ..spec.clone()
                    };
                    sample_synthetic(&held_out, grid, grid).latent
                })
                .collect();
            (Box::new(SyntheticSource::new(spec, grid, grid)), validation)
        }
        None => {
            if args.c_l != TRANSFORM_CHANNELS {
                return Err(usage(format!(
                    "image training needs --c-l {TRANSFORM_CHANNELS}, the transform's channel count"
                )));
            }
            let paths = collect_images(&args.images)?;
            if paths.is_empty() {
                return Err(usage("no training images (pass images or --synthetic)"));
            }
            let images = paths.iter().map(Image::load).collect::<Result<Vec<_>>>()?;
            let cfg = transform_config(args.delta, args.rgb)?;
            let mut source = ImageLatentSource::from_images(&images, &cfg, args.crop, args.seed)?;
            let validation = (0..4).map(|_| source.next_latent()).collect();
            (Box::new(source), validation)
        }
    };

    let (lo, hi) = source.symbol_range();
    let alphabet = SymbolAlphabet::from_observed(lo, hi)?;
    let mut params = MonotoneCdfParams::init(args.n_cdf, args.c_l, alphabet, args.seed)?;
    let mut state = TrainerState::new(&params, TrainerConfig::default())?;
    let report: FitReport = fit(&mut state, &mut params, source.as_mut(), args.steps, &validation)?;
    // Freeze what the .cpm file holds (f32 values), so both files agree.
    let params = MonotoneCdfParams::from_bytes(&params.to_bytes())?;
    let tables = params.freeze(alphabet)?;

    let model_path = with_suffix(&args.out, ".cpm");
    let table_path = with_suffix(&args.out, ".cdf");
    params.save(&model_path)?;
    tables.save(&table_path)?;
    if let Some(path) = &args.report {
        fs::write(path, &report.log)?;
    }
    print!("{}", report.log);
    println!(
        "final rate {:.4} bits/symbol (initial {:.4}, best at step {}), {} revivals",
        report.best_rate, report.initial_rate, report.best_step, report.total_revivals
    );
    println!("alphabet [{}, {}]", alphabet.y_min(), alphabet.y_max());
    println!("model hash {}", hex(&tables.content_hash()));
    println!("wrote {} and {}", model_path.display(), table_path.display());
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let codec = Codec::load(&args.model)?;
    let image = Image::load(&args.image)?;
    let cfg = transform_config(args.delta, args.rgb)?;
    let encoded = codec.encode(&image, &cfg)?;
    fs::write(&args.out, &encoded.stream)?;

    let pixels = (image.width() * image.height()).max(1) as f64;
    let bpp = |bytes: usize| 8.0 * bytes as f64 / pixels;
    let t = &encoded.timings;
    println!(
        "{}x{} -> {} bytes, {:.4} bpp (index map {} bytes = {:.6} bpp, payload {} bytes)",
        image.width(),
        image.height(),
        encoded.stream.len(),
        bpp(encoded.stream.len()),
        encoded.index_bytes,
        bpp(encoded.index_bytes),
        encoded.payload_bytes
    );
    if encoded.clamped_symbols > 0 {
        println!("warning: {} symbols clamped into the model alphabet", encoded.clamped_symbols);
    }
    println!(
        "stages (s): transform {:.6}, prior select {:.6}, cdf gather {:.6}, entropy {:.6}, total {:.6}",
        t.transform.as_secs_f64(),
        t.prior_select.as_secs_f64(),
        t.cdf_gather.as_secs_f64(),
        t.entropy_code.as_secs_f64(),
        t.total.as_secs_f64()
    );
    println!(
        "lookups: {} index, {} cdf gathers",
        encoded.lookups.index_lookups, encoded.lookups.cdf_gathers
    );
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<()> {
    let codec = Codec::load(&args.model)?;
    let stream = fs::read(&args.stream)?;
    let decoded = codec.decode(&stream)?;
    decoded.image.save(&args.out)?;
    let t = &decoded.timings;
    println!(
        "{}x{} decoded, stages (s): index map {:.6}, cdf gather {:.6}, entropy {:.6}, transform {:.6}, total {:.6}",
        decoded.image.width(),
        decoded.image.height(),
        t.prior_select.as_secs_f64(),
        t.cdf_gather.as_secs_f64(),
        t.entropy_code.as_secs_f64(),
        t.transform.as_secs_f64(),
        t.total.as_secs_f64()
    );
    Ok(())
}

const SYNTHETIC_CSV_HEADER: &str =
    "sample,h_l,w_l,c_l,n_cdf,payload_bytes,index_bytes,bits_per_symbol";

/// Codes held-out synthetic latents with the frozen tables.
fn bench_synthetic(args: &BenchArgs, spec: SyntheticSourceSpec) -> Result<String> {
    let tables: CdfTableSet = load_tables(&args.model)?;
    if tables.c_l() != spec.c_l {
        return Err(usage(format!(
            "model has {} channels, the synthetic source {}",
            tables.c_l(),
            spec.c_l
        )));
    }
    if args.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let costs = CostTable::new(&tables);
    let grid = args.synthetic.grid;
    let mut csv = format!("{SYNTHETIC_CSV_HEADER}\n");
    for i in 0..args.samples {
        let held_out = SyntheticSourceSpec {
            seed: spec.seed.wrapping_add(1000 + i),
            ..spec.clone()
        };
        let latent = sample_synthetic(&held_out, grid, grid).latent;
        let idx = select_priors(&latent, &costs, &mut LookupCounter::default())?;
        let payload = encode_latent(&latent, &idx, &tables)?;
        let index = encode_indices(&idx, tables.n_cdf())?;
        let rate = 8.0 * (payload.len() + index.len()) as f64 / latent.shape().len() as f64;
        writeln!(
            csv,
            "{i},{grid},{grid},{},{},{},{},{rate:.6}",
            spec.c_l,
            tables.n_cdf(),
            payload.len(),
            index.len()
        )
        .expect("string write");
    }
    Ok(csv)
}

fn bench(args: BenchArgs) -> Result<()> {
    if let Some(spec) = args.synthetic.spec(args.synthetic_c_l()?, args.seed)? {
        if !args.images.is_empty() {
            return Err(usage("give either images or --synthetic, not both"));
        }
        let csv = bench_synthetic(&args, spec)?;
        return write_text(args.out.as_deref(), &csv);
    }
    let paths = collect_images(&args.images)?;
    if paths.is_empty() {
        return Err(usage("no images to benchmark"));
    }
    let codec = Codec::load(&args.model)?;
    let cfg = transform_config(args.delta, args.rgb)?;
    let mut csv = format!("{CSV_HEADER}\n");
    for path in &paths {
        let image = Image::load(path)?;
        let report = stage_timings(&codec, &image, &cfg, args.runs)?;
        csv.push_str(&report.csv_row(&image_name(path)));
        csv.push('\n');
    }
    write_text(args.out.as_deref(), &csv)
}

impl BenchArgs {
    /// Synthetic benches take the channel count from the model.
    fn synthetic_c_l(&self) -> Result<usize> {
        if self.synthetic.synthetic.is_none() {
            return Ok(1);
        }
        Ok(load_tables(&self.model)?.c_l())
    }
}

fn segmap(args: SegmapArgs) -> Result<()> {
    let codec = Codec::load(&args.model)?;
    let image = Image::load(&args.image)?;
    let encoded = codec.encode(&image, &transform_config(args.delta, args.rgb)?)?;
    let n_cdf = codec.tables().n_cdf();
    let map = segmentation_map(&encoded.idx, n_cdf, args.seed)?;
    map.save(&args.out)?;
    let hist = encoded.idx.histogram(n_cdf);
    let used = hist.iter().filter(|&&n| n > 0).count();
    println!(
        "{}x{} map, {used} of {n_cdf} priors in use, wrote {}",
        map.width(),
        map.height(),
        args.out.display()
    );
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let tables = load_tables(&args.model)?;
    let alphabet = tables.alphabet();
    println!("priors {}", tables.n_cdf());
    println!("channels {}", tables.c_l());
    println!("alphabet [{}, {}] ({} symbols)", alphabet.y_min(), alphabet.y_max(), alphabet.len());
    println!("model hash {}", hex(&tables.content_hash()));
    if let Some(dir) = &args.out {
        let written = cdf_dump(&tables, dir)?;
        println!("wrote {} CDF files to {}", written.len(), dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => bench(a),
        Command::Segmap(a) => segmap(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
