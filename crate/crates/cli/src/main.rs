use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use speech_attrib::aggregate::{aggregate, attribution_stats, compare_stats, DisplayMode, DEFAULT_HEAD_FRAMES};
use speech_attrib::attribution::{
    attribute_windows, attribution_to_json, build_background, letter_windows, read_attribution_json,
    resolve_targets, write_attribution_csv, BackgroundSample, LrpConfig, Method, MethodConfig, ShapConfig,
    TargetSpec, DEFAULT_EPSILON, DEFAULT_PERMUTATIONS,
};
use speech_attrib::demo::{synth_utterance, train_demo_model};
use speech_attrib::features::{make_windows, read_wav, write_wav, FrameWindow, MfccExtractor};
use speech_attrib::model::{load_model, save_model, CharSet, ModelParams};
use speech_attrib::render::{export_csv, render_heatmap, RenderSpec, DEFAULT_CLIP_PERCENTILE};
use speech_attrib::verify::{run_suite, Suite, VerifyOptions};

const THREADS_ENV: &str = "ATTRIB_THREADS";
const DEFAULT_MODEL: &str = "models/demo.json";

#[derive(Parser)]
#[command(name = "speech-attrib", version, about = "Attributions for an MFCC-window character classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute every window of a clip and render the chosen aggregation.
    Attribute(AttributeArgs),
    /// Compare magnitude statistics of two attribution files.
    Compare(CompareArgs),
    /// Run the oracle property suites.
    Verify(VerifyArgs),
    /// Train the demonstration model on synthetic audio.
    TrainDemo(TrainDemoArgs),
    /// Extract MFCC features of a clip to CSV.
    Features(FeaturesArgs),
}

#[derive(Args)]
struct AttributeArgs {
    /// 16 kHz mono 16-bit WAV file.
    input: PathBuf,
    #[arg(long, default_value = DEFAULT_MODEL)]
    model: PathBuf,
    #[arg(long, default_value = "lrp", value_parser = parse_method)]
    method: Method,
    /// relative:<j>, per-frame or per-window.
    #[arg(long, default_value = "per-window", value_parser = parse_display)]
    display: DisplayMode,
    /// argmax or char:<c> (char:space, char:hyphen).
    #[arg(long, default_value = "argmax", value_parser = parse_target)]
    target: TargetSpec,
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = parse_epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    permutations: usize,
    /// Required with --method shap.
    #[arg(long, required_if_eq("method", "shap"))]
    seed: Option<u64>,
    /// WAV files whose letter windows form the SHAP background; defaults to
    /// the input clip itself.
    #[arg(long)]
    background: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CLIP_PERCENTILE, value_parser = parse_clip)]
    clip_percentile: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HEAD_FRAMES)]
    head_frames: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    only: Option<Suite>,
    #[arg(long, default_value_t = VerifyOptions::default().seed)]
    seed: u64,
    /// Test hook: shift every LRP denominator by this amount.
    #[arg(long, hide = true, default_value_t = 0.0)]
    inject_lrp_shift: f64,
}

#[derive(Args)]
struct TrainDemoArgs {
    #[arg(long, default_value = DEFAULT_MODEL)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Also write a synthetic clip of this phrase to --clip-out.
    #[arg(long, default_value = "hello world", requires = "clip_out")]
    phrase: String,
    #[arg(long)]
    clip_out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    input: PathBuf,
    /// MFCC matrix as CSV (N x 26).
    #[arg(long)]
    out: PathBuf,
    /// Optional heatmap of the raw coefficients.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_display(s: &str) -> Result<DisplayMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_target(s: &str) -> Result<TargetSpec, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    LrpConfig::with_epsilon(v).map(|c| c.epsilon).map_err(|e| e.to_string())
}

fn parse_clip(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    let spec = RenderSpec {
        clip_percentile: p,
        ..RenderSpec::default()
    };
    spec.validate().map(|_| p).map_err(|e| e.to_string())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn windows_of(path: &Path) -> Result<Vec<FrameWindow>> {
    let clip = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    let mfcc = MfccExtractor::new()
        .compute(&clip)
        .with_context(|| format!("features of {}", path.display()))?;
    Ok(make_windows(&mfcc))
}

fn shap_background(model: &ModelParams, own: &[FrameWindow], sources: &[PathBuf]) -> Result<BackgroundSample> {
    let mut pool = Vec::new();
    for path in sources {
        pool.extend(windows_of(path)?);
    }
    let pool: &[FrameWindow] = if sources.is_empty() { own } else { &pool };
    let letters = letter_windows(model, pool)?;
    let bg = if letters.is_empty() {
        build_background(pool)?
    } else {
        build_background(letters)?
    };
    Ok(bg)
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(None),
    }
}

fn cmd_attribute(args: &AttributeArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let windows = windows_of(&args.input)?;

    let config = match args.method {
        Method::Saliency => MethodConfig::Saliency,
        Method::Lrp => MethodConfig::Lrp(LrpConfig::with_epsilon(args.epsilon)?),
        Method::Shap => {
            let seed = args.seed.context("--seed is required with --method shap")?;
            let bg = shap_background(&model, &windows, &args.background)?;
            MethodConfig::Shap(ShapConfig::new(args.permutations, seed, bg)?)
        }
    };

    let tensor = attribute_windows(&model, &windows, args.target, &config)?;
    let aggregated = aggregate(&tensor, args.display)?;
    let predicted: Vec<char> = resolve_targets(&model, &windows, TargetSpec::Argmax)?
        .into_iter()
        .map(|c| CharSet::symbol(c).unwrap_or('?'))
        .collect();
    let spec = RenderSpec {
        clip_percentile: args.clip_percentile,
        ..RenderSpec::default()
    };
    let heatmap = render_heatmap(aggregated.values(), &spec, Some(&predicted))?;
    let json_text = attribution_to_json(&tensor, &config);

    // Everything is computed before the first file is written.
    let out = &args.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let attribution_json = out.join("attribution.json");
    let attribution_csv = out.join("attribution.csv");
    let aggregated_csv = out.join("aggregated.csv");
    let heatmap_svg = out.join("heatmap.svg");
    fs::write(&attribution_json, &json_text)?;
    write_attribution_csv(&tensor, &attribution_csv)?;
    export_csv(aggregated.values(), &aggregated_csv)?;
    fs::write(&heatmap_svg, heatmap.svg_bytes())?;

    let background: Vec<_> = args
        .background
        .iter()
        .map(|p| Ok(json!({ "path": p, "sha256": file_hash(p)? })))
        .collect::<Result<_>>()?;
    let mut outputs = serde_json::Map::new();
    for path in [&attribution_json, &attribution_csv, &aggregated_csv, &heatmap_svg] {
        let name = path.file_name().expect("joined file name").to_string_lossy().into_owned();
        outputs.insert(name, json!(file_hash(path)?));
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": "attribute",
        "config": {
            "method": args.method,
            "display": args.display.to_string(),
            "target": args.target.to_string(),
            "epsilon": args.epsilon,
            "permutations": args.permutations,
            "seed": args.seed,
            "clip_percentile": args.clip_percentile,
            "background": if args.background.is_empty() { "input letter windows" } else { "files" },
        },
        "inputs": {
            "wav": { "path": args.input, "sha256": file_hash(&args.input)? },
            "model": { "path": args.model, "sha256": file_hash(&args.model)? },
            "background": background,
        },
        "windows": tensor.num_windows(),
        "clip_value": heatmap.value_range.1,
        "outputs": outputs,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("{} windows attributed with {}; output in {}", tensor.num_windows(), args.method, out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (a, _) = read_attribution_json(&args.a).with_context(|| format!("reading {}", args.a.display()))?;
    let (b, _) = read_attribution_json(&args.b).with_context(|| format!("reading {}", args.b.display()))?;
    if a.method() != b.method() {
        bail!("cannot compare {} attributions with {} attributions", a.method(), b.method());
    }
    if a.num_windows() != b.num_windows() {
        return Err(speech_attrib::Error::ShapeMismatch(format!(
            "{} windows vs {} windows",
            a.num_windows(),
            b.num_windows()
        ))
        .into());
    }
    let delta = compare_stats(
        &attribution_stats(&a, args.head_frames)?,
        &attribution_stats(&b, args.head_frames)?,
    )?;
    print!("{}", delta.to_table());
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&delta)? + "\n")?;
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let opts = VerifyOptions {
        seed: args.seed,
        lrp_denominator_shift: args.inject_lrp_shift,
    };
    let suites: Vec<Suite> = match args.only {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    let mut all = true;
    for suite in suites {
        for outcome in run_suite(suite, &opts) {
            all &= outcome.passed;
            println!(
                "{} [{}] {}: {}",
                if outcome.passed { "PASS" } else { "FAIL" },
                outcome.suite,
                outcome.name,
                outcome.detail
            );
        }
    }
    Ok(all)
}

fn cmd_train_demo(args: &TrainDemoArgs) -> Result<()> {
    let (model, report) = train_demo_model(args.seed, args.epochs, args.learning_rate)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, &args.out)?;
    println!(
        "trained on {} windows for {} epochs: loss {:.4} -> {:.4}, accuracy {:.3}; saved {}",
        report.samples,
        report.epochs,
        report.initial_loss,
        report.final_loss,
        report.accuracy,
        args.out.display()
    );
    if let Some(path) = &args.clip_out {
        let (clip, _) = synth_utterance(&args.phrase, args.seed)?;
        write_wav(path, &clip)?;
        println!("wrote {:.2} s clip to {}", clip.duration_secs(), path.display());
    }
    Ok(())
}

fn cmd_features(args: &FeaturesArgs) -> Result<()> {
    let clip = read_wav(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mfcc = MfccExtractor::new().compute(&clip)?;
    export_csv(mfcc.values(), &args.out)?;
    if let Some(svg) = &args.svg {
        fs::write(svg, render_heatmap(mfcc.values(), &RenderSpec::default(), None)?.svg_bytes())?;
    }
    println!("{} frames x 26 coefficients written to {}", mfcc.num_frames(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = thread_count()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Attribute(a) => cmd_attribute(a).map(|_| true),
        Command::Compare(a) => cmd_compare(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::TrainDemo(a) => cmd_train_demo(a).map(|_| true),
        Command::Features(a) => cmd_features(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
