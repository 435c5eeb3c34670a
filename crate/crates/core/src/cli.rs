//! Command-line front end.
//!
//! Exit codes: 0 success, 2 I/O, 3 shape/validation/format (including bad
//! flags), 4 layer-state contract. Failures print
//! `{"error":{"kind":..,"message":..}}` on stderr.
//!
//! Defaults for `f`, `momentum`, `window`, `stride` and `eps` can be supplied
//! by a JSON file named in `PSDNORM_CONFIG`; explicit flags take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{run_benchmark, AlignmentConfig, BenchReport, BenchSettings, Method};
use crate::error::{Error, Result};
use crate::geometry::bures_distance;
use crate::io::{psd_to_csv, read_signal, write_signal, LayerKind, StateFile};
use crate::layers::{
    instancenorm_forward, layernorm_forward, Batch, BatchNormLayer, Mode, PsdNormLayer, TmaAligner,
    DEFAULT_BN_EPS, DEFAULT_FILTER_SIZE, DEFAULT_MOMENTUM,
};
use crate::psd::Psd;
use crate::signal::Signal;
use crate::spectral::{center, default_stride, welch_estimate, welch_psd, WelchConfig, WindowKind};
use crate::synth::{
    base_psd, make_shifted_domains, sample_gaussian_with_psd, BasePreset, CorpusParams, DomainSpec,
    GENERATOR,
};

pub const CONFIG_ENV: &str = "PSDNORM_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_STATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "psdnorm",
    version,
    about = "Spectral alignment of multichannel signals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Welch PSD of each input signal.
    Psd(PsdArgs),
    /// Map signals onto a target PSD.
    Align(AlignArgs),
    /// One forward pass of a normalization layer over a batch.
    Layer(LayerArgs),
    /// Synthetic shifted-domain alignment benchmark.
    Bench(BenchArgs),
    /// Generate Gaussian signals with a prescribed PSD.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct WelchArgs {
    /// Segment length and number of PSD bins.
    #[arg(long)]
    pub f: Option<usize>,
    /// Hop between segments (default f/2, at least 1).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<WindowKind>,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub welch: WelchArgs,
    /// Output directory for `<stem>.psd.csv` and `psd_summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    /// Barycenter of the inputs' PSDs.
    Barycenter,
    /// Unit PSD on every bin.
    Unit,
    /// Running barycenter stored in a PSDNorm state file.
    State,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "barycenter")]
    pub target: TargetKind,
    /// State file used with `--target state`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub welch: WelchArgs,
    /// Output directory for `<stem>.aligned.psdn` and `align_report.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-input filters as `<stem>.filter.csv`.
    #[arg(long)]
    pub filters: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Psdnorm,
    Instancenorm,
    Batchnorm,
    Layernorm,
}

impl From<KindArg> for LayerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Psdnorm => LayerKind::PsdNorm,
            KindArg::Instancenorm => LayerKind::InstanceNorm,
            KindArg::Batchnorm => LayerKind::BatchNorm,
            KindArg::Layernorm => LayerKind::LayerNorm,
        }
    }
}

#[derive(Debug, Args)]
pub struct LayerArgs {
    /// Signal files forming one batch.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "psdnorm")]
    pub kind: KindArg,
    #[arg(long, value_parser = parse_mode, default_value = "train")]
    pub mode: Mode,
    #[arg(long)]
    pub state_in: Option<PathBuf>,
    /// Where train mode persists the updated state (defaults to `--state-in`).
    #[arg(long)]
    pub state_out: Option<PathBuf>,
    #[command(flatten)]
    pub welch: WelchArgs,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory for `<stem>.out.psdn` and `layer_report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    pub domains: usize,
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Comma-separated subset of none, instancenorm, batchnorm, layernorm, tma, psdnorm.
    #[arg(long, value_delimiter = ',', value_parser = parse_method,
          default_value = "none,instancenorm,psdnorm")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Base seed; seed i of the run derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub signals: usize,
    #[arg(long, default_value_t = 1 << 14)]
    pub length: usize,
    #[arg(long, default_value_t = 2)]
    pub channels: usize,
    #[arg(long, value_parser = parse_base, default_value = "pink")]
    pub base: BasePreset,
    /// Filter size of the spectral methods (defaults to 8 unless configured).
    #[arg(long)]
    pub f: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<WindowKind>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory for `bench_report.json`, `ratios.csv` and `psds.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// PSD CSV (one row per channel); overrides `--base`, `--channels`, `--f`.
    #[arg(long)]
    pub psd: Option<PathBuf>,
    #[arg(long, value_parser = parse_base, default_value = "flat")]
    pub base: BasePreset,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 8)]
    pub f: usize,
    #[arg(long, default_value_t = 1)]
    pub signals: usize,
    #[arg(long, default_value_t = 4096)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of shifted domains; a single unshifted domain when omitted.
    #[arg(long)]
    pub domains: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// File name prefix.
    #[arg(long, default_value = "signal")]
    pub prefix: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_window(s: &str) -> std::result::Result<WindowKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_base(s: &str) -> std::result::Result<BasePreset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Optional defaults read from the file named by [`CONFIG_ENV`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDefaults {
    pub f: Option<usize>,
    pub momentum: Option<f64>,
    pub window: Option<WindowKind>,
    pub stride: Option<usize>,
    pub eps: Option<f64>,
}

impl ConfigDefaults {
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => {
                let text = fs::read_to_string(&path)?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {e}", Path::new(&path).display()))
                })
            }
            _ => Ok(Self::default()),
        }
    }
}

/// Fully resolved settings, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub f: usize,
    pub momentum: f64,
    pub window: WindowKind,
    pub stride: usize,
    pub eps: f64,
    pub seeds: Option<Vec<u64>>,
    pub mode: Option<Mode>,
}

impl RunConfig {
    fn resolve(
        defaults: &ConfigDefaults,
        welch: &WelchArgs,
        momentum: Option<f64>,
        eps: Option<f64>,
        fallback_f: usize,
    ) -> Self {
        let f = welch.f.or(defaults.f).unwrap_or(fallback_f);
        Self {
            f,
            momentum: momentum.or(defaults.momentum).unwrap_or(DEFAULT_MOMENTUM),
            window: welch.window.or(defaults.window).unwrap_or_default(),
            // a configured stride only applies to the configured f
            stride: welch
                .stride
                .or(defaults.stride.filter(|_| welch.f.is_none()))
                .unwrap_or_else(|| default_stride(f)),
            eps: eps.or(defaults.eps).unwrap_or(DEFAULT_BN_EPS),
            seeds: None,
            mode: None,
        }
    }

    pub fn welch(&self) -> Result<WelchConfig> {
        WelchConfig::new(self.f, self.stride, self.window)
    }
}

/// Error category reported in the JSON error object.
pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Io(_) => "io",
        Error::EvalWithoutBarycenter | Error::EvalWithoutStats => "state",
        Error::ShapeMismatch { .. }
        | Error::ChannelMismatch { .. }
        | Error::LengthTooShort { .. }
        | Error::FilterLongerThanSignal { .. } => "shape",
        Error::Format(_) | Error::Json(_) => "format",
        _ => "validation",
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match error_kind(err) {
        "io" => EXIT_IO,
        "state" => EXIT_STATE,
        _ => EXIT_VALIDATION,
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    eprintln!("{}", error_json("usage", e.to_string().trim_end()));
                    EXIT_VALIDATION
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("{}", error_json(error_kind(&err), &err.to_string()));
            exit_code(&err)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    let defaults = ConfigDefaults::from_env()?;
    match command {
        Command::Psd(a) => cmd_psd(&a, &defaults),
        Command::Align(a) => cmd_align(&a, &defaults),
        Command::Layer(a) => cmd_layer(&a, &defaults),
        Command::Bench(a) => cmd_bench(&a, &defaults),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "signal".into())
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<Signal>> {
    paths
        .iter()
        .map(|p| {
            read_signal(p).map_err(|e| match e {
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", p.display()),
                )),
                Error::Format(msg) => Error::Format(format!("{}: {msg}", p.display())),
                other => other,
            })
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Debug, Serialize)]
struct PsdEntry {
    input: String,
    channels: usize,
    length: usize,
    segments: usize,
    floor: f64,
    floor_applications: usize,
    all_clamped: bool,
}

#[derive(Debug, Serialize)]
struct PsdSummary {
    version: &'static str,
    config: RunConfig,
    inputs: Vec<PsdEntry>,
}

fn cmd_psd(args: &PsdArgs, defaults: &ConfigDefaults) -> Result<()> {
    let config = RunConfig::resolve(defaults, &args.welch, None, None, DEFAULT_FILTER_SIZE);
    let welch = config.welch()?;
    let signals = read_all(&args.inputs)?;
    fs::create_dir_all(&args.out)?;
    let mut inputs = Vec::with_capacity(signals.len());
    for (path, x) in args.inputs.iter().zip(&signals) {
        let est = welch_estimate(x, &welch)?;
        fs::write(
            args.out.join(format!("{}.psd.csv", stem(path))),
            psd_to_csv(&est.psd),
        )?;
        let (c, l) = x.shape();
        inputs.push(PsdEntry {
            input: display(path),
            channels: c,
            length: l,
            segments: est.segments,
            floor: est.floor,
            floor_applications: est.clamped,
            all_clamped: est.clamped == c * welch.filter_size(),
        });
    }
    write_json(
        &args.out.join("psd_summary.json"),
        &PsdSummary {
            version: crate::VERSION,
            config,
            inputs,
        },
    )
}

#[derive(Debug, Serialize)]
struct AlignEntry {
    input: String,
    output: String,
    pre_distance: f64,
    post_distance: f64,
}

#[derive(Debug, Serialize)]
struct AlignReport {
    version: &'static str,
    config: RunConfig,
    target_kind: String,
    target: Vec<Vec<f64>>,
    entries: Vec<AlignEntry>,
}

fn cmd_align(args: &AlignArgs, defaults: &ConfigDefaults) -> Result<()> {
    let mut config = RunConfig::resolve(defaults, &args.welch, None, None, DEFAULT_FILTER_SIZE);
    let signals = read_all(&args.inputs)?;
    let shape = signals[0].shape();
    if let Some(x) = signals.iter().find(|x| x.shape() != shape) {
        return Err(Error::ShapeMismatch {
            expected: shape,
            actual: x.shape(),
        });
    }

    let aligner = match args.target {
        TargetKind::Barycenter => {
            let batches = signals
                .iter()
                .map(|x| Batch::new(vec![x.clone()]))
                .collect::<Result<Vec<_>>>()?;
            TmaAligner::fit(&batches, config.welch()?)?
        }
        TargetKind::Unit => {
            TmaAligner::from_barycenter(Psd::ones(shape.0, config.f)?, config.welch()?)?
        }
        TargetKind::State => {
            let path = args
                .state
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--target state requires --state".into()))?;
            let layer = StateFile::load(path)?.to_psdnorm(Mode::Eval)?;
            check_flag("f", args.welch.f, layer.filter_size())?;
            let welch = *layer.welch();
            config.f = welch.filter_size();
            config.stride = welch.stride();
            config.window = welch.window();
            config.momentum = layer.momentum();
            let bary = layer
                .barycenter()
                .cloned()
                .ok_or(Error::EvalWithoutBarycenter)?;
            TmaAligner::from_barycenter(bary, welch)?
        }
    };
    let target = aligner.barycenter().clone();
    let welch = *aligner.welch();

    fs::create_dir_all(&args.out)?;
    let mut entries = Vec::with_capacity(signals.len());
    for (path, x) in args.inputs.iter().zip(&signals) {
        let pre = welch_psd(&center(x), &welch)?;
        target.ensure_shape(&pre)?;
        let y = aligner.transform(x)?;
        let post = welch_psd(&y, &welch)?;
        let name = format!("{}.aligned.psdn", stem(path));
        write_signal(&args.out.join(&name), &y)?;
        if args.filters {
            let filter = crate::monge::monge_filter(&pre, &target)?;
            fs::write(
                args.out.join(format!("{}.filter.csv", stem(path))),
                filter.to_csv(),
            )?;
        }
        entries.push(AlignEntry {
            input: display(path),
            output: name,
            pre_distance: bures_distance(&pre, &target)?,
            post_distance: bures_distance(&post, &target)?,
        });
    }
    fs::write(args.out.join("target_psd.csv"), psd_to_csv(&target))?;
    write_json(
        &args.out.join("align_report.json"),
        &AlignReport {
            version: crate::VERSION,
            config,
            target_kind: format!("{:?}", args.target).to_lowercase(),
            target: target.to_rows(),
            entries,
        },
    )
}

fn check_flag<T: PartialEq + std::fmt::Display>(
    name: &str,
    flag: Option<T>,
    stored: T,
) -> Result<()> {
    match flag {
        Some(v) if v != stored => Err(Error::InvalidConfig(format!(
            "--{name} {v} conflicts with the state file ({stored})"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct LayerReport {
    version: &'static str,
    kind: LayerKind,
    config: RunConfig,
    inputs: Vec<String>,
    outputs: Vec<String>,
    update_count: u64,
    state_written: Option<String>,
}

fn cmd_layer(args: &LayerArgs, defaults: &ConfigDefaults) -> Result<()> {
    let kind = LayerKind::from(args.kind);
    let mut config = RunConfig::resolve(
        defaults,
        &args.welch,
        args.momentum,
        args.eps,
        DEFAULT_FILTER_SIZE,
    );
    config.mode = Some(args.mode);
    let batch = Batch::new(read_all(&args.inputs)?)?;
    let stored = args
        .state_in
        .as_ref()
        .map(|p| StateFile::load(p))
        .transpose()?;

    let (output, state) = match kind {
        LayerKind::PsdNorm => {
            let mut layer = match &stored {
                Some(s) => {
                    let layer = s.to_psdnorm(args.mode)?;
                    check_flag("f", args.welch.f, layer.filter_size())?;
                    check_flag("momentum", args.momentum, layer.momentum())?;
                    let welch = *layer.welch();
                    config.f = welch.filter_size();
                    config.stride = welch.stride();
                    config.window = welch.window();
                    config.momentum = layer.momentum();
                    layer
                }
                None if args.mode == Mode::Eval => return Err(Error::EvalWithoutBarycenter),
                None => PsdNormLayer::with_welch(config.welch()?, config.momentum)?,
            };
            let out = layer.forward(&batch)?;
            (out, StateFile::from_psdnorm(&layer))
        }
        LayerKind::BatchNorm => {
            let mut layer = match &stored {
                Some(s) => {
                    let layer = s.to_batchnorm(args.mode)?;
                    check_flag("eps", args.eps, layer.eps())?;
                    config.eps = layer.eps();
                    layer
                }
                None if args.mode == Mode::Eval => return Err(Error::EvalWithoutStats),
                None => {
                    let c = batch.channels();
                    let mut layer = BatchNormLayer::with_params(
                        vec![1.0; c],
                        vec![0.0; c],
                        config.eps,
                        crate::layers::DEFAULT_BN_MOMENTUM,
                    )?;
                    layer.set_mode(args.mode);
                    layer
                }
            };
            let out = layer.forward(&batch)?;
            (out, StateFile::from_batchnorm(&layer))
        }
        LayerKind::InstanceNorm | LayerKind::LayerNorm => {
            if let Some(s) = &stored {
                if s.kind != kind {
                    return Err(Error::InvalidConfig(format!(
                        "state file holds a {} layer, expected {kind}",
                        s.kind
                    )));
                }
                if let Some(eps) = s.eps {
                    check_flag("eps", args.eps, eps)?;
                    config.eps = eps;
                }
            }
            let out = if kind == LayerKind::InstanceNorm {
                instancenorm_forward(&batch, config.eps)?
            } else {
                layernorm_forward(&batch, config.eps)?
            };
            (out, StateFile::stateless(kind, config.eps))
        }
    };

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::with_capacity(batch.len());
    for (path, y) in args.inputs.iter().zip(output.iter()) {
        let name = format!("{}.out.psdn", stem(path));
        write_signal(&args.out.join(&name), y)?;
        outputs.push(name);
    }
    let state_path = match args.mode {
        Mode::Train => args.state_out.as_ref().or(args.state_in.as_ref()),
        Mode::Eval => None,
    };
    if let Some(path) = state_path {
        state.save(path)?;
    }
    write_json(
        &args.out.join("layer_report.json"),
        &LayerReport {
            version: crate::VERSION,
            kind,
            config,
            inputs: args.inputs.iter().map(|p| display(p)).collect(),
            outputs,
            update_count: state.update_count,
            state_written: state_path.map(|p| display(p)),
        },
    )
}

#[derive(Debug, Serialize)]
struct BenchOutput<'a> {
    config: RunConfig,
    #[serde(flatten)]
    report: &'a BenchReport,
}

/// Bench settings resolved from flags and configured defaults.
pub fn bench_settings(
    args: &BenchArgs,
    defaults: &ConfigDefaults,
) -> Result<(BenchSettings, RunConfig)> {
    let welch = WelchArgs {
        f: args.f,
        stride: args.stride,
        window: args.window,
    };
    let fallback = AlignmentConfig::default().filter_size;
    let mut config = RunConfig::resolve(defaults, &welch, args.momentum, args.eps, fallback);
    config.welch()?;
    let settings = BenchSettings {
        domains: args.domains,
        shift: args.shift,
        methods: args.methods.clone(),
        seeds: args.seeds,
        base_seed: args.seed,
        base: args.base,
        channels: args.channels,
        n_signals: args.signals,
        length: args.length,
        alignment: AlignmentConfig {
            filter_size: config.f,
            stride: config.stride,
            window: config.window,
            momentum: config.momentum,
            eps: config.eps,
            ..AlignmentConfig::default()
        },
    };
    config.seeds = Some(
        (0..args.seeds)
            .map(|i| crate::synth::derive_seed(args.seed, i as u64))
            .collect(),
    );
    Ok((settings, config))
}

fn cmd_bench(args: &BenchArgs, defaults: &ConfigDefaults) -> Result<()> {
    let (settings, config) = bench_settings(args, defaults)?;
    let report = run_benchmark(&settings)?;
    fs::create_dir_all(&args.out)?;
    write_json(
        &args.out.join("bench_report.json"),
        &BenchOutput {
            config,
            report: &report,
        },
    )?;
    fs::write(args.out.join("ratios.csv"), report.ratios_csv())?;
    fs::write(args.out.join("psds.csv"), bench_psds_csv(&report))?;
    Ok(())
}

/// Long-format table of per-domain mean PSDs before and after each method.
pub fn bench_psds_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,seed,domain,stage,channel,bin,value\n");
    for m in &report.methods {
        for (seed, r) in m.reports.iter().enumerate() {
            for (stage, psds) in [("input", &r.input_psds), ("output", &r.output_psds)] {
                for (d, rows) in psds.iter().enumerate() {
                    for (ch, row) in rows.iter().enumerate() {
                        for (bin, v) in row.iter().enumerate() {
                            out.push_str(&format!(
                                "{},{seed},{d},{stage},{ch},{bin},{v}\n",
                                m.method
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct SynthDomain {
    seed: u64,
    psd: Vec<Vec<f64>>,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SynthManifest {
    version: &'static str,
    generator: &'static str,
    seed: u64,
    length: usize,
    shift: Option<f64>,
    domains: Vec<SynthDomain>,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let psd = match &args.psd {
        Some(path) => crate::io::parse_psd_csv(&fs::read_to_string(path)?)?,
        None => base_psd(args.base, args.channels, args.f)?,
    };
    let params = CorpusParams {
        n_signals: args.signals,
        length: args.length,
        seed: args.seed,
    };
    let specs = match args.domains {
        Some(k) => make_shifted_domains(&psd, k, args.shift, &params)?,
        None => vec![DomainSpec::new(psd, args.signals, args.length, args.seed)?],
    };
    fs::create_dir_all(&args.out)?;
    let mut domains = Vec::with_capacity(specs.len());
    for (d, spec) in specs.iter().enumerate() {
        let mut files = Vec::with_capacity(spec.n_signals());
        for (i, x) in sample_gaussian_with_psd(spec).iter().enumerate() {
            let name = match args.domains {
                Some(_) => format!("{}_d{d}_{i:03}.psdn", args.prefix),
                None => format!("{}_{i:03}.psdn", args.prefix),
            };
            write_signal(&args.out.join(&name), x)?;
            files.push(name);
        }
        domains.push(SynthDomain {
            seed: spec.seed(),
            psd: spec.psd().to_rows(),
            files,
        });
    }
    write_json(
        &args.out.join(format!("{}_manifest.json", args.prefix)),
        &SynthManifest {
            version: crate::VERSION,
            generator: GENERATOR,
            seed: args.seed,
            length: args.length,
            shift: args.domains.map(|_| args.shift),
            domains,
        },
    )
}
