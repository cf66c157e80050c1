//! Command-line front end: upmix B-format recordings, dump per-bin
//! direction estimates, render directional energy maps, and export the
//! sparse layer decomposition.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hoamix_core::{
    aliasing_loss, convert_convention, energy_map, extract_harpex, extract_mdct, read_wav,
    stft_analyze, truncate_order, upmix_with_traces, write_map, write_wav, AmbisonicConvention,
    Dictionary, Error, FoaComplexBin, FoaRealBin, MapFormat, MultichannelSignal, SolverConfig,
    SolverTrace, UpmixConfig, UpmixMode,
};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hoamix",
    version,
    about = "Upmix first-order ambisonics to higher orders via sparse MDCT decomposition"
)]
struct Cli {
    /// Worker threads for block/channel parallelism. 1 keeps runs
    /// byte-reproducible.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upmix a 4-channel B-format WAV to an AmbiX WAV of a higher order.
    Upmix(UpmixArgs),
    /// Dump per-bin plane-wave estimates as CSV.
    Doa(DoaArgs),
    /// Render a directional energy map of an AmbiX WAV.
    Fieldmap(FieldmapArgs),
    /// Export per-layer coefficient magnitudes of the sparse decomposition.
    Layers(LayersArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Linear,
    Sparse,
    #[value(name = "sparse-noalias")]
    SparseNoAlias,
}

impl From<ModeArg> for UpmixMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => UpmixMode::Linear,
            ModeArg::Sparse => UpmixMode::Sparse,
            ModeArg::SparseNoAlias => UpmixMode::SparseNoAlias,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    /// ACN order, SN3D (what modern FOA recorders emit).
    Ambix,
    /// W, X, Y, Z with 2^(-1/2)-scaled W.
    Fuma,
}

#[derive(Args)]
struct DecompositionArgs {
    /// MDCT layer lengths, ascending powers of two.
    #[arg(long, value_delimiter = ',', default_value = "32,128,256,1024,2048")]
    layers: Vec<usize>,
    /// Solver iterations.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Initial 1-norm weight; defaults to 0.1 * max coefficient of the
    /// input's analysis.
    #[arg(long)]
    alpha0: Option<f64>,
    /// Gradient step; defaults to 1/(2 * layer count).
    #[arg(long)]
    step: Option<f64>,
    /// Aliasing penalty weight (sparse mode).
    #[arg(long, default_value_t = 0.5)]
    lambda_alias: f64,
}

impl DecompositionArgs {
    fn solver(&self, mode: UpmixMode) -> SolverConfig {
        SolverConfig {
            iterations: self.iters,
            step_size: self.step,
            alpha0: self.alpha0,
            alias_weight: match mode {
                UpmixMode::SparseNoAlias => 0.0,
                _ => self.lambda_alias,
            },
            group_sparsity: true,
        }
    }
}

#[derive(Args)]
struct UpmixArgs {
    /// 4-channel input WAV.
    input: PathBuf,
    /// Output WAV path.
    #[arg(short, long)]
    output: PathBuf,
    /// Target ambisonic order.
    #[arg(long, default_value_t = 7)]
    order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Sparse)]
    mode: ModeArg,
    #[command(flatten)]
    decomposition: DecompositionArgs,
    /// Block length for long inputs, samples.
    #[arg(long, default_value_t = 32_768)]
    block: usize,
    /// Channel convention of the input file.
    #[arg(long, value_enum, default_value_t = ConventionArg::Ambix)]
    in_convention: ConventionArg,
    /// Write the per-iteration solver trace (CSV; blocks concatenated).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    /// Real-bin one-wave-plus-omni estimator on the MDCT decomposition.
    Mdct,
    /// Complex-bin two-wave baseline on an FFT spectrogram.
    Harpex,
}

#[derive(Args)]
struct DoaArgs {
    /// 4-channel input WAV.
    input: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Mdct)]
    estimator: EstimatorArg,
    /// Decomposition feeding the mdct estimator: linear uses the largest
    /// layer only.
    #[arg(long, value_enum, default_value_t = ModeArg::Linear)]
    mode: ModeArg,
    #[command(flatten)]
    decomposition: DecompositionArgs,
    /// STFT frame length for the harpex estimator.
    #[arg(long, default_value_t = 2048)]
    frame: usize,
    /// Suppress rows whose amplitudes are all at or below this magnitude.
    #[arg(long, default_value_t = 0.0)]
    min_amp: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Ambix)]
    in_convention: ConventionArg,
}

#[derive(Args)]
struct FieldmapArgs {
    /// AmbiX input WAV with (order+1)^2 channels.
    input: PathBuf,
    /// Output path.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Azimuth samples over [-180, 180).
    #[arg(long, default_value_t = 72)]
    n_az: usize,
    /// Elevation samples over [-90, 90].
    #[arg(long, default_value_t = 36)]
    n_el: usize,
    /// First sample of the analysis window.
    #[arg(long, default_value_t = 0)]
    window_start: usize,
    /// Window length in samples (whole signal when omitted).
    #[arg(long)]
    window_len: Option<usize>,
    /// Truncate the input to this order before mapping.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Pgm,
}

#[derive(Args)]
struct LayersArgs {
    /// Input WAV (any channel count).
    input: PathBuf,
    /// Directory for the per-layer CSV files.
    #[arg(short, long)]
    out_dir: PathBuf,
    /// Filename prefix of the CSVs.
    #[arg(long, default_value = "decomposition")]
    prefix: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Sparse)]
    mode: ModeArg,
    #[command(flatten)]
    decomposition: DecompositionArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    if cli.threads > 1 {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {err}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Upmix(args) => cmd_upmix(args),
        Command::Doa(args) => cmd_doa(args),
        Command::Fieldmap(args) => cmd_fieldmap(args),
        Command::Layers(args) => cmd_layers(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGED,
        Error::Validation(_) => EXIT_USAGE,
        _ => EXIT_INPUT,
    }
}

/// Reads a 4-channel file and converts it to the internal W-scaled
/// convention.
fn read_foa(path: &PathBuf, convention: ConventionArg) -> Result<MultichannelSignal, Error> {
    let signal = read_wav(path)?;
    if signal.channel_count() != 4 {
        return Err(Error::Dimension(format!(
            "{} has {} channels, expected 4",
            path.display(),
            signal.channel_count()
        )));
    }
    match convention {
        ConventionArg::Ambix => convert_convention(
            &signal,
            AmbisonicConvention::AmbixSn3d,
            AmbisonicConvention::PaperBFormat,
        ),
        ConventionArg::Fuma => Ok(signal),
    }
}

fn cmd_upmix(args: UpmixArgs) -> Result<(), Error> {
    let foa = read_foa(&args.input, args.in_convention)?;
    let mode = UpmixMode::from(args.mode);
    let config = UpmixConfig {
        order: args.order,
        mode,
        layer_lengths: args.decomposition.layers.clone(),
        solver: args.decomposition.solver(mode),
        block_len: args.block,
        crossfade_len: 1024,
    };
    let (hoa, traces) = upmix_with_traces(&foa, &config)?;
    if let Some(trace_path) = &args.trace {
        let mut merged = SolverTrace::default();
        for t in traces {
            merged.records.extend(t.records);
        }
        merged.write_csv(trace_path)?;
    }
    write_wav(&hoa, &args.output)?;
    Ok(())
}

fn cmd_doa(args: DoaArgs) -> Result<(), Error> {
    let foa = read_foa(&args.input, args.in_convention)?;
    let mut csv =
        String::from("layer,frame,bin,azimuth_deg,elevation_deg,amp_directional,amp_omni\n");
    match args.estimator {
        EstimatorArg::Mdct => {
            let mode = UpmixMode::from(args.mode);
            let layer_lengths = match mode {
                UpmixMode::Linear => {
                    vec![*args
                        .decomposition
                        .layers
                        .iter()
                        .max()
                        .ok_or_else(|| Error::Validation("at least one layer required".into()))?]
                }
                _ => args.decomposition.layers.clone(),
            };
            let max_hop = layer_lengths.iter().max().unwrap() / 2;
            let padded_len = foa.len().max(1).div_ceil(max_hop) * max_hop;
            let padded = pad_signal(&foa, padded_len)?;
            let dict = Dictionary::new(&layer_lengths, padded_len)?;
            let rep = match mode {
                UpmixMode::Linear => hoamix_core::analyze_adjoint(&padded, &dict)?,
                _ => hoamix_core::solve(&padded, &dict, &args.decomposition.solver(mode))?.0,
            };
            for l in 0..dict.layer_count() {
                let (frames, bins) = (rep.grid(l, 0).frames(), rep.grid(l, 0).bins());
                for f in 0..frames {
                    for b in 0..bins {
                        let bin = FoaRealBin::new(
                            rep.grid(l, 0).get(f, b),
                            rep.grid(l, 1).get(f, b),
                            rep.grid(l, 2).get(f, b),
                            rep.grid(l, 3).get(f, b),
                        );
                        if bin.w == 0.0 && bin.x == 0.0 && bin.y == 0.0 && bin.z == 0.0 {
                            continue;
                        }
                        let est = extract_mdct(&bin)?;
                        if est.amp_directional.abs() <= args.min_amp
                            && est.amp_omni.abs() <= args.min_amp
                        {
                            continue;
                        }
                        push_row(
                            &mut csv,
                            l,
                            f,
                            b,
                            est.angles_deg(),
                            est.amp_directional,
                            est.amp_omni,
                        );
                    }
                }
            }
        }
        EstimatorArg::Harpex => {
            let hop = args.frame / 2;
            if hop == 0 {
                return Err(Error::Validation("frame length too small".into()));
            }
            let padded_len = foa.len().max(1).div_ceil(hop) * hop;
            let padded = pad_signal(&foa, padded_len)?;
            let spectra = stft_analyze(&padded, args.frame)?;
            let (frames, bins) = (spectra[0].frames, spectra[0].bins);
            let mut invalid = 0usize;
            let mut total = 0usize;
            for f in 0..frames {
                for b in 0..bins {
                    let bin = FoaComplexBin::new(
                        spectra[0].get(f, b),
                        spectra[1].get(f, b),
                        spectra[2].get(f, b),
                        spectra[3].get(f, b),
                    );
                    if bin.w.norm_sqr() + bin.x.norm_sqr() + bin.y.norm_sqr() + bin.z.norm_sqr()
                        == 0.0
                    {
                        continue;
                    }
                    total += 1;
                    let est = extract_harpex(&bin)?;
                    if est.valid {
                        for k in 0..2 {
                            let amp = est.amps[k].norm();
                            if amp <= args.min_amp {
                                continue;
                            }
                            let angles = est.directions[k].map(|d| {
                                (
                                    d[1].atan2(d[0]).to_degrees(),
                                    d[2].clamp(-1.0, 1.0).asin().to_degrees(),
                                )
                            });
                            push_row(&mut csv, 0, f, b, angles, amp, 0.0);
                        }
                    } else {
                        invalid += 1;
                        let fb = est.fallback.as_ref().expect("fallback populated");
                        for part in [&fb.real, &fb.imag] {
                            if part.amp_directional.abs() <= args.min_amp
                                && part.amp_omni.abs() <= args.min_amp
                            {
                                continue;
                            }
                            push_row(
                                &mut csv,
                                0,
                                f,
                                b,
                                part.angles_deg(),
                                part.amp_directional,
                                part.amp_omni,
                            );
                        }
                    }
                }
            }
            eprintln!("harpex: {invalid} of {total} non-silent bins took the fallback path");
        }
    }
    match &args.output {
        Some(path) => std::fs::write(path, csv).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?,
    }
    Ok(())
}

fn push_row(
    csv: &mut String,
    layer: usize,
    frame: usize,
    bin: usize,
    angles: Option<(f64, f64)>,
    amp_directional: f64,
    amp_omni: f64,
) {
    match angles {
        Some((az, el)) => csv.push_str(&format!(
            "{layer},{frame},{bin},{az},{el},{amp_directional},{amp_omni}\n"
        )),
        None => csv.push_str(&format!(
            "{layer},{frame},{bin},,,{amp_directional},{amp_omni}\n"
        )),
    }
}

fn pad_signal(signal: &MultichannelSignal, len: usize) -> Result<MultichannelSignal, Error> {
    let channels = signal
        .channels()
        .iter()
        .map(|c| {
            let mut v = c.clone();
            v.resize(len, 0.0);
            v
        })
        .collect();
    MultichannelSignal::new(channels, signal.sample_rate())
}

fn cmd_fieldmap(args: FieldmapArgs) -> Result<(), Error> {
    let mut hoa = read_wav(&args.input)?;
    if let Some(order) = args.order {
        hoa = truncate_order(&hoa, order)?;
    }
    let start = args.window_start;
    let end = match args.window_len {
        Some(len) => start + len,
        None => hoa.len(),
    };
    let map = energy_map(&hoa, (args.n_az, args.n_el), start..end)?;
    let format = match args.format {
        FormatArg::Csv => MapFormat::Csv,
        FormatArg::Pgm => MapFormat::Pgm,
    };
    write_map(&map, &args.output, format)
}

fn cmd_layers(args: LayersArgs) -> Result<(), Error> {
    let signal = read_wav(&args.input)?;
    if signal.is_empty() {
        return Err(Error::Dimension("input signal is empty".into()));
    }
    let mode = UpmixMode::from(args.mode);
    if mode == UpmixMode::Linear {
        return Err(Error::Validation(
            "layers dumps the sparse decomposition; use --mode sparse or sparse-noalias".into(),
        ));
    }
    let max_hop = args
        .decomposition
        .layers
        .iter()
        .max()
        .ok_or_else(|| Error::Validation("at least one layer required".into()))?
        / 2;
    let padded_len = signal.len().div_ceil(max_hop) * max_hop;
    let padded = pad_signal(&signal, padded_len)?;
    let dict = Dictionary::new(&args.decomposition.layers, padded_len)?;
    let solver = args.decomposition.solver(mode);
    let (rep, _) = hoamix_core::solve(&padded, &dict, &solver)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let paths =
        hoamix_core::dictionary::write_layer_csvs(&rep, &dict, &args.out_dir, &args.prefix)?;
    let alias = aliasing_loss(&rep, &padded, &dict)?;
    eprintln!(
        "wrote {} layer files (final aliasing excess {alias:.6e})",
        paths.len()
    );
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
