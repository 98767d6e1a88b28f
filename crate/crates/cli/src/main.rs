use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use concat_polar::channel::{ebn0_to_esn0_db, snr_to_sigma, substream, ChannelParam};
use concat_polar::concat::{concat_decode, concat_encode};
use concat_polar::construction::{
    construct_concat_spec, construct_polar, ColumnEstimate, ConstructionParams, Family, DEFAULT_CLAMP,
    DEFAULT_GRID_STEP,
};
use concat_polar::crc::CrcConfig;
use concat_polar::inner_codes::InnerCode;
use concat_polar::sim::{
    emit_outputs, run_sweep, write_overlay_script, PolarCode, SchemeKind, SimCode, SimConfig,
};

#[derive(Parser)]
#[command(name = "cpolar", version, about = "Soft-concatenated polar codes: construction, coding and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a code by density evolution and write its spec file.
    Construct(ConstructArgs),
    /// Encode one information vector (a line of 0/1 characters).
    Encode(CodecArgs),
    /// Decode one LLR vector (whitespace-separated reals, row-major).
    Decode(CodecArgs),
    /// Pass a codeword through an AWGN channel and write its LLRs.
    Transmit(TransmitArgs),
    /// Monte-Carlo FER/BER sweep.
    Simulate(SimulateArgs),
    /// Write a script overlaying several results.csv files.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    /// Soft-concatenated code (spec file for `--scheme concat`).
    Concat,
    /// Standalone polar code (for `plain-polar` / `scl-crc`).
    Polar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Awgn,
    Bsc,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum, default_value = "concat")]
    kind: ConstructKind,
    #[arg(long, value_enum, default_value = "awgn")]
    channel: ChannelArg,
    /// Design Eb/N0 in dB (AWGN).
    #[arg(long, default_value_t = 3.0)]
    ebn0: f64,
    /// Crossover probability (BSC).
    #[arg(long, default_value_t = 0.05)]
    crossover: f64,
    /// Number of columns N (concat) or block length (polar).
    #[arg(long, short = 'n')]
    length: usize,
    /// Column length M (concat only).
    #[arg(long, short = 'm', default_value_t = 1)]
    rows: usize,
    /// Information bits K, net of any CRC.
    #[arg(long, short = 'k')]
    info: usize,
    /// Column family: `polar`, or a generator-matrix file per code.
    #[arg(long, default_value = "polar", num_args = 1..)]
    family: Vec<String>,
    /// CRC polynomial coefficients, highest degree first (e.g. 10011).
    #[arg(long)]
    crc: Option<CrcConfig>,
    /// Target average list size (concat) or list size (polar).
    #[arg(long, default_value_t = 1.0)]
    list: f64,
    /// Column error estimate for polar columns.
    #[arg(long, value_enum, default_value = "bit-channel")]
    estimate: EstimateArg,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
    #[arg(long, default_value_t = DEFAULT_CLAMP)]
    clamp: f64,
    /// Output spec file.
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Also write the E_i^k table as CSV (concat only).
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateArg {
    /// Minimum-distance union proxy; CRC on every column that fits it.
    MinDistance,
    /// SC bit-channel sum; CRC placed where it pays for its bits.
    BitChannel,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    PlainPolar,
    SclCrc,
    Concat,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::PlainPolar => Self::PlainPolar,
            SchemeArg::SclCrc => Self::SclCrc,
            SchemeArg::Concat => Self::Concat,
        }
    }
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct TransmitArgs {
    /// Eb/N0 in dB.
    #[arg(long)]
    ebn0: f64,
    /// Code rate used to convert Eb/N0 into a noise deviation.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    spec: PathBuf,
    /// Eb/N0 points in dB, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    snrs: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_frames: u64,
    /// Stop a point after this many frame errors (0 disables).
    #[arg(long, default_value_t = 100)]
    target_errors: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Curves as LABEL=PATH/results.csv.
    #[arg(required = true)]
    curves: Vec<String>,
    #[arg(long, short = 'o', default_value = "plot.py")]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Construct(a) => construct(a),
        Cmd::Encode(a) => encode(a),
        Cmd::Decode(a) => decode(a),
        Cmd::Transmit(a) => transmit(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Plot(a) => plot(a),
    }
}

fn channel_for(a: &ConstructArgs, rate: f64) -> Result<ChannelParam> {
    Ok(match a.channel {
        ChannelArg::Awgn => ChannelParam::awgn(snr_to_sigma(a.ebn0, rate)?)?,
        ChannelArg::Bsc => ChannelParam::bsc(a.crossover)?,
    })
}

fn log2_exact(v: usize, what: &str) -> Result<u32> {
    if v == 0 || !v.is_power_of_two() {
        bail!("{what} must be a power of two, got {v}");
    }
    Ok(v.trailing_zeros())
}

fn construct(a: ConstructArgs) -> Result<()> {
    match a.kind {
        ConstructKind::Polar => {
            let n = log2_exact(a.length, "block length")?;
            let crc_len = a.crc.as_ref().map_or(0, CrcConfig::degree);
            let rate = a.info as f64 / a.length as f64;
            let ch = channel_for(&a, rate)?;
            let (spec, errs) = construct_polar(&ch, n, a.info + crc_len, a.grid_step, a.clamp)?;
            let bound: f64 = spec.info_positions().iter().map(|&i| errs[i]).sum();
            let list = a.list.round() as usize;
            let code = PolarCode::new(spec, list.max(1), a.crc.clone())?;
            code.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
            println!("wrote {} ({}, {}) polar code", a.out.display(), a.length, a.info);
            println!("predicted SC union bound: {bound:.6e}");
        }
        ConstructKind::Concat => {
            let n = log2_exact(a.length, "column count N")?;
            let rate = a.info as f64 / (a.length * a.rows) as f64;
            let ch = channel_for(&a, rate)?;
            let family = if a.family.len() == 1 && a.family[0] == "polar" {
                Family::PolarColumns
            } else {
                Family::Explicit(
                    a.family
                        .iter()
                        .map(|p| {
                            InnerCode::load_generator(p).with_context(|| format!("loading {p}"))
                        })
                        .collect::<Result<_>>()?,
                )
            };
            let mut p = ConstructionParams::new(ch, family, n, a.rows, a.info);
            p.crc = a.crc.clone();
            p.target_avg_list = a.list;
            p.estimate = match a.estimate {
                EstimateArg::MinDistance => ColumnEstimate::MinDistance,
                EstimateArg::BitChannel => ColumnEstimate::BitChannel,
            };
            p.step = a.grid_step;
            p.clamp = a.clamp;
            let c = construct_concat_spec(&p)?;
            c.spec.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
            if let Some(t) = &a.table {
                c.table.write_csv(t).with_context(|| format!("writing {}", t.display()))?;
            }
            if !c.skipped.is_empty() {
                eprintln!(
                    "warning: {} candidates skipped (weight spectrum not computable)",
                    c.skipped.len()
                );
            }
            println!(
                "wrote {} ({}, {}) concatenated code, rate {:.4}",
                a.out.display(),
                c.spec.code_length(),
                c.spec.total_info(),
                c.spec.rate()
            );
            println!("predicted error bound: {:.6e}", c.bound);
        }
    }
    Ok(())
}

fn read_bits(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => bail!("{}: unexpected character {other:?}", path.display()),
        })
        .collect()
}

fn read_llrs(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split_whitespace()
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: bad LLR {t:?}", path.display())))
        .collect()
}

fn bit_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn encode(a: CodecArgs) -> Result<()> {
    let info = read_bits(&a.input)?;
    let out = match SimCode::load(a.scheme.into(), &a.spec)? {
        SimCode::Polar(code) => bit_string(&code.encode(&info)?) + "\n",
        SimCode::Concat(spec) => {
            let x = concat_encode(&info, &spec)?;
            x.to_rows().iter().map(|r| bit_string(r) + "\n").collect()
        }
    };
    fs::write(&a.output, out).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn decode(a: CodecArgs) -> Result<()> {
    let llrs = read_llrs(&a.input)?;
    let decoded = match SimCode::load(a.scheme.into(), &a.spec)? {
        SimCode::Polar(code) => code.decode(&llrs)?.0,
        SimCode::Concat(spec) => {
            let n = spec.num_columns();
            if llrs.len() != spec.code_length() {
                bail!("expected {} LLRs, got {}", spec.code_length(), llrs.len());
            }
            let rows: Vec<Vec<f64>> = llrs.chunks(n).map(<[f64]>::to_vec).collect();
            concat_decode(&rows, &spec)?.0
        }
    };
    fs::write(&a.output, bit_string(&decoded) + "\n")
        .with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn transmit(a: TransmitArgs) -> Result<()> {
    let bits = read_bits(&a.input)?;
    let ch = ChannelParam::awgn(snr_to_sigma(a.ebn0, a.rate)?)?;
    let llrs = ch.transmit(&bits, &mut substream(a.seed, 0));
    let text: Vec<String> = llrs.iter().map(|v| format!("{v}")).collect();
    fs::write(&a.output, text.join(" ") + "\n")
        .with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = SimConfig {
        scheme: a.scheme.into(),
        spec_path: a.spec.clone(),
        snrs_db: a.snrs,
        max_frames: a.max_frames,
        target_frame_errors: a.target_errors,
        seed: a.seed,
        workers: a.workers,
    };
    let rate = SimCode::load(cfg.scheme, &cfg.spec_path)
        .with_context(|| format!("loading {}", cfg.spec_path.display()))?
        .rate();
    let result = run_sweep(&cfg)?;
    println!("# scheme {} rate {rate:.4}", cfg.scheme);
    println!(
        "{:>8} {:>8} {:>9} {:>9} {:>11} {:>11} {:>7} {:>12}",
        "Eb/N0", "Es/N0", "frames", "errors", "FER", "BER", "L_av", "ops/frame"
    );
    for r in &result.rows {
        println!(
            "{:>8.2} {:>8.2} {:>9} {:>9} {:>11.4e} {:>11.4e} {:>7.2} {:>12.0}",
            r.snr_db,
            ebn0_to_esn0_db(r.snr_db, rate),
            r.frames,
            r.frame_errors,
            r.fer,
            r.ber,
            r.avg_list_size,
            r.op_count_mean
        );
    }
    for f in emit_outputs(&result, &a.out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let curves = a
        .curves
        .iter()
        .map(|c| match c.split_once('=') {
            Some((label, path)) => Ok((label.to_string(), PathBuf::from(path))),
            None => Ok((c.clone(), PathBuf::from(c))),
        })
        .collect::<Result<Vec<_>>>()?;
    write_overlay_script(&curves, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
