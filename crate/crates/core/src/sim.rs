//! Monte-Carlo FER/BER simulation of plain SC polar codes, CRC-aided list
//! polar codes and soft-concatenated codes over AWGN.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{frame_rngs, snr_to_sigma, ChannelParam};
use crate::concat::{concat_decode, concat_encode, ConcatSpec};
use crate::crc::CrcConfig;
use crate::error::{invalid, Error, Result};
use crate::inner_codes::parse_bit_row;
use crate::polar::{polar_encode, sc_decode_counted, scl_decode, PolarSpec};

/// Frames evaluated per parallel batch. Fixed so results never depend on
/// the worker count.
const BATCH: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    PlainPolar,
    SclCrc,
    Concat,
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain-polar" => Ok(Self::PlainPolar),
            "scl-crc" => Ok(Self::SclCrc),
            "concat" => Ok(Self::Concat),
            other => Err(invalid(format!(
                "unknown scheme {other:?} (expected plain-polar, scl-crc or concat)"
            ))),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PlainPolar => "plain-polar",
            Self::SclCrc => "scl-crc",
            Self::Concat => "concat",
        })
    }
}

/// A standalone polar code with an optional CRC and list size.
///
/// File format:
///
/// ```text
/// polar N K        K excludes the CRC bits
/// list L
/// crc -|<coefficients>
/// mask <N chars, 1 = frozen>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    pub spec: PolarSpec,
    pub list_size: usize,
    pub crc: Option<CrcConfig>,
}

impl PolarCode {
    pub fn new(spec: PolarSpec, list_size: usize, crc: Option<CrcConfig>) -> Result<Self> {
        if list_size < 1 {
            return Err(invalid("list size must be at least 1"));
        }
        if let Some(c) = &crc {
            if spec.info_count() <= c.degree() {
                return Err(Error::InvalidSpec(format!(
                    "CRC of degree {} needs more than {} information positions",
                    c.degree(),
                    spec.info_count()
                )));
            }
        }
        Ok(Self {
            spec,
            list_size,
            crc,
        })
    }

    /// Information bits net of the CRC.
    pub fn info_len(&self) -> usize {
        self.spec.info_count() - self.crc.as_ref().map_or(0, CrcConfig::degree)
    }

    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>> {
        if data.len() != self.info_len() {
            return Err(invalid(format!(
                "expected {} information bits, got {}",
                self.info_len(),
                data.len()
            )));
        }
        let info = match &self.crc {
            Some(c) => c.append(data),
            None => data.to_vec(),
        };
        polar_encode(&self.spec.embed(&info)?, &self.spec)
    }

    /// Returns the decoded data bits, the list usage and the op count.
    /// List size 1 without CRC runs the plain SC decoder.
    pub fn decode(&self, llrs: &[f64]) -> Result<(Vec<u8>, usize, u64)> {
        let k = self.info_len();
        if self.list_size == 1 && self.crc.is_none() {
            let (u, ops) = sc_decode_counted(llrs, &self.spec)?;
            return Ok((self.spec.extract(&u), 1, ops));
        }
        let (u, meta) = scl_decode(llrs, &self.spec, self.list_size, self.crc.as_ref())?;
        let mut data = self.spec.extract(&u);
        data.truncate(k);
        Ok((data, meta.peak_paths, meta.ops))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut field = |key: &str| -> Result<(usize, Vec<String>)> {
            let (ln, l) = lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                msg: format!("missing \"{key}\" line"),
            })?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected \"{key} ...\""),
                });
            }
            Ok((ln, parts.map(str::to_string).collect()))
        };
        let num = |ln: usize, s: &str| -> Result<usize> {
            s.parse().map_err(|e| Error::Parse {
                line: ln,
                msg: format!("bad integer {s:?}: {e}"),
            })
        };

        let (ln, v) = field("polar")?;
        let [n, k] = v.as_slice() else {
            return Err(Error::Parse { line: ln, msg: "expected \"polar N K\"".into() });
        };
        let (n, k) = (num(ln, n)?, num(ln, k)?);
        let (ln, v) = field("list")?;
        let [l] = v.as_slice() else {
            return Err(Error::Parse { line: ln, msg: "expected \"list L\"".into() });
        };
        let list_size = num(ln, l)?;
        let (ln, v) = field("crc")?;
        let crc = match v.as_slice() {
            [s] if s == "-" => None,
            [s] => Some(s.parse::<CrcConfig>().map_err(|e| Error::Parse {
                line: ln,
                msg: e.to_string(),
            })?),
            _ => return Err(Error::Parse { line: ln, msg: "expected \"crc <poly>\" or \"crc -\"".into() }),
        };
        let (ln, v) = field("mask")?;
        let [mask] = v.as_slice() else {
            return Err(Error::Parse { line: ln, msg: "expected \"mask <bits>\"".into() });
        };
        let bits = parse_bit_row(mask, n, ln)?;
        let spec = PolarSpec::new(bits.iter().map(|&b| b == 1).collect())?;
        let code = Self::new(spec, list_size, crc)?;
        if code.info_len() != k {
            return Err(Error::InvalidSpec(format!(
                "header declares K = {k} but the mask and CRC give {}",
                code.info_len()
            )));
        }
        Ok(code)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for PolarCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "polar {} {}", self.spec.block_length(), self.info_len())?;
        writeln!(f, "list {}", self.list_size)?;
        match &self.crc {
            Some(c) => writeln!(f, "crc {c}")?,
            None => writeln!(f, "crc -")?,
        }
        let mask: String = self
            .spec
            .frozen_mask()
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        writeln!(f, "mask {mask}")
    }
}

/// A code under simulation.
#[derive(Debug, Clone)]
pub enum SimCode {
    Polar(PolarCode),
    Concat(ConcatSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub list_usage: f64,
    pub ops: u64,
}

impl SimCode {
    pub fn load(scheme: SchemeKind, path: impl AsRef<Path>) -> Result<Self> {
        match scheme {
            SchemeKind::PlainPolar | SchemeKind::SclCrc => Ok(Self::Polar(PolarCode::load(path)?)),
            SchemeKind::Concat => Ok(Self::Concat(ConcatSpec::load(path)?)),
        }
    }

    pub fn info_len(&self) -> usize {
        match self {
            Self::Polar(p) => p.info_len(),
            Self::Concat(c) => c.total_info(),
        }
    }

    pub fn code_length(&self) -> usize {
        match self {
            Self::Polar(p) => p.spec.block_length(),
            Self::Concat(c) => c.code_length(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.code_length() as f64
    }

    /// Simulate frame number `frame` of the stream seeded by `seed`.
    pub fn run_frame(&self, channel: &ChannelParam, seed: u64, frame: u64) -> Result<FrameOutcome> {
        let (mut info_rng, mut noise_rng) = frame_rngs(seed, frame);
        let k = self.info_len();
        let info: Vec<u8> = (0..k).map(|_| info_rng.random_range(0..2u8)).collect();
        let (decoded, list_usage, ops) = match self {
            Self::Polar(p) => {
                let x = p.encode(&info)?;
                let y = channel.transmit(&x, &mut noise_rng);
                let (d, l, ops) = p.decode(&y)?;
                (d, l as f64, ops)
            }
            Self::Concat(spec) => {
                let x = concat_encode(&info, spec)?;
                let y = channel.transmit(x.as_flat(), &mut noise_rng);
                let rows: Vec<Vec<f64>> = y.chunks(spec.num_columns()).map(<[f64]>::to_vec).collect();
                let (d, stats) = concat_decode(&rows, spec)?;
                (d, stats.avg_list_size(), stats.total_ops())
            }
        };
        let bit_errors = info.iter().zip(&decoded).filter(|(a, b)| a != b).count() as u64;
        Ok(FrameOutcome {
            bit_errors,
            list_usage,
            ops,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: SchemeKind,
    pub spec_path: PathBuf,
    /// Eb/N0 points in dB.
    pub snrs_db: Vec<f64>,
    pub max_frames: u64,
    pub target_frame_errors: u64,
    pub seed: u64,
    pub workers: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(invalid("SNR list is empty"));
        }
        if self.max_frames < 1 {
            return Err(invalid("max_frames must be at least 1"));
        }
        if self.workers < 1 {
            return Err(invalid("worker count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub snr_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub avg_list_size: f64,
    pub op_count_mean: f64,
}

impl SimRow {
    /// Binomial standard error of the FER estimate.
    pub fn fer_sigma(&self) -> f64 {
        (self.fer * (1.0 - self.fer) / self.frames as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimResult {
    pub rows: Vec<SimRow>,
}

/// Seed of the frame stream used at SNR point `point`.
pub fn point_seed(seed: u64, point: usize) -> u64 {
    seed ^ (point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Simulate one SNR point. Frames are evaluated in fixed-size batches and
/// accumulated in frame order, so the stopping frame and every count are
/// identical for any worker count.
pub fn run_point(
    code: &SimCode,
    ebn0_db: f64,
    seed: u64,
    max_frames: u64,
    target_frame_errors: u64,
    pool: &rayon::ThreadPool,
) -> Result<SimRow> {
    let sigma = snr_to_sigma(ebn0_db, code.rate())?;
    let channel = ChannelParam::awgn(sigma)?;
    let k = code.info_len() as u64;

    let mut frames = 0u64;
    let mut frame_errors = 0u64;
    let mut bit_errors = 0u64;
    let mut list_sum = 0.0;
    let mut ops_sum = 0.0;
    'outer: while frames < max_frames {
        let start = frames;
        let end = (start + BATCH).min(max_frames);
        let outcomes: Vec<FrameOutcome> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|f| code.run_frame(&channel, seed, f))
                .collect::<Result<_>>()
        })?;
        for o in outcomes {
            frames += 1;
            bit_errors += o.bit_errors;
            frame_errors += u64::from(o.bit_errors > 0);
            list_sum += o.list_usage;
            ops_sum += o.ops as f64;
            if target_frame_errors > 0 && frame_errors >= target_frame_errors {
                break 'outer;
            }
        }
    }
    Ok(SimRow {
        snr_db: ebn0_db,
        frames,
        frame_errors,
        bit_errors,
        fer: frame_errors as f64 / frames as f64,
        ber: if k == 0 { 0.0 } else { bit_errors as f64 / (frames * k) as f64 },
        avg_list_size: list_sum / frames as f64,
        op_count_mean: ops_sum / frames as f64,
    })
}

/// Sweep an already loaded code.
pub fn run_sweep_code(code: &SimCode, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    let rows = cfg
        .snrs_db
        .iter()
        .enumerate()
        .map(|(p, &snr)| {
            run_point(
                code,
                snr,
                point_seed(cfg.seed, p),
                cfg.max_frames,
                cfg.target_frame_errors,
                &pool,
            )
        })
        .collect::<Result<_>>()?;
    Ok(SimResult { rows })
}

pub fn run_sweep(cfg: &SimConfig) -> Result<SimResult> {
    let code = SimCode::load(cfg.scheme, &cfg.spec_path)?;
    run_sweep_code(&code, cfg)
}

pub const RESULTS_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "plot.py";

impl SimResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<SimRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}

/// Write `results.csv` and a matplotlib script plotting it into `out_dir`.
pub fn emit_outputs(result: &SimResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(invalid("refusing to write an empty sweep"));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(RESULTS_FILE);
    fs::write(&csv_path, result.to_csv()?)?;
    let plot_path = dir.join(PLOT_FILE);
    fs::write(&plot_path, overlay_script(&[(String::from("FER"), PathBuf::from(RESULTS_FILE))]))?;
    Ok(vec![csv_path, plot_path])
}

/// Matplotlib script overlaying the FER curves of several result files.
pub fn overlay_script(curves: &[(String, PathBuf)]) -> String {
    let mut s = String::from(
        "#!/usr/bin/env python3\n\
         # Generated by cpolar. Plots FER against Eb/N0 for each result file.\n\
         import csv\n\
         import matplotlib\n\
         matplotlib.use(\"Agg\")\n\
         import matplotlib.pyplot as plt\n\n\
         CURVES = [\n",
    );
    for (label, path) in curves {
        s.push_str(&format!("    ({:?}, {:?}),\n", label, path.display().to_string()));
    }
    s.push_str(
        "]\n\n\
         fig, ax = plt.subplots()\n\
         for label, path in CURVES:\n\
         \x20   with open(path) as f:\n\
         \x20       rows = [r for r in csv.DictReader(f) if float(r[\"fer\"]) > 0]\n\
         \x20   ax.semilogy([float(r[\"snr_db\"]) for r in rows], [float(r[\"fer\"]) for r in rows], marker=\"o\", label=label)\n\
         ax.set_xlabel(\"Eb/N0 (dB)\")\n\
         ax.set_ylabel(\"FER\")\n\
         ax.grid(True, which=\"both\")\n\
         ax.legend()\n\
         fig.savefig(\"fer.png\", dpi=150)\n",
    );
    s
}

/// Write an overlay script for `curves` to `path`.
pub fn write_overlay_script(curves: &[(String, PathBuf)], path: impl AsRef<Path>) -> Result<()> {
    if curves.is_empty() {
        return Err(invalid("no result files to plot"));
    }
    fs::write(path, overlay_script(curves))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::construct_polar;
    use proptest::prelude::*;

    fn polar_8_4() -> PolarCode {
        let spec = PolarSpec::from_info_set(8, &[3, 5, 6, 7]).unwrap();
        PolarCode::new(spec, 1, None).unwrap()
    }

    fn cfg(seed: u64) -> SimConfig {
        SimConfig {
            scheme: SchemeKind::PlainPolar,
            spec_path: PathBuf::new(),
            snrs_db: vec![0.0],
            max_frames: 10_000,
            target_frame_errors: 0,
            seed,
            workers: 2,
        }
    }

    #[test]
    fn scheme_names() {
        for s in ["plain-polar", "scl-crc", "concat"] {
            assert_eq!(s.parse::<SchemeKind>().unwrap().to_string(), s);
        }
        assert!("ldpc".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn polar_code_file_round_trip() {
        let ch = ChannelParam::awgn(0.8).unwrap();
        let (spec, _) = construct_polar(&ch, 5, 20, 1.0 / 16.0, 40.0).unwrap();
        let code = PolarCode::new(spec, 4, Some(CrcConfig::crc4())).unwrap();
        assert_eq!(code.info_len(), 16);
        let text = code.to_string();
        assert!(text.starts_with("polar 32 16\nlist 4\ncrc 10011\nmask "));
        assert_eq!(PolarCode::parse(&text).unwrap(), code);
        assert!(PolarCode::parse("polar 8 4\nlist 1\ncrc -\nmask 1110100\n").is_err());
        assert!(matches!(
            PolarCode::parse("polar 8 3\nlist 1\ncrc -\nmask 11101000\n"),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn noiseless_sentinel_has_no_errors() {
        let code = SimCode::Polar(polar_8_4());
        let mut c = cfg(1);
        c.snrs_db = vec![60.0];
        c.max_frames = 500;
        let r = run_sweep_code(&code, &c).unwrap();
        assert_eq!(r.rows[0].frame_errors, 0);
        assert_eq!(r.rows[0].frames, 500);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let code = SimCode::Polar(polar_8_4());
        let mut c = cfg(7);
        c.max_frames = 3000;
        c.target_frame_errors = 100;
        c.workers = 1;
        let a = run_sweep_code(&code, &c).unwrap();
        c.workers = 4;
        let b = run_sweep_code(&code, &c).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.rows[0].frame_errors, 100);
    }

    #[test]
    fn seeds_agree_statistically() {
        let code = SimCode::Polar(polar_8_4());
        let a = run_sweep_code(&code, &cfg(1)).unwrap().rows[0].clone();
        let b = run_sweep_code(&code, &cfg(2)).unwrap().rows[0].clone();
        let s = (a.fer_sigma().powi(2) + b.fer_sigma().powi(2)).sqrt();
        assert!((a.fer - b.fer).abs() <= 3.0 * s, "{} vs {}", a.fer, b.fer);
        assert_ne!(a.frame_errors, b.frame_errors);
    }

    #[test]
    fn prefixes_match_when_widening() {
        let code = SimCode::Polar(polar_8_4());
        let mut c = cfg(3);
        c.target_frame_errors = 50;
        let short = run_sweep_code(&code, &c).unwrap();
        c.max_frames = 100_000;
        let long = run_sweep_code(&code, &c).unwrap();
        assert_eq!(short, long);
    }

    #[test]
    fn empty_configs_rejected() {
        let code = SimCode::Polar(polar_8_4());
        let mut c = cfg(0);
        c.snrs_db.clear();
        assert!(run_sweep_code(&code, &c).is_err());
        let mut c = cfg(0);
        c.max_frames = 0;
        assert!(run_sweep_code(&code, &c).is_err());
        let dir = std::env::temp_dir();
        assert!(emit_outputs(&SimResult::default(), &dir).is_err());
        assert!(write_overlay_script(&[], dir.join("x.py")).is_err());
    }

    #[test]
    fn overlay_references_every_file() {
        let s = overlay_script(&[
            ("plain".into(), PathBuf::from("a/results.csv")),
            ("concat".into(), PathBuf::from("b/results.csv")),
        ]);
        assert!(s.contains("\"a/results.csv\"") && s.contains("\"b/results.csv\""));
        assert!(s.contains("semilogy"));
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(
            (-10.0f64..20.0, 1u64..1_000_000, 0u64..1000, 0u64..100_000, 0.0f64..1.0, 0.0f64..1.0, 1.0f64..32.0, 0.0f64..1e7),
            1..6,
        )) {
            let result = SimResult {
                rows: rows
                    .into_iter()
                    .map(|(snr_db, frames, frame_errors, bit_errors, fer, ber, avg_list_size, op_count_mean)| SimRow {
                        snr_db, frames, frame_errors, bit_errors, fer, ber, avg_list_size, op_count_mean,
                    })
                    .collect(),
            };
            let text = result.to_csv().unwrap();
            prop_assert!(text.starts_with("snr_db,frames,frame_errors,bit_errors,fer,ber,avg_list_size,op_count_mean\n"));
            prop_assert_eq!(SimResult::from_csv(&text).unwrap(), result);
        }
    }
}
