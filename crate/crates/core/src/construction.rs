//! Code construction: quantized density evolution of the SC bit-channel
//! LLR distributions, minimum-weight error estimates, and the dynamic
//! program that picks one column code per column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::channel::{substream, ChannelKind, ChannelParam};
use crate::concat::ConcatSpec;
use crate::crc::CrcConfig;
use crate::error::{invalid, Error, Result};
use crate::inner_codes::InnerCode;
use crate::polar::{boxplus, polar_encode, scl_decode, PolarSpec, DEFAULT_LLR_MAX};

pub const DEFAULT_GRID_STEP: f64 = 1.0 / 16.0;
pub const DEFAULT_CLAMP: f64 = DEFAULT_LLR_MAX;
/// Tolerated drift of total mass before a pmf is renormalized.
const MASS_TOLERANCE: f64 = 1e-12;

/// Quantized probability mass function of an LLR on the grid
/// `{k·step : -half ≤ k ≤ half}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantPmf {
    step: f64,
    half: usize,
    masses: Vec<f64>,
}

impl QuantPmf {
    /// Empty grid with `half = round(clamp / step)` bins on each side.
    fn empty(step: f64, clamp: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !(clamp > 0.0) {
            return Err(invalid(format!("clamp must be positive, got {clamp}")));
        }
        let half = (clamp / step).round() as usize;
        Ok(Self {
            step,
            half,
            masses: vec![0.0; 2 * half + 1],
        })
    }

    /// Build from `(value, mass)` atoms; values are rounded to the grid and
    /// clamped to its range. Masses are normalized.
    pub fn from_atoms(step: f64, clamp: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        let mut pmf = Self::empty(step, clamp)?;
        if atoms.iter().any(|&(_, p)| p < 0.0 || !p.is_finite()) {
            return Err(invalid("atom masses must be finite and nonnegative"));
        }
        for &(x, p) in atoms {
            let k = pmf.index_of(x);
            pmf.masses[k] += p;
        }
        let total: f64 = pmf.masses.iter().sum();
        if total <= 0.0 {
            return Err(invalid("pmf needs positive total mass"));
        }
        pmf.masses.iter_mut().for_each(|m| *m /= total);
        Ok(pmf)
    }

    pub fn point_mass(step: f64, clamp: f64, at: f64) -> Result<Self> {
        Self::from_atoms(step, clamp, &[(at, 1.0)])
    }

    fn index_of(&self, x: f64) -> usize {
        let k = (x / self.step).round();
        let h = self.half as f64;
        (k.clamp(-h, h) + h) as usize
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    /// Index of the zero bin.
    pub fn offset(&self) -> usize {
        self.half
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn value(&self, index: usize) -> f64 {
        (index as f64 - self.half as f64) * self.step
    }

    /// Nonzero atoms as `(value, mass)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(k, &m)| (self.value(k), m))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(k, &m)| m * self.value(k))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(k, &m)| m * (self.value(k) - mu).powi(2))
            .sum()
    }

    /// Total mass on `x ≤ 0`.
    pub fn nonpositive_mass(&self) -> f64 {
        self.masses[..=self.half].iter().sum()
    }

    fn support(&self) -> (usize, usize) {
        let lo = self.masses.iter().position(|&m| m > 0.0).unwrap_or(0);
        let hi = self.masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        (lo, hi)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.half == other.half && self.step == other.step
    }

    fn renormalize(&mut self) {
        let total = self.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            log::debug!("renormalizing pmf with total mass {total}");
        }
        self.masses.iter_mut().for_each(|m| *m /= total);
    }

    /// Distribution of the sum of two independent draws, clamped to the grid.
    pub fn convolve(&self, other: &Self) -> Self {
        assert!(self.same_grid(other), "pmfs on different grids");
        let h = self.half;
        let top = 2 * h;
        let b = &other.masses;
        let (pre, suf) = end_sums(b);
        let mut out = vec![0.0; b.len()];
        let (alo, ahi) = self.support();
        let (blo, bhi) = other.support();
        for a in alo..=ahi {
            let pa = self.masses[a];
            if pa == 0.0 {
                continue;
            }
            // b index j lands on a + j - h; in range iff j ∈ [h - a, 3h - a].
            let jlo = (h.saturating_sub(a)).max(blo);
            let jhi = (3 * h - a).min(bhi);
            if a < h {
                out[0] += pa * pre[h - a];
            }
            if 3 * h - a < top {
                out[top] += pa * suf[3 * h - a + 1];
            }
            if jlo <= jhi {
                let dst = &mut out[a + jlo - h..=a + jhi - h];
                for (o, &pb) in dst.iter_mut().zip(&b[jlo..=jhi]) {
                    *o += pa * pb;
                }
            }
        }
        self.with_masses(out)
    }

    /// Distribution of the box-plus of two independent draws, each atom
    /// pair combined exactly and rounded to the nearest grid point.
    pub fn boxplus(&self, other: &Self) -> Self {
        assert!(self.same_grid(other), "pmfs on different grids");
        let table = boxplus_table(self.step, self.half);
        let (h, width, t) = (self.half, self.half + 1, table.gap);
        let mags = &table.mags;
        let (pre_a, suf_a) = end_sums(&self.masses);
        let (pre_b, suf_b) = end_sums(&other.masses);
        let mut out = vec![0.0; self.masses.len()];
        // Signed output index for magnitude `mag` when the signs differ or not.
        let at = |differ: bool, mag: usize| if differ { h - mag } else { h + mag };

        let (alo, ahi) = self.support();
        for a in alo..=ahi {
            let pa = self.masses[a];
            if pa == 0.0 {
                continue;
            }
            let (na, ma) = (a < h, a.abs_diff(h));
            // Magnitudes within the gap: table lookup.
            for mb in ma.saturating_sub(t)..=(ma + t).min(h) {
                let mag = mags[ma * width + mb] as usize;
                let pos = other.masses[h + mb];
                if pos != 0.0 {
                    out[at(na, mag)] += pa * pos;
                }
                if mb > 0 {
                    let neg = other.masses[h - mb];
                    if neg != 0.0 {
                        out[at(!na, mag)] += pa * neg;
                    }
                }
            }
            // Much larger |b|: the result has magnitude |a|.
            if ma + t < h {
                out[at(na, ma)] += pa * suf_b[h + ma + t + 1];
                out[at(!na, ma)] += pa * pre_b[h - ma - t];
            }
        }
        // Much larger |a|: the result has magnitude |b|.
        let (blo, bhi) = other.support();
        for b in blo..=bhi {
            let pb = other.masses[b];
            if pb == 0.0 {
                continue;
            }
            let (nb, mb) = (b < h, b.abs_diff(h));
            if mb + t < h {
                out[at(nb, mb)] += pb * suf_a[h + mb + t + 1];
                out[at(!nb, mb)] += pb * pre_a[h - mb - t];
            }
        }
        self.with_masses(out)
    }

    fn with_masses(&self, masses: Vec<f64>) -> Self {
        let mut r = Self {
            step: self.step,
            half: self.half,
            masses,
        };
        r.renormalize();
        r
    }

    /// Renders `value,mass` lines for nonzero atoms.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,mass\n");
        for (x, m) in self.atoms() {
            let _ = writeln!(s, "{x},{m}");
        }
        s
    }
}

/// `(pre, suf)` with `pre[x] = Σ_{i<x} m_i` summed from the left end and
/// `suf[x] = Σ_{i≥x} m_i` summed from the right end, so small tail masses
/// keep full relative precision.
fn end_sums(m: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = m.len();
    let mut pre = vec![0.0; n + 1];
    let mut suf = vec![0.0; n + 1];
    for i in 0..n {
        pre[i + 1] = pre[i] + m[i];
    }
    for i in (0..n).rev() {
        suf[i] = suf[i + 1] + m[i];
    }
    (pre, suf)
}

type TableKey = (u64, usize);

/// Rounded box-plus magnitudes for grid magnitudes `0..=half`, plus the
/// smallest `gap` such that magnitudes further apart than `gap` always
/// round to the smaller one.
struct BoxplusTable {
    mags: Vec<u32>,
    gap: usize,
}

fn boxplus_table(step: f64, half: usize) -> Arc<BoxplusTable> {
    static TABLES: OnceLock<Mutex<HashMap<TableKey, Arc<BoxplusTable>>>> = OnceLock::new();
    let key = (step.to_bits(), half);
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = tables.lock().expect("table lock").get(&key) {
        return Arc::clone(t);
    }
    let width = half + 1;
    let mut mags = vec![0u32; width * width];
    let mut gap = 0;
    for a in 0..width {
        for b in a..width {
            let v = boxplus(a as f64 * step, b as f64 * step);
            let k = ((v / step).round() as usize).min(a);
            mags[a * width + b] = k as u32;
            mags[b * width + a] = k as u32;
            if k != a {
                gap = gap.max(b - a);
            }
        }
    }
    let t = Arc::new(BoxplusTable { mags, gap });
    tables
        .lock()
        .expect("table lock")
        .insert(key, Arc::clone(&t));
    t
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Quantized LLR distribution of the channel output given a zero input.
pub fn channel_pmf(channel: &ChannelParam, step: f64, clamp: f64) -> Result<QuantPmf> {
    let mut pmf = QuantPmf::empty(step, clamp)?;
    match channel.kind {
        ChannelKind::Awgn { sigma } => {
            let mean = 2.0 / (sigma * sigma);
            let sd = 2.0 / sigma;
            let len = pmf.masses.len();
            for k in 0..len {
                let x = pmf.value(k);
                let lo = if k == 0 {
                    0.0
                } else {
                    normal_cdf((x - step / 2.0 - mean) / sd)
                };
                let hi = if k + 1 == len {
                    1.0
                } else {
                    normal_cdf((x + step / 2.0 - mean) / sd)
                };
                pmf.masses[k] = (hi - lo).max(0.0);
            }
            pmf.renormalize();
        }
        ChannelKind::Bsc { crossover } => {
            let a = ((1.0 - crossover) / crossover).ln();
            pmf = QuantPmf::from_atoms(step, clamp, &[(a, 1.0 - crossover), (-a, crossover)])?;
        }
    }
    Ok(pmf)
}

/// One density-evolution step: `(check-node / box-plus, variable-node / sum)`.
pub fn de_transform(f: &QuantPmf) -> (QuantPmf, QuantPmf) {
    (f.boxplus(f), f.convolve(f))
}

/// LLR distribution of SC bit channel `index` of the length-`2^n` transform.
pub fn bit_channel_pmf(
    channel: &ChannelParam,
    n: u32,
    index: usize,
    step: f64,
    clamp: f64,
) -> Result<QuantPmf> {
    if index >= 1usize << n {
        return Err(invalid(format!(
            "bit-channel index {index} out of range for length {}",
            1usize << n
        )));
    }
    let mut f = channel_pmf(channel, step, clamp)?;
    for level in (0..n).rev() {
        f = if (index >> level) & 1 == 0 {
            f.boxplus(&f)
        } else {
            f.convolve(&f)
        };
    }
    Ok(f)
}

/// All `2^n` bit-channel distributions, in natural index order, starting
/// from `base`. Each tree level is computed in parallel.
pub fn all_bit_channel_pmfs(base: &QuantPmf, n: u32) -> Vec<QuantPmf> {
    let mut level = vec![base.clone()];
    for _ in 0..n {
        level = level
            .par_iter()
            .flat_map_iter(|f| {
                let (minus, plus) = de_transform(f);
                [minus, plus]
            })
            .collect();
    }
    level
}

/// `Pr{ X_1 + … + X_w ≤ 0 }` for i.i.d. `X_j ~ f`; ties at zero count.
pub fn tail_prob(f: &QuantPmf, w: usize) -> Result<f64> {
    if w < 1 {
        return Err(invalid("tail probability needs weight at least 1"));
    }
    Ok(self_convolution(f, w).nonpositive_mass())
}

/// `f^{*w}` as `w - 1` successive (clamped) convolutions with `f`.
fn self_convolution(f: &QuantPmf, w: usize) -> QuantPmf {
    let mut acc = f.clone();
    for _ in 1..w {
        acc = acc.convolve(f);
    }
    acc
}

/// `[P(f, 1), …, P(f, max_w)]`, sharing the convolution chain; entry
/// `w - 1` equals `tail_prob(f, w)`.
pub fn tail_probs(f: &QuantPmf, max_w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_w);
    let mut acc = f.clone();
    for w in 1..=max_w {
        if w > 1 {
            acc = acc.convolve(f);
        }
        out.push(acc.nonpositive_mass());
    }
    out
}

/// `min(1, m · P(f, d))` for a code with minimum distance `d` and
/// multiplicity `m`; zero for the zero code.
pub fn estimate_error(f: &QuantPmf, code: &InnerCode) -> Result<f64> {
    let spec = code.weight_spectrum()?;
    match spec.min_distance {
        None => Ok(0.0),
        Some(d) => Ok((spec.multiplicity as f64 * tail_prob(f, d)?).min(1.0)),
    }
}

/// [`estimate_error`] with precomputed tails from [`tail_probs`] (which must
/// cover the code length).
fn estimate_from_tails(tails: &[f64], code: &InnerCode) -> Result<f64> {
    let spec = code.weight_spectrum()?;
    match spec.min_distance {
        None => Ok(0.0),
        Some(d) => Ok((spec.multiplicity as f64 * tails[d - 1]).min(1.0)),
    }
}

/// `E[i][k]` estimates with the information bits `k_list[k]` each choice
/// carries.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub e: Vec<Vec<f64>>,
    pub k_list: Vec<usize>,
}

impl ErrorTable {
    pub fn new(e: Vec<Vec<f64>>, k_list: Vec<usize>) -> Result<Self> {
        if e.iter().any(|row| row.len() != k_list.len()) {
            return Err(invalid("every error-table row needs one entry per code"));
        }
        if e.iter().flatten().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(invalid("error estimates must lie in [0, 1]"));
        }
        Ok(Self { e, k_list })
    }

    pub fn columns(&self) -> usize {
        self.e.len()
    }

    pub fn codes(&self) -> usize {
        self.k_list.len()
    }

    /// CSV with header `i,k,E_i_k` (k is 1-based).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,k,E_i_k\n");
        for (i, row) in self.e.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let _ = writeln!(s, "{i},{},{v:e}", k + 1);
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Minimize `Σ_i E[i][a_i]` subject to `Σ_i K_{a_i} = target`.
///
/// Among optimal assignments the lexicographically smallest one (by code
/// index, column 0 first) is returned.
pub fn dp_assign(table: &ErrorTable, target: usize) -> Result<Vec<usize>> {
    let n = table.columns();
    let q = table.codes();
    if q == 0 {
        return Err(invalid("error table has no codes"));
    }
    let kmin = *table.k_list.iter().min().expect("nonempty");
    let kmax = *table.k_list.iter().max().expect("nonempty");
    let infeasible = || Error::Infeasible {
        target,
        min: n * kmin,
        max: n * kmax,
    };
    if target < n * kmin || target > n * kmax {
        return Err(infeasible());
    }
    let width = target + 1;
    // best[i][r]: cheapest way to place r bits in columns i..n.
    let mut best = vec![f64::INFINITY; (n + 1) * width];
    best[n * width] = 0.0;
    for i in (0..n).rev() {
        for r in 0..=target {
            let mut b = f64::INFINITY;
            for (k, &kk) in table.k_list.iter().enumerate() {
                if kk <= r {
                    let c = table.e[i][k] + best[(i + 1) * width + r - kk];
                    if c < b {
                        b = c;
                    }
                }
            }
            best[i * width + r] = b;
        }
    }
    if !best[target].is_finite() {
        return Err(infeasible());
    }
    let mut a = Vec::with_capacity(n);
    let mut r = target;
    for i in 0..n {
        let goal = best[i * width + r];
        let k = (0..q)
            .find(|&k| {
                let kk = table.k_list[k];
                kk <= r && table.e[i][k] + best[(i + 1) * width + r - kk] == goal
            })
            .expect("DP reconstruction");
        a.push(k);
        r -= table.k_list[k];
    }
    Ok(a)
}

pub fn assignment_cost(table: &ErrorTable, a: &[usize]) -> f64 {
    a.iter().enumerate().map(|(i, &k)| table.e[i][k]).sum()
}

/// Column code family offered to the construction.
#[derive(Debug, Clone)]
pub enum Family {
    /// Fixed codes `C_1..C_q`, ML-decoded.
    Explicit(Vec<InnerCode>),
    /// Polar column codes of every dimension `0..=M`, each realized per
    /// column with the unfrozen set chosen by density evolution on that
    /// column's LLR distribution.
    PolarColumns,
}

/// How `E_i^k` is estimated for polar column candidates. Explicit families
/// always use the minimum-distance union proxy (they are ML-decoded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnEstimate {
    /// `min(1, m·P(f_i, d))` of the column code, i.e. list+CRC decoding
    /// treated as ML. Every column that can hold the CRC gets it.
    #[default]
    MinDistance,
    /// Sum of the SC bit-channel error probabilities of the unfrozen
    /// positions. The CRC becomes optional per column: CRC candidates pay
    /// its bits and are scored by sampled list+CRC decoding on `f_i`
    /// (see [`sampled_column_error`]), floored by the minimum-distance
    /// proxy of the CRC subcode.
    BitChannel,
}

#[derive(Debug, Clone)]
pub struct ConstructionParams {
    pub channel: ChannelParam,
    pub family: Family,
    /// Log2 of the number of columns N.
    pub n: u32,
    pub column_length: usize,
    pub target_info: usize,
    /// CRC appended to every polar column whose dimension exceeds its degree.
    pub crc: Option<CrcConfig>,
    /// Target realized average list size.
    pub target_avg_list: f64,
    pub estimate: ColumnEstimate,
    /// List size and sample count used to score CRC candidates.
    pub design_list: usize,
    pub design_trials: u64,
    pub seed: u64,
    pub step: f64,
    pub clamp: f64,
}

impl ConstructionParams {
    pub fn new(channel: ChannelParam, family: Family, n: u32, column_length: usize, target_info: usize) -> Self {
        Self {
            channel,
            family,
            n,
            column_length,
            target_info,
            crc: None,
            target_avg_list: 1.0,
            estimate: ColumnEstimate::default(),
            design_list: 8,
            design_trials: 2000,
            seed: 0,
            step: DEFAULT_GRID_STEP,
            clamp: DEFAULT_CLAMP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub spec: ConcatSpec,
    /// `Σ_i E_i^{a_i}`.
    pub bound: f64,
    pub table: ErrorTable,
    /// Chosen candidate index per column (into the table's code axis).
    pub choices: Vec<usize>,
    /// Row bit-channel distributions `f_0..f_{N-1}`.
    pub column_pmfs: Vec<QuantPmf>,
    /// Candidates excluded because their weight spectrum was not computable.
    pub skipped: Vec<(usize, usize)>,
}

/// Uncoded bit error probability of each bit channel of a length-`2^n`
/// polar transform seen from `base`.
pub fn bit_channel_errors(base: &QuantPmf, n: u32) -> Vec<f64> {
    all_bit_channel_pmfs(base, n)
        .iter()
        .map(QuantPmf::nonpositive_mass)
        .collect()
}

/// Positions sorted from most to least reliable (smaller error first,
/// larger index on ties).
pub fn reliability_order(errors: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(b.cmp(&a)));
    order
}

/// Plain polar code of length `2^n` with the `info` most reliable bit
/// channels unfrozen.
pub fn construct_polar(channel: &ChannelParam, n: u32, info: usize, step: f64, clamp: f64) -> Result<(PolarSpec, Vec<f64>)> {
    let len = 1usize << n;
    if info > len {
        return Err(invalid(format!("{info} information bits exceed block length {len}")));
    }
    let errs = bit_channel_errors(&channel_pmf(channel, step, clamp)?, n);
    let order = reliability_order(&errs);
    Ok((PolarSpec::from_info_set(len, &order[..info])?, errs))
}

struct Candidate {
    code: InnerCode,
    crc: Option<CrcConfig>,
    net: usize,
    /// Precomputed `E`; `None` means the minimum-distance proxy.
    estimate: Option<f64>,
}

/// Full construction pipeline: DE for every column, error table, DP, list
/// sizes.
pub fn construct_concat_spec(p: &ConstructionParams) -> Result<Construction> {
    let m = p.column_length;
    let n_cols = 1usize << p.n;
    let base = channel_pmf(&p.channel, p.step, p.clamp)?;
    let column_pmfs = all_bit_channel_pmfs(&base, p.n);

    // candidates[i][k]
    let candidates: Vec<Vec<Candidate>> = match &p.family {
        Family::Explicit(codes) => {
            if let Some(c) = codes.iter().find(|c| c.length() != m) {
                return Err(Error::InvalidSpec(format!(
                    "family code of length {} does not match M = {m}",
                    c.length()
                )));
            }
            if codes.is_empty() {
                return Err(Error::InvalidSpec("empty code family".into()));
            }
            (0..n_cols)
                .map(|_| {
                    codes
                        .iter()
                        .map(|c| Candidate {
                            code: c.clone(),
                            crc: None,
                            net: c.dimension(),
                            estimate: None,
                        })
                        .collect()
                })
                .collect()
        }
        Family::PolarColumns => {
            if !m.is_power_of_two() {
                return Err(Error::InvalidSpec(format!(
                    "polar columns need M to be a power of two, got {m}"
                )));
            }
            let mlog = m.trailing_zeros();
            column_pmfs
                .par_iter()
                .enumerate()
                .map(|(i, f)| polar_candidates(f, i, m, mlog, p))
                .collect::<Result<_>>()?
        }
    };

    let q = candidates[0].len();
    // The DP needs one information count per code index; polar candidates
    // share it across columns by construction.
    let k_list: Vec<usize> = candidates[0].iter().map(|c| c.net).collect();

    let mut skipped = Vec::new();
    let e: Vec<Vec<f64>> = candidates
        .par_iter()
        .zip(column_pmfs.par_iter())
        .map(|(cands, f)| {
            let tails = if cands.iter().any(|c| c.estimate.is_none()) { tail_probs(f, m) } else { Vec::new() };
            cands
                .iter()
                .map(|c| match c.estimate.map_or_else(|| estimate_from_tails(&tails, &c.code), Ok) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::Unsupported(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<Option<f64>>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(k, v)| {
                    v.unwrap_or_else(|| {
                        skipped.push((i, k));
                        f64::INFINITY
                    })
                })
                .collect()
        })
        .collect();
    if !skipped.is_empty() {
        log::warn!(
            "{} candidate codes skipped: weight spectrum not computable",
            skipped.len()
        );
    }
    // Uncomputable entries stay +inf in the DP and are written as 1 in the
    // exported table.
    let table = ErrorTable { e, k_list };
    let choices = dp_assign(&table, p.target_info)?;
    let bound = assignment_cost(&table, &choices);
    if !bound.is_finite() {
        return Err(Error::Unsupported(format!(
            "every assignment reaching {} bits uses a code whose weight spectrum is not computable",
            p.target_info
        )));
    }

    let col_errors: Vec<f64> = choices.iter().enumerate().map(|(i, &k)| table.e[i][k]).collect();
    let dims: Vec<usize> = choices
        .iter()
        .enumerate()
        .map(|(i, &k)| candidates[i][k].code.dimension())
        .collect();
    let with_crc: Vec<bool> = choices.iter().enumerate().map(|(i, &k)| candidates[i][k].crc.is_some()).collect();
    let list_sizes = list_size_profile_preferring(&col_errors, &dims, &with_crc, p.target_avg_list);

    // Distinct chosen codes become the spec family.
    let mut family: Vec<InnerCode> = Vec::new();
    let mut assignments = Vec::with_capacity(n_cols);
    let mut crcs = Vec::with_capacity(n_cols);
    for (i, &k) in choices.iter().enumerate() {
        let c = &candidates[i][k];
        let idx = match family.iter().position(|f| *f == c.code) {
            Some(idx) => idx,
            None => {
                family.push(c.code.clone());
                family.len() - 1
            }
        };
        assignments.push(idx);
        crcs.push(c.crc.clone());
    }
    let spec = ConcatSpec::new(m, family, assignments, list_sizes, crcs)?;
    debug_assert_eq!(spec.total_info(), p.target_info);

    let table = ErrorTable {
        e: table
            .e
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.min(1.0)).collect())
            .collect(),
        k_list: table.k_list,
    };
    debug_assert_eq!(table.codes(), q);
    Ok(Construction {
        spec,
        bound,
        table,
        choices,
        column_pmfs,
        skipped,
    })
}

/// Polar column candidates for one column distribution `f`, in an order
/// shared by every column.
fn polar_candidates(
    f: &QuantPmf,
    column: usize,
    m: usize,
    mlog: u32,
    p: &ConstructionParams,
) -> Result<Vec<Candidate>> {
    let crc = p.crc.as_ref();
    let errs = bit_channel_errors(f, mlog);
    let order = reliability_order(&errs);
    let code_of = |k: usize| -> Result<InnerCode> {
        InnerCode::polar(PolarSpec::from_info_set(m, &order[..k])?)
    };
    let sc_sum = |k: usize| order[..k].iter().map(|&j| errs[j]).sum::<f64>().min(1.0);
    let mut out = Vec::with_capacity(2 * m + 1);
    let tails = OnceLock::new();
    match p.estimate {
        ColumnEstimate::MinDistance => {
            for k in 0..=m {
                let code = code_of(k)?;
                let crc = crc.cloned().filter(|c| code.accepts_crc(c));
                let net = k - crc.as_ref().map_or(0, CrcConfig::degree);
                out.push(Candidate { code, crc, net, estimate: None });
            }
        }
        ColumnEstimate::BitChannel => {
            for k in 0..=m {
                out.push(Candidate { code: code_of(k)?, crc: None, net: k, estimate: Some(sc_sum(k)) });
            }
            if let Some(c) = crc {
                for k in c.degree() + 1..=m {
                    let code = code_of(k)?;
                    let sc = sc_sum(k);
                    let floor = match estimate_from_tails(tails.get_or_init(|| tail_probs(f, m)), &crc_subcode(&code, c)?) {
                        Ok(ub) => ub,
                        Err(Error::Unsupported(_)) => 0.0,
                        Err(e) => return Err(e),
                    };
                    // A sampled estimate never drops below 1/(trials+2); skip
                    // the decoding when the CRC-free code of the same net
                    // size is already better than that.
                    let plain = sc_sum(k - c.degree());
                    let e = if plain <= 1.0 / (p.design_trials + 2) as f64 || floor >= 1.0 || sc >= 1.0 {
                        1.0
                    } else {
                        let seed = substream_seed(p.seed, column, k);
                        sampled_column_error(f, &code, c, p.design_list, p.design_trials, seed)?
                            .max(floor)
                            .min(1.0)
                    };
                    out.push(Candidate { code, crc: Some(c.clone()), net: k - c.degree(), estimate: Some(e) });
                }
            }
        }
    }
    Ok(out)
}

/// The linear code actually protected by CRC-aided list decoding: a polar
/// column code restricted to information words that carry a valid CRC.
pub fn crc_subcode(code: &InnerCode, crc: &CrcConfig) -> Result<InnerCode> {
    let spec = code
        .polar_spec()
        .ok_or_else(|| invalid("CRC subcodes are defined for polar column codes"))?;
    let net = spec
        .info_count()
        .checked_sub(crc.degree())
        .filter(|&k| k > 0)
        .ok_or_else(|| invalid("column too small for its CRC"))?;
    let rows = (0..net)
        .map(|t| {
            let mut data = vec![0u8; net];
            data[t] = 1;
            polar_encode(&spec.embed(&crc.append(&data))?, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    InnerCode::from_generator(code.length(), &rows)
}

fn substream_seed(seed: u64, column: usize, k: usize) -> u64 {
    seed ^ ((column as u64) << 32 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Frame error rate of CRC-aided list decoding of a polar column code on
/// up to `trials` all-zero words with i.i.d. LLRs drawn from `f`, reported
/// as `(errors + 1) / (run + 2)` so an error-free run is not scored as
/// error-free. Stops early after [`SAMPLED_ERROR_CAP`] errors.
pub fn sampled_column_error(
    f: &QuantPmf,
    code: &InnerCode,
    crc: &CrcConfig,
    list_size: usize,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    let spec = code
        .polar_spec()
        .ok_or_else(|| invalid("sampled estimates need a polar column code"))?;
    let weights = WeightedIndex::new(f.masses()).map_err(|e| invalid(format!("bad distribution: {e}")))?;
    let mut rng = substream(seed, 0);
    let mut llrs = vec![0.0; code.length()];
    let mut errors = 0u64;
    let mut run = 0u64;
    while run < trials && errors < SAMPLED_ERROR_CAP {
        run += 1;
        for l in llrs.iter_mut() {
            *l = f.value(weights.sample(&mut rng));
        }
        let (u, _) = scl_decode(&llrs, spec, list_size, Some(crc))?;
        errors += u64::from(u.iter().any(|&b| b != 0));
    }
    Ok((errors + 1) as f64 / (run + 2) as f64)
}

pub const SAMPLED_ERROR_CAP: u64 = 100;

pub const LIST_LEVELS: [usize; 5] = [1, 2, 4, 8, 16];

/// Per-column list sizes from `{1,2,4,8,16}`.
///
/// Starting from 1 everywhere, repeatedly doubles the list of the column
/// with the largest `E_i / L_i` until the realized average usage
/// `mean(min(L_i, 2^{K_i}))` reaches `target`; the last doubling is undone
/// if that lands further from the target. Columns with no information
/// positions keep list size 1.
pub fn list_size_profile(errors: &[f64], dims: &[usize], target: f64) -> Vec<usize> {
    list_size_profile_preferring(errors, dims, &vec![false; errors.len()], target)
}

/// As [`list_size_profile`], but columns flagged in `preferred` (those
/// carrying a CRC, where a list actually pays off) are doubled first; the
/// rest only once every preferred column is saturated.
pub fn list_size_profile_preferring(errors: &[f64], dims: &[usize], preferred: &[bool], target: f64) -> Vec<usize> {
    let n = errors.len();
    let usage = |l: &[usize]| -> f64 {
        l.iter()
            .zip(dims)
            .map(|(&l, &k)| l.min(1usize << k.min(20)) as f64)
            .sum::<f64>()
            / n as f64
    };
    let max_level = *LIST_LEVELS.last().expect("levels");
    let mut l = vec![1usize; n];
    loop {
        let cur = usage(&l);
        if cur >= target {
            break;
        }
        let best = |pref: bool| {
            (0..n)
                .filter(|&i| (!pref || preferred[i]) && l[i] < max_level && l[i] < (1usize << dims[i].min(20)))
                .max_by(|&a, &b| {
                    (errors[a] / l[a] as f64)
                        .total_cmp(&(errors[b] / l[b] as f64))
                        .then(b.cmp(&a))
                })
        };
        let pick = best(true).or_else(|| best(false));
        let Some(i) = pick else { break };
        l[i] *= 2;
        let after = usage(&l);
        if after > target && (after - target) > (target - cur) {
            l[i] /= 2;
            break;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const D: f64 = 1.0 / 16.0;

    fn two_atom() -> QuantPmf {
        QuantPmf::from_atoms(D, 40.0, &[(1.0, 0.9), (-1.0, 0.1)]).unwrap()
    }

    /// Exhaustive enumeration of `w` draws from a small atom list.
    fn enumerate_tail(atoms: &[(f64, f64)], w: usize) -> f64 {
        let mut total = 0.0;
        let mut idx = vec![0usize; w];
        loop {
            let s: f64 = idx.iter().map(|&k| atoms[k].0).sum();
            let p: f64 = idx.iter().map(|&k| atoms[k].1).product();
            if s <= 1e-12 {
                total += p;
            }
            let mut pos = 0;
            loop {
                if pos == w {
                    return total;
                }
                idx[pos] += 1;
                if idx[pos] < atoms.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn bsc_channel_pmf() {
        let ch = ChannelParam::bsc(0.1).unwrap();
        // A grid fine enough to hold ln 9 within rounding.
        let f = channel_pmf(&ch, 1e-3, 40.0).unwrap();
        let atoms = f.atoms();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].0 + 9f64.ln()).abs() < 1e-3 && (atoms[0].1 - 0.1).abs() < 1e-12);
        assert!((atoms[1].0 - 9f64.ln()).abs() < 1e-3 && (atoms[1].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn awgn_channel_pmf_moments() {
        let f = channel_pmf(&ChannelParam::awgn(1.0).unwrap(), 0.05, 40.0).unwrap();
        assert!((f.mean() - 2.0).abs() < 0.04);
        assert!((f.variance() - 4.0).abs() < 0.08);
        assert!((f.total_mass() - 1.0).abs() < 1e-9);
        // LLR consistency: f(-x) = e^{-x} f(x), up to discretisation.
        let fine = channel_pmf(&ChannelParam::awgn(1.0).unwrap(), 1e-3, 40.0).unwrap();
        let m = fine.masses();
        let h = fine.offset();
        for k in (100..4000).step_by(100) {
            let x = fine.value(h + k);
            let ratio = m[h - k] / (m[h + k] * (-x).exp());
            assert!((ratio - 1.0).abs() < 1e-2, "x = {x}: {ratio}");
        }
        assert!(channel_pmf(&ChannelParam::awgn(1.0).unwrap(), 0.0, 40.0).is_err());
    }

    #[test]
    fn degenerate_point_masses() {
        let z = QuantPmf::point_mass(D, 40.0, 0.0).unwrap();
        let (minus, plus) = de_transform(&z);
        assert_eq!(minus, z);
        assert_eq!(plus, z);

        let a = 1.0;
        let f = QuantPmf::point_mass(D, 40.0, a).unwrap();
        let (minus, plus) = de_transform(&f);
        assert_eq!(plus, QuantPmf::point_mass(D, 40.0, 2.0 * a).unwrap());
        // boxplus(1, 1) = 2·atanh(tanh(0.5)^2) = 0.43378...
        let expected = 2.0 * (0.5f64.tanh().powi(2)).atanh();
        assert_eq!(minus, QuantPmf::point_mass(D, 40.0, expected).unwrap());
        assert_eq!(minus.atoms()[0].0, 7.0 * D);
    }

    #[test]
    fn two_atom_transform_matches_enumeration() {
        let f = channel_pmf(&ChannelParam::bsc(0.2).unwrap(), D, 40.0).unwrap();
        let atoms = f.atoms();
        let mut plus_expected = Vec::new();
        let mut minus_expected = Vec::new();
        for &(x, px) in &atoms {
            for &(y, py) in &atoms {
                plus_expected.push((x + y, px * py));
                minus_expected.push((boxplus(x, y), px * py));
            }
        }
        let (minus, plus) = de_transform(&f);
        assert_eq!(plus, QuantPmf::from_atoms(D, 40.0, &plus_expected).unwrap());
        assert_eq!(minus, QuantPmf::from_atoms(D, 40.0, &minus_expected).unwrap());
        for (x, _) in minus.atoms() {
            assert!(minus_expected.iter().any(|&(v, _)| (v - x).abs() <= D / 2.0));
        }
    }

    #[test]
    fn bit_channel_recursion() {
        let ch = ChannelParam::bsc(0.1).unwrap();
        let base = channel_pmf(&ch, D, 40.0).unwrap();
        assert_eq!(bit_channel_pmf(&ch, 0, 0, D, 40.0).unwrap(), base);
        let f1 = bit_channel_pmf(&ch, 1, 1, D, 40.0).unwrap();
        let atoms = f1.atoms();
        let a = base.atoms()[1].0;
        assert_eq!(atoms.len(), 3);
        assert!((atoms[0].0 + 2.0 * a).abs() < 1e-12 && (atoms[0].1 - 0.01).abs() < 1e-12);
        assert!(atoms[1].0 == 0.0 && (atoms[1].1 - 0.18).abs() < 1e-12);
        assert!((atoms[2].0 - 2.0 * a).abs() < 1e-12 && (atoms[2].1 - 0.81).abs() < 1e-12);
        assert!(bit_channel_pmf(&ch, 2, 4, D, 40.0).is_err());

        let all = all_bit_channel_pmfs(&base, 3);
        for (i, f) in all.iter().enumerate() {
            assert_eq!(*f, bit_channel_pmf(&ch, 3, i, D, 40.0).unwrap());
        }
    }

    #[test]
    fn tail_small_cases() {
        let f = two_atom();
        let f2 = self_convolution(&f, 2);
        let atoms = f2.atoms();
        assert_eq!(atoms.len(), 3);
        assert!((atoms[0].1 - 0.01).abs() < 1e-15);
        assert!((atoms[1].1 - 0.18).abs() < 1e-15);
        assert!((atoms[2].1 - 0.81).abs() < 1e-15);
        assert!((tail_prob(&f, 2).unwrap() - 0.19).abs() < 1e-15);
        let pos = QuantPmf::point_mass(D, 40.0, 0.5).unwrap();
        let zero = QuantPmf::point_mass(D, 40.0, 0.0).unwrap();
        for w in 1..6 {
            assert_eq!(tail_prob(&pos, w).unwrap(), 0.0);
            assert_eq!(tail_prob(&zero, w).unwrap(), 1.0);
        }
        assert!(tail_prob(&f, 0).is_err());
    }

    #[test]
    fn tail_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..200 {
            let n_atoms = rng.random_range(1..=5);
            let atoms: Vec<(f64, f64)> = (0..n_atoms)
                .map(|_| (rng.random_range(-40..=40) as f64 * D * 2.0, rng.random_range(0.01..1.0)))
                .collect();
            let f = QuantPmf::from_atoms(D, 40.0, &atoms).unwrap();
            let normalized = f.atoms();
            for w in 1..=3 {
                let got = tail_prob(&f, w).unwrap();
                let want = enumerate_tail(&normalized, w);
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn repetition_estimate() {
        let e = estimate_error(&two_atom(), &InnerCode::repetition(3)).unwrap();
        assert!((e - 0.028).abs() < 1e-12, "{e}");
        assert_eq!(estimate_error(&two_atom(), &InnerCode::zero(3)).unwrap(), 0.0);
        let id = estimate_error(&two_atom(), &InnerCode::identity(4)).unwrap();
        assert!((id - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tail_monotone_in_crossover() {
        for w in 1..=6 {
            let mut prev = f64::INFINITY;
            for p in [0.3, 0.2, 0.1, 0.05] {
                let f = channel_pmf(&ChannelParam::bsc(p).unwrap(), D, 40.0).unwrap();
                let t = tail_prob(&f, w).unwrap();
                assert!(t <= prev, "w {w} p {p}");
                prev = t;
            }
        }
    }

    #[test]
    fn mass_is_preserved() {
        let base = channel_pmf(&ChannelParam::awgn(0.9).unwrap(), D, 40.0).unwrap();
        for f in all_bit_channel_pmfs(&base, 4) {
            assert!((f.total_mass() - 1.0).abs() < 1e-9);
        }
    }

    fn brute_force_assign(table: &ErrorTable, target: usize) -> Option<(f64, Vec<usize>)> {
        let n = table.columns();
        let q = table.codes();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let total = q.pow(n as u32);
        for code in 0..total {
            // Most significant digit is column 0 so enumeration order is
            // lexicographic.
            let mut a = vec![0; n];
            let mut c = code;
            for i in (0..n).rev() {
                a[i] = c % q;
                c /= q;
            }
            let k: usize = a.iter().map(|&x| table.k_list[x]).sum();
            if k != target {
                continue;
            }
            let cost = assignment_cost(table, &a);
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, a));
            }
        }
        best
    }

    #[test]
    fn dp_small_cases() {
        let t = ErrorTable::new(vec![vec![0.0, 0.5], vec![0.0, 0.1]], vec![0, 1]).unwrap();
        assert_eq!(dp_assign(&t, 1).unwrap(), vec![0, 1]);
        let single = ErrorTable::new(vec![vec![0.2]; 3], vec![2]).unwrap();
        assert_eq!(dp_assign(&single, 6).unwrap(), vec![0, 0, 0]);
        assert!(matches!(dp_assign(&single, 5), Err(Error::Infeasible { .. })));
        assert!(matches!(
            dp_assign(&t, 3),
            Err(Error::Infeasible { target: 3, min: 0, max: 2 })
        ));
        // Gap in achievable sums.
        let even = ErrorTable::new(vec![vec![0.0, 0.1]; 2], vec![0, 2]).unwrap();
        assert!(matches!(dp_assign(&even, 3), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn dp_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let q = rng.random_range(1..=3);
            let k_list: Vec<usize> = (0..q).map(|_| rng.random_range(0..=4)).collect();
            let e: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..q).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let table = ErrorTable::new(e, k_list).unwrap();
            let target = rng.random_range(0..=4 * n);
            match (dp_assign(&table, target), brute_force_assign(&table, target)) {
                (Ok(a), Some((cost, b))) => {
                    assert_eq!(a, b);
                    assert!((assignment_cost(&table, &a) - cost).abs() < 1e-12);
                }
                (Err(Error::Infeasible { .. }), None) => {}
                (x, y) => panic!("{x:?} vs {y:?}"),
            }
        }
    }

    #[test]
    fn list_profile_calibration() {
        let errors = [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 1e-2, 0.1, 0.2];
        let dims = [0, 8, 8, 8, 8, 8, 8, 8];
        let l = list_size_profile(&errors, &dims, 4.0);
        assert_eq!(l[0], 1);
        let avg = l.iter().sum::<usize>() as f64 / 8.0;
        assert!((avg - 4.0).abs() <= 1.0, "{l:?}");
        // Worse columns never get a smaller list.
        for i in 1..8 {
            for j in 1..8 {
                if errors[i] > errors[j] {
                    assert!(l[i] >= l[j], "{l:?}");
                }
            }
        }
        assert_eq!(list_size_profile(&errors, &dims, 1.0), vec![1; 8]);
    }

    #[test]
    fn m1_construction_selects_most_reliable() {
        let ch = ChannelParam::awgn(0.9).unwrap();
        let fam = Family::Explicit(vec![InnerCode::zero(1), InnerCode::identity(1)]);
        let p = ConstructionParams::new(ch, fam, 6, 1, 32);
        let c = construct_concat_spec(&p).unwrap();
        let errs: Vec<f64> = c.column_pmfs.iter().map(QuantPmf::nonpositive_mass).collect();
        let chosen: Vec<usize> = (0..64).filter(|&i| c.choices[i] == 1).collect();
        assert_eq!(chosen.len(), 32);
        let max_in = chosen.iter().map(|&i| errs[i]).fold(0.0, f64::max);
        let min_out = (0..64)
            .filter(|i| !chosen.contains(i))
            .map(|i| errs[i])
            .fold(f64::INFINITY, f64::min);
        assert!(max_in <= min_out);
        let mut sorted = errs.clone();
        sorted.sort_by(f64::total_cmp);
        let sum_best: f64 = sorted[..32].iter().sum();
        assert!((c.bound - sum_best).abs() < 1e-12);
    }

    #[test]
    fn perfect_channel_uses_largest_codes() {
        let ch = ChannelParam::bsc(1e-15).unwrap();
        let fam = Family::Explicit(vec![
            InnerCode::zero(4),
            InnerCode::repetition(4),
            InnerCode::identity(4),
        ]);
        let p = ConstructionParams::new(ch, fam, 2, 4, 16);
        let c = construct_concat_spec(&p).unwrap();
        assert_eq!(c.choices, vec![2; 4]);
        assert!(c.bound < 1e-12);
    }

    #[test]
    fn polar_column_construction_small() {
        let ch = ChannelParam::awgn(0.7).unwrap();
        let mut p = ConstructionParams::new(ch, Family::PolarColumns, 3, 8, 40);
        p.crc = Some("11".parse().unwrap());
        p.target_avg_list = 2.0;
        let c = construct_concat_spec(&p).unwrap();
        assert_eq!(c.spec.total_info(), 40);
        assert_eq!(c.spec.num_columns(), 8);
        assert!(c.bound > 0.0 && c.bound.is_finite());
        let csv = c.table.to_csv();
        assert!(csv.starts_with("i,k,E_i_k\n"));
        assert_eq!(csv.lines().count(), 1 + 8 * 9);
    }

    #[test]
    fn crc_subcode_words_pass_crc() {
        let crc = CrcConfig::crc4();
        let spec = PolarSpec::from_info_set(16, &(4..16).collect::<Vec<_>>()).unwrap();
        let code = InnerCode::polar(spec.clone()).unwrap();
        let sub = crc_subcode(&code, &crc).unwrap();
        assert_eq!((sub.length(), sub.dimension()), (16, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let data: Vec<u8> = (0..8).map(|_| rng.random_range(0..2u8)).collect();
            let mut u = sub.encode(&data).unwrap();
            // Undo the transform and read back the information positions.
            crate::polar::polar_transform_in_place(&mut u);
            assert!(crc.check(&spec.extract(&u)).unwrap());
        }
        assert!(crc_subcode(&InnerCode::repetition(4), &crc).is_err());
    }

    #[test]
    fn sampled_estimate_behaves() {
        let crc = CrcConfig::crc4();
        let spec = PolarSpec::from_info_set(16, &(6..16).collect::<Vec<_>>()).unwrap();
        let code = InnerCode::polar(spec).unwrap();
        let good = channel_pmf(&ChannelParam::awgn(0.4).unwrap(), D, 40.0).unwrap();
        let bad = channel_pmf(&ChannelParam::awgn(1.2).unwrap(), D, 40.0).unwrap();
        let a = sampled_column_error(&good, &code, &crc, 4, 300, 1).unwrap();
        let b = sampled_column_error(&bad, &code, &crc, 4, 300, 1).unwrap();
        assert_eq!(a, sampled_column_error(&good, &code, &crc, 4, 300, 1).unwrap());
        assert!(a < b && b <= 1.0, "{a} {b}");
        assert!(a >= 1.0 / 302.0);
    }

    #[test]
    fn bit_channel_estimate_matches_polar_construction() {
        // Without CRC the bit-channel DP picks the globally best positions,
        // so its bound equals the plain polar SC bound of length N·M.
        let ch = ChannelParam::awgn(0.8).unwrap();
        let mut p = ConstructionParams::new(ch.clone(), Family::PolarColumns, 2, 8, 20);
        p.estimate = ColumnEstimate::BitChannel;
        let c = construct_concat_spec(&p).unwrap();
        let (spec, errs) = construct_polar(&ch, 5, 20, D, 40.0).unwrap();
        let polar_bound: f64 = spec.info_positions().iter().map(|&i| errs[i]).sum();
        assert!((c.bound - polar_bound).abs() < 1e-9 * polar_bound, "{} {}", c.bound, polar_bound);

        p.crc = Some(CrcConfig::crc4());
        p.target_avg_list = 4.0;
        p.design_trials = 200;
        let c = construct_concat_spec(&p).unwrap();
        assert_eq!(c.spec.total_info(), 20);
        assert_eq!(c.table.codes(), 9 + 4);
    }

    fn naive_convolve(f: &QuantPmf, g: &QuantPmf) -> Vec<f64> {
        let h = f.half as isize;
        let mut out = vec![0.0; f.masses.len()];
        for (a, &pa) in f.masses.iter().enumerate() {
            for (b, &pb) in g.masses.iter().enumerate() {
                let k = (a as isize + b as isize - 2 * h).clamp(-h, h) + h;
                out[k as usize] += pa * pb;
            }
        }
        out
    }

    fn naive_boxplus(f: &QuantPmf, g: &QuantPmf) -> Vec<f64> {
        let mut out = vec![0.0; f.masses.len()];
        for (a, &pa) in f.masses.iter().enumerate() {
            for (b, &pb) in g.masses.iter().enumerate() {
                let v = boxplus(f.value(a), g.value(b));
                let k = (v / f.step).round() as isize + f.half as isize;
                out[k as usize] += pa * pb;
            }
        }
        out
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14 + 1e-10 * y.abs())
    }

    #[test]
    fn fast_operations_match_naive_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..12 {
            let clamp = if trial % 2 == 0 { 6.0 } else { 40.0 };
            let mut f = channel_pmf(&ChannelParam::awgn(rng.random_range(0.3..1.5)).unwrap(), D, clamp).unwrap();
            let g = channel_pmf(&ChannelParam::awgn(rng.random_range(0.3..1.5)).unwrap(), D, clamp).unwrap();
            if trial % 3 == 0 {
                // Sparse, asymmetric support.
                let atoms: Vec<(f64, f64)> = (0..6)
                    .map(|_| (rng.random_range(-90i32..90) as f64 * D, rng.random_range(0.1..1.0)))
                    .collect();
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let atoms: Vec<_> = atoms.iter().map(|&(x, p)| (x.clamp(-clamp, clamp), p / total)).collect();
                f = QuantPmf::from_atoms(D, clamp, &atoms).unwrap();
            }
            let c = f.convolve(&g);
            assert!(close(c.masses(), &naive_convolve(&f, &g)), "convolve, trial {trial}");
            let b = f.boxplus(&g);
            assert!(close(b.masses(), &naive_boxplus(&f, &g)), "boxplus, trial {trial}");
            assert!(boxplus_table(D, (clamp / D) as usize).gap < 80);
        }
    }
}
