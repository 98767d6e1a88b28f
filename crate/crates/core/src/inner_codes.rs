//! Short binary linear block codes used as column codes, with brute-force
//! maximum-likelihood decoding and weight-spectrum extraction.
//!
//! Codewords are packed into a `u64` (bit `j` is coordinate `j`), so the
//! code length is limited to 64.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use crate::crc::CrcConfig;
use crate::error::{invalid, Error, Result};
use crate::polar::{polar_transform_in_place, PolarSpec};

/// Largest dimension (of the code or of its dual) that is enumerated.
pub const MAX_ENUM_DIMENSION: usize = 20;
pub const MAX_LENGTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeKind {
    /// Arbitrary generator matrix, decoded by exhaustive ML search.
    Explicit,
    /// Polar code of length M, decoded by (CRC-aided) list SC.
    Polar(PolarSpec),
}

/// Minimum distance and its multiplicity. `min_distance` is `None` for the
/// zero code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spectrum {
    pub min_distance: Option<usize>,
    pub multiplicity: u64,
}

#[derive(Debug, Clone)]
pub struct InnerCode {
    length: usize,
    rows: Vec<u64>,
    kind: CodeKind,
    spectrum: OnceLock<std::result::Result<Spectrum, String>>,
}

impl PartialEq for InnerCode {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.rows == other.rows && self.kind == other.kind
    }
}

fn pack(bits: &[u8]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (j, &b)| acc | (u64::from(b & 1) << j))
}

fn unpack(word: u64, len: usize) -> Vec<u8> {
    (0..len).map(|j| ((word >> j) & 1) as u8).collect()
}

/// Rank over GF(2), plus the row-reduced basis and its pivot columns.
fn row_reduce(rows: &[u64], len: usize) -> (Vec<u64>, Vec<usize>) {
    let mut basis: Vec<u64> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..len {
        let bit = 1u64 << col;
        let Some(p) = (r..basis.len()).find(|&i| basis[i] & bit != 0) else {
            continue;
        };
        basis.swap(r, p);
        for i in 0..basis.len() {
            if i != r && basis[i] & bit != 0 {
                basis[i] ^= basis[r];
            }
        }
        pivots.push(col);
        r += 1;
    }
    basis.truncate(r);
    (basis, pivots)
}

fn binomial(n: usize, k: usize) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

fn krawtchouk(j: usize, w: usize, n: usize) -> i128 {
    (0..=j)
        .map(|s| {
            let term = binomial(w, s) * binomial(n - w, j - s);
            if s % 2 == 0 {
                term
            } else {
                -term
            }
        })
        .sum()
}

/// Weight histogram of the span of `rows` by Gray-code enumeration.
fn enumerate_weights(rows: &[u64], len: usize) -> Vec<u64> {
    let mut hist = vec![0u64; len + 1];
    let mut word = 0u64;
    hist[0] = 1;
    for step in 1u64..(1u64 << rows.len()) {
        word ^= rows[step.trailing_zeros() as usize];
        hist[word.count_ones() as usize] += 1;
    }
    hist
}

impl InnerCode {
    /// Code spanned by the given generator rows (each of length `length`).
    pub fn from_generator(length: usize, rows: &[Vec<u8>]) -> Result<Self> {
        if length == 0 || length > MAX_LENGTH {
            return Err(invalid(format!(
                "inner code length must be in 1..={MAX_LENGTH}, got {length}"
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != length) {
            return Err(invalid(format!(
                "generator row has {} entries, expected {length}",
                bad.len()
            )));
        }
        let packed: Vec<u64> = rows.iter().map(|r| pack(r)).collect();
        Self::from_packed(length, packed, CodeKind::Explicit)
    }

    fn from_packed(length: usize, rows: Vec<u64>, kind: CodeKind) -> Result<Self> {
        let (basis, _) = row_reduce(&rows, length);
        if basis.len() != rows.len() {
            return Err(Error::InvalidSpec(format!(
                "generator rows are linearly dependent (rank {} of {})",
                basis.len(),
                rows.len()
            )));
        }
        Ok(Self {
            length,
            rows,
            kind,
            spectrum: OnceLock::new(),
        })
    }

    /// The code `{0}` of the given length.
    pub fn zero(length: usize) -> Self {
        Self::from_generator(length, &[]).expect("zero code")
    }

    /// All of GF(2)^length.
    pub fn identity(length: usize) -> Self {
        let rows: Vec<Vec<u8>> = (0..length)
            .map(|i| (0..length).map(|j| u8::from(i == j)).collect())
            .collect();
        Self::from_generator(length, &rows).expect("identity code")
    }

    pub fn repetition(length: usize) -> Self {
        Self::from_generator(length, &[vec![1; length]]).expect("repetition code")
    }

    /// Polar code of length M: generator rows are the rows of `F^{⊗m}` at
    /// the unfrozen positions.
    pub fn polar(spec: PolarSpec) -> Result<Self> {
        let length = spec.block_length();
        if length > MAX_LENGTH {
            return Err(invalid(format!(
                "polar inner code length {length} exceeds {MAX_LENGTH}"
            )));
        }
        let rows = spec
            .info_positions()
            .iter()
            .map(|&i| {
                let mut e = vec![0u8; length];
                e[i] = 1;
                polar_transform_in_place(&mut e);
                pack(&e)
            })
            .collect();
        Self::from_packed(length, rows, CodeKind::Polar(spec))
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn kind(&self) -> &CodeKind {
        &self.kind
    }

    pub fn polar_spec(&self) -> Option<&PolarSpec> {
        match &self.kind {
            CodeKind::Polar(s) => Some(s),
            CodeKind::Explicit => None,
        }
    }

    pub fn generator(&self) -> Vec<Vec<u8>> {
        self.rows.iter().map(|&r| unpack(r, self.length)).collect()
    }

    fn encode_packed(&self, info: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(k, _)| (info >> k) & 1 == 1)
            .fold(0, |acc, (_, &r)| acc ^ r)
    }

    /// `info · generator` over GF(2).
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.dimension() {
            return Err(invalid(format!(
                "expected {} information bits, got {}",
                self.dimension(),
                info.len()
            )));
        }
        match &self.kind {
            CodeKind::Polar(spec) => {
                let mut u = spec.embed(info)?;
                polar_transform_in_place(&mut u);
                Ok(u)
            }
            CodeKind::Explicit => Ok(unpack(self.encode_packed(pack(info)), self.length)),
        }
    }

    /// Codeword minimizing `Σ c_j λ_j`; ties go to the smallest information
    /// word read as an integer (bit 0 least significant).
    pub fn ml_decode(&self, lambda: &[f64]) -> Result<Vec<u8>> {
        let info = self.ml_decode_info(lambda)?;
        Ok(unpack(self.encode_packed(pack(&info)), self.length))
    }

    /// As [`Self::ml_decode`] but returns the information word.
    pub fn ml_decode_info(&self, lambda: &[f64]) -> Result<Vec<u8>> {
        if lambda.len() != self.length {
            return Err(invalid(format!(
                "expected {} LLRs, got {}",
                self.length,
                lambda.len()
            )));
        }
        let k = self.dimension();
        if k > MAX_ENUM_DIMENSION {
            return Err(Error::Unsupported(format!(
                "ML decoding needs 2^{k} codewords; at most 2^{MAX_ENUM_DIMENSION} are enumerated"
            )));
        }
        let mut best = (0.0f64, 0u64);
        for info in 1u64..(1u64 << k) {
            let mut c = self.encode_packed(info);
            let mut phi = 0.0;
            while c != 0 {
                phi += lambda[c.trailing_zeros() as usize];
                c &= c - 1;
            }
            if phi < best.0 {
                best = (phi, info);
            }
        }
        Ok(unpack(best.1, k))
    }

    /// Full weight distribution `A_0..A_M`.
    ///
    /// Enumerates the code directly when its dimension is at most
    /// [`MAX_ENUM_DIMENSION`], otherwise enumerates the dual and applies the
    /// MacWilliams identity.
    pub fn weight_distribution(&self) -> Result<Vec<u64>> {
        let k = self.dimension();
        let len = self.length;
        if k <= MAX_ENUM_DIMENSION {
            return Ok(enumerate_weights(&self.rows, len));
        }
        if len - k > MAX_ENUM_DIMENSION {
            return Err(Error::Unsupported(format!(
                "weight spectrum of a ({len},{k}) code: neither the code nor its dual has dimension <= {MAX_ENUM_DIMENSION}"
            )));
        }
        let dual = self.dual_rows();
        let b = enumerate_weights(&dual, len);
        let scale = 1i128 << dual.len();
        (0..=len)
            .map(|j| {
                let s: i128 = b
                    .iter()
                    .enumerate()
                    .filter(|(_, &bw)| bw > 0)
                    .map(|(w, &bw)| bw as i128 * krawtchouk(j, w, len))
                    .sum();
                debug_assert_eq!(s % scale, 0);
                Ok((s / scale) as u64)
            })
            .collect()
    }

    /// Basis of the dual code.
    pub fn dual_rows(&self) -> Vec<u64> {
        let (basis, pivots) = row_reduce(&self.rows, self.length);
        (0..self.length)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut h = 1u64 << free;
                for (row, &p) in basis.iter().zip(&pivots) {
                    if (row >> free) & 1 == 1 {
                        h |= 1u64 << p;
                    }
                }
                h
            })
            .collect()
    }

    /// Minimum nonzero weight and the number of codewords achieving it.
    pub fn weight_spectrum(&self) -> Result<Spectrum> {
        self.spectrum
            .get_or_init(|| {
                let dist = self.weight_distribution().map_err(|e| e.to_string())?;
                Ok(dist
                    .iter()
                    .enumerate()
                    .skip(1)
                    .find(|(_, &a)| a > 0)
                    .map(|(d, &a)| Spectrum {
                        min_distance: Some(d),
                        multiplicity: a,
                    })
                    .unwrap_or(Spectrum {
                        min_distance: None,
                        multiplicity: 0,
                    }))
            })
            .clone()
            .map_err(Error::Unsupported)
    }

    /// Parse the plain-text generator format: a header line `M K` followed
    /// by `K` rows of `M` characters from `{0,1}`.
    pub fn parse_generator(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header line \"M K\"".into(),
        })?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hline,
                msg: format!("bad header: {e}"),
            })?;
        let [m, k] = nums[..] else {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be \"M K\"".into(),
            });
        };
        let mut rows = Vec::with_capacity(k);
        for _ in 0..k {
            let (ln, l) = lines.next().ok_or(Error::Parse {
                line: hline,
                msg: format!("expected {k} generator rows"),
            })?;
            rows.push(parse_bit_row(l, m, ln)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "unexpected trailing content".into(),
            });
        }
        Self::from_generator(m, &rows)
    }

    pub fn load_generator(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_generator(&std::fs::read_to_string(path)?)
    }

    /// Error estimate validity: the list decoder for polar columns can use a
    /// CRC, explicit codes cannot.
    pub fn accepts_crc(&self, crc: &CrcConfig) -> bool {
        matches!(self.kind, CodeKind::Polar(_)) && self.dimension() > crc.degree()
    }
}

pub(crate) fn parse_bit_row(s: &str, len: usize, line: usize) -> Result<Vec<u8>> {
    let bits: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Parse {
                line,
                msg: format!("unexpected character {other:?} in bit row"),
            }),
        })
        .collect::<Result<_>>()?;
    if bits.len() != len {
        return Err(Error::Parse {
            line,
            msg: format!("bit row has {} entries, expected {len}", bits.len()),
        });
    }
    Ok(bits)
}

impl fmt::Display for InnerCode {
    /// Writes the plain-text generator format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.length, self.dimension())?;
        for r in self.generator() {
            let s: String = r.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
