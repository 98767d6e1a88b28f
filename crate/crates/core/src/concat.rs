//! Soft-concatenated polar codes.
//!
//! Information bits fill an `M × N` matrix `V` whose column `i` is a
//! codeword of the column code `C_{a_i}`; each row of `V` is then passed
//! through the rate-1 length-`N` polar transform, giving `X = V·G`.
//!
//! Decoding walks the columns left to right. For column `i` every row
//! decoder reports the SC LLR of `v_{j,i}` given the already decided columns,
//! the column code decodes that LLR vector (brute-force ML for explicit
//! codes, CRC-aided list SC for polar columns), and the hard column decision
//! is fed back to every row.
//!
//! Bit layout: information bits fill columns left to right; within a polar
//! column they occupy the unfrozen positions in increasing order with the
//! column CRC in the last `r` unfrozen positions; within an explicit column
//! they form the information word `info · G_k`.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::crc::CrcConfig;
use crate::error::{invalid, Error, Result};
use crate::inner_codes::{parse_bit_row, CodeKind, InnerCode};
use crate::polar::{
    polar_transform_in_place, scl_decode, PolarSpec, RowDecoderState, DEFAULT_LLR_MAX,
};

/// Dense `rows × cols` GF(2) matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl CodeMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("matrix rows have unequal lengths"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            bits: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, bit: u8) {
        self.bits[row * self.cols + col] = bit & 1;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [u8] {
        &mut self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Row-major flattening (`X` "reshaped into a row").
    pub fn as_flat(&self) -> &[u8] {
        &self.bits
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Full description of a soft-concatenated code.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatSpec {
    row_spec: PolarSpec,
    column_length: usize,
    family: Vec<InnerCode>,
    assignments: Vec<usize>,
    list_sizes: Vec<usize>,
    crcs: Vec<Option<CrcConfig>>,
    total_info: usize,
}

impl ConcatSpec {
    /// `assignments[i]` indexes `family` (0-based) for column `i`.
    pub fn new(
        column_length: usize,
        family: Vec<InnerCode>,
        assignments: Vec<usize>,
        list_sizes: Vec<usize>,
        crcs: Vec<Option<CrcConfig>>,
    ) -> Result<Self> {
        let n_cols = assignments.len();
        if n_cols == 0 || !n_cols.is_power_of_two() {
            return Err(Error::InvalidSpec(format!(
                "number of columns N must be a power of two, got {n_cols}"
            )));
        }
        if list_sizes.len() != n_cols || crcs.len() != n_cols {
            return Err(Error::InvalidSpec(format!(
                "expected {n_cols} list sizes and CRC entries, got {} and {}",
                list_sizes.len(),
                crcs.len()
            )));
        }
        if family.is_empty() {
            return Err(Error::InvalidSpec("code family is empty".into()));
        }
        if let Some(c) = family.iter().find(|c| c.length() != column_length) {
            return Err(Error::InvalidSpec(format!(
                "family code of length {} in a spec with M = {column_length}",
                c.length()
            )));
        }
        let mut total_info = 0;
        for i in 0..n_cols {
            let code = family.get(assignments[i]).ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "column {i} assigned to code {} but the family has {} codes",
                    assignments[i] + 1,
                    family.len()
                ))
            })?;
            if list_sizes[i] < 1 {
                return Err(Error::InvalidSpec(format!("column {i} has list size 0")));
            }
            if let Some(crc) = &crcs[i] {
                if !code.accepts_crc(crc) {
                    return Err(Error::InvalidSpec(format!(
                        "column {i}: a degree-{} CRC needs a polar column code with more than {} information positions",
                        crc.degree(),
                        crc.degree()
                    )));
                }
            }
            total_info += code.dimension() - crcs[i].as_ref().map_or(0, CrcConfig::degree);
        }
        Ok(Self {
            row_spec: PolarSpec::rate_one(n_cols.trailing_zeros()),
            column_length,
            family,
            assignments,
            list_sizes,
            crcs,
            total_info,
        })
    }

    /// Plain polar code of length N embedded as the `M = 1` special case:
    /// family `{ {0}, {0,1} }`, column `i` frozen iff `frozen_mask[i]`.
    pub fn from_plain_polar(spec: &PolarSpec) -> Result<Self> {
        let n = spec.block_length();
        Self::new(
            1,
            vec![InnerCode::zero(1), InnerCode::identity(1)],
            spec.frozen_mask().iter().map(|&f| usize::from(!f)).collect(),
            vec![1; n],
            vec![None; n],
        )
    }

    pub fn column_length(&self) -> usize {
        self.column_length
    }

    pub fn num_columns(&self) -> usize {
        self.assignments.len()
    }

    pub fn row_spec(&self) -> &PolarSpec {
        &self.row_spec
    }

    pub fn family(&self) -> &[InnerCode] {
        &self.family
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn list_sizes(&self) -> &[usize] {
        &self.list_sizes
    }

    pub fn crcs(&self) -> &[Option<CrcConfig>] {
        &self.crcs
    }

    /// Total information length K.
    pub fn total_info(&self) -> usize {
        self.total_info
    }

    /// Code length M·N.
    pub fn code_length(&self) -> usize {
        self.column_length * self.num_columns()
    }

    pub fn rate(&self) -> f64 {
        self.total_info as f64 / self.code_length() as f64
    }

    pub fn column_code(&self, i: usize) -> &InnerCode {
        &self.family[self.assignments[i]]
    }

    /// Information bits carried by column `i`, net of its CRC.
    pub fn column_info(&self, i: usize) -> usize {
        self.column_code(i).dimension() - self.crcs[i].as_ref().map_or(0, CrcConfig::degree)
    }

    /// Replace the per-column list sizes.
    pub fn with_list_sizes(mut self, list_sizes: Vec<usize>) -> Result<Self> {
        if list_sizes.len() != self.num_columns() || list_sizes.contains(&0) {
            return Err(Error::InvalidSpec("list sizes must be N positive integers".into()));
        }
        self.list_sizes = list_sizes;
        Ok(self)
    }

    fn encode_column(&self, i: usize, data: &[u8]) -> Result<Vec<u8>> {
        let code = self.column_code(i);
        match &self.crcs[i] {
            Some(crc) => code.encode(&crc.append(data)),
            None => code.encode(data),
        }
    }

    /// Build the message matrix `V` (columns are column-code codewords).
    pub fn message_matrix(&self, info: &[u8]) -> Result<CodeMatrix> {
        if info.len() != self.total_info {
            return Err(invalid(format!(
                "expected {} information bits, got {}",
                self.total_info,
                info.len()
            )));
        }
        let mut v = CodeMatrix::zeros(self.column_length, self.num_columns());
        let mut offset = 0;
        for i in 0..self.num_columns() {
            let k = self.column_info(i);
            let col = self.encode_column(i, &info[offset..offset + k])?;
            offset += k;
            for (j, &b) in col.iter().enumerate() {
                v.set(j, i, b);
            }
        }
        Ok(v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_spec(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Encode `info` into the transmitted matrix `X = V·G`.
pub fn concat_encode(info: &[u8], spec: &ConcatSpec) -> Result<CodeMatrix> {
    let mut x = spec.message_matrix(info)?;
    for r in 0..x.rows() {
        polar_transform_in_place(x.row_mut(r));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    /// Configured list size.
    pub list_size: usize,
    /// Largest number of simultaneously active candidates (1 for ML and
    /// zero columns).
    pub list_usage: usize,
    /// CRC outcome for CRC-protected columns.
    pub crc_passed: Option<bool>,
    pub ops: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodeStats {
    pub columns: Vec<ColumnStats>,
    /// LLR updates spent in the row decoders.
    pub row_ops: u64,
}

impl DecodeStats {
    /// Realized average list size over the N columns.
    pub fn avg_list_size(&self) -> f64 {
        if self.columns.is_empty() {
            return 0.0;
        }
        self.columns.iter().map(|c| c.list_usage as f64).sum::<f64>() / self.columns.len() as f64
    }

    pub fn column_ops(&self) -> u64 {
        self.columns.iter().map(|c| c.ops).sum()
    }

    pub fn total_ops(&self) -> u64 {
        self.row_ops + self.column_ops()
    }

    pub fn crc_misses(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.crc_passed == Some(false))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecodeOptions {
    /// Run the M row-decoder steps of each column on the rayon pool.
    pub parallel_rows: bool,
    /// Channel LLR clamp; `None` uses [`DEFAULT_LLR_MAX`].
    pub llr_max: Option<f64>,
}

/// Decode an `M × N` matrix of channel LLRs (one `Vec` per row).
pub fn concat_decode(channel_llrs: &[Vec<f64>], spec: &ConcatSpec) -> Result<(Vec<u8>, DecodeStats)> {
    concat_decode_with(channel_llrs, spec, DecodeOptions::default())
}

pub fn concat_decode_with(
    channel_llrs: &[Vec<f64>],
    spec: &ConcatSpec,
    opts: DecodeOptions,
) -> Result<(Vec<u8>, DecodeStats)> {
    let m = spec.column_length();
    let n = spec.num_columns();
    if channel_llrs.len() != m || channel_llrs.iter().any(|r| r.len() != n) {
        return Err(invalid(format!(
            "LLR matrix must be {m} × {n}, got {} rows",
            channel_llrs.len()
        )));
    }
    let llr_max = opts.llr_max.unwrap_or(DEFAULT_LLR_MAX);
    let mut rows: Vec<RowDecoderState> = channel_llrs
        .iter()
        .map(|r| RowDecoderState::with_clamp(r, llr_max))
        .collect::<Result<_>>()?;

    let mut info = Vec::with_capacity(spec.total_info());
    let mut stats = DecodeStats {
        columns: Vec::with_capacity(n),
        row_ops: 0,
    };
    let mut lambda = vec![0.0; m];

    for i in 0..n {
        if opts.parallel_rows {
            rows.par_iter_mut()
                .zip(lambda.par_iter_mut())
                .for_each(|(st, l)| *l = st.next_llr());
        } else {
            for (st, l) in rows.iter_mut().zip(lambda.iter_mut()) {
                *l = st.next_llr();
            }
        }

        let code = spec.column_code(i);
        let crc = spec.crcs()[i].as_ref();
        let net = spec.column_info(i);
        let (codeword, col_stats) = match code.kind() {
            CodeKind::Polar(pspec) => {
                let (u, meta) = scl_decode(&lambda, pspec, spec.list_sizes()[i], crc)?;
                let data = pspec.extract(&u);
                info.extend_from_slice(&data[..net]);
                let mut x = u;
                polar_transform_in_place(&mut x);
                (
                    x,
                    ColumnStats {
                        list_size: spec.list_sizes()[i],
                        list_usage: meta.peak_paths,
                        crc_passed: meta.crc_selected,
                        ops: meta.ops,
                    },
                )
            }
            CodeKind::Explicit => {
                let data = code.ml_decode_info(&lambda)?;
                info.extend_from_slice(&data);
                let c = code.encode(&data)?;
                let ops = if code.dimension() == 0 {
                    0
                } else {
                    (m as u64) << code.dimension()
                };
                (
                    c,
                    ColumnStats {
                        list_size: spec.list_sizes()[i],
                        list_usage: 1,
                        crc_passed: None,
                        ops,
                    },
                )
            }
        };
        stats.columns.push(col_stats);

        if opts.parallel_rows {
            rows.par_iter_mut()
                .zip(codeword.par_iter())
                .try_for_each(|(st, &b)| st.feed(b))?;
        } else {
            for (st, &b) in rows.iter_mut().zip(&codeword) {
                st.feed(b)?;
            }
        }
    }
    stats.row_ops = rows.iter().map(RowDecoderState::op_count).sum();
    Ok((info, stats))
}

/// Counted decoder work against the `N·M·(L_av·log2 M + log2 N)` model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub counted_ops: u64,
    pub avg_list_size: f64,
    pub model: f64,
    /// `counted_ops / model`.
    pub ratio: f64,
}

pub fn complexity_model(n: usize, m: usize, avg_list: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    n * m * (avg_list * m.log2() + n.log2())
}

pub fn operation_count(stats: &DecodeStats, spec: &ConcatSpec) -> ComplexityReport {
    let avg = stats.avg_list_size();
    let model = complexity_model(spec.num_columns(), spec.column_length(), avg);
    let counted = stats.total_ops();
    ComplexityReport {
        counted_ops: counted,
        avg_list_size: avg,
        model,
        ratio: if model > 0.0 { counted as f64 / model } else { f64::NAN },
    }
}

fn bits_to_string(bits: impl IntoIterator<Item = bool>) -> String {
    bits.into_iter().map(|b| if b { '1' } else { '0' }).collect()
}

impl fmt::Display for ConcatSpec {
    /// Plain-text spec file; see [`ConcatSpec::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(" ");
        writeln!(f, "{} {} {}", self.column_length, self.num_columns(), self.total_info)?;
        writeln!(f, "{}", join(self.assignments.iter().map(|a| (a + 1).to_string()).collect()))?;
        writeln!(f, "{}", join(self.list_sizes.iter().map(ToString::to_string).collect()))?;
        writeln!(
            f,
            "{}",
            join(
                self.crcs
                    .iter()
                    .map(|c| c.as_ref().map_or("-".to_string(), ToString::to_string))
                    .collect()
            )
        )?;
        writeln!(f, "family {}", self.family.len())?;
        for code in &self.family {
            match code.kind() {
                CodeKind::Polar(p) => {
                    writeln!(f, "polar {}", bits_to_string(p.frozen_mask().iter().copied()))?
                }
                CodeKind::Explicit => {
                    writeln!(f, "generator {}", code.dimension())?;
                    for row in code.generator() {
                        writeln!(f, "{}", bits_to_string(row.iter().map(|&b| b == 1)))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Spec file grammar (blank lines and `#` comments ignored):
///
/// ```text
/// M N K
/// a_1 .. a_N            1-based family indices
/// L_1 .. L_N            list sizes
/// crc_1 .. crc_N        "-" or a coefficient string such as 10011
/// family q
/// polar <M chars, 1 = frozen>
/// generator <k>         followed by k rows of M chars
/// ```
fn parse_spec(text: &str) -> Result<ConcatSpec> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: text.lines().count() + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    };
    let ints = |line: usize, s: &str| -> Result<Vec<usize>> {
        s.split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad integer {t:?}: {e}"),
                })
            })
            .collect()
    };

    let (ln, header) = next("header \"M N K\"")?;
    let h = ints(ln, header)?;
    let [m, n, k] = h[..] else {
        return Err(Error::Parse {
            line: ln,
            msg: "header must be \"M N K\"".into(),
        });
    };

    let (ln, l) = next("assignment line")?;
    let assignments = ints(ln, l)?;
    if assignments.len() != n || assignments.contains(&0) {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected {n} assignments in 1..=q"),
        });
    }

    let (ln, l) = next("list-size line")?;
    let list_sizes = ints(ln, l)?;
    if list_sizes.len() != n {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected {n} list sizes"),
        });
    }

    let (ln, l) = next("CRC line")?;
    let crcs = l
        .split_whitespace()
        .map(|t| match t {
            "-" => Ok(None),
            poly => poly.parse::<CrcConfig>().map(Some).map_err(|e| Error::Parse {
                line: ln,
                msg: e.to_string(),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    if crcs.len() != n {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected {n} CRC entries"),
        });
    }

    let (ln, l) = next("family line")?;
    let q = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["family", q] => q.parse::<usize>().map_err(|e| Error::Parse {
            line: ln,
            msg: format!("bad family size: {e}"),
        })?,
        _ => {
            return Err(Error::Parse {
                line: ln,
                msg: "expected \"family q\"".into(),
            })
        }
    };

    let mut family = Vec::with_capacity(q);
    for _ in 0..q {
        let (ln, l) = next("family code definition")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        let code = match parts[..] {
            ["polar", mask] => {
                let bits = parse_bit_row(mask, m, ln)?;
                let spec = PolarSpec::new(bits.iter().map(|&b| b == 1).collect())
                    .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
                InnerCode::polar(spec).map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?
            }
            ["generator", kk] => {
                let kk: usize = kk.parse().map_err(|e| Error::Parse {
                    line: ln,
                    msg: format!("bad generator dimension: {e}"),
                })?;
                let mut rows = Vec::with_capacity(kk);
                for _ in 0..kk {
                    let (rl, r) = next("generator row")?;
                    rows.push(parse_bit_row(r, m, rl)?);
                }
                InnerCode::from_generator(m, &rows)
                    .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?
            }
            _ => {
                return Err(Error::Parse {
                    line: ln,
                    msg: "expected \"polar <mask>\" or \"generator <k>\"".into(),
                })
            }
        };
        family.push(code);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            msg: "unexpected trailing content".into(),
        });
    }

    let spec = ConcatSpec::new(
        m,
        family,
        assignments.into_iter().map(|a| a - 1).collect(),
        list_sizes,
        crcs,
    )?;
    if spec.total_info() != k {
        return Err(Error::InvalidSpec(format!(
            "header declares K = {k} but the assignments carry {} information bits",
            spec.total_info()
        )));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{polar_encode, sc_decode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn noiseless(x: &CodeMatrix) -> Vec<Vec<f64>> {
        x.to_rows()
            .iter()
            .map(|r| r.iter().map(|&b| if b == 0 { 1e6 } else { -1e6 }).collect())
            .collect()
    }

    fn toy_identity_spec() -> ConcatSpec {
        ConcatSpec::new(
            2,
            vec![InnerCode::identity(2)],
            vec![0, 0],
            vec![1, 1],
            vec![None, None],
        )
        .unwrap()
    }

    /// N = 8, M = 4 with polar columns of assorted rates and CRCs.
    pub(crate) fn mixed_spec() -> ConcatSpec {
        let p = |info: &[usize]| InnerCode::polar(PolarSpec::from_info_set(4, info).unwrap()).unwrap();
        let family = vec![
            InnerCode::zero(4),
            p(&[3]),
            p(&[1, 2, 3]),
            p(&[0, 1, 2, 3]),
            InnerCode::repetition(4),
        ];
        ConcatSpec::new(
            4,
            family,
            vec![0, 1, 4, 2, 2, 3, 3, 3],
            vec![1, 2, 1, 4, 4, 2, 8, 1],
            vec![None, None, None, None, None, Some("11".parse().unwrap()), None, None],
        )
        .unwrap()
    }

    #[test]
    fn toy_encode_hand_example() {
        let spec = toy_identity_spec();
        assert_eq!(spec.total_info(), 4);
        // Column 1 carries [1, 0], so U row 0 is [0, 1] and encodes to [1, 1].
        let x = concat_encode(&[0, 0, 1, 0], &spec).unwrap();
        assert_eq!(x.row(0), &[1, 1]);
        assert_eq!(x.row(1), &[0, 0]);
    }

    #[test]
    fn zero_info_encodes_to_zero() {
        let spec = mixed_spec();
        let x = concat_encode(&vec![0; spec.total_info()], &spec).unwrap();
        assert!(x.as_flat().iter().all(|&b| b == 0));
    }

    #[test]
    fn columns_of_v_are_codewords() {
        let spec = mixed_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..100 {
            let info = random_bits(&mut rng, spec.total_info());
            let v = spec.message_matrix(&info).unwrap();
            for i in 0..spec.num_columns() {
                let col = v.column(i);
                let code = spec.column_code(i);
                // ML on a noiseless image must return the column itself.
                let lam: Vec<f64> = col.iter().map(|&b| if b == 0 { 3.0 } else { -3.0 }).collect();
                assert_eq!(code.ml_decode(&lam).unwrap(), col);
                if let Some(crc) = &spec.crcs()[i] {
                    let mut u = col.clone();
                    polar_transform_in_place(&mut u);
                    let p = code.polar_spec().unwrap();
                    assert!(crc.check(&p.extract(&u)).unwrap());
                }
            }
            let x = concat_encode(&info, &spec).unwrap();
            for r in 0..v.rows() {
                assert_eq!(polar_encode(v.row(r), spec.row_spec()).unwrap(), x.row(r));
            }
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let spec = mixed_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let info = random_bits(&mut rng, spec.total_info());
            let x = concat_encode(&info, &spec).unwrap();
            let (got, stats) = concat_decode(&noiseless(&x), &spec).unwrap();
            assert_eq!(got, info);
            assert_eq!(stats.crc_misses(), 0);
        }
    }

    #[test]
    fn toy_bsc_sign_patterns_recover() {
        let spec = toy_identity_spec();
        for w in 0..16u8 {
            let info: Vec<u8> = (0..4).map(|k| (w >> k) & 1).collect();
            let x = concat_encode(&info, &spec).unwrap();
            let llr = noiseless(&x);
            assert_eq!(concat_decode(&llr, &spec).unwrap().0, info);
        }
    }

    #[test]
    fn m1_reduction_matches_sc() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let frozen: Vec<bool> = (0..32).map(|_| rng.random_bool(0.5)).collect();
            let pspec = PolarSpec::new(frozen).unwrap();
            let cspec = ConcatSpec::from_plain_polar(&pspec).unwrap();
            let info = random_bits(&mut rng, pspec.info_count());
            let x = concat_encode(&info, &cspec).unwrap();
            let plain = polar_encode(&pspec.embed(&info).unwrap(), &pspec).unwrap();
            assert_eq!(x.row(0), plain.as_slice());
            let y: Vec<f64> = (0..32).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (got, _) = concat_decode(&[y.clone()], &cspec).unwrap();
            assert_eq!(got, pspec.extract(&sc_decode(&y, &pspec).unwrap()));
        }
    }

    #[test]
    fn parallel_rows_are_bit_identical() {
        let spec = mixed_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let llr: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..8).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let a = concat_decode(&llr, &spec).unwrap();
            let b = concat_decode_with(
                &llr,
                &spec,
                DecodeOptions { parallel_rows: true, llr_max: None },
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn spec_validation() {
        let z = InnerCode::zero(4);
        assert!(ConcatSpec::new(4, vec![z.clone()], vec![0, 0, 0], vec![1; 3], vec![None; 3]).is_err());
        assert!(ConcatSpec::new(4, vec![z.clone()], vec![0, 1], vec![1; 2], vec![None; 2]).is_err());
        assert!(ConcatSpec::new(4, vec![z.clone()], vec![0, 0], vec![0, 1], vec![None; 2]).is_err());
        assert!(ConcatSpec::new(8, vec![z.clone()], vec![0, 0], vec![1; 2], vec![None; 2]).is_err());
        // CRC on an explicit code is rejected.
        let id = InnerCode::identity(4);
        assert!(ConcatSpec::new(4, vec![id], vec![0, 0], vec![1; 2], vec![Some(CrcConfig::crc4()), None]).is_err());
    }

    #[test]
    fn decode_rejects_bad_dimensions() {
        let spec = toy_identity_spec();
        assert!(matches!(
            concat_decode(&[vec![1.0, 1.0]], &spec),
            Err(Error::InvalidArgument(_))
        ));
        assert!(concat_encode(&[1, 0], &spec).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = mixed_spec();
        let text = spec.to_string();
        let back = ConcatSpec::parse(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = "2 2 4\n1 1\n1 1\n- -\nfamily 1\ngenerator 2\n10\n0x\n";
        match ConcatSpec::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let wrong_k = "2 2 3\n1 1\n1 1\n- -\nfamily 1\ngenerator 2\n10\n01\n";
        assert!(matches!(ConcatSpec::parse(wrong_k), Err(Error::InvalidSpec(_))));
        assert!(matches!(ConcatSpec::parse("2 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn complexity_model_values() {
        assert_eq!(complexity_model(16, 32, 8.0), 22528.0);
        assert_eq!(complexity_model(8, 16, 1.0), 8.0 * 16.0 * (128f64).log2());
    }
}
