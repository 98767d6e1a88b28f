//! Rate-1 polar transform, successive-cancellation decoding and CRC-aided
//! list decoding.
//!
//! The generator is `G = F^{⊗n}` with `F = [[1,0],[1,1]]` in natural bit
//! order (no bit-reversal). Writing `u = (a, b)` for the two halves of the
//! input, `u·G = ((a ⊕ b)·G', b·G')`, so the SC recursion descends into the
//! left half with the box-plus of the two halves of the parent LLRs and into
//! the right half with `L_right + (1 - 2s)·L_left` where `s` is the
//! re-encoded left decision.

use crate::crc::CrcConfig;
use crate::error::{invalid, Error, Result};

/// Default magnitude bound applied to every channel LLR on ingestion.
pub const DEFAULT_LLR_MAX: f64 = 40.0;

/// A polar code of length `2^n` described by its frozen mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarSpec {
    n: u32,
    frozen: Vec<bool>,
    info_positions: Vec<usize>,
}

impl PolarSpec {
    /// `frozen_mask[i] == true` freezes input position `i` to zero.
    pub fn new(frozen_mask: Vec<bool>) -> Result<Self> {
        let len = frozen_mask.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(invalid(format!(
                "polar block length must be a power of two, got {len}"
            )));
        }
        let info_positions = frozen_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (!f).then_some(i))
            .collect();
        Ok(Self {
            n: len.trailing_zeros(),
            frozen: frozen_mask,
            info_positions,
        })
    }

    /// The rate-1 code of length `2^n` (nothing frozen).
    pub fn rate_one(n: u32) -> Self {
        Self::new(vec![false; 1 << n]).expect("power of two")
    }

    /// Build a code whose unfrozen set is exactly `info`.
    pub fn from_info_set(block_length: usize, info: &[usize]) -> Result<Self> {
        let mut mask = vec![true; block_length];
        for &i in info {
            if i >= block_length {
                return Err(invalid(format!(
                    "information position {i} outside block of length {block_length}"
                )));
            }
            mask[i] = false;
        }
        Self::new(mask)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn block_length(&self) -> usize {
        self.frozen.len()
    }

    pub fn info_count(&self) -> usize {
        self.info_positions.len()
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// Unfrozen positions in increasing order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Place `info` into the unfrozen positions of an otherwise-zero input.
    pub fn embed(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_count() {
            return Err(invalid(format!(
                "expected {} information bits, got {}",
                self.info_count(),
                info.len()
            )));
        }
        let mut u = vec![0u8; self.block_length()];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            u[pos] = b & 1;
        }
        Ok(u)
    }

    /// Read the unfrozen positions of `u`.
    pub fn extract(&self, u: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| u[p]).collect()
    }
}

/// In-place `x ← x·F^{⊗n}` over GF(2). `x.len()` must be a power of two.
pub fn polar_transform_in_place(x: &mut [u8]) {
    let len = x.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in x.chunks_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (p, q) in a.iter_mut().zip(b.iter()) {
                *p ^= *q;
            }
        }
        half *= 2;
    }
}

/// Encode a full length-N input vector `u` (frozen positions are taken as
/// given, not forced).
pub fn polar_encode(u: &[u8], spec: &PolarSpec) -> Result<Vec<u8>> {
    if u.len() != spec.block_length() {
        return Err(invalid(format!(
            "input length {} does not match block length {}",
            u.len(),
            spec.block_length()
        )));
    }
    let mut x: Vec<u8> = u.iter().map(|b| b & 1).collect();
    polar_transform_in_place(&mut x);
    Ok(x)
}

/// Exact check-node combination `2·atanh(tanh(a/2)·tanh(b/2))`.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let (aa, ab) = (a.abs(), b.abs());
    let mag = aa.min(ab) + ln1p_exp_neg(aa + ab) - ln1p_exp_neg((aa - ab).abs());
    sign * mag.max(0.0)
}

/// `ln(1 + e^{-x})` for `x ≥ 0`; past 36 the logarithm is the identity to
/// within an ulp.
#[inline]
fn ln1p_exp_neg(x: f64) -> f64 {
    let e = (-x).exp();
    if x > 36.0 {
        e
    } else {
        e.ln_1p()
    }
}

#[inline]
pub fn clamp_llr(x: f64, llr_max: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-llr_max, llr_max)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + ln1p_exp_neg(x.abs())
}

/// Increment of the LLR-based path metric for deciding `bit` against `llr`.
#[inline]
pub fn path_metric_increment(llr: f64, bit: u8) -> f64 {
    if bit == 0 {
        softplus(-llr)
    } else {
        softplus(llr)
    }
}

#[inline]
fn hard_decision(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// Step-wise SC state for one received row.
///
/// `llr(i)` must be called with `i == decided().len()`; `feed` appends the
/// decision for that position. The LLR workspace is recomputed lazily, so
/// repeated `llr` calls for the same index are free.
#[derive(Debug)]
pub struct RowDecoderState {
    n: u32,
    len: usize,
    // alpha[depth] lives at alpha_off[depth] with length len >> depth.
    alpha: Vec<f64>,
    // Re-encoded bits of the most recent left child at each depth >= 1.
    beta: Vec<u8>,
    offsets: Vec<usize>,
    decided: Vec<u8>,
    ready: bool,
    scratch: Vec<u8>,
    scratch2: Vec<u8>,
    ops: u64,
}

impl Clone for RowDecoderState {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            len: self.len,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            offsets: self.offsets.clone(),
            decided: self.decided.clone(),
            ready: self.ready,
            scratch: Vec::with_capacity(self.len),
            scratch2: Vec::with_capacity(self.len),
            ops: self.ops,
        }
    }

    // Reuses the buffers of `self`; list decoding recycles dead paths.
    fn clone_from(&mut self, src: &Self) {
        self.n = src.n;
        self.len = src.len;
        self.alpha.clone_from(&src.alpha);
        self.beta.clone_from(&src.beta);
        self.offsets.clone_from(&src.offsets);
        self.decided.clone_from(&src.decided);
        self.ready = src.ready;
        self.ops = src.ops;
    }
}

impl RowDecoderState {
    pub fn new(channel_llrs: &[f64]) -> Result<Self> {
        Self::with_clamp(channel_llrs, DEFAULT_LLR_MAX)
    }

    pub fn with_clamp(channel_llrs: &[f64], llr_max: f64) -> Result<Self> {
        let len = channel_llrs.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(invalid(format!(
                "row length must be a power of two, got {len}"
            )));
        }
        let n = len.trailing_zeros();
        let mut offsets = Vec::with_capacity(n as usize + 2);
        let mut acc = 0;
        for d in 0..=n {
            offsets.push(acc);
            acc += len >> d;
        }
        offsets.push(acc);
        let mut alpha = vec![0.0; acc];
        for (a, &y) in alpha.iter_mut().zip(channel_llrs) {
            *a = clamp_llr(y, llr_max);
        }
        Ok(Self {
            n,
            len,
            alpha,
            beta: vec![0; acc],
            offsets,
            decided: Vec::with_capacity(len),
            ready: false,
            scratch: Vec::with_capacity(len),
            scratch2: Vec::with_capacity(len),
            ops: 0,
        })
    }

    pub fn block_length(&self) -> usize {
        self.len
    }

    pub fn decided(&self) -> &[u8] {
        &self.decided
    }

    pub fn is_complete(&self) -> bool {
        self.decided.len() == self.len
    }

    /// Number of elementary LLR updates performed so far.
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    /// SC LLR of position `index`, conditioned on the decided prefix.
    pub fn llr(&mut self, index: usize) -> Result<f64> {
        if index != self.decided.len() || index >= self.len {
            return Err(Error::ContractViolation(format!(
                "LLR requested for position {index} but {} positions are decided (block length {})",
                self.decided.len(),
                self.len
            )));
        }
        Ok(self.next_llr())
    }

    /// LLR of the next undecided position.
    pub fn next_llr(&mut self) -> f64 {
        debug_assert!(!self.is_complete());
        if !self.ready {
            self.update_alpha();
            self.ready = true;
        }
        self.alpha[self.offsets[self.n as usize]]
    }

    fn update_alpha(&mut self) {
        let i = self.decided.len();
        let n = self.n as usize;
        let start = if i == 0 { 1 } else { n - i.trailing_zeros() as usize };
        for d in start..=n {
            let size = self.len >> d;
            let (head, tail) = self.alpha.split_at_mut(self.offsets[d]);
            let parent = &head[self.offsets[d - 1]..];
            let child = &mut tail[..size];
            let right = (i >> (n - d)) & 1 == 1;
            if right {
                let s = &self.beta[self.offsets[d]..self.offsets[d] + size];
                for k in 0..size {
                    let l = parent[k];
                    child[k] = parent[k + size] + if s[k] == 0 { l } else { -l };
                }
            } else {
                for k in 0..size {
                    child[k] = boxplus(parent[k], parent[k + size]);
                }
            }
            self.ops += size as u64;
        }
    }

    /// Append the decision for the next position.
    pub fn feed(&mut self, bit: u8) -> Result<()> {
        if self.is_complete() {
            return Err(Error::ContractViolation(format!(
                "all {} positions already decided",
                self.len
            )));
        }
        if !self.ready {
            // The workspace must reflect the current position before the
            // partial sums move on.
            self.update_alpha();
        }
        let bit = bit & 1;
        let i = self.decided.len();
        self.decided.push(bit);
        self.ready = false;

        let n = self.n as usize;
        let mut cur = std::mem::take(&mut self.scratch);
        let mut next = std::mem::take(&mut self.scratch2);
        cur.clear();
        cur.push(bit);
        let mut d = n;
        while d > 0 {
            let size = self.len >> d;
            let off = self.offsets[d];
            if (i >> (n - d)) & 1 == 0 {
                self.beta[off..off + size].copy_from_slice(&cur);
                break;
            }
            next.clear();
            next.extend(
                self.beta[off..off + size]
                    .iter()
                    .zip(cur.iter())
                    .map(|(l, r)| l ^ r),
            );
            next.extend_from_slice(&cur);
            std::mem::swap(&mut cur, &mut next);
            d -= 1;
        }
        self.scratch = cur;
        self.scratch2 = next;
        Ok(())
    }
}

/// SC decode of a single received word; frozen positions are forced to 0.
pub fn sc_decode(llrs: &[f64], spec: &PolarSpec) -> Result<Vec<u8>> {
    Ok(sc_decode_counted(llrs, spec)?.0)
}

/// As [`sc_decode`], also returning the elementary LLR update count.
pub fn sc_decode_counted(llrs: &[f64], spec: &PolarSpec) -> Result<(Vec<u8>, u64)> {
    if llrs.len() != spec.block_length() {
        return Err(invalid(format!(
            "received {} LLRs for block length {}",
            llrs.len(),
            spec.block_length()
        )));
    }
    let mut st = RowDecoderState::new(llrs)?;
    for i in 0..spec.block_length() {
        let l = st.next_llr();
        let b = if spec.is_frozen(i) { 0 } else { hard_decision(l) };
        st.feed(b)?;
    }
    let ops = st.op_count();
    Ok((st.decided, ops))
}

/// Outcome details of a list decode.
#[derive(Debug, Clone, PartialEq)]
pub struct SclMetadata {
    /// Paths alive at the end of decoding.
    pub surviving_paths: usize,
    /// Largest number of simultaneously active paths.
    pub peak_paths: usize,
    /// `Some(true)` if a CRC-passing path was returned, `Some(false)` on a
    /// CRC miss (best-metric fallback), `None` without CRC.
    pub crc_selected: Option<bool>,
    /// Elementary LLR updates summed over all paths.
    pub ops: u64,
}

/// One surviving candidate at the end of list decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ListCandidate {
    pub u: Vec<u8>,
    pub metric: f64,
}

struct Path {
    state: RowDecoderState,
    metric: f64,
}

/// CRC-aided successive-cancellation list decoder.
pub fn scl_decode(
    llrs: &[f64],
    spec: &PolarSpec,
    list_size: usize,
    crc: Option<&CrcConfig>,
) -> Result<(Vec<u8>, SclMetadata)> {
    let (list, meta, winner) = scl_decode_list(llrs, spec, list_size, crc)?;
    Ok((list[winner].u.clone(), meta))
}

/// List decode returning every surviving candidate ordered by ascending
/// metric, together with the index of the selected one.
pub fn scl_decode_list(
    llrs: &[f64],
    spec: &PolarSpec,
    list_size: usize,
    crc: Option<&CrcConfig>,
) -> Result<(Vec<ListCandidate>, SclMetadata, usize)> {
    if list_size < 1 {
        return Err(invalid("list size must be at least 1"));
    }
    if llrs.len() != spec.block_length() {
        return Err(invalid(format!(
            "received {} LLRs for block length {}",
            llrs.len(),
            spec.block_length()
        )));
    }
    if let Some(c) = crc {
        if spec.info_count() <= c.degree() {
            return Err(invalid(format!(
                "CRC of degree {} needs more than {} information positions",
                c.degree(),
                spec.info_count()
            )));
        }
    }

    let mut paths = vec![Path {
        state: RowDecoderState::new(llrs)?,
        metric: 0.0,
    }];
    let mut peak = 1;
    let mut retired_ops = 0u64;
    // (metric, parent path, bit)
    let mut cand: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * list_size);
    let mut keep = vec![[false; 2]; 0];
    let mut metrics: Vec<[f64; 2]> = Vec::new();
    let mut spare: Vec<RowDecoderState> = Vec::new();
    let mut next: Vec<Path> = Vec::with_capacity(2 * list_size);

    for i in 0..spec.block_length() {
        if spec.is_frozen(i) {
            for p in paths.iter_mut() {
                let l = p.state.next_llr();
                p.metric += path_metric_increment(l, 0);
                p.state.feed(0)?;
            }
            continue;
        }

        cand.clear();
        for (idx, p) in paths.iter_mut().enumerate() {
            let l = p.state.next_llr();
            cand.push((p.metric + path_metric_increment(l, 0), idx, 0));
            cand.push((p.metric + path_metric_increment(l, 1), idx, 1));
        }
        if cand.len() > list_size {
            // Ties go to the lowest (path, bit) pair, as a stable sort would.
            cand.select_nth_unstable_by(list_size - 1, |a, b| {
                a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2)))
            });
            cand.truncate(list_size);
        }
        keep.clear();
        keep.resize(paths.len(), [false; 2]);
        metrics.clear();
        metrics.resize(paths.len(), [0.0; 2]);
        for &(m, idx, b) in &cand {
            keep[idx][b as usize] = true;
            metrics[idx][b as usize] = m;
        }

        let mut old = std::mem::take(&mut paths);
        for (idx, mut p) in old.drain(..).enumerate() {
            match keep[idx] {
                [false, false] => {
                    retired_ops += p.state.op_count();
                    spare.push(p.state);
                }
                [true, false] | [false, true] => {
                    let b = u8::from(keep[idx][1]);
                    p.metric = metrics[idx][b as usize];
                    p.state.feed(b)?;
                    next.push(p);
                }
                [true, true] => {
                    let state = match spare.pop() {
                        Some(mut st) => {
                            st.clone_from(&p.state);
                            st
                        }
                        None => p.state.clone(),
                    };
                    let mut twin = Path {
                        state,
                        metric: metrics[idx][1],
                    };
                    // The clone inherits the shared prefix work; count it once.
                    twin.state.ops = 0;
                    twin.state.feed(1)?;
                    p.metric = metrics[idx][0];
                    p.state.feed(0)?;
                    next.push(p);
                    next.push(twin);
                }
            }
        }
        paths = std::mem::replace(&mut next, old);
        peak = peak.max(paths.len());
    }

    let ops = retired_ops + paths.iter().map(|p| p.state.op_count()).sum::<u64>();

    let mut list: Vec<ListCandidate> = paths
        .into_iter()
        .map(|p| ListCandidate {
            metric: p.metric,
            u: p.state.decided,
        })
        .collect();
    list.sort_by(|a, b| a.metric.total_cmp(&b.metric));

    let (winner, crc_selected) = match crc {
        None => (0, None),
        Some(c) => match list
            .iter()
            .position(|cand| c.check(&spec.extract(&cand.u)).unwrap_or(false))
        {
            Some(w) => (w, Some(true)),
            None => (0, Some(false)),
        },
    };
    let meta = SclMetadata {
        surviving_paths: list.len(),
        peak_paths: peak,
        crc_selected,
        ops,
    };
    Ok((list, meta, winner))
}
