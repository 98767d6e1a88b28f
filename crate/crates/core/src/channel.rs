//! Binary-input symmetric channels and LLR generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::polar::{clamp_llr, DEFAULT_LLR_MAX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    /// Unit-energy BPSK (0 → +1, 1 → −1) plus Gaussian noise.
    Awgn { sigma: f64 },
    Bsc { crossover: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParam {
    pub kind: ChannelKind,
    pub seed: u64,
    pub llr_max: f64,
}

impl ChannelParam {
    pub fn awgn(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("AWGN sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            kind: ChannelKind::Awgn { sigma },
            seed: 0,
            llr_max: DEFAULT_LLR_MAX,
        })
    }

    pub fn bsc(crossover: f64) -> Result<Self> {
        if !(crossover > 0.0 && crossover < 0.5) {
            return Err(invalid(format!(
                "BSC crossover must lie in (0, 1/2), got {crossover}"
            )));
        }
        Ok(Self {
            kind: ChannelKind::Bsc { crossover },
            seed: 0,
            llr_max: DEFAULT_LLR_MAX,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_llr_max(mut self, llr_max: f64) -> Self {
        self.llr_max = llr_max;
        self
    }

    /// Send `bits` and return the clamped channel LLRs.
    pub fn transmit<R: Rng + ?Sized>(&self, bits: &[u8], rng: &mut R) -> Vec<f64> {
        match self.kind {
            ChannelKind::Awgn { sigma } => {
                let scale = 2.0 / (sigma * sigma);
                bits.iter()
                    .map(|&b| {
                        let s = if b & 1 == 0 { 1.0 } else { -1.0 };
                        let noise: f64 = rng.sample(StandardNormal);
                        clamp_llr(scale * (s + sigma * noise), self.llr_max)
                    })
                    .collect()
            }
            ChannelKind::Bsc { crossover } => {
                let mag = clamp_llr(((1.0 - crossover) / crossover).ln(), self.llr_max);
                bits.iter()
                    .map(|&b| {
                        let received = (b & 1) ^ u8::from(rng.random_bool(crossover));
                        if received == 0 {
                            mag
                        } else {
                            -mag
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Free-function form of [`ChannelParam::transmit`].
pub fn transmit<R: Rng + ?Sized>(bits: &[u8], ch: &ChannelParam, rng: &mut R) -> Vec<f64> {
    ch.transmit(bits, rng)
}

/// Noise deviation for unit-energy BPSK at the given Eb/N0 and code rate.
pub fn snr_to_sigma(ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(invalid(format!("code rate must lie in (0, 1], got {rate}")));
    }
    if !ebn0_db.is_finite() {
        return Err(invalid("Eb/N0 must be finite"));
    }
    Ok((1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))).sqrt())
}

/// Es/N0 in dB corresponding to an Eb/N0 at the given rate.
pub fn ebn0_to_esn0_db(ebn0_db: f64, rate: f64) -> f64 {
    ebn0_db + 10.0 * rate.log10()
}

/// Independent RNG substream for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-frame generators: one for the message, one for the channel noise,
/// so schemes with equal code length see identical noise for equal seeds.
pub fn frame_rngs(seed: u64, frame: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (substream(seed, 2 * frame), substream(seed, 2 * frame + 1))
}
