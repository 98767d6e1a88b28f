//! Bitwise CRC over GF(2), most-significant bit first, no reflection and no
//! final XOR.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrcConfig {
    degree: usize,
    // Full polynomial, x^r coefficient first.
    polynomial: Vec<u8>,
    init: Vec<u8>,
}

impl CrcConfig {
    /// `polynomial` holds all `r + 1` coefficients, highest degree first.
    pub fn new(polynomial: Vec<u8>) -> Result<Self> {
        let degree = polynomial.len().saturating_sub(1);
        Self::with_init(polynomial, vec![0; degree])
    }

    pub fn with_init(polynomial: Vec<u8>, init: Vec<u8>) -> Result<Self> {
        if polynomial.len() < 2 {
            return Err(invalid("CRC polynomial needs degree at least 1"));
        }
        if polynomial[0] != 1 {
            return Err(invalid("CRC polynomial must have leading coefficient 1"));
        }
        if polynomial.iter().any(|&b| b > 1) || init.iter().any(|&b| b > 1) {
            return Err(invalid("CRC coefficients must be 0 or 1"));
        }
        let degree = polynomial.len() - 1;
        if init.len() != degree {
            return Err(invalid(format!(
                "CRC init register needs {degree} bits, got {}",
                init.len()
            )));
        }
        Ok(Self {
            degree,
            polynomial,
            init,
        })
    }

    /// x^4 + x + 1.
    pub fn crc4() -> Self {
        Self::new(vec![1, 0, 0, 1, 1]).expect("valid polynomial")
    }

    /// x^8 + x^2 + x + 1.
    pub fn crc8() -> Self {
        "100000111".parse().expect("valid polynomial")
    }

    /// x^16 + x^12 + x^5 + 1.
    pub fn crc16() -> Self {
        "10001000000100001".parse().expect("valid polynomial")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn polynomial(&self) -> &[u8] {
        &self.polynomial
    }

    pub fn init_value(&self) -> &[u8] {
        &self.init
    }

    /// Remainder of `data · x^r` divided by the polynomial, register seeded
    /// with the init value.
    pub fn compute(&self, data: &[u8]) -> Vec<u8> {
        let r = self.degree;
        let mut reg = self.init.clone();
        for &bit in data {
            let feedback = reg[0] ^ (bit & 1);
            reg.rotate_left(1);
            reg[r - 1] = 0;
            if feedback == 1 {
                for (x, &p) in reg.iter_mut().zip(&self.polynomial[1..]) {
                    *x ^= p;
                }
            }
        }
        reg
    }

    /// `data` followed by its CRC.
    pub fn append(&self, data: &[u8]) -> Vec<u8> {
        let mut out = data.to_vec();
        out.extend(self.compute(data));
        out
    }

    /// True iff the trailing `r` bits equal the CRC of the leading bits.
    pub fn check(&self, data_with_crc: &[u8]) -> Result<bool> {
        if data_with_crc.len() <= self.degree {
            return Err(invalid(format!(
                "CRC check needs more than {} bits, got {}",
                self.degree,
                data_with_crc.len()
            )));
        }
        let (data, tail) = data_with_crc.split_at(data_with_crc.len() - self.degree);
        Ok(self.compute(data) == tail)
    }
}

/// Free-function form of [`CrcConfig::compute`].
pub fn crc_compute(data: &[u8], cfg: &CrcConfig) -> Result<Vec<u8>> {
    if data.is_empty() {
        return Err(invalid("CRC input must be nonempty"));
    }
    Ok(cfg.compute(data))
}

pub fn crc_check(data_with_crc: &[u8], cfg: &CrcConfig) -> Result<bool> {
    cfg.check(data_with_crc)
}

impl fmt::Display for CrcConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.polynomial {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for CrcConfig {
    type Err = Error;

    /// Binary coefficient string, e.g. `"10011"` for x^4 + x + 1.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(invalid(format!("bad CRC polynomial character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Polynomial long division of data·x^r, written out independently.
    fn long_division(data: &[u8], poly: &[u8]) -> Vec<u8> {
        let r = poly.len() - 1;
        let mut buf: Vec<u8> = data.to_vec();
        buf.extend(std::iter::repeat(0).take(r));
        for i in 0..data.len() {
            if buf[i] == 1 {
                for (j, &p) in poly.iter().enumerate() {
                    buf[i + j] ^= p;
                }
            }
        }
        buf[data.len()..].to_vec()
    }

    #[test]
    fn zero_data_zero_remainder() {
        assert_eq!(CrcConfig::crc4().compute(&[0; 12]), vec![0; 4]);
    }

    #[test]
    fn single_one_gives_x_plus_one() {
        assert_eq!(CrcConfig::crc4().compute(&[1]), vec![0, 0, 1, 1]);
    }

    #[test]
    fn parse_and_display() {
        let c: CrcConfig = "10011".parse().unwrap();
        assert_eq!(c, CrcConfig::crc4());
        assert_eq!(c.to_string(), "10011");
        assert!("0011".parse::<CrcConfig>().is_err());
        assert!("1".parse::<CrcConfig>().is_err());
        assert!("10a1".parse::<CrcConfig>().is_err());
    }

    #[test]
    fn single_flips_detected_within_cycle() {
        let crc = CrcConfig::crc4();
        for len in 1..=11usize {
            for w in 0..(1u32 << len) {
                let data: Vec<u8> = (0..len).map(|k| ((w >> k) & 1) as u8).collect();
                let word = crc.append(&data);
                assert!(crc.check(&word).unwrap());
                for p in 0..word.len() {
                    let mut bad = word.clone();
                    bad[p] ^= 1;
                    assert!(!crc.check(&bad).unwrap(), "len {len} pos {p}");
                }
            }
        }
    }

    #[test]
    fn short_inputs_rejected() {
        let crc = CrcConfig::crc4();
        assert!(matches!(crc.check(&[0, 1, 0, 1]), Err(Error::InvalidArgument(_))));
        assert!(crc_compute(&[], &crc).is_err());
    }

    #[test]
    fn init_value_seeds_register() {
        // x^4 mod (x^4 + x + 1) = x + 1, so this seed acts like a leading 1 bit.
        let crc = CrcConfig::with_init(vec![1, 0, 0, 1, 1], vec![0, 0, 1, 1]).unwrap();
        let data = [0, 1, 1];
        let zero_seed = CrcConfig::crc4();
        assert_eq!(crc.compute(&data), zero_seed.compute(&[1, 0, 1, 1]));
        assert!(crc.check(&crc.append(&data)).unwrap());
    }

    proptest! {
        #[test]
        fn matches_long_division(data in proptest::collection::vec(0u8..2, 1..64)) {
            for crc in [CrcConfig::crc4(), CrcConfig::crc8(), CrcConfig::crc16()] {
                prop_assert_eq!(crc.compute(&data), long_division(&data, crc.polynomial()));
            }
        }

        #[test]
        fn linear_and_systematic(pair in (1usize..48).prop_flat_map(|n| (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(0u8..2, n),
        ))) {
            let (a, b) = pair;
            let crc = CrcConfig::crc4();
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let lhs = crc.compute(&x);
            let rhs: Vec<u8> = crc.compute(&a).iter().zip(crc.compute(&b)).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(lhs, rhs);
            prop_assert!(crc.check(&crc.append(&a)).unwrap());
        }
    }
}
