//! Bloom filter with double hashing over two seeded xxh3 hashes.
//!
//! Serialized as the bit array followed by one byte holding `k`.

use xxhash_rust::xxh3::xxh3_64_with_seed;

const SEED1: u64 = 0;
const SEED2: u64 = 0x9E37_79B9_7F4A_7C15;

fn hashes(key: &[u8]) -> (u64, u64) {
    (xxh3_64_with_seed(key, SEED1), xxh3_64_with_seed(key, SEED2) | 1)
}

/// Number of probes for a given density: round(bits_per_key * ln 2), clamped.
pub fn probes_for(bits_per_key: usize) -> u8 {
    ((bits_per_key as f64 * std::f64::consts::LN_2).round() as u8).clamp(1, 30)
}

#[derive(Debug, Clone)]
pub struct Bloom {
    bits: Vec<u8>,
    k: u8,
}

impl Bloom {
    pub fn build<'a>(keys: impl ExactSizeIterator<Item = &'a [u8]>, bits_per_key: usize) -> Self {
        let nbits = (keys.len() * bits_per_key).max(64);
        let mut bloom = Bloom {
            bits: vec![0; nbits.div_ceil(8)],
            k: probes_for(bits_per_key),
        };
        let nbits = bloom.bits.len() as u64 * 8;
        for key in keys {
            let (h1, h2) = hashes(key);
            for i in 0..bloom.k as u64 {
                let bit = h1.wrapping_add(i.wrapping_mul(h2)) % nbits;
                bloom.bits[(bit / 8) as usize] |= 1 << (bit % 8);
            }
        }
        bloom
    }

    pub fn may_contain(&self, key: &[u8]) -> bool {
        let nbits = self.bits.len() as u64 * 8;
        if nbits == 0 {
            return true;
        }
        let (h1, h2) = hashes(key);
        (0..self.k as u64).all(|i| {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % nbits;
            self.bits[(bit / 8) as usize] & (1 << (bit % 8)) != 0
        })
    }

    pub fn probes(&self) -> u8 {
        self.k
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.bits);
        out.push(self.k);
    }

    pub fn decode(buf: &[u8]) -> Option<Self> {
        let (&k, bits) = buf.split_last()?;
        (k > 0).then(|| Bloom {
            bits: bits.to_vec(),
            k,
        })
    }
}
