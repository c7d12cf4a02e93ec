//! AES-128 pseudo-random function in counter mode.
//!
//! `PRF(key, counter) = AES_key(counter as little-endian 128-bit block)`. The same
//! primitive doubles as the length-doubling PRG of the DCF tree: a node seed is used
//! as the AES key and expanded over a small range of counters.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Key128 = [u8; 16];

#[derive(Clone)]
pub struct Prf {
    cipher: Aes128,
}

impl Prf {
    pub fn new(key: &Key128) -> Self {
        Self { cipher: Aes128::new(GenericArray::from_slice(key)) }
    }

    pub fn from_u128(key: u128) -> Self {
        Self::new(&key.to_le_bytes())
    }

    #[inline]
    pub fn block(&self, counter: u128) -> u128 {
        let mut b = GenericArray::from(counter.to_le_bytes());
        self.cipher.encrypt_block(&mut b);
        u128::from_le_bytes(b.into())
    }

    /// Low 64 bits of the block at `counter`.
    #[inline]
    pub fn word(&self, counter: u64) -> u64 {
        self.block(counter as u128) as u64
    }

    /// Fill `out` with the blocks at counters `first..first + out.len()`.
    #[inline]
    pub fn expand_into(&self, first: u128, out: &mut [u128]) {
        let mut blocks: [GenericArray<u8, _>; 8] = Default::default();
        for (chunk_idx, chunk) in out.chunks_mut(8).enumerate() {
            let base = first + (chunk_idx * 8) as u128;
            for (i, b) in blocks.iter_mut().take(chunk.len()).enumerate() {
                *b = GenericArray::from((base + i as u128).to_le_bytes());
            }
            self.cipher.encrypt_blocks(&mut blocks[..chunk.len()]);
            for (o, b) in chunk.iter_mut().zip(blocks.iter()) {
                *o = u128::from_le_bytes((*b).into());
            }
        }
    }
}

/// A (key, counter) pair naming one PRF output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfSeed {
    pub key: Key128,
    pub counter: u64,
}

/// Stateful PRF stream that refuses to hand out the same counter twice.
///
/// Counters must be consumed in strictly increasing order, which keeps the check O(1)
/// and matches how both parties walk the stream in lockstep.
#[derive(Clone)]
pub struct PrfStream {
    prf: Prf,
    key: Key128,
    next: u64,
}

impl PrfStream {
    pub fn new(key: Key128) -> Self {
        Self { prf: Prf::new(&key), key, next: 0 }
    }

    pub fn key(&self) -> Key128 {
        self.key
    }

    /// Seed naming the next fresh output.
    pub fn next_seed(&self) -> PrfSeed {
        PrfSeed { key: self.key, counter: self.next }
    }

    /// Evaluate at `seed`, marking it and every earlier counter consumed.
    pub fn derive(&mut self, seed: PrfSeed) -> Result<u64> {
        if seed.key != self.key {
            return Err(Error::SeedKeyMismatch);
        }
        if seed.counter < self.next {
            return Err(Error::SeedReuse { counter: seed.counter, next: self.next });
        }
        self.next = seed.counter + 1;
        Ok(self.prf.word(seed.counter))
    }

    pub fn next_word(&mut self) -> u64 {
        let w = self.prf.word(self.next);
        self.next += 1;
        w
    }
}
