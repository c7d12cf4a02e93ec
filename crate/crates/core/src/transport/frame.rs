//! Wire format.
//!
//! ```text
//! frame   := len:u32 LE | round:u16 LE | kind:u8 | payload[len]
//! message := count:u32 LE | width:u8 | ceil(count * width / 8) bytes, values packed LSB-first
//! ```

use crate::error::{Error, Result};
use crate::ring::mask_bits;

pub const FRAME_HEADER_LEN: usize = 7;
pub const MESSAGE_HEADER_LEN: usize = 5;
/// Round index carried by handshake frames. These are never charged to the transcript.
pub const SETUP_ROUND: u16 = 0xFFFF;
const MAX_PAYLOAD: usize = 1 << 31;

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum MsgKind {
    Hello = 0,
    /// Beaver openings `x - a`, `y - b`.
    Beaver = 1,
    /// Masked wire reveal `x + r`.
    Reveal = 2,
    /// Boolean Beaver openings for AND gates.
    And = 3,
    /// daBit opening `v xor b`.
    Convert = 4,
    /// Output shares sent to the receiving party.
    Output = 5,
}

impl MsgKind {
    pub fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => MsgKind::Hello,
            1 => MsgKind::Beaver,
            2 => MsgKind::Reveal,
            3 => MsgKind::And,
            4 => MsgKind::Convert,
            5 => MsgKind::Output,
            _ => return Err(Error::Frame(format!("unknown message type {b}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgKind::Hello => "hello",
            MsgKind::Beaver => "beaver",
            MsgKind::Reveal => "reveal",
            MsgKind::And => "and",
            MsgKind::Convert => "convert",
            MsgKind::Output => "output",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub round: u16,
    pub kind: MsgKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Frame(format!("short frame header ({} bytes)", bytes.len())));
        }
        let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        if bytes.len() != FRAME_HEADER_LEN + len {
            return Err(Error::Frame(format!(
                "declared payload {len} bytes, frame carries {}",
                bytes.len() - FRAME_HEADER_LEN
            )));
        }
        Ok(Frame {
            round: u16::from_le_bytes([bytes[4], bytes[5]]),
            kind: MsgKind::from_u8(bytes[6])?,
            payload: bytes[FRAME_HEADER_LEN..].to_vec(),
        })
    }

    /// Payload length from a raw header, for stream readers.
    pub fn payload_len(header: &[u8; FRAME_HEADER_LEN]) -> Result<usize> {
        let len = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Frame(format!("payload length {len} exceeds limit")));
        }
        Ok(len)
    }
}

/// A batch of equal-width values. Width is in bits, 1..=64.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub width: u8,
    pub values: Vec<u64>,
}

impl Message {
    pub fn new(width: u32, values: Vec<u64>) -> Self {
        debug_assert!((1..=64).contains(&width));
        Self { width: width as u8, values }
    }

    pub fn bits(values: Vec<bool>) -> Self {
        Self { width: 1, values: values.into_iter().map(u64::from).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn payload_bits(&self) -> u64 {
        self.values.len() as u64 * self.width as u64
    }

    pub fn encoded_len(&self) -> usize {
        MESSAGE_HEADER_LEN + (self.payload_bits() as usize).div_ceil(8)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        out.push(self.width);
        let w = self.width as u32;
        if w == 64 {
            for v in &self.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
            return out;
        }
        let mask = mask_bits(w);
        let mut acc: u128 = 0;
        let mut filled = 0u32;
        for v in &self.values {
            acc |= ((v & mask) as u128) << filled;
            filled += w;
            while filled >= 8 {
                out.push(acc as u8);
                acc >>= 8;
                filled -= 8;
            }
        }
        if filled > 0 {
            out.push(acc as u8);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message> {
        if bytes.len() < MESSAGE_HEADER_LEN {
            return Err(Error::Frame("short message header".into()));
        }
        let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let width = bytes[4];
        if !(1..=64).contains(&width) {
            return Err(Error::Frame(format!("value width {width} out of range")));
        }
        let body = &bytes[MESSAGE_HEADER_LEN..];
        let need = (count * width as usize).div_ceil(8);
        if body.len() != need {
            return Err(Error::Frame(format!("expected {need} body bytes, got {}", body.len())));
        }
        let w = width as u32;
        let mut values = Vec::with_capacity(count);
        if w == 64 {
            for c in body.chunks_exact(8) {
                values.push(u64::from_le_bytes(c.try_into().unwrap()));
            }
            return Ok(Message { width, values });
        }
        let mask = mask_bits(w);
        let mut acc: u128 = 0;
        let mut filled = 0u32;
        let mut it = body.iter();
        for _ in 0..count {
            while filled < w {
                acc |= (*it.next().unwrap() as u128) << filled;
                filled += 8;
            }
            values.push(acc as u64 & mask);
            acc >>= w;
            filled -= w;
        }
        Ok(Message { width, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_layout_is_byte_exact() {
        let f = Frame { round: 0x0102, kind: MsgKind::Reveal, payload: vec![0xaa, 0xbb] };
        assert_eq!(f.encode(), vec![2, 0, 0, 0, 0x02, 0x01, 2, 0xaa, 0xbb]);
        assert_eq!(Frame::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn message_bit_packing() {
        let m = Message::new(3, vec![0b101, 0b011, 0b111]);
        // 101 | 011 << 3 | 111 << 6 = 0b1_1101_1101 over two bytes
        assert_eq!(m.encode(), vec![3, 0, 0, 0, 3, 0b1101_1101, 0b1]);
        assert_eq!(m.payload_bits(), 9);
    }

    #[test]
    fn corrupt_frames_are_rejected() {
        assert!(Frame::decode(&[1, 0, 0]).is_err());
        assert!(Frame::decode(&[5, 0, 0, 0, 0, 0, 1, 9]).is_err());
        assert!(Frame::decode(&[0, 0, 0, 0, 0, 0, 99]).is_err());
        assert!(Message::decode(&[1, 0, 0, 0, 0]).is_err());
        assert!(Message::decode(&[2, 0, 0, 0, 8, 1]).is_err());
    }

    proptest! {
        #[test]
        fn message_roundtrip(width in 1u32..=64, raw in proptest::collection::vec(any::<u64>(), 0..50)) {
            let vals: Vec<u64> = raw.iter().map(|v| v & mask_bits(width)).collect();
            let m = Message::new(width, vals);
            let enc = m.encode();
            prop_assert_eq!(enc.len(), m.encoded_len());
            prop_assert_eq!(Message::decode(&enc).unwrap(), m);
        }
    }
}
