//! 256-byte downlink frames: u16 sequence, u8 payload length, 251 payload
//! bytes (zero padded), Fletcher-16 over the first 254 bytes. Multi-byte
//! fields are big-endian.

use thiserror::Error;

pub const PACKET_LEN: usize = 256;
pub const PAYLOAD_LEN: usize = 251;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("packet {index}: checksum mismatch")]
    Checksum { index: usize },
    #[error("packet {index}: expected sequence {expected}, got {got}")]
    Sequence { index: usize, expected: u16, got: u16 },
    #[error("packet {index}: payload length {len} exceeds {PAYLOAD_LEN}")]
    Length { index: usize, len: usize },
}

pub fn fletcher16(data: &[u8]) -> u16 {
    let (mut a, mut b) = (0u16, 0u16);
    for &byte in data {
        a = (a + byte as u16) % 255;
        b = (b + a) % 255;
    }
    (b << 8) | a
}

pub fn frame(payload: &[u8], first_seq: u16) -> Vec<[u8; PACKET_LEN]> {
    payload
        .chunks(PAYLOAD_LEN)
        .enumerate()
        .map(|(i, chunk)| {
            let mut p = [0u8; PACKET_LEN];
            p[..2].copy_from_slice(&first_seq.wrapping_add(i as u16).to_be_bytes());
            p[2] = chunk.len() as u8;
            p[3..3 + chunk.len()].copy_from_slice(chunk);
            let sum = fletcher16(&p[..PACKET_LEN - 2]);
            p[PACKET_LEN - 2..].copy_from_slice(&sum.to_be_bytes());
            p
        })
        .collect()
}

pub fn deframe(packets: &[[u8; PACKET_LEN]]) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::new();
    let mut expected = None;
    for (index, p) in packets.iter().enumerate() {
        let sum = u16::from_be_bytes([p[PACKET_LEN - 2], p[PACKET_LEN - 1]]);
        if fletcher16(&p[..PACKET_LEN - 2]) != sum {
            return Err(FrameError::Checksum { index });
        }
        let seq = u16::from_be_bytes([p[0], p[1]]);
        if let Some(e) = expected {
            if seq != e {
                return Err(FrameError::Sequence { index, expected: e, got: seq });
            }
        }
        expected = Some(seq.wrapping_add(1));
        let len = p[2] as usize;
        if len > PAYLOAD_LEN {
            return Err(FrameError::Length { index, len });
        }
        out.extend_from_slice(&p[3..3 + len]);
    }
    Ok(out)
}
