//! MSB-first bit packing.

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `n` bits of `value`, `n <= 32`.
    pub fn write(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 32);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | (value & ((1u64 << n) - 1));
        self.nbits += n;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.bytes.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1u64 << self.nbits) - 1;
    }

    pub fn zeros(&mut self, mut n: u32) {
        while n > 0 {
            let chunk = n.min(32);
            self.write(0, chunk);
            n -= chunk;
        }
    }

    /// Pads with zero bits up to the next byte boundary.
    pub fn align(&mut self) {
        if self.nbits > 0 {
            self.write(0, 8 - self.nbits);
        }
    }

    #[cfg(test)]
    fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 + self.nbits as u64
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.align();
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

/// Ran off the end; carries the byte offset where data stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutOfData(pub usize);

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<u64, OutOfData> {
        let byte = (self.pos / 8) as usize;
        let b = *self.bytes.get(byte).ok_or(OutOfData(self.bytes.len()))?;
        let bit = (b >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(bit as u64)
    }

    pub fn read(&mut self, n: u32) -> Result<u64, OutOfData> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()?;
        }
        Ok(v)
    }

    pub fn align(&mut self) {
        self.pos = self.pos.div_ceil(8) * 8;
    }

    pub fn byte_pos(&self) -> usize {
        (self.pos / 8) as usize
    }
}
