use serde::{Deserialize, Serialize};

use super::{FaultTarget, Upsettable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootImage {
    Primary,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootSelection {
    pub image: BootImage,
    pub primary_valid: bool,
    pub fallback_valid: bool,
    /// Both images failed validation; the fallback was used regardless.
    pub critical: bool,
}

/// Primary boot image in flash plus the EEPROM fallback. The fallback is
/// written once at construction and has no mutating accessor.
#[derive(Debug, Clone, PartialEq)]
pub struct BootImageStore {
    primary: Vec<u8>,
    primary_checksum: u32,
    fallback: Vec<u8>,
    fallback_checksum: u32,
}

impl BootImageStore {
    pub fn new(image: Vec<u8>) -> Self {
        let checksum = crc32fast::hash(&image);
        BootImageStore {
            primary: image.clone(),
            primary_checksum: checksum,
            fallback: image,
            fallback_checksum: checksum,
        }
    }

    pub fn primary(&self) -> &[u8] {
        &self.primary
    }

    pub fn fallback(&self) -> &[u8] {
        &self.fallback
    }

    pub fn primary_valid(&self) -> bool {
        crc32fast::hash(&self.primary) == self.primary_checksum
    }

    fn fallback_valid(&self) -> bool {
        crc32fast::hash(&self.fallback) == self.fallback_checksum
    }

    /// Damages the stored primary checksum (not the image).
    pub fn corrupt_primary_checksum(&mut self) {
        self.primary_checksum ^= 0x8000_0001;
    }

    /// Replaces the primary image, e.g. after a software update.
    pub fn update_primary(&mut self, image: Vec<u8>) {
        self.primary_checksum = crc32fast::hash(&image);
        self.primary = image;
    }

    pub fn select_boot_image(&self) -> BootSelection {
        let primary_valid = self.primary_valid();
        let fallback_valid = self.fallback_valid();
        BootSelection {
            image: if primary_valid {
                BootImage::Primary
            } else {
                BootImage::Fallback
            },
            primary_valid,
            fallback_valid,
            critical: !primary_valid && !fallback_valid,
        }
    }
}

/// Upsets land in the primary flash image; the EEPROM is treated as immune.
impl Upsettable for BootImageStore {
    fn target(&self) -> FaultTarget {
        FaultTarget::BootPrimary
    }

    fn bit_len(&self) -> u64 {
        self.primary.len() as u64 * 8
    }

    fn flip_bit(&mut self, bit: u64) {
        self.primary[(bit / 8) as usize] ^= 1 << (bit % 8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> BootImageStore {
        BootImageStore::new((0..4096u32).map(|i| (i * 37 % 251) as u8).collect())
    }

    #[test]
    fn valid_primary_is_chosen() {
        let s = store();
        assert_eq!(s.select_boot_image().image, BootImage::Primary);
    }

    #[test]
    fn bad_checksum_falls_back() {
        let mut s = store();
        s.corrupt_primary_checksum();
        let sel = s.select_boot_image();
        assert_eq!(sel.image, BootImage::Fallback);
        assert!(!sel.critical);
    }

    #[test]
    fn upset_in_primary_falls_back() {
        let mut s = store();
        s.flip_bit(12_345);
        assert_eq!(s.select_boot_image().image, BootImage::Fallback);
        assert_eq!(s.fallback(), store().fallback());
    }

    #[test]
    fn update_revalidates() {
        let mut s = store();
        s.corrupt_primary_checksum();
        s.update_primary(vec![1, 2, 3]);
        assert_eq!(s.select_boot_image().image, BootImage::Primary);
    }
}
