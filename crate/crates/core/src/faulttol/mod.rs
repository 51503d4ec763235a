//! Radiation fault tolerance: SEC-DED storage, scrubbing, configuration
//! memory, TMR voting, boot-image fallback and the upset injector.

mod bank;
mod boot;
mod config_mem;
pub mod ecc;
mod injector;
mod tmr;

pub use bank::{BankLabel, DumpError, MemoryBank, ReadStats, ScrubReport};
pub use boot::{BootImage, BootImageStore, BootSelection};
pub use config_mem::{ConfigMemory, ConfigScrubReport};
pub use ecc::{ecc_decode, ecc_encode, CodeWord, EccStatus, CODEWORD_BITS};
pub use injector::{FaultEvent, FaultInjector, FaultTarget, ScheduledFlip};
pub use tmr::{tmr_vote, Disagreement};

/// Storage that can suffer bit flips.
pub trait Upsettable {
    fn target(&self) -> FaultTarget;
    fn bit_len(&self) -> u64;
    fn flip_bit(&mut self, bit: u64);
}
