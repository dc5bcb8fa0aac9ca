pub mod digest;
pub mod history;
pub mod judgement;
pub mod monitor;
pub mod supervisor;
pub mod trust;
pub mod vm;

pub use digest::Digest;
