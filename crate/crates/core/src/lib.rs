pub mod bcc;
pub mod clustering;
pub mod comparison;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod fhe;
pub mod forest;
pub mod protocol;
pub mod synth;
