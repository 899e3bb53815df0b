//! Problem/solution file formats and design reports for the `rpi-synth` binary.

pub mod files;
pub mod report;
