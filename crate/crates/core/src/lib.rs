//! Core algorithms of the spoofguard synthetic-speech detector.
//!
//! Everything here is a pure function of its inputs and only needs `alloc`:
//! framing, voice activity detection and the DCT front-end ([`dsp`]), context
//! stacking and normalization ([`features`]), the bottleneck multilayer
//! perceptron ([`mlp`]), the Gaussian mixture and RBF-SVM back-ends ([`gmm`],
//! [`svm`]) and score aggregation plus EER metrics ([`eval`]).
//!
//! File formats, audio IO, corpus synthesis and the command line live in the
//! `spoofguard` crate.
//!
//! Build with `default-features = false` for `no_std` targets.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_op_in_unsafe_fn)]

extern crate alloc;

pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod label;
pub mod linalg;
pub mod math;
pub mod mlp;
pub mod svm;

pub use error::{Error, Result};
pub use label::{Label, TargetClass};
pub use linalg::Matrix;

/// Default audio sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
/// Frame duration in milliseconds.
pub const FRAME_MS: u32 = 20;
/// Number of leading DCT coefficients kept per frame.
pub const DCT_COEFFS: usize = 128;
/// Frames of context on each side of a centre frame.
pub const CONTEXT_FRAMES: usize = 10;
/// Width of a stacked network input: (2 * 10 + 1) * 128.
pub const STACKED_DIM: usize = (2 * CONTEXT_FRAMES + 1) * DCT_COEFFS;
/// Hidden layer widths of the reference network; the last one is the bottleneck.
pub const HIDDEN_LAYERS: [usize; 3] = [1024, 512, 32];
/// Width of the bottleneck layer.
pub const BOTTLENECK_DIM: usize = 32;
/// Output classes: human, S1-like, other spoof.
pub const NUM_CLASSES: usize = 3;
