//! Print/scan texture simulation and morphing-attack detection toolkit.
//!
//! The crate covers the full single-image MAD pipeline:
//!
//! 1. **imgcore** – image buffers, codecs, JPEG-quantization simulation,
//!    dataset manifests.
//! 2. **qrpalette** – QR-tracked color palette sheets and print/scan
//!    texture isolation (GF(256) Reed-Solomon, QR encode/decode included).
//! 3. **texsim** – texture transfer onto face images, Gaussian-noise
//!    controls, spectral comparison, FID-based texture selection.
//! 4. **features** – handcrafted extractors (intensity, uLBP, BSIF, HOG,
//!    SRM, ELA, DFT, DCT2, SVD) with feature-level fusion.
//! 5. **learn** – feature standardization and an SMO-trained RBF SVM.
//! 6. **evalmetrics** – MACER/BPCER/EER/DET, Fréchet distance with
//!    pluggable embeddings, cycle-consistency loss.
//! 7. **protocol** – leave-one-morph-tool-out experiment harness with
//!    subject-disjoint splits and report generation.

pub mod error;
pub mod evalmetrics;
pub mod features;
pub mod imgcore;
pub mod learn;
pub mod protocol;
pub mod qrpalette;
pub mod texsim;

pub use error::{Error, Result};
