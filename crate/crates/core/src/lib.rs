//! Fairness auditing for binary face classifiers.
//!
//! The toolkit sorts a face corpus by visual similarity (PCA scores snapped
//! to a uniform grid), overlays per-image prediction error as a colormapped
//! montage, and ships a small trainable CNN with input-gradient saliency so
//! dataset-bias experiments run end to end on synthetic data.

pub mod augment;
pub mod gridlayout;
pub mod ingest;
pub mod nn;
pub mod numerics;
pub mod pca;
pub mod render;
pub mod synth;
pub mod tensor;
