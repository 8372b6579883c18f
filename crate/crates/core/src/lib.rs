//! Thermal/visual face image fusion in the wavelet domain, with eigenface
//! projection and a backpropagation MLP classifier.
//!
//! - [`imgio`]: grayscale images, PGM I/O, padding and cropping
//! - [`wavelet`]: Haar / db2 2D DWT and multi-level decomposition trees
//! - [`fusion`]: coefficient fusion rules and image-level fusion
//! - [`eigen`]: eigenface PCA via the Gram-matrix (snapshot) method
//! - [`mlp`]: sigmoid MLP trained online with momentum
//! - [`pipeline`]: dataset ingest, training, evaluation, synthetic data

pub mod eigen;
pub mod fusion;
pub mod imgio;
pub mod mlp;
pub mod pipeline;
pub mod wavelet;

pub use fusion::{fuse_coeffs, fuse_images, fuse_trees, FusionPolicy, FusionRule};
pub use imgio::{load_image, save_image, Dims, Image};
pub use wavelet::{decompose, decompose_padded, dwt2, idwt2, reconstruct, WaveletKind};
