//! Compression codec for explicit 3D Gaussian Splatting point data.
//!
//! The encoder turns a 3DGS PLY file into a compact `.hgs` bitstream in two
//! stages. A sparse-representation stage quantizes attribute channels,
//! integerizes positions onto a `2^BD` lattice, enforces voxel uniqueness,
//! and optionally prunes low-importance primitives to hit a rate target. A
//! point-cloud coding stage then compresses geometry with a lossless octree
//! occupancy coder and attributes with a region-adaptive Haar transform, both
//! driven by an adaptive binary range coder.
//!
//! Modules map onto the pipeline: [`ply`] (I/O boundary), [`quant`]
//! (scalar quantizers), [`geometry`] (normalization, deduplication, pruning),
//! [`latent`] (PCA and learned low-rank attribute decoders), [`codec`]
//! (octree + RAHT + entropy coding), [`bitstream`] (container format),
//! [`ratecontrol`] (size model and planners), and [`pipeline`] (end-to-end
//! encode/decode used by the `hgs` CLI).

pub mod bitstream;
pub mod codec;
pub mod error;
pub mod geometry;
pub mod kdtree;
pub mod latent;
pub mod pipeline;
pub mod ply;
pub mod quant;
pub mod ratecontrol;

pub use error::{Error, Result};
