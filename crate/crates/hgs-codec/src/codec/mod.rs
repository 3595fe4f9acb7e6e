//! Point-cloud coding backend: lossless octree geometry, RAHT attribute
//! transform, and the adaptive binary entropy coder the two share.
//!
//! Geometry and every attribute channel form independent substreams — a
//! channel's bytes depend only on that channel and the geometry — so they
//! can be coded in parallel and concatenated in header order.

pub mod entropy;
pub mod morton;
pub mod octree;
pub mod raht;
pub mod rangecoder;

pub use entropy::{entropy_decode, entropy_encode, SymbolKind, MAX_SYMBOLS};
pub use octree::{octree_decode, octree_encode, OctreeStream};
pub use raht::{dequantize_coeffs, quantize_coeffs, raht_forward, raht_inverse, RahtCoefficients};
