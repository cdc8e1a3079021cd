//! Planar perceptron networks for learning image transformations.
//!
//! A planar network is a 2D sheet of independent perceptrons, one per output
//! pixel (or polar sector). Each node reads a small neighbourhood of the input
//! picture, forms a clamped linear combination, and is trained with the
//! batched perceptron rule from pairs of images related by a translation,
//! rotation or scaling. Applying a trained network to its own output chains the
//! learned transformation.
//!
//! - [`geometry`]: node positions and neighbourhoods, Cartesian and polar.
//! - [`imaging`]: grayscale images, transforms, resampling, polar pictures.
//! - [`network`]: the network itself, forward pass, chaining, checkpoints.
//! - [`training`]: error metric, batch deltas, the training loop.
//! - [`datagen`]: noise/dot sources, corpus and frame ingestion, chained samples.
//! - [`experiments`]: chained evaluation, sweeps, transfer matrices, reproductions.
//! - [`render`]: SVG structure graphs, PNG panels, error curves.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod imaging;
pub mod network;
pub mod render;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{GridPosition, NeighborhoodSpec, PolarGeometry, Topology, TopologyKind, TopologySpec};
pub use imaging::{GrayImage, Picture, PolarImage, Raster, TransformSpec};
pub use network::{PlanarNetwork, StructureGraph};
pub use training::{TrainConfig, TrainReport};
