//! Synthetic depth-patch generation for 2.5D recognition.
//!
//! The crate renders clean depth patches of CAD meshes from viewpoints on an icosphere,
//! corrupts them with a randomized augmentation pipeline (background noise, foreground warping,
//! polygonal occluders), and provides the losses and nearest-neighbour retrieval protocol used to
//! train and evaluate depth-denoising networks. Datasets are written as raw `DPZ1` tensors plus a
//! JSON manifest.
//!
//! Geometry, rendering, losses and evaluation are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar used by the dataset pipeline.

pub mod augment;
pub mod datapack;
pub mod evalkit;
pub mod geometry;
pub mod losses;
pub mod obj;
pub mod patch;
pub mod procnoise;
pub mod renderer;
pub mod scalar;
pub mod viewsphere;

pub use scalar::Real;

pub type Vec3 = geometry::Vec3<f64>;
pub type Quaternion = geometry::Quaternion<f64>;
pub type Pose = geometry::Pose<f64>;
pub type TriangleMesh = geometry::TriangleMesh<f64>;
pub type Camera = geometry::Camera<f64>;
pub type Viewpoint = viewsphere::Viewpoint<f64>;
pub type RenderedView = renderer::RenderedView<f64>;
/// Patches are stored and augmented in single precision, matching the on-disk tensors.
pub type DepthPatch = patch::DepthPatch<f32>;



pub type PairSample = augment::PairSample<f32>;
pub type FeatureVec = losses::FeatureVec<f32>;
pub type DescriptorEntry = evalkit::DescriptorEntry<f32>;
