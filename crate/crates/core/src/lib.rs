//! Delaunay complexes of manifolds presented by coordinate atlases.
//!
//! The input is an atlas of Euclidean charts, each holding a local sample of a
//! manifold together with transition maps between overlapping charts. Every
//! sample point is perturbed in turn until no near-degenerate configuration
//! remains near it; the Delaunay stars computed in the individual charts then
//! agree and glue into a manifold simplicial complex.

pub mod assembly;
pub mod atlas;
pub mod patch;
pub mod perturbation;
pub mod sampling;
pub mod simplex;
