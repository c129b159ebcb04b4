//! Runs the code snippets of the guide in `book/src` as doc-tests.
//!
//! One module per chapter, so a failing snippet is at least traceable to
//! its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}
#[doc = include_str!("../../../book/src/frames.md")]
pub mod frames {}
#[doc = include_str!("../../../book/src/scheme.md")]
pub mod scheme {}
#[doc = include_str!("../../../book/src/solvers.md")]
pub mod solvers {}
#[doc = include_str!("../../../book/src/physics.md")]
pub mod physics {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
