//! The book under `book/`, compiled.
//!
//! Each module below carries one chapter of the guide as its
//! documentation, included verbatim from the markdown source. Running
//! `cargo test --doc -p guide` therefore compiles and executes every
//! Rust snippet in the book, which keeps the prose and the library from
//! drifting apart.
//!
//! Render the human-readable version with `mdbook build book/`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/manifests.md")]
pub mod manifests {}

#[doc = include_str!("../../../book/src/background.md")]
pub mod background {}

#[doc = include_str!("../../../book/src/colour-correction.md")]
pub mod colour_correction {}

#[doc = include_str!("../../../book/src/difference-mask.md")]
pub mod difference_mask {}

#[doc = include_str!("../../../book/src/stacks.md")]
pub mod stacks {}

#[doc = include_str!("../../../book/src/weighting.md")]
pub mod weighting {}

#[doc = include_str!("../../../book/src/splitting.md")]
pub mod splitting {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
