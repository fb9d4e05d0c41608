//! Compiles the guide's code blocks as doc-tests so `cargo test --doc` keeps
//! `book/` in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/spectral-basis.md")]
mod spectral_basis {}

#[doc = include_str!("../../../book/src/sensors.md")]
mod sensors {}

#[doc = include_str!("../../../book/src/injection.md")]
mod injection {}

#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}

#[doc = include_str!("../../../book/src/analysis.md")]
mod analysis {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
