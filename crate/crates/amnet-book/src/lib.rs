//! The book chapters, included so `cargo test --doc` runs their code.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}
#[doc = include_str!("../../../book/src/format.md")]
pub mod format {}
#[doc = include_str!("../../../book/src/encodings.md")]
pub mod encodings {}
#[doc = include_str!("../../../book/src/solving.md")]
pub mod solving {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/lyapunov.md")]
pub mod lyapunov {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}
