//! The book, compiled.
//!
//! Each module below carries one chapter of the mdbook guide (`book/` at the
//! repository root) as its documentation, so every fenced Rust snippet in
//! the book runs as a doc-test and the two cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tensors.md")]
pub mod tensors {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/tokenizer.md")]
pub mod tokenizer {}

#[doc = include_str!("../../../book/src/translation.md")]
pub mod translation {}

#[doc = include_str!("../../../book/src/generation.md")]
pub mod generation {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/sharing.md")]
pub mod sharing {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
