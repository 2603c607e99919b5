//! The book, compiled. Each chapter of `book/src` is included as a module's
//! documentation, so every code block in the guide builds and runs as a
//! doc-test against the current library. A chapter that drifts from the API
//! fails `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/tokenizer.md")]
pub mod tokenizer {}

#[doc = include_str!("../../../book/src/encoder.md")]
pub mod encoder {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
