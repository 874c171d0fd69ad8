//! Runs the code blocks of the guide in `book/src` as doc-tests.
//!
//! mdbook cannot link snippets against workspace crates, so each chapter is
//! pulled in as the docs of an empty module and `cargo test` checks them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/scenario.md")]
pub mod scenario {}
#[doc = include_str!("../../../book/src/correlation.md")]
pub mod correlation {}
#[doc = include_str!("../../../book/src/deterministic-equivalent.md")]
pub mod deterministic_equivalent {}
#[doc = include_str!("../../../book/src/coverage.md")]
pub mod coverage {}
#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}
#[doc = include_str!("../../../book/src/monte-carlo.md")]
pub mod monte_carlo {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
