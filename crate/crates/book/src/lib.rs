//! Compiles the guide's code blocks as doc-tests so the book and the library
//! cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/penalties.md")]
pub mod penalties {}

#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}

#[doc = include_str!("../../../book/src/score-test.md")]
pub mod score_test {}

#[doc = include_str!("../../../book/src/sequential.md")]
pub mod sequential {}

#[doc = include_str!("../../../book/src/multiple-testing.md")]
pub mod multiple_testing {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
