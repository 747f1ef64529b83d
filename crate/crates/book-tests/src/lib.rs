//! Keeps the guide honest: each chapter of `book/src` is included as a
//! module doc, so `cargo test --doc` compiles and runs every Rust code
//! block in the book against the current library. One module per
//! chapter makes a failing snippet name its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/curves.md")]
pub mod curves {}

#[doc = include_str!("../../../book/src/dtw.md")]
pub mod dtw {}

#[doc = include_str!("../../../book/src/self-organization.md")]
pub mod self_organization {}

#[doc = include_str!("../../../book/src/scalability.md")]
pub mod scalability {}

#[doc = include_str!("../../../book/src/flexibility.md")]
pub mod flexibility {}

#[doc = include_str!("../../../book/src/robustness.md")]
pub mod robustness {}

#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
