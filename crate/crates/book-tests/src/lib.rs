//! Doc-test shim for the guide in `book/`.
//!
//! mdbook cannot run code blocks against this workspace's crates, so each
//! chapter is included here as rustdoc and `cargo test --doc` executes its
//! `rust` fences. A failing block points at the module named after the
//! chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/key-rate-bounds.md")]
pub mod key_rate_bounds {}

#[doc = include_str!("../../../book/src/epsilon-budgets.md")]
pub mod epsilon_budgets {}

#[doc = include_str!("../../../book/src/attack-simulation.md")]
pub mod attack_simulation {}

#[doc = include_str!("../../../book/src/auditing-logs.md")]
pub mod auditing_logs {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
