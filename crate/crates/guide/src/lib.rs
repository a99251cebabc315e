//! Chapters of the guide in `book/`, compiled so their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/biot_savart.md")]
pub mod biot_savart {}

#[doc = include_str!("../../../book/src/condition_a.md")]
pub mod condition_a {}

#[doc = include_str!("../../../book/src/duhamel.md")]
pub mod duhamel {}

#[doc = include_str!("../../../book/src/picard.md")]
pub mod picard {}

#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
