//! Test-suite transformations: the Trycatch display rewrite and static
//! backward slicing of multi-assertion tests.

mod depend;
mod slice;
mod trycatch;

pub use depend::{build_dependence_graph, DependenceGraph, DependenceOptions, Edge, EdgeKind};
pub use slice::{
    slice_closure, slice_for_assertion, slice_suite, SlicePolicy, SliceSet, SliceSidecar,
    SlicedSuite,
};
pub use trycatch::{trycatch_rewrite, trycatch_rewrite_suite};

use crate::dsl::StatementId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("variable `{name}` used at line {line} before any definition")]
    UnboundVariable {
        name: String,
        statement: StatementId,
        line: u32,
    },
    #[error("test `{test}` has {count} assertion(s), ordinal {ordinal} is out of range")]
    OrdinalOutOfRange {
        test: String,
        ordinal: usize,
        count: usize,
    },
}
