//! A feature-based tree adjoining grammar engine.
//!
//! The crate implements:
//!
//! * flat feature structures with named coindexation variables and
//!   destructive-free unification ([`features`]),
//! * elementary trees, a plain-text grammar format, tree validation and a
//!   linter for extraction tree families ([`tree`], [`format`], [`lint`]),
//! * substitution and adjunction with top/bottom feature threading, plus
//!   final top-bottom unification ([`compose`]),
//! * a small exhaustive parser that returns derivation trees ([`parse`]),
//! * tree-local multi-component grammars and a structural comparator used
//!   to check the single-component analyses against them ([`mc`]).
//!
//! Everything is deterministic: iteration orders, generated variable names
//! and generated index atoms are stable across runs.

pub mod compose;
pub mod features;
pub mod format;
pub mod lint;
pub mod mc;
pub mod parse;
pub mod tree;

pub use compose::{
    adjoin, finalize, instantiate, substitute, ComposeError, CompositionRecord, DerivedNode,
    DerivedTree, FinalNode, FinalTree, FinalizeError, OpKind, Rejection,
};
pub use features::{
    rename, resolve, unify, Bindings, Clash, FeatureStructure, FeatureValue, Renamer, VarGen,
    VarId,
};
pub use format::{load_grammar, serialize_grammar, FormatError, RawTreeSet};
pub use lint::lint_extraction_pair;
pub use mc::{
    compare, language_sample, load_mc_grammar, mc_compose, EquivalenceReport, McError, McGrammar,
    Placement, SampleSource, TreeSet,
};
pub use parse::{
    explain, parse, select_trees, tokenize, Derivation, Diagnostic, ParseLimits, ParseResult,
};
pub use tree::{
    validate_tree, AdjConstraint, ElementaryTree, GornAddress, Grammar, NodeKind, NodeLabel,
    TreeKind, TreeNode, Violation,
};
