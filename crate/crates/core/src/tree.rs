//! Elementary trees and grammars.
//!
//! Nodes carry a top and a bottom feature structure, an adjoining constraint
//! and a kind (interior, substitution site, foot, anchor, empty category).
//! Category matching for substitution and adjunction uses the category alone;
//! subscript tags such as `S_r` or `NP_0` are display labels.

use crate::features::{FeatureStructure, VarId};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Category plus an optional display tag: `NP_0` is category `NP`, tag `0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct NodeLabel {
    pub category: String,
    pub tag: Option<String>,
}

impl NodeLabel {
    pub fn new(category: impl Into<String>, tag: Option<&str>) -> Self {
        NodeLabel {
            category: category.into(),
            tag: tag.map(str::to_string),
        }
    }

    pub fn plain(category: impl Into<String>) -> Self {
        NodeLabel::new(category, None)
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tag {
            Some(t) => write!(f, "{}_{}", self.category, t),
            None => write!(f, "{}", self.category),
        }
    }
}

/// What a node is, structurally.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum NodeKind {
    /// Internal node with children.
    Interior,
    /// Frontier slot an initial tree substitutes into.
    Substitution,
    /// Frontier node of an auxiliary tree matching its root category.
    Foot,
    /// Lexical leaf.
    Anchor(String),
    /// Empty category leaf; an `index` feature marks an indexed trace.
    Epsilon,
}

/// Adjoining constraint on a node. Foot nodes and substitution sites are
/// always null-adjoining; the loader enforces that.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub enum AdjConstraint {
    /// No constraint: any auxiliary of the right category may adjoin.
    #[default]
    None,
    /// Null adjoining: nothing may adjoin here.
    Na,
    /// Obligatory adjoining: some auxiliary must adjoin here.
    Oa,
    /// Selective adjoining: only the named auxiliary trees may adjoin.
    Sa(BTreeSet<String>),
}

impl fmt::Display for AdjConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjConstraint::None => write!(f, "none"),
            AdjConstraint::Na => write!(f, "NA"),
            AdjConstraint::Oa => write!(f, "OA"),
            AdjConstraint::Sa(names) => {
                write!(f, "SA(")?;
                for (i, n) in names.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A node of an elementary tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TreeNode {
    pub label: NodeLabel,
    pub kind: NodeKind,
    pub constraint: AdjConstraint,
    pub top: FeatureStructure,
    pub bottom: FeatureStructure,
    /// Marked in the grammar as a smallest phrasal constituent; the
    /// extraction linter checks exactly the marked nodes.
    pub smallest: bool,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn new(label: NodeLabel, kind: NodeKind) -> Self {
        TreeNode {
            label,
            kind,
            constraint: AdjConstraint::default(),
            top: FeatureStructure::new(),
            bottom: FeatureStructure::new(),
            smallest: false,
            children: Vec::new(),
        }
    }

    /// Resolves a Gorn address relative to this node. The empty address is
    /// this node; child indices are 1-based.
    pub fn node_at(&self, address: &GornAddress) -> Option<&TreeNode> {
        let mut node = self;
        for &step in &address.0 {
            node = node.children.get(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    pub fn node_at_mut(&mut self, address: &GornAddress) -> Option<&mut TreeNode> {
        let mut node = self;
        for &step in &address.0 {
            node = node.children.get_mut(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    /// Preorder traversal paired with addresses.
    pub fn walk(&self) -> Vec<(GornAddress, &TreeNode)> {
        let mut out = Vec::new();
        fn go<'a>(n: &'a TreeNode, addr: GornAddress, out: &mut Vec<(GornAddress, &'a TreeNode)>) {
            out.push((addr.clone(), n));
            for (i, c) in n.children.iter().enumerate() {
                go(c, addr.child(i + 1), out);
            }
        }
        go(self, GornAddress::root(), &mut out);
        out
    }
}

/// Whether a tree is initial or auxiliary.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TreeKind {
    Initial,
    Auxiliary,
}

impl fmt::Display for TreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeKind::Initial => write!(f, "initial"),
            TreeKind::Auxiliary => write!(f, "auxiliary"),
        }
    }
}

/// A named elementary tree. `var_labels` remembers the source names of
/// coindexation variables (`#1`, `#2`, ...) for serialization and for
/// multi-component link declarations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ElementaryTree {
    pub name: String,
    pub kind: TreeKind,
    pub root: TreeNode,
    pub var_labels: BTreeMap<String, VarId>,
}

impl ElementaryTree {
    /// The single foot node of an auxiliary tree, with its address.
    pub fn foot(&self) -> Option<(GornAddress, &TreeNode)> {
        self.root
            .walk()
            .into_iter()
            .find(|(_, n)| n.kind == NodeKind::Foot)
    }

    /// Anchor words in left-to-right order.
    pub fn anchors(&self) -> Vec<&str> {
        self.root
            .walk()
            .into_iter()
            .filter_map(|(_, n)| match &n.kind {
                NodeKind::Anchor(w) => Some(w.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// A grammar: a start category and a set of elementary trees keyed by name.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Grammar {
    pub name: String,
    pub start: String,
    pub trees: BTreeMap<String, ElementaryTree>,
}

impl Grammar {
    pub fn tree(&self, name: &str) -> Option<&ElementaryTree> {
        self.trees.get(name)
    }

    /// Every distinct anchor word, sorted.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.trees
            .values()
            .flat_map(|t| t.anchors().into_iter().map(str::to_string))
            .collect()
    }
}

/// Position of a node: the path of 1-based child indices from the root.
/// Displays as `0` for the root and `1.2` for deeper nodes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct GornAddress(pub Vec<usize>);

impl GornAddress {
    pub fn root() -> Self {
        GornAddress(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut path = self.0.clone();
        path.push(index);
        GornAddress(path)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parse(text: &str) -> Option<Self> {
        if text == "0" {
            return Some(GornAddress::root());
        }
        let mut path = Vec::new();
        for part in text.split('.') {
            let n: usize = part.parse().ok()?;
            if n == 0 {
                return None;
            }
            path.push(n);
        }
        Some(GornAddress(path))
    }
}

impl fmt::Display for GornAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for step in &self.0 {
            if !first {
                write!(f, ".")?;
            }
            write!(f, "{step}")?;
            first = false;
        }
        Ok(())
    }
}

/// A well-formedness or lint finding attached to a node of a named tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub tree: String,
    pub address: GornAddress,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.tree, self.address, self.rule)
    }
}

/// Checks structural well-formedness of one elementary tree. Returns every
/// finding rather than stopping at the first.
pub fn validate_tree(tree: &ElementaryTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut feet = Vec::new();
    let mut push = |address: GornAddress, rule: String| {
        out.push(Violation {
            tree: tree.name.clone(),
            address,
            rule,
        });
    };

    for (addr, node) in tree.root.walk() {
        match &node.kind {
            NodeKind::Interior => {
                if node.children.is_empty() {
                    push(addr.clone(), "interior node has no children".into());
                }
            }
            NodeKind::Substitution | NodeKind::Foot | NodeKind::Anchor(_) | NodeKind::Epsilon => {
                if !node.children.is_empty() {
                    push(
                        addr.clone(),
                        format!("{} node must be a leaf", kind_name(&node.kind)),
                    );
                }
            }
        }
        match &node.kind {
            NodeKind::Substitution | NodeKind::Foot => {
                if node.constraint != AdjConstraint::Na {
                    push(
                        addr.clone(),
                        format!(
                            "{} node must carry the null adjoining constraint",
                            kind_name(&node.kind)
                        ),
                    );
                }
            }
            _ => {}
        }
        if node.kind == NodeKind::Foot {
            feet.push((addr.clone(), node));
        }
    }

    match tree.kind {
        TreeKind::Initial => {
            if !feet.is_empty() {
                push(feet[0].0.clone(), "initial tree must not contain a foot".into());
            }
        }
        TreeKind::Auxiliary => {
            if feet.is_empty() {
                push(
                    GornAddress::root(),
                    "auxiliary tree must contain exactly one foot".into(),
                );
            } else {
                if feet.len() > 1 {
                    push(
                        feet[1].0.clone(),
                        "auxiliary tree must contain exactly one foot".into(),
                    );
                }
                let foot = feet[0].1;
                if foot.label.category != tree.root.label.category {
                    push(
                        feet[0].0.clone(),
                        format!(
                            "foot category {} must equal root category {}",
                            foot.label.category, tree.root.label.category
                        ),
                    );
                }
            }
        }
    }
    out
}

fn kind_name(kind: &NodeKind) -> &'static str {
    match kind {
        NodeKind::Interior => "interior",
        NodeKind::Substitution => "substitution",
        NodeKind::Foot => "foot",
        NodeKind::Anchor(_) => "anchor",
        NodeKind::Epsilon => "empty category",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(label: &str, kind: NodeKind) -> TreeNode {
        let mut n = TreeNode::new(NodeLabel::plain(label), kind);
        if matches!(n.kind, NodeKind::Substitution | NodeKind::Foot) {
            n.constraint = AdjConstraint::Na;
        }
        n
    }

    fn interior(label: &str, children: Vec<TreeNode>) -> TreeNode {
        let mut n = TreeNode::new(NodeLabel::plain(label), NodeKind::Interior);
        n.children = children;
        n
    }

    fn tree(name: &str, kind: TreeKind, root: TreeNode) -> ElementaryTree {
        ElementaryTree {
            name: name.into(),
            kind,
            root,
            var_labels: BTreeMap::new(),
        }
    }

    #[test]
    fn gorn_addresses_display_and_parse() {
        assert_eq!(GornAddress::root().to_string(), "0");
        assert_eq!(GornAddress(vec![1, 2]).to_string(), "1.2");
        assert_eq!(GornAddress::parse("0"), Some(GornAddress::root()));
        assert_eq!(GornAddress::parse("2.2"), Some(GornAddress(vec![2, 2])));
        assert_eq!(GornAddress::parse("0.1"), None);
    }

    #[test]
    fn node_at_follows_child_indices() {
        let root = interior(
            "S",
            vec![
                leaf("NP", NodeKind::Substitution),
                interior("VP", vec![leaf("walked", NodeKind::Anchor("walked".into()))]),
            ],
        );
        let vp = root.node_at(&GornAddress(vec![2])).unwrap();
        assert_eq!(vp.label.category, "VP");
        assert!(root.node_at(&GornAddress(vec![3])).is_none());
        assert!(root.node_at(&GornAddress(vec![0])).is_none());
    }

    #[test]
    fn initial_tree_with_foot_is_rejected() {
        let t = tree(
            "bad",
            TreeKind::Initial,
            interior("S", vec![leaf("S", NodeKind::Foot)]),
        );
        let v = validate_tree(&t);
        assert!(v.iter().any(|v| v.rule.contains("must not contain a foot")));
    }

    #[test]
    fn auxiliary_needs_exactly_one_matching_foot() {
        let no_foot = tree(
            "aux0",
            TreeKind::Auxiliary,
            interior("VP", vec![leaf("to", NodeKind::Anchor("to".into()))]),
        );
        assert!(!validate_tree(&no_foot).is_empty());

        let wrong_cat = tree(
            "aux1",
            TreeKind::Auxiliary,
            interior("VP", vec![leaf("PP", NodeKind::Foot)]),
        );
        assert!(validate_tree(&wrong_cat)
            .iter()
            .any(|v| v.rule.contains("must equal root category")));

        let ok = tree(
            "aux2",
            TreeKind::Auxiliary,
            interior(
                "VP",
                vec![
                    leaf("VP", NodeKind::Foot),
                    interior("PP", vec![leaf("to", NodeKind::Anchor("to".into()))]),
                ],
            ),
        );
        assert!(validate_tree(&ok).is_empty());
    }

    #[test]
    fn sites_and_feet_must_stay_null_adjoining() {
        let mut site = leaf("NP", NodeKind::Substitution);
        site.constraint = AdjConstraint::Oa;
        let t = tree("bad_site", TreeKind::Initial, interior("S", vec![site]));
        assert!(validate_tree(&t)
            .iter()
            .any(|v| v.rule.contains("null adjoining")));
    }
}
