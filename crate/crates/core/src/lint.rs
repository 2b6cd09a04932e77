//! Well-formedness checks for extraction triples.
//!
//! An extraction triple is an empty-element tree, a filler tree, and a
//! host tree that together implement a displacement dependency with plain
//! adjunction. The linter checks each tree's shape and feature protocol
//! and reports one violation per broken clause, labelled (a) through (e):
//!
//! - (a) the empty-element tree has the right shape,
//! - (b) its root is coindexed with the empty element,
//! - (c) its displacement signs let exactly one filler discharge it,
//! - (d) the filler tree pairs a fronted phrase with a coindexed foot,
//! - (e) the host marks an extraction path that threads the displacement
//!   variables from its root to the marked nodes.
//!
//! When (a) fails the remaining clauses for that tree are skipped: they
//! are defined in terms of the parts (a) failed to find.

use crate::features::{FeatureStructure, FeatureValue, VarId};
use crate::tree::{ElementaryTree, GornAddress, NodeKind, TreeKind, TreeNode, Violation};

fn violation(tree: &ElementaryTree, address: GornAddress, rule: &str) -> Violation {
    Violation {
        tree: tree.name.clone(),
        address,
        rule: rule.to_string(),
    }
}

fn atom_is(fs: &FeatureStructure, attr: &str, atom: &str) -> bool {
    matches!(fs.get(attr), Some(FeatureValue::Atom(a)) if a == atom)
}

fn var_of(fs: &FeatureStructure, attr: &str) -> Option<VarId> {
    match fs.get(attr) {
        Some(FeatureValue::Var(v)) => Some(*v),
        _ => None,
    }
}

fn eps_leaves(tree: &ElementaryTree) -> Vec<(GornAddress, &TreeNode)> {
    tree.root
        .walk()
        .into_iter()
        .filter(|(_, n)| n.kind == NodeKind::Epsilon)
        .collect()
}

/// Checks one extraction triple. Returns all violations found, in check
/// order; an empty result means the triple is clean.
pub fn lint_extraction_pair(
    eps: &ElementaryTree,
    filler: &ElementaryTree,
    host: &ElementaryTree,
) -> Vec<Violation> {
    let mut out = Vec::new();
    lint_eps(eps, &mut out);
    lint_filler(filler, &mut out);
    lint_host(host, &mut out);
    out
}

fn lint_eps(tree: &ElementaryTree, out: &mut Vec<Violation>) {
    let leaves = eps_leaves(tree);
    let root = GornAddress::root();
    match tree.kind {
        TreeKind::Auxiliary => {
            let mut shape_ok = true;
            if tree.root.children.len() != 2
                || tree
                    .root
                    .children
                    .iter()
                    .filter(|c| c.kind == NodeKind::Foot)
                    .count()
                    != 1
            {
                out.push(violation(
                    tree,
                    root.clone(),
                    "(a) root must have exactly two daughters, a foot and the phrase over the empty element",
                ));
                shape_ok = false;
            }
            if leaves.len() != 1 {
                out.push(violation(
                    tree,
                    root,
                    "(a) tree must contain exactly one empty element",
                ));
                shape_ok = false;
            }
            if !shape_ok {
                return;
            }
            lint_eps_coindexation(tree, &leaves, out);
            if !atom_is(&tree.root.top, "displ_const", "+") {
                out.push(violation(
                    tree,
                    GornAddress::root(),
                    "(c) root top displ_const must be +",
                ));
            }
            if !atom_is(&tree.root.bottom, "displ_const", "+") {
                out.push(violation(
                    tree,
                    GornAddress::root(),
                    "(c) root bottom displ_const must be +",
                ));
            }
            if let Some((addr, foot)) = tree.foot() {
                if !atom_is(&foot.top, "displ_const", "-") {
                    out.push(violation(tree, addr, "(c) foot top displ_const must be -"));
                }
            }
        }
        TreeKind::Initial => {
            if leaves.len() != 1 || tree.root.walk().len() != 2 {
                out.push(violation(
                    tree,
                    root,
                    "(a) frontier must be exactly one empty element",
                ));
                return;
            }
            lint_eps_coindexation(tree, &leaves, out);
            if !atom_is(&tree.root.top, "displ_const", "+") {
                out.push(violation(
                    tree,
                    GornAddress::root(),
                    "(c) root top displ_const must be +",
                ));
            }
        }
    }
}

fn lint_eps_coindexation(
    tree: &ElementaryTree,
    leaves: &[(GornAddress, &TreeNode)],
    out: &mut Vec<Violation>,
) {
    let Some(root_var) = var_of(&tree.root.top, "displ_const_index") else {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(b) root top displ_const_index must be a variable",
        ));
        return;
    };
    let (addr, leaf) = &leaves[0];
    if var_of(&leaf.bottom, "index") != Some(root_var) {
        out.push(violation(
            tree,
            addr.clone(),
            "(b) empty element index must be coindexed with root top displ_const_index",
        ));
    }
}

fn lint_filler(tree: &ElementaryTree, out: &mut Vec<Violation>) {
    if !eps_leaves(tree).is_empty() {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(d) filler tree must not contain an empty element",
        ));
    }
    if tree.root.children.len() != 2 {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(d) filler root must have exactly two daughters",
        ));
        return;
    }
    let Some((foot_addr, foot)) = tree.foot() else {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(d) filler must be an auxiliary tree with a foot",
        ));
        return;
    };
    if foot.label.category != "S" {
        out.push(violation(tree, foot_addr.clone(), "(d) foot category must be S"));
    }
    if !atom_is(&foot.top, "displ_const", "+") {
        out.push(violation(
            tree,
            foot_addr.clone(),
            "(d) foot top displ_const must be +",
        ));
    }
    let Some(foot_var) = var_of(&foot.top, "displ_const_index") else {
        out.push(violation(
            tree,
            foot_addr,
            "(d) foot top displ_const_index must be a variable",
        ));
        return;
    };
    // The daughter that is not the foot carries the fronted phrase.
    let fronted = tree
        .root
        .children
        .iter()
        .position(|c| c.kind != NodeKind::Foot);
    if let Some(i) = fronted {
        let child = &tree.root.children[i];
        let indexed = var_of(&child.bottom, "index") == Some(foot_var)
            || var_of(&child.top, "index") == Some(foot_var);
        if !indexed {
            out.push(violation(
                tree,
                GornAddress::root().child(i + 1),
                "(d) filler daughter index must be coindexed with foot displ_const_index",
            ));
        }
    }
}

fn lint_host(tree: &ElementaryTree, out: &mut Vec<Violation>) {
    if !atom_is(&tree.root.top, "displ_const", "-") {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(e) root top displ_const must be -",
        ));
    }
    let dc = var_of(&tree.root.bottom, "displ_const");
    let dci = var_of(&tree.root.bottom, "displ_const_index");
    if dc.is_none() || dci.is_none() {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(e) root bottom displ_const and displ_const_index must be variables",
        ));
        return;
    }
    let marked: Vec<(GornAddress, &TreeNode)> = tree
        .root
        .walk()
        .into_iter()
        .filter(|(_, n)| n.smallest)
        .collect();
    if marked.is_empty() {
        out.push(violation(
            tree,
            GornAddress::root(),
            "(e) tree must mark at least one extraction path node with @smallest",
        ));
        return;
    }
    for (addr, node) in marked {
        if var_of(&node.top, "displ_const") != dc {
            out.push(violation(
                tree,
                addr.clone(),
                "(e) path node top displ_const must share the root bottom variable",
            ));
        }
        if var_of(&node.top, "displ_const_index") != dci {
            out.push(violation(
                tree,
                addr.clone(),
                "(e) path node top displ_const_index must share the root bottom variable",
            ));
        }
        // A marked interior node passes the requirement down, so its own
        // segment below the pass-through point must be inert. A marked
        // substitution site has no bottom of its own to constrain.
        if node.kind == NodeKind::Interior && !atom_is(&node.bottom, "displ_const", "-") {
            out.push(violation(
                tree,
                addr,
                "(e) interior path node bottom displ_const must be -",
            ));
        }
    }
}
