//! Composition of derived trees: substitution, adjunction, finalization.
//!
//! A derived tree keeps a top and a bottom feature structure on every node
//! plus a shared binding environment. Substitution unifies the site's top
//! with the argument root's top immediately. Adjunction at a node with pair
//! (t, b) and an auxiliary with root (tr, br) and foot (tf, bf) builds an
//! upper node (t unified with tr, br) and moves the original node to the
//! foot position as (tf, b); the foot's own bottom is discarded. Both halves
//! of the unification schema are eager on the top side, so impossible
//! combinations fail at composition time, while top against bottom waits
//! until `finalize`.

use crate::features::{resolve, unify, Bindings, Clash, FeatureStructure, FeatureValue, VarGen, VarId};
use crate::tree::{AdjConstraint, ElementaryTree, GornAddress, NodeKind, NodeLabel, TreeKind, TreeNode};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// A node of a derived tree. `adjoined` marks nodes that already took part
/// in an adjunction, on both the upper copy and the copy moved to the foot
/// position; at most one adjunction may target a node.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivedNode {
    pub label: NodeLabel,
    pub kind: NodeKind,
    pub constraint: AdjConstraint,
    pub top: FeatureStructure,
    pub bottom: FeatureStructure,
    pub adjoined: bool,
    pub children: Vec<DerivedNode>,
}

impl DerivedNode {
    pub fn node_at(&self, address: &GornAddress) -> Option<&DerivedNode> {
        let mut node = self;
        for &step in &address.0 {
            node = node.children.get(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    fn node_at_mut(&mut self, address: &GornAddress) -> Option<&mut DerivedNode> {
        let mut node = self;
        for &step in &address.0 {
            node = node.children.get_mut(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    /// Preorder traversal paired with addresses.
    pub fn walk(&self) -> Vec<(GornAddress, &DerivedNode)> {
        let mut out = Vec::new();
        fn go<'a>(
            n: &'a DerivedNode,
            addr: GornAddress,
            out: &mut Vec<(GornAddress, &'a DerivedNode)>,
        ) {
            out.push((addr.clone(), n));
            for (i, c) in n.children.iter().enumerate() {
                go(c, addr.child(i + 1), out);
            }
        }
        go(self, GornAddress::root(), &mut out);
        out
    }
}

/// A derived tree under construction. `kind` is the kind of the elementary
/// tree at the derivation root: auxiliaries stay auxiliaries while material
/// composes into them, and only auxiliaries adjoin.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivedTree {
    pub root: DerivedNode,
    pub env: Bindings,
    pub root_tree: String,
    pub kind: TreeKind,
    /// Source labels of the root tree's variables after renaming.
    pub var_labels: BTreeMap<String, VarId>,
}

impl DerivedTree {
    /// Addresses still blocking finalization: unfilled substitution sites
    /// and interior nodes with an undischarged obligatory constraint.
    pub fn pending(&self) -> Vec<GornAddress> {
        self.root
            .walk()
            .into_iter()
            .filter(|(_, n)| {
                n.kind == NodeKind::Substitution
                    || (n.constraint == AdjConstraint::Oa && !n.adjoined)
            })
            .map(|(a, _)| a)
            .collect()
    }

    /// Address of the foot node, while one is still present.
    pub fn foot_address(&self) -> Option<GornAddress> {
        self.root
            .walk()
            .into_iter()
            .find(|(_, n)| n.kind == NodeKind::Foot)
            .map(|(a, _)| a)
    }

    /// Frontier tokens left to right. Unfilled substitution sites show as
    /// `⟨CAT!⟩` and a pending foot as `⟨CAT*⟩`; empty categories vanish.
    pub fn yield_tokens(&self) -> Vec<String> {
        self.root
            .walk()
            .into_iter()
            .filter_map(|(_, n)| match &n.kind {
                NodeKind::Anchor(w) => Some(w.clone()),
                NodeKind::Substitution => Some(format!("⟨{}!⟩", n.label.category)),
                NodeKind::Foot => Some(format!("⟨{}*⟩", n.label.category)),
                _ => None,
            })
            .collect()
    }

    /// Labeled bracketing over categories, with `!` and `*` marking pending
    /// frontier slots.
    pub fn bracketing(&self) -> String {
        fn go(out: &mut String, n: &DerivedNode) {
            match &n.kind {
                NodeKind::Anchor(w) => {
                    let _ = write!(out, "{w}");
                }
                NodeKind::Epsilon => {
                    let _ = write!(out, "eps");
                }
                NodeKind::Substitution => {
                    let _ = write!(out, "({}!)", n.label.category);
                }
                NodeKind::Foot => {
                    let _ = write!(out, "({}*)", n.label.category);
                }
                NodeKind::Interior => {
                    let _ = write!(out, "({}", n.label.category);
                    for c in &n.children {
                        let _ = write!(out, " ");
                        go(out, c);
                    }
                    let _ = write!(out, ")");
                }
            }
        }
        let mut out = String::new();
        go(&mut out, &self.root);
        out
    }

    /// Clones the tree with every variable renamed fresh from `gen`, so the
    /// copy can enter a composition whose other parts come from the same
    /// generator. Node structures, the environment and the variable labels
    /// all go through one renamer, which keeps coindexation intact.
    pub fn renamed_apart(&self, gen: &mut VarGen) -> DerivedTree {
        let mut renamer = crate::features::Renamer::new(gen);
        fn copy(node: &DerivedNode, renamer: &mut crate::features::Renamer) -> DerivedNode {
            DerivedNode {
                label: node.label.clone(),
                kind: node.kind.clone(),
                constraint: node.constraint.clone(),
                top: renamer.rename(&node.top),
                bottom: renamer.rename(&node.bottom),
                adjoined: node.adjoined,
                children: node.children.iter().map(|c| copy(c, renamer)).collect(),
            }
        }
        let root = copy(&self.root, &mut renamer);
        let mut env = Bindings::new();
        for (v, value) in self.env.iter() {
            let value = match value {
                FeatureValue::Var(old) => FeatureValue::Var(renamer.rename_var(*old)),
                atom => atom.clone(),
            };
            env.bind(renamer.rename_var(*v), value);
        }
        let var_labels = self
            .var_labels
            .iter()
            .map(|(label, v)| (label.clone(), renamer.rename_var(*v)))
            .collect();
        DerivedTree {
            root,
            env,
            root_tree: self.root_tree.clone(),
            kind: self.kind,
            var_labels,
        }
    }
}

/// Which operation attached a tree.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum OpKind {
    Substitution,
    Adjunction,
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpKind::Substitution => write!(f, "substitution"),
            OpKind::Adjunction => write!(f, "adjunction"),
        }
    }
}

/// One composition step: `child` attached to `parent` by `op` at `address`,
/// an address in the uncomposed parent elementary tree. Adjunction addresses
/// name interior nodes; substitution addresses name sites.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct CompositionRecord {
    pub parent: String,
    pub op: OpKind,
    pub address: GornAddress,
    pub child: String,
}

impl std::fmt::Display for CompositionRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} at {} of {}",
            self.op, self.child, self.address, self.parent
        )
    }
}

/// Why a substitution or adjunction was refused.
#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum Rejection {
    #[error("category {found} does not match {wanted}")]
    CategoryMismatch { wanted: String, found: String },
    #[error("node is not a substitution site")]
    NotASite,
    #[error("argument of substitution must derive from an initial tree")]
    NotInitial,
    #[error("adjunction needs an auxiliary tree")]
    NotAuxiliary,
    #[error("node kind does not admit adjunction")]
    NotAdjoinable,
    #[error("null adjoining constraint forbids adjunction")]
    NullAdjoining,
    #[error("selective adjoining constraint admits only {allowed}")]
    SelectiveAdjoining { allowed: String },
    #[error("node already took an adjunction")]
    AlreadyAdjoined,
    #[error("feature clash: {0}")]
    FeatureClash(Clash),
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum ComposeError {
    #[error("no node at address {0}")]
    BadTarget(GornAddress),
    #[error("rejected at {label} ({address}): {reason}")]
    Rejected {
        address: GornAddress,
        label: NodeLabel,
        reason: Rejection,
    },
}

/// Builds a derived tree from an elementary tree, renaming every variable
/// fresh from `gen`. Coindexation inside the tree survives renaming.
pub fn instantiate(tree: &ElementaryTree, gen: &mut VarGen) -> DerivedTree {
    let mut renamer = crate::features::Renamer::new(gen);
    fn copy(node: &TreeNode, renamer: &mut crate::features::Renamer) -> DerivedNode {
        DerivedNode {
            label: node.label.clone(),
            kind: node.kind.clone(),
            constraint: node.constraint.clone(),
            top: renamer.rename(&node.top),
            bottom: renamer.rename(&node.bottom),
            adjoined: false,
            children: node.children.iter().map(|c| copy(c, renamer)).collect(),
        }
    }
    let root = copy(&tree.root, &mut renamer);
    let var_labels = tree
        .var_labels
        .iter()
        .map(|(label, v)| (label.clone(), renamer.rename_var(*v)))
        .collect();
    DerivedTree {
        root,
        env: Bindings::new(),
        root_tree: tree.name.clone(),
        kind: tree.kind,
        var_labels,
    }
}

/// Substitutes `arg` at the site `address` of `target`. The site's top
/// unifies with the argument root's top at once; the filled node keeps the
/// site's label and takes the argument root's bottom, children and
/// constraint.
pub fn substitute(
    target: &DerivedTree,
    address: &GornAddress,
    arg: &DerivedTree,
) -> Result<DerivedTree, ComposeError> {
    let site = target
        .root
        .node_at(address)
        .ok_or_else(|| ComposeError::BadTarget(address.clone()))?;
    let rejected = |reason| ComposeError::Rejected {
        address: address.clone(),
        label: site.label.clone(),
        reason,
    };
    if site.kind != NodeKind::Substitution {
        return Err(rejected(Rejection::NotASite));
    }
    if arg.kind != TreeKind::Initial {
        return Err(rejected(Rejection::NotInitial));
    }
    if site.label.category != arg.root.label.category {
        return Err(rejected(Rejection::CategoryMismatch {
            wanted: site.label.category.clone(),
            found: arg.root.label.category.clone(),
        }));
    }
    let env = target.env.merged_with(&arg.env);
    let (top, env) = unify(&site.top, &arg.root.top, &env)
        .map_err(|clash| rejected(Rejection::FeatureClash(clash)))?;

    let filled = DerivedNode {
        label: site.label.clone(),
        kind: arg.root.kind.clone(),
        constraint: arg.root.constraint.clone(),
        top,
        bottom: arg.root.bottom.clone(),
        adjoined: arg.root.adjoined,
        children: arg.root.children.clone(),
    };
    let mut root = target.root.clone();
    *root.node_at_mut(address).expect("checked above") = filled;
    Ok(DerivedTree {
        root,
        env,
        root_tree: target.root_tree.clone(),
        kind: target.kind,
        var_labels: target.var_labels.clone(),
    })
}

/// Adjoins the auxiliary `aux` at `address` in `target`, following the
/// schema in the module docs. Refuses null and selective constraints, leaf
/// targets, repeated adjunction at one node and top-side feature clashes.
pub fn adjoin(
    target: &DerivedTree,
    address: &GornAddress,
    aux: &DerivedTree,
) -> Result<DerivedTree, ComposeError> {
    let node = target
        .root
        .node_at(address)
        .ok_or_else(|| ComposeError::BadTarget(address.clone()))?;
    let rejected = |reason| ComposeError::Rejected {
        address: address.clone(),
        label: node.label.clone(),
        reason,
    };
    if aux.kind != TreeKind::Auxiliary {
        return Err(rejected(Rejection::NotAuxiliary));
    }
    if node.kind != NodeKind::Interior {
        return Err(rejected(Rejection::NotAdjoinable));
    }
    match &node.constraint {
        AdjConstraint::Na => return Err(rejected(Rejection::NullAdjoining)),
        AdjConstraint::Sa(allowed) if !allowed.contains(&aux.root_tree) => {
            let list: Vec<&str> = allowed.iter().map(String::as_str).collect();
            return Err(rejected(Rejection::SelectiveAdjoining {
                allowed: list.join(","),
            }));
        }
        _ => {}
    }
    if node.adjoined {
        return Err(rejected(Rejection::AlreadyAdjoined));
    }
    if node.label.category != aux.root.label.category {
        return Err(rejected(Rejection::CategoryMismatch {
            wanted: node.label.category.clone(),
            found: aux.root.label.category.clone(),
        }));
    }
    let foot_addr = aux
        .foot_address()
        .ok_or_else(|| rejected(Rejection::NotAuxiliary))?;

    let env = target.env.merged_with(&aux.env);
    let (top, env) = unify(&node.top, &aux.root.top, &env)
        .map_err(|clash| rejected(Rejection::FeatureClash(clash)))?;

    // The original node moves to the foot position: the foot's top over the
    // node's own bottom and children.
    let mut body = aux.root.clone();
    let foot = body.node_at(&foot_addr).expect("foot address from walk");
    let lower = DerivedNode {
        label: node.label.clone(),
        kind: node.kind.clone(),
        constraint: node.constraint.clone(),
        top: foot.top.clone(),
        bottom: node.bottom.clone(),
        adjoined: true,
        children: node.children.clone(),
    };
    *body.node_at_mut(&foot_addr).expect("foot address from walk") = lower;

    let upper = DerivedNode {
        label: node.label.clone(),
        kind: node.kind.clone(),
        constraint: node.constraint.clone(),
        top,
        bottom: body.bottom.clone(),
        adjoined: true,
        children: body.children,
    };
    let mut root = target.root.clone();
    *root.node_at_mut(address).expect("checked above") = upper;
    Ok(DerivedTree {
        root,
        env,
        root_tree: target.root_tree.clone(),
        kind: target.kind,
        var_labels: target.var_labels.clone(),
    })
}

/// Why a derived tree could not be finalized.
#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum FinalizeError {
    #[error("derivation incomplete at {label} ({address}): {missing}")]
    Pending {
        address: GornAddress,
        label: NodeLabel,
        missing: String,
    },
    #[error("feature clash at {label} ({address}): {clash}")]
    Clash {
        address: GornAddress,
        label: NodeLabel,
        clash: Clash,
    },
}

/// A finalized node: one feature structure, fully ground.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FinalNode {
    pub label: NodeLabel,
    pub kind: NodeKind,
    pub features: FeatureStructure,
    pub children: Vec<FinalNode>,
}

/// A finalized derived tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FinalTree {
    pub root: FinalNode,
}

impl FinalTree {
    /// Preorder traversal paired with addresses.
    pub fn nodes(&self) -> Vec<(GornAddress, &FinalNode)> {
        let mut out = Vec::new();
        fn go<'a>(
            n: &'a FinalNode,
            addr: GornAddress,
            out: &mut Vec<(GornAddress, &'a FinalNode)>,
        ) {
            out.push((addr.clone(), n));
            for (i, c) in n.children.iter().enumerate() {
                go(c, addr.child(i + 1), out);
            }
        }
        go(&self.root, GornAddress::root(), &mut out);
        out
    }

    pub fn node_at(&self, address: &GornAddress) -> Option<&FinalNode> {
        let mut node = &self.root;
        for &step in &address.0 {
            node = node.children.get(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    /// Anchor words left to right; empty categories contribute nothing.
    pub fn tokens(&self) -> Vec<String> {
        self.nodes()
            .into_iter()
            .filter_map(|(_, n)| match &n.kind {
                NodeKind::Anchor(w) => Some(w.clone()),
                _ => None,
            })
            .collect()
    }

    /// Labeled bracketing over categories: `(S (NP john) ...)`. An indexed
    /// empty category renders as `eps:i1`, a bare one as `eps`.
    pub fn bracketing(&self) -> String {
        self.render(false)
    }

    /// Bracketing with `[attr=value, ...]` blocks after each labeled node
    /// that carries features.
    pub fn bracketing_with_features(&self) -> String {
        self.render(true)
    }

    fn render(&self, features: bool) -> String {
        fn go(out: &mut String, n: &FinalNode, features: bool) {
            match &n.kind {
                NodeKind::Anchor(w) => {
                    let _ = write!(out, "{w}");
                }
                NodeKind::Epsilon => match n.features.get("index") {
                    Some(FeatureValue::Atom(a)) => {
                        let _ = write!(out, "eps:{a}");
                    }
                    _ => {
                        let _ = write!(out, "eps");
                    }
                },
                _ => {
                    let _ = write!(out, "({}", n.label.category);
                    if features && !n.features.is_empty() {
                        let _ = write!(out, " [{}]", n.features);
                    }
                    for c in &n.children {
                        let _ = write!(out, " ");
                        go(out, c, features);
                    }
                    let _ = write!(out, ")");
                }
            }
        }
        let mut out = String::new();
        go(&mut out, &self.root, features);
        out
    }

    fn dominates(a: &GornAddress, b: &GornAddress) -> bool {
        a.0.len() < b.0.len() && b.0[..a.0.len()] == a.0[..]
    }

    /// Whether the node at `a` c-commands the node at `b`: neither dominates
    /// the other and the nearest branching ancestor of `a` dominates `b`.
    pub fn c_commands(&self, a: &GornAddress, b: &GornAddress) -> bool {
        if a == b || Self::dominates(a, b) || Self::dominates(b, a) {
            return false;
        }
        let mut prefix = a.clone();
        while !prefix.is_root() {
            prefix.0.pop();
            let node = match self.node_at(&prefix) {
                Some(n) => n,
                None => return false,
            };
            if node.children.len() > 1 {
                return Self::dominates(&prefix, b);
            }
        }
        false
    }
}

/// Completes a derived tree: checks nothing is pending, unifies top against
/// bottom at every node in preorder and reports the first clash with its
/// derived address and label. Unbound variables left after unification are
/// grounded to `i1`, `i2`, ... in order of first appearance.
pub fn finalize(tree: &DerivedTree) -> Result<FinalTree, FinalizeError> {
    for (address, node) in tree.root.walk() {
        let missing = match &node.kind {
            NodeKind::Substitution => Some("unfilled substitution site"),
            NodeKind::Foot => Some("unattached foot"),
            _ if node.constraint == AdjConstraint::Oa && !node.adjoined => {
                Some("OA not discharged")
            }
            _ => None,
        };
        if let Some(missing) = missing {
            return Err(FinalizeError::Pending {
                address,
                label: node.label.clone(),
                missing: missing.to_string(),
            });
        }
    }

    let mut env = tree.env.clone();
    let mut merged: Vec<(GornAddress, FeatureStructure)> = Vec::new();
    for (address, node) in tree.root.walk() {
        match unify(&node.top, &node.bottom, &env) {
            Ok((fs, next)) => {
                env = next;
                merged.push((address, fs));
            }
            Err(clash) => {
                return Err(FinalizeError::Clash {
                    address,
                    label: node.label.clone(),
                    clash,
                });
            }
        }
    }

    // Ground leftover variables in order of first appearance.
    let mut ground = Bindings::new();
    let mut counter = 0u32;
    for (_, fs) in &merged {
        for (_, value) in resolve(fs, &env).iter() {
            if let FeatureValue::Var(v) = value {
                if ground.lookup(*v).is_none() {
                    counter += 1;
                    ground.bind(*v, FeatureValue::Atom(format!("i{counter}")));
                }
            }
        }
    }
    let env = env.merged_with(&ground);

    let features: BTreeMap<GornAddress, FeatureStructure> = merged
        .into_iter()
        .map(|(addr, fs)| (addr, resolve(&fs, &env)))
        .collect();

    fn build(
        node: &DerivedNode,
        addr: GornAddress,
        features: &BTreeMap<GornAddress, FeatureStructure>,
    ) -> FinalNode {
        FinalNode {
            label: node.label.clone(),
            kind: node.kind.clone(),
            features: features[&addr].clone(),
            children: node
                .children
                .iter()
                .enumerate()
                .map(|(i, c)| build(c, addr.child(i + 1), features))
                .collect(),
        }
    }
    Ok(FinalTree {
        root: build(&tree.root, GornAddress::root(), &features),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::load_grammar;
    use crate::tree::Grammar;

    fn grammar() -> Grammar {
        load_grammar(
            r#"
grammar toy start=S

tree alpha_walked initial {
  (S_r
    (NP_0!)
    (VP (V "walked")))
}

tree alpha_john initial {
  (NP "john")
}

tree alpha_philadelphia initial {
  (NP "philadelphia")
}

tree beta_to_pp auxiliary {
  (VP_r
    (VP*)
    (PP (P "to") (NP!)))
}

tree alpha_gate initial {
  (S_r [t: displ_const=-] [b: displ_const=#1]
    (NP_0! [t: displ_const=#1])
    (VP [b: displ_const=-] (V "left")))
}

tree alpha_plain_np initial {
  (NP [b: displ_const=-] (N "mary"))
}

tree beta_plus auxiliary {
  (NP_r [t: displ_const=+] [b: displ_const=+]
    (NP* [t: displ_const=-]))
}
"#,
        )
        .unwrap()
    }

    fn addr(text: &str) -> GornAddress {
        GornAddress::parse(text).unwrap()
    }

    #[test]
    fn substitution_fills_a_site_in_place() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        let john = instantiate(g.tree("alpha_john").unwrap(), &mut gen);
        let out = substitute(&host, &addr("1"), &john).unwrap();
        let filled = out.root.node_at(&addr("1")).unwrap();
        assert_eq!(filled.label.to_string(), "NP_0");
        assert_eq!(filled.kind, NodeKind::Interior);
        assert_eq!(out.yield_tokens(), vec!["john", "walked"]);
    }

    #[test]
    fn substitution_rejects_wrong_category_and_non_sites() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        let john = instantiate(g.tree("alpha_john").unwrap(), &mut gen);
        assert!(matches!(
            substitute(&host, &addr("2"), &john),
            Err(ComposeError::Rejected {
                reason: Rejection::NotASite,
                ..
            })
        ));
        let walked2 = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        assert!(matches!(
            substitute(&host, &addr("1"), &walked2),
            Err(ComposeError::Rejected {
                reason: Rejection::CategoryMismatch { .. },
                ..
            })
        ));
        assert!(matches!(
            substitute(&host, &addr("9"), &john),
            Err(ComposeError::BadTarget(_))
        ));
    }

    #[test]
    fn adjunction_splits_the_node_per_schema() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_gate").unwrap(), &mut gen);
        let mary = instantiate(g.tree("alpha_plain_np").unwrap(), &mut gen);
        let aux = instantiate(g.tree("beta_plus").unwrap(), &mut gen);
        let t = substitute(&host, &addr("1"), &mary).unwrap();
        let t = adjoin(&t, &addr("1"), &aux).unwrap();

        let upper = t.root.node_at(&addr("1")).unwrap();
        assert!(upper.adjoined);
        assert_eq!(upper.label.to_string(), "NP_0");
        // Upper top is the eager unification of node top with aux root top,
        // upper bottom is the aux root bottom.
        assert_eq!(
            resolve(&upper.top, &t.env).get("displ_const"),
            Some(&FeatureValue::atom("+"))
        );
        assert_eq!(
            upper.bottom.get("displ_const"),
            Some(&FeatureValue::atom("+"))
        );
        // The original node sits at the foot position with the foot's top
        // over its own bottom.
        let lower = t.root.node_at(&addr("1.1")).unwrap();
        assert!(lower.adjoined);
        assert_eq!(
            lower.top.get("displ_const"),
            Some(&FeatureValue::atom("-"))
        );
        assert_eq!(
            lower.bottom.get("displ_const"),
            Some(&FeatureValue::atom("-"))
        );
        assert_eq!(lower.children.len(), 1);
    }

    #[test]
    fn adjunction_respects_constraints_and_single_use() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_gate").unwrap(), &mut gen);
        let mary = instantiate(g.tree("alpha_plain_np").unwrap(), &mut gen);
        let aux = instantiate(g.tree("beta_plus").unwrap(), &mut gen);

        // A pending substitution site refuses adjunction.
        assert!(matches!(
            adjoin(&host, &addr("1"), &aux),
            Err(ComposeError::Rejected {
                reason: Rejection::NotAdjoinable,
                ..
            })
        ));
        let t = substitute(&host, &addr("1"), &mary).unwrap();
        let t = adjoin(&t, &addr("1"), &aux).unwrap();
        let aux2 = instantiate(g.tree("beta_plus").unwrap(), &mut gen);
        assert!(matches!(
            adjoin(&t, &addr("1"), &aux2),
            Err(ComposeError::Rejected {
                reason: Rejection::AlreadyAdjoined,
                ..
            })
        ));
        // The copy at the foot position is used up as well.
        assert!(matches!(
            adjoin(&t, &addr("1.1"), &aux2),
            Err(ComposeError::Rejected {
                reason: Rejection::AlreadyAdjoined,
                ..
            })
        ));
        // Initial trees do not adjoin.
        let john = instantiate(g.tree("alpha_john").unwrap(), &mut gen);
        assert!(matches!(
            adjoin(&t, &addr("2"), &john),
            Err(ComposeError::Rejected {
                reason: Rejection::NotAuxiliary,
                ..
            })
        ));
    }

    #[test]
    fn eager_unification_binds_variables_at_adjunction_time() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_gate").unwrap(), &mut gen);
        let mary = instantiate(g.tree("alpha_plain_np").unwrap(), &mut gen);
        let aux = instantiate(g.tree("beta_plus").unwrap(), &mut gen);
        let t = substitute(&host, &addr("1"), &mary).unwrap();
        let t = adjoin(&t, &addr("1"), &aux).unwrap();
        // The site top carried the variable shared with the root bottom; the
        // adjunction bound it to +, so the root now fails against its own
        // top at finalization, at the root.
        match finalize(&t) {
            Err(FinalizeError::Clash { address, label, clash }) => {
                assert!(address.is_root());
                assert_eq!(label.to_string(), "S_r");
                assert_eq!(clash.attribute, "displ_const");
            }
            other => panic!("expected a clash, got {other:?}"),
        }
    }

    #[test]
    fn finalize_unifies_top_and_bottom_everywhere() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_gate").unwrap(), &mut gen);
        let mary = instantiate(g.tree("alpha_plain_np").unwrap(), &mut gen);
        let t = substitute(&host, &addr("1"), &mary).unwrap();
        let done = finalize(&t).unwrap();
        // The root variable resolves to - through the site's top.
        assert_eq!(
            done.root.features.get("displ_const"),
            Some(&FeatureValue::atom("-"))
        );
        assert_eq!(done.tokens(), vec!["mary", "left"]);
        assert_eq!(
            done.bracketing(),
            "(S (NP (N mary)) (VP (V left)))"
        );
    }

    #[test]
    fn finalize_reports_pending_parts() {
        let g = grammar();
        let mut gen = VarGen::new();
        let host = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        assert!(matches!(
            finalize(&host),
            Err(FinalizeError::Pending { .. })
        ));
        let aux = instantiate(g.tree("beta_to_pp").unwrap(), &mut gen);
        assert!(matches!(
            finalize(&aux),
            Err(FinalizeError::Pending { .. })
        ));
    }

    #[test]
    fn leftover_variables_ground_in_preorder() {
        let g = load_grammar(
            r#"
grammar g start=S
tree t initial {
  (S [b: agr=#1]
    (NP @NA [t: agr=#1] [b: case=#2] (N "x"))
    (VP [b: agr=#3] (V "y")))
}
"#,
        )
        .unwrap();
        let mut gen = VarGen::new();
        let t = instantiate(g.tree("t").unwrap(), &mut gen);
        let done = finalize(&t).unwrap();
        assert_eq!(
            done.root.features.get("agr"),
            Some(&FeatureValue::atom("i1"))
        );
        let np = done.node_at(&GornAddress(vec![1])).unwrap();
        assert_eq!(np.features.get("case"), Some(&FeatureValue::atom("i2")));
        let vp = done.node_at(&GornAddress(vec![2])).unwrap();
        assert_eq!(vp.features.get("agr"), Some(&FeatureValue::atom("i3")));
    }

    #[test]
    fn full_plain_composition_and_bracketing() {
        let g = grammar();
        let mut gen = VarGen::new();
        let t = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        let t = substitute(&t, &addr("1"), &instantiate(g.tree("alpha_john").unwrap(), &mut gen)).unwrap();
        let t = adjoin(&t, &addr("2"), &instantiate(g.tree("beta_to_pp").unwrap(), &mut gen)).unwrap();
        let t = substitute(
            &t,
            &addr("2.2.2"),
            &instantiate(g.tree("alpha_philadelphia").unwrap(), &mut gen),
        )
        .unwrap();
        let done = finalize(&t).unwrap();
        assert_eq!(
            done.bracketing(),
            "(S (NP john) (VP (VP (V walked)) (PP (P to) (NP philadelphia))))"
        );
        assert_eq!(done.tokens(), vec!["john", "walked", "to", "philadelphia"]);
    }

    #[test]
    fn c_command_follows_the_first_branching_ancestor() {
        let g = grammar();
        let mut gen = VarGen::new();
        let t = instantiate(g.tree("alpha_walked").unwrap(), &mut gen);
        let t = substitute(&t, &addr("1"), &instantiate(g.tree("alpha_john").unwrap(), &mut gen)).unwrap();
        let done = finalize(&t).unwrap();
        // NP c-commands VP and everything below it.
        assert!(done.c_commands(&addr("1"), &addr("2")));
        assert!(done.c_commands(&addr("1"), &addr("2.1")));
        assert!(done.c_commands(&addr("2"), &addr("1")));
        assert!(!done.c_commands(&addr("1"), &addr("1.1")));
        // V's first branching ancestor is the root, which dominates NP.
        assert!(done.c_commands(&addr("2.1"), &addr("1")));
    }
}
