//! Tree-local multi-component composition and cross-grammar equivalence.
//!
//! A multi-component grammar extends a plain grammar with tree sets. All
//! members of a set attach to one elementary tree instance in one step;
//! `link #k` declarations identify the named variable across the members,
//! which is how an empty category and its filler end up coindexed without
//! any feature passing. Trees outside every set ("singles") compose as
//! usual.
//!
//! `language_sample` enumerates accepted yields generatively for either
//! grammar kind, and `compare` checks a feature-based result against a
//! multi-component one after erasing everything but coindexation.

use crate::compose::{
    adjoin, finalize, instantiate, substitute, ComposeError, CompositionRecord, DerivedNode,
    DerivedTree, FinalNode, FinalTree, OpKind,
};
use crate::features::{resolve, unify, Bindings, FeatureStructure, FeatureValue, Renamer, VarGen, VarId};
use crate::format::{parse_document, FormatError, RawTreeSet};
use crate::parse::Derivation;
use crate::tree::{
    AdjConstraint, ElementaryTree, GornAddress, Grammar, NodeKind, TreeKind, TreeNode,
};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

/// A named set of trees that compose together, tree-locally. Members are
/// tree names in declaration order; duplicates are allowed. `links` lists
/// variable labels identified across members at composition time.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TreeSet {
    pub name: String,
    pub members: Vec<String>,
    pub links: Vec<String>,
}

/// A grammar with tree sets. `trees` holds every tree, set member or not.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct McGrammar {
    pub name: String,
    pub start: String,
    pub trees: BTreeMap<String, ElementaryTree>,
    pub sets: BTreeMap<String, TreeSet>,
}

impl McGrammar {
    pub fn tree(&self, name: &str) -> Option<&ElementaryTree> {
        self.trees.get(name)
    }

    /// Trees that belong to no set and therefore compose on their own.
    pub fn singles(&self) -> Vec<&ElementaryTree> {
        let members: BTreeSet<&str> = self
            .sets
            .values()
            .flat_map(|s| s.members.iter().map(String::as_str))
            .collect();
        self.trees
            .values()
            .filter(|t| !members.contains(t.name.as_str()))
            .collect()
    }

    /// The raw set blocks, for serialization.
    pub fn raw_sets(&self) -> Vec<RawTreeSet> {
        self.sets
            .values()
            .map(|s| RawTreeSet {
                name: s.name.clone(),
                members: s.members.clone(),
                links: s.links.clone(),
            })
            .collect()
    }
}

/// Loads a grammar that may contain `treeset` blocks.
pub fn load_mc_grammar(text: &str) -> Result<McGrammar, FormatError> {
    let (grammar, raw_sets) = parse_document(text)?;
    let sets = raw_sets
        .into_iter()
        .map(|s| {
            (
                s.name.clone(),
                TreeSet {
                    name: s.name,
                    members: s.members,
                    links: s.links,
                },
            )
        })
        .collect();
    Ok(McGrammar {
        name: grammar.name,
        start: grammar.start,
        trees: grammar.trees,
        sets,
    })
}

/// One member attachment inside a multi-component step.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Placement {
    pub address: GornAddress,
    pub member: String,
    pub op: OpKind,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum McError {
    #[error("no tree set named {0}")]
    UnknownSet(String),
    #[error("host tree {0} is not in the grammar")]
    UnknownHost(String),
    #[error("placements must cover the members of {0} exactly once")]
    CoverageMismatch(String),
    #[error("two placements share address {0}")]
    DuplicateAddress(GornAddress),
    #[error("address {0} is not a node of the host elementary tree; all members must attach to one elementary tree")]
    TreeLocality(GornAddress),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Applies every member of one tree set to `host` in a single step. The
/// host must derive from one elementary tree of the grammar and every
/// placement address must name a node of that elementary tree; linked
/// variables are identified across the member instances afterwards.
pub fn mc_compose(
    grammar: &McGrammar,
    host: &DerivedTree,
    set_name: &str,
    placements: &[Placement],
    gen: &mut VarGen,
) -> Result<DerivedTree, McError> {
    let set = grammar
        .sets
        .get(set_name)
        .ok_or_else(|| McError::UnknownSet(set_name.to_string()))?;
    let mut wanted = set.members.clone();
    let mut got: Vec<String> = placements.iter().map(|p| p.member.clone()).collect();
    wanted.sort();
    got.sort();
    if wanted != got {
        return Err(McError::CoverageMismatch(set.name.clone()));
    }
    for (i, p) in placements.iter().enumerate() {
        if placements[..i].iter().any(|q| q.address == p.address) {
            return Err(McError::DuplicateAddress(p.address.clone()));
        }
    }
    let elementary = grammar
        .tree(&host.root_tree)
        .ok_or_else(|| McError::UnknownHost(host.root_tree.clone()))?;
    for p in placements {
        if elementary.root.node_at(&p.address).is_none() {
            return Err(McError::TreeLocality(p.address.clone()));
        }
    }

    let instances: Vec<DerivedTree> = placements
        .iter()
        .map(|p| instantiate(grammar.tree(&p.member).expect("member checked"), gen))
        .collect();

    let mut order: Vec<usize> = (0..placements.len()).collect();
    order.sort_by(|&a, &b| {
        let pa = &placements[a];
        let pb = &placements[b];
        // Substitutions first in address order, then adjunctions deepest
        // first, so elementary addresses stay valid throughout.
        let ka = (pa.op == OpKind::Adjunction, usize::MAX - pa.address.depth());
        let kb = (pb.op == OpKind::Adjunction, usize::MAX - pb.address.depth());
        ka.cmp(&kb)
            .then_with(|| match pa.op {
                OpKind::Substitution => pa.address.cmp(&pb.address),
                OpKind::Adjunction => pb.address.cmp(&pa.address),
            })
    });

    let mut out = host.clone();
    for idx in order {
        let p = &placements[idx];
        out = match p.op {
            OpKind::Substitution => substitute(&out, &p.address, &instances[idx])?,
            OpKind::Adjunction => adjoin(&out, &p.address, &instances[idx])?,
        };
    }
    out.env = out.env.merged_with(&link_bindings(set, &instances));
    Ok(out)
}

/// Bindings identifying each linked label's variable across instances.
fn link_bindings(set: &TreeSet, instances: &[DerivedTree]) -> Bindings {
    let mut extra = Bindings::new();
    for label in &set.links {
        let vars: Vec<VarId> = instances
            .iter()
            .filter_map(|t| t.var_labels.get(label).copied())
            .collect();
        for v in vars.iter().skip(1) {
            extra.bind(*v, FeatureValue::Var(vars[0]));
        }
    }
    extra
}

// ------------------------------------------------------------- comparison

/// Outcome of comparing a feature-based result with a multi-component one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EquivalenceReport {
    pub equal: bool,
    pub yields_equal: bool,
    pub first_difference: Option<String>,
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.equal {
            write!(f, "equal (yields equal: {})", self.yields_equal)
        } else {
            write!(
                f,
                "unequal: {} (yields equal: {})",
                self.first_difference.as_deref().unwrap_or("unknown"),
                self.yields_equal
            )
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum ErasedKind {
    Phrase(String),
    Word(String),
    Eps,
}

impl fmt::Display for ErasedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErasedKind::Phrase(c) => write!(f, "{c}"),
            ErasedKind::Word(w) => write!(f, "word {w}"),
            ErasedKind::Eps => write!(f, "eps"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
struct Erased {
    kind: ErasedKind,
    index: Option<usize>,
    children: Vec<Erased>,
}

/// Canonical renumbering of index markers: distinct carriers become 1, 2,
/// ... in order of first appearance, so trees compare up to renaming.
#[derive(Default)]
struct IndexNames {
    seen: BTreeMap<String, usize>,
}

impl IndexNames {
    fn number(&mut self, key: String) -> usize {
        let next = self.seen.len() + 1;
        *self.seen.entry(key).or_insert(next)
    }
}

fn erase_final(node: &FinalNode, names: &mut IndexNames) -> Erased {
    let kind = match &node.kind {
        NodeKind::Anchor(w) => ErasedKind::Word(w.clone()),
        NodeKind::Epsilon => ErasedKind::Eps,
        _ => ErasedKind::Phrase(node.label.category.clone()),
    };
    let index = node.features.get("index").map(|v| match v {
        FeatureValue::Atom(a) => names.number(format!("a:{a}")),
        FeatureValue::Var(v) => names.number(format!("v:{}", v.0)),
    });
    Erased {
        kind,
        index,
        children: node
            .children
            .iter()
            .map(|c| erase_final(c, names))
            .collect(),
    }
}

fn erase_derived(node: &DerivedNode, env: &Bindings, names: &mut IndexNames) -> Erased {
    let kind = match &node.kind {
        NodeKind::Anchor(w) => ErasedKind::Word(w.clone()),
        NodeKind::Epsilon => ErasedKind::Eps,
        _ => ErasedKind::Phrase(node.label.category.clone()),
    };
    let raw = node.bottom.get("index").or_else(|| node.top.get("index"));
    let index = raw.map(|v| match env.resolve_value(v) {
        FeatureValue::Atom(a) => names.number(format!("a:{a}")),
        FeatureValue::Var(v) => names.number(format!("v:{}", v.0)),
    });
    Erased {
        kind,
        index,
        children: node
            .children
            .iter()
            .map(|c| erase_derived(c, env, names))
            .collect(),
    }
}

fn first_difference(a: &Erased, b: &Erased, path: &GornAddress) -> Option<String> {
    if a.kind != b.kind {
        return Some(format!("at {path}: {} vs {}", a.kind, b.kind));
    }
    if a.index != b.index {
        return Some(format!(
            "at {path}: index {} vs {}",
            a.index.map_or("none".into(), |i| i.to_string()),
            b.index.map_or("none".into(), |i| i.to_string()),
        ));
    }
    if a.children.len() != b.children.len() {
        return Some(format!(
            "at {path}: {} children vs {}",
            a.children.len(),
            b.children.len()
        ));
    }
    for (i, (ca, cb)) in a.children.iter().zip(&b.children).enumerate() {
        if let Some(d) = first_difference(ca, cb, &path.child(i + 1)) {
            return Some(d);
        }
    }
    None
}

/// Compares a finalized feature-based tree with a multi-component derived
/// tree after erasing all features but `index` coindexation, up to
/// consistent renaming of indices.
pub fn compare(ftag: &FinalTree, mc: &DerivedTree) -> EquivalenceReport {
    let a = erase_final(&ftag.root, &mut IndexNames::default());
    let b = erase_derived(&mc.root, &mc.env, &mut IndexNames::default());
    let first_difference = first_difference(&a, &b, &GornAddress::root());
    EquivalenceReport {
        equal: first_difference.is_none(),
        yields_equal: ftag.tokens() == mc.yield_tokens(),
        first_difference,
    }
}

// ------------------------------------------------------------- sampling

/// Which grammar kind to sample.
#[derive(Clone, Copy)]
pub enum SampleSource<'a> {
    Ftag(&'a Grammar),
    Mc(&'a McGrammar),
}

/// All yields of accepted derivations of length at most `max_len`, by
/// exhaustive enumeration under the tree budget implied by `max_len`.
pub fn language_sample(source: SampleSource<'_>, max_len: usize) -> BTreeSet<Vec<String>> {
    match source {
        SampleSource::Ftag(g) => ftag_sample(g, max_len),
        SampleSource::Mc(g) => mc_sample(g, max_len),
    }
}

fn by_category<'a>(
    trees: impl Iterator<Item = &'a ElementaryTree>,
) -> (
    BTreeMap<String, Vec<&'a ElementaryTree>>,
    BTreeMap<String, Vec<&'a ElementaryTree>>,
) {
    let mut inits: BTreeMap<String, Vec<&ElementaryTree>> = BTreeMap::new();
    let mut auxs: BTreeMap<String, Vec<&ElementaryTree>> = BTreeMap::new();
    for tree in trees {
        let cat = tree.root.label.category.clone();
        match tree.kind {
            TreeKind::Initial => inits.entry(cat).or_default().push(tree),
            TreeKind::Auxiliary => auxs.entry(cat).or_default().push(tree),
        }
    }
    (inits, auxs)
}

fn ftag_sample(grammar: &Grammar, max_len: usize) -> BTreeSet<Vec<String>> {
    let budget = 2 * max_len + 2;
    let (inits, auxs) = by_category(grammar.trees.values());
    let gen = FtagGen {
        inits: &inits,
        auxs: &auxs,
        memo: RefCell::new(HashMap::new()),
    };
    let mut out = BTreeSet::new();
    for tree in inits.get(&grammar.start).into_iter().flatten() {
        let rows = gen.gen_initial(tree, budget, max_len);
        for row in rows.iter() {
            if let Some((toks, _)) = derivation_tokens(grammar, &row.derivation) {
                out.insert(toks);
            }
        }
    }
    out
}

/// Frontier tokens of a derivation, spliced structurally without any
/// composition. The second component is the foot position when the root
/// tree is auxiliary. `None` only when a tree name or record is missing.
fn derivation_tokens(grammar: &Grammar, d: &Derivation) -> Option<(Vec<String>, Option<usize>)> {
    let tree = grammar.trees.get(&d.tree)?;
    let mut out = Vec::new();
    let mut foot = None;
    splice_node(grammar, d, &tree.root, GornAddress::root(), &mut out, &mut foot)?;
    Some((out, foot))
}

fn splice_node(
    grammar: &Grammar,
    d: &Derivation,
    node: &TreeNode,
    addr: GornAddress,
    out: &mut Vec<String>,
    foot: &mut Option<usize>,
) -> Option<()> {
    let adjoined = d
        .children
        .iter()
        .find(|(r, _)| r.op == OpKind::Adjunction && r.address == addr);
    if let Some((_, aux_d)) = adjoined {
        let (mut atoks, afoot) = derivation_tokens(grammar, aux_d)?;
        let tail = atoks.split_off(afoot?);
        out.extend(atoks);
        splice_content(grammar, d, node, addr, out, foot)?;
        out.extend(tail);
        return Some(());
    }
    splice_content(grammar, d, node, addr, out, foot)
}

fn splice_content(
    grammar: &Grammar,
    d: &Derivation,
    node: &TreeNode,
    addr: GornAddress,
    out: &mut Vec<String>,
    foot: &mut Option<usize>,
) -> Option<()> {
    match &node.kind {
        NodeKind::Anchor(w) => out.push(w.clone()),
        NodeKind::Epsilon => {}
        NodeKind::Foot => *foot = Some(out.len()),
        NodeKind::Substitution => {
            let (_, sub_d) = d
                .children
                .iter()
                .find(|(r, _)| r.op == OpKind::Substitution && r.address == addr)?;
            let (toks, _) = derivation_tokens(grammar, sub_d)?;
            out.extend(toks);
        }
        NodeKind::Interior => {
            for (i, c) in node.children.iter().enumerate() {
                splice_node(grammar, d, c, addr.child(i + 1), out, foot)?;
            }
        }
    }
    Some(())
}

/// Generative counterpart of the parser's skeleton search: no token spans,
/// just an instance budget and a bound on produced anchors.
///
/// The enumeration is feature-exact. Every unification `finalize` would
/// perform is applied eagerly while covers are built, so a produced
/// derivation is already known to be accepted and is never replayed. This
/// works because the checks form one conjunction of pairwise meets: the
/// order they run in cannot change whether they succeed, and a subtree's
/// whole contribution to its context is its resolved root interface (plus
/// the foot top for an auxiliary). Completed subenumerations are shared
/// through a memo keyed by tree name and remaining allowances; interfaces
/// are renamed apart at every use.
struct FtagGen<'a> {
    inits: &'a BTreeMap<String, Vec<&'a ElementaryTree>>,
    auxs: &'a BTreeMap<String, Vec<&'a ElementaryTree>>,
    memo: RefCell<HashMap<(&'a str, usize, usize), Rc<Vec<GenRow>>>>,
}

/// One accepted completion of an elementary tree: the derivation, the
/// instances and anchors it consumed, and the interface it presents to
/// whatever attaches it.
#[derive(Clone)]
struct GenRow {
    derivation: Derivation,
    used: usize,
    anchors: usize,
    top: FeatureStructure,
    bottom: FeatureStructure,
    foot_top: Option<FeatureStructure>,
}

/// Partial cover of one elementary instance: composition records so far,
/// instances used, anchors produced, and the binding environment, plus the
/// node's effective root pair once an adjunction replaced it.
type GenCover = (
    Vec<(CompositionRecord, Derivation)>,
    usize,
    usize,
    Bindings,
);

impl<'a> FtagGen<'a> {
    /// Whether adjoining `aux` at `node` can ever survive, ignoring
    /// context bindings. A clash between structures renamed apart cannot
    /// be repaired by more bindings, so this is a sound short circuit that
    /// skips fetching the auxiliary's completions altogether.
    fn adjoin_compatible(node: &TreeNode, aux: &ElementaryTree) -> bool {
        let Some((_, foot)) = aux.foot() else {
            return false;
        };
        let mut gen = VarGen::new();
        let mut ours = Renamer::new(&mut gen);
        let top = ours.rename(&node.top);
        let bottom = ours.rename(&node.bottom);
        let mut theirs = Renamer::new(&mut gen);
        let root_top = theirs.rename(&aux.root.top);
        let foot_top = theirs.rename(&foot.top);
        let env = Bindings::new();
        let Ok((_, env)) = unify(&top, &root_top, &env) else {
            return false;
        };
        unify(&bottom, &foot_top, &env).is_ok()
    }

    fn gen_initial(
        &self,
        tree: &'a ElementaryTree,
        budget: usize,
        anchors: usize,
    ) -> Rc<Vec<GenRow>> {
        self.gen_tree(tree, budget, anchors)
    }

    fn gen_tree(&self, tree: &'a ElementaryTree, budget: usize, anchors: usize) -> Rc<Vec<GenRow>> {
        if budget == 0 {
            return Rc::new(Vec::new());
        }
        let key = (tree.name.as_str(), budget, anchors);
        if let Some(hit) = self.memo.borrow().get(&key) {
            return Rc::clone(hit);
        }
        let mut vg = VarGen::new();
        let root = {
            let mut renamer = Renamer::new(&mut vg);
            rename_nodes(&tree.root, &mut renamer)
        };
        let foot_top = root
            .walk()
            .into_iter()
            .find(|(_, n)| n.kind == NodeKind::Foot)
            .map(|(_, n)| n.top.clone());
        let rows: Vec<GenRow> = self
            .gen_node(
                &tree.name,
                &root,
                GornAddress::root(),
                budget - 1,
                anchors,
                &Bindings::new(),
                &mut vg,
            )
            .into_iter()
            .map(|(children, used, a, env, top, bottom)| GenRow {
                derivation: Derivation::new(&tree.name, children),
                used: used + 1,
                anchors: a,
                top: resolve(&top, &env),
                bottom: resolve(&bottom, &env),
                foot_top: foot_top.as_ref().map(|fs| resolve(fs, &env)),
            })
            .collect();
        let rows = Rc::new(rows);
        self.memo.borrow_mut().insert(key, Rc::clone(&rows));
        rows
    }

    /// Covers of one node, each extended with the pair the node presents
    /// after composition: its own pair, or the upper pair of an adjunction.
    #[allow(clippy::too_many_arguments)]
    fn gen_node(
        &self,
        tree_name: &str,
        node: &TreeNode,
        addr: GornAddress,
        budget: usize,
        anchors: usize,
        env: &Bindings,
        vg: &mut VarGen,
    ) -> Vec<(
        Vec<(CompositionRecord, Derivation)>,
        usize,
        usize,
        Bindings,
        FeatureStructure,
        FeatureStructure,
    )> {
        if node.kind != NodeKind::Interior {
            return self
                .gen_leaf(tree_name, node, addr, budget, anchors, env, vg)
                .into_iter()
                .map(|(ops, used, a, env)| (ops, used, a, env, node.top.clone(), node.bottom.clone()))
                .collect();
        }
        let mut out = Vec::new();
        if node.constraint != AdjConstraint::Oa {
            // No adjunction here: the node's own pair meets at finalize.
            if let Ok((_, env1)) = unify(&node.top, &node.bottom, env) {
                for (ops, used, a, env2) in
                    self.gen_children(tree_name, node, &addr, 0, budget, anchors, &env1, vg)
                {
                    out.push((ops, used, a, env2, node.top.clone(), node.bottom.clone()));
                }
            }
        }
        if node.constraint != AdjConstraint::Na {
            for aux in self.auxs.get(&node.label.category).into_iter().flatten() {
                if let AdjConstraint::Sa(allowed) = &node.constraint {
                    if !allowed.contains(&aux.name) {
                        continue;
                    }
                }
                if !Self::adjoin_compatible(node, aux) {
                    continue;
                }
                let rows = self.gen_tree(aux, budget, anchors);
                for row in rows.iter() {
                    let Some(foot_top) = &row.foot_top else {
                        continue;
                    };
                    let mut renamer = Renamer::new(vg);
                    let aux_top = renamer.rename(&row.top);
                    let aux_bottom = renamer.rename(&row.bottom);
                    let foot_top = renamer.rename(foot_top);
                    // Upper node (top and aux root top, aux root bottom)
                    // meets at finalize; the foot top meets this node's
                    // bottom likewise.
                    let Ok((upper_top, env1)) = unify(&node.top, &aux_top, env) else {
                        continue;
                    };
                    let Ok((_, env2)) = unify(&upper_top, &aux_bottom, &env1) else {
                        continue;
                    };
                    let Ok((_, env3)) = unify(&foot_top, &node.bottom, &env2) else {
                        continue;
                    };
                    let rec = CompositionRecord {
                        parent: tree_name.to_string(),
                        op: OpKind::Adjunction,
                        address: addr.clone(),
                        child: row.derivation.tree.clone(),
                    };
                    for (mut ops, used, a, env4) in self.gen_children(
                        tree_name,
                        node,
                        &addr,
                        0,
                        budget - row.used,
                        anchors - row.anchors,
                        &env3,
                        vg,
                    ) {
                        ops.push((rec.clone(), row.derivation.clone()));
                        out.push((
                            ops,
                            used + row.used,
                            a + row.anchors,
                            env4,
                            upper_top.clone(),
                            aux_bottom.clone(),
                        ));
                    }
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn gen_leaf(
        &self,
        tree_name: &str,
        node: &TreeNode,
        addr: GornAddress,
        budget: usize,
        anchors: usize,
        env: &Bindings,
        vg: &mut VarGen,
    ) -> Vec<GenCover> {
        match &node.kind {
            NodeKind::Anchor(_) => {
                if anchors >= 1 {
                    vec![(Vec::new(), 0, 1, env.clone())]
                } else {
                    Vec::new()
                }
            }
            // A foot's meets belong to the adjunction context.
            NodeKind::Epsilon | NodeKind::Foot => vec![(Vec::new(), 0, 0, env.clone())],
            NodeKind::Substitution => {
                let mut out = Vec::new();
                for cand in self.inits.get(&node.label.category).into_iter().flatten() {
                    let rows = self.gen_tree(cand, budget, anchors);
                    for row in rows.iter() {
                        let mut renamer = Renamer::new(vg);
                        let arg_top = renamer.rename(&row.top);
                        let arg_bottom = renamer.rename(&row.bottom);
                        // Site top against argument top is the eager
                        // substitution check; the merged top then meets the
                        // argument bottom at finalize. Nothing else ever
                        // touches a filled site, so both run here.
                        let Ok((merged, env1)) = unify(&node.top, &arg_top, env) else {
                            continue;
                        };
                        let Ok((_, env2)) = unify(&merged, &arg_bottom, &env1) else {
                            continue;
                        };
                        let rec = CompositionRecord {
                            parent: tree_name.to_string(),
                            op: OpKind::Substitution,
                            address: addr.clone(),
                            child: row.derivation.tree.clone(),
                        };
                        out.push((
                            vec![(rec, row.derivation.clone())],
                            row.used,
                            row.anchors,
                            env2,
                        ));
                    }
                }
                out
            }
            NodeKind::Interior => unreachable!("interior nodes are covered by gen_node"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn gen_children(
        &self,
        tree_name: &str,
        node: &TreeNode,
        addr: &GornAddress,
        from: usize,
        budget: usize,
        anchors: usize,
        env: &Bindings,
        vg: &mut VarGen,
    ) -> Vec<GenCover> {
        let Some(child) = node.children.get(from) else {
            return vec![(Vec::new(), 0, 0, env.clone())];
        };
        let mut out = Vec::new();
        for (ops1, used1, a1, env1, _, _) in self.gen_node(
            tree_name,
            child,
            addr.child(from + 1),
            budget,
            anchors,
            env,
            vg,
        ) {
            for (ops2, used2, a2, env2) in self.gen_children(
                tree_name,
                node,
                addr,
                from + 1,
                budget - used1,
                anchors - a1,
                &env1,
                vg,
            ) {
                let mut ops = ops1.clone();
                ops.extend(ops2);
                out.push((ops, used1 + used2, a1 + a2, env2));
            }
        }
        out
    }
}

/// Copies an elementary tree's nodes with every variable renamed through
/// `renamer`, separating one enumeration's namespace from the grammar's.
fn rename_nodes(node: &TreeNode, renamer: &mut Renamer) -> TreeNode {
    TreeNode {
        label: node.label.clone(),
        kind: node.kind.clone(),
        constraint: node.constraint.clone(),
        top: renamer.rename(&node.top),
        bottom: renamer.rename(&node.bottom),
        smallest: node.smallest,
        children: node.children.iter().map(|c| rename_nodes(c, renamer)).collect(),
    }
}

fn mc_sample(grammar: &McGrammar, max_len: usize) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::new();
    let budget = 2 * max_len + 2;
    let gen = McGen::new(grammar);
    let mut vg = VarGen::new();
    for tree in gen.start_trees() {
        for (done, _, _) in gen.complete(tree, budget, max_len, &mut vg) {
            if out.contains(&done.yield_tokens()) {
                continue;
            }
            let Ok(fin) = finalize(&done) else {
                continue;
            };
            out.insert(fin.tokens());
        }
    }
    out
}

/// Complete multi-component derived trees whose yield equals `tokens`, in
/// enumeration order. This is the generative counterpart of `parse` for a
/// multi-component grammar.
pub fn mc_parses(grammar: &McGrammar, tokens: &[String]) -> Vec<DerivedTree> {
    let budget = 2 * tokens.len() + 2;
    let gen = McGen::new(grammar);
    let mut vg = VarGen::new();
    let mut out = Vec::new();
    for tree in gen.start_trees() {
        for (done, _, _) in gen.complete(tree, budget, tokens.len(), &mut vg) {
            if finalize(&done).is_ok() && done.yield_tokens() == tokens {
                out.push(done);
            }
        }
    }
    out
}

/// One attachment in a multi-component completion plan.
#[derive(Clone)]
struct PlanItem<'a> {
    address: GornAddress,
    op: OpKind,
    tree: &'a ElementaryTree,
    /// Index into the plan's set instances, for link collection.
    set_slot: Option<usize>,
}

struct McGen<'a> {
    grammar: &'a McGrammar,
    single_inits: BTreeMap<String, Vec<&'a ElementaryTree>>,
    single_auxs: BTreeMap<String, Vec<&'a ElementaryTree>>,
    /// Completions per (tree, budget, anchor allowance), computed once with
    /// a private generator and renamed apart on every fetch so no two uses
    /// share variables.
    memo: RefCell<HashMap<(&'a str, usize, usize), Rc<Vec<(DerivedTree, usize, usize)>>>>,
}

impl<'a> McGen<'a> {
    fn new(grammar: &'a McGrammar) -> Self {
        let (single_inits, single_auxs) = by_category(grammar.singles().into_iter());
        McGen {
            grammar,
            single_inits,
            single_auxs,
            memo: RefCell::new(HashMap::new()),
        }
    }

    /// Set members cannot root a derivation: they need a host.
    fn start_trees(&self) -> Vec<&'a ElementaryTree> {
        self.single_inits
            .get(&self.grammar.start)
            .cloned()
            .unwrap_or_default()
    }

    /// All completions of one tree instance: every site filled, optional
    /// adjunctions, tree sets applied tree-locally, recursively completed.
    /// Results come renamed apart from `vg`.
    fn complete(
        &self,
        tree: &'a ElementaryTree,
        budget: usize,
        anchors: usize,
        vg: &mut VarGen,
    ) -> Vec<(DerivedTree, usize, usize)> {
        if budget == 0 {
            return Vec::new();
        }
        let key = (tree.name.as_str(), budget, anchors);
        let hit = self.memo.borrow().get(&key).map(Rc::clone);
        let rows = match hit {
            Some(rows) => rows,
            None => {
                let rows = Rc::new(self.complete_uncached(tree, budget, anchors));
                self.memo.borrow_mut().insert(key, Rc::clone(&rows));
                rows
            }
        };
        rows.iter()
            .map(|(t, u, a)| (t.renamed_apart(vg), *u, *a))
            .collect()
    }

    fn complete_uncached(
        &self,
        tree: &'a ElementaryTree,
        budget: usize,
        anchors: usize,
    ) -> Vec<(DerivedTree, usize, usize)> {
        let own_anchors = tree.anchors().len();
        if own_anchors > anchors {
            return Vec::new();
        }
        let budget = budget - 1;
        let anchors = anchors - own_anchors;
        let mut vg = VarGen::new();

        let mut sites: Vec<(GornAddress, &TreeNode)> = Vec::new();
        let mut interiors: Vec<(GornAddress, &TreeNode)> = Vec::new();
        for (addr, node) in tree.root.walk() {
            match node.kind {
                NodeKind::Substitution => sites.push((addr, node)),
                NodeKind::Interior if node.constraint != AdjConstraint::Na => {
                    interiors.push((addr, node))
                }
                _ => {}
            }
        }

        let mut done = Vec::new();
        for (items, set_links) in self.plans(&sites, &interiors) {
            let host = instantiate(tree, &mut vg);
            let link_vars = vec![BTreeMap::new(); set_links.len()];
            self.apply(
                host,
                &items,
                &set_links,
                link_vars,
                budget,
                anchors,
                0,
                own_anchors,
                &mut vg,
                &mut done,
            );
        }
        // Count this instance itself.
        done.into_iter().map(|(t, u, a)| (t, u + 1, a)).collect()
    }

    /// Enumerates attachment plans: tree set applications first (members
    /// mapped to distinct attachment points), then singles for the rest.
    /// Items come back ordered for application: substitutions by address,
    /// then adjunctions deepest first.
    fn plans(
        &self,
        sites: &[(GornAddress, &'a TreeNode)],
        interiors: &[(GornAddress, &'a TreeNode)],
    ) -> Vec<(Vec<PlanItem<'a>>, Vec<Vec<String>>)> {
        let sets: Vec<&TreeSet> = self.grammar.sets.values().collect();
        let mut plans = Vec::new();
        self.choose_sets(
            &sets,
            0,
            None,
            sites,
            interiors,
            &BTreeSet::new(),
            &BTreeSet::new(),
            Vec::new(),
            Vec::new(),
            &mut plans,
        );
        plans
            .into_iter()
            .map(|(mut items, links)| {
                items.sort_by(|a, b| {
                    let ka = (a.op == OpKind::Adjunction, usize::MAX - a.address.depth());
                    let kb = (b.op == OpKind::Adjunction, usize::MAX - b.address.depth());
                    ka.cmp(&kb).then_with(|| match a.op {
                        OpKind::Substitution => a.address.cmp(&b.address),
                        OpKind::Adjunction => b.address.cmp(&a.address),
                    })
                });
                (items, links)
            })
            .collect()
    }

    /// Recursive choice of set instances. Instances are added in
    /// non-decreasing (set index, assignment) order so each combination
    /// appears once.
    #[allow(clippy::too_many_arguments)]
    fn choose_sets(
        &self,
        sets: &[&'a TreeSet],
        min_set: usize,
        min_assignment: Option<&Vec<(GornAddress, OpKind)>>,
        sites: &[(GornAddress, &'a TreeNode)],
        interiors: &[(GornAddress, &'a TreeNode)],
        filled: &BTreeSet<GornAddress>,
        adjoined: &BTreeSet<GornAddress>,
        items: Vec<PlanItem<'a>>,
        links: Vec<Vec<String>>,
        plans: &mut Vec<(Vec<PlanItem<'a>>, Vec<Vec<String>>)>,
    ) {
        // Option: stop adding sets and fill the rest with singles.
        self.choose_singles(sites, interiors, filled, adjoined, items.clone(), &links, plans);

        for (si, set) in sets.iter().enumerate().skip(min_set) {
            let floor = if si == min_set { min_assignment } else { None };
            let mut assignments = Vec::new();
            self.assign_members(
                set,
                0,
                sites,
                interiors,
                filled,
                adjoined,
                Vec::new(),
                &mut assignments,
            );
            for assignment in assignments {
                let key: Vec<(GornAddress, OpKind)> = assignment
                    .iter()
                    .map(|item| (item.address.clone(), item.op))
                    .collect();
                if let Some(floor) = floor {
                    if &key <= floor {
                        continue;
                    }
                }
                let mut filled2 = filled.clone();
                let mut adjoined2 = adjoined.clone();
                for item in &assignment {
                    match item.op {
                        OpKind::Substitution => filled2.insert(item.address.clone()),
                        OpKind::Adjunction => adjoined2.insert(item.address.clone()),
                    };
                }
                let slot = links.len();
                let mut items2 = items.clone();
                items2.extend(assignment.into_iter().map(|mut item| {
                    item.set_slot = Some(slot);
                    item
                }));
                let mut links2 = links.clone();
                links2.push(set.links.clone());
                self.choose_sets(
                    sets,
                    si,
                    Some(&key),
                    sites,
                    interiors,
                    &filled2,
                    &adjoined2,
                    items2,
                    links2,
                    plans,
                );
            }
        }
    }

    /// Maps the members of one set to distinct attachment points: initial
    /// members substitute at open sites, auxiliary members adjoin at
    /// interior nodes or at (to-be-filled) sites.
    #[allow(clippy::too_many_arguments)]
    fn assign_members(
        &self,
        set: &'a TreeSet,
        member: usize,
        sites: &[(GornAddress, &'a TreeNode)],
        interiors: &[(GornAddress, &'a TreeNode)],
        filled: &BTreeSet<GornAddress>,
        adjoined: &BTreeSet<GornAddress>,
        acc: Vec<PlanItem<'a>>,
        out: &mut Vec<Vec<PlanItem<'a>>>,
    ) {
        let Some(name) = set.members.get(member) else {
            out.push(acc);
            return;
        };
        let Some(tree) = self.grammar.tree(name) else {
            return;
        };
        let cat = &tree.root.label.category;
        let taken = |addr: &GornAddress, op: OpKind, acc: &[PlanItem]| {
            acc.iter().any(|i| i.address == *addr && i.op == op)
                || match op {
                    OpKind::Substitution => filled.contains(addr),
                    OpKind::Adjunction => adjoined.contains(addr),
                }
        };
        match tree.kind {
            TreeKind::Initial => {
                for (addr, node) in sites {
                    if node.label.category != *cat
                        || taken(addr, OpKind::Substitution, &acc)
                    {
                        continue;
                    }
                    let mut acc2 = acc.clone();
                    acc2.push(PlanItem {
                        address: addr.clone(),
                        op: OpKind::Substitution,
                        tree,
                        set_slot: None,
                    });
                    self.assign_members(set, member + 1, sites, interiors, filled, adjoined, acc2, out);
                }
            }
            TreeKind::Auxiliary => {
                let points = interiors.iter().chain(sites.iter());
                for (addr, node) in points {
                    if node.label.category != *cat || taken(addr, OpKind::Adjunction, &acc) {
                        continue;
                    }
                    if let AdjConstraint::Sa(allowed) = &node.constraint {
                        if !allowed.contains(&tree.name) {
                            continue;
                        }
                    }
                    let mut acc2 = acc.clone();
                    acc2.push(PlanItem {
                        address: addr.clone(),
                        op: OpKind::Adjunction,
                        tree,
                        set_slot: None,
                    });
                    self.assign_members(set, member + 1, sites, interiors, filled, adjoined, acc2, out);
                }
            }
        }
    }

    /// Fills remaining open sites with single initial trees and offers
    /// optional single adjunctions at untouched interior nodes.
    #[allow(clippy::too_many_arguments)]
    fn choose_singles(
        &self,
        sites: &[(GornAddress, &'a TreeNode)],
        interiors: &[(GornAddress, &'a TreeNode)],
        filled: &BTreeSet<GornAddress>,
        adjoined: &BTreeSet<GornAddress>,
        items: Vec<PlanItem<'a>>,
        links: &[Vec<String>],
        plans: &mut Vec<(Vec<PlanItem<'a>>, Vec<Vec<String>>)>,
    ) {
        let open_site = sites
            .iter()
            .find(|(addr, _)| !filled.contains(addr) && !items.iter().any(|i| i.address == *addr && i.op == OpKind::Substitution));
        if let Some((addr, node)) = open_site {
            let Some(cands) = self.single_inits.get(&node.label.category) else {
                return;
            };
            for cand in cands {
                let mut items2 = items.clone();
                items2.push(PlanItem {
                    address: addr.clone(),
                    op: OpKind::Substitution,
                    tree: cand,
                    set_slot: None,
                });
                let mut filled2 = filled.clone();
                filled2.insert(addr.clone());
                self.choose_singles(sites, interiors, &filled2, adjoined, items2, links, plans);
            }
            return;
        }
        let open_adj = interiors
            .iter()
            .find(|(addr, _)| !adjoined.contains(addr) && !items.iter().any(|i| i.address == *addr && i.op == OpKind::Adjunction));
        if let Some((addr, node)) = open_adj {
            let mut adjoined2 = adjoined.clone();
            adjoined2.insert(addr.clone());
            // Leave the node alone.
            self.choose_singles(sites, interiors, filled, &adjoined2, items.clone(), links, plans);
            for cand in self
                .single_auxs
                .get(&node.label.category)
                .into_iter()
                .flatten()
            {
                if let AdjConstraint::Sa(allowed) = &node.constraint {
                    if !allowed.contains(&cand.name) {
                        continue;
                    }
                }
                let mut items2 = items.clone();
                items2.push(PlanItem {
                    address: addr.clone(),
                    op: OpKind::Adjunction,
                    tree: cand,
                    set_slot: None,
                });
                self.choose_singles(sites, interiors, filled, &adjoined2, items2, links, plans);
            }
            return;
        }
        plans.push((items, links.to_vec()));
    }

    /// Applies plan items in order, recursively completing each attached
    /// tree, then identifies linked variables across each set instance.
    #[allow(clippy::too_many_arguments)]
    fn apply(
        &self,
        current: DerivedTree,
        items: &[PlanItem<'a>],
        set_links: &[Vec<String>],
        link_vars: Vec<BTreeMap<String, Vec<VarId>>>,
        budget: usize,
        anchors: usize,
        used_acc: usize,
        anchors_used: usize,
        vg: &mut VarGen,
        out: &mut Vec<(DerivedTree, usize, usize)>,
    ) {
        let Some(item) = items.first() else {
            let mut done = current;
            let mut extra = Bindings::new();
            for (slot, labels) in set_links.iter().enumerate() {
                for label in labels {
                    let vars = link_vars[slot].get(label).cloned().unwrap_or_default();
                    for v in vars.iter().skip(1) {
                        extra.bind(*v, FeatureValue::Var(vars[0]));
                    }
                }
            }
            done.env = done.env.merged_with(&extra);
            out.push((done, used_acc, anchors_used));
            return;
        };
        for (child, used, child_anchors) in self.complete(item.tree, budget, anchors, vg) {
            let composed = match item.op {
                OpKind::Substitution => substitute(&current, &item.address, &child),
                OpKind::Adjunction => adjoin(&current, &item.address, &child),
            };
            let Ok(next) = composed else {
                continue;
            };
            let mut link_vars2 = link_vars.clone();
            if let Some(slot) = item.set_slot {
                for label in &set_links[slot] {
                    if let Some(v) = child.var_labels.get(label) {
                        link_vars2[slot].entry(label.clone()).or_default().push(*v);
                    }
                }
            }
            self.apply(
                next,
                &items[1..],
                set_links,
                link_vars2,
                budget - used,
                anchors - child_anchors,
                used_acc + used,
                anchors_used + child_anchors,
                vg,
                out,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::load_grammar;
    use crate::parse::{parse, tokenize, ParseLimits};

    const FIG1: &str = r#"
grammar fig1 start=S
tree alpha_walked initial {
  (S_r (NP_0!) (VP (V "walked")))
}
tree alpha_john initial {
  (NP "john")
}
tree alpha_philadelphia initial {
  (NP "philadelphia")
}
tree beta_to_pp auxiliary {
  (VP_r (VP*) (PP (P "to") (NP!)))
}
"#;

    const MC_TOY: &str = r#"
grammar toy start=S
tree alpha_host initial {
  (S_r (NP_0!) (VP (V "arrived")))
}
tree alpha_man initial {
  (NP (N "man"))
}
tree beta_clause auxiliary {
  (S_r (S*) (S' [b: index=#1] (C "who")))
}
tree beta_eps auxiliary {
  (NP_r (NP*) (NP_t @NA [b: index=#1] <eps:#1>))
}
treeset ts_pair {
  member beta_clause
  member beta_eps
  link #1
}
"#;

    #[test]
    fn loads_sets_and_partitions_singles() {
        let g = load_mc_grammar(MC_TOY).unwrap();
        assert_eq!(g.sets.len(), 1);
        let names: Vec<&str> = g.singles().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["alpha_host", "alpha_man"]);
    }

    #[test]
    fn mc_compose_applies_all_members_and_links_indices() {
        let g = load_mc_grammar(MC_TOY).unwrap();
        let mut vg = VarGen::new();
        let host = instantiate(g.tree("alpha_host").unwrap(), &mut vg);
        let man = instantiate(g.tree("alpha_man").unwrap(), &mut vg);
        let host = substitute(&host, &GornAddress(vec![1]), &man).unwrap();
        let out = mc_compose(
            &g,
            &host,
            "ts_pair",
            &[
                Placement {
                    address: GornAddress::root(),
                    member: "beta_clause".into(),
                    op: OpKind::Adjunction,
                },
                Placement {
                    address: GornAddress(vec![1]),
                    member: "beta_eps".into(),
                    op: OpKind::Adjunction,
                },
            ],
            &mut vg,
        )
        .unwrap();
        let fin = finalize(&out).unwrap();
        // The empty category and the clause share one grounded index.
        let mut indices = Vec::new();
        for (_, node) in fin.nodes() {
            if let Some(FeatureValue::Atom(a)) = node.features.get("index") {
                indices.push(a.clone());
            }
        }
        assert_eq!(indices.len(), 3);
        assert!(indices.iter().all(|a| a == &indices[0]));
        assert_eq!(
            fin.tokens(),
            vec!["man", "arrived", "who"]
        );
    }

    #[test]
    fn mc_compose_checks_coverage_addresses_and_locality() {
        let g = load_mc_grammar(MC_TOY).unwrap();
        let mut vg = VarGen::new();
        let host = instantiate(g.tree("alpha_host").unwrap(), &mut vg);
        let man = instantiate(g.tree("alpha_man").unwrap(), &mut vg);
        let host = substitute(&host, &GornAddress(vec![1]), &man).unwrap();
        let place = |addr: Vec<usize>, member: &str| Placement {
            address: GornAddress(addr),
            member: member.into(),
            op: OpKind::Adjunction,
        };
        assert!(matches!(
            mc_compose(&g, &host, "nope", &[], &mut vg),
            Err(McError::UnknownSet(_))
        ));
        assert!(matches!(
            mc_compose(&g, &host, "ts_pair", &[place(vec![], "beta_clause")], &mut vg),
            Err(McError::CoverageMismatch(_))
        ));
        assert!(matches!(
            mc_compose(
                &g,
                &host,
                "ts_pair",
                &[place(vec![1], "beta_clause"), place(vec![1], "beta_eps")],
                &mut vg
            ),
            Err(McError::DuplicateAddress(_))
        ));
        // [1,1] exists in the derived tree (inside the substituted NP) but
        // not in the host elementary tree: locality refuses it.
        assert!(matches!(
            mc_compose(
                &g,
                &host,
                "ts_pair",
                &[place(vec![], "beta_clause"), place(vec![1, 1], "beta_eps")],
                &mut vg
            ),
            Err(McError::TreeLocality(_))
        ));
    }

    #[test]
    fn singleton_set_degenerates_to_plain_adjunction() {
        let text = r#"
grammar g start=S
tree alpha initial {
  (S (V "ran"))
}
tree beta auxiliary {
  (S_r (S*) (Adv "fast"))
}
treeset solo {
  member beta
}
"#;
        let g = load_mc_grammar(text).unwrap();
        let mut vg = VarGen::new();
        let host = instantiate(g.tree("alpha").unwrap(), &mut vg);
        let via_set = mc_compose(
            &g,
            &host,
            "solo",
            &[Placement {
                address: GornAddress::root(),
                member: "beta".into(),
                op: OpKind::Adjunction,
            }],
            &mut vg,
        )
        .unwrap();
        let aux = instantiate(g.tree("beta").unwrap(), &mut vg);
        let direct = adjoin(&host, &GornAddress::root(), &aux).unwrap();
        let report = compare(&finalize(&direct).unwrap(), &via_set);
        assert!(report.equal, "{report}");
    }

    #[test]
    fn sample_matches_the_small_grammar_language() {
        let g = load_grammar(FIG1).unwrap();
        let sample = language_sample(SampleSource::Ftag(&g), 4);
        // Nothing distinguishes the two proper names, so either fills
        // either NP slot; the PP is optional.
        let expect: BTreeSet<Vec<String>> = [
            tokenize("john walked"),
            tokenize("philadelphia walked"),
            tokenize("john walked to philadelphia"),
            tokenize("john walked to john"),
            tokenize("philadelphia walked to john"),
            tokenize("philadelphia walked to philadelphia"),
        ]
        .into_iter()
        .collect();
        assert_eq!(sample, expect);
        assert!(language_sample(SampleSource::Ftag(&g), 0).is_empty());
        // Sampled yields parse back.
        for tokens in &sample {
            assert!(!parse(&g, tokens, &ParseLimits::default()).derivations.is_empty());
        }
    }

    #[test]
    fn mc_sample_applies_sets_tree_locally() {
        let g = load_mc_grammar(MC_TOY).unwrap();
        let sample = language_sample(SampleSource::Mc(&g), 4);
        let expect: BTreeSet<Vec<String>> = [
            tokenize("man arrived"),
            tokenize("man arrived who"),
        ]
        .into_iter()
        .collect();
        assert_eq!(sample, expect);
    }

    #[test]
    fn compare_flags_structural_differences() {
        let g = load_mc_grammar(MC_TOY).unwrap();
        let mut vg = VarGen::new();
        let host = instantiate(g.tree("alpha_host").unwrap(), &mut vg);
        let man = instantiate(g.tree("alpha_man").unwrap(), &mut vg);
        let plain = substitute(&host, &GornAddress(vec![1]), &man).unwrap();
        let fin = finalize(&plain).unwrap();
        let report = compare(&fin, &plain);
        assert!(report.equal);
        assert!(report.yields_equal);

        let clause = instantiate(g.tree("beta_clause").unwrap(), &mut vg);
        let bigger = adjoin(&plain, &GornAddress::root(), &clause).unwrap();
        let report = compare(&fin, &bigger);
        assert!(!report.equal);
        assert!(report.first_difference.is_some());
        assert!(!report.yields_equal);
    }
}
