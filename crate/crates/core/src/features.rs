//! Flat feature structures and unification.
//!
//! A feature structure maps attribute names to values; a value is either an
//! atom or a variable. Variables express coindexation: two attributes holding
//! the same variable must resolve to the same value. Bindings accumulate in a
//! persistent [`Bindings`] environment threaded through composition, so
//! unification never mutates its inputs.

use std::collections::BTreeMap;
use std::fmt;

/// Identifier for a coindexation variable. Fresh ids come from [`VarGen`];
/// grammar loading and tree instantiation keep ids unique per context.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An attribute value: a ground atom such as `+`, `-` or `i1`, or a variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum FeatureValue {
    Atom(String),
    Var(VarId),
}

impl FeatureValue {
    pub fn atom(s: impl Into<String>) -> Self {
        FeatureValue::Atom(s.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, FeatureValue::Var(_))
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Atom(a) => write!(f, "{a}"),
            FeatureValue::Var(v) => write!(f, "{v}"),
        }
    }
}

/// A flat attribute-to-value map. Attribute order is alphabetical, which
/// makes display and iteration deterministic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Default, Debug)]
pub struct FeatureStructure {
    entries: BTreeMap<String, FeatureValue>,
}

impl FeatureStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, FeatureValue)>,
        S: Into<String>,
    {
        FeatureStructure {
            entries: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn get(&self, attr: &str) -> Option<&FeatureValue> {
        self.entries.get(attr)
    }

    pub fn set(&mut self, attr: impl Into<String>, value: FeatureValue) {
        self.entries.insert(attr.into(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &FeatureValue)> {
        self.entries.iter()
    }
}

impl fmt::Display for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.entries {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
            first = false;
        }
        Ok(())
    }
}

/// Persistent variable environment. Extending it clones the map; the engine
/// works at sentence scale, where that cost is irrelevant.
///
/// The binding API only ever binds an unbound variable to a fully resolved
/// value, so chains are acyclic by construction. A cycle can therefore only
/// be introduced by assembling a `Bindings` by hand; resolution treats that
/// as a programmer error and panics rather than looping.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Bindings {
    map: BTreeMap<VarId, FeatureValue>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn lookup(&self, v: VarId) -> Option<&FeatureValue> {
        self.map.get(&v)
    }

    /// Follows binding chains until an atom or an unbound variable remains.
    pub fn resolve_value(&self, value: &FeatureValue) -> FeatureValue {
        let mut current = value.clone();
        let mut steps = 0usize;
        while let FeatureValue::Var(v) = current {
            match self.map.get(&v) {
                Some(next) => {
                    steps += 1;
                    if steps > self.map.len() {
                        panic!("cycle in variable bindings at {v}; bindings must stay acyclic");
                    }
                    current = next.clone();
                }
                None => return FeatureValue::Var(v),
            }
        }
        current
    }

    /// Binds an unbound variable. Unification resolves both sides before
    /// binding, so rebinding or self-binding indicates a caller bug.
    pub fn bind(&mut self, v: VarId, value: FeatureValue) {
        debug_assert!(
            !self.map.contains_key(&v),
            "rebinding {v}; unify resolves before binding"
        );
        debug_assert!(value != FeatureValue::Var(v), "self-binding {v}");
        self.map.insert(v, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &FeatureValue)> {
        self.map.iter()
    }

    /// Merges two environments with disjoint variable ranges. Both sides of a
    /// composition must draw their variables from one [`VarGen`], so overlap
    /// indicates a programming error.
    pub fn merged_with(&self, other: &Bindings) -> Bindings {
        let mut map = self.map.clone();
        for (k, v) in &other.map {
            let prior = map.insert(*k, v.clone());
            debug_assert!(
                prior.is_none() || prior.as_ref() == Some(v),
                "conflicting bindings for {k} while merging environments"
            );
        }
        Bindings { map }
    }
}

/// A unification failure: the attribute and the two resolved values that
/// refused to merge.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clash {
    pub attribute: String,
    pub left: FeatureValue,
    pub right: FeatureValue,
}

impl fmt::Display for Clash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} cannot unify: {} vs {}",
            self.attribute, self.left, self.right
        )
    }
}

/// Unifies two flat structures under `env`. On success the result carries the
/// union of attributes with every value resolved as far as the extended
/// environment allows; the extended environment is returned alongside.
/// Failure is an ordinary outcome, not an error in the `panic` sense.
pub fn unify(
    a: &FeatureStructure,
    b: &FeatureStructure,
    env: &Bindings,
) -> Result<(FeatureStructure, Bindings), Clash> {
    let mut env = env.clone();
    let mut out = a.clone();
    for (attr, vb) in b.iter() {
        match out.entries.get(attr) {
            None => {
                out.set(attr.clone(), env.resolve_value(vb));
            }
            Some(va) => {
                let merged = unify_values(va, vb, &mut env).map_err(|(left, right)| Clash {
                    attribute: attr.clone(),
                    left,
                    right,
                })?;
                out.set(attr.clone(), merged);
            }
        }
    }
    // Bindings made late may ground values stored early; resolve once more.
    let resolved = resolve(&out, &env);
    Ok((resolved, env))
}

fn unify_values(
    a: &FeatureValue,
    b: &FeatureValue,
    env: &mut Bindings,
) -> Result<FeatureValue, (FeatureValue, FeatureValue)> {
    let ra = env.resolve_value(a);
    let rb = env.resolve_value(b);
    match (&ra, &rb) {
        (FeatureValue::Atom(x), FeatureValue::Atom(y)) => {
            if x == y {
                Ok(ra.clone())
            } else {
                Err((ra.clone(), rb.clone()))
            }
        }
        (FeatureValue::Var(v), FeatureValue::Var(w)) if v == w => Ok(ra.clone()),
        (FeatureValue::Var(v), FeatureValue::Var(w)) => {
            // Bind the younger variable to the older one so the surviving
            // variable does not depend on argument order.
            let (from, to) = if v > w { (*v, *w) } else { (*w, *v) };
            env.bind(from, FeatureValue::Var(to));
            Ok(FeatureValue::Var(to))
        }
        (FeatureValue::Var(v), _) => {
            env.bind(*v, rb.clone());
            Ok(rb.clone())
        }
        (_, FeatureValue::Var(w)) => {
            env.bind(*w, ra.clone());
            Ok(ra.clone())
        }
    }
}

/// Replaces every variable with its binding, leaving unbound variables in
/// place.
pub fn resolve(fs: &FeatureStructure, env: &Bindings) -> FeatureStructure {
    FeatureStructure {
        entries: fs
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), env.resolve_value(v)))
            .collect(),
    }
}

/// Source of fresh variables. One generator serves a whole derivation so
/// that ids never collide across instantiated trees.
#[derive(Default, Debug)]
pub struct VarGen {
    next: u32,
}

impl VarGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> VarId {
        let id = VarId(self.next);
        self.next += 1;
        id
    }
}

/// Consistent renaming across several structures: the same old variable maps
/// to the same fresh variable for the lifetime of the renamer. Instantiation
/// runs one renamer over a whole elementary tree, which preserves
/// within-tree coindexation while separating tree instances.
pub struct Renamer<'a> {
    gen: &'a mut VarGen,
    map: BTreeMap<VarId, VarId>,
}

impl<'a> Renamer<'a> {
    pub fn new(gen: &'a mut VarGen) -> Self {
        Renamer {
            gen,
            map: BTreeMap::new(),
        }
    }

    pub fn rename_var(&mut self, v: VarId) -> VarId {
        *self.map.entry(v).or_insert_with(|| self.gen.fresh())
    }

    pub fn rename(&mut self, fs: &FeatureStructure) -> FeatureStructure {
        FeatureStructure {
            entries: fs
                .entries
                .iter()
                .map(|(k, v)| {
                    let v = match v {
                        FeatureValue::Var(old) => FeatureValue::Var(self.rename_var(*old)),
                        atom => atom.clone(),
                    };
                    (k.clone(), v)
                })
                .collect(),
        }
    }
}

/// One-shot renaming of a single structure with fresh variables.
pub fn rename(fs: &FeatureStructure, gen: &mut VarGen) -> FeatureStructure {
    Renamer::new(gen).rename(fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> FeatureValue {
        FeatureValue::atom(s)
    }

    fn fs(pairs: &[(&str, FeatureValue)]) -> FeatureStructure {
        FeatureStructure::from_pairs(pairs.iter().map(|(k, v)| (*k, v.clone())))
    }

    #[test]
    fn unify_disjoint_attributes_unions() {
        let a = fs(&[("displ_const", atom("-"))]);
        let b = fs(&[("displ_const_index", atom("i1"))]);
        let (r, env) = unify(&a, &b, &Bindings::new()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.get("displ_const"), Some(&atom("-")));
        assert_eq!(r.get("displ_const_index"), Some(&atom("i1")));
        assert!(env.is_empty());
    }

    #[test]
    fn unify_equal_atoms_succeeds_conflicting_atoms_fail() {
        let a = fs(&[("displ_const", atom("+"))]);
        assert!(unify(&a, &a, &Bindings::new()).is_ok());
        let b = fs(&[("displ_const", atom("-"))]);
        let clash = unify(&a, &b, &Bindings::new()).unwrap_err();
        assert_eq!(clash.attribute, "displ_const");
        assert_eq!(clash.left, atom("+"));
        assert_eq!(clash.right, atom("-"));
    }

    #[test]
    fn unify_binds_variable_to_atom() {
        let x = VarId(0);
        let a = fs(&[("displ_const", FeatureValue::Var(x))]);
        let b = fs(&[("displ_const", atom("-"))]);
        let (r, env) = unify(&a, &b, &Bindings::new()).unwrap();
        assert_eq!(r.get("displ_const"), Some(&atom("-")));
        assert_eq!(env.resolve_value(&FeatureValue::Var(x)), atom("-"));
    }

    #[test]
    fn shared_variable_grounds_every_occurrence() {
        let x = VarId(0);
        let a = fs(&[
            ("displ_const", FeatureValue::Var(x)),
            ("displ_const_index", FeatureValue::Var(x)),
        ]);
        let b = fs(&[("displ_const", atom("+"))]);
        let (r, _) = unify(&a, &b, &Bindings::new()).unwrap();
        assert_eq!(r.get("displ_const_index"), Some(&atom("+")));
    }

    #[test]
    fn bound_variables_clash_through_the_environment() {
        let x = VarId(0);
        let a = fs(&[("displ_const", FeatureValue::Var(x))]);
        let b = fs(&[("displ_const", atom("-"))]);
        let (_, env) = unify(&a, &b, &Bindings::new()).unwrap();
        let c = fs(&[("displ_const", atom("+"))]);
        assert!(unify(&a, &c, &env).is_err());
    }

    #[test]
    fn variable_against_variable_links_them() {
        let x = VarId(0);
        let y = VarId(1);
        let a = fs(&[("idx", FeatureValue::Var(x))]);
        let b = fs(&[("idx", FeatureValue::Var(y))]);
        let (_, env) = unify(&a, &b, &Bindings::new()).unwrap();
        let c = fs(&[("idx", atom("i1"))]);
        let (_, env) = unify(&a, &c, &env).unwrap();
        assert_eq!(env.resolve_value(&FeatureValue::Var(y)), atom("i1"));
    }

    #[test]
    fn resolve_leaves_unbound_variables() {
        let x = VarId(7);
        let a = fs(&[("idx", FeatureValue::Var(x))]);
        let r = resolve(&a, &Bindings::new());
        assert_eq!(r.get("idx"), Some(&FeatureValue::Var(x)));
    }

    #[test]
    fn rename_is_consistent_within_a_structure() {
        let x = VarId(0);
        let a = fs(&[("a", FeatureValue::Var(x)), ("b", FeatureValue::Var(x))]);
        let mut gen = VarGen::new();
        gen.fresh(); // offset so renamed ids differ from the original
        let r = rename(&a, &mut gen);
        let ra = r.get("a").unwrap();
        let rb = r.get("b").unwrap();
        assert_eq!(ra, rb);
        assert_ne!(ra, &FeatureValue::Var(x));
    }

    #[test]
    #[should_panic(expected = "cycle in variable bindings")]
    fn hand_built_cycle_is_a_programmer_error() {
        let mut env = Bindings::new();
        env.map.insert(VarId(0), FeatureValue::Var(VarId(1)));
        env.map.insert(VarId(1), FeatureValue::Var(VarId(0)));
        env.resolve_value(&FeatureValue::Var(VarId(0)));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_value() -> impl Strategy<Value = FeatureValue> {
            prop_oneof![
                prop_oneof![
                    Just("+".to_string()),
                    Just("-".to_string()),
                    Just("i1".to_string()),
                    Just("i2".to_string())
                ]
                .prop_map(FeatureValue::Atom),
                (0u32..2).prop_map(|i| FeatureValue::Var(VarId(i))),
            ]
        }

        fn arb_fs() -> impl Strategy<Value = FeatureStructure> {
            prop::collection::btree_map(
                prop_oneof![
                    Just("displ_const".to_string()),
                    Just("displ_const_index".to_string()),
                    Just("index".to_string()),
                    Just("agr".to_string())
                ],
                arb_value(),
                0..=4,
            )
            .prop_map(|m| FeatureStructure { entries: m })
        }

        proptest! {
            #[test]
            fn commutative(a in arb_fs(), b in arb_fs()) {
                let env = Bindings::new();
                let ab = unify(&a, &b, &env);
                let ba = unify(&b, &a, &env);
                match (ab, ba) {
                    (Ok((ra, ea)), Ok((rb, eb))) => {
                        prop_assert_eq!(resolve(&ra, &ea), resolve(&rb, &eb));
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "one order failed, the other succeeded"),
                }
            }

            #[test]
            fn associative_outcome(a in arb_fs(), b in arb_fs(), c in arb_fs()) {
                let env = Bindings::new();
                let left = unify(&a, &b, &env)
                    .and_then(|(ab, e)| unify(&ab, &c, &e));
                let right = unify(&b, &c, &env)
                    .and_then(|(bc, e)| unify(&a, &bc, &e));
                match (left, right) {
                    (Ok((rl, el)), Ok((rr, er))) => {
                        prop_assert_eq!(resolve(&rl, &el), resolve(&rr, &er));
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "grouping changed the outcome"),
                }
            }

            #[test]
            fn idempotent(a in arb_fs()) {
                let env = Bindings::new();
                let (r, e) = unify(&a, &a, &env).expect("self-unification cannot clash");
                prop_assert_eq!(r, resolve(&a, &e));
            }

            #[test]
            fn failure_is_monotonic(a in arb_fs(), b in arb_fs(), extra in arb_value()) {
                let env = Bindings::new();
                if unify(&a, &b, &env).is_err() {
                    let mut wider = a.clone();
                    wider.set("extra_attribute", extra);
                    prop_assert!(unify(&wider, &b, &env).is_err());
                }
            }

            #[test]
            fn rename_preserves_outcome_against_ground(a in arb_fs(), b in arb_fs()) {
                // Make b ground by replacing variables with an atom.
                let ground = FeatureStructure::from_pairs(b.iter().map(|(k, v)| {
                    let v = match v {
                        FeatureValue::Var(_) => FeatureValue::atom("+"),
                        atom => atom.clone(),
                    };
                    (k.clone(), v)
                }));
                let env = Bindings::new();
                let before = unify(&a, &ground, &env).is_ok();
                let mut gen = VarGen::new();
                for _ in 0..8 {
                    gen.fresh();
                }
                let renamed = rename(&a, &mut gen);
                let after = unify(&renamed, &ground, &env).is_ok();
                prop_assert_eq!(before, after);
            }
        }
    }
}
