//! Plain-text grammar format.
//!
//! ```text
//! ; comment to end of line
//! grammar extraposition start=S
//!
//! tree alpha_arrive initial {
//!   (S_r [t: displ_const=-] [b: displ_const=#1, displ_const_index=#2]
//!     (NP_0! @smallest [t: displ_const=#1, displ_const_index=#2])
//!     (VP [b: displ_const=-]
//!       (V "arrived")))
//! }
//! ```
//!
//! A head token is `CATEGORY`, optionally `_tag`, optionally a trailing `!`
//! (substitution site) or `*` (foot). Annotations: `@NA`, `@OA`,
//! `@SA(name,name)`, `@smallest`. Feature blocks `[t: ...]` and `[b: ...]`
//! hold `attribute=value` pairs where a value is an atom or a coindexation
//! variable `#k` scoped to the tree. Leaves: `"word"` anchors and `<eps>` or
//! `<eps:#k>` empty categories. Multi-component files add
//! `treeset name { member tree ... link #k }` blocks.

use crate::features::{FeatureStructure, FeatureValue, VarId};
use crate::tree::{
    validate_tree, AdjConstraint, ElementaryTree, Grammar, NodeKind, NodeLabel, TreeKind,
    TreeNode, Violation,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("tree {0} is defined twice")]
    DuplicateTree(String),
    #[error("tree set {0} is defined twice")]
    DuplicateTreeSet(String),
    #[error("ill-formed trees:\n{}", list_violations(.0))]
    InvalidTrees(Vec<Violation>),
    #[error("selective adjoining on {tree} names unknown auxiliary {name}")]
    UnknownSelectiveTarget { tree: String, name: String },
    #[error("tree set {set} names unknown tree {name}")]
    UnknownMember { set: String, name: String },
    #[error("tree set {set} link {label} must occur in at least two members")]
    UnlinkedLabel { set: String, label: String },
    #[error("grammar file contains tree sets; load it with the multi-component loader")]
    UnexpectedTreeSet,
    #[error("grammar defines no trees")]
    NoTrees,
}

fn list_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A `treeset` block as written in the file: member tree names in order and
/// the variable labels linked across members.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RawTreeSet {
    pub name: String,
    pub members: Vec<String>,
    pub links: Vec<String>,
}

/// Loads a single-component grammar. Fails on syntax errors (with line and
/// column), on ill-formed trees (listing every violation) and on `treeset`
/// blocks, which belong to the multi-component format.
pub fn load_grammar(text: &str) -> Result<Grammar, FormatError> {
    let (grammar, sets) = parse_document(text)?;
    if !sets.is_empty() {
        return Err(FormatError::UnexpectedTreeSet);
    }
    Ok(grammar)
}

/// Shared parse for both loaders.
pub(crate) fn parse_document(text: &str) -> Result<(Grammar, Vec<RawTreeSet>), FormatError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let doc = p.document()?;
    if doc.0.trees.is_empty() {
        return Err(FormatError::NoTrees);
    }

    let mut violations = Vec::new();
    for tree in doc.0.trees.values() {
        violations.extend(validate_tree(tree));
    }
    if !violations.is_empty() {
        return Err(FormatError::InvalidTrees(violations));
    }
    for tree in doc.0.trees.values() {
        for (_, node) in tree.root.walk() {
            if let AdjConstraint::Sa(names) = &node.constraint {
                for name in names {
                    match doc.0.trees.get(name) {
                        Some(t) if t.kind == TreeKind::Auxiliary => {}
                        _ => {
                            return Err(FormatError::UnknownSelectiveTarget {
                                tree: tree.name.clone(),
                                name: name.clone(),
                            })
                        }
                    }
                }
            }
        }
    }
    for set in &doc.1 {
        for member in &set.members {
            if !doc.0.trees.contains_key(member) {
                return Err(FormatError::UnknownMember {
                    set: set.name.clone(),
                    name: member.clone(),
                });
            }
        }
        for label in &set.links {
            let carriers = set
                .members
                .iter()
                .filter(|m| doc.0.trees[*m].var_labels.contains_key(label))
                .count();
            if carriers < 2 {
                return Err(FormatError::UnlinkedLabel {
                    set: set.name.clone(),
                    label: label.clone(),
                });
            }
        }
    }
    Ok(doc)
}

// ---------------------------------------------------------------- lexing

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Comma,
    Equals,
    At,
    Bang,
    Star,
    Sym(String),
    Str(String),
    Var(String),
    Eps(Option<String>),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_sym_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '+' | '-')
}

fn lex(text: &str) -> Result<Vec<Spanned>, FormatError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! err {
        ($($arg:tt)*) => {
            return Err(FormatError::Syntax {
                line,
                column,
                message: format!($($arg)*),
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut push = |tok: Tok| {
            out.push(Spanned {
                tok,
                line: tl,
                column: tc,
            })
        };
        let advance = |chars: &mut std::iter::Peekable<std::str::Chars>,
                           line: &mut usize,
                           column: &mut usize| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *column = 1;
            } else {
                *column += 1;
            }
            c
        };

        match c {
            ' ' | '\t' | '\r' | '\n' => {
                advance(&mut chars, &mut line, &mut column);
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    advance(&mut chars, &mut line, &mut column);
                }
            }
            '(' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::LParen);
            }
            ')' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::RParen);
            }
            '{' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::LBrace);
            }
            '}' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::RBrace);
            }
            '[' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::LBracket);
            }
            ']' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::RBracket);
            }
            ':' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::Colon);
            }
            ',' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::Comma);
            }
            '=' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::Equals);
            }
            '@' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::At);
            }
            '!' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::Bang);
            }
            '*' => {
                advance(&mut chars, &mut line, &mut column);
                push(Tok::Star);
            }
            '#' => {
                advance(&mut chars, &mut line, &mut column);
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if is_sym_char(c) {
                        name.push(advance(&mut chars, &mut line, &mut column));
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    err!("expected a variable name after '#'");
                }
                push(Tok::Var(name));
            }
            '"' => {
                advance(&mut chars, &mut line, &mut column);
                let mut word = String::new();
                loop {
                    match chars.peek() {
                        Some('"') => {
                            advance(&mut chars, &mut line, &mut column);
                            break;
                        }
                        Some('\n') | None => err!("unterminated string"),
                        Some(_) => word.push(advance(&mut chars, &mut line, &mut column)),
                    }
                }
                if word.is_empty() {
                    err!("empty anchor word");
                }
                push(Tok::Str(word));
            }
            '<' => {
                advance(&mut chars, &mut line, &mut column);
                let mut body = String::new();
                loop {
                    match chars.peek() {
                        Some('>') => {
                            advance(&mut chars, &mut line, &mut column);
                            break;
                        }
                        Some('\n') | None => err!("unterminated '<...>' leaf"),
                        Some(_) => body.push(advance(&mut chars, &mut line, &mut column)),
                    }
                }
                let tok = if body == "eps" {
                    Tok::Eps(None)
                } else if let Some(label) = body.strip_prefix("eps:#") {
                    if label.is_empty() || !label.chars().all(is_sym_char) {
                        err!("bad empty-category index in '<{body}>'");
                    }
                    Tok::Eps(Some(label.to_string()))
                } else {
                    err!("unknown leaf '<{body}>'; expected <eps> or <eps:#k>");
                };
                push(tok);
            }
            c if is_sym_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if is_sym_char(c) {
                        s.push(advance(&mut chars, &mut line, &mut column));
                    } else {
                        break;
                    }
                }
                push(Tok::Sym(s));
            }
            other => err!("unexpected character '{other}'"),
        }
    }
    Ok(out)
}

// --------------------------------------------------------------- parsing

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at<T>(&self, message: String) -> Result<T, FormatError> {
        let (line, column) = self
            .tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|s| (s.line, s.column))
            .unwrap_or((1, 1));
        Err(FormatError::Syntax {
            line,
            column,
            message,
        })
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), FormatError> {
        match self.next() {
            Some(s) if &s.tok == want => Ok(()),
            Some(s) => Err(FormatError::Syntax {
                line: s.line,
                column: s.column,
                message: format!("expected {what}"),
            }),
            None => self.error_at(format!("expected {what}, found end of file")),
        }
    }

    fn symbol(&mut self, what: &str) -> Result<String, FormatError> {
        match self.next() {
            Some(Spanned {
                tok: Tok::Sym(s), ..
            }) => Ok(s),
            Some(s) => Err(FormatError::Syntax {
                line: s.line,
                column: s.column,
                message: format!("expected {what}"),
            }),
            None => self.error_at(format!("expected {what}, found end of file")),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), FormatError> {
        let s = self.symbol(&format!("'{word}'"))?;
        if s == word {
            Ok(())
        } else {
            self.pos -= 1;
            self.error_at(format!("expected '{word}', found '{s}'"))
        }
    }

    fn document(&mut self) -> Result<(Grammar, Vec<RawTreeSet>), FormatError> {
        self.keyword("grammar")?;
        let name = self.symbol("grammar name")?;
        self.keyword("start")?;
        self.expect(&Tok::Equals, "'=' after start")?;
        let start = self.symbol("start category")?;

        let mut trees: BTreeMap<String, ElementaryTree> = BTreeMap::new();
        let mut sets: Vec<RawTreeSet> = Vec::new();
        while self.peek().is_some() {
            let word = self.symbol("'tree' or 'treeset'")?;
            match word.as_str() {
                "tree" => {
                    let tree = self.tree_block()?;
                    if trees.contains_key(&tree.name) {
                        return Err(FormatError::DuplicateTree(tree.name));
                    }
                    trees.insert(tree.name.clone(), tree);
                }
                "treeset" => {
                    let set = self.treeset_block()?;
                    if sets.iter().any(|s| s.name == set.name) {
                        return Err(FormatError::DuplicateTreeSet(set.name));
                    }
                    sets.push(set);
                }
                other => {
                    self.pos -= 1;
                    return self.error_at(format!("expected 'tree' or 'treeset', found '{other}'"));
                }
            }
        }
        Ok((Grammar { name, start, trees }, sets))
    }

    fn tree_block(&mut self) -> Result<ElementaryTree, FormatError> {
        let name = self.symbol("tree name")?;
        let kind = match self.symbol("'initial' or 'auxiliary'")?.as_str() {
            "initial" => TreeKind::Initial,
            "auxiliary" => TreeKind::Auxiliary,
            other => {
                self.pos -= 1;
                return self.error_at(format!(
                    "expected 'initial' or 'auxiliary', found '{other}'"
                ));
            }
        };
        self.expect(&Tok::LBrace, "'{'")?;
        let mut vars = VarTable::default();
        let root = self.node(&mut vars)?;
        self.expect(&Tok::RBrace, "'}'")?;
        Ok(ElementaryTree {
            name,
            kind,
            root,
            var_labels: vars.labels,
        })
    }

    fn treeset_block(&mut self) -> Result<RawTreeSet, FormatError> {
        let name = self.symbol("tree set name")?;
        self.expect(&Tok::LBrace, "'{'")?;
        let mut members = Vec::new();
        let mut links = Vec::new();
        loop {
            match self.next() {
                Some(Spanned {
                    tok: Tok::RBrace, ..
                }) => break,
                Some(Spanned {
                    tok: Tok::Sym(word),
                    line,
                    column,
                }) => match word.as_str() {
                    "member" => members.push(self.symbol("member tree name")?),
                    "link" => match self.next() {
                        Some(Spanned {
                            tok: Tok::Var(label),
                            ..
                        }) => links.push(label),
                        _ => {
                            return Err(FormatError::Syntax {
                                line,
                                column,
                                message: "expected '#k' after 'link'".into(),
                            })
                        }
                    },
                    other => {
                        return Err(FormatError::Syntax {
                            line,
                            column,
                            message: format!("expected 'member' or 'link', found '{other}'"),
                        })
                    }
                },
                Some(s) => {
                    return Err(FormatError::Syntax {
                        line: s.line,
                        column: s.column,
                        message: "expected 'member', 'link' or '}'".into(),
                    })
                }
                None => return self.error_at("unterminated treeset block".into()),
            }
        }
        if members.is_empty() {
            return self.error_at(format!("tree set {name} has no members"));
        }
        Ok(RawTreeSet {
            name,
            members,
            links,
        })
    }

    fn node(&mut self, vars: &mut VarTable) -> Result<TreeNode, FormatError> {
        self.expect(&Tok::LParen, "'('")?;
        let head = self.symbol("node label")?;
        let label = split_label(&head);

        let mut kind = NodeKind::Interior;
        match self.peek().map(|s| &s.tok) {
            Some(Tok::Bang) => {
                self.next();
                kind = NodeKind::Substitution;
            }
            Some(Tok::Star) => {
                self.next();
                kind = NodeKind::Foot;
            }
            _ => {}
        }

        let mut node = TreeNode::new(label, kind);
        let mut saw_constraint = false;

        // Annotations and feature blocks may interleave; children follow.
        loop {
            match self.peek().map(|s| &s.tok) {
                Some(Tok::At) => {
                    self.next();
                    let word = self.symbol("annotation name")?;
                    match word.as_str() {
                        "NA" => {
                            node.constraint = AdjConstraint::Na;
                            saw_constraint = true;
                        }
                        "OA" => {
                            node.constraint = AdjConstraint::Oa;
                            saw_constraint = true;
                        }
                        "SA" => {
                            self.expect(&Tok::LParen, "'(' after @SA")?;
                            let mut names = std::collections::BTreeSet::new();
                            loop {
                                names.insert(self.symbol("auxiliary tree name")?);
                                match self.next() {
                                    Some(Spanned {
                                        tok: Tok::Comma, ..
                                    }) => continue,
                                    Some(Spanned {
                                        tok: Tok::RParen, ..
                                    }) => break,
                                    _ => {
                                        return self
                                            .error_at("expected ',' or ')' in @SA list".into())
                                    }
                                }
                            }
                            node.constraint = AdjConstraint::Sa(names);
                            saw_constraint = true;
                        }
                        "smallest" => node.smallest = true,
                        other => {
                            self.pos -= 1;
                            return self.error_at(format!("unknown annotation '@{other}'"));
                        }
                    }
                }
                Some(Tok::LBracket) => {
                    let (side, fs) = self.feature_block(vars)?;
                    let slot = match side {
                        Side::Top => &mut node.top,
                        Side::Bottom => &mut node.bottom,
                    };
                    if !slot.is_empty() {
                        return self.error_at("duplicate feature block on the same side".into());
                    }
                    *slot = fs;
                }
                _ => break,
            }
        }

        // Children.
        loop {
            match self.peek().map(|s| &s.tok) {
                Some(Tok::LParen) => node.children.push(self.node(vars)?),
                Some(Tok::Str(_)) => {
                    let Some(Spanned {
                        tok: Tok::Str(word),
                        ..
                    }) = self.next()
                    else {
                        unreachable!()
                    };
                    let mut child =
                        TreeNode::new(NodeLabel::plain(word.clone()), NodeKind::Anchor(word));
                    child.constraint = AdjConstraint::Na;
                    node.children.push(child);
                }
                Some(Tok::Eps(_)) => {
                    let Some(Spanned {
                        tok: Tok::Eps(label),
                        ..
                    }) = self.next()
                    else {
                        unreachable!()
                    };
                    let mut child = TreeNode::new(NodeLabel::plain("eps"), NodeKind::Epsilon);
                    child.constraint = AdjConstraint::Na;
                    if let Some(label) = label {
                        let var = vars.get(&label);
                        child.bottom.set("index", FeatureValue::Var(var));
                    }
                    node.children.push(child);
                }
                Some(Tok::RParen) => {
                    self.next();
                    break;
                }
                _ => return self.error_at("expected a child node or ')'".into()),
            }
        }

        if !saw_constraint
            && matches!(node.kind, NodeKind::Substitution | NodeKind::Foot)
        {
            node.constraint = AdjConstraint::Na;
        }
        Ok(node)
    }

    fn feature_block(&mut self, vars: &mut VarTable) -> Result<(Side, FeatureStructure), FormatError> {
        self.expect(&Tok::LBracket, "'['")?;
        let side = match self.symbol("'t' or 'b'")?.as_str() {
            "t" => Side::Top,
            "b" => Side::Bottom,
            other => {
                self.pos -= 1;
                return self.error_at(format!("expected 't' or 'b', found '{other}'"));
            }
        };
        self.expect(&Tok::Colon, "':'")?;
        let mut fs = FeatureStructure::new();
        loop {
            let attr = self.symbol("attribute name")?;
            self.expect(&Tok::Equals, "'='")?;
            let value = match self.next() {
                Some(Spanned {
                    tok: Tok::Sym(atom),
                    ..
                }) => FeatureValue::Atom(atom),
                Some(Spanned {
                    tok: Tok::Var(label),
                    ..
                }) => FeatureValue::Var(vars.get(&label)),
                _ => return self.error_at("expected an atom or '#k'".into()),
            };
            if fs.get(&attr).is_some() {
                return self.error_at(format!("attribute {attr} repeated in one block"));
            }
            fs.set(attr, value);
            match self.next() {
                Some(Spanned {
                    tok: Tok::Comma, ..
                }) => continue,
                Some(Spanned {
                    tok: Tok::RBracket,
                    ..
                }) => break,
                _ => return self.error_at("expected ',' or ']'".into()),
            }
        }
        Ok((side, fs))
    }
}

enum Side {
    Top,
    Bottom,
}

#[derive(Default)]
struct VarTable {
    labels: BTreeMap<String, VarId>,
    next: u32,
}

impl VarTable {
    fn get(&mut self, label: &str) -> VarId {
        if let Some(v) = self.labels.get(label) {
            return *v;
        }
        let v = VarId(self.next);
        self.next += 1;
        self.labels.insert(label.to_string(), v);
        v
    }
}

/// Splits `NP_0` into category `NP` and tag `0`. Only the last underscore
/// separates a tag, so `a_b_c` reads as category `a_b` with tag `c`.
fn split_label(head: &str) -> NodeLabel {
    match head.rsplit_once('_') {
        Some((cat, tag)) if !cat.is_empty() && !tag.is_empty() => NodeLabel::new(cat, Some(tag)),
        _ => NodeLabel::plain(head),
    }
}

// ----------------------------------------------------------- serializing

/// Renders a grammar back to the text format. `load_grammar` of the output
/// reproduces the input grammar structurally.
pub fn serialize_grammar(grammar: &Grammar, sets: &[RawTreeSet]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "grammar {} start={}", grammar.name, grammar.start);
    for tree in grammar.trees.values() {
        let _ = writeln!(out);
        let _ = writeln!(out, "tree {} {} {{", tree.name, tree.kind);
        let labels: BTreeMap<VarId, String> = tree
            .var_labels
            .iter()
            .map(|(k, v)| (*v, k.clone()))
            .collect();
        write_node(&mut out, &tree.root, &labels, 1);
        let _ = writeln!(out);
        let _ = writeln!(out, "}}");
    }
    for set in sets {
        let _ = writeln!(out);
        let _ = writeln!(out, "treeset {} {{", set.name);
        for member in &set.members {
            let _ = writeln!(out, "  member {member}");
        }
        for label in &set.links {
            let _ = writeln!(out, "  link #{label}");
        }
        let _ = writeln!(out, "}}");
    }
    out
}

fn write_node(out: &mut String, node: &TreeNode, labels: &BTreeMap<VarId, String>, depth: usize) {
    let pad = "  ".repeat(depth);
    match &node.kind {
        NodeKind::Anchor(word) => {
            let _ = write!(out, "{pad}\"{word}\"");
            return;
        }
        NodeKind::Epsilon => {
            match node.bottom.get("index") {
                Some(FeatureValue::Var(v)) => {
                    let _ = write!(out, "{pad}<eps:#{}>", var_label(labels, *v));
                }
                _ => {
                    let _ = write!(out, "{pad}<eps>");
                }
            }
            return;
        }
        _ => {}
    }

    let _ = write!(out, "{pad}({}", node.label);
    match node.kind {
        NodeKind::Substitution => {
            let _ = write!(out, "!");
        }
        NodeKind::Foot => {
            let _ = write!(out, "*");
        }
        _ => {}
    }
    match &node.constraint {
        AdjConstraint::None => {}
        AdjConstraint::Na => {
            // Sites and feet are null-adjoining implicitly.
            if !matches!(node.kind, NodeKind::Substitution | NodeKind::Foot) {
                let _ = write!(out, " @NA");
            }
        }
        AdjConstraint::Oa => {
            let _ = write!(out, " @OA");
        }
        AdjConstraint::Sa(names) => {
            let list: Vec<&str> = names.iter().map(String::as_str).collect();
            let _ = write!(out, " @SA({})", list.join(","));
        }
    }
    if node.smallest {
        let _ = write!(out, " @smallest");
    }
    if !node.top.is_empty() {
        let _ = write!(out, " [t: {}]", render_features(&node.top, labels));
    }
    if !node.bottom.is_empty() {
        // The index feature on an epsilon leaf is written by the leaf itself.
        let _ = write!(out, " [b: {}]", render_features(&node.bottom, labels));
    }
    for child in &node.children {
        let _ = writeln!(out);
        write_node(out, child, labels, depth + 1);
    }
    let _ = write!(out, ")");
}

fn render_features(fs: &FeatureStructure, labels: &BTreeMap<VarId, String>) -> String {
    fs.iter()
        .map(|(k, v)| match v {
            FeatureValue::Atom(a) => format!("{k}={a}"),
            FeatureValue::Var(id) => format!("{k}=#{}", var_label(labels, *id)),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn var_label(labels: &BTreeMap<VarId, String>, v: VarId) -> String {
    labels
        .get(&v)
        .cloned()
        .unwrap_or_else(|| format!("v{}", v.0))
}
