//! Preverbal constituent decomposition and dependency-length metrics.
//!
//! A [`SentencePlan`] splits a projective sentence into the yields of the
//! root verb's preverbal children (the permutable material) and a frozen
//! suffix running from the verb to the end of the sentence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::{DependencyTree, Span, Token};

/// How a head-dependent distance is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceConvention {
    /// Number of words strictly between head and dependent.
    #[default]
    Intervening,
    /// Absolute difference of positions (adjacent words are 1 apart).
    Positional,
}

impl DistanceConvention {
    pub fn arc(self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        match self {
            DistanceConvention::Intervening => d - 1,
            DistanceConvention::Positional => d,
        }
    }
}

impl std::str::FromStr for DistanceConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intervening" => Ok(DistanceConvention::Intervening),
            "positional" => Ok(DistanceConvention::Positional),
            other => Err(Error::Config(format!("unknown distance convention `{other}`"))),
        }
    }
}

/// Sum over every arc of the intervening-word count.
pub fn total_dependency_length(tree: &DependencyTree) -> usize {
    total_dependency_length_with(tree, DistanceConvention::Intervening)
}

pub fn total_dependency_length_with(tree: &DependencyTree, convention: DistanceConvention) -> usize {
    tree.tokens()
        .iter()
        .filter(|t| t.head != 0)
        .map(|t| convention.arc(t.index, t.head))
        .sum()
}

/// Contiguous yield of one preverbal child of the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub head_index: usize,
    pub span: Span,
    pub length: usize,
    /// Span tokens strictly after the head.
    pub head_right_offset: usize,
}

impl Constituent {
    fn new(head_index: usize, span: Span) -> Self {
        debug_assert!(span.contains(head_index));
        Constituent {
            head_index,
            span,
            length: span.len(),
            head_right_offset: span.end - head_index,
        }
    }
}

/// A linear arrangement of a plan's preverbal constituents: `order[i]` is
/// the original index of the constituent placed at position `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Order(Vec<usize>);

impl Order {
    pub fn identity(k: usize) -> Self {
        Order((0..k).collect())
    }

    /// Validates that `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &c in &order {
            if c >= order.len() || seen[c] {
                return Err(Error::Contract(format!("{order:?} is not a permutation")));
            }
            seen[c] = true;
        }
        Ok(Order(order))
    }

    pub(crate) fn from_vec_unchecked(order: Vec<usize>) -> Self {
        Order(order)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &c)| i == c)
    }

    /// Position of constituent `which`, if present.
    pub fn position_of(&self, which: usize) -> Option<usize> {
        self.0.iter().position(|&c| c == which)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Why a sentence cannot enter the permutation experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Ineligible {
    NoPreverbal,
    SingleConstituent,
    Straddles { child: usize },
}

impl fmt::Display for Ineligible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ineligible::NoPreverbal => f.write_str("no preverbal constituents"),
            Ineligible::SingleConstituent => f.write_str("fewer than 2 constituents"),
            Ineligible::Straddles { child } => {
                write!(f, "yield of root child {child} straddles the verb")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecomposeError {
    NonProjective,
    Ineligible(Ineligible),
}

impl fmt::Display for DecomposeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecomposeError::NonProjective => f.write_str("non-projective tree"),
            DecomposeError::Ineligible(r) => write!(f, "ineligible: {r}"),
        }
    }
}

impl std::error::Error for DecomposeError {}

impl From<DecomposeError> for Error {
    fn from(e: DecomposeError) -> Self {
        match e {
            DecomposeError::NonProjective => Error::Contract("decompose called on a non-projective tree".into()),
            DecomposeError::Ineligible(r) => Error::InsufficientData(r.to_string()),
        }
    }
}

/// Sentence split into preverbal constituents, the root verb, and the
/// frozen material from the verb onward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePlan {
    tree: DependencyTree,
    preverbal: Vec<Constituent>,
    verb_index: usize,
}

/// Decomposes an experiment-eligible sentence (at least two preverbal
/// constituents).
pub fn decompose(tree: &DependencyTree) -> std::result::Result<SentencePlan, DecomposeError> {
    let plan = SentencePlan::new(tree)?;
    match plan.k() {
        0 => Err(DecomposeError::Ineligible(Ineligible::NoPreverbal)),
        1 => Err(DecomposeError::Ineligible(Ineligible::SingleConstituent)),
        _ => Ok(plan),
    }
}

impl SentencePlan {
    /// Decomposes without the two-constituent eligibility requirement.
    pub fn new(tree: &DependencyTree) -> std::result::Result<Self, DecomposeError> {
        let yields = tree.subtree_yields().map_err(|_| DecomposeError::NonProjective)?;
        let verb = tree.root_index();
        let mut preverbal = Vec::new();
        for child in tree.children(verb) {
            let span = yields[child];
            if span.end < verb {
                preverbal.push(Constituent::new(child, span));
            } else if span.start < verb {
                return Err(DecomposeError::Ineligible(Ineligible::Straddles { child }));
            }
        }
        preverbal.sort_by_key(|c| c.span.start);
        Ok(SentencePlan {
            tree: tree.clone(),
            preverbal,
            verb_index: verb,
        })
    }

    pub fn tree(&self) -> &DependencyTree {
        &self.tree
    }

    pub fn preverbal(&self) -> &[Constituent] {
        &self.preverbal
    }

    /// Number of preverbal constituents.
    pub fn k(&self) -> usize {
        self.preverbal.len()
    }

    pub fn verb_index(&self) -> usize {
        self.verb_index
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.preverbal.iter().map(|c| c.length).collect()
    }

    pub fn postverbal_suffix(&self) -> &[Token] {
        &self.tree.tokens()[self.verb_index - 1..]
    }

    fn check(&self, order: &Order) {
        assert_eq!(
            order.len(),
            self.k(),
            "order has {} entries for a plan with {} constituents",
            order.len(),
            self.k()
        );
    }

    /// Maps every original 1-based position to its position under `order`
    /// (entry 0 unused).
    pub fn position_map(&self, order: &Order) -> Vec<usize> {
        self.check(order);
        let n = self.tree.len();
        let mut map: Vec<usize> = (0..=n).collect();
        let mut next = 1;
        for &c in order.as_slice() {
            let span = self.preverbal[c].span;
            for (off, old) in (span.start..=span.end).enumerate() {
                map[old] = next + off;
            }
            next += span.len();
        }
        debug_assert_eq!(next, self.verb_index);
        map
    }

    /// Token sequence with constituents in `order` followed by the suffix.
    pub fn linearize(&self, order: &Order) -> Vec<&Token> {
        self.check(order);
        let mut out = Vec::with_capacity(self.tree.len());
        for &c in order.as_slice() {
            let span = self.preverbal[c].span;
            out.extend((span.start..=span.end).map(|p| self.tree.token(p)));
        }
        out.extend(self.postverbal_suffix());
        out
    }

    /// The sentence re-linearized under `order`, as a tree.
    pub fn linearized_tree(&self, order: &Order) -> DependencyTree {
        self.tree
            .relinearize(&self.position_map(order))
            .expect("plan orders are bijections preserving the tree")
    }

    /// Total dependency length of the sentence under `order`.
    pub fn total_dl(&self, order: &Order, convention: DistanceConvention) -> usize {
        let map = self.position_map(order);
        self.tree
            .tokens()
            .iter()
            .filter(|t| t.head != 0)
            .map(|t| convention.arc(map[t.index], map[t.head]))
            .sum()
    }

    /// Sum of verb–constituent distances, via
    /// `Σ_i length(order[i])·i + Σ head_right_offset` (0-based `i`).
    pub fn main_verb_dl(&self, order: &Order) -> usize {
        self.main_verb_dl_with(order, DistanceConvention::Intervening)
    }

    pub fn main_verb_dl_with(&self, order: &Order, convention: DistanceConvention) -> usize {
        self.check(order);
        let weighted: usize = order
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &c)| self.preverbal[c].length * i)
            .sum();
        let offsets: usize = self.preverbal.iter().map(|c| c.head_right_offset).sum();
        let base = weighted + offsets;
        match convention {
            DistanceConvention::Intervening => base,
            DistanceConvention::Positional => base + self.k(),
        }
    }

    /// Distance between constituent `which` (original index) and the verb
    /// under `order`, read off the linearized positions.
    pub fn constituent_dl(&self, order: &Order, which: usize) -> Result<usize> {
        self.check(order);
        let pos = order
            .position_of(which)
            .ok_or_else(|| Error::Contract(format!("constituent {which} not in order")))?;
        let start: usize = order.as_slice()[..pos]
            .iter()
            .map(|&c| self.preverbal[c].length)
            .sum::<usize>()
            + 1;
        let c = &self.preverbal[which];
        let head_pos = start + (c.head_index - c.span.start);
        Ok(DistanceConvention::Intervening.arc(head_pos, self.verb_index))
    }

    /// Verb distances of the constituents position by position.
    pub fn positional_dls(&self, order: &Order) -> Vec<usize> {
        self.check(order);
        let mut remaining: usize = order.as_slice().iter().map(|&c| self.preverbal[c].length).sum();
        order
            .as_slice()
            .iter()
            .map(|&c| {
                let con = &self.preverbal[c];
                remaining -= con.length;
                remaining + con.head_right_offset
            })
            .collect()
    }

    /// Constituent lengths position by position.
    pub fn positional_lengths(&self, order: &Order) -> Vec<usize> {
        self.check(order);
        order.as_slice().iter().map(|&c| self.preverbal[c].length).collect()
    }
}
