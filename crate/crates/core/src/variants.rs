//! Counterfactual variant generation and the named ordering strategies.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constituency::{DistanceConvention, Order, SentencePlan};
use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 100;

/// The attested order plus its sampled counterfactual permutations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VariantSet {
    pub reference_order: Order,
    pub sampled_variants: Vec<Order>,
    pub cap: usize,
    pub seed: u64,
}

impl VariantSet {
    pub fn len(&self) -> usize {
        self.sampled_variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampled_variants.is_empty()
    }
}

/// `k!` saturating at `u128::MAX`.
pub fn factorial(k: usize) -> u128 {
    (1..=k as u128).try_fold(1u128, |acc, i| acc.checked_mul(i)).unwrap_or(u128::MAX)
}

/// Number of variants [`generate_variants`] produces for `k` constituents.
pub fn variant_count(k: usize, cap: usize) -> usize {
    let total = factorial(k);
    if total <= cap as u128 {
        (total - 1) as usize
    } else {
        cap - 1
    }
}

/// All non-reference permutations when `k! <= cap`, otherwise `cap - 1`
/// distinct non-reference permutations drawn uniformly.
pub fn generate_variants(plan: &SentencePlan, cap: usize, seed: u64) -> Result<VariantSet> {
    if cap < 2 {
        return Err(Error::Config(format!("variant cap must be at least 2, got {cap}")));
    }
    let k = plan.k();
    let reference = Order::identity(k);
    let sampled = if factorial(k) <= cap as u128 {
        all_permutations(k).into_iter().filter(|o| !o.is_identity()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen: HashSet<Order> = HashSet::with_capacity(cap);
        seen.insert(reference.clone());
        let mut out = Vec::with_capacity(cap - 1);
        while out.len() < cap - 1 {
            let draw = random_permutation(&mut rng, k);
            if seen.insert(draw.clone()) {
                out.push(draw);
            }
        }
        out
    };
    Ok(VariantSet {
        reference_order: reference,
        sampled_variants: sampled,
        cap,
        seed,
    })
}

/// Lexicographic enumeration of every permutation of `0..k`.
pub fn all_permutations(k: usize) -> Vec<Order> {
    let mut current: Vec<usize> = (0..k).collect();
    let mut out = vec![Order::from_vec_unchecked(current.clone())];
    loop {
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).expect("pivot exists");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(Order::from_vec_unchecked(current.clone()));
    }
}

fn random_permutation(rng: &mut impl Rng, k: usize) -> Order {
    let mut v: Vec<usize> = (0..k).collect();
    v.shuffle(rng);
    Order::from_vec_unchecked(v)
}

/// Increasing constituent length, ties in original order.
pub fn order_ascending(plan: &SentencePlan) -> Order {
    let mut v: Vec<usize> = (0..plan.k()).collect();
    v.sort_by_key(|&c| plan.preverbal()[c].length);
    Order::from_vec_unchecked(v)
}

/// Decreasing constituent length, ties in original order.
pub fn order_descending(plan: &SentencePlan) -> Order {
    let mut v: Vec<usize> = (0..plan.k()).collect();
    v.sort_by_key(|&c| std::cmp::Reverse(plan.preverbal()[c].length));
    Order::from_vec_unchecked(v)
}

/// Uniformly random order from `seed`.
pub fn order_random(plan: &SentencePlan, seed: u64) -> Order {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_permutation(&mut rng, plan.k())
}

/// Random order followed by moving the shortest constituent next to the verb.
pub fn order_least_effort(plan: &SentencePlan, seed: u64) -> Order {
    least_effort_from(plan, &order_random(plan, seed))
}

/// Moves the shortest constituent of `start` into the verb-adjacent slot.
/// Among equally short constituents the one already nearest the verb moves.
pub fn least_effort_from(plan: &SentencePlan, start: &Order) -> Order {
    let slice = start.as_slice();
    let Some(pos) = (0..slice.len())
        .rev()
        .min_by_key(|&p| plan.preverbal()[slice[p]].length)
    else {
        return start.clone();
    };
    move_to_verb(start, pos)
}

/// Relocates the constituent at position `pos` to the last position,
/// keeping all other relative orders.
pub fn move_to_verb(order: &Order, pos: usize) -> Order {
    let mut v = order.as_slice().to_vec();
    let c = v.remove(pos);
    v.push(c);
    Order::from_vec_unchecked(v)
}

/// Word forms of the sentence under `order`.
pub fn linearize(plan: &SentencePlan, order: &Order) -> Vec<String> {
    plan.linearize(order).into_iter().map(|t| t.form.clone()).collect()
}

/// The five arrangements compared in the ordering-strategy analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Reference,
    Ascending,
    Descending,
    Random,
    LeastEffort,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Reference,
        Strategy::Ascending,
        Strategy::Descending,
        Strategy::Random,
        Strategy::LeastEffort,
    ];

    pub fn is_stochastic(self) -> bool {
        matches!(self, Strategy::Random | Strategy::LeastEffort)
    }

    pub fn order(self, plan: &SentencePlan, seed: u64) -> Order {
        match self {
            Strategy::Reference => Order::identity(plan.k()),
            Strategy::Ascending => order_ascending(plan),
            Strategy::Descending => order_descending(plan),
            Strategy::Random => order_random(plan, seed),
            Strategy::LeastEffort => order_least_effort(plan, seed),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Reference => "reference",
            Strategy::Ascending => "ascending",
            Strategy::Descending => "descending",
            Strategy::Random => "random",
            Strategy::LeastEffort => "least-effort",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// One line of a variant dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub sentence_id: String,
    pub permutation: Order,
    pub main_verb_dl: usize,
    pub total_dl: usize,
    pub tokens: Vec<String>,
}

impl VariantRecord {
    pub fn new(sentence_id: &str, plan: &SentencePlan, order: &Order, convention: DistanceConvention) -> Self {
        VariantRecord {
            sentence_id: sentence_id.to_string(),
            permutation: order.clone(),
            main_verb_dl: plan.main_verb_dl_with(order, convention),
            total_dl: plan.total_dl(order, convention),
            tokens: linearize(plan, order),
        }
    }
}
