//! Synthetic verb-final corpora with a tunable least-effort reference rule.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::treebank::{DependencyTree, Sentence, Token};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub sentences: usize,
    /// `(k, weight)` pairs; weights are normalized.
    pub k_weights: Vec<(usize, f64)>,
    /// Mean of the geometric constituent-length distribution (support 1..).
    pub mean_length: f64,
    /// Probability that a constituent is left-branching (head-final);
    /// otherwise it is right-branching (head-initial).
    pub head_final_prob: f64,
    pub p_least_effort: f64,
    /// Softmax temperature for choosing which constituent moves to the
    /// verb; 0 always picks the shortest.
    pub noise_temperature: f64,
    /// Probability of an auxiliary after the verb.
    pub aux_prob: f64,
    pub final_punct: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            sentences: 2000,
            k_weights: vec![(2, 0.2), (3, 0.3), (4, 0.25), (5, 0.15), (6, 0.1)],
            mean_length: 2.5,
            head_final_prob: 0.25,
            p_least_effort: 1.0,
            noise_temperature: 0.0,
            aux_prob: 0.5,
            final_punct: true,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("p-least-effort", self.p_least_effort)?;
        prob("head-final probability", self.head_final_prob)?;
        prob("aux probability", self.aux_prob)?;
        if !(self.noise_temperature >= 0.0 && self.noise_temperature.is_finite()) {
            return Err(Error::Config("noise temperature must be finite and non-negative".into()));
        }
        if !(self.mean_length >= 1.0 && self.mean_length.is_finite()) {
            return Err(Error::Config("mean length must be at least 1".into()));
        }
        if self.k_weights.is_empty()
            || self.k_weights.iter().any(|&(k, w)| k < 1 || !(w >= 0.0 && w.is_finite()))
            || self.k_weights.iter().map(|&(_, w)| w).sum::<f64>() <= 0.0
        {
            return Err(Error::Config("k distribution must have positive total weight over k >= 1".into()));
        }
        Ok(())
    }
}

fn geometric<R: Rng>(rng: &mut R, mean: f64) -> usize {
    let p = 1.0 / mean;
    let mut n = 1;
    while !rng.gen_bool(p) {
        n += 1;
    }
    n
}

/// Index (into `order`) of the constituent that moves next to the verb.
fn pick_mover<R: Rng>(rng: &mut R, lengths: &[usize], order: &[usize], temperature: f64) -> usize {
    let min = order.iter().map(|&c| lengths[c]).min().unwrap();
    if temperature == 0.0 {
        // nearest the verb among the shortest
        return order.iter().rposition(|&c| lengths[c] == min).unwrap();
    }
    let weights: Vec<f64> = order
        .iter()
        .map(|&c| (-((lengths[c] - min) as f64) / temperature).exp())
        .collect();
    WeightedIndex::new(&weights).unwrap().sample(rng)
}

/// Appends a constituent of `len` tokens attached to `verb`, returning its tokens.
fn constituent<R: Rng>(rng: &mut R, start: usize, len: usize, verb: usize, head_final_prob: f64) -> Vec<(usize, usize, &'static str)> {
    let h = if rng.gen_bool(head_final_prob) { len - 1 } else { 0 };
    (0..len)
        .map(|i| {
            let head = match i.cmp(&h) {
                std::cmp::Ordering::Less => start + i + 1,
                std::cmp::Ordering::Equal => verb,
                std::cmp::Ordering::Greater => start + i - 1,
            };
            let rel = if i == h { "obl" } else { "dep" };
            (start + i, head, rel)
        })
        .collect()
}

/// Draws `spec.sentences` projective verb-final sentences with ids `syn00000`...
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Vec<Sentence>> {
    spec.validate()?;
    let ks = WeightedIndex::new(spec.k_weights.iter().map(|&(_, w)| w)).map_err(|e| Error::Config(e.to_string()))?;
    (0..spec.sentences)
        .map(|i| {
            let id = format!("syn{i:05}");
            let mut rng = stream(seed, &id, Purpose::Synthetic);
            let k = spec.k_weights[ks.sample(&mut rng)].0;
            let lengths: Vec<usize> = (0..k).map(|_| geometric(&mut rng, spec.mean_length)).collect();
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng);
            if rng.gen_bool(spec.p_least_effort) {
                let at = pick_mover(&mut rng, &lengths, &order, spec.noise_temperature);
                let c = order.remove(at);
                order.push(c);
            }
            let verb = lengths.iter().sum::<usize>() + 1;
            let mut rows = Vec::new();
            let mut next = 1;
            for &c in &order {
                rows.extend(constituent(&mut rng, next, lengths[c], verb, spec.head_final_prob));
                next += lengths[c];
            }
            rows.push((verb, 0, "root"));
            next += 1;
            if rng.gen_bool(spec.aux_prob) {
                rows.push((next, verb, "aux"));
                next += 1;
            }
            if spec.final_punct {
                rows.push((next, verb, "punct"));
            }
            let tokens = rows
                .into_iter()
                .map(|(idx, head, rel)| {
                    let form = match rel {
                        "root" => "V".to_string(),
                        "aux" => "AUX".to_string(),
                        "punct" => ".".to_string(),
                        _ => format!("w{idx}"),
                    };
                    Token::new(idx, &form, head, rel)
                })
                .collect();
            let tree = DependencyTree::new(tokens).map_err(|e| Error::Contract(format!("{id}: {e}")))?;
            Ok(Sentence { id, tree })
        })
        .collect()
}
