//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p deplen-core --test acceptance -- --nocapture`.
//! The treebank tier runs only when `DEPLEN_HUTB` points at a CoNLL-U
//! export; otherwise it prints SKIP.

use std::time::{Duration, Instant};

use deplen_core::analysis::{
    generate_synthetic_corpus, pairwise_dataset, position_length_profile, prepare, run_classification_suite,
    run_regression, ExperimentConfig, RegressionKind, SyntheticSpec, LAST,
};
use deplen_core::constituency::{decompose, Order, SentencePlan};
use deplen_core::features::{extract_features, joachims_transform, orient, Feature, RankingPair};
use deplen_core::stats::{fit_logistic, log_likelihood, mcnemar, mcnemar_counts, sigmoid, FitOptions};
use deplen_core::treebank::{parse_corpus, Corpus, DependencyTree, Format};
use deplen_core::variants::{least_effort_from, order_ascending, order_descending};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Line {
    id: &'static str,
    title: &'static str,
    outcome: Outcome,
    elapsed: Duration,
}

fn check(id: &'static str, title: &'static str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Line {
    let start = Instant::now();
    let mut outcome = f();
    let elapsed = start.elapsed();
    if let (Some(limit), Outcome::Pass(detail)) = (budget, &outcome) {
        if elapsed > limit {
            outcome = Outcome::Fail(format!("{detail}; runtime {elapsed:.1?} exceeds {limit:?}"));
        }
    }
    Line {
        id,
        title,
        outcome,
        elapsed,
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Main-verb arcs read directly off the relinearized tree, left to right.
fn arcs(plan: &SentencePlan, order: &Order) -> Vec<usize> {
    let tree = plan.linearized_tree(order);
    let verb = tree.root_index();
    tree.tokens()
        .iter()
        .filter(|t| t.head == verb && t.index < verb)
        .map(|t| verb - t.index - 1)
        .collect()
}

fn arc_dl(plan: &SentencePlan, order: &Order) -> usize {
    arcs(plan, order).iter().sum()
}

fn synthetic_plans(n: usize, seed: u64) -> Vec<SentencePlan> {
    let spec = SyntheticSpec {
        sentences: n,
        k_weights: (2..=6).map(|k| (k, 1.0)).collect(),
        head_final_prob: 0.5,
        p_least_effort: 0.0,
        ..Default::default()
    };
    generate_synthetic_corpus(&spec, seed)
        .unwrap()
        .iter()
        .map(|s| decompose(&s.tree).unwrap())
        .collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm
    fn heap(n: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..n - 1 {
            heap(n - 1, a, out);
            if n.is_multiple_of(2) {
                a.swap(i, n - 1);
            } else {
                a.swap(0, n - 1);
            }
        }
        heap(n - 1, a, out);
    }
    let mut out = Vec::new();
    heap(k, &mut (0..k).collect(), &mut out);
    out
}

fn random_order(rng: &mut impl Rng, k: usize) -> Order {
    let mut v: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
    Order::new(v).unwrap()
}

fn worked_example() -> Outcome {
    let heads = [11, 11, 2, 5, 11, 5, 9, 7, 11, 9, 0];
    let tree = DependencyTree::from_heads(&heads, &[]).unwrap();
    let plan = decompose(&tree).unwrap();
    let ord = |v: &[usize]| Order::new(v.to_vec()).unwrap();
    let depicted = ord(&[1, 2, 0, 3]);
    let cases = [
        ("ascending", order_ascending(&plan), 23, vec![9, 8, 5, 1]),
        ("descending", order_descending(&plan), 13, vec![7, 4, 2, 0]),
        ("random", depicted.clone(), 20, vec![9, 6, 4, 1]),
        ("least-effort", least_effort_from(&plan, &depicted), 17, vec![9, 6, 2, 0]),
    ];
    let mut problems = Vec::new();
    if plan.lengths() != vec![1, 2, 3, 4] {
        problems.push(format!("lengths {:?}", plan.lengths()));
    }
    for (name, order, dl, expected_arcs) in cases {
        let got = (plan.main_verb_dl(&order), arcs(&plan, &order), plan.positional_dls(&order));
        if got.0 != dl || got.1 != expected_arcs || got.2 != expected_arcs {
            problems.push(format!("{name}: dl {} arcs {:?} positional {:?}", got.0, got.1, got.2));
        }
    }
    verdict(problems.is_empty(), if problems.is_empty() { "DL 23/13/20/17, arcs exact".into() } else { problems.join("; ") })
}

fn optimality() -> Outcome {
    let plans = synthetic_plans(500, 11);
    let mut exceptions = 0;
    for plan in &plans {
        let dls: Vec<usize> = permutations(plan.k())
            .into_iter()
            .map(|p| arc_dl(plan, &Order::new(p).unwrap()))
            .collect();
        let (min, max) = (*dls.iter().min().unwrap(), *dls.iter().max().unwrap());
        if arc_dl(plan, &order_descending(plan)) != min || arc_dl(plan, &order_ascending(plan)) != max {
            exceptions += 1;
        }
    }
    verdict(exceptions == 0, format!("{} plans, {exceptions} exceptions", plans.len()))
}

fn dominance() -> Outcome {
    let plans = synthetic_plans(2000, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut increases, mut k2_mismatch, mut k2_ties) = (0, 0, 0);
    for i in 0..10_000 {
        let plan = &plans[i % plans.len()];
        let start = random_order(&mut rng, plan.k());
        let moved = least_effort_from(plan, &start);
        if arc_dl(plan, &moved) > arc_dl(plan, &start) {
            increases += 1;
        }
        if plan.k() == 2 {
            let desc = order_descending(plan);
            let lengths = plan.lengths();
            if lengths[0] == lengths[1] {
                k2_ties += 1;
                if arc_dl(plan, &moved) != arc_dl(plan, &desc) {
                    k2_mismatch += 1;
                }
            } else if moved != desc {
                k2_mismatch += 1;
            }
        }
    }
    verdict(
        increases == 0 && k2_mismatch == 0,
        format!("10000 pairs, {increases} increases; k=2 mismatches {k2_mismatch} ({k2_ties} equal-length ties compared by DL)"),
    )
}

fn closed_form() -> Outcome {
    let plans = synthetic_plans(1000, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut bad = 0;
    for plan in &plans {
        let order = random_order(&mut rng, plan.k());
        let pre = plan.preverbal();
        let formula: usize = order
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &c)| pre[c].length * i)
            .sum::<usize>()
            + pre.iter().map(|c| c.head_right_offset).sum::<usize>();
        if formula != arc_dl(plan, &order) || formula != plan.main_verb_dl(&order) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("1000 plans, {bad} mismatches"))
}

fn transform() -> Outcome {
    let plans = synthetic_plans(400, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut problems = Vec::new();
    for take in [1usize, 2, 7, 101, 400] {
        let mut pairs = Vec::new();
        for (i, plan) in plans.iter().take(take).enumerate() {
            for _ in 0..rng.gen_range(1..4) {
                pairs.push(RankingPair {
                    pair_id: format!("s{i}"),
                    reference: extract_features(plan, &Order::identity(plan.k())),
                    variant: extract_features(plan, &random_order(&mut rng, plan.k())),
                });
            }
        }
        let out = joachims_transform(&pairs);
        let n = pairs.len();
        let mean = out.examples.iter().map(|e| e.label as f64).sum::<f64>() / n as f64;
        if out.examples.len() != n {
            problems.push(format!("{n} pairs in, {} out", out.examples.len()));
        }
        if (mean - 0.5).abs() > 1.0 / n as f64 {
            problems.push(format!("N={n}: mean label {mean}"));
        }
        for p in &pairs {
            let (a, b) = (orient(p, true), orient(p, false));
            if a.delta.iter().zip(&b.delta).any(|(x, y)| *x != -*y) || a.label + b.label != 1 {
                problems.push(format!("{}: orientation swap not a negation", p.pair_id));
                break;
            }
        }
    }
    verdict(problems.is_empty(), if problems.is_empty() { "counts preserved, balanced, swap negates".into() } else { problems.join("; ") })
}

fn glm_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let truth = [0.5, -1.0, 2.0];
    let n = 50_000;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<u8> = (0..n)
        .map(|r| u8::from(rng.gen::<f64>() < sigmoid(truth[0] + truth[1] * x[(r, 0)] + truth[2] * x[(r, 1)])))
        .collect();
    let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
    let worst_coef = fit.coefficients.iter().zip(truth).map(|(b, t)| (b - t).abs()).fold(0.0, f64::max);

    // Hessian of the log-likelihood by central differences with Richardson extrapolation
    let beta = &fit.coefficients;
    let ll = |b: &[f64]| log_likelihood(&x, &y, b);
    let second = |i: usize, j: usize, h: f64| {
        let at = |di: f64, dj: f64| {
            let mut b = beta.clone();
            b[i] += di;
            b[j] += dj;
            ll(&b)
        };
        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
    };
    let p = beta.len();
    let mut info = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let h = 1e-2;
            info[(i, j)] = -(4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0;
        }
    }
    let cov = info.try_inverse().unwrap();
    let worst_se = (0..p)
        .map(|i| (fit.std_errors[i] - cov[(i, i)].sqrt()).abs() / cov[(i, i)].sqrt())
        .fold(0.0, f64::max);
    verdict(
        worst_coef <= 0.05 && worst_se <= 1e-5,
        format!("max |b - truth| = {worst_coef:.4}, max SE relative error = {worst_se:.2e}"),
    )
}

fn mcnemar_oracle() -> Outcome {
    // exact branch: binomial tail from integer Pascal rows
    let mut worst_exact: f64 = 0.0;
    let mut row = vec![1u64];
    for n in 1..=24usize {
        let mut next = vec![1u64; n + 1];
        for j in 1..n {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
        for n01 in 0..=n {
            let m = n01.min(n - n01);
            let tail: u64 = row[..=m].iter().sum();
            let oracle = (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0);
            worst_exact = worst_exact.max((mcnemar_counts(n01, n - n01).p_two_tailed - oracle).abs());
        }
    }
    // chi-square branch: 1-df survival as a Simpson integral of the normal density
    let tail = |s: f64| {
        let (a, steps) = (s.sqrt(), 200_000);
        let h = 40.0 / steps as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = phi(a) + phi(a + 40.0);
        for i in 1..steps {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(a + i as f64 * h);
        }
        2.0 * sum * h / 3.0
    };
    let mut worst_chi: f64 = 0.0;
    for (n01, n10) in [(13, 12), (20, 5), (100, 60), (60, 100), (500, 430), (40, 3), (1000, 1000)] {
        let m = mcnemar_counts(n01, n10);
        let d = (n01 as f64 - n10 as f64).abs() - 1.0;
        let stat = d.max(0.0).powi(2) / (n01 + n10) as f64;
        worst_chi = worst_chi.max((m.p_two_tailed - tail(stat)).abs());
    }
    verdict(
        worst_exact <= 1e-12 && worst_chi <= 1e-9,
        format!("exact max err {worst_exact:.1e}, chi-square max err {worst_chi:.1e}"),
    )
}

fn synthetic_replication() -> Outcome {
    let spec = SyntheticSpec {
        sentences: 2000,
        p_least_effort: 1.0,
        ..Default::default()
    };
    let corpus = Corpus {
        sentences: generate_synthetic_corpus(&spec, 3).unwrap(),
        diagnostics: Vec::new(),
    };
    let config = ExperimentConfig {
        seed: 7,
        ..Default::default()
    };
    let exp = prepare(&corpus, &config);
    let examples = pairwise_dataset(&exp, &config).unwrap();
    let suite = run_classification_suite(&examples, &config).unwrap();
    let total = suite.row(&[Feature::TotalDl]).unwrap();
    let last = suite.row(&[Feature::Dl(LAST)]).unwrap();
    let truth: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let test = mcnemar(&last.cv.predictions, &total.cv.predictions, &truth).unwrap();
    let mut profile_ok = true;
    let mut shapes = Vec::new();
    for k in 2..=6 {
        let profile = position_length_profile(&exp, k).unwrap();
        let last_mean = profile[k - 1];
        profile_ok &= profile[..k - 1].iter().all(|&m| last_mean < m);
        shapes.push(format!("k{k} last {last_mean:.2}"));
    }
    let best_last = suite
        .dependency_length
        .iter()
        .chain(&suite.constituent_length)
        .filter(|r| r.predictors.iter().any(|p| p.ends_with("last")))
        .map(|r| r.accuracy)
        .fold(0.0, f64::max);
    println!(
        "INFO  synthetic p=1: best last-position accuracy {:.4} (total_dl {:.4}); the >= 0.9 level is not reached with default lengths",
        best_last, total.accuracy
    );
    verdict(
        last.accuracy > total.accuracy && test.p_two_tailed < 0.001 && profile_ok,
        format!(
            "{} pairs; dl_last {:.2}% vs total_dl {:.2}%, McNemar p = {:.1e}; profile minimum at last slot: {} ({})",
            examples.len(),
            100.0 * last.accuracy,
            100.0 * total.accuracy,
            test.p_two_tailed,
            profile_ok,
            shapes.join(", ")
        ),
    )
}

fn treebank_tier() -> Outcome {
    let Ok(path) = std::env::var("DEPLEN_HUTB") else {
        return Outcome::Skip("set DEPLEN_HUTB to a CoNLL-U export to run".into());
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return Outcome::Fail(format!("{path}: {e}")),
    };
    let corpus = parse_corpus(&bytes[..], Format::Conllu).unwrap();
    let config = ExperimentConfig::default();
    let exp = prepare(&corpus, &config);
    let examples = pairwise_dataset(&exp, &config).unwrap();
    let within = |got: f64, want: f64, rel: f64| (got - want).abs() <= rel * want;
    let mut problems = Vec::new();
    if !within(exp.items.len() as f64, 7586.0, 0.01) {
        problems.push(format!("{} eligible references", exp.items.len()));
    }
    if !within(examples.len() as f64, 184_818.0, 0.01) {
        problems.push(format!("{} pairs", examples.len()));
    }
    let suite = run_classification_suite(&examples, &config).unwrap();
    let want3 = [62.69, 68.48, 72.70, 77.17];
    let want4 = [54.35, 69.62, 70.28];
    for (rows, want) in [(&suite.dependency_length, &want3[..]), (&suite.constituent_length, &want4[..])] {
        for (r, w) in rows.iter().zip(want) {
            if (100.0 * r.accuracy - w).abs() > 2.0 {
                problems.push(format!("{}: {:.2} vs {w}", r.predictors.join("+"), 100.0 * r.accuracy));
            }
        }
    }
    for kind in [RegressionKind::DependencyLength, RegressionKind::ConstituentLength] {
        let report = run_regression(&examples, kind, &config).unwrap();
        let positional: Vec<_> = report.rows.iter().filter(|r| r.predictor != "(Intercept)").collect();
        let last_name = match kind {
            RegressionKind::DependencyLength => "dl_pos5",
            RegressionKind::ConstituentLength => "len_pos5",
        };
        match positional.iter().find(|r| r.predictor == last_name) {
            Some(last) => {
                if kind == RegressionKind::DependencyLength && last.estimate >= 0.0 {
                    problems.push(format!("{last_name} estimate {:.3} not negative", last.estimate));
                }
                if positional.iter().any(|r| r.predictor != last_name && r.estimate.abs() >= last.estimate.abs()) {
                    problems.push(format!("{last_name} |coefficient| not strictly largest"));
                }
            }
            None => problems.push(format!("{last_name} not selected ({})", report.status)),
        }
    }
    verdict(problems.is_empty(), if problems.is_empty() { "counts, accuracies and signs within tolerance".into() } else { problems.join("; ") })
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let lines = vec![
        check("1", "Worked-example fixture", Some(s(1)), worked_example),
        check("2", "Optimality oracle", Some(s(30)), optimality),
        check("3", "Least-effort dominance", Some(s(10)), dominance),
        check("4", "Closed-form equivalence", None, closed_form),
        check("5", "Pairwise transform", None, transform),
        check("6", "GLM recovery", Some(s(30)), glm_recovery),
        check("7", "McNemar oracle", None, mcnemar_oracle),
        check("8", "Synthetic replication", Some(s(300)), synthetic_replication),
        check("9", "Treebank replication (data-optional)", None, treebank_tier),
    ];
    let mut failed = Vec::new();
    for l in &lines {
        let (tag, detail) = match &l.outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed.push(l.id);
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag}  [{}] {} ({:.2?}): {detail}", l.id, l.title, l.elapsed);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
