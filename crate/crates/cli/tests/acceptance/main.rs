//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#![allow(clippy::needless_range_loop)]

mod corpus;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hjd_core::ablation::{
    compare_to_target, replace_with_model, replace_with_noise, run_ablation, AblationSpec, Direction, ReplacementSource,
};
use hjd_core::backend::{LlmClient, MockBackend};
use hjd_core::dataset::split_dev_test;
use hjd_core::distribution::{LabelDistribution, LogBase, MetricConfig};
use hjd_core::estimator::{aggregate, enumerate_configurations, estimate_batch, estimate_mjd, EstimatorConfig};
use hjd_core::explanation::{ExplanationPool, ExplanationRecord, ExplanationSet, ExplanationSource};
use hjd_core::generation::generate_explanations;
use hjd_core::label::NliLabel;
use hjd_core::metrics::{
    cross_entropy, distance_correlation, distance_correlation_points, jsd_distance, kl_divergence, tv_distance,
    weighted_f1,
};
use hjd_core::prompt::OptionMapping;
use hjd_core::proxy::{evaluate_against_reference, train_soft, ProxyClassifier, TrainingConfig, DEFAULT_DIM};
use hjd_core::selection::{
    apply_validation_replacement, select_label_guided, Preference, ReplacementKind, ReplacementStrategy, SelectionMode,
    ValidationRecord,
};
use hjd_core::variability::{
    lexical_ngram_similarity, pairwise_variability, syntactic_ngram_similarity, RuleTagger, VariabilityConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || {
        format!("{what}: {a} vs {b} (|Δ| = {:e} > {tol:e})", (a - b).abs())
    })
}

fn random_dist(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // a quarter of the draws put an exact zero somewhere
    let mut w: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>());
    if rng.random_range(0..4) == 0 {
        w[rng.random_range(0..3)] = 0.0;
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

fn ld(p: [f64; 3]) -> LabelDistribution {
    LabelDistribution::from_weights(p).expect("valid weights")
}

fn mock_client(seed: u64) -> LlmClient {
    LlmClient::new(Arc::new(MockBackend::new(seed)), None)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (p, q) = (random_dist(&mut rng), random_dist(&mut rng));
        let (pd, qd) = (ld(p), ld(q));
        let (p, q) = (pd.as_array(), qd.as_array());
        for (base2, cfg) in [
            (false, MetricConfig::default()),
            (
                true,
                MetricConfig {
                    log_base: LogBase::Base2,
                    ..Default::default()
                },
            ),
        ] {
            for (name, got, want) in [
                ("KL", kl_divergence(&pd, &qd, &cfg), oracle::kl(p, q, base2)),
                ("JSD", jsd_distance(&pd, &qd, &cfg), oracle::jsd(p, q, base2)),
            ] {
                close(got, want, 1e-9, &format!("case {case} {name} base2={base2}"))?;
                worst = worst.max((got - want).abs());
            }
        }
        let cfg = MetricConfig::default();
        for (name, got, want) in [
            ("TVD", tv_distance(&pd, &qd), oracle::tvd(p, q)),
            ("CE", cross_entropy(&pd, &qd, &cfg), oracle::ce(p, q)),
        ] {
            close(got, want, 1e-9, &format!("case {case} {name}"))?;
            worst = worst.max((got - want).abs());
        }

        let n = rng.random_range(2..40);
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pred: Vec<usize> = gold
            .iter()
            .map(|&g| {
                if rng.random_bool(0.6) {
                    g
                } else {
                    rng.random_range(0..3)
                }
            })
            .collect();
        let to_labels = |v: &[usize]| v.iter().map(|&i| NliLabel::from_index(i).unwrap()).collect::<Vec<_>>();
        let got = weighted_f1(&to_labels(&pred), &to_labels(&gold)).map_err(|e| e.to_string())?;
        close(
            got,
            oracle::weighted_f1(&pred, &gold),
            1e-9,
            &format!("case {case} weighted F1"),
        )?;

        let k = rng.random_range(3..25);
        let xs: Vec<[f64; 3]> = (0..k).map(|_| ld(random_dist(&mut rng)).as_array()).collect();
        let ys: Vec<[f64; 3]> = (0..k).map(|_| ld(random_dist(&mut rng)).as_array()).collect();
        let xd: Vec<LabelDistribution> = xs.iter().map(|&p| ld(p)).collect();
        let yd: Vec<LabelDistribution> = ys.iter().map(|&p| ld(p)).collect();
        let got = distance_correlation(&xd, &yd).map_err(|e| e.to_string())?;
        let want = oracle::dcor(
            &xs.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
            &ys.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
        );
        close(got, want, 1e-9, &format!("case {case} dCor"))?;
        worst = worst.max((got - want).abs());
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 cases, max |Δ| {worst:.1e}, {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Check {
    let e = LabelDistribution::one_hot(NliLabel::Entailment);
    let n = LabelDistribution::one_hot(NliLabel::Neutral);
    let nat = jsd_distance(&e, &n, &MetricConfig::default());
    close(nat, 2f64.ln().sqrt(), 1e-6, "JSD natural")?;
    let b2 = jsd_distance(
        &e,
        &n,
        &MetricConfig {
            log_base: LogBase::Base2,
            ..Default::default()
        },
    );
    close(b2, 1.0, 1e-9, "JSD base 2")?;
    close(tv_distance(&e, &n), 1.0, 0.0, "TVD disjoint")?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<[f64; 3]> = (0..30).map(|_| random_dist(&mut rng)).collect();
    let ys: Vec<[f64; 3]> = (0..30).map(|_| random_dist(&mut rng)).collect();
    let self_corr = distance_correlation_points(&xs, &xs).map_err(|e| e.to_string())?;
    close(self_corr, 1.0, 1e-9, "dCor(X, X)")?;

    // rotation about a random unit axis (Rodrigues), then scaling by 2.5
    let axis = {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / norm)
    };
    let theta: f64 = 0.83;
    let (s, c) = theta.sin_cos();
    let [ux, uy, uz] = axis;
    let r = [
        [
            c + ux * ux * (1.0 - c),
            ux * uy * (1.0 - c) - uz * s,
            ux * uz * (1.0 - c) + uy * s,
        ],
        [
            uy * ux * (1.0 - c) + uz * s,
            c + uy * uy * (1.0 - c),
            uy * uz * (1.0 - c) - ux * s,
        ],
        [
            uz * ux * (1.0 - c) - uy * s,
            uz * uy * (1.0 - c) + ux * s,
            c + uz * uz * (1.0 - c),
        ],
    ];
    let moved: Vec<[f64; 3]> = xs
        .iter()
        .map(|p| std::array::from_fn(|i| 2.5 * (0..3).map(|j| r[i][j] * p[j]).sum::<f64>()))
        .collect();
    let before = distance_correlation_points(&xs, &ys).map_err(|e| e.to_string())?;
    let after = distance_correlation_points(&moved, &ys).map_err(|e| e.to_string())?;
    close(before, after, 1e-9, "dCor under rotation and scaling")?;
    Ok(format!(
        "JSD {nat:.9} / {b2:.12}, dCor(X,X) = {self_corr:.12}, invariance |Δ| {:.1e}",
        (before - after).abs()
    ))
}

fn criterion_3() -> Check {
    let mut counts = Vec::new();
    for m in 0..=6 {
        let plan = enumerate_configurations(m).map_err(|e| e.to_string())?;
        let want = oracle::plan_size(m);
        ensure(plan.len() == want, || {
            format!("m={m}: {} configurations, formula {want}", plan.len())
        })?;

        let got: BTreeSet<(String, Vec<usize>)> = plan
            .configurations
            .iter()
            .map(|c| (c.option_mapping.code(), c.ordering.clone()))
            .collect();
        let mut orders = oracle::ordered_subsets(m);
        if m == 0 {
            orders.push(Vec::new());
        }
        let expected: BTreeSet<(String, Vec<usize>)> = OptionMapping::all()
            .iter()
            .flat_map(|om| orders.iter().map(move |o| (om.code(), o.clone())))
            .collect();
        ensure(got == expected, || {
            format!("m={m}: configuration set differs from brute-force enumeration")
        })?;

        let (inst, set) = corpus::instance_with_set(m);
        let client = mock_client(3);
        estimate_mjd(&inst, &set, &client, &EstimatorConfig::default()).map_err(|e| e.to_string())?;
        let calls = client.stats().backend_calls as usize;
        ensure(calls == want, || {
            format!("m={m}: {calls} backend calls, expected {want}")
        })?;
        counts.push(calls);
    }
    ensure(counts[4] == 384, || format!("m=4 gives {}", counts[4]))?;
    Ok(format!("calls for m=0..6: {counts:?}"))
}

fn criterion_4() -> Check {
    let cfg = EstimatorConfig::default();
    let mut checked = 0;
    for m in [0, 1, 3, 4] {
        let (inst, set) = corpus::instance_with_set(m);
        let base = estimate_mjd(&inst, &set, &mock_client(4), &cfg).map_err(|e| e.to_string())?;

        let mut by_n: BTreeMap<usize, Vec<[f64; 3]>> = BTreeMap::new();
        for r in &base.raw {
            let scores = r.scores.as_array();
            let want = if scores.iter().all(|&s| s > 0.0) {
                let s: f64 = scores.iter().sum();
                scores.map(|v| v / s)
            } else {
                oracle::softmax(scores, cfg.metric.softmax_temperature)
            };
            for i in 0..3 {
                close(
                    r.distribution.as_array()[i],
                    want[i],
                    1e-12,
                    "per-configuration transform",
                )?;
            }
            by_n.entry(r.configuration.n())
                .or_default()
                .push(r.distribution.as_array());
        }
        let means: Vec<[f64; 3]> = by_n
            .values()
            .map(|v| std::array::from_fn(|i| v.iter().map(|p| p[i]).sum::<f64>() / v.len() as f64))
            .collect();
        let want: [f64; 3] = std::array::from_fn(|i| means.iter().map(|p| p[i]).sum::<f64>() / means.len() as f64);
        for i in 0..3 {
            close(
                base.final_distribution.as_array()[i],
                want[i],
                1e-12,
                &format!("m={m} final MJD"),
            )?;
        }

        for seed in [1u64, 7, 99] {
            let shuffled = EstimatorConfig {
                dispatch_shuffle_seed: Some(seed),
                ..cfg.clone()
            };
            let other = estimate_mjd(&inst, &set, &mock_client(4), &shuffled).map_err(|e| e.to_string())?;
            ensure(other.final_distribution == base.final_distribution, || {
                format!("m={m}: dispatch order {seed} changed the estimate")
            })?;
        }
        let mut raw = base.raw.clone();
        raw.reverse();
        let third = raw.len() / 3;
        raw.rotate_left(third);
        let (permuted, _) = aggregate(&raw).ok_or("empty aggregate")?;
        for i in 0..3 {
            close(
                permuted.as_array()[i],
                want[i],
                1e-12,
                &format!("m={m} permuted aggregation"),
            )?;
        }
        checked += 1;
    }
    Ok(format!(
        "{checked} set sizes; dispatch shuffles bit-identical, permuted aggregation within 1e-12"
    ))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: BTreeMap<String, LabelDistribution> = (0..50)
        .map(|i| (format!("u{i:02}"), ld(random_dist(&mut rng))))
        .collect();
    let r =
        compare_to_target(&x, &x, &MetricConfig::default(), Direction::CandidateFirst).map_err(|e| e.to_string())?;
    let row = format!("{:.3} {:.3} {:.3} {:.3}", r.kl, r.jsd, r.tvd, r.dcorr);
    ensure(row == "0.000 0.000 0.000 1.000", || {
        format!("self-comparison row {row}")
    })?;
    Ok(format!("KL JSD TVD D.Corr = {row}"))
}

fn label_strategy() -> impl Strategy<Value = NliLabel> {
    (0usize..3).prop_map(|i| NliLabel::from_index(i).unwrap())
}

fn criterion_6() -> Check {
    let (pool, uid) = corpus::selection_pool();
    use NliLabel::*;
    let guidance = [Entailment, Entailment, Entailment, Neutral, Contradiction];
    let got = select_label_guided(&pool, &uid, &guidance, SelectionMode::Longest).map_err(|e| e.to_string())?;
    let longest = |label: NliLabel, k: usize| -> Vec<String> {
        let mut v: Vec<&ExplanationRecord> = pool.get(&uid, label).iter().collect();
        v.sort_by(|a, b| {
            b.text
                .split_whitespace()
                .count()
                .cmp(&a.text.split_whitespace().count())
                .then(a.rank.cmp(&b.rank))
        });
        v.into_iter().take(k).map(|r| r.text.clone()).collect()
    };
    let mut want = longest(Entailment, 3);
    want.extend(longest(Neutral, 1));
    want.extend(longest(Contradiction, 1));
    let texts: Vec<String> = got.explanations.iter().map(|r| r.text.clone()).collect();
    ensure(texts == want, || format!("selected {texts:?}, expected {want:?}"))?;

    let strategy = (
        proptest::collection::vec(label_strategy(), 1..=6),
        proptest::collection::vec((label_strategy(), 1usize..12), 0..14),
        proptest::collection::vec((label_strategy(), 1usize..6), 0..12),
        proptest::collection::vec((any::<bool>(), any::<bool>(), label_strategy()), 14),
        0usize..5,
        any::<u64>(),
        any::<bool>(),
        any::<bool>(),
    );
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let ops = std::cell::Cell::new(0usize);
    runner
        .run(
            &strategy,
            |(human_labels, own, donors, validation_bits, rate_idx, seed, greedy, preferred)| {
                let human = ExplanationSet::new(
                    "t",
                    human_labels
                        .iter()
                        .enumerate()
                        .map(|(i, &l)| {
                            ExplanationRecord::new("t", l, format!("human {i}"), ExplanationSource::Human, i as u32 + 1)
                                .unwrap()
                        })
                        .collect(),
                );
                let mut records = Vec::new();
                let mut next_rank = [0u32; 3];
                for (l, len) in &own {
                    next_rank[l.index()] += 1;
                    let text = vec!["w"; *len].join(" ");
                    records.push(
                        ExplanationRecord::new("t", *l, text, ExplanationSource::Model, next_rank[l.index()]).unwrap(),
                    );
                }
                for (i, (l, len)) in donors.iter().enumerate() {
                    let text = vec!["d"; *len].join(" ");
                    records.push(
                        ExplanationRecord::new(format!("o{}", i % 3), *l, text, ExplanationSource::Model, i as u32 + 1)
                            .unwrap(),
                    );
                }
                let pool = ExplanationPool::from_records(records);
                let validations: Vec<ValidationRecord> = pool
                    .records_for("t")
                    .iter()
                    .zip(&validation_bits)
                    .map(|(r, &(faithful, reasonable, annot))| ValidationRecord {
                        uid: "t".into(),
                        rank: r.rank,
                        label: r.label,
                        faithful,
                        supports_reasonable_label: reasonable,
                        annotator_label: reasonable.then_some(annot),
                    })
                    .collect();
                let rate = [0.0, 0.25, 0.5, 0.75, 1.0][rate_idx];
                let counts = human.label_counts();
                let mut outputs = Vec::new();
                for mode in [SelectionMode::First, SelectionMode::Longest] {
                    if let Ok(s) = replace_with_model(&human, &pool, rate, mode, seed) {
                        outputs.push(s);
                    }
                }
                if let Ok(s) = replace_with_noise(&human, &pool, rate, seed) {
                    prop_assert!(s
                        .explanations
                        .iter()
                        .filter(|r| r.source == ExplanationSource::Noise)
                        .all(|r| r.uid != "t"));
                    outputs.push(s);
                }
                let kind = if greedy {
                    ReplacementKind::Greedy
                } else {
                    ReplacementKind::Representative
                };
                let preference = if preferred {
                    Preference::Preferred
                } else {
                    Preference::Unpreferred
                };
                outputs.push(
                    apply_validation_replacement(&human, &pool, &validations, ReplacementStrategy { kind, preference })
                        .set,
                );
                for s in &outputs {
                    prop_assert_eq!(s.label_counts(), counts);
                    prop_assert_eq!(s.len(), human.len());
                    prop_assert_eq!(&s.uid, &human.uid);
                }
                ops.set(ops.get() + outputs.len());
                Ok(())
            },
        )
        .map_err(|e| format!("label multiset property: {e}"))?;
    Ok(format!("guided selection matches longest-first oracle; 1000 random cases, {} replacement outputs preserve label multisets", ops.get()))
}

fn criterion_7() -> Check {
    let mut margins = Vec::new();
    for seed in 0..10u64 {
        let (instances, human) = corpus::ablation_corpus(50, seed);
        let client = LlmClient::with_options(
            Arc::new(MockBackend::new(seed)),
            None,
            hjd_core::backend::RetryPolicy::none(),
            8,
        );
        let generated =
            generate_explanations(&instances, &NliLabel::ALL, &client, "mock-model").map_err(|e| e.to_string())?;
        let pool = ExplanationPool::from_records(generated.records);
        let cfg = EstimatorConfig::default();
        let target_batch = estimate_batch(&instances, &human, &client, &cfg).map_err(|e| e.to_string())?;
        let target: BTreeMap<String, LabelDistribution> = target_batch
            .estimates
            .iter()
            .map(|e| (e.uid.clone(), e.final_distribution))
            .collect();
        ensure(target.len() == 50, || {
            format!("seed {seed}: only {} target estimates", target.len())
        })?;
        let mut jsd = BTreeMap::new();
        for kind in [ReplacementSource::Model, ReplacementSource::Noise] {
            let spec = AblationSpec {
                rates: vec![1.0],
                replacement_kind: kind,
                mode: SelectionMode::Longest,
                seed,
            };
            let sweep = run_ablation(kind.as_str(), &instances, &human, &pool, &spec, &target, &client, &cfg)
                .map_err(|e| e.to_string())?;
            ensure(sweep.excluded.is_empty(), || {
                format!("seed {seed}: {} instances excluded", sweep.excluded.len())
            })?;
            jsd.insert(kind.as_str(), sweep.rows[0].report.jsd);
        }
        let (model, noise) = (jsd["model"], jsd["noise"]);
        ensure(noise > model, || {
            format!("seed {seed}: noise JSD {noise:.4} <= model JSD {model:.4}")
        })?;
        margins.push(noise - model);
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("noise > model JSD in 10/10 seeds, smallest margin {min:.4}"))
}

fn criterion_8() -> Check {
    let cfg = TrainingConfig::default();
    let metric = MetricConfig::default();
    let mut f1s = Vec::new();
    let mut drops = Vec::new();
    for seed in 0..10u64 {
        let (train, test) = corpus::separable_corpus(200, seed);
        let train_cfg = TrainingConfig { seed, ..cfg };
        let reference = train_soft(&train, &train_cfg, DEFAULT_DIM).map_err(|e| e.to_string())?;
        let pred: Vec<usize> = test.iter().map(|(i, _)| reference.predict_label(i).index()).collect();
        let gold: Vec<usize> = test.iter().map(|(_, d)| d.argmax().index()).collect();
        let f1 = oracle::weighted_f1(&pred, &gold);
        ensure(f1 >= 0.95, || {
            format!("seed {seed}: held-out weighted F1 {f1:.4} < 0.95")
        })?;
        f1s.push(f1);

        let (dev, held): (Vec<_>, Vec<_>) = test
            .iter()
            .map(|(i, _)| i.clone())
            .enumerate()
            .partition(|(k, _)| k % 2 == 0);
        let dev: Vec<_> = dev.into_iter().map(|(_, i)| i).collect();
        let held: Vec<_> = held.into_iter().map(|(_, i)| i).collect();
        let same = evaluate_against_reference("self", &reference, &reference, &dev, &held, &metric, None)
            .map_err(|e| e.to_string())?;
        for s in [same.dev, same.test] {
            ensure(s.kl == 0.0 && s.weighted_f1 == 1.0, || {
                format!("seed {seed}: self-comparison gave {s:?}")
            })?;
        }

        let other_order = TrainingConfig {
            seed: seed + 1000,
            ..cfg
        };
        let clean = train_soft(&train, &other_order, DEFAULT_DIM).map_err(|e| e.to_string())?;
        let corrupted =
            train_soft(&corpus::pair_flip(&train, 0.5, seed), &other_order, DEFAULT_DIM).map_err(|e| e.to_string())?;
        let clean_f1 = evaluate_against_reference("clean", &clean, &reference, &dev, &held, &metric, None)
            .map_err(|e| e.to_string())?
            .test
            .weighted_f1;
        let corrupt_f1 = evaluate_against_reference("corrupt", &corrupted, &reference, &dev, &held, &metric, None)
            .map_err(|e| e.to_string())?
            .test
            .weighted_f1;
        ensure(corrupt_f1 < clean_f1, || {
            format!("seed {seed}: corrupted F1 {corrupt_f1:.4} not below clean {clean_f1:.4}")
        })?;
        drops.push(clean_f1 - corrupt_f1);
    }
    let min_f1 = f1s.iter().copied().fold(f64::INFINITY, f64::min);
    let min_drop = drops.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "min held-out F1 {min_f1:.3}; self KL=0/F1=1; corruption lowers F1 in 10/10 seeds (min drop {min_drop:.3})"
    ))
}

fn criterion_9() -> Check {
    let cfg = VariabilityConfig::default();
    let text = "The man is playing a guitar because he enjoys music.";
    for k in 2..=8 {
        let same = vec![text; k];
        let r = pairwise_variability(&same, &cfg).map_err(|e| e.to_string())?;
        for (i, v) in r.axes().iter().enumerate() {
            close(*v, 1.0, 1e-12, &format!("k={k} axis {i} on identical texts"))?;
        }
        let distinct: Vec<String> = (0..k)
            .map(|i| format!("sentence number {i} talks about topic {}", i * 7))
            .collect();
        let r = pairwise_variability(&distinct, &cfg).map_err(|e| e.to_string())?;
        ensure(r.pairs == oracle::binom(k, 2), || format!("k={k}: {} pairs", r.pairs))?;
    }
    // hand-computed multiset Jaccard values, boundary-padded on both sides
    let fixtures: [(&str, &str, usize, f64); 6] = [
        ("the cat sat", "the cat ran", 1, 2.0 / 4.0),
        ("the cat sat", "the cat ran", 2, 2.0 / 6.0),
        ("the cat sat", "the cat ran", 3, 2.0 / 8.0),
        ("a a b", "a b b", 1, 2.0 / 4.0),
        ("x y", "y x", 2, 0.0 / 6.0),
        ("Dogs bark.", "dogs BARK", 3, 1.0),
    ];
    for (a, b, n, want) in fixtures {
        close(
            lexical_ngram_similarity(a, b, n).map_err(|e| e.to_string())?,
            want,
            1e-9,
            &format!("lexical {a:?}/{b:?} n={n}"),
        )?;
    }
    // "the cat sat" and "a dog ran" share the tag sequence DET NOUN VERB
    let tagger = RuleTagger;
    close(
        syntactic_ngram_similarity("the cat sat", "a dog ran", 2, &tagger).map_err(|e| e.to_string())?,
        1.0,
        1e-9,
        "syntactic DET NOUN VERB",
    )?;
    Ok("identical sets score 1.0 on all 8 axes; C(k,2) pairs for k=2..8; 7 Jaccard fixtures".into())
}

fn hjd_bin() -> &'static str {
    env!("CARGO_BIN_EXE_hjd")
}

fn run_hjd(config: &Path, out: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(hjd_bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HJD_BACKEND_KIND")
        .env_remove("HJD_BACKEND_URL")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!("hjd {args:?}: {}", String::from_utf8_lossy(&o.stderr))
    })
}

fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn criterion_10() -> Check {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy/config.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let start = Instant::now();
    run_hjd(&config, &out, &["pipeline"])?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("pipeline took {elapsed:?}")
    })?;
    let first = dir.path().join("first");
    std::fs::rename(&out, &first).map_err(|e| e.to_string())?;
    run_hjd(&config, &out, &["pipeline"])?;

    let stages = [
        "generate",
        "select",
        "estimate",
        "evaluate",
        "ablate",
        "variability",
        "train_proxy",
        "export_ternary",
    ];
    let names: Vec<String> = list_files(&out)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for s in stages {
        ensure(names.iter().any(|n| n.starts_with(&format!("manifest.{s}"))), || {
            format!("no manifest for stage {s}")
        })?;
    }
    let a = list_files(&first);
    ensure(a.len() == names.len(), || {
        format!("{} vs {} files", a.len(), names.len())
    })?;
    let mut compared = 0;
    for p in a {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("timings.") {
            continue;
        }
        let x = std::fs::read(&p).map_err(|e| e.to_string())?;
        let y = std::fs::read(out.join(&name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(x == y, || format!("{name} differs between runs"))?;
        compared += 1;
    }
    Ok(format!(
        "pipeline in {:.2}s; {compared} artifacts byte-identical across two runs",
        elapsed.as_secs_f64()
    ))
}

fn criterion_11() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let files = corpus::user_supplied_files(d, 40, 11).map_err(|e| e.to_string())?;
    let out = d.join("out");
    run_hjd(
        &files.config,
        &out,
        &[
            "evaluate",
            "--candidate",
            files.mjd.to_str().unwrap(),
            "--target",
            files.hjd.to_str().unwrap(),
            "--name",
            "plain",
        ],
    )?;
    run_hjd(
        &files.config,
        &out,
        &[
            "train-proxy",
            "--soft-labels",
            files.mjd.to_str().unwrap(),
            "--name",
            "mjd",
        ],
    )?;
    run_hjd(
        &files.config,
        &out,
        &[
            "train-proxy",
            "--soft-labels",
            files.hjd.to_str().unwrap(),
            "--name",
            "hjd",
        ],
    )?;
    let (c, r) = (out.join("proxy_mjd.json"), out.join("proxy_hjd.json"));
    run_hjd(
        &files.config,
        &out,
        &[
            "eval-proxy",
            "--candidate",
            c.to_str().unwrap(),
            "--reference",
            r.to_str().unwrap(),
            "--name",
            "FT",
        ],
    )?;
    let ft = out.join("ft_FT.json");
    run_hjd(
        &files.config,
        &out,
        &[
            "evaluate",
            "--candidate",
            files.mjd.to_str().unwrap(),
            "--target",
            files.hjd.to_str().unwrap(),
            "--name",
            "full",
            "--ft",
            ft.to_str().unwrap(),
        ],
    )?;

    // oracle columns
    let uids: Vec<&String> = files.mjd_values.keys().collect();
    let n = uids.len() as f64;
    let mut kl = 0.0;
    let mut js = 0.0;
    let mut tv = 0.0;
    for u in &uids {
        let (p, q) = (files.mjd_values[*u], files.hjd_values[*u]);
        kl += oracle::kl(p, q, false);
        js += oracle::jsd(p, q, false);
        tv += oracle::tvd(p, q);
    }
    let xs: Vec<Vec<f64>> = uids.iter().map(|u| files.mjd_values[*u].to_vec()).collect();
    let ys: Vec<Vec<f64>> = uids.iter().map(|u| files.hjd_values[*u].to_vec()).collect();
    let mut want = vec![kl / n, js / n, tv / n, oracle::dcor(&xs, &ys)];

    let load = |p: &Path| ProxyClassifier::from_json(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (cand, refc) = (load(&c), load(&r));
    let eval_uids: Vec<String> = files.eval.iter().map(|i| i.uid.clone()).collect();
    let (dev_uids, _) = split_dev_test(&eval_uids, 0.5, files.seed).map_err(|e| e.to_string())?;
    let argmax = |p: [f64; 3]| (0..3).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    let split_scores = |dev: bool| -> [f64; 3] {
        let split: Vec<_> = files.eval.iter().filter(|i| dev_uids.contains(&i.uid) == dev).collect();
        let (mut k, mut e) = (0.0, 0.0);
        let (mut pred, mut gold) = (Vec::new(), Vec::new());
        for inst in &split {
            let pc = cand.predict_dist(inst).as_array();
            let pr = refc.predict_dist(inst).as_array();
            k += oracle::kl(pc, pr, false);
            e += oracle::ce(pr, pc);
            pred.push(argmax(pc));
            gold.push(argmax(pr));
        }
        let m = split.len() as f64;
        [k / m, e / m, oracle::weighted_f1(&pred, &gold)]
    };
    let (sd, st) = (split_scores(true), split_scores(false));
    want.extend([sd[0], st[0], sd[1], st[1], sd[2], st[2]]);

    let tsv = std::fs::read_to_string(out.join("eval_full.tsv")).map_err(|e| e.to_string())?;
    let mut lines = tsv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let cells: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let expected_header = [
        "system",
        "KL",
        "JSD",
        "TVD",
        "D.Corr",
        "FT:KL(dev)",
        "FT:KL(test)",
        "FT:CE(dev)",
        "FT:CE(test)",
        "FT:F1(dev)",
        "FT:F1(test)",
    ];
    ensure(header == expected_header, || format!("header {header:?}"))?;
    for (i, w) in want.iter().enumerate() {
        let cell = cells[i + 1];
        ensure(cell == format!("{w:.6}"), || {
            format!("column {}: {cell} vs oracle {w:.9}", expected_header[i + 1])
        })?;
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("eval_full.json")).unwrap())
        .map_err(|e| e.to_string())?;
    for (key, w) in ["kl", "jsd", "tvd", "dcorr"].iter().zip(&want) {
        close(report[key].as_f64().unwrap(), *w, 1e-12, key)?;
    }
    let plain = std::fs::read_to_string(out.join("eval_plain.tsv")).map_err(|e| e.to_string())?;
    ensure(
        plain
            .lines()
            .nth(1)
            .unwrap()
            .split('\t')
            .skip(1)
            .eq(cells[1..5].iter().copied()),
        || "plain and full reports disagree".into(),
    )?;
    Ok("all 10 report columns recomputed from supplied MJD/HJD files match the oracle (absolute scores on external corpora are not asserted)".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("metric oracle equivalence", criterion_1),
        ("closed-form checks", criterion_2),
        ("estimation combinatorics", criterion_3),
        ("aggregation contract", criterion_4),
        ("self-comparison fixed point", criterion_5),
        ("selection semantics", criterion_6),
        ("ablation direction", criterion_7),
        ("proxy fine-tuning protocol", criterion_8),
        ("variability properties", criterion_9),
        ("end-to-end reproducibility", criterion_10),
        ("report recomputation", criterion_11),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}) [{secs:.2}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}) [{secs:.2}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
