//! Evaluation protocol: chronological split, normalization isolation,
//! metrics and grid structure.

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workr::features::{
    FeatureGroup, FeatureTable, FeatureVector, GroupMask, Layout, CSV_SLOT_SECONDS,
};
use workr::harness::{
    chrono_split, compute_metrics, grid_rows, AblationMode, ExperimentConfig, ExperimentRunner,
    ModelKind, SplitConfig,
};
use workr::ingest::{default_required_kinds, IngestReport, WindowConfig};
use workr::pipeline::featurize;
use workr::synthgen::{default_profiles, generate, SynthConfig};
use workr::{Occupation, TimeSlot, WorkrError};

fn label(k: usize) -> Occupation {
    Occupation::from_index(k).unwrap()
}

/// Random users with shuffled, distinct slot starts.
fn random_rows(seed: u64, width: usize) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout::full();
    let mut rows = Vec::new();
    for u in 0..rng.random_range(1..6) {
        let n = rng.random_range(10..60);
        let mut starts: Vec<i64> = (0..n * 3).map(|i| i as i64 * CSV_SLOT_SECONDS).collect();
        starts.shuffle(&mut rng);
        for &start in &starts[..n] {
            let values = (0..width)
                .map(|j| {
                    let temporal = j < layout.len()
                        && FeatureGroup::of_column(&layout.columns[j])
                            == Some(FeatureGroup::Temporal);
                    if temporal {
                        f64::from(rng.random_range(0..2u8))
                    } else {
                        rng.random_range(-50.0..50.0)
                    }
                })
                .collect();
            rows.push(FeatureVector {
                user: format!("u{u}"),
                slot: TimeSlot::new(start, CSV_SLOT_SECONDS).unwrap(),
                label: Some(label(rng.random_range(0..6))),
                values,
            });
        }
    }
    rows
}

fn key(r: &FeatureVector) -> (String, i64) {
    (r.user.clone(), r.slot.start)
}

#[test]
fn chrono_split_is_sound_on_random_datasets() {
    let cfg = SplitConfig::default();
    for seed in 0..1000 {
        let rows = random_rows(seed, 1);
        let split = chrono_split(&rows, &cfg).unwrap();
        let parts = [&split.train, &split.val, &split.test];
        let keys: Vec<HashSet<_>> = parts.iter().map(|p| p.iter().map(key).collect()).collect();
        assert!(
            keys[0].is_disjoint(&keys[1])
                && keys[0].is_disjoint(&keys[2])
                && keys[1].is_disjoint(&keys[2])
        );
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, rows.len(), "seed {seed}");

        let mut per_user: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &rows {
            *per_user.entry(&r.user).or_default() += 1;
        }
        for b in &split.boundaries {
            let n = per_user[b.user.as_str()];
            // Integer form of the floor rule: floor(7n/10) and floor(n/10).
            assert_eq!(b.train, 7 * n / 10, "seed {seed} user {}", b.user);
            assert_eq!(b.val, n / 10);
            assert_eq!(b.test, n - b.train - b.val);
            let span = |p: &[FeatureVector]| {
                let s: Vec<i64> = p
                    .iter()
                    .filter(|r| r.user == b.user)
                    .map(|r| r.slot.start)
                    .collect();
                (s.len(), s.iter().min().copied(), s.iter().max().copied())
            };
            let (nt, _, t_max) = span(&split.train);
            let (nv, v_min, v_max) = span(&split.val);
            let (ns, s_min, _) = span(&split.test);
            assert_eq!((nt, nv, ns), (b.train, b.val, b.test));
            let before = |a: Option<i64>, b: Option<i64>| match (a, b) {
                (Some(a), Some(b)) => a < b,
                _ => true,
            };
            assert!(before(t_max, v_min) && before(v_max, s_min) && before(t_max, s_min));
        }
    }
}

#[test]
fn split_rejects_small_users_and_unlabeled_rows() {
    let mut rows = random_rows(3, 1);
    let first = rows[0].user.clone();
    let kept: Vec<_> = rows
        .iter()
        .filter(|r| r.user == first)
        .take(9)
        .cloned()
        .collect();
    assert!(matches!(
        chrono_split(&kept, &SplitConfig::default()),
        Err(WorkrError::UserTooSmall { rows: 9, .. })
    ));
    rows[0].label = None;
    assert!(chrono_split(&rows, &SplitConfig::default()).is_err());
    let bad = SplitConfig {
        train: 0.8,
        ..SplitConfig::default()
    };
    assert!(chrono_split(&random_rows(3, 1), &bad).is_err());
}

#[test]
fn normalizer_is_bit_identical_under_held_out_perturbation() {
    let width = Layout::full().len();
    for seed in 0..40 {
        let rows = random_rows(seed, width);
        let table = FeatureTable {
            layout: Layout::full(),
            rows,
        };
        let mut base = ExperimentRunner::new(&table, ExperimentConfig::default()).unwrap();
        let train: HashSet<_> = base.split().train.iter().map(key).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let mut perturbed = table.clone();
        for r in perturbed
            .rows
            .iter_mut()
            .filter(|r| !train.contains(&key(r)))
        {
            for (v, name) in r.values.iter_mut().zip(&table.layout.columns) {
                // Temporal columns are one-hot and pass through, so they are
                // flipped rather than shifted.
                if FeatureGroup::of_column(name) == Some(FeatureGroup::Temporal) {
                    *v = 1.0 - *v;
                } else {
                    *v += rng.random_range(-1e6..1e6);
                }
            }
        }
        // Unlabeled rows never enter the split at all.
        let mut extra = perturbed.rows[0].clone();
        extra.label = None;
        extra.slot = TimeSlot::new(-CSV_SLOT_SECONDS, CSV_SLOT_SECONDS).unwrap();
        extra.values.iter_mut().for_each(|v| *v = 1e9);
        perturbed.rows.push(extra);

        let mut other = ExperimentRunner::new(&perturbed, ExperimentConfig::default()).unwrap();
        let a = serde_json::to_string(base.normalizer()).unwrap();
        let b = serde_json::to_string(other.normalizer()).unwrap();
        assert_eq!(base.normalizer(), other.normalizer());
        assert_eq!(a, b);

        for runner in [&mut base, &mut other] {
            let mats = runner.matrices(Some(GroupMask::ALL), None, 1).unwrap();
            for m in &mats {
                assert!(m.rows.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

/// Counts true/false positives and false negatives per class directly from
/// the pairs, without a confusion matrix.
fn reference_metrics(preds: &[usize], labels: &[usize]) -> [f64; 4] {
    let classes: Vec<usize> = (0..6).filter(|k| labels.contains(k)).collect();
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for &k in &classes {
        let pairs = || preds.iter().zip(labels);
        let tp = pairs().filter(|(p, y)| **p == k && **y == k).count() as f64;
        let fp = pairs().filter(|(p, y)| **p == k && **y != k).count() as f64;
        let fn_ = pairs().filter(|(p, y)| **p != k && **y == k).count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = tp / (tp + fn_);
        // F1 as 2TP / (2TP + FP + FN), equal to the harmonic mean.
        let f1 = if tp > 0.0 {
            2.0 * tp / (2.0 * tp + fp + fn_)
        } else {
            0.0
        };
        p += prec;
        r += rec;
        f += f1;
    }
    let m = classes.len() as f64;
    let acc = preds.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / preds.len() as f64;
    [f / m, p / m, r / m, acc]
}

#[test]
fn metrics_hand_example() {
    let labels = [0, 0, 1, 1].map(label);
    let preds = [0, 1, 1, 1].map(label);
    let m = compute_metrics(&preds, &labels).unwrap();
    assert_eq!(m.accuracy, 0.75);
    assert!((m.f1 - 11.0 / 15.0).abs() < 1e-15);
    assert!((m.precision - 5.0 / 6.0).abs() < 1e-15);
    assert!((m.recall - 0.75).abs() < 1e-15);
    assert_eq!(m.confusion[0][..2], [1, 1]);
    assert_eq!(m.confusion[1][..2], [0, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn metrics_match_reference(pairs in prop::collection::vec((0usize..6, 0usize..6), 1..80)) {
        let (preds, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = compute_metrics(
            &preds.iter().map(|&k| label(k)).collect::<Vec<_>>(),
            &labels.iter().map(|&k| label(k)).collect::<Vec<_>>(),
        ).unwrap();
        let want = reference_metrics(&preds, &labels);
        for (got, want) in [m.f1, m.precision, m.recall, m.accuracy].iter().zip(want) {
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let total: u64 = m.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, preds.len());
    }
}

#[test]
fn grids_match_published_row_sets() {
    let letters = |m: Option<GroupMask>| m.map_or("-".to_string(), |m| m.letters());
    let pre: Vec<_> = grid_rows(AblationMode::Preprocessed)
        .into_iter()
        .map(|(f, l)| (letters(f), letters(l)))
        .collect();
    let expected_pre = [
        "P", "A", "S", "T", "PA", "PS", "PT", "AS", "AT", "ST", "PAS", "PAT", "PST", "AST", "PAST",
    ];
    assert_eq!(pre.len(), 15);
    for (row, want) in pre.iter().zip(expected_pre) {
        assert_eq!(row, &(want.to_string(), "-".to_string()));
    }

    let lat: Vec<_> = grid_rows(AblationMode::Latent)
        .into_iter()
        .map(|(f, l)| (letters(f), letters(l)))
        .collect();
    let mut expected_lat: Vec<(String, String)> = expected_pre[..14]
        .iter()
        .map(|l| ("PAS".to_string(), l.to_string()))
        .collect();
    expected_lat.push(("PAS".into(), "-".into()));
    expected_lat.push(("-".into(), "PAST".into()));
    expected_lat.push(("PAS".into(), "PAST".into()));
    assert_eq!(lat, expected_lat);
}

fn small_synth_table() -> FeatureTable {
    let cfg = SynthConfig {
        n_users_per_class: 2,
        days: 7,
        ..SynthConfig::default()
    };
    let out = generate(&default_profiles(), &cfg).unwrap();
    featurize(
        &out.records,
        &out.annotations,
        WindowConfig::default(),
        &default_required_kinds(),
        false,
        &mut IngestReport::default(),
    )
    .unwrap()
}

/// Appends exact duplicates of physical columns and uniform noise columns,
/// both in the physical group so that the `PAST` mask selects them.
fn with_noise_columns(table: &FeatureTable, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layout = table.layout.clone();
    let dup: Vec<usize> = (0..4).collect();
    layout
        .columns
        .extend(dup.iter().map(|j| format!("p_noise_dup_{j}")));
    layout
        .columns
        .extend((0..4).map(|j| format!("p_noise_rand_{j}")));
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let mut values = r.values.clone();
            values.extend(dup.iter().map(|&j| r.values[j]));
            values.extend((0..4).map(|_| rng.random_range(0.0..1.0)));
            FeatureVector {
                values,
                ..r.clone()
            }
        })
        .collect();
    FeatureTable { layout, rows }
}

#[test]
fn noise_columns_do_not_change_scores() {
    let table = small_synth_table();
    let cfg = ExperimentConfig {
        seeds: vec![1],
        ..ExperimentConfig::default()
    };
    let past = Some(GroupMask::ALL);
    let base = ExperimentRunner::new(&table, cfg.clone())
        .unwrap()
        .run(past, None, ModelKind::Gbm)
        .unwrap()
        .summary
        .mean
        .f1;
    let mut deltas = Vec::new();
    for seed in 1..=5 {
        let noisy = with_noise_columns(&table, seed);
        let f1 = ExperimentRunner::new(&noisy, cfg.clone())
            .unwrap()
            .run(past, None, ModelKind::Gbm)
            .unwrap()
            .summary
            .mean
            .f1;
        deltas.push(f1 - base);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    println!("base macro-F1 {base:.4}, deltas {deltas:?}");
    assert!(mean.abs() <= 0.02, "mean delta {mean}");
}
