//! Greedy tree growth against brute-force enumeration on small instances.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workr::boosting::{build_tree, GbmConfig, Node, Tree};

const LAMBDA: f64 = 1.0;

struct Instance {
    rows: Vec<Vec<f64>>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    depth: usize,
}

/// Dyadic gradients and hessians keep every partial sum exact, so gains
/// computed by different summation orders are bit-identical.
fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=64);
    let d = rng.random_range(1..=4);
    let levels = rng.random_range(2..=12);
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.random_range(0..levels) as f64 * 0.5)
                .collect()
        })
        .collect();
    let grad = (0..n)
        .map(|_| rng.random_range(-16..=16) as f64 / 16.0)
        .collect();
    let hess = (0..n)
        .map(|_| rng.random_range(1..=16) as f64 / 16.0)
        .collect();
    Instance {
        rows,
        grad,
        hess,
        depth: rng.random_range(1..=2),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Split {
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Leaf(f64),
    Split(Split, Box<Shape>, Box<Shape>),
}

fn sums(inst: &Instance, rows: &[usize]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(g, h), &r| {
        (g + inst.grad[r], h + inst.hess[r])
    })
}

fn gain(inst: &Instance, left: &[usize], right: &[usize]) -> f64 {
    let (gl, hl) = sums(inst, left);
    let (gr, hr) = sums(inst, right);
    0.5 * (gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA)
        - (gl + gr) * (gl + gr) / (hl + hr + LAMBDA))
}

/// Every admissible split of `rows`, in (feature, threshold) order.
fn all_splits(inst: &Instance, rows: &[usize], mcw: f64) -> Vec<(Split, Vec<usize>, Vec<usize>)> {
    let d = inst.rows[0].len();
    let mut out = Vec::new();
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|&r| inst.rows[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| inst.rows[r][f] < threshold);
            if sums(inst, &left).1 >= mcw && sums(inst, &right).1 >= mcw {
                out.push((
                    Split {
                        feature: f,
                        threshold,
                    },
                    left,
                    right,
                ));
            }
        }
    }
    out
}

fn leaf(inst: &Instance, rows: &[usize]) -> Shape {
    let (g, h) = sums(inst, rows);
    Shape::Leaf(-g / (h + LAMBDA))
}

/// Node-wise exhaustive search: at each node score every admissible split
/// and keep the first maximum.
fn nodewise(inst: &Instance, rows: &[usize], depth: usize, mcw: f64) -> Shape {
    if depth == 0 {
        return leaf(inst, rows);
    }
    let mut best: Option<(f64, Split, Vec<usize>, Vec<usize>)> = None;
    for (s, l, r) in all_splits(inst, rows, mcw) {
        let g = gain(inst, &l, &r);
        if best.as_ref().is_none_or(|b| g > b.0) {
            best = Some((g, s, l, r));
        }
    }
    match best {
        Some((g, s, l, r)) if g > 0.0 => Shape::Split(
            s,
            Box::new(nodewise(inst, &l, depth - 1, mcw)),
            Box::new(nodewise(inst, &r, depth - 1, mcw)),
        ),
        _ => leaf(inst, rows),
    }
}

/// `sum over leaves of -G^2 / (2 (H + lambda))`; lower is better.
fn objective_of(inst: &Instance, rows: &[usize]) -> f64 {
    let (g, h) = sums(inst, rows);
    -0.5 * g * g / (h + LAMBDA)
}

/// Lowest objective over all trees of depth at most `depth`.
fn global_best(inst: &Instance, rows: &[usize], depth: usize, mcw: f64) -> f64 {
    let mut best = objective_of(inst, rows);
    if depth > 0 {
        for (_, l, r) in all_splits(inst, rows, mcw) {
            let v = global_best(inst, &l, depth - 1, mcw) + global_best(inst, &r, depth - 1, mcw);
            best = best.min(v);
        }
    }
    best
}

fn to_shape(t: &Tree, i: usize) -> Shape {
    match t.nodes[i] {
        Node::Leaf { leaf } => Shape::Leaf(leaf),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => Shape::Split(
            Split { feature, threshold },
            Box::new(to_shape(t, left)),
            Box::new(to_shape(t, right)),
        ),
    }
}

fn tree_objective(inst: &Instance, t: &Tree) -> f64 {
    let mut by_leaf: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (r, x) in inst.rows.iter().enumerate() {
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = t.nodes[i]
        {
            i = if x[feature] < threshold { left } else { right };
        }
        by_leaf.entry(i as u64).or_default().push(r);
    }
    by_leaf.values().map(|rows| objective_of(inst, rows)).sum()
}

fn config(depth: usize) -> GbmConfig {
    GbmConfig {
        max_depth: depth,
        min_child_weight: 1.0,
        ..GbmConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn greedy_matches_nodewise_exhaustive_search(seed in any::<u64>()) {
        let inst = instance(seed);
        let all: Vec<usize> = (0..inst.rows.len()).collect();
        let tree = build_tree(&inst.rows, &inst.grad, &inst.hess, &config(inst.depth)).unwrap();
        prop_assert_eq!(to_shape(&tree, 0), nodewise(&inst, &all, inst.depth, 1.0));
    }
}

#[test]
fn global_optimum_match_rate() {
    let mut matches = 0;
    let total = 200;
    for seed in 0..total {
        let inst = instance(seed);
        let all: Vec<usize> = (0..inst.rows.len()).collect();
        let tree = build_tree(&inst.rows, &inst.grad, &inst.hess, &config(inst.depth)).unwrap();
        let got = tree_objective(&inst, &tree);
        let opt = global_best(&inst, &all, inst.depth, 1.0);
        assert!(got >= opt - 1e-12);
        if got <= opt + 1e-12 {
            matches += 1;
        }
    }
    eprintln!("global optimum reached on {matches}/{total}");
}
