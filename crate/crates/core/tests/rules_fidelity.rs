//! Extracted rule sets partition the feature space exactly like their trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upm::ensemble::{prepare, train_upm, PipelineConfig};
use upm::learners::{
    argmax, train_cart_matrix, train_random_tree_matrix, FeatureKind, FeatureMatrix, Node, SplitKind, TreeModel,
};
use upm::rules::{extract_rules, model_rules, RuleSet, RuleSource};
use upm::synth::{generate_cohort, CohortSpec};
use upm::{Cell, Dataset};

fn pipeline(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    cfg.train.forest.n_trees = 10;
    cfg
}

fn random_point(rng: &mut ChaCha8Rng, kinds: &[FeatureKind]) -> Vec<f64> {
    kinds
        .iter()
        .map(|k| match k {
            FeatureKind::Numeric => rng.random_range(-0.2..1.2),
            FeatureKind::Categorical { n_categories } => rng.random_range(0..*n_categories) as f64,
        })
        .collect()
}

fn check_partition(tree: &TreeModel, rules: &RuleSet, x: &FeatureMatrix, seed: u64) {
    assert_eq!(rules.rules.len(), tree.leaf_count());
    let coverage: usize = rules.rules.iter().map(|r| r.coverage).sum();
    assert_eq!(coverage, x.n_rows());
    assert_eq!(rules.n_train, x.n_rows());
    for r in &rules.rules {
        assert!(r.correct <= r.coverage);
    }
    let mut covered = vec![0usize; rules.rules.len()];
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let m = rules.matching(row);
        assert_eq!(m.len(), 1, "instance {i} matches {m:?}");
        covered[m[0]] += 1;
        assert_eq!(rules.rules[m[0]].leaf, tree.leaf_index(row));
        assert_eq!(rules.classify(row), Some(argmax(&tree.predict(row).unwrap())));
    }
    for (r, &c) in rules.rules.iter().zip(&covered) {
        assert_eq!(r.coverage, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let p = random_point(&mut rng, &tree.features);
        let m = rules.matching(&p);
        assert_eq!(m.len(), 1, "{p:?} matches {m:?}");
        assert_eq!(rules.rules[m[0]].leaf, tree.leaf_index(&p));
        assert_eq!(rules.rules[m[0]].class, argmax(&tree.predict(&p).unwrap()));
    }
}

#[test]
fn cart_and_random_tree_rules_partition_space() {
    for (state, n, seed) in [("Kerala", 261, 21), ("Uttarakhand", 104, 22), ("West Bengal", 32, 23)] {
        let (ds, _) = generate_cohort(&CohortSpec::new(state, n, seed)).unwrap();
        let cfg = pipeline(seed);
        let prepared = prepare(&ds, &cfg).unwrap();
        let x = FeatureMatrix::from_dataset(&prepared.data).unwrap();
        let tc = upm::learners::TrainConfig { seed, ..cfg.train };
        for tree in [train_cart_matrix(&x, &tc).unwrap(), train_random_tree_matrix(&x, &tc).unwrap()] {
            let rules = extract_rules(&tree, &prepared.data).unwrap();
            check_partition(&tree, &rules, &x, seed);
        }
    }
}

#[test]
fn categorical_splits_partition_space() {
    let (ds, _) = generate_cohort(&CohortSpec::new("Haryana", 350, 31)).unwrap();
    let cats: Vec<usize> = ds
        .attributes()
        .iter()
        .filter(|a| !a.kind.is_numeric())
        .map(|a| a.index)
        .collect();
    assert!(!cats.is_empty());
    let mut cols = cats.clone();
    cols.push(ds.attribute_index("LogicalScore").unwrap());
    let sub = ds.select_columns(&cols).unwrap();
    let rows = sub
        .rows()
        .iter()
        .map(|r| {
            r.iter()
                .zip(sub.attributes())
                .map(|(c, a)| match (c, a.kind.is_numeric()) {
                    (Cell::Missing, true) => Cell::Num(0.0),
                    (Cell::Missing, false) => Cell::Cat(0),
                    (c, _) => *c,
                })
                .collect()
        })
        .collect();
    let clean = Dataset::new(sub.meta().clone(), sub.attributes().to_vec(), rows, sub.labels().to_vec()).unwrap();
    let x = FeatureMatrix::from_dataset(&clean).unwrap();
    let tc = upm::learners::TrainConfig::with_seed(5);
    let tree = train_random_tree_matrix(&x, &tc).unwrap();
    let categorical_split = tree.nodes.iter().any(|n| {
        matches!(n, Node::Split { predicate, .. } if matches!(predicate.kind, SplitKind::CategoricalIn { .. }))
    });
    assert!(categorical_split);
    let rules = extract_rules(&tree, &clean).unwrap();
    check_partition(&tree, &rules, &x, 5);
}

#[test]
fn raw_unit_rules_agree_on_raw_rows() {
    let (ds, _) = generate_cohort(&CohortSpec::new("Karnataka", 310, 41)).unwrap();
    let model = train_upm(&ds, &pipeline(41)).unwrap();
    let transformed = model.transform.apply(&ds).unwrap();
    let x = FeatureMatrix::from_dataset(&transformed).unwrap();
    for source in [RuleSource::Cart, RuleSource::RandomTree, RuleSource::Forest] {
        let sets = model_rules(&model, &ds, source).unwrap();
        let trees: Vec<&TreeModel> = match source {
            RuleSource::Cart => vec![&model.members.cart],
            RuleSource::RandomTree => vec![&model.members.random_tree],
            RuleSource::Forest => model.members.random_forest.trees.iter().collect(),
        };
        assert_eq!(sets.len(), trees.len());
        for (rules, tree) in sets.iter().zip(trees) {
            assert_eq!(rules.rules.iter().map(|r| r.coverage).sum::<usize>(), ds.n_rows());
            for i in 0..ds.n_rows() {
                let raw: Vec<f64> = model
                    .transform
                    .kept
                    .iter()
                    .zip(&model.transform.impute)
                    .map(|(k, imp)| match (ds.row(i)[k.index], imp) {
                        (Cell::Missing, upm::preprocess::ImputeValue::Median(m)) => *m,
                        (Cell::Missing, upm::preprocess::ImputeValue::Mode(c)) => *c as f64,
                        (c, _) => c.as_f64().unwrap(),
                    })
                    .collect();
                let m = rules.matching(&raw);
                assert_eq!(m.len(), 1, "{} row {i}", rules.source);
                assert_eq!(rules.rules[m[0]].leaf, tree.leaf_index(x.row(i)));
            }
        }
    }
}
