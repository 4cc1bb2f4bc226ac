//! Preprocessing inside cross-validation sees only the training split.

use upm::ensemble::{prepare, PipelineConfig};
use upm::evaluate::{cross_validate, EvalConfig};
use upm::synth::{generate_cohort, CohortSpec};
use upm::{Cell, Dataset, Label};

fn cohort() -> Dataset {
    generate_cohort(&CohortSpec::new("Uttarakhand", 104, 77)).unwrap().0
}

fn cfg() -> EvalConfig {
    let mut cfg = EvalConfig::default();
    cfg.pipeline.seed = 5;
    cfg.pipeline.train.forest.n_trees = 10;
    cfg
}

#[test]
fn fold_selection_equals_refit_on_training_split() {
    let ds = cohort();
    let rep = cross_validate(&ds, &cfg()).unwrap();
    for f in &rep.fold_reports {
        let (train, _) = rep.fold_plan.split(f.fold);
        let pc = PipelineConfig {
            seed: f.seed,
            ..cfg().pipeline
        };
        let p = prepare(&ds.subset(&train).unwrap(), &pc).unwrap();
        let names: Vec<String> = p.data.attributes().iter().map(|a| a.name.clone()).collect();
        assert_eq!(names, f.selected, "fold {}", f.fold);
    }
}

#[test]
fn test_rows_do_not_influence_the_fitted_transform() {
    let ds = cohort();
    let rep = cross_validate(&ds, &cfg()).unwrap();
    let (train, test) = rep.fold_plan.split(0);
    let pc = PipelineConfig {
        seed: rep.fold_reports[0].seed,
        ..cfg().pipeline
    };
    let base = prepare(&ds.subset(&train).unwrap(), &pc).unwrap();

    let mut labels = ds.labels().to_vec();
    let mut rows: Vec<Vec<Cell>> = ds.rows().to_vec();
    for &i in &test {
        labels[i] = labels[i].other();
        for (c, a) in rows[i].iter_mut().zip(ds.attributes()) {
            if a.kind.is_numeric() {
                *c = Cell::Num(1e6);
            }
        }
    }
    let tampered = Dataset::new(ds.meta().clone(), ds.attributes().to_vec(), rows, labels).unwrap();
    let again = prepare(&tampered.subset(&train).unwrap(), &pc).unwrap();
    assert_eq!(base.transform, again.transform);
    assert_eq!(base.data, again.data);

    let t1 = base.transform.apply(&ds.subset(&test).unwrap()).unwrap();
    let flipped = ds.subset(&test).unwrap();
    let flipped = flipped
        .with_labels(flipped.labels().iter().map(|l| l.other()).collect())
        .unwrap();
    let t2 = base.transform.apply(&flipped).unwrap();
    assert_eq!(t1.rows(), t2.rows());
    assert_ne!(t1.labels(), t2.labels());
}

#[test]
fn transform_is_row_local() {
    let ds = cohort();
    let pc = cfg().pipeline;
    let p = prepare(&ds, &pc).unwrap();
    let whole = p.transform.apply(&ds).unwrap();
    for i in [0usize, 17, 103] {
        let one = p.transform.apply(&ds.subset(&[i]).unwrap()).unwrap();
        assert_eq!(one.row(0), whole.row(i));
        assert_eq!(one.labels()[0], ds.labels()[i]);
    }
    let scaled_ok = whole.rows().iter().flatten().all(|c| match c {
        Cell::Num(v) => (0.0..=1.0).contains(v),
        Cell::Cat(_) => true,
        Cell::Missing => false,
    });
    assert!(scaled_ok);
    assert!(whole.labels().contains(&Label::Placed));
}
