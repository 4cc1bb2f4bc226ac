//! Datasets survive a write/read cycle through CSV.

use upm::data::{DatasetMeta, DEFAULT_LABEL_COLUMN};
use upm::synth::{generate_cohort, write_cohort, CohortSpec};
use upm::{load_csv, read_csv, Cell, Schema};

#[test]
fn generated_cohort_roundtrips_with_schema_hints() {
    let spec = CohortSpec {
        missing_rate: 0.1,
        ..CohortSpec::new("Tamil Nadu", 287, 3)
    };
    let (ds, truth) = generate_cohort(&spec).unwrap();
    assert!(ds.has_missing());
    let dir = tempfile::tempdir().unwrap();
    write_cohort(dir.path(), &ds, &truth).unwrap();
    let path = dir.path().join("tamil_nadu.csv");
    let back = load_csv(&path, &Schema::from_dataset(&ds, DEFAULT_LABEL_COLUMN)).unwrap();
    assert_eq!(back.attributes(), ds.attributes());
    assert_eq!(back.rows(), ds.rows());
    assert_eq!(back.labels(), ds.labels());
    let truth_text = std::fs::read_to_string(dir.path().join("tamil_nadu.truth.json")).unwrap();
    assert_eq!(serde_json::from_str::<upm::synth::GeneratorTruth>(&truth_text).unwrap(), truth);
}

#[test]
fn numeric_columns_roundtrip_without_hints() {
    let (ds, _) = generate_cohort(&CohortSpec::new("Kerala", 261, 8)).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf, DEFAULT_LABEL_COLUMN).unwrap();
    let meta = DatasetMeta {
        name: "kerala".into(),
        source: "memory".into(),
    };
    let back = read_csv(buf.as_slice(), meta, &Schema::default()).unwrap();
    assert_eq!(back.n_rows(), ds.n_rows());
    assert_eq!(back.labels(), ds.labels());
    for (j, a) in ds.attributes().iter().enumerate() {
        assert_eq!(back.attributes()[j].name, a.name);
        if a.kind.is_numeric() {
            assert!(back.attributes()[j].kind.is_numeric(), "{}", a.name);
            for i in 0..ds.n_rows() {
                match (ds.row(i)[j], back.row(i)[j]) {
                    (Cell::Num(x), Cell::Num(y)) => assert_eq!(x.to_bits(), y.to_bits()),
                    (Cell::Missing, Cell::Missing) => {}
                    (x, y) => panic!("{} row {i}: {x:?} vs {y:?}", a.name),
                }
            }
        } else {
            for i in 0..ds.n_rows() {
                assert_eq!(ds.render_cell(j, &ds.row(i)[j]), back.render_cell(j, &back.row(i)[j]));
            }
        }
    }
}

#[test]
fn malformed_input_is_rejected() {
    let meta = || DatasetMeta {
        name: "bad".into(),
        source: "memory".into(),
    };
    let ragged = "a,b,placement_status\n1,2,Placed\n3,Unplaced\n";
    assert!(read_csv(ragged.as_bytes(), meta(), &Schema::default()).is_err());
    let no_label = "a,b\n1,2\n";
    assert!(read_csv(no_label.as_bytes(), meta(), &Schema::default()).is_err());
    let bad_label = "a,placement_status\n1,Maybe\n";
    assert!(read_csv(bad_label.as_bytes(), meta(), &Schema::default()).is_err());
    let empty = "a,placement_status\n";
    assert!(read_csv(empty.as_bytes(), meta(), &Schema::default()).is_err());
}
