use std::path::Path;

use deeplift::formats::{
    format_dataset, format_equivalence, format_loss_curve, format_vectors, parse_dataset, parse_vectors, VectorSample,
};
use deeplift::Error;
use deeplift_core::baselines::{equivalence_report, EnsembleSpec};
use deeplift_core::genomics::{generate_split, DatasetSpec, Split};
use deeplift_core::train::EpochStats;
use deeplift_core::{GraphBuilder, Inputs, Tensor};

#[test]
fn dataset_round_trip() {
    let spec = DatasetSpec {
        n_val: 20,
        substitution_rate: 0.1,
        ..DatasetSpec::default()
    };
    let data = generate_split(&spec, Split::Val).unwrap();
    let text = format_dataset(&data);
    assert!(text.starts_with(">val_0000 label=1 spans="));
    assert_eq!(parse_dataset(&text, Path::new("d.fa")).unwrap(), data);
}

#[test]
fn dataset_header_forms() {
    let text = "# comment\n>a label=0 spans=2-6:GATA\nACGATAC\nGT\n";
    let d = parse_dataset(text, Path::new("d.fa")).unwrap();
    assert_eq!(d[0].sequence, "ACGATACGT");
    for (bad, line) in [
        (">a label=2 spans=\nACGT\n", 1),
        (">a label=0 spans=0-4:GATA\nACGT\n>b label=1 spans=0-4:NOPE\nACGT\n", 3),
        ("ACGT\n", 1),
        (">a label=0 spans=0-4:GATA\nACGN\n", 1),
    ] {
        match parse_dataset(bad, Path::new("d.fa")) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
            other => panic!("{bad:?}: {other:?}"),
        }
    }
}

#[test]
fn vectors_round_trip_with_two_inputs() {
    let g = GraphBuilder::new()
        .input("a", &[2])
        .input("b", &[2])
        .product("p", "a", "b")
        .output("p")
        .build()
        .unwrap();
    let samples = vec![VectorSample {
        id: "s0".into(),
        inputs: Inputs::from([
            ("a".to_string(), Tensor::vector(vec![0.1, -2.5])),
            ("b".to_string(), Tensor::vector(vec![1e-300, 3.0])),
        ]),
    }];
    let text = format_vectors(&samples);
    assert!(text.starts_with("sample_id\ta:0\ta:1\tb:0\tb:1\n"));
    assert_eq!(parse_vectors(&text, &g, Path::new("v.tsv")).unwrap(), samples);
    let missing = "sample_id\ta:0\ta:1\tb:0\ns\t1\t2\t3\n";
    assert!(matches!(parse_vectors(missing, &g, Path::new("v.tsv")), Err(Error::Parse { line: 1, .. })));
    let short = "sample_id\ta:0\ta:1\tb:0\tb:1\ns\t1\t2\t3\n";
    assert!(matches!(parse_vectors(short, &g, Path::new("v.tsv")), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn tables_have_headers_and_one_row_per_item() {
    let curve = vec![
        EpochStats {
            epoch: 0,
            train_loss: 0.7,
            val_loss: Some(0.69),
            val_auroc: Some(0.6),
        },
        EpochStats {
            epoch: 1,
            train_loss: 0.5,
            val_loss: None,
            val_auroc: None,
        },
    ];
    let loss = format_loss_curve(&curve, 0);
    assert_eq!(loss.lines().nth(1), Some("epoch\ttrain_loss\tval_loss\tval_auroc"));
    assert_eq!(loss.lines().last(), Some("1\t0.5\tNA\tNA"));
    let spec = EnsembleSpec {
        nets: 3,
        ..EnsembleSpec::default()
    };
    let eq = format_equivalence(&equivalence_report(&spec, &[1e-2, 1e-9]).unwrap());
    let lines: Vec<&str> = eq.lines().collect();
    assert_eq!(lines[1], "net_id\teps=1e-2\teps=1e-9");
    assert_eq!(lines.len(), 5);
}
