use std::path::Path;
use std::process::{Command, Output};

use deeplift::model_io::save_model;
use deeplift_core::{forward, GraphBuilder, Inputs, Tensor};

fn deeplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deeplift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_gen(out: &Path) -> Output {
    deeplift(&[
        "gen-data", "--n-train", "40", "--n-val", "10", "--n-test", "10", "--seed", "7", "--output", p(out),
    ])
}

#[test]
fn gen_data_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_gen(&a).status.success());
    assert!(small_gen(&b).status.success());
    for f in ["train.fa", "val.fa", "test.fa"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("a.manifest")).unwrap();
    assert!(manifest.contains("command = \"gen-data\"") && manifest.contains("n_train = 40"), "{manifest}");
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = deeplift(&["gen-data", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    let line = stderr(&unknown);
    assert_eq!(line.lines().count(), 1, "{line}");
    assert!(line.starts_with("error\tusage\t2\t"), "{line}");

    let missing = deeplift(&["normalize", "--model", "/nonexistent.json", "--output", p(&dir.path().join("o.json"))]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).starts_with("error\tmissing-file\t3\t"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = -1.0\n").unwrap();
    assert!(small_gen(&dir.path().join("d")).status.success());
    let invalid = deeplift(&[
        "train", "--data", p(&dir.path().join("d")), "--config", p(&cfg), "--output", p(&dir.path().join("m.json")),
    ]);
    assert_eq!(invalid.status.code(), Some(4), "{}", stderr(&invalid));
    std::fs::write(&cfg, "[train]\nlearning_rat = 0.1\n").unwrap();
    let typo = deeplift(&[
        "train", "--data", p(&dir.path().join("d")), "--config", p(&cfg), "--output", p(&dir.path().join("m.json")),
    ]);
    assert_eq!(typo.status.code(), Some(4), "{}", stderr(&typo));

    assert_eq!(deeplift(&["--help"]).status.code(), Some(0));
}

fn toy_model(dir: &Path) -> std::path::PathBuf {
    let g = GraphBuilder::new()
        .input("x", &[3])
        .affine("h", "x", Tensor::matrix(&[&[1.0, -2.0, 0.5], &[0.3, 0.8, -1.0]]), vec![0.2, -0.1])
        .prelu("a", "h", vec![0.3])
        .affine("y", "a", Tensor::matrix(&[&[1.5, -0.7]]), vec![0.05])
        .sigmoid("p", "y")
        .output("p")
        .build()
        .unwrap();
    let path = dir.join("toy.json");
    save_model(&path, &g).unwrap();
    path
}

#[test]
fn deeplift_attribution_table_reports_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let model = toy_model(dir.path());
    let data = dir.path().join("x.tsv");
    std::fs::write(&data, "sample_id\tx:0\tx:1\tx:2\ns0\t1\t2\t3\ns1\t-1\t0.5\t0\ns2\t0\t0\t0\n").unwrap();
    let out = dir.path().join("scores.tsv");
    let o = deeplift(&["attribute", "--model", p(&model), "--data", p(&data), "--method", "deeplift", "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let col = header.iter().position(|h| *h == "residual").unwrap();
    let mut rows = 0;
    for l in lines {
        let residual: f64 = l.split('\t').nth(col).unwrap().parse().unwrap();
        assert!(residual < 1e-6, "{l}");
        rows += 1;
    }
    assert_eq!(rows, 9);
    assert!(text.starts_with("# method=deeplift target=y[0]"), "{text}");
    assert!(Path::new(&format!("{}.manifest", out.display())).exists());
}

#[test]
fn check_lrp_deviations_fall_with_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.tsv");
    let o = deeplift(&["check-lrp", "--nets", "20", "--epsilons", "1e-2,1e-5,1e-9", "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split('\t').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    let falling = rows.iter().filter(|r| r[0] > r[1] && r[1] > r[2]).count();
    assert!(falling >= 19, "{falling}/20");
}

#[test]
fn normalize_keeps_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let g = GraphBuilder::new()
        .input("x", &[3])
        .affine("z", "x", Tensor::matrix(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0], &[0.3, 0.3, -0.4]]), vec![0.1, 0.0, -0.2])
        .softmax("p", "z")
        .output("p")
        .build()
        .unwrap();
    let model = dir.path().join("m.json");
    save_model(&model, &g).unwrap();
    let out = dir.path().join("n.json");
    let o = deeplift(&["normalize", "--model", p(&model), "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("softmax-mean"));
    let n = deeplift::model_io::load_model(&out).unwrap();
    assert_ne!(n, g);
    for x in [[0.5, -1.0, 2.0], [3.0, 0.0, -0.1]] {
        let i = Inputs::from([("x".to_string(), Tensor::vector(x.to_vec()))]);
        let d = forward(&g, &i).unwrap().output().max_abs_diff(forward(&n, &i).unwrap().output());
        assert!(d < 1e-12);
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(small_gen(&data).status.success());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepochs = 2\n\n[model]\nhidden = 8\nfilters = 4\n").unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let model = dir.path().join(format!("m{threads}.json"));
        let o = deeplift(&[
            "train", "--data", p(&data), "--config", p(&cfg), "--threads", threads, "--output", p(&model),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = dir.path().join(format!("c{threads}.tsv"));
        let tracks = dir.path().join(format!("t{threads}.tsv"));
        let o = deeplift(&[
            "compare", "--model", p(&model), "--data", p(&data.join("test.fa")), "--threads", threads,
            "--output", p(&table), "--tracks", p(&tracks),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let scores = dir.path().join(format!("s{threads}.tsv"));
        let o = deeplift(&[
            "attribute", "--model", p(&model), "--data", p(&data.join("val.fa")), "--normalize", "--threads", threads,
            "--output", p(&scores),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push([model, table, scores].map(|f| std::fs::read(f).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}
