use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdx_cli::model::Model;
use kdx_cli::table::{parse_csv, read_csv};
use kdx_core::density::{self, RidgeConvention, RidgeThreshold};
use kdx_core::hsic::{self, Direction, HsicConfig};
use kdx_core::toydata::{generate, ToySpec};
use ndarray::Array2;
use tempfile::TempDir;

fn kdx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdx"))
        .args(args)
        .current_dir(dir)
        .env_remove("KDX_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kdx(dir, args);
    assert!(
        out.status.success(),
        "kdx {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = kdx(dir, args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout:?}"))
        .parse()
        .unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn kernel_eval_prints_eight_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["kernel", "eval", "--family", "rbf", "--gamma", "0.5", "--x", "1,0", "--y", "0,0"]);
    assert_eq!(out, "0.60653066\n");
    let out = ok(dir.path(), &["kernel", "grad", "--family", "rbf", "--gamma", "0.5", "--x", "1,0", "--y", "0,0"]);
    assert_eq!(out, "-0.60653066,0.0\n");
    let out = ok(dir.path(), &["kernel", "eval", "--family", "poly", "--degree", "2", "--x", "1,1", "--y", "1,1"]);
    assert_eq!(out, "9.0\n");
}

#[test]
fn gpr_pipeline_interpolates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--name", "sine", "--n", "50", "--noise", "0", "--seed", "1", "--out", "d.csv"]);
    ok(d, &["gpr", "fit", "--data", "d.csv", "--noise-var", "0", "--model", "m.json"]);
    ok(d, &["gpr", "predict", "--model", "m.json", "--data", "d.csv", "--out", "p.csv"]);
    let data = read_csv(&path(&dir, "d.csv")).unwrap();
    let pred = read_csv(&path(&dir, "p.csv")).unwrap();
    assert_eq!(pred.header, ["x1", "mean", "var"]);
    for (a, b) in data.rows.iter().zip(&pred.rows) {
        assert!((a[1] - b[1]).abs() <= 1e-6, "{} vs {}", a[1], b[1]);
    }

    let Model::Gpr(m) = Model::load(&path(&dir, "m.json")).unwrap() else {
        panic!("expected a gpr model")
    };
    for r in &pred.rows {
        assert_eq!(r[1], m.predict_mean(&r[..1]).unwrap());
        assert_eq!(r[2], m.predict_var(&r[..1]).unwrap());
    }

    let sens = ok(d, &["gpr", "sens", "--model", "m.json", "--out", "s.csv", "--svg", "s.svg"]);
    let field = m.gradient_field(m.x_train()).unwrap();
    let s = read_csv(&path(&dir, "s.csv")).unwrap();
    assert_eq!(s.header, ["x1", "dfdx1", "point_sens"]);
    for (i, r) in s.rows.iter().enumerate() {
        assert_eq!(r[1], field.values()[[i, 0]]);
    }
    assert!((value(&sens, "sens_x1") - field.feature_sensitivity()[0]).abs() <= 1e-7 * field.feature_sensitivity()[0]);
    let svg = std::fs::read_to_string(path(&dir, "s.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("marker-end"));

    let norms = ok(d, &["gpr", "norms", "--model", "m.json"]);
    let n = m.regularizer_norms();
    for (key, v) in [("h_norm", n.h_norm), ("grad_norm", n.grad_norm)] {
        assert!((value(&norms, key) - v).abs() <= 1e-7 * v.abs());
    }
}

#[test]
fn svm_wrappers_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--name", "two_moons", "--n", "80", "--noise", "0.1", "--seed", "2", "--out", "m.csv"]);
    let train = ok(d, &["svm", "train", "--data", "m.csv", "--c", "10", "--gamma", "2", "--model", "s.json"]);
    assert_eq!(value(&train, "c"), 10.0);
    assert!(train.contains("converged true"));
    ok(d, &["svm", "sens", "--model", "s.json", "--data", "m.csv", "--out", "g.csv", "--svg", "g.svg"]);
    let Model::Svm(m) = Model::load(&path(&dir, "s.json")).unwrap() else {
        panic!("expected an svm model")
    };
    let g = read_csv(&path(&dir, "g.csv")).unwrap();
    assert_eq!(g.header, ["x1", "x2", "decision", "mask", "dfdx1", "dfdx2", "grad1", "grad2"]);
    for r in &g.rows {
        let sg = m.smooth_decision_gradient(&r[..2]).unwrap();
        assert_eq!(r[2], sg.decision);
        assert_eq!(r[3], sg.mask_term);
        assert_eq!(&r[4..6], sg.kernel_grad.as_slice());
        assert_eq!(&r[6..8], sg.full_grad.as_slice());
    }
    let acc = ok(d, &["svm", "predict", "--model", "s.json", "--data", "m.csv", "--out", "p.csv"]);
    assert!(value(&acc, "accuracy") > 0.9);
}

#[test]
fn density_ridge_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--name", "two_moons", "--n", "120", "--noise", "0.05", "--seed", "4", "--out", "r.csv"]);
    ok(d, &["density", "fit", "--data", "r.csv", "--mode", "keca", "--rank", "8", "--model", "k.json"]);
    let out = ok(d, &["density", "ridge", "--model", "k.json", "--quantile", "0.1", "--out", "ridge.csv", "--svg", "r.svg"]);
    let Model::Density(m) = Model::load(&path(&dir, "k.json")).unwrap() else {
        panic!("expected a density model")
    };
    let res = density::ridge_scores(&m, m.x_train(), 1, RidgeConvention::Trailing, RidgeThreshold::Quantile { q: 0.1 }).unwrap();
    let t = read_csv(&path(&dir, "ridge.csv")).unwrap();
    assert_eq!(t.header, ["index", "score", "selected"]);
    for (i, r) in t.rows.iter().enumerate() {
        assert_eq!(r[1], res.scores[i]);
        assert_eq!(r[2] == 1.0, res.selected.contains(&i));
    }
    assert_eq!(value(&out, "selected") as usize, res.selected.len());

    ok(d, &["density", "eval", "--model", "k.json", "--data", "r.csv", "--out", "e.csv"]);
    let e = read_csv(&path(&dir, "e.csv")).unwrap();
    assert_eq!(e.header, ["x1", "x2", "density", "dpdx1", "dpdx2"]);
    assert_eq!(e.rows[0][2], m.density_at(&e.rows[0][..2]).unwrap());
}

#[test]
fn hsic_wrappers_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--name", "sinusoid_pair", "--n", "40", "--noise", "0.1", "--seed", "3", "--out", "p.csv"]);
    let data = generate(&ToySpec::named("sinusoid_pair", 40, 0.1, 3).unwrap()).unwrap();
    let y = Array2::from_shape_vec((40, 1), data.y.clone()).unwrap();
    let cfg = HsicConfig::median_heuristic(&data.x, &y).unwrap();

    let v = ok(d, &["hsic", "value", "--data", "p.csv"]);
    let h = hsic::hsic(&data.x, &y, &cfg).unwrap();
    assert!((v.trim().parse::<f64>().unwrap() - h).abs() <= 1e-7 * h);

    let p = ok(d, &["hsic", "pvalue", "--data", "p.csv", "--perms", "49", "--seed", "5"]);
    assert_eq!(value(&p, "p_value"), hsic::permutation_pvalue(&data.x, &y, &cfg, 49, 5).unwrap());

    ok(d, &["hsic", "unfold", "--data", "p.csv", "--direction", "minimize", "--iters", "10", "--coords", "--out", "u.csv"]);
    let tr = hsic::unfold(&data.x, &y, &cfg, Direction::Minimize, None, 10).unwrap();
    let u = read_csv(&path(&dir, "u.csv")).unwrap();
    assert_eq!(u.rows.len(), tr.states.len());
    assert_eq!(&u.header[..5], ["iter", "hsic", "step", "x1_1", "y1_1"]);
    for (r, s) in u.rows.iter().zip(&tr.states) {
        assert_eq!(r[1], s.hsic);
        assert_eq!(r[3], s.x[[0, 0]]);
    }

    ok(d, &["hsic", "grad", "--data", "p.csv", "--out", "g.csv"]);
    let f = hsic::hsic_grad(&data.x, &y, &cfg).unwrap();
    let g = read_csv(&path(&dir, "g.csv")).unwrap();
    assert_eq!(g.header, ["gx1", "gy1", "magnitude"]);
    assert_eq!(g.rows[7][0], f.grad_x[[7, 0]]);

    let split = ok(d, &["hsic", "value", "--data", "p.csv", "--split", "1"]);
    assert_eq!(split, v);
}

#[test]
fn constant_target_has_zero_hsic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(path(&dir, "c.csv"), "x1,y\n0.1,2\n0.5,2\n-0.3,2\n0.9,2\n").unwrap();
    assert_eq!(ok(dir.path(), &["hsic", "value", "--data", "c.csv"]), "0.0\n");
}

#[test]
fn gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &["gen", "--name", "circles", "--n", "30", "--noise", "0.1", "--seed", "9"]);
    let b = ok(dir.path(), &["gen", "--name", "circles", "--n", "30", "--noise", "0.1", "--seed", "9"]);
    let c = ok(dir.path(), &["gen", "--name", "circles", "--n", "30", "--noise", "0.1", "--seed", "10"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let t = parse_csv(&a).unwrap();
    assert_eq!(t.header, ["x1", "x2", "label"]);
    assert_eq!(t.rows.len(), 30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--version"]).0, 0);
    assert_eq!(code(d, &["frobnicate"]).0, 1);
    assert_eq!(code(d, &["kernel", "eval", "--x", "1", "--y", "1", "--bogus"]).0, 1);
    let (c, err) = code(d, &["kernel", "eval", "--family", "linear", "--gamma", "1", "--x", "1", "--y", "1"]);
    assert_eq!(c, 1);
    assert!(err.contains("--gamma does not apply"));
    assert_eq!(code(d, &["kernel", "eval", "--family", "rbf", "--gamma", "-1", "--x", "1", "--y", "1"]).0, 1);

    std::fs::write(path(&dir, "bad.csv"), "x1,y\n1,2\n3,oops\n").unwrap();
    let (c, err) = code(d, &["gpr", "fit", "--data", "bad.csv", "--model", "m.json"]);
    assert_eq!(c, 1);
    assert!(err.contains("line 3"), "{err}");
    std::fs::write(path(&dir, "empty.csv"), "x1,y\n").unwrap();
    let (c, err) = code(d, &["gpr", "fit", "--data", "empty.csv", "--model", "m.json"]);
    assert_eq!(c, 1);
    assert!(err.contains("no rows"));

    std::fs::write(path(&dir, "one.csv"), "x1,label\n0,1\n1,1\n").unwrap();
    let (c, err) = code(d, &["svm", "train", "--data", "one.csv", "--c", "1", "--gamma", "1", "--model", "s.json"]);
    assert_eq!(c, 2, "{err}");

    std::fs::write(path(&dir, "p.csv"), "x1,y\n0,1\n1,2\n2,0\n").unwrap();
    let (c, _) = code(d, &["hsic", "pvalue", "--data", "p.csv", "--perms", "5"]);
    assert_eq!(c, 2);
    let out = Command::new(env!("CARGO_BIN_EXE_kdx"))
        .args(["gen", "--name", "sine", "--n", "3"])
        .env("KDX_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn model_kind_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--name", "line", "--n", "10", "--out", "l.csv"]);
    ok(d, &["gpr", "fit", "--data", "l.csv", "--gamma", "1", "--noise-var", "0.1", "--model", "g.json"]);
    let (c, err) = code(d, &["svm", "predict", "--model", "g.json", "--data", "l.csv"]);
    assert_eq!(c, 1);
    assert!(err.contains("expected a svm model"), "{err}");
}
