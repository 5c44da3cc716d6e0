use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use twostep_core::io::{read_draws, read_sbc_table, Table};

fn twostep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twostep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(cmd: &str, toml: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, toml).unwrap();
    let out = dir.join("out");
    let mut args = vec![cmd, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    twostep(&args)
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).expect("error is JSON")
}

fn read_table(path: &Path) -> Table {
    Table::read_csv(fs::File::open(path).unwrap()).unwrap()
}

const SMALL_CASE1: &str = r#"
kind = "case1"
seed = 11

[case1]
sigma_a = [0.1, 1.0]
n_components = 64
grid_points = 21

[case1.sampler]
n_chains = 2
n_warmup = 300
n_post = 300

[case1.epost_sampler]
n_chains = 2
n_warmup = 200
n_post = 20
"#;

#[test]
fn negative_sigma_a_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        "run",
        "kind = \"case1\"\n[case1]\nsigma_a = [0.5, -1.0]\n",
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "schema");
    assert!(e["error"]["message"].as_str().unwrap().contains("sigma_a"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_and_wrong_command_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("run", "kind = \"case1\"\nsigmaa = 1\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_config("sbc", "kind = \"case1\"\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_config("timing", "kind = \"case1\"\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_config("run", "kind = \"case1\"\n", dir.path(), &["--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn counterexample_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("run", "kind = \"counterexample\"\n", dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/discrete_posterior.json")).unwrap())
            .unwrap();
    assert_eq!(v["epost"][0], "5/12");
    assert_eq!(v["elik"][0], "3/7");
}

#[test]
fn case1_outputs_are_reproducible_and_readable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run_config("run", SMALL_CASE1, a.path(), &[]);
    assert!(
        oa.status.success(),
        "{}",
        String::from_utf8_lossy(&oa.stderr)
    );
    let ob = run_config("run", SMALL_CASE1, b.path(), &["--jobs", "2"]);
    assert!(
        ob.status.success(),
        "{}",
        String::from_utf8_lossy(&ob.stderr)
    );

    let mut names: Vec<String> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "density_grid.csv",
            "iposterior_elik.csv",
            "iposterior_eloglik.csv",
            "iposterior_epost.csv",
            "iposterior_point.csv",
            "tposterior.csv"
        ]
    );
    for n in &names {
        assert_eq!(
            fs::read(a.path().join("out").join(n)).unwrap(),
            fs::read(b.path().join("out").join(n)).unwrap(),
            "{n} differs between runs"
        );
    }

    let prov: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("out/provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 11);
    assert_eq!(prov["files"].as_object().unwrap().len(), names.len());
    assert!(prov["created_unix"].as_u64().unwrap() > 0);

    let t = read_table(&a.path().join("out/iposterior_point.csv"));
    assert_eq!(t.header, ["sigma_a", "draw", "omega0"]);
    let draws = read_draws(&t, &["omega0".to_string()]).unwrap();
    assert_eq!(draws.len(), 2 * 600);
    assert!(draws.iter().all(|d| d[0].is_finite()));

    let g = read_table(&a.path().join("out/density_grid.csv"));
    assert_eq!(g.len(), 2 * 4 * 21);
    assert!(g.column_f64("density").unwrap().iter().all(|d| *d >= 0.0));

    // A different seed changes the draws.
    let c = tempfile::tempdir().unwrap();
    let oc = run_config("run", SMALL_CASE1, c.path(), &["--seed", "12"]);
    assert!(oc.status.success());
    assert_ne!(
        fs::read(a.path().join("out/iposterior_elik.csv")).unwrap(),
        fs::read(c.path().join("out/iposterior_elik.csv")).unwrap()
    );
}

#[test]
fn poor_mixing_exits_4_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
kind = "case2-logistic"
seed = 3
[logistic]
methods = ["point"]
[logistic.train_sampler]
n_chains = 4
n_warmup = 10
n_post = 10
[logistic.sampler]
n_chains = 2
n_warmup = 50
n_post = 50
"#;
    let o = run_config("run", toml, dir.path(), &[]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(error_json(&o)["error"]["kind"], "convergence");
    for f in ["tposterior.csv", "iposterior_point.csv", "provenance.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
}

#[test]
fn zero_counts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
kind = "case3-sir"
[sir]
time_span = [100.0, 200.0]
n_i = 10
methods = ["point"]
[sir.train_sampler]
n_chains = 2
n_warmup = 100
n_post = 100
"#;
    let o = run_config("run", toml, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["kind"], "numerical");
    assert!(!dir.path().join("out/provenance.json").exists());
}

#[test]
fn sbc_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
kind = "sbc"
seed = 5
[sbc]
case = "logistic-cheat"
n_t_trials = 2
n_i_trials = 3
k_eff = 19
methods = ["point", "elik"]
n_sim = 200
[sbc.sampler]
n_chains = 2
n_warmup = 200
n_post = 200
"#;
    let o = run_config("sbc", toml, dir.path(), &[]);
    assert!(
        matches!(o.status.code(), Some(0 | 4)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let t = read_table(&dir.path().join("out/sbc_records.csv"));
    let recs = read_sbc_table(&t).unwrap();
    assert_eq!(recs.len(), 2 * 2 * 3);
    assert!(recs.iter().all(|(_, r)| r.rank <= 19 && r.k_eff == 19));
    assert!(recs.iter().all(|(_, r)| r.sharpness > 0.0));
    // Both methods see the same truths.
    let truths = |m: &str| -> Vec<f64> {
        recs.iter()
            .filter(|(k, _)| k == m)
            .map(|(_, r)| r.omega_star)
            .collect()
    };
    assert_eq!(truths("point"), truths("elik"));

    let s: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/sbc_summary.json")).unwrap())
            .unwrap();
    assert_eq!(s["methods"].as_array().unwrap().len(), 2);
    assert!(s["methods"][0]["dims"][0]["log_gamma"].is_number());
    assert!(dir.path().join("out/sbc_ecdf.csv").exists());
}
