use std::path::Path;
use std::process::{Command, Output};

use rank1_phase::potential::{potential_curve, stationary_points};
use rank1_phase::{Model, Prior};
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rank1-phase");

fn rank1(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(dir).env_remove("RANK1_PHASE_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = rank1(dir, args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Self {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
        Self { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    fn f64s(&self, name: &str) -> Vec<f64> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].parse().unwrap()).collect()
    }

    fn strs(&self, name: &str) -> Vec<&str> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].as_str()).collect()
    }
}

fn metadata(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().take_while(|l| l.starts_with('#')).map(String::from).collect()
}

#[test]
fn potential_shows_the_four_regimes_and_reads_back_exactly() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["potential"]);

    let sp = Table::read(&tmp.path().join("stationary_points.csv"));
    let deltas = [0.0008, 0.0012, 0.00125, 0.0015];
    let sd = sp.f64s("delta");
    let count = |d: f64| sd.iter().filter(|&&x| x == d).count();
    assert_eq!([count(deltas[0]), count(deltas[1]), count(deltas[2])], [1, 3, 3]);
    assert!(count(deltas[3]) >= 1);
    // the global minimum moves from the good to the bad branch
    let best: Vec<(f64, &str)> = sp
        .strs("global_minimum")
        .iter()
        .zip(sp.strs("branch"))
        .zip(&sd)
        .filter(|((g, _), _)| **g == "true")
        .map(|((_, b), &d)| (d, b))
        .collect();
    assert!(best.contains(&(0.0012, "good")) && best.contains(&(0.00125, "bad")), "{best:?}");

    let model = Model::new(Prior::bernoulli(0.02).unwrap());
    let curve = Table::read(&tmp.path().join("potential.csv"));
    let (d, e, i) = (curve.f64s("delta"), curve.f64s("e"), curve.f64s("i_rs"));
    assert_eq!(d.len(), 4 * 1001);
    for (k, &delta) in deltas.iter().enumerate() {
        let mem = potential_curve(&model, delta, 1001).unwrap();
        for (j, &(me, mi)) in mem.grid.iter().enumerate() {
            let r = k * 1001 + j;
            assert_eq!(d[r], delta);
            assert!((e[r] - me).abs() <= 1e-12 && (i[r] - mi).abs() <= 1e-12, "row {r}");
        }
        let mem_sp = stationary_points(&model, delta).unwrap();
        let file: Vec<f64> = sd.iter().zip(sp.f64s("e")).filter(|(&x, _)| x == delta).map(|(_, e)| e).collect();
        let want: Vec<f64> = mem_sp.points.iter().map(|p| p.e).collect();
        assert_eq!(file, want);
    }

    let meta = metadata(&tmp.path().join("potential.csv"));
    for key in ["# version: rank1-phase", "# command: potential", "# seed: 0", "# config-hash: "] {
        assert!(meta.iter().any(|l| l.starts_with(key)), "{meta:?}");
    }
}

#[test]
fn dirac_potential_has_one_minimum_at_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "d.toml", "[prior]\npreset = \"dirac\"\nvalue = 1.3\n[grid]\ndelta = [0.5]\n");
    ok(tmp.path(), &["potential", "--config", &cfg]);
    let sp = Table::read(&tmp.path().join("stationary_points.csv"));
    assert_eq!(sp.rows.len(), 1);
    assert_eq!(sp.strs("kind"), ["minimum"]);
    assert!(sp.f64s("e")[0].abs() <= 1e-12);
    let curve = Table::read(&tmp.path().join("potential.csv"));
    let i = curve.f64s("i_rs");
    assert!(i.windows(2).all(|w| w[1] >= w[0]), "increasing away from E = 0");
}

#[test]
fn thresholds_json_bracket_and_infinite_values() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["thresholds"]);
    let read = |p: &Path| -> Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let th = read(&tmp.path().join("thresholds.json"));
    let amp = th["delta_amp"].as_f64().unwrap();
    let rs = th["delta_rs"].as_f64().unwrap();
    assert!(0.0008 < amp && amp < 0.0012, "{th}");
    assert!(0.0012 < rs && rs < 0.00125, "{th}");
    assert_eq!(th["order"], "first-order");
    assert_eq!(th["metadata"]["command"], "thresholds");

    let cfg = write(tmp.path(), "b.toml", "[prior]\npreset = \"bernoulli\"\nrho = 0.5\n");
    let other = tmp.path().join("half");
    ok(&other, &["thresholds", "--config", &cfg]);
    let th = read(&other.join("thresholds.json"));
    assert_eq!(th["delta_rs"], "inf", "{th}");
    assert_eq!(th["delta_spectral"].as_f64(), Some(0.25));
}

#[test]
fn bernoulli_phase_diagram_has_spectral_threshold_rho_squared() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "pd.toml",
        "[grid]\nfamily = \"bernoulli\"\nrho = { min = 0.03, max = 0.5, points = 6, spacing = \"log\" }\n",
    );
    let summary = ok(tmp.path(), &["phase-diagram", "--config", &cfg]);
    assert_eq!(summary["status"], "ok");
    let t = Table::read(&tmp.path().join("phase_diagram.csv"));
    let rho = t.f64s("rho");
    assert_eq!(rho.len(), 6);
    assert_eq!((rho[0], rho[5]), (0.03, 0.5));
    assert!(rho.windows(2).all(|w| w[0] < w[1]), "grid order");
    for (r, s) in rho.iter().zip(t.f64s("delta_spectral")) {
        assert_eq!(s, r * r);
    }
    // first-order at small density, not at large
    assert_eq!(t.strs("first_order")[0], "true");
    assert_eq!(t.strs("first_order")[5], "false");
}

#[test]
fn small_rho_probe_writes_descending_densities() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "pd.toml", "[grid]\nrho = [0.2]\n");
    ok(tmp.path(), &["phase-diagram", "--config", &cfg, "--small-rho", "2"]);
    let t = Table::read(&tmp.path().join("small_rho.csv"));
    let rho = t.f64s("rho");
    assert_eq!(rho.len(), 2);
    assert!((rho[0] - 1e-2).abs() < 1e-15 && (rho[1] - 1e-4).abs() < 1e-17, "{rho:?}");
    for (r, (d, s)) in rho.iter().zip(t.f64s("delta_opt").into_iter().zip(t.f64s("scaled"))) {
        assert!((s - d * 4.0 * r * r.ln().abs()).abs() <= 1e-12 * s);
    }
}

#[test]
fn se_trajectory_ends_on_the_good_branch() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "se.toml", "[grid]\ndelta = [0.0008]\n");
    ok(tmp.path(), &["se", "--config", &cfg]);
    let t = Table::read(&tmp.path().join("se.csv"));
    let e = t.f64s("e");
    assert!((e[0] - 0.02).abs() < 1e-15, "starts at v");
    let model = Model::new(Prior::bernoulli(0.02).unwrap());
    let e_good = stationary_points(&model, 0.0008).unwrap().points[0].e;
    let last = *e.last().unwrap();
    assert!((last - e_good).abs() <= 1e-8, "{last} vs {e_good}");
    let fp = Table::read(&tmp.path().join("se_fixed_points.csv"));
    assert_eq!(fp.strs("converged"), ["true"]);
}

#[test]
fn amp_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "amp.toml", "[grid]\ndelta = [0.0008]\n[geometry]\nn = 500\n[run]\ninstances = 2\n");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&a, &["amp", "--config", &cfg, "--seed", "4"]);
    ok(&b, &["amp", "--config", &cfg, "--seed", "4"]);
    ok(&c, &["amp", "--config", &cfg, "--seed", "5"]);
    for name in ["amp_trace.csv", "amp_summary.csv", "config.toml"] {
        let read = |d: &Path| std::fs::read(d.join(name)).unwrap();
        assert_eq!(read(&a), read(&b), "{name}");
    }
    assert_ne!(std::fs::read(a.join("amp_trace.csv")).unwrap(), std::fs::read(c.join("amp_trace.csv")).unwrap());
    let s = Table::read(&a.join("amp_summary.csv"));
    assert_eq!(s.rows.len(), 2);
    let trace = Table::read(&a.join("amp_trace.csv"));
    assert!(trace.strs("se_prediction").iter().all(|p| !p.is_empty()));
}

#[test]
fn coupled_amp_reports_every_block() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[grid]\ndelta = [0.5]\n[geometry]\nn = 50\nl = 8\nw = 2\n");
    ok(tmp.path(), &["amp", "--config", &cfg]);
    let b = Table::read(&tmp.path().join("amp_blocks.csv"));
    assert_eq!(b.rows.len(), 9);
    let trace = Table::read(&tmp.path().join("amp_trace.csv"));
    assert!(trace.strs("se_prediction").iter().all(|p| p.is_empty()));
}

#[test]
fn coupled_se_needs_a_chain_and_writes_profiles() {
    let tmp = TempDir::new().unwrap();
    let out = rank1(tmp.path(), &["coupled-se"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert!(err["error"].as_str().unwrap().contains("geometry.l"));

    let cfg = write(tmp.path(), "c.toml", "[grid]\ndelta = [0.0008, 0.0015]\n[geometry]\nl = 64\nw = 4\n");
    ok(tmp.path(), &["coupled-se", "--config", &cfg]);
    let p = Table::read(&tmp.path().join("coupled_profiles.csv"));
    assert_eq!(p.rows.len(), 2 * 65);
    let seeds = p.strs("seed").iter().filter(|s| **s == "true").count();
    assert!(seeds > 0 && seeds < 2 * 65);
    let s = Table::read(&tmp.path().join("coupled_summary.csv"));
    assert_eq!(s.f64s("delta"), [0.0008, 0.0015]);
}

#[test]
fn oracle_flags_agree_with_their_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "o.toml",
        "[prior]\npreset = \"bernoulli\"\nrho = 0.5\n[oracle]\nsamples = 20000\ndelta = [0.5, 1.0]\nn = 6\ninstances = 300\n",
    );
    ok(tmp.path(), &["oracle", "--config", &cfg, "--check", "nishimori"]);
    assert!(!tmp.path().join("oracle_mmse.csv").exists());
    let t = Table::read(&tmp.path().join("oracle_nishimori.csv"));
    let flags = t.strs("within_3sigma");
    for ((diff, se), flag) in t.f64s("difference").into_iter().zip(t.f64s("stderr")).zip(&flags) {
        assert_eq!(*flag == "true", diff.abs() <= 3.0 * se);
    }
    assert!(flags.iter().all(|f| *f == "true"), "{flags:?}");
    for (l, (r, d)) in t.f64s("lhs").into_iter().zip(t.f64s("rhs").into_iter().zip(t.f64s("difference"))) {
        assert_eq!(l - r, d);
    }

    ok(tmp.path(), &["oracle", "--config", &cfg, "--check", "mmse"]);
    let m = Table::read(&tmp.path().join("oracle_mmse.csv"));
    assert_eq!(m.rows.len(), 5);
    assert!(m.strs("within_3sigma").iter().all(|f| *f == "true"));
}

#[test]
fn community_writes_graph_and_overlaps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[community]\nrho = 0.5\np = 0.1\ndelta = 0.5\n[geometry]\nn = 600\n");
    ok(tmp.path(), &["community", "--config", &cfg]);
    let t = Table::read(&tmp.path().join("community.csv"));
    let edges = t.f64s("edges")[0] as usize;
    let text = std::fs::read_to_string(tmp.path().join("edges_0.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), edges);
    let s: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("community.json")).unwrap()).unwrap();
    assert!((s["effective_delta"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let both = write(tmp.path(), "both.toml", "[community]\nmu = 0.1\ndelta = 0.5\n");
    assert!(!rank1(tmp.path(), &["community", "--config", &both], &[]).status.success());
}

#[test]
fn bad_configs_fail_with_a_machine_readable_summary() {
    let tmp = TempDir::new().unwrap();
    let typo = write(tmp.path(), "typo.toml", "[run]\nseed = 1\nseeed = 3\n");
    let out = rank1(tmp.path(), &["potential", "--config", &typo], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    let msg = err["error"].as_str().unwrap();
    assert!(msg.contains("line 3") && msg.contains("seeed"), "{msg}");
    assert_eq!(err["command"], "potential");

    let json = write(tmp.path(), "bad.json", "{\n  \"run\": {\"seed\": \"x\"}\n}\n");
    let out = rank1(tmp.path(), &["potential", "--config", &json], &[]);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("line 2"), "{err}");

    for (name, text) in [
        ("neg.toml", "[grid]\ndelta = [0.1, -1.0]\n"),
        ("empty.toml", "[grid]\ndelta = []\n"),
        ("preset.toml", "[prior]\npreset = \"gaussian\"\n"),
        ("weights.toml", "[prior]\npreset = \"custom\"\nsupport = [0.0, 1.0]\nweights = [0.5]\n"),
    ] {
        let cfg = write(tmp.path(), name, text);
        let out = rank1(tmp.path(), &["potential", "--config", &cfg], &[]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["status"], "error", "{name}");
    }
    assert!(!rank1(tmp.path(), &["se", "--tol", "-1"], &[]).status.success());
}

#[test]
fn environment_overrides_the_worker_flag() {
    let tmp = TempDir::new().unwrap();
    let run = |env: &[(&str, &str)]| -> Value {
        let out = rank1(tmp.path(), &["thresholds", "--workers", "2"], env);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    assert_eq!(run(&[])["workers"], 2);
    assert_eq!(run(&[("RANK1_PHASE_WORKERS", "3")])["workers"], 3);
    let out = rank1(tmp.path(), &["thresholds"], &[("RANK1_PHASE_WORKERS", "many")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn configs_round_trip_through_both_formats() {
    let tmp = TempDir::new().unwrap();
    let json = write(
        tmp.path(),
        "exp.json",
        r#"{
  "prior": {"preset": "custom", "support": [-1.0, 0.0, 2.5], "weights": [0.25, 0.5, 0.25]},
  "grid": {"delta": {"min": 0.1, "max": 2.0, "points": 3}, "rho": [0.1, 0.2], "family": "community"},
  "geometry": {"n": 300, "l": 16, "w": 2},
  "run": {"seed": 12345678901234, "instances": 3, "tol": 1e-11, "quad_order": 81, "schedule": "state-evolution"},
  "community": {"rho": 0.2, "p": 0.05, "mu": 0.01},
  "oracle": {"check": "finite-size", "sizes": [3, 5], "snr": [0.3]}
}"#,
    );
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let s1 = ok(&first, &["thresholds", "--config", &json]);
    let toml = first.join("config.toml");
    let s2 = ok(&second, &["thresholds", "--config", toml.to_str().unwrap()]);
    assert_eq!(s1["config_hash"], s2["config_hash"]);
    let body = |d: &Path| std::fs::read(d.join("config.toml")).unwrap();
    assert_eq!(body(&first), body(&second));
    let th = |d: &Path| std::fs::read(d.join("thresholds.json")).unwrap();
    assert_eq!(th(&first), th(&second));

    // flags take precedence over the file and are recorded
    let third = tmp.path().join("third");
    let s3 = ok(&third, &["thresholds", "--config", &json, "--quad-order", "41", "--tol", "1e-9"]);
    assert_ne!(s1["config_hash"], s3["config_hash"]);
    let text = std::fs::read_to_string(third.join("config.toml")).unwrap();
    let run = &text.parse::<toml::Table>().unwrap()["run"];
    assert_eq!(run["quad_order"].as_integer(), Some(41));
    assert_eq!(run["tol"].as_float(), Some(1e-9));
}
