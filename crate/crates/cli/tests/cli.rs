use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn maclim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_maclim"));
    cmd.args(args).current_dir(workspace());
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn malformed_json_exits_with_config_code_and_position() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "bad.json", "{\n  \"name\": \"bad\",\n  \"seed\": ,\n}");
    let out = tmp.path().join("out");
    let o = maclim(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn validation_failure_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "s.json",
        r#"{"name": "s", "seed": 0, "task": {"type": "two_observation", "kernel": "missing", "n_s": [1], "tau": [1]}}"#,
    );
    let out = tmp.path().join("out");
    let o = maclim(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("task.kernel"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_names_module_and_operation() {
    // undamped oscillator modes give a pointer kernel with indefinite D^i
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "s.json",
        r#"{
            "name": "indefinite", "seed": 0,
            "kernels": {
                "a": {"model": "oscillator", "m": 1.0, "omega0": 1.0},
                "b": {"model": "oscillator", "m": 1.0, "omega0": 1.7},
                "sys": {"model": "drude", "m": 1.0, "lambda": 1.0, "cutoff": 1.0}
            },
            "task": {
                "type": "pointer", "system_kernel": "sys",
                "grid": {"start": 0.0, "end": 8.0, "n": 81},
                "modes": [{"kernel": "a", "g": 1.0, "kappa": 1.5}, {"kernel": "b", "g": 0.6, "kappa": -0.4}],
                "n_s": 10,
                "signal": {"shape": "constant", "value": 1.0}
            }
        }"#,
    );
    let out = tmp.path().join("out");
    let o = maclim(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("apparatus::pointer_distribution"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn validate_and_list_bundled_scenarios() {
    let o = maclim(&["list-scenarios"], &[]);
    assert!(o.status.success());
    let listing = String::from_utf8(o.stdout).unwrap();
    for kind in ["clt_sweep", "two_observation", "dressing_sweep", "pointer", "chamber"] {
        assert!(listing.contains(kind), "{listing}");
    }
    assert!(!listing.contains("invalid"));
    let o = maclim(&["validate", "scenarios/two_obs.json"], &[]);
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap().trim(),
        "ok: two_obs (two_observation)"
    );
}

#[test]
fn outputs_carry_version_and_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = maclim(&["run", "scenarios/two_obs.json", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(workspace().join("scenarios/two_obs.json")).unwrap();
    let hash = maclim_cli::scenario::sha256_hex(&bytes);
    let csv = fs::read_to_string(out.join("two_observation.csv")).unwrap();
    let mut lines = csv.split("\r\n");
    assert_eq!(lines.next().unwrap(), format!("# maclim {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines.next().unwrap(), format!("# config_sha256 {hash}"));
    assert_eq!(
        lines.next().unwrap(),
        "n_s,tau,var_z1,var_plus,var_minus,var_x,var_v,sigma_product"
    );
    assert_eq!(csv.matches("\r\n").count(), 3 + 2 * 7);
}

#[test]
fn thread_cap_must_be_positive_and_does_not_change_results() {
    let o = maclim(&["validate", "scenarios/two_obs.json"], &[("MACLIM_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = maclim(
            &["run", "scenarios/clt_sweep.json", "--out", dir.to_str().unwrap()],
            &[("MACLIM_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(a.join("clt_sweep.csv")).unwrap(),
        fs::read(b.join("clt_sweep.csv")).unwrap()
    );
}

#[test]
fn chamber_subcommand_writes_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cfg.json",
        r#"{"m": 125.66370614359172, "hbar": 1.0, "r_dr": 1.0, "lambda": 0.05, "density_ratio": 1.1,
            "tau_i": 20.0, "box_min": [-500, -500, -500], "box_max": [500, 500, 500],
            "t_start": 0.0, "t_end": 1e6, "max_droplets": 5}"#,
    );
    let out = tmp.path().join("chain.csv");
    let args = [
        "chamber",
        "--seed",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let o = maclim(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.contains("\r\nj,t,x,y,z\r\n0,"));
    assert_eq!(text.matches("\r\n").count(), 3 + 6);
    assert!(maclim(&args, &[]).status.success());
    assert_eq!(fs::read(&out).unwrap(), first);

    let short = write(
        tmp.path(),
        "short.json",
        r#"{"m": 1.0, "hbar": 1.0, "r_dr": 1.0, "lambda": 1.0, "density_ratio": 1.1,
        "tau_i": 1.0, "box_min": [-5, -5, -5], "box_max": [5, 5, 5], "t_start": 0.0, "t_end": 10.0}"#,
    );
    let o = maclim(
        &[
            "chamber",
            "--seed",
            "0",
            "--config",
            short.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
