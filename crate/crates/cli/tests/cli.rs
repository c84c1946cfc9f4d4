use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_disac");

fn disac(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DISAC_OUT_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn text(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn footer(text: &str, key: &str) -> Value {
    let prefix = format!("# {key}: ");
    let line = text.lines().find(|l| l.starts_with(&prefix)).unwrap();
    serde_json::from_str(&line[prefix.len()..]).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn plan_reference_schedule() {
    let out = disac(&[
        "plan", "--rho", "0.6", "--dx1", "0.5", "--dy2", "0.4", "--dx3", "0.3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let r = &doc["result"];
    assert_eq!(r["on_surface"], true);
    let cum = r["cumulative_rates_nats"][2].as_f64().unwrap();
    let wag = r["wagner_sum_rates_nats"][2].as_f64().unwrap();
    assert!((cum - wag).abs() < 1e-12);
    assert_eq!(r["stages"][0]["rate_bits"].as_f64().unwrap(), 0.5);
    assert_eq!(doc["manifest"]["command"], "plan");
}

#[test]
fn plan_full_distortion_first_stage_is_free() {
    let out = disac(&[
        "plan", "--rho", "0.6", "--dx1", "1", "--dy2", "0.82", "--dx3", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        json(&out)["result"]["stages"][0]["rate_nats"]
            .as_f64()
            .unwrap(),
        0.0
    );
}

#[test]
fn plan_infeasible_stage2_exits_2() {
    let out = disac(&[
        "plan", "--rho", "0.9", "--dx1", "0.5", "--dy2", "0.9", "--dx3", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = &stderr_json(&out)["error"];
    assert_eq!(err["kind"], "infeasible_schedule");
    assert_eq!(err["stage"], 2);
    assert_eq!(err["constraint"], "d_y2 <= sigma1^2");
    assert!((err["bound"].as_f64().unwrap() - 0.595).abs() < 1e-12);
}

#[test]
fn negative_rho_is_accepted() {
    let a = json(&disac(&[
        "plan", "--rho", "-0.6", "--dx1", "0.5", "--dy2", "0.4", "--dx3", "0.3",
    ]));
    let b = json(&disac(&[
        "plan", "--rho", "0.6", "--dx1", "0.5", "--dy2", "0.4", "--dx3", "0.3",
    ]));
    assert_eq!(
        a["result"]["cumulative_rates_nats"],
        b["result"]["cumulative_rates_nats"]
    );
}

#[test]
fn domain_and_missing_errors_exit_2() {
    let out = disac(&[
        "plan", "--rho", "1.2", "--dx1", "0.5", "--dy2", "0.4", "--dx3", "0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "domain");

    let out = disac(&["plan", "--rho", "0.5", "--dx1", "0.5", "--dy2", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "missing_parameter");

    let out = disac(&["feasible", "--rho", "0.5", "--stage", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_preamble_and_precision() {
    let out = disac(&["allocate", "--rho", "0.6", "--n-points", "8"]);
    let t = text(&out);
    let mut lines = t.lines();
    assert!(lines.next().unwrap().starts_with("# disac "));
    assert!(lines.next().unwrap().starts_with("# manifest: {"));
    assert_eq!(
        lines.next().unwrap(),
        "# columns: d_x1,d_y2,r_x,r_y,sum_rate"
    );
    assert_eq!(lines.next().unwrap(), "d_x1,d_y2,r_x,r_y,sum_rate");
    let row = lines.next().unwrap();
    for field in row.split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
    assert_eq!(data_rows(&t).len(), 8);
}

#[test]
fn feasible_independent_sources_fill_the_square() {
    let t = text(&disac(&["feasible", "--rho", "0", "--resolution", "20"]));
    let s = footer(&t, "summary");
    assert_eq!(s["feasible_cells"], 400);
    assert_eq!(s["stage2_mismatches"], Value::Null);
}

#[test]
fn allocate_independent_sources_split_flat() {
    let t = text(&disac(&["allocate", "--rho", "0", "--n-points", "16"]));
    for row in data_rows(&t) {
        let f = |k: usize| row[k].parse::<f64>().unwrap();
        // X may be split between stages 1 and 3 but its total rate is fixed.
        assert!(
            (0.5..=1.0).contains(&f(0)) && (f(1) - 0.5).abs() < 1e-12,
            "{row:?}"
        );
        assert!((f(2) - 0.5 * 2f64.ln()).abs() < 1e-12, "{row:?}");
        assert!((f(3) - 0.5 * 2f64.ln()).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn energy_columns_and_rho_list() {
    let t = text(&disac(&["energy", "--rho", "0.3,0.9", "--n-points", "16"]));
    let rows = data_rows(&t);
    assert_eq!(rows.len(), 32);
    for chunk in rows.chunks(16) {
        assert!(
            chunk.iter().all(|r| r[4] == chunk[0][4]),
            "e_dsc2_min varies with d_x1"
        );
        assert!(chunk
            .iter()
            .all(|r| ["disac2", "dsc2", "tie"].contains(&r[6].as_str())));
    }
    let bounds = footer(&t, "lower_bounds");
    assert_eq!(bounds.as_array().unwrap().len(), 2);
    assert_eq!(footer(&t, "lower_bound_trend_in_rho"), "increasing");
}

#[test]
fn energy_independent_sources_minimum_near_sqrt_half() {
    let t = text(&disac(&["energy", "--rho", "0", "--n-points", "2001"]));
    let argmin = footer(&t, "lower_bounds")[0]["argmin_d_x1"]
        .as_f64()
        .unwrap();
    assert!((argmin - 0.5f64.sqrt()).abs() < 5e-4, "{argmin}");
}

#[test]
fn simulate_n_alias_and_repeatability() {
    let args = [
        "simulate", "--rho", "0.6", "--dx1", "0.5", "--dy2", "0.4", "--dx3", "0.3", "--seed", "42",
        "--n", "200000",
    ];
    let a = disac(&args);
    let b = disac(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["manifest"]["n_samples"], 200000);
}

#[test]
fn simulate_failed_check_exits_1() {
    // A vanishing k-sigma band cannot be met by sampled distortions.
    let out = disac(&[
        "simulate",
        "--rho",
        "0.6",
        "--dx1",
        "0.5",
        "--dy2",
        "0.4",
        "--dx3",
        "0.3",
        "--n-samples",
        "10000",
        "--k-sigma",
        "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["all_pass"], false);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "rho = 0.6\ndx1 = 0.5\ndy2 = 0.4\ndx3 = 0.3\ntol = 1e-6\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let doc = json(&disac(&["--config", cfg, "plan"]));
    assert_eq!(doc["manifest"]["rho"], 0.6);
    assert_eq!(doc["manifest"]["tol"], 1e-6);

    let doc = json(&disac(&["--config", cfg, "plan", "--dx3", "0.35"]));
    assert_eq!(doc["manifest"]["dx3"], 0.35);
    assert_eq!(doc["manifest"]["dx1"], 0.5);
}

#[test]
fn config_file_rho_list_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("energy.toml");
    std::fs::write(&cfg, "rho = [0.3, 0.6]\nn_points = 8\n").unwrap();
    let t = text(&disac(&["--config", cfg.to_str().unwrap(), "energy"]));
    assert_eq!(data_rows(&t).len(), 16);

    std::fs::write(&cfg, "rho = \"high\"\n").unwrap();
    let out = disac(&["--config", cfg.to_str().unwrap(), "energy"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "invalid_input");
}

#[test]
fn relative_out_uses_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args([
            "feasible",
            "--rho",
            "0.5",
            "--resolution",
            "8",
            "--out",
            "sub/region.csv",
        ])
        .env("DISAC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("sub/region.csv")).unwrap();
    assert!(written.contains("\"output\":\"sub/region.csv\""));
}

#[test]
fn rerun_rejects_files_without_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("plain.csv");
    std::fs::write(&f, "a,b\n1,2\n").unwrap();
    let out = disac(&["rerun", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let base = [
        "simulate",
        "--rho",
        "-0.3",
        "--dx1",
        "0.3",
        "--dy2",
        "0.3",
        "--dx3",
        "0.1",
        "--n-samples",
        "300000",
    ];
    let outputs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|t| {
            let mut args = vec!["--threads", t];
            args.extend(base);
            disac(&args).stdout
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
