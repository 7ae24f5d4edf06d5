use std::fs;
use std::path::Path;
use std::process::Command;

use cvqkd_cli::commands::{cmd_simulate, cmd_sweep, cmd_threshold};
use cvqkd_cli::{load_spec, Overrides};
use cvqkd_core::DecayModel;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cvqkd");

const SPEC: &str = r#"
[channel]
model = "lorentz_drude"
gamma_m = 0.5
omega_0 = 0.2
omega_c = 1.0
tau = 3.0

[session]
delta_t = 0.05
n_key = 200
n_ref = 2000
seed = 11

[attack]
t_e = 0.5

[run]
repetitions = 3

[output]
transcripts = true
"#;

fn write_spec(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("spec.toml");
    fs::write(&path, text).unwrap();
    path
}

fn data_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn tabulated_rate_file_is_resolved_next_to_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<(f64, f64)> = (0..40)
        .map(|i| (0.1 * i as f64, 0.3 + 0.01 * i as f64))
        .collect();
    let mut csv = String::from("t,rate\n");
    for (t, r) in &samples {
        csv.push_str(&format!("{t:?},{r:?}\n"));
    }
    fs::write(dir.path().join("rates_in.csv"), csv).unwrap();
    let path = write_spec(
        dir.path(),
        "channel.model = \"tabulated\"\nchannel.rate_file = \"rates_in.csv\"\nchannel.tau = 3.0\n",
    );
    let spec = load_spec(&path, Overrides::default()).unwrap();
    let direct = DecayModel::tabulated(samples).unwrap();
    for t in [0.0, 0.55, 1.7, 3.0] {
        assert_eq!(
            spec.session.profile.model.accumulated_damping(t).unwrap(),
            direct.accumulated_damping(t).unwrap()
        );
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_spec(dir.path(), SPEC);

    let status = Command::new(BIN)
        .args(["rates", "--quiet", "--spec"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let (header, rows) = data_rows(&out.join("rates.csv"));
    assert_eq!(
        header,
        ["t", "gamma_over_gamma_m", "damping", "transmissivity"]
    );
    assert_eq!(rows.len(), 1001);
    assert_eq!(rows[0], vec![0.0, 0.0, 0.0, 1.0]);

    assert_eq!(
        Command::new(BIN)
            .arg("--help")
            .output()
            .unwrap()
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        Command::new(BIN)
            .arg("frobnicate")
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        Command::new(BIN)
            .arg("simulate")
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SPEC.replace("t_e = 0.5", "t_e = 5.0")).unwrap();
    let output = Command::new(BIN)
        .args(["simulate", "--spec"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("attack.t_e"));
}

#[test]
fn simulate_writes_reports_transcripts_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_spec(dir.path(), SPEC);
    let spec = load_spec(&path, Overrides::default()).unwrap();
    let out = dir.path().join("out");
    let agg = cmd_simulate(&spec, &out).unwrap();
    assert_eq!(agg.repetitions, 3);
    assert_eq!(agg.clean + agg.eve_present + agg.inconclusive, 3);

    let aggregate: Value =
        serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(aggregate["provenance"]["seed"], 11);
    assert_eq!(
        aggregate["provenance"]["spec_hash"],
        spec.spec_hash.as_str()
    );

    for k in 0..3 {
        let report: Value = serde_json::from_str(
            &fs::read_to_string(out.join(format!("reports/session_{k:05}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(report["repetition"], k);
        assert!(report["report"]["verdict"].is_string());

        let text =
            fs::read_to_string(out.join(format!("transcripts/session_{k:05}.jsonl"))).unwrap();
        let records: Vec<Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records.len(), 2 + 2200);
        assert_eq!(records[0]["record"], "header");
        assert_eq!(records[0]["attack"]["t_e"], 0.5);
        assert!(records[1..=2200].iter().all(|r| r["record"] == "pulse"));
        let last = &records[2201];
        assert_eq!(last["record"], "disclosure");
        assert_eq!(last["routes"].as_array().unwrap().len(), 2000);
    }
}

#[test]
fn threshold_table_is_monotone_in_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_spec(dir.path(), SPEC);
    let spec = load_spec(&path, Overrides::default()).unwrap();
    let rows = cmd_threshold(&spec, dir.path()).unwrap();
    assert!(rows.windows(2).all(|w| w[1].t_e_star <= w[0].t_e_star));
    assert!(rows
        .windows(2)
        .all(|w| w[1].eta_threshold >= w[0].eta_threshold));
    assert_eq!(rows.last().unwrap().t_e_star, 0.0);
    assert_eq!(rows.last().unwrap().eta_threshold, 0.5);
    let first = rows[0];
    assert_eq!(first.epsilon, 0.0);
    let damping_tau = spec.session.profile.model.accumulated_damping(3.0).unwrap();
    assert!((first.eta_threshold - 0.5 * (-damping_tau).exp()).abs() < 1e-12);
    let text = fs::read_to_string(dir.path().join("threshold.csv")).unwrap();
    assert!(text.contains("# tau_r_over_tau: "));
}

#[test]
fn sweep_covers_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SPEC}\n[sweep]\n\"attack.t_e\" = [0.0, 1.0, 2.0]\n\"channel.gamma_m\" = [0.2, 0.5]\n"
    );
    let path = write_spec(dir.path(), &text);
    let spec = load_spec(
        &path,
        Overrides {
            repetitions: Some(1),
            ..Overrides::default()
        },
    )
    .unwrap();
    let points = cmd_sweep(&spec, dir.path()).unwrap();
    assert_eq!(points.len(), 6);
    let (header, rows) = data_rows(&dir.path().join("sweep.csv"));
    assert_eq!(&header[..2], ["attack.t_e", "channel.gamma_m"]);
    let axes: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(
        axes,
        [
            (0.0, 0.2),
            (0.0, 0.5),
            (1.0, 0.2),
            (1.0, 0.5),
            (2.0, 0.2),
            (2.0, 0.5)
        ]
    );
}

#[test]
fn failing_sessions_exit_with_runtime_code() {
    let dir = tempfile::tempdir().unwrap();
    // a single reference pulse cannot fill both populations
    let path = write_spec(dir.path(), &SPEC.replace("n_ref = 2000", "n_ref = 1"));
    let output = Command::new(BIN)
        .args(["simulate", "--spec"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let aggregate: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/aggregate.json")).unwrap())
            .unwrap();
    assert_eq!(aggregate["errors"], 3);
}

#[test]
fn clean_markovian_batch_rarely_alarms() {
    let text = "channel.model = \"markovian\"\nchannel.gamma_m = 0.4\nchannel.tau = 2.0\nsession.seed = 5\nrun.repetitions = 100\n";
    let spec = cvqkd_cli::parse_spec(text, ".", Overrides::default()).unwrap();
    let agg = cvqkd_cli::commands::run_batch(&spec, None).unwrap();
    assert!(agg.eve_present <= 5, "{agg:?}");
    assert_eq!(agg.localization.entire_window, 100);
}

#[test]
fn monotone_attack_is_located_near_the_tap() {
    let t_e = 1.2;
    let text = format!(
        "{}\n",
        SPEC.replace("t_e = 0.5", &format!("t_e = {t_e}"))
            .replace("n_ref = 2000", "n_ref = 10000")
    )
    .replace("repetitions = 3", "repetitions = 40");
    let spec = cvqkd_cli::parse_spec(&text, ".", Overrides::default()).unwrap();
    let agg = cvqkd_cli::commands::run_batch(&spec, None).unwrap();
    assert!(agg.detection_rate > 0.9, "{agg:?}");
    let median = agg.localization.median_candidate.unwrap();
    assert!((median - t_e).abs() < 0.2, "median {median}");
}
