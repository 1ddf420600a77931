use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn actgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actgen"))
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_prints_tsv() {
    let out = actgen(&[
        "simulate",
        "--actor",
        "tutor",
        "--object",
        "student",
        "--behavior",
        "compromise with",
        "--turns",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], actgen_service::cli::TSV_HEADER);
    assert_eq!(lines.len(), 4);
    let first: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(
        first[..6],
        ["1", "tutor", "student", "1.4000", "0.6000", "-0.4000"]
    );
    assert!(first[6].starts_with("compromise with"));
    let second: Vec<&str> = lines[2].split('\t').collect();
    assert_eq!(second[1], "student");
    assert!(second[7].parse::<f64>().unwrap() >= 0.0);

    let out = actgen(&["simulate", "--epa", "-1,0.5,2", "--turns", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("\t-1.0000\t0.5000\t2.0000\t"));
}

#[test]
fn failures_exit_nonzero_with_error_code() {
    let out = actgen(&["simulate", "--behavior", "zorch"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not_found"), "{err}");
    let json_line = err.lines().last().unwrap();
    let v: Value = serde_json::from_str(json_line).unwrap();
    assert_eq!(v["code"], "not_found");

    let out = actgen(&[
        "train",
        "--variant",
        "cvae",
        "--dataset",
        "/nonexistent",
        "--out",
        "/tmp/x.json",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_found"));

    let out = actgen(&["serve", "--bind", "not-an-address"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_request"));

    // clap usage errors also exit nonzero
    assert!(!actgen(&["simulate", "--turns", "2"]).status.success());
}

#[test]
fn ingest_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let summary = ok_json(actgen(&[
        "--seed",
        "5",
        "ingest",
        "--synthetic",
        "80",
        "--out",
        path(&data),
    ]));
    assert_eq!(summary["triples"], 80);
    assert_eq!(
        summary["train"].as_u64().unwrap()
            + summary["valid"].as_u64().unwrap()
            + summary["test"].as_u64().unwrap(),
        80
    );
    for f in ["train.jsonl", "valid.jsonl", "test.jsonl", "split.json"] {
        assert!(data.join(f).is_file(), "{f}");
    }

    let config = dir.path().join("train.json");
    std::fs::write(
        &config,
        r#"{"embed_dim": 8, "hidden_dim": 12, "latent_dim": 4, "max_len": 10, "vocab_size": 100}"#,
    )
    .unwrap();
    let train = |variant: &str, name: &str, seed: &str| {
        let out = dir.path().join(name);
        let s = ok_json(actgen(&[
            "--seed",
            seed,
            "train",
            "--variant",
            variant,
            "--dataset",
            path(&data),
            "--config",
            path(&config),
            "--steps",
            "15",
            "--warmup",
            "10",
            "--out",
            path(&out),
        ]));
        assert_eq!(s["steps"], 15);
        (out, s["checksum"].as_str().unwrap().to_string())
    };
    let (cvae, sum_a) = train("cvae", "cvae.json", "3");
    let (_, sum_b) = train("cvae", "cvae_again.json", "3");
    let (_, sum_c) = train("cvae", "cvae_other.json", "4");
    assert_eq!(sum_a, sum_b);
    assert_ne!(sum_a, sum_c);
    assert!(dir.path().join("cvae.vocab.json").is_file());
    assert!(dir.path().join("cvae.log.csv").is_file());
    let (plain, _) = train("seq2seq_plain", "plain.json", "3");

    let sheet = dir.path().join("sheet.csv");
    let report = ok_json(actgen(&[
        "eval",
        "--dataset",
        path(&data),
        "--model",
        path(&cvae),
        "--baseline",
        path(&plain),
        "--rating-sheet",
        path(&sheet),
    ]));
    assert_eq!(report["variant"], "cvae");
    let alignment = &report["alignment"];
    assert_eq!(
        alignment["distances"].as_array().unwrap().len()
            + alignment["failures"].as_u64().unwrap() as usize,
        4
    );
    assert!(alignment["relative_improvement"].is_number());
    assert_eq!(report["rating_rows"], 4);
    let header = std::fs::read_to_string(&sheet).unwrap();
    assert!(header.starts_with(
        "prompt,response,setting,syntactic_coherence,naturalness,emotional_appropriateness"
    ));
}

#[test]
fn compare_rating_sheets() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, scores: &[u32]| {
        let p = dir.path().join(name);
        let mut s = String::from(
            "prompt,response,setting,syntactic_coherence,naturalness,emotional_appropriateness\n",
        );
        for (i, v) in scores.iter().enumerate() {
            s.push_str(&format!("p{i},r{i},friend_friend,3,{v},3\n"));
        }
        std::fs::write(&p, s).unwrap();
        p
    };
    let a = write("a.csv", &[5, 5, 4, 5, 4, 5]);
    let b = write("b.csv", &[2, 3, 3, 1, 2, 2]);
    let report = ok_json(actgen(&[
        "eval",
        "--compare",
        path(&a),
        path(&b),
        "--column",
        "naturalness",
    ]));
    let w = &report["wilcoxon"];
    assert_eq!(w["n"], 6);
    assert_eq!(w["method"], "exact");
    assert_eq!(w["p_value"], 1.0 / 64.0);
    assert_eq!(w["significant"], true);

    let out = actgen(&["eval", "--compare", path(&a), path(&b), "--column", "charm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_request"));
}

#[test]
fn serve_loads_config_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok_json(actgen(&[
        "ingest",
        "--synthetic",
        "40",
        "--out",
        path(&data),
    ]));
    let config = dir.path().join("train.json");
    std::fs::write(
        &config,
        r#"{"embed_dim": 8, "hidden_dim": 8, "latent_dim": 4, "max_len": 8, "vocab_size": 100}"#,
    )
    .unwrap();
    ok_json(actgen(&[
        "train",
        "--variant",
        "seq2seq_epa",
        "--dataset",
        path(&data),
        "--config",
        path(&config),
        "--steps",
        "5",
        "--out",
        path(&dir.path().join("model.json")),
    ]));
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let service = dir.path().join("service.json");
    // relative paths resolve against the config file's directory
    std::fs::write(
        &service,
        format!(r#"{{"bind": "127.0.0.1:{port}", "checkpoint": "model.json", "default_setting": "tutor:student"}}"#),
    )
    .unwrap();

    struct Kill(std::process::Child);
    impl Drop for Kill {
        fn drop(&mut self) {
            let _ = self.0.kill();
            let _ = self.0.wait();
        }
    }
    let _child = Kill(
        Command::new(env!("CARGO_BIN_EXE_actgen"))
            .args(["serve", "--config", path(&service)])
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap(),
    );
    let base = format!("http://127.0.0.1:{port}");
    let client = reqwest::blocking::Client::new();
    let up = (0..100).any(|_| {
        std::thread::sleep(std::time::Duration::from_millis(50));
        client.get(format!("{base}/health")).send().is_ok()
    });
    assert!(up, "service did not start");

    let body: Value = client
        .post(format!("{base}/chat"))
        .json(&serde_json::json!({"setting": "enemy_enemy", "text": "i hate you"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(body["generator"], "seq2seq_epa", "{body}");
    assert_eq!(body["deflection_trace"].as_array().unwrap().len(), 2);

    let sim: Value = client
        .post(format!("{base}/simulate/step"))
        .json(&serde_json::json!({"behavior_label": "thank"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(sim["identities"], serde_json::json!(["tutor", "student"]));
}
