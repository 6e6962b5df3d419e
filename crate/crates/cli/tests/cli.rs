use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(name: &str) -> Command {
    let path = match name {
        "sg-train" => env!("CARGO_BIN_EXE_sg-train"),
        "sg-run" => env!("CARGO_BIN_EXE_sg-run"),
        "sg-host" => env!("CARGO_BIN_EXE_sg-host"),
        "sg-device" => env!("CARGO_BIN_EXE_sg-device"),
        "sg-calibrate" => env!("CARGO_BIN_EXE_sg-calibrate"),
        "sg-curate" => env!("CARGO_BIN_EXE_sg-curate"),
        "sg-annotate" => env!("CARGO_BIN_EXE_sg-annotate"),
        "sg-sessions" => env!("CARGO_BIN_EXE_sg-sessions"),
        "sg-report" => env!("CARGO_BIN_EXE_sg-report"),
        other => panic!("unknown binary {other}"),
    };
    Command::new(path)
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn train(dir: &Path) -> std::path::PathBuf {
    let model = dir.join("model.json");
    let v = ok_json(bin("sg-train").arg("--out").arg(&model).output().unwrap());
    assert_eq!(v["dimension"], 1764);
    assert_eq!(v["has_geometry"], true);
    model
}

#[test]
fn record_review_and_manage_a_session() {
    let tmp = tempfile::tempdir().unwrap();
    let model = train(tmp.path());
    let sessions = tmp.path().join("sessions");
    let render = tmp.path().join("render.jsonl");
    let m = ok_json(
        bin("sg-run")
            .args(["--duration", "5", "--lockstep", "--session-id", "a"])
            .arg("--model")
            .arg(&model)
            .arg("--sessions")
            .arg(&sessions)
            .arg("--render-log")
            .arg(&render)
            .output()
            .unwrap(),
    );
    assert_eq!(m["frames_sent"], 150);
    assert_eq!(m["frames_processed"], 150);
    assert!(m["cues_fired"].as_u64().unwrap() >= 1);
    let render_lines = std::fs::read_to_string(&render).unwrap();
    assert_eq!(render_lines.lines().count() as u64, m["cues_rendered"].as_u64().unwrap() + m["device"]["indicator_transitions"].as_u64().unwrap());

    let dir = sessions.join("a");
    let tl_path = tmp.path().join("tl.json");
    let plot = tmp.path().join("tl.png");
    let out = bin("sg-curate").arg("--session").arg(&dir).arg("--out").arg(&tl_path).arg("--plot").arg(&plot).output().unwrap();
    assert!(out.status.success());
    let tl: Value = serde_json::from_slice(&std::fs::read(&tl_path).unwrap()).unwrap();
    let moments = tl["moments"].as_array().unwrap();
    assert!(moments.iter().any(|x| x["label_name"] == "happy"));
    assert!(std::fs::metadata(&plot).unwrap().len() > 0);

    let notes = ok_json(bin("sg-annotate").arg("--session").arg(&dir).args(["--mark", "1000:2500", "--comment", "laughing"]).output().unwrap());
    assert_eq!(notes.as_array().unwrap().len(), 1);
    assert_eq!(notes[0]["kind"], "comment");
    let out = bin("sg-annotate").arg("--session").arg(&dir).args(["--mark", "1000:999999"]).output().unwrap();
    assert!(!out.status.success(), "range past the end must be rejected");

    let report = ok_json(bin("sg-report").arg("--session").arg(&dir).output().unwrap());
    assert_eq!(report["frames"], 150);
    assert_eq!(report["estimates"], 150);

    let list = ok_json(bin("sg-sessions").arg("--root").arg(&sessions).arg("list").output().unwrap());
    assert_eq!(list.as_array().unwrap().len(), 1);
    ok_json(bin("sg-sessions").arg("--root").arg(&sessions).args(["hide", "a"]).output().unwrap());
    let list = ok_json(bin("sg-sessions").arg("--root").arg(&sessions).arg("list").output().unwrap());
    assert!(list.as_array().unwrap().is_empty());
    let list = ok_json(bin("sg-sessions").arg("--root").arg(&sessions).args(["list", "--all"]).output().unwrap());
    assert_eq!(list[0]["status"], "hidden");
    let st = ok_json(bin("sg-sessions").arg("--root").arg(&sessions).args(["delete", "a"]).output().unwrap());
    assert_eq!(st["status"], "deleted");
    assert!(!dir.join("frames.y8").exists());
    assert!(dir.join("annotations.jsonl").exists());
    let out = bin("sg-sessions").arg("--root").arg(&sessions).args(["unhide", "a"]).output().unwrap();
    assert!(!out.status.success(), "deletion is final");
}

#[test]
fn host_and_device_processes() {
    let tmp = tempfile::tempdir().unwrap();
    let model = train(tmp.path());
    let sock = std::net::UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = sock.local_addr().unwrap().to_string();
    drop(sock);
    let host = bin("sg-host")
        .args(["--bind", &addr, "--idle-timeout-ms", "1500", "--duration", "60", "--no-record"])
        .arg("--model")
        .arg(&model)
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(500));
    let dev = ok_json(bin("sg-device").args(["--host", &addr, "--duration", "2"]).output().unwrap());
    let host = ok_json(host.wait_with_output().unwrap());
    assert_eq!(dev["exit"], "duration_elapsed");
    assert_eq!(dev["frames_sent"], 60);
    assert_eq!(host["frames_received"], 60);
    assert!(dev["results_received"].as_u64().unwrap() >= 58);
}

#[test]
fn device_without_host_keeps_running() {
    let v = ok_json(bin("sg-device").args(["--host", "127.0.0.1:9", "--duration", "1"]).output().unwrap());
    assert_eq!(v["frames_sent"], 30);
    assert_eq!(v["results_received"], 0);
}

#[test]
fn calibrate_benchmark_subjects() {
    let ideal = ok_json(bin("sg-calibrate").args(["--benchmark", "--subject", "synthetic:ideal", "--seed", "1"]).output().unwrap());
    assert_eq!(ideal["transcript"]["outcome"]["decision"], "converged");
    let permuted = ok_json(bin("sg-calibrate").args(["--benchmark", "--subject", "synthetic:permuted", "--seed", "1"]).output().unwrap());
    assert_eq!(permuted["transcript"]["outcome"]["decision"], "max_rounds_reached");
    assert_eq!(permuted["transcript"]["rounds"].as_array().unwrap().len(), 5);
    let out = bin("sg-calibrate").args(["--benchmark", "--subject", "synthetic:bogus"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"network": {"link": {"loss": 1.5}}}"#).unwrap();
    let out = bin("sg-run").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let out = bin("sg-run").args(["--loss", "-0.1"]).output().unwrap();
    assert!(!out.status.success());
}
