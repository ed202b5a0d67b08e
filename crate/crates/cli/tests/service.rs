mod common;

use std::net::SocketAddr;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use relict_cli::commands::{cmd_rank, RECORDS_FILE};
use relict_cli::service::{serve, PairQueueEntry, Progress, Service, ServiceConfig};
use relict_core::engine::{read_records_jsonl, MeasureKind};
use relict_core::evaluation::{aggregate_ratings, read_ratings_log, Label};
use relict_core::io::{write_volume, Corpus, CorpusEntry, CorpusRole};
use relict_core::Volume3D;
use serde_json::{json, Value};
use tokio::task::JoinHandle;

use common::{Distortion, FixtureSpec};

struct Setup {
    _dir: tempfile::TempDir,
    cfg: ServiceConfig,
}

/// A small ranked fixture plus a 4x4x4 ramp volume in the training corpus.
fn setup() -> Setup {
    let dir = tempfile::tempdir().unwrap();
    let f = common::build(
        dir.path(),
        &FixtureSpec {
            dims: [12, 12, 12],
            training: 6,
            copies: 2,
            fresh: 3,
            distortion: Distortion::Noise,
            seed: 21,
        },
    );
    let cfg = common::run_config(&f, &[MeasureKind::Rmse, MeasureKind::Mae], 4, "out");
    cmd_rank(&cfg, Some("1")).unwrap();

    let ramp = dir.path().join("ramp.nii");
    let vox = (0..64).map(|i| i as f64).collect();
    write_volume(&Volume3D::new("ramp", [4, 4, 4], [1.0; 3], vox).unwrap(), &ramp).unwrap();
    let mut training = Corpus::from_manifest(&f.training_manifest).unwrap();
    training.entries.push(CorpusEntry {
        id: "ramp".into(),
        volume: ramp,
        mask: None,
        embedding: None,
        feature_map: None,
    });
    let training = Corpus::new(CorpusRole::Training, training.entries).unwrap();
    let viewer_manifest = dir.path().join("training_view.json");
    training.write_manifest(&viewer_manifest).unwrap();

    let cfg = ServiceConfig {
        records: cfg.output_dir.join(RECORDS_FILE),
        training: viewer_manifest,
        synthetic: f.synthetic_manifest.clone(),
        ratings_log: dir.path().join("ratings.jsonl"),
        raters: None,
        queue_measure: MeasureKind::Rmse,
    };
    Setup { _dir: dir, cfg }
}

async fn start(cfg: &ServiceConfig) -> (String, JoinHandle<()>) {
    let svc = Arc::new(Service::open(cfg).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let handle = tokio::spawn(async move {
        serve(listener, svc, std::future::pending()).await.unwrap();
    });
    (format!("http://{addr}"), handle)
}

async fn post(client: &reqwest::Client, base: &str, body: Value) -> (u16, Value) {
    let resp = client.post(format!("{base}/api/ratings")).json(&body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}

async fn pairs(client: &reqwest::Client, base: &str) -> Vec<PairQueueEntry> {
    client.get(format!("{base}/api/pairs")).send().await.unwrap().json().await.unwrap()
}

fn decode_png(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes.to_vec())).read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    buf.truncate(info.buffer_size());
    (info.width, info.height, buf)
}

fn log_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).map_or(0, |t| t.lines().count())
}

#[tokio::test]
async fn queue_follows_ratio_order_and_is_blind() {
    let s = setup();
    let (base, _h) = start(&s.cfg).await;
    let client = reqwest::Client::new();

    let raw: Value = client.get(format!("{base}/api/pairs")).send().await.unwrap().json().await.unwrap();
    for entry in raw.as_array().unwrap() {
        let keys: Vec<&str> = entry.as_object().unwrap().keys().map(String::as_str).collect();
        for k in &keys {
            assert!(
                ["pair_id", "synthetic_id", "training_id", "queue_rank", "rated_by", "round_2_required"].contains(k),
                "unexpected field {k}"
            );
        }
    }

    let queue = pairs(&client, &base).await;
    let mut records: Vec<_> = read_records_jsonl(&s.cfg.records)
        .unwrap()
        .into_iter()
        .filter(|r| r.measure == MeasureKind::Rmse)
        .collect();
    records.sort_by(|a, b| a.distance_ratio.unwrap().total_cmp(&b.distance_ratio.unwrap()));
    assert_eq!(queue.len(), records.len());
    for (i, (q, r)) in queue.iter().zip(&records).enumerate() {
        assert_eq!(q.queue_rank, i + 1);
        assert_eq!(q.synthetic_id, r.synthetic_id);
        assert_eq!(q.training_id, r.closest_training_id);
        assert_eq!(q.pair_id, format!("{}:{}", r.synthetic_id, r.closest_training_id));
        assert!(q.rated_by.is_empty());
    }
}

#[tokio::test]
async fn volume_meta_and_slices() {
    let s = setup();
    let (base, _h) = start(&s.cfg).await;
    let client = reqwest::Client::new();

    let meta: Value = client.get(format!("{base}/api/volumes/ramp/meta")).send().await.unwrap().json().await.unwrap();
    assert_eq!(meta["dims"], json!([4, 4, 4]));
    assert_eq!(meta["intensity_range"], json!([0.0, 63.0]));

    let resp = client
        .get(format!("{base}/api/volumes/ramp/slice?plane=axial&index=0&lo=0&hi=30"))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert_eq!(resp.headers()["content-type"], "image/png");
    let (w, h, px) = decode_png(&resp.bytes().await.unwrap());
    assert_eq!((w, h), (4, 4));
    for y in 0..4 {
        for x in 0..4 {
            let v = (x + 4 * y) as f64;
            let want = (v / 30.0 * 255.0).clamp(0.0, 255.0).round() as u8;
            assert_eq!(px[x + 4 * y], want, "pixel ({x}, {y})");
        }
    }
    // default window spans the volume range
    let resp = client.get(format!("{base}/api/volumes/ramp/slice?plane=sagittal&index=3")).send().await.unwrap();
    let (_, _, px) = decode_png(&resp.bytes().await.unwrap());
    assert_eq!(px[15], 255);

    for (query, code) in [
        ("ramp/slice?plane=axial&index=4", 404),
        ("ramp/slice?plane=coronal&index=9", 404),
        ("nobody/slice?plane=axial&index=0", 404),
        ("nobody/meta", 404),
        ("ramp/slice?plane=oblique&index=0", 400),
        ("ramp/slice?plane=axial&index=0&lo=5&hi=5", 400),
    ] {
        let status = client.get(format!("{base}/api/volumes/{query}")).send().await.unwrap().status();
        assert_eq!(status.as_u16(), code, "{query}");
    }
}

#[tokio::test]
async fn rating_rules() {
    let s = setup();
    let (base, _h) = start(&s.cfg).await;
    let client = reqwest::Client::new();
    let queue = pairs(&client, &base).await;
    let (p0, p1) = (&queue[0].pair_id, &queue[1].pair_id);
    let log = &s.cfg.ratings_log;

    let (code, body) = post(&client, &base, json!({"pair_id": p0, "rater_id": "ana", "score": 4, "round": 1})).await;
    assert_eq!(code, 201, "{body}");
    assert_eq!(log_lines(log), 1, "appended before acknowledgment");

    for (body, want) in [
        (json!({"pair_id": p0, "rater_id": "ana", "score": 3, "round": 1}), 409),
        (json!({"pair_id": p0, "rater_id": "ben", "score": 5, "round": 1}), 400),
        (json!({"pair_id": p0, "rater_id": "ben", "score": 0, "round": 1}), 400),
        (json!({"pair_id": p0, "rater_id": "ben", "score": 2.5, "round": 1}), 400),
        (json!({"pair_id": p0, "rater_id": "ben", "round": 1}), 400),
        (json!({"pair_id": "nope:none", "rater_id": "ben", "score": 2, "round": 1}), 400),
        (json!({"pair_id": p0, "rater_id": "ben", "score": 2, "round": 3}), 400),
        (json!({"pair_id": p0, "rater_id": "ben", "score": 2, "round": 2}), 400),
    ] {
        let (code, resp) = post(&client, &base, body.clone()).await;
        assert_eq!(code, want, "{body} -> {resp}");
        assert!(resp["error"].is_string(), "{resp}");
    }
    let resp = client
        .post(format!("{base}/api/ratings"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    assert_eq!(log_lines(log), 1);

    // ben disagrees on p0 and agrees on p1
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ben", "score": 2, "round": 1})).await.0, 201);
    assert_eq!(post(&client, &base, json!({"pair_id": p1, "rater_id": "ben", "score": 1, "round": 1})).await.0, 201);
    assert_eq!(post(&client, &base, json!({"pair_id": p1, "rater_id": "ana", "score": 2, "round": 1})).await.0, 201);
    // a third rater is turned away
    assert_eq!(post(&client, &base, json!({"pair_id": p1, "rater_id": "cy", "score": 2, "round": 1})).await.0, 400);
    // only the disagreement goes to round 2
    assert_eq!(post(&client, &base, json!({"pair_id": p1, "rater_id": "ana", "score": 2, "round": 2})).await.0, 400);
    let queue = pairs(&client, &base).await;
    assert!(queue[0].round_2_required && !queue[1].round_2_required);
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ana", "score": 3, "round": 2})).await.0, 201);
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ben", "score": 4, "round": 2})).await.0, 201);

    let progress: Progress = client.get(format!("{base}/api/progress")).send().await.unwrap().json().await.unwrap();
    assert_eq!(progress.total_pairs, queue.len());
    assert_eq!(progress.round_2_pairs, 1);
    assert_eq!(progress.raters, vec!["ana", "ben"]);
    let count = |r: &str, round: u32| progress.counts.iter().find(|c| c.rater_id == r && c.round == round).unwrap().rated;
    assert_eq!((count("ana", 1), count("ana", 2), count("ben", 1), count("ben", 2)), (2, 1, 2, 1));

    let labels = aggregate_ratings(&read_ratings_log(log).unwrap()).unwrap();
    let l0 = labels.iter().find(|l| &l.pair_id == p0).unwrap();
    assert_eq!(l0.label, Label::Replica);
}

#[tokio::test]
async fn ratings_survive_a_restart() {
    let s = setup();
    let (base, handle) = start(&s.cfg).await;
    let client = reqwest::Client::new();
    let p0 = pairs(&client, &base).await[0].pair_id.clone();
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ana", "score": 1, "round": 1})).await.0, 201);
    // abrupt stop, no graceful shutdown
    handle.abort();
    let _ = handle.await;

    let (base, _h) = start(&s.cfg).await;
    let queue = pairs(&client, &base).await;
    assert_eq!(queue[0].rated_by.len(), 1);
    assert_eq!(queue[0].rated_by[0].rater_id, "ana");
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ana", "score": 2, "round": 1})).await.0, 409);
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ben", "score": 1, "round": 1})).await.0, 201);
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "cy", "score": 1, "round": 1})).await.0, 400);
    assert_eq!(log_lines(&s.cfg.ratings_log), 2);
}

#[tokio::test]
async fn registered_raters_only() {
    let s = setup();
    let cfg = ServiceConfig {
        raters: Some(vec!["x".into(), "y".into()]),
        ..s.cfg.clone()
    };
    let (base, _h) = start(&cfg).await;
    let client = reqwest::Client::new();
    let p0 = pairs(&client, &base).await[0].pair_id.clone();
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "ana", "score": 1, "round": 1})).await.0, 400);
    assert_eq!(post(&client, &base, json!({"pair_id": p0, "rater_id": "y", "score": 1, "round": 1})).await.0, 201);
}

#[test]
fn port_in_use_fails_at_startup() {
    let s = setup();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = Command::new(env!("CARGO_BIN_EXE_relict"))
        .arg("serve")
        .arg("--records")
        .arg(&s.cfg.records)
        .arg("--training")
        .arg(&s.cfg.training)
        .arg("--synthetic")
        .arg(&s.cfg.synthetic)
        .arg("--ratings-log")
        .arg(&s.cfg.ratings_log)
        .args(["--port", &port])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cannot bind"), "{err}");
}
