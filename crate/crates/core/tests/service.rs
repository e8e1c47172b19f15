mod common;

use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use csa_core::service::{router, AppState, SessionConfig};

struct Server {
    base: String,
    client: Client,
    _dir: Option<tempfile::TempDir>,
}

impl Server {
    async fn start(config: SessionConfig) -> Server {
        let dir = tempfile::tempdir().unwrap();
        let mut server = Server::on(dir.path(), config).await;
        server._dir = Some(dir);
        server
    }

    async fn on(data: &std::path::Path, config: SessionConfig) -> Server {
        let state = AppState::open(data, config).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        tokio::spawn(async move { axum::serve(listener, router(state)).await });
        Server { base, client: Client::new(), _dir: None }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn put_sample(&self, name: &str) -> Value {
        let r = common::sample_resource(name);
        let resp = self
            .client
            .put(self.url(&format!("/products/{}", r.product.barcode)))
            .body(common::sample(name))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        resp.json().await.unwrap()
    }

    async fn create(&self, barcode: &str, level: u32) -> (StatusCode, Value) {
        let resp = self
            .client
            .post(self.url("/sessions"))
            .json(&json!({"barcode": barcode, "abilityLevel": level}))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn action(&self, id: &str, action: &str) -> (StatusCode, Value) {
        let resp = self
            .client
            .post(self.url(&format!("/sessions/{id}/actions")))
            .json(&json!({"action": action}))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn place(&self, id: &str) -> Value {
        let resp = self
            .client
            .post(self.url(&format!("/sessions/{id}/actions")))
            .json(&json!({"action": "PlaceLoad", "grams": 400, "initialTempC": 5.0}))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        resp.json().await.unwrap()
    }

    async fn clock(&self, id: &str, dt: u64) -> (StatusCode, Value) {
        let resp = self
            .client
            .post(self.url(&format!("/sessions/{id}/clock")))
            .json(&json!({"dtMillis": dt}))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }
}

const SOUP: &str = "4006381333931";

#[tokio::test]
async fn products_round_trip_and_count_revisions() {
    let s = Server::start(SessionConfig::default()).await;
    assert_eq!(s.put_sample("soup.json").await["revision"], 1);
    let second = s.put_sample("soup.json").await;
    assert_eq!(second["revision"], 2);
    assert_eq!(second["warnings"][0]["rule"], "L2");
    let resp = s.client.get(s.url(&format!("/products/{SOUP}"))).send().await.unwrap();
    assert_eq!(resp.headers()["x-revision"], "2");
    let body = resp.bytes().await.unwrap();
    let canonical = csa_core::dsl::serialize_resource(&common::sample_resource("soup.json"));
    assert_eq!(body.as_ref(), canonical.as_slice());
}

#[tokio::test]
async fn product_errors() {
    let s = Server::start(SessionConfig::default()).await;
    let missing = s.client.get(s.url(&format!("/products/{SOUP}"))).send().await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);
    assert_eq!(missing.json::<Value>().await.unwrap()["code"], "NotFound");

    let mismatch =
        s.client.put(s.url("/products/5901234123457")).body(common::sample("soup.json")).send().await.unwrap();
    assert_eq!(mismatch.status(), StatusCode::BAD_REQUEST);
    assert_eq!(mismatch.json::<Value>().await.unwrap()["code"], "BarcodeMismatch");

    let mut doc: Value = serde_json::from_slice(&common::sample("soup.json")).unwrap();
    doc["product"]["colour"] = json!("green");
    let unknown = s.client.put(s.url(&format!("/products/{SOUP}"))).json(&doc).send().await.unwrap();
    assert_eq!(unknown.status(), StatusCode::BAD_REQUEST);
    let body: Value = unknown.json().await.unwrap();
    assert_eq!(body["code"], "ParseFailed");
    assert_eq!(body["diagnostics"][0]["rule"], "SchemaError");
    assert_eq!(body["diagnostics"][0]["path"], "/product/colour");

    let dirty = s
        .client
        .put(s.url("/products/4005000000421"))
        .body(common::sample("invalid/door-open-heating.json"))
        .send()
        .await
        .unwrap();
    assert_eq!(dirty.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = dirty.json().await.unwrap();
    assert_eq!(body["code"], "LintFailed");
    assert!(body["diagnostics"].as_array().unwrap().iter().any(|d| d["rule"] == "L1"));
}

#[tokio::test]
async fn listing_filters_by_category_and_sorts() {
    let s = Server::start(SessionConfig::default()).await;
    let empty: Value = s.client.get(s.url("/products")).send().await.unwrap().json().await.unwrap();
    assert_eq!(empty, json!([]));
    for name in ["soup.json", "rice.json", "lasagne.json"] {
        s.put_sample(name).await;
    }
    let all: Value = s.client.get(s.url("/products")).send().await.unwrap().json().await.unwrap();
    let names: Vec<&str> = all.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(names.len(), 3);
    let soups: Value = s.client.get(s.url("/products?category=soups")).send().await.unwrap().json().await.unwrap();
    assert_eq!(soups.as_array().unwrap().len(), 1);
    assert_eq!(soups[0]["barcode"], SOUP);
}

#[tokio::test]
async fn media_round_trip() {
    let s = Server::start(SessionConfig::default()).await;
    let bytes: Vec<u8> = (0..=255u8).rev().collect();
    let put = s.client.put(s.url("/media/stir.mp4?kind=video")).body(bytes.clone()).send().await.unwrap();
    assert_eq!(put.status(), StatusCode::NO_CONTENT);
    let got = s.client.get(s.url("/media/stir.mp4")).send().await.unwrap();
    assert_eq!(got.headers()["x-media-kind"], "video");
    assert_eq!(got.bytes().await.unwrap().as_ref(), bytes.as_slice());

    let unsafe_name = s.client.put(s.url("/media/..%2Fetc?kind=text")).body("x").send().await.unwrap();
    assert_eq!(unsafe_name.status(), StatusCode::BAD_REQUEST);
    assert_eq!(unsafe_name.json::<Value>().await.unwrap()["code"], "UnsafeName");
    let missing = s.client.get(s.url("/media/nothing.png")).send().await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);
    let no_kind = s.client.put(s.url("/media/a.png")).body("x").send().await.unwrap();
    assert_eq!(no_kind.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn acknowledged_writes_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    {
        let s = Server::on(dir.path(), SessionConfig::default()).await;
        s.put_sample("soup.json").await;
        s.put_sample("soup.json").await;
    }
    let s = Server::on(dir.path(), SessionConfig::default()).await;
    let resp = s.client.get(s.url(&format!("/products/{SOUP}"))).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["x-revision"], "2");
    assert_eq!(s.put_sample("soup.json").await["revision"], 3);
}

#[tokio::test]
async fn session_lifecycle() {
    let s = Server::start(SessionConfig::default()).await;
    s.put_sample("soup.json").await;

    let (status, snap) = s.create(SOUP, 1).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(snap["phase"], "AwaitingUser");
    assert_eq!(snap["instructionIndex"], 0);
    assert_eq!(snap["revision"], 0);
    assert_eq!(snap["pendingMedia"][0]["name"], "door-open.png");
    let id = snap["sessionId"].as_str().unwrap().to_owned();

    s.action(&id, "OpenDoor").await;
    s.place(&id).await;
    let (_, heating) = s.action(&id, "CloseDoor").await;
    assert_eq!(heating["phase"], "Heating");
    assert_eq!(heating["remainingMillis"], 120_000);

    s.clock(&id, 30_000).await;
    let (status, paused) = s.action(&id, "OpenDoor").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(paused["phase"], "HeatingPaused");
    assert_eq!(paused["appliance"]["magnetronOn"], false);
    assert_eq!(paused["remainingMillis"], 90_000);

    let (status, refused) = s.action(&id, "OpenDoor").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(refused["code"], "PreconditionViolated");
    let unchanged: Value = s.client.get(s.url(&format!("/sessions/{id}"))).send().await.unwrap().json().await.unwrap();
    assert_eq!(unchanged, paused);

    s.action(&id, "CloseDoor").await;
    let (_, done) = s.clock(&id, 90_000).await;
    assert_eq!(done["phase"], "AwaitingUser");
    assert_eq!(done["instructionIndex"], 4);

    let (status, zero) = s.clock(&id, 0).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(zero["code"], "InvalidClockStep");
}

#[tokio::test]
async fn confirm_timer_and_completion() {
    let s = Server::start(SessionConfig::default()).await;
    s.put_sample("popcorn.json").await;
    s.put_sample("porridge.json").await;

    let (_, snap) = s.create("5012345678900", 1).await;
    let id = snap["sessionId"].as_str().unwrap().to_owned();
    let (_, confirmed) = s.action(&id, "Confirm").await;
    assert_eq!(confirmed["instructionIndex"], 1);

    let (_, snap) = s.create("7622200000128", 1).await;
    let id = snap["sessionId"].as_str().unwrap().to_owned();
    s.action(&id, "OpenDoor").await;
    s.place(&id).await;
    s.action(&id, "CloseDoor").await;
    let (_, cooled) = s.clock(&id, 150_000).await;
    assert_eq!(cooled["phase"], "AwaitingUser");
    assert_eq!(cooled["instructionIndex"], 4);
    let (_, done) = s.clock(&id, 60_000).await;
    assert_eq!(done["phase"], "Complete");
    let (status, after) = s.action(&id, "Confirm").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["phase"], "Complete");
    assert_eq!(after["lastEffects"], json!([]));
}

#[tokio::test]
async fn session_selection_and_errors() {
    let s = Server::start(SessionConfig { max_sessions: 2, ..SessionConfig::default() }).await;
    s.put_sample("soup.json").await;
    let (status, missing) = s.create("5901234123457", 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(missing["code"], "NotFound");

    let (_, snap) = s.create(SOUP, 99).await;
    assert_eq!(snap["setId"], "brief");
    assert_eq!(snap["abilityLevel"], 99);
    s.create(SOUP, 1).await;
    let (status, full) = s.create(SOUP, 1).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(full["code"], "SessionLimitExceeded");

    let unknown = s.client.get(s.url("/sessions/nope/stream")).send().await.unwrap();
    assert_eq!(unknown.status(), StatusCode::NOT_FOUND);
    assert_eq!(unknown.json::<Value>().await.unwrap()["code"], "UnknownSession");
    let (status, _) = s.action("nope", "Confirm").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = s.action(snap["sessionId"].as_str().unwrap(), "Wait").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let s = Server::start(SessionConfig { idle_expiry: Duration::from_millis(50), ..SessionConfig::default() }).await;
    s.put_sample("soup.json").await;
    let (_, snap) = s.create(SOUP, 1).await;
    let id = snap["sessionId"].as_str().unwrap();
    tokio::time::sleep(Duration::from_millis(120)).await;
    let resp = s.client.get(s.url(&format!("/sessions/{id}"))).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::NOT_FOUND);
}

async fn read_lines(resp: &mut reqwest::Response, n: usize) -> Vec<Value> {
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < n {
        let chunk = tokio::time::timeout(Duration::from_secs(5), resp.chunk()).await.unwrap().unwrap().unwrap();
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(nl) = buf.find('\n') {
            let line: String = buf.drain(..=nl).collect();
            out.push(serde_json::from_str(&line).unwrap());
        }
    }
    out
}

#[tokio::test]
async fn stream_starts_at_the_current_snapshot_and_follows_in_order() {
    let s = Server::start(SessionConfig::default()).await;
    s.put_sample("soup.json").await;
    let (_, created) = s.create(SOUP, 1).await;
    let id = created["sessionId"].as_str().unwrap().to_owned();
    let mut stream = s.client.get(s.url(&format!("/sessions/{id}/stream"))).send().await.unwrap();
    assert_eq!(stream.headers()["content-type"], "application/x-ndjson");
    let (_, a) = s.action(&id, "OpenDoor").await;
    let b = s.place(&id).await;
    let lines = read_lines(&mut stream, 3).await;
    assert_eq!(lines, vec![created, a, b]);
}

#[tokio::test]
async fn real_time_pump_advances_the_clock() {
    let s = Server::start(SessionConfig { time_scale: 10.0, ..SessionConfig::default() }).await;
    s.put_sample("soup.json").await;
    let (_, created) = s.create(SOUP, 1).await;
    let id = created["sessionId"].as_str().unwrap();
    tokio::time::sleep(Duration::from_millis(450)).await;
    let snap: Value = s.client.get(s.url(&format!("/sessions/{id}"))).send().await.unwrap().json().await.unwrap();
    assert!(snap["clockMillis"].as_u64().unwrap() >= 1000, "{}", snap["clockMillis"]);
    assert!(snap["revision"].as_u64().unwrap() >= 1);
}

#[test]
fn serve_command_round_trips_a_sample() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = std::process::Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(["serve", "--data", dir.path().to_str().unwrap()])
        .env("CSA_PORT", port.to_string())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(async {
        let client = Client::new();
        let url = format!("http://127.0.0.1:{port}/products/{SOUP}");
        for _ in 0..100 {
            if let Ok(resp) = client.put(&url).body(common::sample("soup.json")).send().await {
                assert_eq!(resp.status(), StatusCode::OK);
                return client.get(&url).send().await.unwrap().bytes().await.unwrap();
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        panic!("server did not come up");
    });
    child.kill().unwrap();
    child.wait().unwrap();
    let canonical = csa_core::dsl::serialize_resource(&common::sample_resource("soup.json"));
    assert_eq!(result.as_ref(), canonical.as_slice());
    assert!(dir.path().join(format!("products/{SOUP}.json")).exists());
}
