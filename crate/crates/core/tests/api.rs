mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use patina_core::api::{router, AppState};
use patina_core::store::BoardStore;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    app: Router,
    _dir: tempfile::TempDir,
    board: String,
}

async fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let store = BoardStore::open(dir.path()).unwrap();
    let board = store.put_board("chart", &common::png(800, 400)).unwrap();
    let app = router(Arc::new(AppState::new(store)));
    Harness { app, _dir: dir, board: board.id.to_string() }
}

async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    accept: Option<&str>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(a) = accept {
        req = req.header(header::ACCEPT, a);
    }
    let req = match body {
        Some(v) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_of(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = send(app, method, uri, body, None).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn anchor(x: f64, y: f64, w: f64, h: f64) -> Value {
    json!({"x": x, "y": y, "w": w, "h": h})
}

async fn post_comment(h: &Harness, body: Value) -> (StatusCode, Value) {
    json_of(&h.app, Method::POST, &format!("/api/boards/{}/comments", h.board), Some(body)).await
}

async fn list(h: &Harness, query: &str) -> Vec<Value> {
    let (status, v) = json_of(&h.app, Method::GET, &format!("/api/boards/{}/comments{query}", h.board), None).await;
    assert_eq!(status, StatusCode::OK);
    v.as_array().unwrap().clone()
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn comment_with_two_anchors_is_created() {
    let h = harness().await;
    let (status, c) = post_comment(
        &h,
        json!({"text": "peak", "category": "questions", "anchors": [anchor(0.1, 0.1, 0.2, 0.2), anchor(0.5, 0.5, 0.3, 0.1)]}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(c["anchors"].as_array().unwrap().len(), 2);
    assert_eq!(c["likes"], 0);
    assert_eq!(c["category"], "questions");
    let listed = list(&h, "").await;
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0]["id"], c["id"]);
}

#[tokio::test]
async fn validation_errors_are_422_and_do_not_mutate() {
    let h = harness().await;
    let (status, v) = post_comment(&h, json!({"text": "x", "anchors": []})).await;
    assert_eq!((status, error_code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "no_anchors"));

    let (status, v) = post_comment(&h, json!({"anchors": [anchor(0.9, 0.1, 0.2, 0.1)]})).await;
    assert_eq!((status, error_code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "out_of_bounds"));

    let (status, v) = post_comment(&h, json!({"anchors": [anchor(0.1, 0.1, 0.0, 0.1)]})).await;
    assert_eq!((status, error_code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "zero_area"));

    assert!(list(&h, "").await.is_empty());
}

#[tokio::test]
async fn malformed_json_is_400_without_mutation() {
    let h = harness().await;
    let req = Request::post(format!("/api/boards/{}/comments", h.board))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{\"anchors\": [oops"))
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(error_code(&body), "malformed_json");
    assert!(list(&h, "").await.is_empty());
}

#[tokio::test]
async fn unknown_board_and_comment_are_404() {
    let h = harness().await;
    let (status, v) = json_of(&h.app, Method::GET, "/api/boards/nope/patina?encoding=activity", None).await;
    assert_eq!((status, error_code(&v)), (StatusCode::NOT_FOUND, "not_found"));
    let (status, _) = json_of(&h.app, Method::POST, "/api/comments/nope/like", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = json_of(&h.app, Method::POST, "/api/comments/nope/replies", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn board_metadata_and_image() {
    let h = harness().await;
    let (status, b) = json_of(&h.app, Method::GET, &format!("/api/boards/{}", h.board), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((b["image_width_px"].as_u64(), b["image_height_px"].as_u64()), (Some(800), Some(400)));
    let (status, bytes) = send(&h.app, Method::GET, &format!("/api/boards/{}/image", h.board), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, common::png(800, 400));
    let (_, boards) = json_of(&h.app, Method::GET, "/api/boards", None).await;
    assert_eq!(boards.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn create_board_via_multipart() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(AppState::new(BoardStore::open(dir.path()).unwrap())));
    let boundary = "XBOUNDARYX";
    let mut body = Vec::new();
    body.extend_from_slice(
        format!("--{boundary}\r\nContent-Disposition: form-data; name=\"title\"\r\n\r\nSales\r\n").as_bytes(),
    );
    body.extend_from_slice(
        format!("--{boundary}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"c.png\"\r\nContent-Type: image/png\r\n\r\n")
            .as_bytes(),
    );
    body.extend_from_slice(&common::png(64, 32));
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    let req = Request::post("/api/boards")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let b: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(b["title"], "Sales");
    assert_eq!((b["image_width_px"].as_u64(), b["image_height_px"].as_u64()), (Some(64), Some(32)));

    let bad = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"image\"\r\n\r\nnot an image\r\n--{boundary}--\r\n"
    );
    let req = Request::post("/api/boards")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(bad))
        .unwrap();
    assert_eq!(app.oneshot(req).await.unwrap().status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn replies_and_reply_to_reply() {
    let h = harness().await;
    let (_, c) = post_comment(&h, json!({"anchors": [anchor(0.0, 0.0, 0.5, 0.5)]})).await;
    let cid = c["id"].as_str().unwrap();
    let (status, parent) =
        json_of(&h.app, Method::POST, &format!("/api/comments/{cid}/replies"), Some(json!({"text": "agreed"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(parent["replies"].as_array().unwrap().len(), 1);
    let rid = parent["replies"][0]["id"].as_str().unwrap();
    let (status, v) =
        json_of(&h.app, Method::POST, &format!("/api/comments/{rid}/replies"), Some(json!({"text": "nested"}))).await;
    assert_eq!((status, error_code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "reply_to_reply"));
    assert_eq!(list(&h, "").await[0]["replies"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn likes_reorder_popularity_sort() {
    let h = harness().await;
    let (_, a) = post_comment(&h, json!({"anchors": [anchor(0.0, 0.0, 0.2, 0.2)]})).await;
    let (_, b) = post_comment(&h, json!({"anchors": [anchor(0.3, 0.3, 0.2, 0.2)]})).await;
    for _ in 0..2 {
        let (status, _) =
            json_of(&h.app, Method::POST, &format!("/api/comments/{}/like", a["id"].as_str().unwrap()), None).await;
        assert_eq!(status, StatusCode::OK);
    }
    let sorted = list(&h, "?sort=popularity").await;
    assert_eq!(sorted[0]["id"], a["id"]);
    assert_eq!(sorted[0]["likes"], 2);
    let newest = list(&h, "").await;
    assert_eq!(newest[0]["id"], b["id"]);
    let (status, _) =
        json_of(&h.app, Method::GET, &format!("/api/boards/{}/comments?sort=loudest", h.board), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn patina_json_encodings() {
    let h = harness().await;
    let (_, a) = post_comment(&h, json!({"category": "critique", "anchors": [anchor(0.0, 0.0, 0.5, 0.5)]})).await;
    post_comment(
        &h,
        json!({"category": "questions", "anchors": [anchor(0.2, 0.2, 0.2, 0.2), anchor(0.6, 0.1, 0.1, 0.1)]}),
    )
    .await;
    json_of(&h.app, Method::POST, &format!("/api/comments/{}/like", a["id"].as_str().unwrap()), None).await;
    let uri = |q: &str| format!("/api/boards/{}/patina?{q}", h.board);

    let (status, spec) = json_of(&h.app, Method::GET, &uri("encoding=popularity"), None).await;
    assert_eq!(status, StatusCode::OK);
    let widths: Vec<f64> =
        spec["rect_marks"].as_array().unwrap().iter().map(|m| m["stroke_width_px"].as_f64().unwrap()).collect();
    assert_eq!(widths.len(), 3);
    assert!(widths.iter().all(|w| (1.0..=10.0).contains(w)));
    assert!(widths.contains(&10.0) && widths.contains(&1.0));

    let (_, spec) = json_of(&h.app, Method::GET, &uri("encoding=none"), None).await;
    assert!(spec["rect_marks"].as_array().unwrap().is_empty());
    assert_eq!(spec["background_saturation"], 1.0);

    let (_, spec) = json_of(&h.app, Method::GET, &uri("encoding=category&category=critique"), None).await;
    let marks = spec["rect_marks"].as_array().unwrap();
    assert_eq!(marks.len(), 1);
    assert_eq!(marks[0]["comment_id"], a["id"]);
    assert_eq!(spec["background_saturation"], 0.3);

    // the filter is ignored by other encodings
    let (_, spec) = json_of(&h.app, Method::GET, &uri("encoding=activity&category=critique"), None).await;
    assert_eq!(spec["rect_marks"].as_array().unwrap().len(), 3);

    let (status, v) = json_of(&h.app, Method::GET, &uri("encoding=sparkle"), None).await;
    assert_eq!((status, error_code(&v)), (StatusCode::BAD_REQUEST, "unknown_encoding"));
    let (status, _) = json_of(&h.app, Method::GET, &uri("encoding=activity&category=rants"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn patina_svg_by_accept_or_format() {
    let h = harness().await;
    post_comment(&h, json!({"anchors": [anchor(0.25, 0.25, 0.5, 0.5)]})).await;
    let uri = format!("/api/boards/{}/patina?encoding=activity", h.board);
    let (status, by_accept) = send(&h.app, Method::GET, &uri, None, Some("image/svg+xml")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, by_query) = send(&h.app, Method::GET, &format!("{uri}&format=svg"), None, None).await;
    assert_eq!(by_accept, by_query);
    let svg = String::from_utf8(by_accept).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains(&format!("/api/boards/{}/image", h.board)));
    assert!(svg.contains(r#"x="200" y="100" width="400" height="200""#));

    let (_, inline) = send(&h.app, Method::GET, &format!("{uri}&format=svg&image=inline"), None, None).await;
    assert!(String::from_utf8(inline).unwrap().contains("data:image/png;base64,"));
}

#[tokio::test]
async fn stats_endpoint() {
    let h = harness().await;
    post_comment(&h, json!({"category": "critique", "anchors": [anchor(0.0, 0.0, 0.5, 0.5)]})).await;
    let (status, s) = json_of(&h.app, Method::GET, &format!("/api/boards/{}/stats", h.board), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["total_comments"], 1);
    assert_eq!(s["category_histogram"]["critique"], 1);
}

#[tokio::test]
async fn events_polling_with_cursor() {
    let h = harness().await;
    let (_, c) = post_comment(&h, json!({"anchors": [anchor(0.0, 0.0, 0.5, 0.5)]})).await;
    let cid = c["id"].as_str().unwrap();
    json_of(&h.app, Method::POST, &format!("/api/comments/{cid}/replies"), Some(json!({"text": "r"}))).await;
    json_of(&h.app, Method::POST, &format!("/api/comments/{cid}/like"), None).await;
    // a rejected mutation publishes nothing
    post_comment(&h, json!({"anchors": []})).await;

    let events = |since: u64| format!("/api/boards/{}/events?since={since}", h.board);
    let (_, all) = json_of(&h.app, Method::GET, &events(0), None).await;
    let all = all.as_array().unwrap();
    let kinds: Vec<&str> = all.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["comment_added", "reply_added", "like_added"]);
    let seqs: Vec<u64> = all.iter().map(|e| e["sequence"].as_u64().unwrap()).collect();
    assert_eq!(seqs, [1, 2, 3]);

    let (_, tail) = json_of(&h.app, Method::GET, &events(2), None).await;
    assert_eq!(tail.as_array().unwrap().len(), 1);
    assert_eq!(tail[0]["sequence"], 3);
}

async fn read_sse(app: &Router, uri: &str, last_event_id: Option<&str>, want: usize) -> Vec<(String, Value)> {
    let mut req = Request::get(uri).header(header::ACCEPT, "text/event-stream");
    if let Some(id) = last_event_id {
        req = req.header("last-event-id", id);
    }
    let resp = app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.headers()[header::CONTENT_TYPE], "text/event-stream");
    let mut body = resp.into_body();
    let mut text = String::new();
    let mut out = Vec::new();
    while out.len() < want {
        let frame =
            tokio::time::timeout(Duration::from_secs(5), body.frame()).await.expect("event in time").unwrap().unwrap();
        if let Ok(data) = frame.into_data() {
            text.push_str(std::str::from_utf8(&data).unwrap());
        }
        while let Some(end) = text.find("\n\n") {
            let block: String = text.drain(..end + 2).collect();
            let mut id = None;
            let mut data = None;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = Some(v.trim().to_owned());
                } else if let Some(v) = line.strip_prefix("data:") {
                    data = Some(serde_json::from_str(v.trim()).unwrap());
                }
            }
            if let (Some(id), Some(data)) = (id, data) {
                out.push((id, data));
            }
        }
    }
    out
}

#[tokio::test]
async fn sse_subscribers_see_identical_sequences() {
    let h = harness().await;
    let uri = format!("/api/boards/{}/events", h.board);
    let first = tokio::spawn({
        let app = h.app.clone();
        let uri = uri.clone();
        async move { read_sse(&app, &uri, None, 3).await }
    });
    let second = tokio::spawn({
        let app = h.app.clone();
        let uri = uri.clone();
        async move { read_sse(&app, &uri, None, 3).await }
    });
    tokio::time::sleep(Duration::from_millis(50)).await;
    for i in 0..3 {
        post_comment(&h, json!({"anchors": [anchor(0.1 * i as f64, 0.0, 0.1, 0.1)]})).await;
    }
    let a = first.await.unwrap();
    let b = second.await.unwrap();
    assert_eq!(a, b);
    let ids: Vec<&str> = a.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3"]);
    assert_eq!(a[0].1["kind"], "comment_added");

    // resume after the second event
    let resumed = read_sse(&h.app, &uri, Some("2"), 1).await;
    assert_eq!(resumed[0].0, "3");
}

#[tokio::test]
async fn read_your_writes_after_each_mutation() {
    let h = harness().await;
    let uri = format!("/api/boards/{}/patina?encoding=activity", h.board);
    for i in 0..5 {
        post_comment(&h, json!({"anchors": [anchor(0.1 * i as f64, 0.1, 0.1, 0.1)]})).await;
        let (_, spec) = json_of(&h.app, Method::GET, &uri, None).await;
        assert_eq!(spec["rect_marks"].as_array().unwrap().len(), i + 1);
        assert_eq!(list(&h, "").await.len(), i + 1);
    }
}
