mod common;

use std::collections::HashMap;

use axum::http::{Method, StatusCode};
use axum::Router;
use bevcal_cli::service::{self, AppState, PairInput};
use bevcal_core::camera::{camera_for_principal_point, vanishing_points, CameraRecord};
use bevcal_core::projective::{
    estimate_homography_dlt, invert, Correspondence, CorrespondenceSet, Homography, PlanePoint,
};
use bevcal_core::raster::{decode_png, RasterImage};
use bevcal_core::warp::{warp_image, BevFrame, Interpolation};
use common::{get, json_request, multipart, pattern_png, raw_json_request, send, Part, Reply};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Deserialize)]
struct SessionFixture {
    map_scale: f64,
    map_origin: [f64; 2],
    pairs: Vec<PairInput>,
}

fn session_fixture() -> SessionFixture {
    common::read_fixture("service_session.json")
}

fn app() -> Router {
    service::router(AppState::in_memory(), None)
}

async fn create(app: &Router) -> String {
    let r = send(app, json_request(Method::POST, "/api/sessions", &json!({"name": "junction"}))).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.revision(), 0);
    r.json()["id"].as_str().unwrap().to_string()
}

async fn upload(app: &Router, id: &str, camera: Vec<u8>, fx: &SessionFixture) -> Reply {
    let r = send(
        app,
        multipart(
            &format!("/api/sessions/{id}/images"),
            &[
                Part::File("camera", camera),
                Part::File("map", pattern_png(40, 30)),
                Part::Text("map_scale", fx.map_scale.to_string()),
                Part::Text(
                    "map_origin",
                    format!("{},{}", fx.map_origin[0], fx.map_origin[1]),
                ),
            ],
        ),
    )
    .await;
    assert_eq!(r.status, StatusCode::NO_CONTENT, "{}", String::from_utf8_lossy(&r.body));
    r
}

async fn put_pairs(app: &Router, id: &str, pairs: &[PairInput]) -> Reply {
    let r = send(
        app,
        json_request(
            Method::PUT,
            &format!("/api/sessions/{id}/correspondences"),
            &serde_json::to_value(pairs).unwrap(),
        ),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(r.json()["revision"].as_u64().unwrap(), r.revision());
    r
}

async fn calibration(app: &Router, id: &str) -> Reply {
    let r = send(app, get(&format!("/api/sessions/{id}/calibration"))).await;
    assert_eq!(r.status, StatusCode::OK);
    r
}

/// Calibrated session with the camera fixture pairs.
async fn calibrated(app: &Router, n_pairs: usize) -> (String, SessionFixture) {
    let fx = session_fixture();
    let id = create(app).await;
    upload(app, &id, pattern_png(1920, 1080), &fx).await;
    put_pairs(app, &id, &fx.pairs[..n_pairs]).await;
    (id, fx)
}

/// Library calibration computed without the service's own helpers.
fn library_homography(fx: &SessionFixture, pairs: &[PairInput]) -> Homography {
    let [ox, oy] = fx.map_origin;
    let set = CorrespondenceSet::new(
        pairs
            .iter()
            .map(|p| {
                let world = PlanePoint::new(ox + fx.map_scale * p.map_px.x, oy - fx.map_scale * p.map_px.y);
                Correspondence::new(world, p.image_px)
            })
            .collect(),
    );
    estimate_homography_dlt(&set).unwrap()
}

fn residuals(body: &Value) -> Vec<f64> {
    body["residuals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[tokio::test]
async fn four_exact_pairs_calibrate() {
    let app = app();
    let (id, fx) = calibrated(&app, 4).await;
    let r = calibration(&app, &id).await;
    let body = r.json();
    assert_eq!(body["status"], "ok");
    assert_eq!(body["revision"].as_u64().unwrap(), r.revision());
    assert!(body["rms"].as_f64().unwrap() <= 1e-6);
    assert!(residuals(&body).iter().all(|&e| e <= 1e-6));
    let h: Homography = serde_json::from_value(body["H_ori_world"].clone()).unwrap();
    let h_inv: Homography = serde_json::from_value(body["H_world_ori"].clone()).unwrap();
    assert_eq!(h, library_homography(&fx, &fx.pairs[..4]));
    assert_eq!(h_inv, invert(&h).unwrap());
}

#[tokio::test]
async fn three_pairs_are_insufficient() {
    let app = app();
    let (id, _) = calibrated(&app, 3).await;
    let body = calibration(&app, &id).await.json();
    assert_eq!(body["status"], "insufficient_points");
    assert!(body["H_world_ori"].is_null());
    assert!(body["H_ori_world"].is_null());
}

#[tokio::test]
async fn collinear_pairs_are_degenerate() {
    let app = app();
    let id = create(&app).await;
    let pairs: Vec<PairInput> = (0..5)
        .map(|i| PairInput {
            map_px: PlanePoint::new(i as f64, 2.0 * i as f64),
            image_px: PlanePoint::new(3.0 * i as f64, i as f64),
            label: None,
        })
        .collect();
    put_pairs(&app, &id, &pairs).await;
    let body = calibration(&app, &id).await.json();
    assert_eq!(body["status"], "degenerate");
    assert!(body["message"].as_str().is_some());
}

#[tokio::test]
async fn single_outlier_dominates_residuals() {
    // overhead view of a square and its center, the center misplaced by 10 px
    let fx: SessionFixture = common::read_fixture("overhead_session.json");
    let app = app();
    let id = create(&app).await;
    for k in 0..8 {
        let a = k as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
        let mut pairs = fx.pairs.clone();
        pairs[4].image_px.x += 10.0 * a.cos();
        pairs[4].image_px.y += 10.0 * a.sin();
        put_pairs(&app, &id, &pairs).await;
        let body = calibration(&app, &id).await.json();
        assert_eq!(body["status"], "ok");
        let res = residuals(&body);
        let rms = body["rms"].as_f64().unwrap();
        for &e in &res[..4] {
            assert!(res[4] > e, "{res:?}");
            assert!(rms > e, "rms {rms} vs {res:?}");
        }
        assert_eq!(body["max"].as_f64().unwrap(), res[4]);
    }
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = app();
    for uri in [
        "/api/sessions/nope",
        "/api/sessions/nope/calibration",
        "/api/sessions/nope/camera?px=1&py=2",
        "/api/sessions/nope/bev-preview?ppm=10&w=10&h=10",
        "/api/sessions/nope/images/camera",
    ] {
        let r = send(&app, get(uri)).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{uri}");
        assert!(r.json()["error"].is_string());
    }
    let r = send(&app, json_request(Method::PUT, "/api/sessions/nope/correspondences", &json!([]))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = send(&app, multipart("/api/sessions/nope/images", &[Part::Text("map_scale", "1".into())])).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400_with_field() {
    let app = app();
    let id = create(&app).await;
    let uri = format!("/api/sessions/{id}/correspondences");
    let cases = [
        (r#"[{"map_px": [1, 2], "image_px": [3, "x"]}]"#, Some("[0].image_px")),
        (r#"[{"map_px": [1, 2], "image_px": [3, 4]}, {"image_px": [1, 1]}]"#, Some("[1]")),
        (r#"{"pairs": []}"#, None),
        ("not json", None),
    ];
    for (body, field) in cases {
        let r = send(&app, raw_json_request(Method::PUT, &uri, body.into())).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{body}");
        let err = r.json();
        assert!(err["error"].is_string());
        if let Some(field) = field {
            assert!(err["field"].as_str().unwrap().starts_with(field), "{err}");
        }
    }
    let r = send(&app, raw_json_request(Method::POST, "/api/sessions", r#"{"title": 3}"#.into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let images = format!("/api/sessions/{id}/images");
    for (parts, field) in [
        (vec![Part::Text("map_scale", "-2".into())], "map_scale"),
        (vec![Part::Text("map_scale", "abc".into())], "map_scale"),
        (vec![Part::Text("map_origin", "1;2".into())], "map_origin"),
        (vec![Part::File("camera", b"not a png".to_vec())], "camera"),
        (vec![Part::Text("extra", "1".into())], "extra"),
    ] {
        let r = send(&app, multipart(&images, &parts)).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST);
        assert_eq!(r.json()["field"], field);
    }
    // rejected requests leave the session untouched
    let r = send(&app, get(&format!("/api/sessions/{id}"))).await;
    assert_eq!(r.revision(), 0);
    let r = send(&app, get(&format!("/api/sessions/{id}/bev-preview?ppm=0&w=10&h=10"))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "ppm");
}

#[tokio::test]
async fn revisions_increase_on_every_mutation() {
    let app = app();
    let fx = session_fixture();
    let id = create(&app).await;
    let mut last = 0;
    for n in [1, 4, 6, 0] {
        let r = put_pairs(&app, &id, &fx.pairs[..n]).await;
        assert_eq!(r.revision(), last + 1);
        last = r.revision();
    }
    let r = upload(&app, &id, pattern_png(8, 8), &fx).await;
    assert_eq!(r.revision(), last + 1);
    for uri in [
        format!("/api/sessions/{id}"),
        format!("/api/sessions/{id}/calibration"),
        format!("/api/sessions/{id}/camera?px=1&py=1"),
        format!("/api/sessions/{id}/images/map"),
    ] {
        assert_eq!(send(&app, get(&uri)).await.revision(), last + 1, "{uri}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_are_totally_ordered() {
    let app = app();
    let fx = session_fixture();
    let id = create(&app).await;
    let n_writers = 24;
    let mut tasks = Vec::new();
    for k in 0..n_writers {
        let (app, id) = (app.clone(), id.clone());
        let mut pairs = fx.pairs.clone();
        // distinct lists so each revision identifies its writer
        pairs[k % 6].image_px.x += 0.5 * (k + 1) as f64;
        pairs.truncate(4 + k % 3);
        tasks.push(tokio::spawn(async move {
            let r = put_pairs(&app, &id, &pairs).await;
            (r.revision(), pairs)
        }));
    }
    let mut readers = Vec::new();
    for _ in 0..16 {
        let (app, id) = (app.clone(), id.clone());
        readers.push(tokio::spawn(async move {
            let mut seen = Vec::new();
            for _ in 0..8 {
                let r = calibration(&app, &id).await;
                seen.push(r.json());
                tokio::task::yield_now().await;
            }
            seen
        }));
    }
    let mut by_revision: HashMap<u64, Vec<PairInput>> = HashMap::new();
    for t in tasks {
        let (rev, pairs) = t.await.unwrap();
        assert!(by_revision.insert(rev, pairs).is_none(), "revision {rev} reused");
    }
    let mut revs: Vec<u64> = by_revision.keys().copied().collect();
    revs.sort();
    assert_eq!(revs, (1..=n_writers as u64).collect::<Vec<_>>());
    by_revision.insert(0, Vec::new());
    for r in readers {
        for body in r.await.unwrap() {
            let rev = body["revision"].as_u64().unwrap();
            let pairs = &by_revision[&rev];
            let expected = service::calibrate(pairs, &service::MapGeometry::default());
            let mut expected = serde_json::to_value(&expected).unwrap();
            expected["revision"] = json!(rev);
            assert_eq!(body, expected, "revision {rev}");
        }
    }
}

#[tokio::test]
async fn preview_requires_calibration() {
    let app = app();
    let (id, _) = calibrated(&app, 3).await;
    let r = send(&app, get(&format!("/api/sessions/{id}/bev-preview?ppm=10&w=64&h=64"))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.revision(), 2);
}

#[tokio::test]
async fn preview_replays_the_library_warp() {
    let app = app();
    let (id, fx) = calibrated(&app, 6).await;
    let r = send(
        &app,
        get(&format!("/api/sessions/{id}/bev-preview?ppm=8&w=320&h=240&ox=-5&oy=35")),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers["content-type"], "image/png");
    let preview = decode_png(&r.body).unwrap();
    let h = library_homography(&fx, &fx.pairs);
    let bev = BevFrame::new(8.0, PlanePoint::new(-5.0, 35.0), 320, 240).unwrap();
    let camera = decode_png(&pattern_png(1920, 1080)).unwrap();
    let expected = warp_image(&camera, &bev.ori_to_bev(&h).unwrap(), 320, 240, 0.0, Interpolation::Bilinear)
        .unwrap();
    assert_eq!(preview, expected);

    // default origin centers the landmarks
    let r = send(&app, get(&format!("/api/sessions/{id}/bev-preview?ppm=8&w=320&h=240"))).await;
    let session = send(&app, get(&format!("/api/sessions/{id}"))).await;
    assert_eq!(session.json()["pairs"].as_array().unwrap().len(), 6);
    let [ox, oy] = fx.map_origin;
    let n = fx.pairs.len() as f64;
    let cx = fx.pairs.iter().map(|p| ox + fx.map_scale * p.map_px.x).sum::<f64>() / n;
    let cy = fx.pairs.iter().map(|p| oy - fx.map_scale * p.map_px.y).sum::<f64>() / n;
    let bev = BevFrame::new(8.0, PlanePoint::new(cx - 20.0, cy + 15.0), 320, 240).unwrap();
    let expected = warp_image(&camera, &bev.ori_to_bev(&h).unwrap(), 320, 240, 0.0, Interpolation::Bilinear)
        .unwrap();
    assert_eq!(decode_png(&r.body).unwrap(), expected);
}

/// Intensity-weighted centroid of the bright pixels in columns `[x0, x1)`.
fn centroid(img: &RasterImage, x0: usize, x1: usize) -> PlanePoint {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..img.height() {
        for x in x0..x1 {
            let v = img.get(x, y, 0) as f64;
            if v > 16.0 {
                sx += v * x as f64;
                sy += v * y as f64;
                sw += v;
            }
        }
    }
    assert!(sw > 0.0);
    PlanePoint::new(sx / sw, sy / sw)
}

#[tokio::test]
async fn doubling_ppm_doubles_preview_distances() {
    let fx = session_fixture();
    let h = library_homography(&fx, &fx.pairs);
    let (w, hgt) = (1920, 1080);
    let mut data = vec![0u8; w * hgt];
    for world in [PlanePoint::new(5.0, 15.0), PlanePoint::new(15.0, 15.0)] {
        let c = h.apply(world).unwrap();
        for y in 0..hgt {
            for x in 0..w {
                if (x as f64 - c.x).hypot(y as f64 - c.y) <= 4.0 {
                    data[y * w + x] = 255;
                }
            }
        }
    }
    let camera = RasterImage::from_u8(w, hgt, 1, data).unwrap().encode_png().unwrap();
    let app = app();
    let id = create(&app).await;
    upload(&app, &id, camera, &fx).await;
    put_pairs(&app, &id, &fx.pairs).await;
    let mut spans = Vec::new();
    for (ppm, side) in [(10.0, 400usize), (20.0, 800)] {
        let r = send(
            &app,
            get(&format!("/api/sessions/{id}/bev-preview?ppm={ppm}&w={side}&h={side}&ox=-5&oy=35")),
        )
        .await;
        let img = decode_png(&r.body).unwrap();
        let a = centroid(&img, 0, 3 * side / 8);
        let b = centroid(&img, 3 * side / 8, side);
        spans.push(a.distance(&b));
    }
    assert!((spans[0] - 100.0).abs() < 1.0, "{spans:?}");
    assert!((spans[1] / spans[0] - 2.0).abs() < 0.01, "{spans:?}");
}

#[tokio::test]
async fn camera_endpoint_matches_library() {
    let app = app();
    let fx = session_fixture();
    let id = create(&app).await;
    let r = send(&app, get(&format!("/api/sessions/{id}/camera?px=959.5&py=539.5"))).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "uncalibrated");

    upload(&app, &id, pattern_png(1920, 1080), &fx).await;
    put_pairs(&app, &id, &fx.pairs).await;
    let h = library_homography(&fx, &fx.pairs);
    let p = PlanePoint::new(959.5, 539.5);
    let expected = CameraRecord::new(&camera_for_principal_point(&h, &p).unwrap(), &h).unwrap();
    for uri in [
        format!("/api/sessions/{id}/camera?px=959.5&py=539.5"),
        format!("/api/sessions/{id}/camera"),
    ] {
        let body = send(&app, get(&uri)).await.json();
        assert_eq!(body["status"], "ok");
        let rec: CameraRecord = serde_json::from_value(body).unwrap();
        assert_eq!(rec, expected);
    }
    assert!((expected.f - 1100.0).abs() / 1100.0 < 1e-6);

    // just past the x vanishing point, away from the y one, (U - P).(V - P) > 0
    let vp = vanishing_points(&h).unwrap();
    let d = vp.u.sub(&vp.v);
    let n = d.dot(&d).sqrt();
    let bad = PlanePoint::new(vp.u.x + 50.0 * d.x / n, vp.u.y + 50.0 * d.y / n);
    let body = send(&app, get(&format!("/api/sessions/{id}/camera?px={}&py={}", bad.x, bad.y))).await.json();
    assert_eq!(body["status"], "imaginary_focal", "{body}");
}

#[tokio::test]
async fn images_round_trip() {
    let app = app();
    let (id, _) = calibrated(&app, 4).await;
    let r = send(&app, get(&format!("/api/sessions/{id}/images/camera"))).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, pattern_png(1920, 1080));
    let r = send(&app, get(&format!("/api/sessions/{id}/images/other"))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let summary = send(&app, get(&format!("/api/sessions/{id}"))).await.json();
    assert_eq!(summary["camera_image"], json!([1920, 1080]));
    assert_eq!(summary["map_image"], json!([40, 30]));
    assert_eq!(summary["map"]["scale"], 0.25);
}

#[tokio::test]
async fn sessions_persist_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let fx = session_fixture();
    let (id, before) = {
        let app = service::router(AppState::open(Some(dir.path().into())).await.unwrap(), None);
        let id = create(&app).await;
        upload(&app, &id, pattern_png(64, 48), &fx).await;
        put_pairs(&app, &id, &fx.pairs[..5]).await;
        (id.clone(), calibration(&app, &id).await.body)
    };
    let state = AppState::open(Some(dir.path().into())).await.unwrap();
    let app = service::router(state, None);
    let after = calibration(&app, &id).await;
    assert_eq!(after.body, before);
    assert_eq!(after.revision(), 2);
    let img = send(&app, get(&format!("/api/sessions/{id}/images/camera"))).await;
    assert_eq!(img.body, pattern_png(64, 48));
    let r = put_pairs(&app, &id, &fx.pairs).await;
    assert_eq!(r.revision(), 3);
}

#[tokio::test]
async fn static_dir_is_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>bevcal</h1>").unwrap();
    let app = service::router(AppState::in_memory(), Some(dir.path()));
    let r = send(&app, get("/index.html")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, b"<h1>bevcal</h1>");
    let r = send(&app, get("/")).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = send(&app, get("/api/sessions/x")).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}
