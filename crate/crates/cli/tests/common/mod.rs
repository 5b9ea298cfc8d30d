#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use bevcal_core::eval::{build_report, evaluate_dataset, MatchCriterion};
use bevcal_core::projective::{estimate_homography_dlt, CorrespondenceSet};
use bevcal_core::raster::RasterImage;
use bevcal_core::rbox::RBox;
use bevcal_core::synth::{frame_seeds, generate_frame, perturb_labels, PerturbConfig, ScenarioSpec};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture<T: serde::de::DeserializeOwned>(name: &str) -> T {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub fn bevcal<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_bevcal"))
        .args(args)
        .output()
        .expect("spawn bevcal")
}

pub fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Seeds and noise levels shared by the scripted and in-process pipelines.
pub struct Pipeline {
    pub n_frames: u64,
    pub camera_seed: u64,
    pub n_cameras: usize,
    pub perturb_seed: u64,
    pub perturb: PerturbConfig,
    pub criterion: &'static str,
}

impl Pipeline {
    pub fn fixture(criterion: &'static str) -> Self {
        Self {
            n_frames: 12,
            camera_seed: 5,
            n_cameras: 4,
            perturb_seed: 21,
            perturb: PerturbConfig {
                sigma_center: 0.3,
                sigma_angle: 0.05,
                drop_rate: 0.1,
                spurious_rate: 0.2,
                confidence_scale: 1.0,
            },
            criterion,
        }
    }

    /// Runs calibrate, synth-cameras, synth-frames, perturb and eval through
    /// the binary and returns the report text.
    pub fn run_cli(&self, dir: &Path) -> String {
        let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "calibrate".into(),
                "--pairs".into(),
                fixture("camera_pairs.json").to_string_lossy().into_owned(),
                "--out".into(),
                p("H.json"),
            ],
            vec![
                "synth-cameras".into(),
                "--homography".into(),
                p("H.json"),
                "--image-size".into(),
                "1920x1080".into(),
                "--n".into(),
                self.n_cameras.to_string(),
                "--seed".into(),
                self.camera_seed.to_string(),
                "--out".into(),
                p("cameras.json"),
            ],
            vec![
                "synth-frames".into(),
                "--spec".into(),
                fixture("scenario.json").to_string_lossy().into_owned(),
                "--homography".into(),
                p("H.json"),
                "--n-frames".into(),
                self.n_frames.to_string(),
                "--out".into(),
                p("gt"),
            ],
            vec![
                "perturb".into(),
                "--spec".into(),
                fixture("scenario.json").to_string_lossy().into_owned(),
                "--gt".into(),
                p("gt"),
                "--out".into(),
                p("det"),
                "--sigma-center".into(),
                self.perturb.sigma_center.to_string(),
                "--sigma-angle".into(),
                self.perturb.sigma_angle.to_string(),
                "--drop-rate".into(),
                self.perturb.drop_rate.to_string(),
                "--spurious-rate".into(),
                self.perturb.spurious_rate.to_string(),
                "--confidence-scale".into(),
                self.perturb.confidence_scale.to_string(),
                "--seed".into(),
                self.perturb_seed.to_string(),
            ],
            vec![
                "eval".into(),
                "--gt".into(),
                p("gt"),
                "--det".into(),
                p("det"),
                "--criterion".into(),
                self.criterion.into(),
                "--report".into(),
                p("report.json"),
            ],
        ];
        for args in steps {
            assert_success(&bevcal(&args));
        }
        std::fs::read_to_string(dir.join("report.json")).unwrap()
    }

    /// The same pipeline on in-memory values, with no file round trips.
    pub fn run_in_process(&self) -> String {
        let pairs: CorrespondenceSet = read_fixture("camera_pairs.json");
        let mut spec: ScenarioSpec = read_fixture("scenario.json");
        spec.homography = estimate_homography_dlt(&pairs).unwrap();
        let mut data = Vec::new();
        for i in 0..self.n_frames {
            let (box_seed, camera_seed) = frame_seeds(spec.seed, i);
            let frame_spec = ScenarioSpec {
                seed: box_seed,
                ..spec.clone()
            };
            let frame = generate_frame(&frame_spec, camera_seed).unwrap();
            let seed = bevcal_core::synth::perturb_seed(self.perturb_seed, i);
            let dets = perturb_labels(&frame, i, &self.perturb, seed).unwrap();
            let gts: Vec<RBox> = frame.labels_bev.iter().map(|t| t.rbox).collect();
            data.push((i, dets, gts));
        }
        let crit: MatchCriterion = self.criterion.parse().unwrap();
        let frames = evaluate_dataset(
            data.iter().map(|(f, d, g)| (*f, d.as_slice(), g.as_slice())),
            &crit,
        );
        let report = build_report(&crit, &frames).unwrap();
        serde_json::to_string_pretty(&report).unwrap() + "\n"
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn revision(&self) -> u64 {
        self.headers["x-session-revision"]
            .to_str()
            .unwrap()
            .parse()
            .unwrap()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn json_request(method: Method, uri: &str, body: &Value) -> Request<Body> {
    raw_json_request(method, uri, body.to_string())
}

pub fn raw_json_request(method: Method, uri: &str, body: String) -> Request<Body> {
    Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body))
        .unwrap()
}

pub enum Part<'a> {
    Text(&'a str, String),
    File(&'a str, Vec<u8>),
}

const BOUNDARY: &str = "bevcal-test-boundary";

pub fn multipart(uri: &str, parts: &[Part]) -> Request<Body> {
    let mut body = Vec::new();
    for part in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::Text(name, value) => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n")
                        .as_bytes(),
                );
            }
            Part::File(name, bytes) => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"{name}.png\"\r\n\
                         Content-Type: image/png\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
                body.extend_from_slice(b"\r\n");
            }
        }
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    Request::put(uri)
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

/// Smooth RGB test pattern.
pub fn pattern(w: usize, h: usize) -> RasterImage {
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
            data.push((255.0 * fx) as u8);
            data.push((255.0 * fy) as u8);
            data.push((127.5 * (1.0 + (6.0 * fx + 4.0 * fy).sin())) as u8);
        }
    }
    RasterImage::from_u8(w, h, 3, data).unwrap()
}

pub fn pattern_png(w: usize, h: usize) -> Vec<u8> {
    pattern(w, h).encode_png().unwrap()
}
