//! HTTP service hosting interactive calibration sessions.
//!
//! Each session holds a camera frame, a map image with its metric scale, and
//! the landmark pairs clicked on both. Every mutation produces a new
//! immutable snapshot with a higher revision and a freshly computed
//! calibration, so readers always see a homography consistent with the pair
//! list of the revision they are given.

use std::collections::hash_map::RandomState;
use std::collections::HashMap;
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use bevcal_core::camera::{camera_for_principal_point, CameraError, CameraRecord};
use bevcal_core::projective::{
    estimate_homography_dlt, invert, reprojection_report, Correspondence, CorrespondenceSet,
    Homography, PlanePoint, ProjectiveError,
};
use bevcal_core::raster::{decode_png, RasterImage};
use bevcal_core::warp::{warp_image, BevFrame, Interpolation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

pub const REVISION_HEADER: &str = "x-session-revision";
/// Upload limit for multipart image bodies.
pub const MAX_BODY_BYTES: usize = 64 << 20;
/// Largest BEV preview side in pixels.
pub const MAX_PREVIEW_SIDE: usize = 8192;
pub const MIN_PAIRS: usize = 4;

/// One landmark clicked on the map and on the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInput {
    pub map_px: PlanePoint,
    pub image_px: PlanePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Placement of the map image on the road plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    /// Meters per map pixel.
    pub scale: f64,
    /// World coordinate of map pixel (0, 0).
    pub origin: PlanePoint,
}

impl Default for MapGeometry {
    fn default() -> Self {
        Self {
            scale: 1.0,
            origin: PlanePoint::new(0.0, 0.0),
        }
    }
}

impl MapGeometry {
    /// Map rows grow downward while world `y` points north.
    pub fn to_world(&self, map_px: &PlanePoint) -> PlanePoint {
        PlanePoint::new(
            self.origin.x + self.scale * map_px.x,
            self.origin.y - self.scale * map_px.y,
        )
    }
}

pub fn correspondences(pairs: &[PairInput], map: &MapGeometry) -> CorrespondenceSet {
    CorrespondenceSet::new(
        pairs
            .iter()
            .map(|p| Correspondence {
                world: map.to_world(&p.map_px),
                image: p.image_px,
                label: p.label.clone(),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStatus {
    Ok,
    InsufficientPoints,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub status: CalibrationStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// World plane to camera image.
    #[serde(rename = "H_ori_world")]
    pub h_ori_world: Option<Homography>,
    /// Camera image to world plane.
    #[serde(rename = "H_world_ori")]
    pub h_world_ori: Option<Homography>,
    /// Per-pair reprojection error in camera pixels.
    pub residuals: Vec<f64>,
    pub rms: Option<f64>,
    pub max: Option<f64>,
}

impl Calibration {
    fn failed(status: CalibrationStatus, message: Option<String>) -> Self {
        Self {
            status,
            message,
            h_ori_world: None,
            h_world_ori: None,
            residuals: Vec::new(),
            rms: None,
            max: None,
        }
    }
}

/// The library calibration of a pair list.
pub fn calibrate(pairs: &[PairInput], map: &MapGeometry) -> Calibration {
    if pairs.len() < MIN_PAIRS {
        return Calibration::failed(
            CalibrationStatus::InsufficientPoints,
            Some(format!("need at least {MIN_PAIRS} pairs, have {}", pairs.len())),
        );
    }
    let set = correspondences(pairs, map);
    let h = match estimate_homography_dlt(&set).and_then(|h| Ok((invert(&h)?, h))) {
        Ok(v) => v,
        Err(e @ ProjectiveError::TooFewPoints(_)) => {
            return Calibration::failed(CalibrationStatus::InsufficientPoints, Some(e.to_string()))
        }
        Err(e) => return Calibration::failed(CalibrationStatus::Degenerate, Some(e.to_string())),
    };
    let (h_world_ori, h_ori_world) = h;
    let report = reprojection_report(&h_ori_world, &set);
    Calibration {
        status: CalibrationStatus::Ok,
        message: None,
        h_ori_world: Some(h_ori_world),
        h_world_ori: Some(h_world_ori),
        residuals: report.residuals,
        rms: Some(report.rms),
        max: Some(report.max),
    }
}

#[derive(Debug)]
pub struct StoredImage {
    pub png: Vec<u8>,
    pub raster: RasterImage,
}

impl StoredImage {
    fn decode(png: Vec<u8>) -> Result<Self, bevcal_core::raster::RasterError> {
        let raster = decode_png(&png)?;
        Ok(Self { png, raster })
    }
}

/// Immutable session state at one revision.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub name: String,
    pub revision: u64,
    pub map: MapGeometry,
    pub camera_image: Option<Arc<StoredImage>>,
    pub map_image: Option<Arc<StoredImage>>,
    pub pairs: Vec<PairInput>,
    pub calibration: Calibration,
}

/// On-disk form of a session besides its images.
#[derive(Debug, Serialize, Deserialize)]
struct SessionDoc {
    id: String,
    name: String,
    revision: u64,
    map: MapGeometry,
    pairs: Vec<PairInput>,
}

struct Slot {
    writer: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Session>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<Session> {
        self.current.read().expect("session lock poisoned").clone()
    }
}

struct Inner {
    data_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// In-memory sessions only.
    pub fn in_memory() -> Self {
        Self {
            inner: Arc::new(Inner {
                data_dir: None,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    /// Loads the sessions persisted under `data_dir`, creating it if needed.
    pub async fn open(data_dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            tokio::fs::create_dir_all(dir)
                .await
                .with_context(|| format!("creating {}", dir.display()))?;
            let mut entries = tokio::fs::read_dir(dir).await?;
            while let Some(entry) = entries.next_entry().await? {
                let path = entry.path();
                if path.join("session.json").is_file() {
                    let session = load_session(&path)
                        .await
                        .with_context(|| format!("loading {}", path.display()))?;
                    sessions.insert(session.id.clone(), Arc::new(slot(session)));
                }
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                data_dir,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }

    /// Current snapshot of a session.
    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.slot(id).ok().map(|s| s.snapshot())
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.inner.data_dir.as_ref().map(|d| d.join(id))
    }

    /// Applies `edit` to a copy of the session, recomputes the calibration,
    /// bumps the revision, persists, and publishes the new snapshot.
    async fn mutate<F>(&self, id: &str, edit: F) -> Result<Arc<Session>, ApiError>
    where
        F: FnOnce(&mut Session),
    {
        let slot = self.slot(id)?;
        let _guard = slot.writer.lock().await;
        let mut next = (*slot.snapshot()).clone();
        edit(&mut next);
        next.revision += 1;
        next.calibration = calibrate(&next.pairs, &next.map);
        let next = Arc::new(next);
        if let Some(dir) = self.session_dir(id) {
            persist(&dir, &next).await.map_err(ApiError::internal)?;
        }
        *slot.current.write().expect("session lock poisoned") = next.clone();
        Ok(next)
    }

    async fn create(&self, name: String) -> Result<Arc<Session>, ApiError> {
        let id = new_id();
        let session = Arc::new(Session {
            id: id.clone(),
            name,
            revision: 0,
            map: MapGeometry::default(),
            camera_image: None,
            map_image: None,
            pairs: Vec::new(),
            calibration: calibrate(&[], &MapGeometry::default()),
        });
        if let Some(dir) = self.session_dir(&id) {
            persist(&dir, &session).await.map_err(ApiError::internal)?;
        }
        self.inner
            .sessions
            .write()
            .expect("session table poisoned")
            .insert(id, Arc::new(slot((*session).clone())));
        Ok(session)
    }
}

fn slot(session: Session) -> Slot {
    Slot {
        writer: tokio::sync::Mutex::new(()),
        current: RwLock::new(Arc::new(session)),
    }
}

fn new_id() -> String {
    let mut h = RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default(),
    );
    format!("{:016x}", h.finish())
}

async fn persist(dir: &Path, s: &Session) -> anyhow::Result<()> {
    tokio::fs::create_dir_all(dir).await?;
    let doc = SessionDoc {
        id: s.id.clone(),
        name: s.name.clone(),
        revision: s.revision,
        map: s.map,
        pairs: s.pairs.clone(),
    };
    let tmp = dir.join("session.json.tmp");
    tokio::fs::write(&tmp, serde_json::to_vec_pretty(&doc)?).await?;
    tokio::fs::rename(&tmp, dir.join("session.json")).await?;
    for (name, image) in [("camera.png", &s.camera_image), ("map.png", &s.map_image)] {
        if let Some(img) = image {
            tokio::fs::write(dir.join(name), &img.png).await?;
        }
    }
    Ok(())
}

async fn load_session(dir: &Path) -> anyhow::Result<Session> {
    let doc: SessionDoc = serde_json::from_slice(&tokio::fs::read(dir.join("session.json")).await?)?;
    let mut images = [None, None];
    for (slot, name) in images.iter_mut().zip(["camera.png", "map.png"]) {
        let path = dir.join(name);
        if path.is_file() {
            *slot = Some(Arc::new(StoredImage::decode(tokio::fs::read(&path).await?)?));
        }
    }
    let [camera_image, map_image] = images;
    Ok(Session {
        calibration: calibrate(&doc.pairs, &doc.map),
        id: doc.id,
        name: doc.name,
        revision: doc.revision,
        map: doc.map,
        camera_image,
        map_image,
        pairs: doc.pairs,
    })
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>, field: Option<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            field: None,
        }
    }

    fn internal(e: anyhow::Error) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("{e:#}"),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(field) = self.field {
            body["field"] = json!(field);
        }
        (self.status, Json(body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = (path != ".").then_some(path);
        ApiError::bad_request(e.into_inner().to_string(), field)
    })
}

fn with_revision(revision: u64, response: impl IntoResponse) -> Response {
    let mut r = response.into_response();
    r.headers_mut()
        .insert(REVISION_HEADER, HeaderValue::from(revision));
    r
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/images", put(put_images))
        .route("/api/sessions/{id}/images/{which}", get(get_image))
        .route("/api/sessions/{id}/correspondences", put(put_correspondences))
        .route("/api/sessions/{id}/calibration", get(get_calibration))
        .route("/api/sessions/{id}/bev-preview", get(get_preview))
        .route("/api/sessions/{id}/camera", get(get_camera))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Deserialize)]
struct CreateBody {
    name: String,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = parse_body(&body)?;
    let s = state.create(body.name).await?;
    Ok(with_revision(
        s.revision,
        Json(json!({ "id": s.id, "revision": s.revision })),
    ))
}

fn image_size(img: &Option<Arc<StoredImage>>) -> Option<[usize; 2]> {
    img.as_ref()
        .map(|i| [i.raster.width(), i.raster.height()])
}

async fn get_session(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let s = state.slot(&id)?.snapshot();
    Ok(with_revision(
        s.revision,
        Json(json!({
            "id": s.id,
            "name": s.name,
            "revision": s.revision,
            "map": s.map,
            "camera_image": image_size(&s.camera_image),
            "map_image": image_size(&s.map_image),
            "pairs": s.pairs,
        })),
    ))
}

fn parse_number(field: &str, text: &str) -> Result<f64, ApiError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ApiError::bad_request(format!("not a finite number: {text:?}"), Some(field.into())))
}

/// `x,y` or `[x, y]`.
fn parse_origin(text: &str) -> Result<PlanePoint, ApiError> {
    let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
    let bad = || ApiError::bad_request(format!("expected x,y, got {text:?}"), Some("map_origin".into()));
    let (x, y) = trimmed.split_once(',').ok_or_else(bad)?;
    Ok(PlanePoint::new(
        parse_number("map_origin", x)?,
        parse_number("map_origin", y)?,
    ))
}

async fn put_images(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    mut multipart: Multipart,
) -> Result<Response, ApiError> {
    state.slot(&id)?;
    let (mut camera, mut map_img, mut scale, mut origin) = (None, None, None, None);
    let multipart_err = |e: axum::extract::multipart::MultipartError| {
        ApiError::bad_request(e.body_text(), None)
    };
    while let Some(field) = multipart.next_field().await.map_err(multipart_err)? {
        let name = field.name().unwrap_or_default().to_string();
        let png_field = |bytes: Bytes, name: &str| {
            StoredImage::decode(bytes.to_vec())
                .map(Arc::new)
                .map_err(|e| ApiError::bad_request(e.to_string(), Some(name.to_string())))
        };
        match name.as_str() {
            "camera" => camera = Some(png_field(field.bytes().await.map_err(multipart_err)?, "camera")?),
            "map" => map_img = Some(png_field(field.bytes().await.map_err(multipart_err)?, "map")?),
            "map_scale" => {
                let v = parse_number("map_scale", &field.text().await.map_err(multipart_err)?)?;
                if v <= 0.0 {
                    return Err(ApiError::bad_request("map scale must be positive", Some(name)));
                }
                scale = Some(v);
            }
            "map_origin" => origin = Some(parse_origin(&field.text().await.map_err(multipart_err)?)?),
            other => {
                return Err(ApiError::bad_request(
                    format!("unexpected field {other:?}"),
                    Some(other.to_string()),
                ))
            }
        }
    }
    if camera.is_none() && map_img.is_none() && scale.is_none() && origin.is_none() {
        return Err(ApiError::bad_request("no fields given", None));
    }
    let s = state
        .mutate(&id, |s| {
            if camera.is_some() {
                s.camera_image = camera;
            }
            if map_img.is_some() {
                s.map_image = map_img;
            }
            if let Some(v) = scale {
                s.map.scale = v;
            }
            if let Some(v) = origin {
                s.map.origin = v;
            }
        })
        .await?;
    Ok(with_revision(s.revision, StatusCode::NO_CONTENT))
}

async fn get_image(
    State(state): State<AppState>,
    UrlPath((id, which)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let s = state.slot(&id)?.snapshot();
    let img = match which.as_str() {
        "camera" => &s.camera_image,
        "map" => &s.map_image,
        other => return Err(ApiError::not_found(format!("no image {other:?}"))),
    };
    let img = img
        .as_ref()
        .ok_or_else(|| ApiError::not_found(format!("{which} image not uploaded")))?;
    Ok(with_revision(
        s.revision,
        ([(header::CONTENT_TYPE, "image/png")], img.png.clone()),
    ))
}

async fn put_correspondences(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    state.slot(&id)?;
    let pairs: Vec<PairInput> = parse_body(&body)?;
    for (i, p) in pairs.iter().enumerate() {
        for (name, v) in [("map_px", p.map_px), ("image_px", p.image_px)] {
            if !v.is_finite() {
                return Err(ApiError::bad_request(
                    "coordinates must be finite",
                    Some(format!("[{i}].{name}")),
                ));
            }
        }
    }
    let s = state.mutate(&id, |s| s.pairs = pairs).await?;
    Ok(with_revision(
        s.revision,
        Json(json!({ "revision": s.revision })),
    ))
}

#[derive(Serialize)]
struct CalibrationBody<'a> {
    revision: u64,
    #[serde(flatten)]
    calibration: &'a Calibration,
}

async fn get_calibration(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let s = state.slot(&id)?.snapshot();
    let body = CalibrationBody {
        revision: s.revision,
        calibration: &s.calibration,
    };
    Ok(with_revision(s.revision, Json(body)))
}

#[derive(Deserialize)]
struct PreviewQuery {
    ppm: f64,
    w: usize,
    h: usize,
    /// World coordinate of preview pixel (0, 0); centered on the landmarks otherwise.
    ox: Option<f64>,
    oy: Option<f64>,
}

/// Preview origin that centers the landmarks' world centroid.
pub fn preview_origin(s: &Session, ppm: f64, w: usize, h: usize) -> PlanePoint {
    let n = s.pairs.len().max(1) as f64;
    let (sx, sy) = s.pairs.iter().fold((0.0, 0.0), |(x, y), p| {
        let q = s.map.to_world(&p.map_px);
        (x + q.x, y + q.y)
    });
    PlanePoint::new(
        sx / n - w as f64 / (2.0 * ppm),
        sy / n + h as f64 / (2.0 * ppm),
    )
}

async fn get_preview(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<PreviewQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let s = state.slot(&id)?.snapshot();
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text(), None))?;
    if !(q.ppm > 0.0 && q.ppm.is_finite()) {
        return Err(ApiError::bad_request("ppm must be positive", Some("ppm".into())));
    }
    if q.w == 0 || q.h == 0 || q.w > MAX_PREVIEW_SIDE || q.h > MAX_PREVIEW_SIDE {
        return Err(ApiError::bad_request(
            format!("preview size must be within 1..={MAX_PREVIEW_SIDE}"),
            Some(if q.w == 0 || q.w > MAX_PREVIEW_SIDE { "w" } else { "h" }.into()),
        ));
    }
    let Some(h_ori_world) = s.calibration.h_ori_world.clone() else {
        return Ok(with_revision(
            s.revision,
            ApiError::not_found("session is not calibrated").into_response(),
        ));
    };
    let Some(camera) = s.camera_image.clone() else {
        return Ok(with_revision(
            s.revision,
            ApiError::not_found("camera image not uploaded").into_response(),
        ));
    };
    let origin = match (q.ox, q.oy) {
        (Some(x), Some(y)) => PlanePoint::new(x, y),
        _ => preview_origin(&s, q.ppm, q.w, q.h),
    };
    let png = tokio::task::spawn_blocking(move || -> anyhow::Result<Vec<u8>> {
        let bev = BevFrame::new(q.ppm, origin, q.w, q.h)?;
        let h_bev_ori = bev.ori_to_bev(&h_ori_world)?;
        let out = warp_image(&camera.raster, &h_bev_ori, q.w, q.h, 0.0f32, Interpolation::Bilinear)?;
        Ok(out.encode_png()?)
    })
    .await
    .map_err(|e| ApiError::internal(e.into()))?
    .map_err(|e| ApiError::bad_request(format!("{e:#}"), None))?;
    Ok(with_revision(
        s.revision,
        ([(header::CONTENT_TYPE, "image/png")], png),
    ))
}

#[derive(Deserialize)]
struct CameraQuery {
    px: Option<f64>,
    py: Option<f64>,
}

fn camera_status(e: &CameraError) -> &'static str {
    match e {
        CameraError::ImaginaryFocal { .. } => "imaginary_focal",
        CameraError::VanishingAtInfinity { .. } => "vanishing_at_infinity",
        CameraError::BehindPlane => "behind_plane",
        _ => "degenerate",
    }
}

async fn get_camera(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<CameraQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let s = state.slot(&id)?.snapshot();
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text(), None))?;
    let center = image_size(&s.camera_image)
        .map(|[w, h]| PlanePoint::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0));
    let p = match (q.px, q.py, center) {
        (Some(x), Some(y), _) => PlanePoint::new(x, y),
        (None, None, Some(c)) => c,
        _ => {
            return Err(ApiError::bad_request(
                "px and py are required without a camera image",
                Some(if q.px.is_none() { "px" } else { "py" }.into()),
            ))
        }
    };
    let Some(h) = &s.calibration.h_ori_world else {
        return Ok(with_revision(
            s.revision,
            Json(json!({ "revision": s.revision, "status": "uncalibrated" })),
        ));
    };
    let body = match camera_for_principal_point(h, &p).and_then(|cam| CameraRecord::new(&cam, h)) {
        Ok(rec) => {
            let mut v = serde_json::to_value(rec).map_err(|e| ApiError::internal(e.into()))?;
            v["revision"] = json!(s.revision);
            v["status"] = json!("ok");
            v
        }
        Err(e) => json!({
            "revision": s.revision,
            "status": camera_status(&e),
            "message": e.to_string(),
        }),
    };
    Ok(with_revision(s.revision, Json(body)))
}
