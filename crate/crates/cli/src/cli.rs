use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bevcal_core::camera::{sample_camera_family, CameraRecord};
use bevcal_core::eval::{build_report, evaluate_dataset, Detection, MatchCriterion};
use bevcal_core::labels::{frame_file_name, list_label_files, LabelFile, OriLabelFile};
use bevcal_core::projective::{
    estimate_homography_dlt, reprojection_report, CorrespondenceSet, Frame, Homography,
    PlanePoint,
};
use bevcal_core::raster::RasterImage;
use bevcal_core::rbox::RBox;
use bevcal_core::synth::{
    frame_seeds, generate_frame, perturb_boxes, perturb_seed, PerturbConfig, ScenarioSpec,
};
use bevcal_core::warp::{warp_image, BevFrame, Interpolation};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::service;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bevcal", version, about = "Bird's-eye-view geometry for traffic cameras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the road-plane homography from landmark pairs.
    Calibrate(CalibrateArgs),
    /// Resample an image through a homography.
    Warp(WarpArgs),
    /// Sample cameras that reproduce a calibrated homography.
    SynthCameras(SynthCamerasArgs),
    /// Generate synthetic vehicle scenes and their labels.
    SynthFrames(SynthFramesArgs),
    /// Turn ground-truth labels into noisy detections.
    Perturb(PerturbArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Run the calibration service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Correspondence set JSON.
    #[arg(long)]
    pairs: PathBuf,
    /// Output homography JSON (world to original image).
    #[arg(long)]
    out: PathBuf,
    /// Optional reprojection report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WarpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Homography JSON tagged ori->bev, or world->ori combined with --ppm.
    #[arg(long)]
    homography: PathBuf,
    /// Output size as WxH.
    #[arg(long, value_parser = parse_size)]
    out_size: (usize, usize),
    /// BEV pixels per meter; required for a world->ori homography.
    #[arg(long)]
    ppm: Option<f64>,
    /// World coordinate of BEV pixel (0, 0), as X,Y.
    #[arg(long, value_parser = parse_point, default_value = "0,0")]
    bev_origin: PlanePoint,
    #[arg(long, default_value_t = 0.0)]
    fill: f32,
    #[arg(long, default_value = "bilinear")]
    interp: Interpolation,
}

#[derive(Debug, Args)]
struct SynthCamerasArgs {
    #[arg(long)]
    homography: PathBuf,
    /// Image size as WxH.
    #[arg(long, value_parser = parse_size)]
    image_size: (usize, usize),
    /// Principal-point sampling center as X,Y; the image center by default.
    #[arg(long, value_parser = parse_point)]
    center: Option<PlanePoint>,
    /// Sampling radius in pixels; 5% of the image width by default.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthFramesArgs {
    /// Scenario JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Replaces the scenario's homography.
    #[arg(long)]
    homography: Option<PathBuf>,
    #[arg(long)]
    n_frames: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// Scenario JSON providing the BEV frame.
    #[arg(long)]
    spec: PathBuf,
    /// Ground-truth label directory.
    #[arg(long)]
    gt: PathBuf,
    /// Output detection directory.
    #[arg(long)]
    out: PathBuf,
    /// Center noise in meters.
    #[arg(long, default_value_t = 0.0)]
    sigma_center: f64,
    /// Heading noise in radians.
    #[arg(long, default_value_t = 0.0)]
    sigma_angle: f64,
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    spurious_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    confidence_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    det: PathBuf,
    /// iou:T or center:T
    #[arg(long, default_value = "iou:0.5")]
    criterion: MatchCriterion,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "BEVCAL_HOST", default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = "BEVCAL_PORT", default_value_t = 8080)]
    port: u16,
    /// Session storage; sessions live in memory only when absent.
    #[arg(long, env = "BEVCAL_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Built annotation UI to serve at `/`.
    #[arg(long, env = "BEVCAL_STATIC_DIR")]
    static_dir: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn parse_point(s: &str) -> Result<PlanePoint, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad coordinate {x:?}"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad coordinate {y:?}"))?;
    let p = PlanePoint::new(x, y);
    if !p.is_finite() {
        return Err("coordinates must be finite".into());
    }
    Ok(p)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Calibrate(a) => calibrate(a),
        Command::Warp(a) => warp(a),
        Command::SynthCameras(a) => synth_cameras(a),
        Command::SynthFrames(a) => synth_frames(a),
        Command::Perturb(a) => perturb(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline, the format of every file written here.
pub fn to_json_text<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_text(value)?).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let pairs: CorrespondenceSet = read_json(&a.pairs)?;
    let h = estimate_homography_dlt(&pairs).context("estimating homography")?;
    let report = reprojection_report(&h, &pairs);
    write_json(&a.out, &h)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    println!(
        "{} pairs, rms {:.6} px, max {:.6} px",
        pairs.len(),
        report.rms,
        report.max
    );
    Ok(())
}

fn warp(a: WarpArgs) -> Result<()> {
    let src = RasterImage::load(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let h: Homography = read_json(&a.homography)?;
    let (w, hgt) = a.out_size;
    let h_bev_ori = match (h.src(), h.dst()) {
        (Frame::Ori, Frame::Bev) => h,
        (Frame::World, Frame::Ori) => {
            let ppm = a.ppm.context("--ppm is required for a world to ori homography")?;
            BevFrame::new(ppm, a.bev_origin, w, hgt)?.ori_to_bev(&h)?
        }
        (src, dst) => bail!(
            "homography maps {} to {}; expected ori to bev or world to ori",
            src.as_str(),
            dst.as_str()
        ),
    };
    let out = warp_image(&src, &h_bev_ori, w, hgt, a.fill, a.interp)?;
    out.save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn synth_cameras(a: SynthCamerasArgs) -> Result<()> {
    let h: Homography = read_json(&a.homography)?;
    let (w, hgt) = a.image_size;
    let center = a
        .center
        .unwrap_or(PlanePoint::new((w as f64 - 1.0) / 2.0, (hgt as f64 - 1.0) / 2.0));
    let radius = a.radius.unwrap_or(0.05 * w as f64);
    let cameras = sample_camera_family(&h, &center, radius, a.n, a.seed)?;
    let records = cameras
        .iter()
        .map(|c| CameraRecord::new(c, &h))
        .collect::<Result<Vec<_>, _>>()?;
    write_json(&a.out, &records)?;
    println!("{} cameras", records.len());
    Ok(())
}

fn synth_frames(a: SynthFramesArgs) -> Result<()> {
    let mut spec: ScenarioSpec = read_json(&a.spec)?;
    if let Some(path) = &a.homography {
        spec.homography = read_json(path)?;
    }
    create_dir(&a.out)?;
    create_dir(&a.out.join("ori"))?;
    let mut cameras = Vec::new();
    for i in 0..a.n_frames {
        let (box_seed, camera_seed) = frame_seeds(spec.seed, i);
        let frame_spec = ScenarioSpec {
            seed: box_seed,
            ..spec.clone()
        };
        let frame = generate_frame(&frame_spec, camera_seed).with_context(|| format!("frame {i}"))?;
        let name = frame_file_name(i);
        LabelFile::from_labels(i, &frame.labels_bev).write(&a.out.join(&name))?;
        write_json(
            &a.out.join("ori").join(&name),
            &OriLabelFile::from_corners(i, &frame.labels_ori),
        )?;
        cameras.push(CameraRecord::new(&frame.camera, &spec.homography)?);
    }
    write_json(&a.out.join("cameras.json"), &cameras)?;
    println!("{} frames", a.n_frames);
    Ok(())
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let spec: ScenarioSpec = read_json(&a.spec)?;
    let cfg = PerturbConfig {
        sigma_center: a.sigma_center,
        sigma_angle: a.sigma_angle,
        drop_rate: a.drop_rate,
        spurious_rate: a.spurious_rate,
        confidence_scale: a.confidence_scale,
    };
    cfg.validate()?;
    create_dir(&a.out)?;
    let files = list_label_files(&a.gt)?;
    for path in &files {
        let labels = LabelFile::read(path)?;
        let gts = labels.rboxes(path)?;
        let seed = perturb_seed(a.seed, labels.frame);
        let dets = perturb_boxes(labels.frame, &gts, &spec.bev, &cfg, seed)?;
        LabelFile::from_detections(labels.frame, &dets)
            .write(&a.out.join(frame_file_name(labels.frame)))?;
    }
    println!("{} frames", files.len());
    Ok(())
}

/// Label files of a directory keyed by frame id.
fn load_frames(dir: &Path) -> Result<BTreeMap<u64, (PathBuf, LabelFile)>> {
    let mut out = BTreeMap::new();
    for path in list_label_files(dir)? {
        let file = LabelFile::read(&path)?;
        if let Some((first, _)) = out.insert(file.frame, (path.clone(), file)) {
            bail!(
                "frame id appears twice: {} and {}",
                first.display(),
                path.display()
            );
        }
    }
    Ok(out)
}

/// Per-frame `(detections, ground truth)` keyed by frame id.
pub type Dataset = BTreeMap<u64, (Vec<Detection>, Vec<RBox>)>;

/// Detections and ground truth joined on frame id.
pub fn load_dataset(gt_dir: &Path, det_dir: &Path) -> Result<Dataset> {
    let gt = load_frames(gt_dir)?;
    let det = load_frames(det_dir)?;
    let mut data = Dataset::new();
    for (frame, (path, file)) in &gt {
        data.entry(*frame).or_default().1 = file.rboxes(path)?;
    }
    for (frame, (path, file)) in &det {
        data.entry(*frame).or_default().0 = file.detections(path)?;
    }
    Ok(data)
}

fn eval(a: EvalArgs) -> Result<()> {
    let data = load_dataset(&a.gt, &a.det)?;
    let frames = evaluate_dataset(
        data.iter()
            .map(|(f, (d, g))| (*f, d.as_slice(), g.as_slice())),
        &a.criterion,
    );
    let report = build_report(&a.criterion, &frames)?;
    write_json(&a.report, &report)?;
    println!(
        "AP {:.6} ({}, {} ground-truth boxes, {} detections)",
        report.ap, report.criterion, report.num_gt, report.num_detections
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let state = service::AppState::open(a.data_dir.clone()).await?;
        let app = service::router(state, a.static_dir.as_deref());
        let addr = SocketAddr::new(a.host, a.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok(())
    })
}
