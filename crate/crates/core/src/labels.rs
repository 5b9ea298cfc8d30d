//! Per-frame label and detection files.
//!
//! ```json
//! {"frame": 3, "boxes": [{"cx": 1.0, "cy": 2.0, "l": 45.0, "w": 18.0, "r": 0.3,
//!   "u_tail": -4.1, "v_tail": 12.0, "unit": "bev_px"}]}
//! ```
//!
//! Detection files use the same schema with a `confidence` per box.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Detection;
use crate::projective::PlanePoint;
use crate::rbox::{RBox, RBoxError, TailedRBox};

pub const BEV_PX: &str = "bev_px";

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: box {index}: {source}")]
    Box {
        path: PathBuf,
        index: usize,
        source: RBoxError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBox {
    pub cx: f64,
    pub cy: f64,
    pub l: f64,
    pub w: f64,
    pub r: f64,
    #[serde(default)]
    pub u_tail: f64,
    #[serde(default)]
    pub v_tail: f64,
    #[serde(default = "default_unit")]
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

fn default_unit() -> String {
    BEV_PX.to_string()
}

impl LabelBox {
    pub fn from_tailed(t: &TailedRBox) -> Self {
        let b = &t.rbox;
        Self {
            cx: b.cx(),
            cy: b.cy(),
            l: b.l(),
            w: b.w(),
            r: b.r(),
            u_tail: t.u_tail,
            v_tail: t.v_tail,
            unit: default_unit(),
            confidence: None,
        }
    }

    pub fn from_detection(d: &Detection) -> Self {
        let b = &d.rbox;
        Self {
            cx: b.cx(),
            cy: b.cy(),
            l: b.l(),
            w: b.w(),
            r: b.r(),
            u_tail: 0.0,
            v_tail: 0.0,
            unit: default_unit(),
            confidence: Some(d.confidence),
        }
    }

    pub fn rbox(&self) -> Result<RBox, RBoxError> {
        RBox::new(self.cx, self.cy, self.l, self.w, self.r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub frame: u64,
    pub boxes: Vec<LabelBox>,
}

impl LabelFile {
    pub fn from_labels(frame: u64, labels: &[TailedRBox]) -> Self {
        Self {
            frame,
            boxes: labels.iter().map(LabelBox::from_tailed).collect(),
        }
    }

    pub fn from_detections(frame: u64, dets: &[Detection]) -> Self {
        Self {
            frame,
            boxes: dets.iter().map(LabelBox::from_detection).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, LabelError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabelError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| LabelError::Json {
            path: path.to_owned(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), LabelError> {
        let text = serde_json::to_string_pretty(self).map_err(|source| LabelError::Json {
            path: path.to_owned(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|source| LabelError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn rboxes(&self, path: &Path) -> Result<Vec<RBox>, LabelError> {
        self.boxes
            .iter()
            .enumerate()
            .map(|(index, b)| {
                b.rbox().map_err(|source| LabelError::Box {
                    path: path.to_owned(),
                    index,
                    source,
                })
            })
            .collect()
    }

    /// Boxes as detections; a missing confidence counts as 1.
    pub fn detections(&self, path: &Path) -> Result<Vec<Detection>, LabelError> {
        let boxes = self.rboxes(path)?;
        Ok(boxes
            .into_iter()
            .zip(&self.boxes)
            .map(|(rbox, b)| Detection {
                rbox,
                confidence: b.confidence.unwrap_or(1.0),
                frame: self.frame,
            })
            .collect())
    }
}

/// Projected cuboid of one vehicle in the original image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriBox {
    pub bottom: [PlanePoint; 4],
    pub top: [PlanePoint; 4],
}

/// Original-view labels of one frame, in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriLabelFile {
    pub frame: u64,
    pub boxes: Vec<OriBox>,
}

impl OriLabelFile {
    pub fn from_corners(frame: u64, corners: &[[PlanePoint; 8]]) -> Self {
        let boxes = corners
            .iter()
            .map(|c| OriBox {
                bottom: [c[0], c[1], c[2], c[3]],
                top: [c[4], c[5], c[6], c[7]],
            })
            .collect();
        Self { frame, boxes }
    }
}

pub fn frame_file_name(frame: u64) -> String {
    format!("frame_{frame:05}.json")
}

/// Label files of a directory, sorted by file name; `cameras.json` is skipped.
pub fn list_label_files(dir: &Path) -> Result<Vec<PathBuf>, LabelError> {
    let io = |source| LabelError::Io {
        path: dir.to_owned(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        let is_manifest = path.file_name().is_some_and(|n| n == "cameras.json");
        if is_json && !is_manifest {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
