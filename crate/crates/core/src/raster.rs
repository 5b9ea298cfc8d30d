//! Minimal raster container with PNG (8-bit) and PFM (32-bit float) I/O.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("sample count {got} does not match {width}x{height}x{channels}")]
    SizeMismatch {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("unsupported channel count {0}")]
    Channels(usize),
    #[error("unsupported image format: {0}")]
    Format(String),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Samples,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Samples,
    ) -> Result<Self, RasterError> {
        if !(1..=4).contains(&channels) {
            return Err(RasterError::Channels(channels));
        }
        if samples.len() != width * height * channels {
            return Err(RasterError::SizeMismatch {
                width,
                height,
                channels,
                got: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn from_u8(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, RasterError> {
        Self::new(width, height, channels, Samples::U8(data))
    }

    pub fn from_f32(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, RasterError> {
        Self::new(width, height, channels, Samples::F32(data))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn into_samples(self) -> Samples {
        self.samples
    }

    /// Sample value as `f32` regardless of storage.
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        let i = (y * self.width + x) * self.channels + c;
        match &self.samples {
            Samples::U8(v) => v[i] as f32,
            Samples::F32(v) => v[i],
        }
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        match extension(path).as_deref() {
            Some("pfm") => read_pfm(&mut BufReader::new(File::open(path)?)),
            _ => decode_png(&std::fs::read(path)?),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        match extension(path).as_deref() {
            Some("pfm") => {
                let mut w = BufWriter::new(File::create(path)?);
                write_pfm(self, &mut w)?;
                w.flush()?;
                Ok(())
            }
            _ => {
                std::fs::write(path, self.encode_png()?)?;
                Ok(())
            }
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let Samples::U8(data) = &self.samples else {
            return Err(RasterError::Format("PNG output needs 8-bit samples".into()));
        };
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            2 => image::ExtendedColorType::La8,
            3 => image::ExtendedColorType::Rgb8,
            4 => image::ExtendedColorType::Rgba8,
            c => return Err(RasterError::Channels(c)),
        };
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            encoder,
            data,
            self.width as u32,
            self.height as u32,
            color,
        )?;
        Ok(out)
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Decodes an 8-bit PNG, keeping its channel layout.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, RasterError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img.color().channel_count() {
        1 => (1, img.into_luma8().into_raw()),
        2 => (2, img.into_luma_alpha8().into_raw()),
        3 => (3, img.into_rgb8().into_raw()),
        _ => (4, img.into_rgba8().into_raw()),
    };
    RasterImage::from_u8(w, h, channels, data)
}

/// Portable float map: bottom-to-top rows, little-endian when the scale is negative.
pub fn read_pfm<R: BufRead>(r: &mut R) -> Result<RasterImage, RasterError> {
    let mut tokens = Vec::new();
    let mut line = String::new();
    while tokens.len() < 4 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(RasterError::Format("truncated PFM header".into()));
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let channels = match tokens[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(RasterError::Format(format!("bad PFM magic {other:?}"))),
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| RasterError::Format(format!("bad PFM header value {s:?}")))
    };
    let width = parse(&tokens[1])? as usize;
    let height = parse(&tokens[2])? as usize;
    let little = parse(&tokens[3])? < 0.0;
    let mut raw = vec![0u8; width * height * channels * 4];
    r.read_exact(&mut raw)?;
    let row_len = width * channels;
    let mut data = vec![0f32; width * height * channels];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, col) = (i / row_len, i % row_len);
        data[(height - 1 - row) * row_len + col] = v;
    }
    RasterImage::from_f32(width, height, channels, data)
}

pub fn write_pfm<W: Write>(img: &RasterImage, w: &mut W) -> Result<(), RasterError> {
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(RasterError::Channels(c)),
    };
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row_len = img.width * img.channels;
    for y in (0..img.height).rev() {
        for i in 0..row_len {
            let v = match &img.samples {
                Samples::U8(d) => d[y * row_len + i] as f32,
                Samples::F32(d) => d[y * row_len + i],
            };
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
