//! Sequence ingestion: an `img/` directory of numerically named frames plus a
//! `groundtruth_rect.txt` with one `x,y,w,h` line per frame (1-based pixel
//! coordinates, comma or tab separated, NaN where annotation is missing).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{BBox, Frame};

/// A benchmark sequence: ordered frame paths and per-frame ground truth.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub frame_paths: Vec<PathBuf>,
    pub groundtruth: Vec<BBox>,
    pub attributes: Vec<String>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frame_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_paths.is_empty()
    }
}

/// Parse one ground-truth line; both comma and tab delimiters are accepted.
fn parse_gt_line(line: &str) -> Option<BBox> {
    let parts: Vec<&str> = line
        .split([',', '\t'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() != 4 {
        return None;
    }
    let mut vals = [0.0f64; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p.parse::<f64>().ok()?;
    }
    // 1-based corner convention on disk, 0-based in memory.
    Some(BBox::new(vals[0] - 1.0, vals[1] - 1.0, vals[2], vals[3]))
}

/// Load a sequence directory, sorting frames numerically.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string());
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::SequenceMalformed(format!(
            "{}: missing img/ directory",
            dir.display()
        )));
    }
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&img_dir)? {
        let path = entry?.path();
        let Some(ext) = path.extension().and_then(|e| e.to_str()) else {
            continue;
        };
        if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let number: u64 = stem.parse().map_err(|_| {
            Error::SequenceMalformed(format!("non-numeric frame name {}", path.display()))
        })?;
        frames.push((number, path));
    }
    if frames.is_empty() {
        return Err(Error::SequenceMalformed(format!(
            "{}: no frames in img/",
            dir.display()
        )));
    }
    frames.sort_by_key(|(n, _)| *n);
    let frame_paths: Vec<PathBuf> = frames.into_iter().map(|(_, p)| p).collect();

    let gt_path = dir.join("groundtruth_rect.txt");
    let gt_text = std::fs::read_to_string(&gt_path).map_err(|_| {
        Error::SequenceMalformed(format!("{}: missing groundtruth_rect.txt", dir.display()))
    })?;
    let mut groundtruth = Vec::new();
    for line in gt_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let bbox = parse_gt_line(line).ok_or_else(|| {
            Error::SequenceMalformed(format!("bad ground-truth line {line:?}"))
        })?;
        groundtruth.push(bbox);
    }
    if groundtruth.len() != frame_paths.len() {
        return Err(Error::GtLengthMismatch {
            frames: frame_paths.len(),
            groundtruth: groundtruth.len(),
        });
    }
    if !groundtruth[0].is_valid() {
        return Err(Error::SequenceMalformed(
            "first ground-truth box is invalid".to_string(),
        ));
    }

    let attributes = std::fs::read_to_string(dir.join("attributes.txt"))
        .map(|t| t.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
        .unwrap_or_default();

    Ok(Sequence {
        name,
        frame_paths,
        groundtruth,
        attributes,
    })
}

/// Serialize ground truth back to the on-disk convention (1-based corners).
pub fn groundtruth_text(boxes: &[BBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let _ = writeln!(out, "{},{},{},{}", b.x + 1.0, b.y + 1.0, b.w, b.h);
    }
    out
}

/// Decode one frame from disk.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path)?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Frame::new(w as usize, h as usize, 1, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Frame::new(w as usize, h as usize, 3, rgb.into_raw())
        }
    }
}

/// Encode a frame as PNG.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    match frame.channels() {
        1 => {
            let buf: image::GrayImage =
                image::ImageBuffer::from_raw(w, h, frame.data().to_vec())
                    .expect("buffer size checked at construction");
            buf.save(path)?;
        }
        _ => {
            let buf: image::RgbImage =
                image::ImageBuffer::from_raw(w, h, frame.data().to_vec())
                    .expect("buffer size checked at construction");
            buf.save(path)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_sequence(dir: &Path, n: usize) {
        let img = dir.join("img");
        std::fs::create_dir_all(&img).unwrap();
        for i in 0..n {
            let frame = Frame::filled(16, 12, 1, (i * 20) as u8).unwrap();
            save_frame(&frame, &img.join(format!("{:04}.png", i + 1))).unwrap();
        }
        let boxes: Vec<BBox> = (0..n)
            .map(|i| BBox::new(i as f64, 2.0, 4.0, 4.0))
            .collect();
        std::fs::write(dir.join("groundtruth_rect.txt"), groundtruth_text(&boxes)).unwrap();
    }

    #[test]
    fn loads_a_small_sequence() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("seq3");
        write_sequence(&dir, 3);
        let seq = load_sequence(&dir).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.name, "seq3");
        assert!(seq.groundtruth[0].is_valid());
    }

    #[test]
    fn one_based_corners_become_zero_based() {
        let b = parse_gt_line("10,20,30,40").unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (9.0, 19.0, 30.0, 40.0));
        let b = parse_gt_line("10\t20\t30\t40").unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (9.0, 19.0, 30.0, 40.0));
    }

    #[test]
    fn nan_lines_parse_as_invalid_boxes() {
        let b = parse_gt_line("NaN,NaN,NaN,NaN").unwrap();
        assert!(!b.is_valid());
    }

    #[test]
    fn groundtruth_round_trips_byte_identically() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("seq100");
        write_sequence(&dir, 100);
        let original = std::fs::read(dir.join("groundtruth_rect.txt")).unwrap();
        let seq = load_sequence(&dir).unwrap();
        let rewritten = groundtruth_text(&seq.groundtruth);
        assert_eq!(original, rewritten.into_bytes());
    }

    #[test]
    fn count_mismatch_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bad");
        write_sequence(&dir, 3);
        std::fs::write(dir.join("groundtruth_rect.txt"), "1,1,4,4\n2,1,4,4\n").unwrap();
        let err = load_sequence(&dir).unwrap_err();
        assert!(err.to_string().contains("gt-length-mismatch"));
    }

    #[test]
    fn missing_pieces_are_malformed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("empty");
        std::fs::create_dir_all(&dir).unwrap();
        let err = load_sequence(&dir).unwrap_err();
        assert!(err.to_string().contains("sequence-malformed"));
    }

    #[test]
    fn frame_io_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.png");
        let mut frame = Frame::filled(9, 7, 3, 0).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                frame.set(x, y, 0, (x * 20) as u8);
                frame.set(x, y, 1, (y * 30) as u8);
                frame.set(x, y, 2, 255 - (x * 10) as u8);
            }
        }
        save_frame(&frame, &path).unwrap();
        let back = load_frame(&path).unwrap();
        assert_eq!(back, frame);
    }
}
