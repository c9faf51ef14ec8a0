//! Files on disk: track CSVs, frame sequences, overlays and reports.
//!
//! Track files have the header `frame,id,x,y,w,h[,conf]`, with `x, y` the
//! top-left corner in pixels. Frame sequences are either a directory of
//! `frame_000000.png` style images or a manifest listing one image path per
//! line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::appearance::Frame;
use crate::error::{Error, Result};
use crate::evaluation::TrackRecord;
use crate::geometry::BBox;
use crate::sim::{EventKind, SyntheticSequence};

/// Anything that can hand out frames by index.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Frame>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for SyntheticSequence {
    fn len(&self) -> usize {
        SyntheticSequence::len(self)
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        if index >= SyntheticSequence::len(self) {
            return Err(Error::Frame {
                index,
                message: "past the end of the sequence".into(),
            });
        }
        Ok(SyntheticSequence::frame(self, index))
    }
}

/// Image files on disk, decoded on demand.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    paths: Vec<PathBuf>,
    width: u32,
    height: u32,
}

fn frame_number(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !matches!(ext.as_str(), "png" | "jpg" | "jpeg") {
        return None;
    }
    let digits = path.file_stem()?.to_str()?.strip_prefix("frame_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl FrameSequence {
    /// Opens a frame directory or a manifest file. Every image header is
    /// read up front so size mismatches surface before tracking starts.
    pub fn open(path: &Path) -> Result<Self> {
        let paths = if path.is_dir() {
            let mut numbered = Vec::new();
            for entry in fs::read_dir(path)? {
                let p = entry?.path();
                if let Some(n) = frame_number(&p) {
                    numbered.push((n, p));
                }
            }
            numbered.sort();
            if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Input(format!("two images for frame number {}", w[0].0)));
            }
            numbered.into_iter().map(|(_, p)| p).collect()
        } else {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(""));
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| base.join(l))
                .collect::<Vec<_>>()
        };
        Self::from_paths(paths)
    }

    pub fn from_paths(paths: Vec<PathBuf>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Input("no frames found".into()));
        }
        let mut size = None;
        for (index, p) in paths.iter().enumerate() {
            let dims = image::image_dimensions(p).map_err(|e| Error::Frame {
                index,
                message: format!("{}: {e}", p.display()),
            })?;
            match size {
                None => size = Some(dims),
                Some(first) if first != dims => {
                    return Err(Error::Frame {
                        index,
                        message: format!(
                            "{} is {}x{}, earlier frames are {}x{}",
                            p.display(),
                            dims.0,
                            dims.1,
                            first.0,
                            first.1
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        let (width, height) = size.expect("at least one frame");
        Ok(Self { paths, width, height })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn path(&self, index: usize) -> &Path {
        &self.paths[index]
    }
}

impl FrameSource for FrameSequence {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        let path = self.paths.get(index).ok_or_else(|| Error::Frame {
            index,
            message: "past the end of the sequence".into(),
        })?;
        let img = image::open(path).map_err(|e| Error::Frame {
            index,
            message: format!("{}: {e}", path.display()),
        })?;
        let rgb = img.to_rgb8();
        if rgb.dimensions() != (self.width, self.height) {
            return Err(Error::Frame {
                index,
                message: format!("{} changed size since the sequence was opened", path.display()),
            });
        }
        Frame::from_image(&rgb)
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Creates (or truncates) an output file; failures are runtime errors.
pub fn create_output(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| output_error(path, e))
}

pub fn create_output_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| output_error(path, e))
}

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| output_error(path, e))
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    frame.to_image().save(path).map_err(|e| output_error(path, e))
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

/// Writes frames as numbered PNG files into `dir`, creating it if needed.
pub fn write_frames<S: FrameSource + ?Sized>(source: &S, dir: &Path) -> Result<()> {
    create_output_dir(dir)?;
    for t in 0..source.len() {
        save_frame(&source.frame(t)?, &dir.join(frame_file_name(t)))?;
    }
    Ok(())
}

fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.3}");
    // avoid "-0.000"
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        "0.000".into()
    } else {
        s
    }
}

/// Writes records sorted by (frame, id). The confidence column is present
/// when any record carries one.
pub fn write_tracks<W: Write>(writer: W, records: &[TrackRecord]) -> Result<()> {
    let with_conf = records.iter().any(|r| r.confidence.is_some());
    let mut sorted: Vec<&TrackRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.object));
    let mut w = TrackWriter::new(writer, with_conf)?;
    for r in sorted {
        w.write(r)?;
    }
    w.finish()
}

pub fn write_tracks_file(path: &Path, records: &[TrackRecord]) -> Result<()> {
    write_tracks(create_output(path)?, records)
}

/// Incremental track writer, so long runs can flush what they have.
pub struct TrackWriter<W: Write> {
    inner: csv::Writer<W>,
    with_conf: bool,
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("{other:?}")),
    }
}

impl<W: Write> TrackWriter<W> {
    pub fn new(writer: W, with_conf: bool) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["frame", "id", "x", "y", "w", "h"];
        if with_conf {
            header.push("conf");
        }
        inner.write_record(&header).map_err(csv_error)?;
        Ok(Self { inner, with_conf })
    }

    pub fn write(&mut self, r: &TrackRecord) -> Result<()> {
        let b = &r.bbox;
        let mut row = vec![
            r.frame.to_string(),
            r.object.to_string(),
            fmt_coord(b.left()),
            fmt_coord(b.top()),
            fmt_coord(b.width),
            fmt_coord(b.height),
        ];
        if self.with_conf {
            row.push(r.confidence.map(|c| format!("{c:.6}")).unwrap_or_default());
        }
        self.inner.write_record(&row).map_err(csv_error)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(Error::Io)
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush()
    }
}

/// Parses a track file. Errors name the file and line.
pub fn read_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    parse_tracks(file, path)
}

pub fn parse_tracks<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<TrackRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let expected = ["frame", "id", "x", "y", "w", "h"];
    let has_conf = match header.len() {
        6 => false,
        7 if header[6] == "conf" => true,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header frame,id,x,y,w,h[,conf], found {}", header.join(",")),
            ))
        }
    };
    if header[..6] != expected {
        return Err(parse_err(
            1,
            format!("expected header frame,id,x,y,w,h[,conf], found {}", header.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| row.get(k).unwrap_or("");
        let int = |k: usize| {
            field(k).parse::<u64>().map_err(|_| {
                parse_err(
                    line,
                    format!("{} = '{}' is not a non-negative integer", expected[k], field(k)),
                )
            })
        };
        let real = |k: usize| match field(k).parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_err(
                line,
                format!("{} = '{}' is not a number", expected[k], field(k)),
            )),
        };
        let frame = int(0)? as usize;
        let object = int(1)?;
        let bbox =
            BBox::from_corner(real(2)?, real(3)?, real(4)?, real(5)?).map_err(|e| parse_err(line, e.to_string()))?;
        let confidence = if has_conf && !field(6).is_empty() {
            match field(6).parse::<f64>() {
                Ok(c) if (0.0..=1.0).contains(&c) => Some(c),
                _ => return Err(parse_err(line, format!("conf = '{}' is not in [0, 1]", field(6)))),
            }
        } else {
            None
        };
        if !seen.insert((frame, object)) {
            return Err(parse_err(line, format!("second record for frame {frame}, id {object}")));
        }
        out.push(TrackRecord {
            frame,
            object,
            bbox,
            confidence,
        });
    }
    Ok(out)
}

/// Boxes of the earliest annotated frame, ordered by id.
pub fn initial_annotations(records: &[TrackRecord]) -> Result<(usize, Vec<(u64, BBox)>)> {
    let first = records
        .iter()
        .map(|r| r.frame)
        .min()
        .ok_or_else(|| Error::Input("annotation file has no records".into()))?;
    let boxes: BTreeMap<u64, BBox> = records
        .iter()
        .filter(|r| r.frame == first)
        .map(|r| (r.object, r.bbox))
        .collect();
    Ok((first, boxes.into_iter().collect()))
}

/// A color per object id that stays fixed across runs.
pub fn object_color(id: u64) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 12] = [
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
        [220, 190, 255],
        [170, 110, 40],
        [255, 250, 200],
    ];
    PALETTE[(id % PALETTE.len() as u64) as usize]
}

/// Pixels on the outline of `bbox`, `thickness` pixels wide, clipped to the frame.
pub fn outline_pixels(bbox: &BBox, width: usize, height: usize, thickness: usize) -> Vec<(usize, usize)> {
    let x0 = bbox.left().round().max(0.0) as i64;
    let y0 = bbox.top().round().max(0.0) as i64;
    let x1 = (bbox.right().round() as i64 - 1).min(width as i64 - 1);
    let y1 = (bbox.bottom().round() as i64 - 1).min(height as i64 - 1);
    if x1 < x0 || y1 < y0 {
        return Vec::new();
    }
    let t = thickness.max(1) as i64;
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let ring = x - x0 < t || x1 - x < t || y - y0 < t || y1 - y < t;
            if ring {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

/// The frame with each record's box outlined in its object's color.
pub fn draw_overlay(frame: &Frame, records: &[TrackRecord]) -> Frame {
    let mut out = frame.clone();
    let mut sorted: Vec<&TrackRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.object);
    for r in sorted {
        let color = object_color(r.object);
        for (x, y) in outline_pixels(&r.bbox, frame.width(), frame.height(), 2) {
            out.set_pixel(x, y, color);
        }
    }
    out
}

/// Writes one overlay PNG per frame of `source` into `dir`.
pub fn write_overlays<S: FrameSource + ?Sized>(source: &S, records: &[TrackRecord], dir: &Path) -> Result<()> {
    create_output_dir(dir)?;
    let mut by_frame: BTreeMap<usize, Vec<TrackRecord>> = BTreeMap::new();
    for r in records {
        by_frame.entry(r.frame).or_default().push(*r);
    }
    for t in 0..source.len() {
        let frame = source.frame(t)?;
        let recs = by_frame.get(&t).map(Vec::as_slice).unwrap_or(&[]);
        save_frame(&draw_overlay(&frame, recs), &dir.join(frame_file_name(t)))?;
    }
    Ok(())
}

/// `frame,event,a,b` rows; `a` and `b` are empty for cuts.
pub fn write_events<W: Write>(mut w: W, events: &[(usize, EventKind)]) -> Result<()> {
    writeln!(w, "frame,event,a,b")?;
    for (frame, e) in events {
        match e {
            EventKind::Occlusion { a, b } => writeln!(w, "{frame},occlusion,{a},{b}")?,
            EventKind::Cut => writeln!(w, "{frame},cut,,")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(frame: usize, id: u64, x: f64, y: f64) -> TrackRecord {
        TrackRecord::new(frame, id, BBox::from_corner(x, y, 10.0, 20.0).unwrap())
    }

    fn to_string(records: &[TrackRecord]) -> String {
        let mut buf = Vec::new();
        write_tracks(&mut buf, records).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn writes_corner_and_size() {
        let text = to_string(&[rec(1, 4, 2.0, 3.5), rec(0, 9, 0.0, 0.0).with_confidence(0.25)]);
        assert_eq!(
            text,
            "frame,id,x,y,w,h,conf\n0,9,0.000,0.000,10.000,20.000,0.250000\n1,4,2.000,3.500,10.000,20.000,\n"
        );
    }

    #[test]
    fn reads_back_what_it_writes() {
        let recs = vec![
            rec(0, 1, 5.0, 6.0).with_confidence(1.0),
            rec(0, 2, 7.25, 8.0).with_confidence(0.5),
        ];
        let text = to_string(&recs);
        let back = parse_tracks(text.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("frame,id,x,y,w\n", 1, "header"),
            ("frame,id,x,y,w,h\n0,1,0,0,5,5\n0,x,0,0,5,5\n", 3, "id"),
            ("frame,id,x,y,w,h\n0,1,0,0,5,5\n0,1,1,1,5,5\n", 3, "second record"),
            ("frame,id,x,y,w,h\n0,1,0,0,0,5\n", 2, "box"),
            ("frame,id,x,y,w,h,conf\n0,1,0,0,5,5,1.5\n", 2, "conf"),
            ("frame,id,x,y,w,h\n0,1,0,0,5\n", 2, "found record with 5 fields"),
        ];
        for (text, line, needle) in cases {
            match parse_tracks(text.as_bytes(), Path::new("g.csv")) {
                Err(Error::Parse { line: l, message, .. }) => {
                    assert_eq!(l, line, "{text:?}: {message}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn initial_annotations_take_the_earliest_frame() {
        let recs = [rec(3, 2, 0.0, 0.0), rec(2, 5, 1.0, 1.0), rec(2, 1, 2.0, 2.0)];
        let (first, boxes) = initial_annotations(&recs).unwrap();
        assert_eq!(first, 2);
        assert_eq!(boxes.iter().map(|b| b.0).collect::<Vec<_>>(), vec![1, 5]);
        assert!(initial_annotations(&[]).is_err());
    }

    #[test]
    fn overlay_touches_only_the_outline() {
        let frame = Frame::filled(30, 20, [0, 0, 0]).unwrap();
        let r = rec(0, 3, 5.0, 4.0);
        let out = draw_overlay(&frame, &[r]);
        let ring: BTreeSet<_> = outline_pixels(&r.bbox, 30, 20, 2).into_iter().collect();
        for y in 0..20 {
            for x in 0..30 {
                let changed = out.pixel(x, y) != frame.pixel(x, y);
                assert_eq!(changed, ring.contains(&(x, y)), "({x},{y})");
            }
        }
        assert_eq!(out.pixel(5, 4), object_color(3));
        assert_eq!(out.width(), 30);
    }

    #[test]
    fn outline_is_clipped() {
        let b = BBox::from_corner(-5.0, -5.0, 10.0, 10.0).unwrap();
        assert!(outline_pixels(&b, 8, 8, 2).iter().all(|&(x, y)| x < 8 && y < 8));
        let off = BBox::from_corner(100.0, 100.0, 10.0, 10.0).unwrap();
        assert!(outline_pixels(&off, 8, 8, 2).is_empty());
    }

    #[test]
    fn directory_sequence_is_numeric_and_checks_sizes() {
        let dir = tempfile::tempdir().unwrap();
        for (n, w) in [(10, 4), (2, 4), (1, 4)] {
            Frame::filled(w, 3, [n as u8, 0, 0])
                .unwrap()
                .to_image()
                .save(dir.path().join(frame_file_name(n)))
                .unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let seq = FrameSequence::open(dir.path()).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.frame(2).unwrap().pixel(0, 0), [10, 0, 0]);
        assert_eq!(seq.dimensions(), (4, 3));

        Frame::filled(5, 3, [0, 0, 0])
            .unwrap()
            .to_image()
            .save(dir.path().join(frame_file_name(11)))
            .unwrap();
        match FrameSequence::open(dir.path()) {
            Err(Error::Frame { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_order_wins_and_bad_frames_are_named() {
        let dir = tempfile::tempdir().unwrap();
        for n in 0..3 {
            Frame::filled(4, 4, [n as u8, 0, 0])
                .unwrap()
                .to_image()
                .save(dir.path().join(frame_file_name(n)))
                .unwrap();
        }
        let manifest = dir.path().join("list.txt");
        fs::write(&manifest, "frame_000002.png\n\nframe_000000.png\n").unwrap();
        let seq = FrameSequence::open(&manifest).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.frame(0).unwrap().pixel(0, 0), [2, 0, 0]);

        fs::write(dir.path().join("frame_000001.png"), b"not an image").unwrap();
        fs::write(&manifest, "frame_000000.png\nframe_000001.png\n").unwrap();
        match FrameSequence::open(&manifest) {
            Err(Error::Frame { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn track_text_round_trip(rows in proptest::collection::btree_map((0usize..50, 0u64..20), (-50.0f64..700.0, -50.0f64..400.0, 1.0f64..100.0, 1.0f64..100.0, proptest::option::of(0.0f64..=1.0)), 0..40)) {
            let recs: Vec<TrackRecord> = rows.iter().map(|(&(f, id), &(x, y, w, h, c))| TrackRecord {
                frame: f,
                object: id,
                bbox: BBox::from_corner(x, y, w, h).unwrap(),
                confidence: c,
            }).collect();
            let text = to_string(&recs);
            let back = parse_tracks(text.as_bytes(), Path::new("p.csv")).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in back.iter().zip(&recs) {
                prop_assert_eq!((a.frame, a.object), (b.frame, b.object));
                prop_assert!((a.bbox.left() - b.bbox.left()).abs() <= 5e-4 + 1e-9);
                prop_assert!((a.bbox.height - b.bbox.height).abs() <= 5e-4 + 1e-9);
            }
            prop_assert_eq!(to_string(&back), text);
        }
    }
}
