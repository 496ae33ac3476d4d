//! `ICDF` frame files: a fixed 36-byte little-endian header followed by frames
//! of row-major `u16` pixels.
//!
//! | offset | size | field          |
//! |--------|------|----------------|
//! | 0      | 4    | magic `ICDF`   |
//! | 4      | 4    | version (1)    |
//! | 8      | 4    | width          |
//! | 12     | 4    | height         |
//! | 16     | 4    | bit depth (16) |
//! | 20     | 8    | frame count    |
//! | 28     | 8    | seed           |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::RawFrame;
use crate::geometry::CameraGeometry;

pub const MAGIC: [u8; 4] = *b"ICDF";
pub const VERSION: u32 = 1;
pub const BIT_DEPTH: u32 = 16;
pub const HEADER_LEN: u64 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u64,
    pub seed: u64,
}

impl FrameHeader {
    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64 * 2
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.frame_count * self.frame_bytes()
    }

    /// Frames carry no binning or beam-center record: binning 1, centered beam.
    pub fn geometry(&self) -> Result<CameraGeometry> {
        let (w, h) = (self.width as usize, self.height as usize);
        CameraGeometry::new(w, h, 1, (w as f64 / 2.0, h as f64 / 2.0))
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8..12].copy_from_slice(&self.width.to_le_bytes());
        b[12..16].copy_from_slice(&self.height.to_le_bytes());
        b[16..20].copy_from_slice(&BIT_DEPTH.to_le_bytes());
        b[20..28].copy_from_slice(&self.frame_count.to_le_bytes());
        b[28..36].copy_from_slice(&self.seed.to_le_bytes());
        b
    }

    fn decode(b: &[u8; HEADER_LEN as usize], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        if b[0..4] != MAGIC {
            return Err(bad(format!("bad magic {:?}", &b[0..4])));
        }
        if u32_at(4) != VERSION {
            return Err(bad(format!("unsupported version {}", u32_at(4))));
        }
        if u32_at(16) != BIT_DEPTH {
            return Err(bad(format!("unsupported bit depth {}", u32_at(16))));
        }
        let h = FrameHeader {
            width: u32_at(8),
            height: u32_at(12),
            frame_count: u64_at(20),
            seed: u64_at(28),
        };
        if h.width == 0 || h.height == 0 {
            return Err(bad("zero width or height".into()));
        }
        Ok(h)
    }
}

/// Streaming writer; the frame count in the header is patched by [`FrameWriter::finish`].
pub struct FrameWriter {
    out: BufWriter<File>,
    path: PathBuf,
    header: FrameHeader,
    geometry: CameraGeometry,
    buf: Vec<u8>,
}

impl FrameWriter {
    pub fn create(path: &Path, geometry: &CameraGeometry, seed: u64) -> Result<Self> {
        let to_u32 = |v: usize| {
            u32::try_from(v).map_err(|_| Error::Geometry(format!("dimension {v} does not fit the frame file")))
        };
        let header = FrameHeader {
            width: to_u32(geometry.width())?,
            height: to_u32(geometry.height())?,
            frame_count: 0,
            seed,
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&header.encode()).map_err(|e| Error::io(path, e))?;
        Ok(FrameWriter {
            out,
            path: path.to_path_buf(),
            header,
            geometry: geometry.clone(),
            buf: Vec::new(),
        })
    }

    pub fn write(&mut self, frame: &RawFrame) -> Result<()> {
        if frame.geometry.width() != self.geometry.width() || frame.geometry.height() != self.geometry.height() {
            return Err(Error::Geometry("frame size differs from the file header".into()));
        }
        self.buf.clear();
        self.buf.extend(frame.values.iter().flat_map(|v| v.to_le_bytes()));
        self.out.write_all(&self.buf).map_err(|e| Error::io(&self.path, e))?;
        self.header.frame_count += 1;
        Ok(())
    }

    /// Patch the frame count and flush; returns the final header.
    pub fn finish(mut self) -> Result<FrameHeader> {
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.out.flush().map_err(io)?;
        let mut file = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        file.seek(SeekFrom::Start(20)).map_err(io)?;
        file.write_all(&self.header.frame_count.to_le_bytes()).map_err(io)?;
        file.sync_all().map_err(io)?;
        Ok(self.header)
    }
}

/// Write every frame of `frames` to `path`.
pub fn write_frames<I>(path: &Path, geometry: &CameraGeometry, seed: u64, frames: I) -> Result<FrameHeader>
where
    I: IntoIterator<Item = RawFrame>,
{
    let mut w = FrameWriter::create(path, geometry, seed)?;
    for f in frames {
        w.write(&f)?;
    }
    w.finish()
}

/// Streaming reader; validates the header and the exact file size on open.
pub struct FrameReader {
    input: BufReader<File>,
    path: PathBuf,
    header: FrameHeader,
    geometry: CameraGeometry,
    next: u64,
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut input = BufReader::new(file);
        let mut raw = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut raw).map_err(|_| Error::Format {
            path: path.to_path_buf(),
            reason: format!("file of {len} bytes is shorter than the header"),
        })?;
        let header = FrameHeader::decode(&raw, path)?;
        if header.file_len() != len {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!(
                    "header promises {} frames ({} bytes) but the file has {len} bytes",
                    header.frame_count,
                    header.file_len()
                ),
            });
        }
        Ok(FrameReader {
            input,
            path: path.to_path_buf(),
            geometry: header.geometry()?,
            header,
            next: 0,
            buf: vec![0; header.frame_bytes() as usize],
        })
    }

    pub fn header(&self) -> &FrameHeader {
        &self.header
    }

    pub fn geometry(&self) -> &CameraGeometry {
        &self.geometry
    }

    fn read_frame(&mut self) -> Result<RawFrame> {
        self.input
            .read_exact(&mut self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        let values = self
            .buf
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        let f = RawFrame::new(self.geometry.clone(), values, self.next)?;
        self.next += 1;
        Ok(f)
    }
}

impl Iterator for FrameReader {
    type Item = Result<RawFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        (self.next < self.header.frame_count).then(|| self.read_frame())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.header.frame_count - self.next) as usize;
        (left, Some(left))
    }
}

/// Frames of a file, stopping at the first read error and storing it in `error`.
pub(crate) struct Frames<'a> {
    reader: FrameReader,
    error: &'a mut Option<Error>,
}

impl<'a> Frames<'a> {
    pub(crate) fn new(reader: FrameReader, error: &'a mut Option<Error>) -> Self {
        Frames { reader, error }
    }
}

impl Iterator for Frames<'_> {
    type Item = RawFrame;

    fn next(&mut self) -> Option<RawFrame> {
        if self.error.is_some() {
            return None;
        }
        match self.reader.next()? {
            Ok(f) => Some(f),
            Err(e) => {
                *self.error = Some(e);
                None
            }
        }
    }
}

/// Run `f` over the frames of `path`, surfacing read errors.
pub fn with_frames<T>(path: &Path, f: impl FnOnce(&CameraGeometry, &mut dyn Iterator<Item = RawFrame>) -> Result<T>) -> Result<T> {
    let reader = FrameReader::open(path)?;
    let geometry = reader.geometry().clone();
    let mut error = None;
    let out = {
        let mut frames = Frames::new(reader, &mut error);
        f(&geometry, &mut frames)
    };
    match error {
        Some(e) => Err(e),
        None => out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_frame_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.icdf");
        let g = CameraGeometry::centered(64).unwrap();
        let h = write_frames(&p, &g, 5, [RawFrame::filled(g.clone(), 600, 0)]).unwrap();
        assert_eq!(h.frame_count, 1);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 36 + 8192);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"ICDF");
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 5);
        assert_eq!(u16::from_le_bytes([bytes[36], bytes[37]]), 600);
    }

    #[test]
    fn truncated_and_corrupt_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.icdf");
        let g = CameraGeometry::centered(4).unwrap();
        write_frames(&p, &g, 0, (0..3).map(|i| RawFrame::filled(g.clone(), i as u16, i))).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(FrameReader::open(&p), Err(Error::Format { .. })));
        bytes.push(0);
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(FrameReader::open(&p), Err(Error::Format { .. })));
        std::fs::write(&p, b"ICDF").unwrap();
        assert!(FrameReader::open(&p).is_err());
    }
}
