//! NIfTI-1 reader and writer.
//!
//! Single-file (`n+1`) images are supported for reading and writing, with or
//! without gzip compression. Detached header/image pairs (`ni1`) are read
//! from the `.hdr` path. Header extensions are skipped on read and never
//! written. Only little-endian files are accepted.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Cursor, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Affine, BinaryMask, Grid, Volume};

pub const HEADER_SIZE: usize = 348;
const NIFTI2_HEADER_SIZE: i32 = 540;
/// Header plus the 4-byte extension flag.
const SINGLE_FILE_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, thiserror::Error)]
pub enum NiftiError {
    #[error("bad magic {0:?}: not a NIfTI-1 file")]
    BadMagic([u8; 4]),
    #[error("unexpected header size {0}: not a NIfTI-1 file")]
    HeaderSize(i32),
    #[error("NIfTI-2 files are not supported")]
    Nifti2,
    #[error("big-endian NIfTI files are not supported")]
    BigEndian,
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("truncated file: needed {expected} bytes, found {available}")]
    Truncated { expected: u64, available: u64 },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("corrupt compressed stream: {0}")]
    Compression(String),
}

/// On-disk voxel datatypes this crate reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Float32,
    Float64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            16 => Ok(Datatype::Float32),
            64 => Ok(Datatype::Float64),
            other => Err(NiftiError::UnsupportedDatatype(other)),
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }

    pub fn bitpix(self) -> i16 {
        self.bytes_per_voxel() as i16 * 8
    }
}

/// The subset of the 348-byte NIfTI-1 header this crate interprets.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

fn le_i16(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn le_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

impl NiftiHeader {
    /// Parses and validates a raw header block.
    pub fn parse(bytes: &[u8; HEADER_SIZE]) -> Result<Self, NiftiError> {
        let b = &bytes[..];
        let sizeof_hdr = le_i32(b, 0);
        if sizeof_hdr != HEADER_SIZE as i32 {
            let swapped = sizeof_hdr.swap_bytes();
            return Err(
                if sizeof_hdr == NIFTI2_HEADER_SIZE || swapped == NIFTI2_HEADER_SIZE {
                    NiftiError::Nifti2
                } else if swapped == HEADER_SIZE as i32 {
                    NiftiError::BigEndian
                } else {
                    NiftiError::HeaderSize(sizeof_hdr)
                },
            );
        }

        let mut magic = [0u8; 4];
        magic.copy_from_slice(&b[344..348]);
        if &magic != MAGIC_SINGLE && &magic != MAGIC_PAIR {
            return Err(NiftiError::BadMagic(magic));
        }

        let mut dim = [0i16; 8];
        for (i, d) in dim.iter_mut().enumerate() {
            *d = le_i16(b, 40 + 2 * i);
        }
        if !(1..=7).contains(&dim[0]) && (1..=7).contains(&dim[0].swap_bytes()) {
            return Err(NiftiError::BigEndian);
        }

        let mut pixdim = [0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = le_f32(b, 76 + 4 * i);
        }
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = le_f32(b, 280 + 16 * r + 4 * c);
            }
        }

        let header = NiftiHeader {
            dim,
            datatype: le_i16(b, 70),
            bitpix: le_i16(b, 72),
            pixdim,
            vox_offset: le_f32(b, 108),
            scl_slope: le_f32(b, 112),
            scl_inter: le_f32(b, 116),
            xyzt_units: b[123],
            qform_code: le_i16(b, 252),
            sform_code: le_i16(b, 254),
            quatern: [le_f32(b, 256), le_f32(b, 260), le_f32(b, 264)],
            qoffset: [le_f32(b, 268), le_f32(b, 272), le_f32(b, 276)],
            srow,
            magic,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<(), NiftiError> {
        let rank = self.dim[0];
        if rank != 3 && rank != 4 {
            return Err(NiftiError::Shape(format!(
                "dim[0] = {rank}, only 3D volumes (or 4D with a single frame) are supported"
            )));
        }
        if rank == 4 && self.dim[4] != 1 {
            return Err(NiftiError::Shape(format!(
                "dim[4] = {}, only single-frame 4D volumes are supported",
                self.dim[4]
            )));
        }
        if self.dim[1..4].iter().any(|&d| d < 1) {
            return Err(NiftiError::Shape(format!(
                "spatial dimensions must be positive, got {:?}",
                &self.dim[1..4]
            )));
        }
        let datatype = Datatype::from_code(self.datatype)?;
        if self.bitpix != datatype.bitpix() {
            return Err(NiftiError::InvalidHeader(format!(
                "bitpix {} does not match datatype {}",
                self.bitpix, self.datatype
            )));
        }
        if self.pixdim[1..4]
            .iter()
            .any(|&p| !(p.is_finite() && p != 0.0))
        {
            return Err(NiftiError::InvalidHeader(format!(
                "voxel spacing must be finite and nonzero, got {:?}",
                &self.pixdim[1..4]
            )));
        }
        let min_offset = if self.is_single_file() {
            SINGLE_FILE_OFFSET as f32
        } else {
            0.0
        };
        if !(self.vox_offset.is_finite()
            && self.vox_offset >= min_offset
            && self.vox_offset.fract() == 0.0
            && self.vox_offset <= u32::MAX as f32)
        {
            return Err(NiftiError::InvalidHeader(format!(
                "vox_offset {} is not a valid payload offset",
                self.vox_offset
            )));
        }
        if !self.scl_slope.is_finite() || !self.scl_inter.is_finite() {
            return Err(NiftiError::InvalidHeader(
                "scl_slope and scl_inter must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn is_single_file(&self) -> bool {
        &self.magic == MAGIC_SINGLE
    }

    pub fn datatype(&self) -> Result<Datatype, NiftiError> {
        Datatype::from_code(self.datatype)
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.dim[1] as usize,
            self.dim[2] as usize,
            self.dim[3] as usize,
        ]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            f64::from(self.pixdim[1].abs()),
            f64::from(self.pixdim[2].abs()),
            f64::from(self.pixdim[3].abs()),
        ]
    }

    /// Payload size in bytes, or a shape error if it does not fit in memory.
    pub fn payload_len(&self) -> Result<usize, NiftiError> {
        let per_voxel = self.datatype()?.bytes_per_voxel();
        self.dims()
            .iter()
            .try_fold(per_voxel, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| NiftiError::Shape(format!("dimensions {:?} overflow", self.dims())))
    }

    /// Voxel-to-world transform: sform when `sform_code > 0`, else qform when
    /// `qform_code > 0`, else a plain scaling by pixdim.
    pub fn affine(&self) -> Affine {
        let mut a = [[0.0; 4]; 4];
        a[3][3] = 1.0;
        if self.sform_code > 0 {
            for r in 0..3 {
                for c in 0..4 {
                    a[r][c] = f64::from(self.srow[r][c]);
                }
            }
        } else if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(f64::from);
            let a2 = 1.0 - (b * b + c * c + d * d);
            let w = if a2 > 0.0 { a2.sqrt() } else { 0.0 };
            let rot = [
                [
                    w * w + b * b - c * c - d * d,
                    2.0 * (b * c - w * d),
                    2.0 * (b * d + w * c),
                ],
                [
                    2.0 * (b * c + w * d),
                    w * w + c * c - b * b - d * d,
                    2.0 * (c * d - w * b),
                ],
                [
                    2.0 * (b * d - w * c),
                    2.0 * (c * d + w * b),
                    w * w + d * d - c * c - b * b,
                ],
            ];
            let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
            let [sx, sy, sz] = self.spacing();
            let scale = [sx, sy, sz * qfac];
            for r in 0..3 {
                for c in 0..3 {
                    a[r][c] = rot[r][c] * scale[c];
                }
                a[r][3] = f64::from(self.qoffset[r]);
            }
        } else {
            let s = self.spacing();
            for axis in 0..3 {
                a[axis][axis] = s[axis];
            }
        }
        a
    }

    fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        let mut b = [0u8; HEADER_SIZE];
        b[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
        b[38] = b'r';
        for (i, d) in self.dim.iter().enumerate() {
            b[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        b[70..72].copy_from_slice(&self.datatype.to_le_bytes());
        b[72..74].copy_from_slice(&self.bitpix.to_le_bytes());
        for (i, p) in self.pixdim.iter().enumerate() {
            b[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
        }
        b[108..112].copy_from_slice(&self.vox_offset.to_le_bytes());
        b[112..116].copy_from_slice(&self.scl_slope.to_le_bytes());
        b[116..120].copy_from_slice(&self.scl_inter.to_le_bytes());
        b[123] = self.xyzt_units;
        b[252..254].copy_from_slice(&self.qform_code.to_le_bytes());
        b[254..256].copy_from_slice(&self.sform_code.to_le_bytes());
        for (i, q) in self.quatern.iter().enumerate() {
            b[256 + 4 * i..260 + 4 * i].copy_from_slice(&q.to_le_bytes());
        }
        for (i, q) in self.qoffset.iter().enumerate() {
            b[268 + 4 * i..272 + 4 * i].copy_from_slice(&q.to_le_bytes());
        }
        for (r, row) in self.srow.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let at = 280 + 16 * r + 4 * c;
                b[at..at + 4].copy_from_slice(&v.to_le_bytes());
            }
        }
        b[344..348].copy_from_slice(&self.magic);
        b
    }
}

/// Decompressed view of a file or buffer.
struct Source<'a> {
    reader: Box<dyn Read + 'a>,
    compressed: bool,
}

impl<'a> Source<'a> {
    /// Wraps `inner` in a gzip decoder when it starts with the gzip magic.
    fn open<R: BufRead + 'a>(mut inner: R) -> io::Result<Self> {
        let head = inner.fill_buf()?;
        if head.len() >= 2 && head[..2] == GZIP_MAGIC {
            Ok(Source {
                reader: Box::new(MultiGzDecoder::new(inner)),
                compressed: true,
            })
        } else {
            Ok(Source {
                reader: Box::new(inner),
                compressed: false,
            })
        }
    }

    /// Runs a compressed stream to its end so that a damaged tail or a bad
    /// checksum is reported even when the payload itself decoded.
    fn finish(mut self) -> Result<()> {
        if self.compressed {
            io::copy(&mut self.reader, &mut io::sink()).map_err(classify_read_error)?;
        }
        Ok(())
    }
}

fn classify_read_error(err: io::Error) -> Error {
    match err.kind() {
        // the gzip decoder reports a cut-off stream as UnexpectedEof
        io::ErrorKind::InvalidInput | io::ErrorKind::InvalidData | io::ErrorKind::UnexpectedEof => {
            NiftiError::Compression(err.to_string()).into()
        }
        _ => Error::Io(err),
    }
}

/// Reads up to `len` bytes. The buffer grows with the data actually present,
/// so a corrupt dimension field cannot trigger a huge allocation.
fn read_exact_bounded(reader: &mut dyn Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    reader
        .take(len as u64)
        .read_to_end(&mut buf)
        .map_err(classify_read_error)?;
    if buf.len() < len {
        return Err(NiftiError::Truncated {
            expected: len as u64,
            available: buf.len() as u64,
        }
        .into());
    }
    Ok(buf)
}

fn read_header(reader: &mut dyn Read) -> Result<NiftiHeader> {
    let raw = read_exact_bounded(reader, HEADER_SIZE)?;
    let mut block = [0u8; HEADER_SIZE];
    block.copy_from_slice(&raw);
    Ok(NiftiHeader::parse(&block)?)
}

fn skip(reader: &mut dyn Read, len: u64) -> Result<()> {
    let copied = io::copy(&mut reader.take(len), &mut io::sink()).map_err(classify_read_error)?;
    if copied < len {
        return Err(NiftiError::Truncated {
            expected: len,
            available: copied,
        }
        .into());
    }
    Ok(())
}

fn decode_payload(header: &NiftiHeader, payload: &[u8]) -> Result<Volume<f32>> {
    let datatype = header.datatype()?;
    let mut values: Vec<f32> = match datatype {
        Datatype::Uint8 => payload.iter().map(|&v| f32::from(v)).collect(),
        Datatype::Int16 => payload
            .chunks_exact(2)
            .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Datatype::Float32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Datatype::Float64 => payload
            .chunks_exact(8)
            .map(|c| {
                let mut w = [0u8; 8];
                w.copy_from_slice(c);
                f64::from_le_bytes(w) as f32
            })
            .collect(),
    };
    let (slope, inter) = (header.scl_slope, header.scl_inter);
    if slope != 0.0 && !(slope == 1.0 && inter == 0.0) {
        let (slope, inter) = (f64::from(slope), f64::from(inter));
        for v in &mut values {
            *v = (f64::from(*v) * slope + inter) as f32;
        }
    }
    let grid = Grid::with_affine(header.dims(), header.spacing(), header.affine())
        .map_err(|e| NiftiError::InvalidHeader(e.to_string()))?;
    Volume::new(grid, values)
}

fn read_single_file(reader: &mut dyn Read, header: &NiftiHeader) -> Result<Volume<f32>> {
    let offset = header.vox_offset as u64;
    skip(reader, offset - HEADER_SIZE as u64)?;
    let payload = read_exact_bounded(reader, header.payload_len()?)?;
    decode_payload(header, &payload)
}

/// Decodes a single-file NIfTI-1 image held in memory, gzip-compressed or not.
pub fn decode_volume(bytes: &[u8]) -> Result<Volume<f32>> {
    let mut source = Source::open(Cursor::new(bytes))?;
    let header = read_header(&mut source.reader)?;
    if !header.is_single_file() {
        return Err(NiftiError::InvalidHeader(
            "detached header (ni1) needs its companion .img file".into(),
        )
        .into());
    }
    let v = read_single_file(&mut source.reader, &header)?;
    source.finish()?;
    Ok(v)
}

fn companion_image_path(path: &Path) -> Option<PathBuf> {
    let name = path.file_name()?.to_str()?;
    let candidates: Vec<String> = if let Some(stem) = name.strip_suffix(".hdr.gz") {
        vec![format!("{stem}.img.gz"), format!("{stem}.img")]
    } else if let Some(stem) = name.strip_suffix(".hdr") {
        vec![format!("{stem}.img"), format!("{stem}.img.gz")]
    } else {
        return None;
    };
    candidates
        .into_iter()
        .map(|c| path.with_file_name(c))
        .find(|p| p.exists())
}

/// Reads a `.nii`, `.nii.gz` or `.hdr`/`.img` volume from disk.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume<f32>> {
    let path = path.as_ref();
    let mut source = Source::open(BufReader::new(File::open(path)?))?;
    let header = read_header(&mut source.reader)?;
    if header.is_single_file() {
        let v = read_single_file(&mut source.reader, &header)?;
        source.finish()?;
        return Ok(v);
    }
    let image_path = companion_image_path(path).ok_or_else(|| {
        NiftiError::InvalidHeader(format!(
            "no companion image file found for detached header {}",
            path.display()
        ))
    })?;
    let mut image = Source::open(BufReader::new(File::open(image_path)?))?;
    skip(&mut image.reader, header.vox_offset as u64)?;
    let payload = read_exact_bounded(&mut image.reader, header.payload_len()?)?;
    image.finish()?;
    decode_payload(&header, &payload)
}

fn header_for(grid: &Grid, datatype: Datatype) -> Result<NiftiHeader> {
    let dims = grid.dims();
    let mut dim = [1i16; 8];
    dim[0] = 3;
    for axis in 0..3 {
        dim[axis + 1] = i16::try_from(dims[axis]).map_err(|_| {
            NiftiError::Shape(format!(
                "dimension {} exceeds the NIfTI-1 limit",
                dims[axis]
            ))
        })?;
    }
    let spacing = grid.spacing();
    let mut pixdim = [0f32; 8];
    pixdim[0] = 1.0;
    for axis in 0..3 {
        pixdim[axis + 1] = spacing[axis] as f32;
    }
    let affine = grid.affine();
    let mut srow = [[0f32; 4]; 3];
    for r in 0..3 {
        for c in 0..4 {
            srow[r][c] = affine[r][c] as f32;
        }
    }
    Ok(NiftiHeader {
        dim,
        datatype: datatype.code(),
        bitpix: datatype.bitpix(),
        pixdim,
        vox_offset: SINGLE_FILE_OFFSET as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        // millimetres, seconds
        xyzt_units: 2 | 8,
        qform_code: 0,
        sform_code: 1,
        quatern: [0.0; 3],
        qoffset: [0.0; 3],
        srow,
        magic: *MAGIC_SINGLE,
    })
}

fn check_integral(v: f32, min: f32, max: f32, datatype: Datatype, index: usize) -> Result<()> {
    if v.fract() != 0.0 || v < min || v > max || !v.is_finite() {
        return Err(NiftiError::Range(format!(
            "value {v} at voxel index {index} is not representable as {datatype:?}"
        ))
        .into());
    }
    Ok(())
}

fn encode_payload(values: &[f32], datatype: Datatype) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(values.len() * datatype.bytes_per_voxel());
    match datatype {
        Datatype::Uint8 => {
            for (i, &v) in values.iter().enumerate() {
                check_integral(v, 0.0, 255.0, datatype, i)?;
                out.push(v as u8);
            }
        }
        Datatype::Int16 => {
            for (i, &v) in values.iter().enumerate() {
                check_integral(v, f32::from(i16::MIN), f32::from(i16::MAX), datatype, i)?;
                out.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        Datatype::Float32 => {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Datatype::Float64 => {
            for &v in values {
                out.extend_from_slice(&f64::from(v).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Serializes `v` as an uncompressed single-file NIfTI-1 image.
pub fn encode_volume(v: &Volume<f32>, datatype: Datatype) -> Result<Vec<u8>> {
    let header = header_for(v.grid(), datatype)?;
    let payload = encode_payload(v.data(), datatype)?;
    let mut out = Vec::with_capacity(SINGLE_FILE_OFFSET + payload.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&[0u8; SINGLE_FILE_OFFSET - HEADER_SIZE]);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Gzip stream with a zero modification time, so output bytes depend only
/// on the input.
pub fn gzip(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut encoder = GzEncoder::new(Vec::new(), Compression::default());
    encoder.write_all(bytes)?;
    Ok(encoder.finish()?)
}

pub fn write_volume(
    v: &Volume<f32>,
    path: impl AsRef<Path>,
    datatype: Datatype,
    compress: bool,
) -> Result<()> {
    let raw = encode_volume(v, datatype)?;
    let bytes = if compress { gzip(&raw)? } else { raw };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Writes a mask as uint8.
pub fn write_mask(m: &BinaryMask, path: impl AsRef<Path>, compress: bool) -> Result<()> {
    write_volume(&m.to_f32(), path, Datatype::Uint8, compress)
}

/// True when the path names a gzip-compressed NIfTI file by extension.
pub fn is_gz_path(path: impl AsRef<Path>) -> bool {
    path.as_ref()
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Volume<f32> {
        let grid = Grid::new([4, 4, 4], [1.0; 3]).unwrap();
        Volume::new(grid, (0..64).map(|v| v as f32).collect()).unwrap()
    }

    fn set_i16(bytes: &mut [u8], at: usize, v: i16) {
        bytes[at..at + 2].copy_from_slice(&v.to_le_bytes());
    }

    fn set_f32(bytes: &mut [u8], at: usize, v: f32) {
        bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
    }

    #[test]
    fn encoded_layout() {
        let bytes = encode_volume(&ramp(), Datatype::Float32).unwrap();
        assert_eq!(bytes.len(), 352 + 64 * 4);
        assert_eq!(le_i32(&bytes, 0), 348);
        assert_eq!(&bytes[344..348], b"n+1\0");
        assert_eq!(le_i16(&bytes, 70), 16);
        assert_eq!(le_i16(&bytes, 72), 32);
        assert_eq!(le_f32(&bytes, 108), 352.0);
        assert_eq!(le_f32(&bytes, 112), 1.0);
        assert_eq!(le_f32(&bytes, 116), 0.0);
        assert_eq!(le_f32(&bytes, 352 + 4 * 63), 63.0);
    }

    #[test]
    fn ramp_round_trip_plain_and_gzip() {
        let v = ramp();
        let raw = encode_volume(&v, Datatype::Float32).unwrap();
        assert_eq!(decode_volume(&raw).unwrap(), v);
        let gz = gzip(&raw).unwrap();
        assert_eq!(&gz[..2], &GZIP_MAGIC);
        assert_eq!(decode_volume(&gz).unwrap(), v);
    }

    #[test]
    fn integer_datatypes_round_trip() {
        let v = ramp();
        for dt in [Datatype::Uint8, Datatype::Int16, Datatype::Float64] {
            let raw = encode_volume(&v, dt).unwrap();
            assert_eq!(decode_volume(&raw).unwrap(), v, "{dt:?}");
        }
    }

    #[test]
    fn unrepresentable_values_are_range_errors() {
        let grid = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let v = Volume::new(grid.clone(), vec![0.0, 1.5]).unwrap();
        assert!(matches!(
            encode_volume(&v, Datatype::Uint8),
            Err(Error::Nifti(NiftiError::Range(_)))
        ));
        let v = Volume::new(grid.clone(), vec![0.0, 256.0]).unwrap();
        assert!(encode_volume(&v, Datatype::Uint8).is_err());
        let v = Volume::new(grid, vec![-40000.0, 0.0]).unwrap();
        assert!(encode_volume(&v, Datatype::Int16).is_err());
    }

    #[test]
    fn rejects_unsupported_datatype() {
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_i16(&mut raw, 70, 8);
        set_i16(&mut raw, 72, 32);
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::UnsupportedDatatype(8)))
        ));
    }

    #[test]
    fn rejects_bad_magic_and_nifti2() {
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        raw[344..348].copy_from_slice(b"abcd");
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::BadMagic(_)))
        ));

        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        raw[0..4].copy_from_slice(&540i32.to_le_bytes());
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::Nifti2))
        ));
    }

    #[test]
    fn rejects_big_endian() {
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        raw[0..4].copy_from_slice(&348i32.to_be_bytes());
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::BigEndian))
        ));

        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        raw[40..42].copy_from_slice(&3i16.to_be_bytes());
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::BigEndian))
        ));
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_i16(&mut raw, 40, 2);
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::Shape(_)))
        ));

        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_i16(&mut raw, 40, 4);
        set_i16(&mut raw, 48, 2);
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::Shape(_)))
        ));

        // a single-frame 4D file is accepted
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_i16(&mut raw, 40, 4);
        set_i16(&mut raw, 48, 1);
        assert_eq!(decode_volume(&raw).unwrap(), ramp());
    }

    #[test]
    fn truncated_payload() {
        let raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        let cut = &raw[..raw.len() - 3];
        assert!(matches!(
            decode_volume(cut),
            Err(Error::Nifti(NiftiError::Truncated {
                expected: 256,
                available: 253
            }))
        ));
        assert!(matches!(
            decode_volume(&raw[..100]),
            Err(Error::Nifti(NiftiError::Truncated { .. }))
        ));
        // a huge declared payload is reported as truncation, not allocated
        let mut raw = raw.clone();
        for at in [42, 44, 46] {
            set_i16(&mut raw, at, i16::MAX);
        }
        assert!(matches!(
            decode_volume(&raw),
            Err(Error::Nifti(NiftiError::Truncated { .. }))
        ));
    }

    #[test]
    fn rejects_bad_offsets() {
        for offset in [0.0, 348.0, 351.0, 352.5, f32::NAN, -4.0] {
            let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
            set_f32(&mut raw, 108, offset);
            assert!(
                matches!(
                    decode_volume(&raw),
                    Err(Error::Nifti(NiftiError::InvalidHeader(_)))
                ),
                "offset {offset}"
            );
        }
    }

    #[test]
    fn cut_off_gzip_stream() {
        let z = gzip(&encode_volume(&ramp(), Datatype::Float32).unwrap()).unwrap();
        for len in [3, 12, z.len() / 2, z.len() - 9] {
            assert!(
                matches!(decode_volume(&z[..len]), Err(Error::Nifti(_))),
                "cut at {len}"
            );
        }
    }

    #[test]
    fn applies_value_scaling() {
        let mut raw = encode_volume(&ramp(), Datatype::Int16).unwrap();
        set_f32(&mut raw, 112, 0.5);
        set_f32(&mut raw, 116, 2.0);
        let v = decode_volume(&raw).unwrap();
        assert_eq!(v.data()[10], 7.0);

        // slope 0 means "no scaling"
        let mut raw = encode_volume(&ramp(), Datatype::Int16).unwrap();
        set_f32(&mut raw, 112, 0.0);
        set_f32(&mut raw, 116, 5.0);
        assert_eq!(decode_volume(&raw).unwrap(), ramp());
    }

    #[test]
    fn affine_from_sform_and_qform() {
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_f32(&mut raw, 76 + 8, 2.0);
        set_f32(&mut raw, 280 + 12, -10.0);
        let v = decode_volume(&raw).unwrap();
        assert_eq!(v.grid().spacing(), [1.0, 2.0, 1.0]);
        assert_eq!(v.grid().affine()[0][3], -10.0);

        // qform only: 180 degree rotation about z (b=0, c=0, d=1)
        let mut raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        set_i16(&mut raw, 254, 0);
        set_i16(&mut raw, 252, 1);
        set_f32(&mut raw, 264, 1.0);
        set_f32(&mut raw, 268, 5.0);
        let a = *decode_volume(&raw).unwrap().grid().affine();
        assert_eq!(a[0][0], -1.0);
        assert_eq!(a[1][1], -1.0);
        assert_eq!(a[2][2], 1.0);
        assert_eq!(a[0][3], 5.0);
    }

    #[test]
    fn detached_pair() {
        let dir = tempfile::tempdir().unwrap();
        let raw = encode_volume(&ramp(), Datatype::Float32).unwrap();
        let mut hdr = raw[..HEADER_SIZE].to_vec();
        hdr[344..348].copy_from_slice(MAGIC_PAIR);
        hdr[108..112].copy_from_slice(&0f32.to_le_bytes());
        std::fs::write(dir.path().join("a.hdr"), &hdr).unwrap();
        std::fs::write(dir.path().join("a.img"), &raw[352..]).unwrap();
        assert_eq!(read_volume(dir.path().join("a.hdr")).unwrap(), ramp());
        assert!(decode_volume(&hdr).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_volume("/nonexistent/x.nii"),
            Err(Error::Io(_))
        ));
    }
}
