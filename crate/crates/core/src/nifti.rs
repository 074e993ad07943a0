//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Only the fields needed to place a 3D volume in space are honored:
//! `sizeof_hdr`, `dim`, `datatype`, `bitpix`, `pixdim`, `vox_offset`,
//! `scl_slope`/`scl_inter`, the qform/sform transforms and `magic`.
//! Files are written little-endian with an sform and a 352-byte data offset.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{AnyVolume, Dims, ElementKind, Geometry, Volume};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

mod offset {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// Element types that can be stored in a NIfTI payload.
pub trait NiftiElement: Copy + Sized {
    const KIND: ElementKind;
    const DATATYPE: i16;
    fn write_le(self, out: &mut Vec<u8>);
}

impl NiftiElement for u8 {
    const KIND: ElementKind = ElementKind::U8;
    const DATATYPE: i16 = DT_UINT8;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
}

impl NiftiElement for i16 {
    const KIND: ElementKind = ElementKind::I16;
    const DATATYPE: i16 = DT_INT16;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl NiftiElement for f32 {
    const KIND: ElementKind = ElementKind::F32;
    const DATATYPE: i16 = DT_FLOAT32;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

struct HeaderReader<'a> {
    buf: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn bytes<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[at..at + N]);
        if self.big_endian {
            b.reverse();
        }
        b
    }

    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.bytes(at))
    }

    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.bytes(at))
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.bytes(at))
    }
}

/// Reads a NIfTI-1 file, transparently decompressing gzip content.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        decode_nifti(&out)
    } else {
        decode_nifti(&raw)
    }
}

/// Parses an uncompressed NIfTI-1 byte stream.
pub fn decode_nifti(buf: &[u8]) -> Result<AnyVolume> {
    if buf.len() < HEADER_SIZE {
        return Err(Error::NotNifti(format!(
            "{} bytes is shorter than a NIfTI-1 header",
            buf.len()
        )));
    }
    let le_size = i32::from_le_bytes(buf[0..4].try_into().unwrap());
    let be_size = i32::from_be_bytes(buf[0..4].try_into().unwrap());
    let big_endian = match (le_size, be_size) {
        (348, _) => false,
        (_, 348) => true,
        (540, _) | (_, 540) => {
            return Err(Error::UnsupportedFormat("NIfTI-2 files are not supported".into()))
        }
        _ => return Err(Error::NotNifti(format!("sizeof_hdr is {le_size}, expected 348"))),
    };
    let h = HeaderReader { buf, big_endian };
    debug_assert_eq!(h.i32(offset::SIZEOF_HDR), 348);

    match &buf[offset::MAGIC..offset::MAGIC + 4] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::UnsupportedFormat(
                "header/payload file pairs are not supported".into(),
            ))
        }
        m => return Err(Error::NotNifti(format!("bad magic {m:?}"))),
    }

    let dim: Vec<i16> = (0..8).map(|i| h.i16(offset::DIM + 2 * i)).collect();
    let ndim = dim[0];
    if !(ndim == 3 || (ndim == 4 && dim[4] == 1)) {
        return Err(Error::UnsupportedFormat(format!(
            "only 3D volumes are supported (dim = {:?})",
            &dim[..=(ndim.clamp(0, 7) as usize)]
        )));
    }
    if dim[1..4].iter().any(|d| *d < 1) {
        return Err(Error::InvalidGeometry(format!("non-positive dims {:?}", &dim[1..4])));
    }
    let dims = Dims::new(dim[1] as usize, dim[2] as usize, dim[3] as usize);

    let datatype = h.i16(offset::DATATYPE);
    let kind = match datatype {
        DT_UINT8 => ElementKind::U8,
        DT_INT16 => ElementKind::I16,
        DT_FLOAT32 => ElementKind::F32,
        other => return Err(Error::UnsupportedDatatype(other)),
    };
    let bitpix = h.i16(offset::BITPIX);
    if bitpix as usize != 8 * kind.byte_size() {
        return Err(Error::UnsupportedFormat(format!(
            "bitpix {bitpix} does not match datatype {datatype}"
        )));
    }

    let slope = h.f32(offset::SCL_SLOPE);
    let inter = h.f32(offset::SCL_INTER);
    if !(slope == 0.0 || slope == 1.0) || inter != 0.0 {
        return Err(Error::UnsupportedFormat(format!(
            "intensity scaling (scl_slope {slope}, scl_inter {inter}) is not supported"
        )));
    }

    let pixdim: Vec<f64> = (0..8)
        .map(|i| h.f32(offset::PIXDIM + 4 * i) as f64)
        .collect();
    let spacing = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
    let affine = read_affine(&h, &pixdim, spacing);
    let geometry = Geometry::new(dims, spacing, affine)?;

    let vox_offset = h.f32(offset::VOX_OFFSET);
    if !(vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::NotNifti(format!("vox_offset {vox_offset} lies inside the header")));
    }
    let start = vox_offset as usize;
    let n = dims.len();
    let width = kind.byte_size();
    let available = buf.len().saturating_sub(start);
    if available < n * width {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: available / width,
        });
    }
    let payload = &buf[start..start + n * width];

    Ok(match kind {
        ElementKind::U8 => AnyVolume::U8(Volume::new(geometry, payload.to_vec())?),
        ElementKind::I16 => {
            let data = payload
                .chunks_exact(2)
                .map(|c| {
                    let b = [c[0], c[1]];
                    if big_endian {
                        i16::from_be_bytes(b)
                    } else {
                        i16::from_le_bytes(b)
                    }
                })
                .collect();
            AnyVolume::I16(Volume::new(geometry, data)?)
        }
        ElementKind::F32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| {
                    let b = [c[0], c[1], c[2], c[3]];
                    if big_endian {
                        f32::from_be_bytes(b)
                    } else {
                        f32::from_le_bytes(b)
                    }
                })
                .collect();
            AnyVolume::F32(Volume::new(geometry, data)?)
        }
    })
}

/// sform when present, then qform, then a plain scaling by the spacing.
fn read_affine(h: &HeaderReader<'_>, pixdim: &[f64], spacing: [f64; 3]) -> [[f64; 4]; 4] {
    let mut a = [[0.0; 4]; 4];
    a[3][3] = 1.0;
    if h.i16(offset::SFORM_CODE) > 0 {
        for (r, row) in a.iter_mut().take(3).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = h.f32(offset::SROW_X + 16 * r + 4 * c) as f64;
            }
        }
        return a;
    }
    if h.i16(offset::QFORM_CODE) > 0 {
        let b = h.f32(offset::QUATERN_B) as f64;
        let c = h.f32(offset::QUATERN_B + 4) as f64;
        let d = h.f32(offset::QUATERN_B + 8) as f64;
        let aa = 1.0 - (b * b + c * c + d * d);
        let q = if aa > 0.0 { aa.sqrt() } else { 0.0 };
        let rot = [
            [q * q + b * b - c * c - d * d, 2.0 * (b * c - q * d), 2.0 * (b * d + q * c)],
            [2.0 * (b * c + q * d), q * q + c * c - b * b - d * d, 2.0 * (c * d - q * b)],
            [2.0 * (b * d - q * c), 2.0 * (c * d + q * b), q * q + d * d - b * b - c * c],
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let scale = [spacing[0], spacing[1], spacing[2] * qfac];
        for r in 0..3 {
            for col in 0..3 {
                a[r][col] = rot[r][col] * scale[col];
            }
            a[r][3] = h.f32(offset::QOFFSET_X + 4 * r) as f64;
        }
        return a;
    }
    for i in 0..3 {
        a[i][i] = spacing[i];
    }
    a
}

/// Serializes a volume as an uncompressed little-endian NIfTI-1 byte stream.
pub fn encode_nifti<T: NiftiElement>(v: &Volume<T>) -> Vec<u8> {
    let g = v.geometry();
    let d = g.dims();
    let mut out = vec![0u8; VOX_OFFSET];
    let put = |out: &mut Vec<u8>, at: usize, bytes: &[u8]| {
        out[at..at + bytes.len()].copy_from_slice(bytes);
    };

    put(&mut out, offset::SIZEOF_HDR, &(HEADER_SIZE as i32).to_le_bytes());
    let dim: [i16; 8] = [3, d.nx as i16, d.ny as i16, d.nz as i16, 1, 1, 1, 1];
    for (i, v) in dim.iter().enumerate() {
        put(&mut out, offset::DIM + 2 * i, &v.to_le_bytes());
    }
    put(&mut out, offset::DATATYPE, &T::DATATYPE.to_le_bytes());
    put(&mut out, offset::BITPIX, &((8 * T::KIND.byte_size()) as i16).to_le_bytes());
    let s = g.spacing();
    let pixdim: [f32; 8] = [1.0, s[0] as f32, s[1] as f32, s[2] as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, v) in pixdim.iter().enumerate() {
        put(&mut out, offset::PIXDIM + 4 * i, &v.to_le_bytes());
    }
    put(&mut out, offset::VOX_OFFSET, &(VOX_OFFSET as f32).to_le_bytes());
    put(&mut out, offset::SCL_SLOPE, &1.0f32.to_le_bytes());
    // spatial units: millimeters
    out[offset::XYZT_UNITS] = 2;
    put(&mut out, offset::DESCRIP, b"tumorfuse");
    put(&mut out, offset::QFORM_CODE, &0i16.to_le_bytes());
    put(&mut out, offset::SFORM_CODE, &1i16.to_le_bytes());
    for (r, row) in g.affine().iter().take(3).enumerate() {
        for (c, v) in row.iter().enumerate() {
            put(&mut out, offset::SROW_X + 16 * r + 4 * c, &(*v as f32).to_le_bytes());
        }
    }
    put(&mut out, offset::MAGIC, b"n+1\0");

    out.reserve(d.len() * T::KIND.byte_size());
    for x in v.data() {
        x.write_le(&mut out);
    }
    out
}

/// Writes a NIfTI-1 file, gzip-compressed when `compress` is set.
///
/// Spacing and affine entries are stored as float32, as the format requires.
pub fn write_nifti<T: NiftiElement>(v: &Volume<T>, path: impl AsRef<Path>, compress: bool) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(v);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if compress {
        let mut enc = GzEncoder::new(w, Compression::default());
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        w.write_all(&bytes).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

/// Writes whichever element type the volume carries.
pub fn write_any(v: &AnyVolume, path: impl AsRef<Path>, compress: bool) -> Result<()> {
    match v {
        AnyVolume::U8(v) => write_nifti(v, path, compress),
        AnyVolume::I16(v) => write_nifti(v, path, compress),
        AnyVolume::F32(v) => write_nifti(v, path, compress),
    }
}
