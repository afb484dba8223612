//! Single-band GeoTIFF input and float32 GeoTIFF output.
//!
//! Reading accepts little- or big-endian files in strip or tile layout
//! with 8/16-bit unsigned or 32-bit float samples. The georeference comes
//! from `ModelPixelScale` + `ModelTiepoint` or from an axis-aligned
//! `ModelTransformation`; rotated or sheared transforms are rejected.

use std::fs::File;
use std::io::{BufReader, Cursor};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::colortype::Gray32Float;
use tiff::encoder::{Compression, DeflateLevel, TiffEncoder};
use tiff::tags::Tag;

use super::{GeoTransform, RasterGrid};
use crate::error::{Error, Result};

const GT_RASTER_TYPE_GEO_KEY: u16 = 1025;
const RASTER_PIXEL_IS_POINT: u16 = 2;

fn unreadable(path: &Path) -> impl Fn(tiff::TiffError) -> Error + '_ {
    move |e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() }
}

/// Reads a single-band GeoTIFF into a [`RasterGrid`].
///
/// When the file declares no `GDAL_NODATA`, the sentinel is the most
/// negative value of the sample type (0 for unsigned integers). Negative
/// float samples are not valid radiance and are read as nodata.
pub fn read_geotiff(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let file =
        File::open(path).map_err(|e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() })?;
    let mut dec = Decoder::new(BufReader::new(file)).map_err(unreadable(path))?.with_limits(Limits::unlimited());

    let spp = dec.find_tag_unsigned::<u16>(Tag::SamplesPerPixel).map_err(unreadable(path))?;
    if spp.unwrap_or(1) != 1 {
        return Err(Error::UnsupportedLayout(format!("{} samples per pixel", spp.unwrap_or(1))));
    }
    let (width, height) = dec.dimensions().map_err(unreadable(path))?;
    let transform = read_georeference(&mut dec, path, width as usize, height as usize)?;
    let declared_nodata = match dec.find_tag(Tag::GdalNodata).map_err(unreadable(path))? {
        Some(v) => {
            let s = v.into_string().map_err(unreadable(path))?;
            let s = s.trim_matches(|c: char| c == '\0' || c.is_whitespace());
            Some(
                s.parse::<f32>()
                    .map_err(|_| Error::UnsupportedLayout(format!("unparseable GDAL_NODATA value {s:?}")))?,
            )
        }
        None => None,
    };

    let image = dec.read_image().map_err(unreadable(path))?;
    let (values, default_nodata): (Vec<f32>, f32) = match image {
        DecodingResult::U8(v) => (v.into_iter().map(f32::from).collect(), 0.0),
        DecodingResult::U16(v) => (v.into_iter().map(f32::from).collect(), 0.0),
        DecodingResult::F32(v) => (v, f32::MIN),
        other => {
            return Err(Error::UnsupportedLayout(format!("sample type {} not supported", sample_type_name(&other))))
        }
    };
    let nodata = declared_nodata.unwrap_or(default_nodata);
    let values = values
        .into_iter()
        .map(|v| if v.is_nan() || v == nodata || (v >= 0.0 && v.is_finite()) { v } else { nodata })
        .collect();
    RasterGrid::new(transform, values, nodata)
}

fn sample_type_name(r: &DecodingResult) -> &'static str {
    match r {
        DecodingResult::U8(_) => "u8",
        DecodingResult::U16(_) => "u16",
        DecodingResult::U32(_) => "u32",
        DecodingResult::U64(_) => "u64",
        DecodingResult::F16(_) => "f16",
        DecodingResult::F32(_) => "f32",
        DecodingResult::F64(_) => "f64",
        DecodingResult::I8(_) => "i8",
        DecodingResult::I16(_) => "i16",
        DecodingResult::I32(_) => "i32",
        DecodingResult::I64(_) => "i64",
    }
}

fn read_georeference<R: std::io::Read + std::io::Seek>(
    dec: &mut Decoder<R>,
    path: &Path,
    cols: usize,
    rows: usize,
) -> Result<GeoTransform> {
    let f64s = |dec: &mut Decoder<R>, tag: Tag| -> Result<Option<Vec<f64>>> {
        match dec.find_tag(tag).map_err(unreadable(path))? {
            Some(v) => Ok(Some(v.into_f64_vec().map_err(unreadable(path))?)),
            None => Ok(None),
        }
    };
    let pixel_is_point = match dec.find_tag(Tag::GeoKeyDirectoryTag).map_err(unreadable(path))? {
        Some(v) => {
            let keys = v.into_u16_vec().map_err(unreadable(path))?;
            // Header is 4 shorts, then (key, location, count, value) quadruples.
            keys.get(4..)
                .unwrap_or_default()
                .chunks_exact(4)
                .any(|k| k[0] == GT_RASTER_TYPE_GEO_KEY && k[1] == 0 && k[3] == RASTER_PIXEL_IS_POINT)
        }
        None => false,
    };

    let (origin_lon, origin_lat, pw, ph) = if let Some(m) = f64s(dec, Tag::ModelTransformationTag)? {
        if m.len() < 16 {
            return Err(Error::UnsupportedLayout("short ModelTransformation".into()));
        }
        if m[1] != 0.0 || m[4] != 0.0 {
            return Err(Error::UnsupportedLayout("rotated or sheared geotransform".into()));
        }
        (m[3], m[7], m[0], -m[5])
    } else {
        let scale = f64s(dec, Tag::ModelPixelScaleTag)?;
        let tie = f64s(dec, Tag::ModelTiepointTag)?;
        match (scale, tie) {
            (Some(s), Some(t)) if s.len() >= 2 && t.len() >= 6 => {
                if t.len() > 6 {
                    return Err(Error::UnsupportedLayout("multiple tiepoints (non-affine georeference)".into()));
                }
                (t[3] - t[0] * s[0], t[4] + t[1] * s[1], s[0], s[1])
            }
            _ => return Err(Error::MissingGeoreference),
        }
    };
    let (origin_lon, origin_lat) =
        if pixel_is_point { (origin_lon - pw / 2.0, origin_lat + ph / 2.0) } else { (origin_lon, origin_lat) };
    if !(pw > 0.0 && ph > 0.0) {
        return Err(Error::UnsupportedLayout(format!("pixel size {pw} x {ph} is not north-up")));
    }
    GeoTransform::new(origin_lon, origin_lat, pw, ph, cols, rows)
}

/// Writes a 32-bit float, deflate-compressed GeoTIFF (EPSG:4326, pixel-is-area).
pub fn write_geotiff(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_geotiff(grid)?)?;
    Ok(())
}

/// In-memory form of [`write_geotiff`].
pub fn encode_geotiff(grid: &RasterGrid) -> Result<Vec<u8>> {
    let err = |e: tiff::TiffError| Error::Io(std::io::Error::other(e.to_string()));
    let mut buf = Cursor::new(Vec::new());
    let mut enc =
        TiffEncoder::new(&mut buf).map_err(err)?.with_compression(Compression::Deflate(DeflateLevel::Balanced));
    let t = grid.transform();
    let mut image = enc.new_image::<Gray32Float>(t.cols as u32, t.rows as u32).map_err(err)?;
    let dir = image.encoder();
    dir.write_tag(Tag::ModelPixelScaleTag, &[t.pixel_width, t.pixel_height, 0.0][..]).map_err(err)?;
    dir.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, t.origin_lon, t.origin_lat, 0.0][..]).map_err(err)?;
    // GTModelType=geographic, GTRasterType=area, GeographicType=WGS84.
    let keys: [u16; 16] = [1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326];
    dir.write_tag(Tag::GeoKeyDirectoryTag, &keys[..]).map_err(err)?;
    dir.write_tag(Tag::GdalNodata, format!("{}", grid.nodata()).as_str()).map_err(err)?;
    image.write_data(grid.values()).map_err(err)?;
    Ok(buf.into_inner())
}


#[cfg(test)]
mod tests {
    use super::rawtiff::{Layout, RawTiff, Sample, Val};
    use super::*;

    fn write_raw(dir: &tempfile::TempDir, name: &str, raw: &RawTiff) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, raw.build()).unwrap();
        p
    }

    #[test]
    fn reads_self_written_2x2_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let raw = RawTiff::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).georef(10.0, 50.0, 0.5, 0.25);
        let g = read_geotiff(write_raw(&dir, "a.tif", &raw)).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 2));
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
        let t = g.transform();
        assert_eq!((t.origin_lon, t.origin_lat, t.pixel_width, t.pixel_height), (10.0, 50.0, 0.5, 0.25));
        assert_eq!(g.nodata(), f32::MIN);
    }

    #[test]
    fn all_nodata_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut raw = RawTiff::new(3, 2, vec![-9999.0; 6]).georef(0.0, 0.0, 1.0, 1.0);
        raw.tags.push((42113, Val::Ascii("-9999".into())));
        let g = read_geotiff(write_raw(&dir, "nd.tif", &raw)).unwrap();
        assert_eq!(g.valid_count(), 0);
        assert!(g.not_nodata_mask().is_empty());
    }

    #[test]
    fn rotated_transform_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let mut raw = RawTiff::new(2, 2, vec![1.0; 4]);
        #[rustfmt::skip]
        let m = vec![
            0.5, 0.1, 0.0, 10.0,
            0.1, -0.5, 0.0, 50.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        raw.tags.push((34264, Val::Doubles(m)));
        let err = read_geotiff(write_raw(&dir, "rot.tif", &raw)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedLayout(_)), "{err:?}");
    }

    #[test]
    fn axis_aligned_model_transformation() {
        let dir = tempfile::tempdir().unwrap();
        let mut raw = RawTiff::new(2, 1, vec![1.0, 2.0]);
        #[rustfmt::skip]
        let m = vec![
            0.5, 0.0, 0.0, 10.0,
            0.0, -0.25, 0.0, 50.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        raw.tags.push((34264, Val::Doubles(m)));
        let g = read_geotiff(write_raw(&dir, "m.tif", &raw)).unwrap();
        assert_eq!(g.transform().pixel_height, 0.25);
        assert_eq!(g.transform().origin_lat, 50.0);
    }

    #[test]
    fn missing_georeference() {
        let dir = tempfile::tempdir().unwrap();
        let raw = RawTiff::new(2, 2, vec![1.0; 4]);
        let err = read_geotiff(write_raw(&dir, "plain.tif", &raw)).unwrap_err();
        assert!(matches!(err, Error::MissingGeoreference));
    }

    #[test]
    fn unreadable_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.tif");
        std::fs::write(&p, b"not a tiff at all").unwrap();
        assert!(matches!(read_geotiff(&p), Err(Error::UnreadableFile { .. })));
        assert!(matches!(read_geotiff(dir.path().join("absent.tif")), Err(Error::UnreadableFile { .. })));
    }

    #[test]
    fn big_endian_tiled_u16() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (20u32, 18u32);
        let samples: Vec<f64> = (0..w * h).map(|i| (i % 997) as f64).collect();
        let mut raw = RawTiff::new(w, h, samples.clone()).georef(-5.0, 5.0, 0.25, 0.25);
        raw.big_endian = true;
        raw.sample = Sample::U16;
        raw.layout = Layout::Tiles { width: 16, height: 16 };
        let g = read_geotiff(write_raw(&dir, "be.tif", &raw)).unwrap();
        let expect: Vec<f32> = samples.iter().map(|&v| v as f32).collect();
        assert_eq!(g.values(), expect.as_slice());
        // Unsigned default sentinel is 0.
        assert_eq!(g.nodata(), 0.0);
        assert_eq!(g.get(0, 0), None);
        assert_eq!(g.get(1, 0), Some(1.0));
    }

    #[test]
    fn u8_multi_strip_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..35).map(|i| (i * 7 % 256) as f64).collect();
        let mut raw = RawTiff::new(5, 7, samples.clone()).georef(0.0, 10.0, 1.0, 1.0);
        raw.sample = Sample::U8;
        raw.layout = Layout::Strips { rows_per_strip: 2 };
        raw.tags.push((42113, Val::Ascii("255".into())));
        let g = read_geotiff(write_raw(&dir, "u8.tif", &raw)).unwrap();
        assert_eq!(g.values().len(), 35);
        assert_eq!(g.values()[6], 42.0);
        assert_eq!(g.nodata(), 255.0);
    }

    #[test]
    fn pixel_is_point_shifts_origin() {
        let dir = tempfile::tempdir().unwrap();
        let mut raw = RawTiff::new(2, 2, vec![1.0; 4]).georef(10.0, 50.0, 1.0, 1.0);
        raw.tags.push((34735, Val::Shorts(vec![1, 1, 0, 1, 1025, 0, 1, 2])));
        let g = read_geotiff(write_raw(&dir, "pt.tif", &raw)).unwrap();
        assert_eq!(g.transform().origin_lon, 9.5);
        assert_eq!(g.transform().origin_lat, 50.5);
    }

    #[test]
    fn negative_floats_become_nodata() {
        let dir = tempfile::tempdir().unwrap();
        let raw = RawTiff::new(2, 1, vec![-1.5, 3.0]).georef(0.0, 0.0, 1.0, 1.0);
        let g = read_geotiff(write_raw(&dir, "neg.tif", &raw)).unwrap();
        assert_eq!(g.get(0, 0), None);
        assert_eq!(g.get(1, 0), Some(3.0));
    }

    #[test]
    fn write_then_read_is_bit_faithful() {
        let dir = tempfile::tempdir().unwrap();
        let t = GeoTransform::new(-73.9876, 40.9123, 0.004166666666666667, 0.004166666666666667, 7, 5).unwrap();
        let nodata = -3.5e5;
        let g = RasterGrid::from_fn(t, nodata, |c, r| {
            if (c + r) % 5 == 0 {
                nodata
            } else {
                (c as f32 * 1.37 + r as f32 * 0.013).powf(1.7)
            }
        })
        .unwrap();
        let p = dir.path().join("rt.tif");
        write_geotiff(&g, &p).unwrap();
        let back = read_geotiff(&p).unwrap();
        assert_eq!(back.transform(), g.transform());
        assert_eq!(back.nodata().to_bits(), g.nodata().to_bits());
        let bits = |g: &RasterGrid| g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&g));
        assert_eq!(back.not_nodata_mask(), g.not_nodata_mask());
    }
}
