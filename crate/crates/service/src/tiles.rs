//! Web-Mercator slippy tiles rendered from lat/lon rasters.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nightpulse_core::raster::RasterGrid;
use nightpulse_core::{Error, Result};

pub const TILE_SIZE: usize = 256;
pub const MAX_ZOOM: u32 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    /// Black through yellow to white.
    #[default]
    Yellow,
    Gray,
}

impl Colormap {
    /// RGB for `t` clamped to `[0, 1]`.
    pub fn rgb(self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        let byte = |x: f64| (x * 255.0).round() as u8;
        match self {
            Colormap::Yellow if t < 0.5 => [byte(2.0 * t), byte(2.0 * t), 0],
            Colormap::Yellow => [255, 255, byte(2.0 * t - 1.0)],
            Colormap::Gray => [byte(t); 3],
        }
    }
}

impl FromStr for Colormap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yellow" => Ok(Colormap::Yellow),
            "gray" | "grey" => Ok(Colormap::Gray),
            other => Err(Error::InvalidParameter(format!("unknown colormap {other:?}"))),
        }
    }
}

impl fmt::Display for Colormap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Colormap::Yellow => "yellow",
            Colormap::Gray => "gray",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileId {
    pub z: u32,
    pub x: u32,
    pub y: u32,
}

impl TileId {
    pub fn new(z: u32, x: u32, y: u32) -> Result<Self> {
        if z > MAX_ZOOM {
            return Err(Error::InvalidParameter(format!("zoom {z} exceeds {MAX_ZOOM}")));
        }
        let n = 1u64 << z;
        if u64::from(x) >= n || u64::from(y) >= n {
            return Err(Error::InvalidParameter(format!("tile {x}/{y} outside zoom {z}")));
        }
        Ok(TileId { z, x, y })
    }

    /// Geographic position of fractional tile pixel `(px, py)`.
    pub fn pixel_lonlat(&self, px: f64, py: f64) -> (f64, f64) {
        let n = (1u64 << self.z) as f64;
        let fx = (f64::from(self.x) + px / TILE_SIZE as f64) / n;
        let fy = (f64::from(self.y) + py / TILE_SIZE as f64) / n;
        let lon = fx * 360.0 - 180.0;
        let lat = (PI * (1.0 - 2.0 * fy)).sinh().atan().to_degrees();
        (lon, lat)
    }
}

/// RGBA pixels of one tile; nearest-neighbour sampling, transparent where
/// the raster is nodata, absent or outside `[lo, hi]`.
pub fn render_rgba(grid: &RasterGrid, tile: TileId, lo: f64, hi: f64, cmap: Colormap) -> Result<Vec<u8>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange { lo, hi });
    }
    let mut rgba = vec![0u8; TILE_SIZE * TILE_SIZE * 4];
    let t = grid.transform();
    for py in 0..TILE_SIZE {
        let (_, lat) = tile.pixel_lonlat(0.0, py as f64 + 0.5);
        for px in 0..TILE_SIZE {
            let (lon, _) = tile.pixel_lonlat(px as f64 + 0.5, 0.0);
            let Some((c, r)) = t.cell_containing(lon, lat) else { continue };
            let Some(v) = grid.get(c, r) else { continue };
            let v = f64::from(v);
            if v < lo || v > hi {
                continue;
            }
            let [red, green, blue] = cmap.rgb((v - lo) / (hi - lo));
            let i = (py * TILE_SIZE + px) * 4;
            rgba[i..i + 4].copy_from_slice(&[red, green, blue, 255]);
        }
    }
    Ok(rgba)
}

pub fn encode_png(rgba: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, TILE_SIZE as u32, TILE_SIZE as u32);
    enc.set_color(png::ColorType::Rgba);
    enc.set_depth(png::BitDepth::Eight);
    let io = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut w = enc.write_header().map_err(io)?;
    w.write_image_data(rgba).map_err(io)?;
    w.finish().map_err(io)?;
    Ok(out)
}

pub fn render_tile(grid: &RasterGrid, tile: TileId, lo: f64, hi: f64, cmap: Colormap) -> Result<Vec<u8>> {
    encode_png(&render_rgba(grid, tile, lo, hi, cmap)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nightpulse_core::raster::GeoTransform;

    #[test]
    fn tile_corners() {
        let t = TileId::new(0, 0, 0).unwrap();
        let (lon, lat) = t.pixel_lonlat(0.0, 0.0);
        assert_eq!(lon, -180.0);
        assert!((lat - 85.051_128_78).abs() < 1e-6);
        let (lon, lat) = t.pixel_lonlat(128.0, 128.0);
        assert!(lon.abs() < 1e-12 && lat.abs() < 1e-12);
        assert!(TileId::new(2, 4, 0).is_err());
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(Colormap::Yellow.rgb(0.0), [0, 0, 0]);
        assert_eq!(Colormap::Yellow.rgb(0.5), [255, 255, 0]);
        assert_eq!(Colormap::Yellow.rgb(1.0), [255, 255, 255]);
        assert_eq!(Colormap::Gray.rgb(2.0), [255, 255, 255]);
    }

    #[test]
    fn world_tile_paints_only_the_raster() {
        let g =
            RasterGrid::from_fn(GeoTransform::new(-10.0, 10.0, 1.0, 1.0, 20, 20).unwrap(), -1.0, |_, _| 30.0).unwrap();
        let rgba = render_rgba(&g, TileId::new(0, 0, 0).unwrap(), 0.0, 60.0, Colormap::Yellow).unwrap();
        let center = (128 * TILE_SIZE + 128) * 4;
        assert_eq!(&rgba[center..center + 4], &[255, 255, 0, 255]);
        assert_eq!(rgba[3], 0);
        let out = render_rgba(&g, TileId::new(0, 0, 0).unwrap(), 40.0, 60.0, Colormap::Yellow).unwrap();
        assert!(out.chunks(4).all(|p| p[3] == 0));
    }
}
