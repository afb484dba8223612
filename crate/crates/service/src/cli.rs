//! `nightpulse` command line.
//!
//! Analytics subcommands print the same JSON body the HTTP API returns.
//! With `--out`, the stored product is also written in the format implied
//! by the file extension.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nightpulse_core::catalog::{Catalog, RegionSelection, YearMonth};
use nightpulse_core::export::ExportFormat;
use nightpulse_core::morphology::StructuringElement;
use nightpulse_core::raster::BBox;
use nightpulse_core::stcluster::{FeatureMode, FeatureParams};
use nightpulse_core::{Error, Result};

use crate::api::{serve, AppState};
use crate::config::ApiConfig;
use crate::ops::{
    ClusterRequest, CompareRequest, ContourRequest, Engine, GeocodeQuery, Period, PipetteQuery, SceneRequest,
    SegmentRequest, SprawlRequest,
};

#[derive(Debug, Parser)]
#[command(name = "nightpulse", version, about = "Night-time light raster analytics")]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Catalog directory; overrides the config file and the environment.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_bbox(s: &str) -> Result<BBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter(format!("bbox {s:?} is not four numbers")))?;
    match v[..] {
        [a, b, c, d] => BBox::new(a, b, c, d),
        _ => Err(Error::InvalidParameter(format!("bbox {s:?} needs min_lon,min_lat,max_lon,max_lat"))),
    }
}

fn parse_se(s: &str) -> Result<StructuringElement> {
    StructuringElement::from_rows(&s.split(',').collect::<Vec<_>>())
}

#[derive(Debug, Clone, Args)]
pub struct BoxArg {
    /// min_lon,min_lat,max_lon,max_lat
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bbox)]
    pub bbox: BBox,
}

#[derive(Debug, Clone, Args)]
pub struct OutArg {
    /// Also write the product; format follows the extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Copy a GeoTIFF into the catalog.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        time: YearMonth,
    },
    /// List catalog scenes.
    Scenes,
    /// Monthly mean radiance over a region.
    Trend {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        from: YearMonth,
        #[arg(long)]
        to: YearMonth,
        #[command(flatten)]
        out: OutArg,
    },
    /// Percent change between two periods.
    Compare {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        a_from: YearMonth,
        #[arg(long)]
        a_to: YearMonth,
        #[arg(long)]
        b_from: YearMonth,
        #[arg(long)]
        b_to: YearMonth,
        #[command(flatten)]
        out: OutArg,
    },
    /// Brightest and darkest pixels of one scene.
    Extrema {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        time: YearMonth,
    },
    /// Pixels inside a value range.
    Segment {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        time: YearMonth,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
    },
    /// Value under a point.
    Pipette {
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long)]
        time: YearMonth,
    },
    /// Iso-radiance contours of one scene.
    Contour {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        time: YearMonth,
        /// Comma-separated levels.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Spatio-temporal DBSCAN over a region and period.
    Cluster {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        from: YearMonth,
        #[arg(long)]
        to: YearMonth,
        #[arg(long, allow_hyphen_values = true)]
        t_filter: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        min_pts: usize,
        #[arg(long, default_value_t = 1.0)]
        w1: f64,
        #[arg(long, default_value_t = 1.0)]
        w2: f64,
        /// `spatial` or `literal`.
        #[arg(long, default_value = "spatial", value_parser = parse_mode)]
        mode: FeatureMode,
        #[command(flatten)]
        out: OutArg,
    },
    /// Shrink, merge, expand and split regions between two scenes.
    Sprawl {
        #[command(flatten)]
        bbox: BoxArg,
        #[arg(long)]
        t1: YearMonth,
        #[arg(long)]
        t2: YearMonth,
        #[arg(long, allow_hyphen_values = true)]
        threshold: f64,
        /// Structuring element rows, e.g. `010,111,010`.
        #[arg(long, value_parser = parse_se)]
        se: Option<StructuringElement>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Administrative name for a point.
    Geocode {
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long)]
        zoom: u32,
    },
    /// Write a stored product.
    Export {
        product_id: String,
        #[arg(long)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
}

fn parse_mode(s: &str) -> Result<FeatureMode> {
    match s {
        "spatial" => Ok(FeatureMode::Spatial),
        "literal" => Ok(FeatureMode::Literal),
        other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
    }
}

fn print(body: &[u8]) {
    println!("{}", String::from_utf8_lossy(body));
}

/// Prints `body` and writes its product to `out` if requested.
fn emit(engine: &Engine, body: Vec<u8>, out: &OutArg) -> Result<()> {
    print(&body);
    if let Some(path) = &out.out {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        let format: ExportFormat = ext.parse()?;
        write_product(engine, &body, format, path)?;
    }
    Ok(())
}

fn write_product(engine: &Engine, body: &[u8], format: ExportFormat, path: &Path) -> Result<()> {
    let v: serde_json::Value = serde_json::from_slice(body).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let id = v["product_id"].as_str().ok_or_else(|| Error::InvalidParameter("result has no product".into()))?;
    std::fs::write(path, engine.export(id, format)?)?;
    Ok(())
}

/// Executes one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = ApiConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.data_dir {
        cfg.data_dir = dir;
    }
    match cli.command {
        Command::Ingest { file, time } => {
            let scene = Catalog::open(&cfg.data_dir)?.ingest(&file, time)?;
            print(&serde_json::to_vec(&scene).expect("scene serializes"));
            return Ok(());
        }
        Command::Serve { bind } => {
            if !cfg.data_dir.is_dir() {
                return Err(Error::NotFound(format!("data directory {}", cfg.data_dir.display())));
            }
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let state = AppState::new(Engine::open(&cfg)?, cfg);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state))?;
            return Ok(());
        }
        _ => {}
    }
    let engine = Engine::open(&cfg)?;
    match cli.command {
        Command::Scenes => print(&engine.scenes()?),
        Command::Trend { bbox, from, to, out } => {
            emit(&engine, engine.trend(&RegionSelection::new(bbox.bbox, from, to)?)?, &out)?
        }
        Command::Compare { bbox, a_from, a_to, b_from, b_to, out } => {
            let req = CompareRequest {
                bbox: bbox.bbox,
                period_a: Period { from: a_from, to: a_to },
                period_b: Period { from: b_from, to: b_to },
            };
            emit(&engine, engine.compare(&req)?, &out)?
        }
        Command::Extrema { bbox, time } => print(&engine.extrema(&SceneRequest { bbox: bbox.bbox, time })?),
        Command::Segment { bbox, time, lo, hi } => {
            print(&engine.segment(&SegmentRequest { bbox: bbox.bbox, time, lo, hi })?)
        }
        Command::Pipette { lon, lat, time } => {
            print(&engine.pipette(&PipetteQuery { lon, lat, year: time.year, month: time.month })?)
        }
        Command::Contour { bbox, time, levels, out } => {
            emit(&engine, engine.contours(&ContourRequest { bbox: bbox.bbox, time, levels })?, &out)?
        }
        Command::Cluster { bbox, from, to, t_filter, eps, min_pts, w1, w2, mode, out } => {
            let req = ClusterRequest {
                region: RegionSelection::new(bbox.bbox, from, to)?,
                params: FeatureParams { t_filter, w1, w2, eps, min_pts, mode },
            };
            emit(&engine, engine.cluster(&req)?, &out)?
        }
        Command::Sprawl { bbox, t1, t2, threshold, se, out } => {
            let req = SprawlRequest { bbox: bbox.bbox, t1, t2, threshold, se: se.unwrap_or_default() };
            emit(&engine, engine.sprawl(&req)?, &out)?
        }
        Command::Geocode { lon, lat, zoom } => print(&engine.geocode(&GeocodeQuery { lon, lat, zoom })?),
        Command::Export { product_id, format, out } => std::fs::write(out, engine.export(&product_id, format)?)?,
        Command::Ingest { .. } | Command::Serve { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_precondition() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_negative_bbox_and_levels() {
        let cli = Cli::try_parse_from([
            "nightpulse",
            "contour",
            "--bbox",
            "-74.3,40.3,-73.7,40.95",
            "--time",
            "2015-03",
            "--levels",
            "10,20.5",
        ])
        .unwrap();
        let Command::Contour { bbox, time, levels, .. } = cli.command else { panic!("wrong command") };
        assert_eq!(bbox.bbox, BBox::new(-74.3, 40.3, -73.7, 40.95).unwrap());
        assert_eq!(time, YearMonth::new(2015, 3).unwrap());
        assert_eq!(levels, Some(vec![10.0, 20.5]));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Cli::try_parse_from([
            "nightpulse",
            "trend",
            "--bbox",
            "1,2,3",
            "--from",
            "2015-01",
            "--to",
            "2015-02"
        ])
        .is_err());
        assert!(Cli::try_parse_from([
            "nightpulse",
            "sprawl",
            "--bbox",
            "0,0,1,1",
            "--t1",
            "2015-01",
            "--t2",
            "2015-02",
            "--threshold",
            "5",
            "--se",
            "11,1"
        ])
        .is_err());
        assert!(parse_mode("both").is_err());
    }
}
