//! Static regret plot: mean curve over a shaded 95% band.
//!
//! The format follows the file extension. SVG carries axis labels and a
//! caption; PNG is drawn without text because raster text needs system
//! fonts that are not guaranteed to exist.

use std::path::{Path, PathBuf};

use mmab_core::AggregateCurve;
use plotters::coord::Shift;
use plotters::prelude::*;
use thiserror::Error;

const SIZE: (u32, u32) = (960, 600);

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot to {0}")]
    Empty(PathBuf),
    #[error("{0}: unsupported plot format (use .svg or .png)")]
    UnsupportedFormat(PathBuf),
    #[error("{path}: {reason}")]
    Draw { path: PathBuf, reason: String },
}

pub fn emit_plot(curve: &AggregateCurve, path: &Path) -> Result<(), PlotError> {
    if curve.points.is_empty() {
        return Err(PlotError::Empty(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let drawn = match ext.as_deref() {
        Some("svg") => draw(SVGBackend::new(path, SIZE).into_drawing_area(), curve, true),
        Some("png") => draw(
            BitMapBackend::new(path, SIZE).into_drawing_area(),
            curve,
            false,
        ),
        _ => return Err(PlotError::UnsupportedFormat(path.to_path_buf())),
    };
    drawn.map_err(|reason| PlotError::Draw {
        path: path.to_path_buf(),
        reason,
    })
}

fn draw<DB: DrawingBackend>(
    root: DrawingArea<DB, Shift>,
    curve: &AggregateCurve,
    labels: bool,
) -> Result<(), String>
where
    DB::ErrorType: 'static,
{
    let e = |err: DrawingAreaErrorKind<DB::ErrorType>| err.to_string();
    root.fill(&WHITE).map_err(e)?;

    let x_max = curve.points.last().map_or(1, |p| p.slot).max(1) as f64;
    let y_top = curve
        .points
        .iter()
        .map(|p| p.upper95().unwrap_or(p.mean))
        .fold(0.0, f64::max);
    let y_max = if y_top > 0.0 { y_top * 1.05 } else { 1.0 };

    let mut builder = ChartBuilder::on(&root);
    builder.margin(20);
    if labels {
        builder
            .caption(
                format!("Cumulative regret ({} runs)", curve.runs),
                ("sans-serif", 22),
            )
            .x_label_area_size(50)
            .y_label_area_size(80);
    }
    let mut chart = builder
        .build_cartesian_2d(0f64..x_max, 0f64..y_max)
        .map_err(e)?;
    if labels {
        chart
            .configure_mesh()
            .x_desc("slot")
            .y_desc("cumulative regret")
            .draw()
            .map_err(e)?;
    }

    if curve.has_interval() {
        let upper = curve
            .points
            .iter()
            .map(|p| (p.slot as f64, p.upper95().unwrap_or(p.mean)));
        let lower = curve
            .points
            .iter()
            .rev()
            .map(|p| (p.slot as f64, p.lower95().unwrap_or(p.mean).max(0.0)));
        chart
            .draw_series(std::iter::once(Polygon::new(
                upper.chain(lower).collect::<Vec<_>>(),
                BLUE.mix(0.2).filled(),
            )))
            .map_err(e)?;
    }
    chart
        .draw_series(LineSeries::new(
            curve.points.iter().map(|p| (p.slot as f64, p.mean)),
            BLUE.stroke_width(2),
        ))
        .map_err(e)?;
    root.present().map_err(e)
}
