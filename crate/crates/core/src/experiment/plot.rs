use std::path::Path;

use plotters::prelude::*;

use super::summary::{Split, Summary};
use crate::model::Variant;
use crate::{Error, Result};

fn color(v: Variant) -> RGBColor {
    match v {
        Variant::Embodied => RGBColor(31, 90, 200),
        Variant::InceptionLike => RGBColor(210, 40, 40),
        Variant::Baseline => RGBColor(230, 175, 0),
    }
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

/// Mean accuracy per epoch of every model at one training size, as SVG.
/// Embodied is blue, inception-like red, baseline yellow.
pub fn plot_curves(summary: &Summary, size: usize, split: Split, path: &Path) -> Result<()> {
    let epochs = summary.config.epochs;
    let series: Vec<(Variant, Vec<(f64, f64)>)> = summary
        .config
        .models
        .iter()
        .map(|&m| {
            let pts = summary
                .curve(size, m)
                .iter()
                .map(|c| (c.epoch as f64, if split == Split::Whole { c.whole.mean } else { c.test.mean }))
                .collect();
            (m, pts)
        })
        .collect();
    let lo = series.iter().flat_map(|(_, p)| p.iter().map(|&(_, y)| y)).fold(1.0, f64::min);
    let y_min = ((lo - 0.02) * 20.0).floor().max(0.0) / 20.0;

    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let title = match split {
        Split::Whole => format!("Whole database, {size} training examples"),
        Split::Test => format!("Test set, {size} training examples"),
    };
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(1.0..(epochs.max(2) as f64), y_min..1.0)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("epoch").y_desc("accuracy").draw().map_err(plot_err)?;
    for (m, pts) in series {
        let c = color(m);
        chart
            .draw_series(LineSeries::new(pts, c.stroke_width(2)))
            .map_err(plot_err)?
            .label(m.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
