//! Static SVG rendering of shuffle-test record series.

use std::path::Path;

use anyhow::Result;
use plotters::prelude::*;

use agtr_core::shuffle::ShuffleRecord;

/// Renders both bound series against the shuffle fraction as an SVG chart.
pub fn render_records(records: &[ShuffleRecord], path: &Path) -> Result<()> {
    let path_str = path.display().to_string();
    let root = SVGBackend::new(&path_str, (900, 560)).into_drawing_area();
    root.fill(&WHITE)?;

    let mut chart = ChartBuilder::on(&root)
        .caption("Metric bounds vs shuffle fraction", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(52)
        .build_cartesian_2d(0.0..1.0f64, 0.0..1.0f64)?;
    chart
        .configure_mesh()
        .x_desc("fraction of samples shuffled")
        .y_desc("bound value")
        .draw()?;

    chart
        .draw_series(LineSeries::new(
            records
                .iter()
                .map(|r| (r.shuffle_fraction, r.precision_lower_bound)),
            &BLUE,
        ))?
        .label("precision lower bound")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE));
    chart
        .draw_series(LineSeries::new(
            records
                .iter()
                .map(|r| (r.shuffle_fraction, r.recall_upper_bound)),
            &RED,
        ))?
        .label("recall upper bound")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));

    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
