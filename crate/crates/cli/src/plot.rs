//! Static SVG views of result tables. Rendering happens in memory so a failure leaves no file.

use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// Net power over two axes; non-positive or failed cells are masked white.
    Heatmap,
    /// Grouped per-site bars by ring size.
    Bars,
    Histogram,
}

const HIST_BINS: usize = 30;

fn pe<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

fn required(col: &[Option<f64>], name: &str) -> Result<Vec<f64>, CliError> {
    col.iter().map(|x| x.ok_or_else(|| CliError::Plot(format!("column `{name}` has empty cells")))).collect()
}

struct Cells {
    x_name: &'static str,
    y_name: &'static str,
    panel: Option<&'static str>,
}

fn heatmap_layout(t: &Table) -> Result<Cells, CliError> {
    let has = |c: &str| t.header.iter().any(|h| h == c);
    if has("suppression") && has("gamma_r") {
        Ok(Cells { x_name: "gamma_r", y_name: "suppression", panel: None })
    } else if has("tau_l") && has("r_nn") && has("t_vib") {
        Ok(Cells { x_name: "r_nn", y_name: "tau_l", panel: Some("t_vib") })
    } else if has("theta_eq") && has("theta_zen") {
        Ok(Cells { x_name: "theta_eq", y_name: "theta_zen", panel: None })
    } else {
        Err(CliError::Plot("heatmap needs grid, phase-map or angle columns".into()))
    }
}

fn heatmap(t: &Table, buf: &mut String) -> Result<(), CliError> {
    let layout = heatmap_layout(t)?;
    let xs = required(&t.numbers(layout.x_name)?, layout.x_name)?;
    let ys = required(&t.numbers(layout.y_name)?, layout.y_name)?;
    let zs = t.numbers("p_net")?;
    let panels = match layout.panel {
        Some(p) => required(&t.numbers(p)?, p)?,
        None => vec![0.0; xs.len()],
    };
    let (ux, uy, up) = (sorted_unique(&xs), sorted_unique(&ys), sorted_unique(&panels));
    let zmax = zs.iter().flatten().copied().filter(|z| *z > 0.0).fold(0.0, f64::max);

    let width = 420 * up.len() as u32 + 80;
    let root = SVGBackend::with_string(buf, (width, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(pe)?;
    let root = root.titled("net power (white: non-positive or failed)", ("sans-serif", 16)).map_err(pe)?;
    for (area, &pv) in root.split_evenly((1, up.len())).iter().zip(&up) {
        let caption = layout.panel.map(|p| format!("{p} = {pv}")).unwrap_or_default();
        let mut chart = ChartBuilder::on(area)
            .caption(caption, ("sans-serif", 14))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(-0.5..ux.len() as f64 - 0.5, -0.5..uy.len() as f64 - 0.5)
            .map_err(pe)?;
        let label = |vals: &[f64], v: f64| {
            let i = v.round();
            if (v - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < vals.len() { format!("{:.3e}", vals[i as usize]) } else { String::new() }
        };
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc(layout.x_name)
            .y_desc(layout.y_name)
            .x_labels(ux.len().max(2))
            .y_labels(uy.len().max(2))
            .x_label_formatter(&|v| label(&ux, *v))
            .y_label_formatter(&|v| label(&uy, *v))
            .draw()
            .map_err(pe)?;
        let mut rects = Vec::new();
        for k in (0..xs.len()).filter(|&k| panels[k] == pv) {
            let i = ux.iter().position(|&v| v == xs[k]).unwrap_or(0) as f64;
            let j = uy.iter().position(|&v| v == ys[k]).unwrap_or(0) as f64;
            let corners = [(i - 0.5, j - 0.5), (i + 0.5, j + 0.5)];
            match zs[k] {
                Some(z) if z > 0.0 => {
                    let c = ViridisRGB.get_color((z / zmax) as f32);
                    rects.push(Rectangle::new(corners, c.filled()));
                }
                _ => {
                    rects.push(Rectangle::new(corners, WHITE.filled()));
                    rects.push(Rectangle::new(corners, BLACK.mix(0.3).stroke_width(1)));
                }
            }
        }
        chart.draw_series(rects).map_err(pe)?;
    }
    root.present().map_err(pe)
}

fn bar_series(t: &Table) -> Result<(&'static str, Vec<&'static str>), CliError> {
    let has = |c: &str| t.header.iter().any(|h| h == c);
    if has("p_net_per_site") {
        Ok(("power per site (W)", vec!["p_in_per_site", "p_out_per_site", "p_net_per_site"]))
    } else if has("guide_slide_per_site") {
        Ok((
            "target strength per site",
            vec!["guide_slide_per_site", "parallel_per_site", "dicke_per_site", "independent_per_site"],
        ))
    } else {
        Err(CliError::Plot("bars need scaling power or strength columns".into()))
    }
}

fn bars(t: &Table, buf: &mut String) -> Result<(), CliError> {
    let (ylabel, series) = bar_series(t)?;
    let ns = t.numbers("n_sites")?;
    let cols = series.iter().map(|s| t.numbers(s)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<usize> = (0..ns.len()).filter(|&r| ns[r].is_some() && cols.iter().all(|c| c[r].is_some())).collect();
    if rows.is_empty() {
        return Err(CliError::EmptyResult("no complete rows to plot".into()));
    }
    let vals: Vec<f64> = rows.iter().flat_map(|&r| cols.iter().map(move |c| c[r].unwrap_or(0.0))).collect();
    let lo = vals.iter().copied().fold(0.0, f64::min);
    let hi = vals.iter().copied().fold(0.0, f64::max);
    let pad = ((hi - lo) * 0.1).max(f64::MIN_POSITIVE);

    let root = SVGBackend::with_string(buf, (720, 440)).into_drawing_area();
    root.fill(&WHITE).map_err(pe)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d(-0.5..rows.len() as f64 - 0.5, (lo - pad)..(hi + pad))
        .map_err(pe)?;
    let label = |v: f64| {
        let i = v.round();
        if (v - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < rows.len() { format!("N = {}", ns[rows[i as usize]].unwrap_or(0.0)) } else { String::new() }
    };
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(rows.len().max(2))
        .x_label_formatter(&|v| label(*v))
        .y_label_formatter(&|v| format!("{v:.2e}"))
        .y_desc(ylabel)
        .draw()
        .map_err(pe)?;
    let w = 0.8 / series.len() as f64;
    for (s, name) in series.iter().enumerate() {
        let color = Palette99::pick(s).to_rgba();
        let col = &cols[s];
        let rects = rows.iter().enumerate().map(|(g, &r)| {
            let x0 = g as f64 - 0.4 + w * s as f64;
            Rectangle::new([(x0, 0.0), (x0 + w, col[r].unwrap_or(0.0))], color.filled())
        });
        chart
            .draw_series(rects)
            .map_err(pe)?
            .label(*name)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(pe)?;
    root.present().map_err(pe)
}

/// Bins from a `lo,hi,weight` table, or binned values of `column`.
fn hist_bins(t: &Table, column: Option<&str>) -> Result<(Vec<(f64, f64, f64)>, String), CliError> {
    let has = |c: &str| t.header.iter().any(|h| h == c);
    if column.is_none() && has("lo") && has("hi") && has("weight") {
        let (lo, hi, w) = (required(&t.numbers("lo")?, "lo")?, required(&t.numbers("hi")?, "hi")?, required(&t.numbers("weight")?, "weight")?);
        return Ok(((0..lo.len()).map(|k| (lo[k], hi[k], w[k])).collect(), "weight".into()));
    }
    let name = column.ok_or_else(|| CliError::Plot("histogram needs lo/hi/weight columns or --column".into()))?;
    let values: Vec<f64> = t.numbers(name)?.into_iter().flatten().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Ok((Vec::new(), name.into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.0 } else { lo.abs().max(1.0) * 1e-3 };
    let h = superabsorb::experiments::histogram(&values, None, HIST_BINS, lo - pad, hi + pad)?;
    Ok(((0..HIST_BINS).map(|k| (h.edges[k], h.edges[k + 1], h.counts[k])).collect(), name.into()))
}

fn hist(t: &Table, column: Option<&str>, buf: &mut String) -> Result<(), CliError> {
    let (bins, xlabel) = hist_bins(t, column)?;
    if bins.is_empty() {
        return Err(CliError::EmptyResult("no values to bin".into()));
    }
    let x0 = bins.first().map_or(0.0, |b| b.0);
    let x1 = bins.last().map_or(1.0, |b| b.1);
    let ymax = bins.iter().map(|b| b.2).fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.1;

    let root = SVGBackend::with_string(buf, (720, 440)).into_drawing_area();
    root.fill(&WHITE).map_err(pe)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, 0.0..ymax)
        .map_err(pe)?;
    chart
        .configure_mesh()
        .x_desc(xlabel)
        .x_label_formatter(&|v| format!("{v:.4}"))
        .y_label_formatter(&|v| format!("{v:.2e}"))
        .draw()
        .map_err(pe)?;
    chart.draw_series(bins.iter().map(|&(a, b, w)| Rectangle::new([(a, 0.0), (b, w)], BLUE.mix(0.6).filled()))).map_err(pe)?;
    root.present().map_err(pe)
}

/// Renders `table` to an SVG document.
pub fn render(table: &Table, kind: PlotKind, column: Option<&str>) -> Result<String, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::EmptyResult("result table has no rows".into()));
    }
    let mut buf = String::new();
    match kind {
        PlotKind::Heatmap => heatmap(table, &mut buf)?,
        PlotKind::Bars => bars(table, &mut buf)?,
        PlotKind::Histogram => hist(table, column, &mut buf)?,
    }
    Ok(buf)
}

pub fn emit_plot(input: &Path, kind: PlotKind, output: &Path, column: Option<&str>) -> Result<(), CliError> {
    let svg = render(&Table::read(input)?, kind, column)?;
    std::fs::write(output, svg).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> Table {
        let mut t = Table::new(header);
        for r in rows {
            t.push(r.iter().map(|s| s.to_string()).collect());
        }
        t
    }

    #[test]
    fn heatmap_masks_non_positive_cells() {
        let t = table(
            &["suppression", "gamma_r", "p_net"],
            &[&["0.5", "1e-2", "-1e-12"], &["0.99", "1e-2", "2e-12"], &["0.99", "1e-4", ""]],
        );
        let svg = render(&t, PlotKind::Heatmap, None).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.matches("fill=\"#FFFFFF\"").count() >= 3, "masked cells are white");
    }

    #[test]
    fn bars_and_histograms_render() {
        let t = table(
            &["n_sites", "p_in_per_site", "p_out_per_site", "p_net_per_site"],
            &[&["4", "1e-12", "3e-12", "2e-12"], &["5", "1e-12", "3.5e-12", "2.5e-12"]],
        );
        assert!(render(&t, PlotKind::Bars, None).unwrap().contains("p_net_per_site"));
        let h = table(&["lo", "hi", "weight"], &[&["0", "1", "2"], &["1", "2", "5"]]);
        assert!(render(&h, PlotKind::Histogram, None).is_ok());
        let v = table(&["trial", "x"], &[&["0", "1.5"], &["1", "1.5"]]);
        assert!(render(&v, PlotKind::Histogram, Some("x")).is_ok());
    }

    #[test]
    fn empty_and_mismatched_inputs_fail_without_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("empty.csv");
        std::fs::write(&input, "n_sites,p_in_per_site,p_out_per_site,p_net_per_site\n").unwrap();
        let out = dir.path().join("o.svg");
        assert!(matches!(emit_plot(&input, PlotKind::Bars, &out, None), Err(CliError::EmptyResult(_))));
        assert!(!out.exists());
        let t = table(&["a"], &[&["1"]]);
        assert!(matches!(render(&t, PlotKind::Heatmap, None), Err(CliError::Plot(_))));
        let failed = table(&["n_sites", "p_in_per_site", "p_out_per_site", "p_net_per_site"], &[&["4", "", "", ""]]);
        assert!(matches!(render(&failed, PlotKind::Bars, None), Err(CliError::EmptyResult(_))));
    }
}
