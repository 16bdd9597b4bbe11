//! Budget-curve plots as self-contained SVG documents.

use albench_core::error::{AlError, Result};
use albench_core::metrics::{summarize_trials, BudgetCurve};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 560.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 455.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Render one budget plot: a polyline per method (mean accuracy across
/// trials at each labeled count) plus a legend labeled
/// `name (mean ± std)` of the per-trial AUBC values. All curves must
/// share one labeled-count grid.
pub fn emit_budget_svg(methods: &[(String, Vec<BudgetCurve>)]) -> Result<String> {
    if methods.is_empty() {
        return Err(AlError::Config("no methods to plot".into()));
    }
    for (name, trials) in methods {
        if trials.is_empty() {
            return Err(AlError::Config(format!("method `{name}` has no trials")));
        }
    }
    let grid: Vec<usize> = methods[0].1[0].points.iter().map(|p| p.0).collect();
    for (name, trials) in methods {
        for c in trials {
            let g: Vec<usize> = c.points.iter().map(|p| p.0).collect();
            if g != grid {
                return Err(AlError::Config(format!(
                    "method `{name}` uses a different labeled-count grid"
                )));
            }
        }
    }

    let x_min = grid[0] as f64;
    let x_max = *grid.last().expect("non-empty grid") as f64;
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: f64| LEFT + (x - x_min) / span * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - y.clamp(0.0, 1.0) * (BOTTOM - TOP);

    let mut s = String::new();
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += &format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";

    // Axes and ticks.
    s += &format!(
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\" stroke-width=\"1\"/>\n"
    );
    s += &format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\" stroke-width=\"1\"/>\n"
    );
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        let y = py(v);
        s += &format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            LEFT - 5.0
        );
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{v:.2}</text>\n",
            LEFT - 8.0,
            y + 4.0
        );
    }
    let tick_idx: Vec<usize> = if grid.len() <= 8 {
        (0..grid.len()).collect()
    } else {
        (0..8).map(|i| i * (grid.len() - 1) / 7).collect()
    };
    for &i in &tick_idx {
        let x = px(grid[i] as f64);
        s += &format!(
            "<line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            BOTTOM + 5.0
        );
        s += &format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            BOTTOM + 18.0,
            grid[i]
        );
    }
    s += &format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">labeled examples</text>\n",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 38.0
    );
    s += &format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">test accuracy</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    // One polyline per method, plus the legend entry.
    for (m, (name, trials)) in methods.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let summary = summarize_trials(trials)?;
        let mut mean_curve = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let mut acc = 0.0;
            for c in trials {
                acc += c.points[j].1;
            }
            mean_curve.push(acc / trials.len() as f64);
        }
        let pts: Vec<String> = grid
            .iter()
            .zip(&mean_curve)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x as f64), py(y)))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        );
        for (&x, &y) in grid.iter().zip(&mean_curve) {
            s += &format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                px(x as f64),
                py(y)
            );
        }
        let ly = TOP + 14.0 + m as f64 * 18.0;
        s += &format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            RIGHT + 14.0,
            RIGHT + 38.0
        );
        s += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{} ({:.4} \u{b1} {:.4})</text>\n",
            RIGHT + 44.0,
            ly + 4.0,
            escape_xml(name),
            summary.mean_aubc,
            summary.std_aubc
        );
    }
    s += "</svg>\n";
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pts: &[(usize, f64)]) -> BudgetCurve {
        BudgetCurve::new(pts.to_vec()).unwrap()
    }

    #[test]
    fn legend_reports_mean_and_std_to_four_places() {
        // Two flat trials at 0.5 and 0.7: AUBC mean 0.6, population std 0.1.
        let trials = vec![
            curve(&[(10, 0.5), (20, 0.5), (30, 0.5)]),
            curve(&[(10, 0.7), (20, 0.7), (30, 0.7)]),
        ];
        let svg = emit_budget_svg(&[("demo".into(), trials)]).unwrap();
        assert!(svg.contains("demo (0.6000 \u{b1} 0.1000)"), "{svg}");
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn one_polyline_per_method() {
        let a = vec![curve(&[(5, 0.4), (10, 0.6)])];
        let b = vec![curve(&[(5, 0.5), (10, 0.7)])];
        let c = vec![curve(&[(5, 0.2), (10, 0.9)])];
        let svg = emit_budget_svg(&[
            ("alpha".into(), a),
            ("beta".into(), b),
            ("gamma".into(), c),
        ])
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("alpha ("));
        assert!(svg.contains("beta ("));
        assert!(svg.contains("gamma ("));
    }

    #[test]
    fn output_is_well_formed_xml() {
        let trials = vec![curve(&[(5, 0.4), (10, 0.6), (15, 0.8)])];
        let svg = emit_budget_svg(&[("a<b&\"c\">".into(), trials)]).unwrap();
        roxmltree::Document::parse(&svg).expect("well-formed XML");
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = vec![curve(&[(5, 0.4), (10, 0.6)])];
        let b = vec![curve(&[(5, 0.5), (12, 0.7)])];
        let err = emit_budget_svg(&[("alpha".into(), a), ("beta".into(), b)]).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn single_point_curves_render() {
        let trials = vec![curve(&[(10, 0.5)])];
        let svg = emit_budget_svg(&[("zero-budget".into(), trials)]).unwrap();
        roxmltree::Document::parse(&svg).expect("well-formed XML");
        assert!(svg.contains("<circle"));
    }
}
