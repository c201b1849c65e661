//! Static SVG emission: log-log error plots and space-time heat maps.
//! Output is plain text with fixed formatting so identical inputs produce
//! byte-identical files.

use std::io::{self, Write};

use pide_core::gridops::{extend_eval, GridFunction};
use pide_core::ode::Trajectory;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

fn svg_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(
        w,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    )
}

fn text<W: Write>(
    w: &mut W,
    x: f64,
    y: f64,
    anchor: &str,
    size: u32,
    content: &str,
    extra: &str,
) -> io::Result<()> {
    writeln!(
        w,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"{size}\" \
         text-anchor=\"{anchor}\"{extra}>{content}</text>"
    )
}

/// Log-log scatter-with-line plot of `(xs, ys)`; every x value gets a tick,
/// y ticks sit on decades.
pub fn write_loglog_svg<W: Write>(
    mut w: W,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[usize],
    ys: &[f64],
) -> io::Result<()> {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.iter().all(|&x| x > 0) && ys.iter().all(|&y| y > 0.0));
    let lx: Vec<f64> = xs.iter().map(|&x| (x as f64).log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.log10()).collect();
    let (x_lo, x_hi) = bounds(&lx, 0.04);
    let (y_lo, y_hi) = bounds(&ly, 0.08);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |v: f64| MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    svg_header(&mut w)?;
    text(&mut w, WIDTH / 2.0, 22.0, "middle", 14, title, "")?;
    writeln!(
        w,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"black\"/>"
    )?;

    for (&x, &v) in xs.iter().zip(lx.iter()) {
        let sx = px(v);
        writeln!(
            w,
            "<line x1=\"{sx:.2}\" y1=\"{:.2}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        )?;
        text(
            &mut w,
            sx,
            MARGIN_TOP + plot_h + 18.0,
            "middle",
            11,
            &x.to_string(),
            "",
        )?;
    }
    let mut decade = y_lo.floor() as i64;
    while (decade as f64) <= y_hi {
        if (decade as f64) >= y_lo {
            let sy = py(decade as f64);
            writeln!(
                w,
                "<line x1=\"{:.2}\" y1=\"{sy:.2}\" x2=\"{MARGIN_LEFT}\" y2=\"{sy:.2}\" \
                 stroke=\"black\"/>",
                MARGIN_LEFT - 5.0
            )?;
            text(
                &mut w,
                MARGIN_LEFT - 8.0,
                sy + 4.0,
                "end",
                11,
                &format!("1e{decade}"),
                "",
            )?;
        }
        decade += 1;
    }
    text(
        &mut w,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        "middle",
        12,
        xlabel,
        "",
    )?;
    text(
        &mut w,
        16.0,
        MARGIN_TOP + plot_h / 2.0,
        "middle",
        12,
        ylabel,
        &format!(
            " transform=\"rotate(-90 16 {:.1})\"",
            MARGIN_TOP + plot_h / 2.0
        ),
    )?;

    let points: Vec<String> = lx
        .iter()
        .zip(ly.iter())
        .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
        .collect();
    writeln!(
        w,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"/>",
        points.join(" ")
    )?;
    for (&a, &b) in lx.iter().zip(ly.iter()) {
        writeln!(
            w,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f5fa8\"/>",
            px(a),
            py(b)
        )?;
    }
    writeln!(w, "</svg>")
}

fn bounds(values: &[f64], pad_frac: f64) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    (lo - pad_frac * span, hi + pad_frac * span)
}

// Five-stop sequential color ramp (dark blue to yellow).
const RAMP: [(u8, u8, u8); 5] = [
    (13, 8, 135),
    (126, 3, 168),
    (204, 71, 120),
    (248, 149, 64),
    (240, 249, 33),
];

fn ramp_color(u: f64) -> String {
    let u = u.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (u.floor() as usize).min(RAMP.len() - 2);
    let frac = u - i as f64;
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * frac).round() as u8;
    let (r, g, b) = (
        lerp(RAMP[i].0, RAMP[i + 1].0),
        lerp(RAMP[i].1, RAMP[i + 1].1),
        lerp(RAMP[i].2, RAMP[i + 1].2),
    );
    format!("rgb({r},{g},{b})")
}

/// Space-time heat map of the piecewise-constant extension `S_n v_n(t)`:
/// one row of cells per sample time (t = 0 at the bottom), one column per
/// grid cell plus the zero tail cell `(nh, 1]`.
pub fn write_heatmap_svg<W: Write>(mut w: W, title: &str, traj: &Trajectory) -> io::Result<()> {
    let n = traj.grid.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for state in &traj.states {
        for &v in state.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    lo = lo.min(0.0); // the tail cell is always 0
    hi = hi.max(0.0);
    let span = (hi - lo).max(1e-300);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let rows = traj.states.len();
    let row_h = plot_h / rows as f64;

    svg_header(&mut w)?;
    text(&mut w, WIDTH / 2.0, 22.0, "middle", 14, title, "")?;

    for (k, state) in traj.states.iter().enumerate() {
        let gf = GridFunction::new(traj.grid, state.clone()).expect("state length matches grid");
        let y = MARGIN_TOP + plot_h - (k + 1) as f64 * row_h;
        for j in 0..=n {
            let x_left = if j == 0 { 0.0 } else { traj.grid.edge(j) };
            let x_right = if j == n { 1.0 } else { traj.grid.edge(j + 1) };
            if x_right <= x_left {
                continue;
            }
            // cell value: extension evaluated at the right edge of the cell
            let v = extend_eval(&gf, x_right.min(traj.grid.edge(n)));
            let v = if j == n { 0.0 } else { v };
            let color = ramp_color((v - lo) / span);
            writeln!(
                w,
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
                MARGIN_LEFT + x_left * plot_w,
                (x_right - x_left) * plot_w,
                row_h + 0.5
            )?;
        }
    }
    writeln!(
        w,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"black\"/>"
    )?;
    for (frac, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let sx = MARGIN_LEFT + frac * plot_w;
        text(
            &mut w,
            sx,
            MARGIN_TOP + plot_h + 18.0,
            "middle",
            11,
            label,
            "",
        )?;
        let t_val = traj.times.last().unwrap() * frac;
        let sy = MARGIN_TOP + plot_h * (1.0 - frac);
        text(
            &mut w,
            MARGIN_LEFT - 8.0,
            sy + 4.0,
            "end",
            11,
            &format!("{t_val:.2}"),
            "",
        )?;
    }
    text(
        &mut w,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        "middle",
        12,
        "x",
        "",
    )?;
    text(
        &mut w,
        16.0,
        MARGIN_TOP + plot_h / 2.0,
        "middle",
        12,
        "t",
        &format!(
            " transform=\"rotate(-90 16 {:.1})\"",
            MARGIN_TOP + plot_h / 2.0
        ),
    )?;
    writeln!(w, "</svg>")
}
