//! Bound rows and their CSV, JSON and SVG renderings.

use std::io::Write;

use plc_capacity::capacity::{db_to_linear, Sweep, Units};
use serde::Serialize;

use crate::error::CliError;

pub const CSV_COLUMNS: [&str; 10] = [
    "snr_db",
    "p_tilde",
    "upper_bps",
    "lower1_bps",
    "lower2_bps",
    "c_gauss_bps",
    "delta",
    "h_rate_low",
    "h_rate_high",
    "flags",
];

/// One SNR point. Bounds are in bps/Hz, entropy rates in bits per original
/// sample; numeric fields are absent when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub snr_db: f64,
    pub p_tilde: Option<f64>,
    pub upper_bps: Option<f64>,
    pub lower1_bps: Option<f64>,
    pub lower2_bps: Option<f64>,
    pub c_gauss_bps: Option<f64>,
    pub delta: Option<f64>,
    pub h_rate_low: Option<f64>,
    pub h_rate_high: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub scenario: String,
    pub units: Units,
    pub per: Option<usize>,
    pub n_omega: usize,
    pub noise_power: Option<f64>,
    pub rows: Vec<Row>,
}

pub fn rows_from_sweep(sweep: &Sweep, units: Units) -> Vec<Row> {
    let u = units.bps_per_hz();
    let h = sweep.entropy.per_sample;
    sweep
        .points
        .iter()
        .map(|p| match &p.report {
            Ok(r) => Row {
                snr_db: p.snr_db,
                p_tilde: Some(r.p_tilde),
                upper_bps: Some(r.upper * u),
                lower1_bps: Some(r.lower1 * u),
                lower2_bps: r.lower2.map(|v| v * u),
                c_gauss_bps: Some(r.c_gauss * u),
                delta: Some(r.delta),
                h_rate_low: Some(h.lower),
                h_rate_high: Some(h.upper),
                flags: r.flags.clone(),
            },
            Err(e) => Row {
                p_tilde: Some(db_to_linear(p.snr_db) * sweep.noise_power),
                ..failed_row(p.snr_db, e)
            },
        })
        .collect()
}

pub fn failed_row(snr_db: f64, message: &str) -> Row {
    Row {
        snr_db,
        p_tilde: None,
        upper_bps: None,
        lower1_bps: None,
        lower2_bps: None,
        c_gauss_bps: None,
        delta: None,
        h_rate_low: None,
        h_rate_high: None,
        flags: vec![format!("error:{message}")],
    }
}

// 17 significant digits.
fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.snr_db),
            num(r.p_tilde),
            num(r.upper_bps),
            num(r.lower1_bps),
            num(r.lower2_bps),
            num(r.c_gauss_bps),
            num(r.delta),
            num(r.h_rate_low),
            num(r.h_rate_high),
            r.flags.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, report: &Report) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 52.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Line chart of upper, lower1 and lower2 (bps/Hz) against SNR.
pub fn write_svg<W: Write>(mut out: W, title: &str, rows: &[Row]) -> Result<(), CliError> {
    let series: [(&str, &str, &str, fn(&Row) -> Option<f64>); 3] = [
        ("upper", "#d62728", "", |r| r.upper_bps),
        ("lower 1 (Gaussian)", "#1f77b4", "6,4", |r| r.lower1_bps),
        ("lower 2", "#2ca02c", "2,3", |r| r.lower2_bps),
    ];
    let xs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    let ys: Vec<f64> = rows
        .iter()
        .flat_map(|r| series.iter().filter_map(move |s| (s.3)(r)))
        .filter(|v| v.is_finite())
        .collect();
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let (mut y0, mut y1) = ys.iter().fold((0.0f64, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    if !y1.is_finite() || y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let step = nice_step(y1 - y0);
    y0 = (y0 / step).floor() * step;
    y1 = (y1 / step).ceil() * step;
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{:.1}" y="16" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    )?;
    for t in ticks(x0, x1) {
        let x = px(t);
        writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_T,
            MARGIN_T + ph,
            MARGIN_T + ph + 16.0,
            fmt_tick(t)
        )?;
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_L,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(t)
        )?;
    }
    writeln!(
        out,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    )?;
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SNR (dB)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0
    )?;
    writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">bps/Hz</text>"#,
        MARGIN_T + ph / 2.0
    )?;
    for (k, (label, colour, dash, get)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .filter_map(|r| get(r).filter(|v| v.is_finite()).map(|v| format!("{:.2},{:.2}", px(r.snr_db), py(v))))
            .collect();
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        if !pts.is_empty() {
            writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="2"{dash_attr} points="{}"/>"#,
                pts.join(" ")
            )?;
        }
        let ly = MARGIN_T + 16.0 + 20.0 * k as f64;
        let lx = MARGIN_L + pw + 12.0;
        writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"{dash_attr}/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
