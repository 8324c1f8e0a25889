use std::fmt::Write;

use super::observe::Timecourse;

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// CSV: `t`, species means, `cov.X.Y` entries (upper triangle, when LNA
/// ran), then one column per observer.
pub fn timecourse_csv(tc: &Timecourse) -> String {
    let n = tc.species.len();
    let mut header = vec!["t".to_string()];
    header.extend(tc.names.iter().cloned());
    if tc.covariances.is_some() {
        for i in 0..n {
            for j in i..n {
                header.push(format!("cov.{}.{}", tc.names[i], tc.names[j]));
            }
        }
    }
    header.extend(tc.observers.iter().map(|o| o.label.clone()));
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for k in 0..tc.len() {
        let mut row = vec![format_float(tc.times[k])];
        row.extend(tc.means[k].iter().map(|v| format_float(*v)));
        if let Some(c) = &tc.covariances {
            row.extend(c[k].iter().map(|v| format_float(*v)));
        }
        row.extend(tc.observers.iter().map(|o| format_float(o.values[k])));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub(crate) fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot of the reported series, or of every species mean when
/// nothing was reported.
pub fn timecourse_svg(tc: &Timecourse) -> String {
    let series: Vec<(String, Vec<f64>)> = if tc.observers.is_empty() {
        (0..tc.species.len()).map(|i| (tc.names[i].clone(), tc.means.iter().map(|m| m[i]).collect())).collect()
    } else {
        tc.observers.iter().map(|o| (o.label.clone(), o.values.clone())).collect()
    };
    let (w, h) = (800.0, 400.0);
    let (left, right, top, bottom) = (60.0, 160.0, 20.0, 40.0);
    let t_end = tc.times.last().copied().unwrap_or(0.0);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    lo = lo.min(0.0);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let px = |t: f64| left + if t_end > 0.0 { t / t_end } else { 0.0 } * (w - left - right);
    let py = |v: f64| top + (1.0 - (v - lo) / (hi - lo)) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2}" stroke="black" fill="none"/>"#,
        left,
        top,
        left,
        h - bottom,
        w - right,
        h - bottom
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
        left - 4.0,
        top + 4.0,
        format_float(hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
        left - 4.0,
        h - bottom,
        format_float(lo)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
        w - right,
        h - bottom + 16.0,
        format_float(t_end)
    );
    for (idx, (label, values)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = tc
            .times
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_finite())
            .map(|(t, v)| format!("{:.2},{:.2}", px(*t), py(*v)))
            .collect();
        let _ =
            writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = top + 16.0 * idx as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="3" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            w - right + 10.0,
            ly - 3.0,
            w - right + 26.0,
            ly + 2.0,
            escape_xml(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::SpeciesId;
    use crate::sim::ObserverSeries;

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 1.0, -2.5, 1e-20, 6.02e23, 0.1 + 0.2, 1.0 / 3.0] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.5), "0.5");
    }

    #[test]
    fn csv_columns() {
        let tc = Timecourse {
            label: "run".into(),
            times: vec![0.0, 1.0],
            species: vec![SpeciesId(0), SpeciesId(1)],
            names: vec!["A".into(), "B".into()],
            means: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            covariances: Some(vec![vec![0.0; 3], vec![0.1, 0.2, 0.3]]),
            observers: vec![ObserverSeries { label: "total".into(), values: vec![1.0, 1.0] }],
            omega: 1.0,
            temperature: 293.15,
            warnings: vec![],
        };
        let csv = timecourse_csv(&tc);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,A,B,cov.A.A,cov.A.B,cov.B.B,total");
        assert_eq!(lines.next().unwrap(), "0,1,0,0,0,0,1");
        assert_eq!(lines.next().unwrap(), "1,0.5,0.5,0.1,0.2,0.3,1");
        let svg = timecourse_svg(&tc);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">total</text>"));
    }
}
