use std::fmt::Write;

use crate::sim::escape_xml;

use super::{ConnectorKind, ScoreModel};

/// Geometry and colors for [`render_svg`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStyle {
    pub line_spacing: f64,
    pub tile_width: f64,
    pub margin: f64,
    pub reagent_color: String,
    pub product_color: String,
    pub catalyst_color: String,
    pub line_color: String,
}

impl Default for ScoreStyle {
    fn default() -> Self {
        Self {
            line_spacing: 40.0,
            tile_width: 40.0,
            margin: 30.0,
            reagent_color: "#1f4fbf".into(),
            product_color: "#d62728".into(),
            catalyst_color: "#2ca02c".into(),
            line_color: "#444444".into(),
        }
    }
}

const GLYPH: f64 = 6.0;
const ARROW: f64 = 8.0;
const CATALYST_R: f64 = 4.0;
const CATALYST_DX: f64 = 12.0;
const EMPTY_DY: f64 = 16.0;
const EMPTY_R: f64 = 5.0;

/// Renders a score. Species are `<line>` elements; reagents are `<rect>`
/// bars, products `<polygon>` arrowheads and catalysts `<circle>`s. Stems,
/// links and the empty-set glyphs are `<path>`s.
pub fn render_svg(model: &ScoreModel, style: &ScoreStyle) -> String {
    let label_width = model.names.iter().map(|n| n.chars().count()).max().unwrap_or(0) as f64 * 8.0 + 20.0;
    let label_width = label_width.max(60.0);
    let x_of = |col: usize| label_width + style.tile_width * (col as f64 + 0.5);
    let y_of = |line: usize| style.margin + style.line_spacing * line as f64;
    let columns = model.tiles.iter().map(|t| t.column + 1).max().unwrap_or(0);
    let width = label_width + style.tile_width * columns as f64 + style.margin;
    let height = 2.0 * style.margin + style.line_spacing * model.species.len().saturating_sub(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    for (k, name) in model.names.iter().enumerate() {
        let y = y_of(k);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif" text-anchor="end">{}</text>"#,
            label_width - 14.0,
            y + 4.0,
            escape_xml(name)
        );
        let _ = writeln!(
            s,
            r#"<line class="species" data-line="{k}" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1"/>"#,
            label_width - 10.0,
            width - style.margin / 2.0,
            style.line_color
        );
    }

    for (t, tile) in model.tiles.iter().enumerate() {
        let x = x_of(tile.column);
        let ys: Vec<f64> = tile.connectors.iter().map(|c| y_of(c.line)).collect();
        let mut lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let source = tile.is_source();
        let sink = tile.is_sink();
        if source {
            lo -= EMPTY_DY;
        }
        if sink {
            hi += EMPTY_DY;
        }
        let mid = (lo + hi) / 2.0;
        let _ = writeln!(s, r#"<g class="tile" data-tile="{t}" data-reaction="{}">"#, tile.reaction);
        let (class, w) = if tile.stem { ("stem", 3.0) } else { ("link", 1.5) };
        let _ = writeln!(
            s,
            r#"<path class="{class}" d="M{x:.2} {lo:.2} L{x:.2} {hi:.2}" stroke="{}" stroke-width="{w}" fill="none"/>"#,
            style.line_color
        );
        if source {
            empty_set(&mut s, "source", x, lo, &style.line_color);
        }
        if sink {
            empty_set(&mut s, "sink", x, hi, &style.line_color);
        }
        for c in &tile.connectors {
            let y = y_of(c.line);
            match c.kind {
                ConnectorKind::Reagent => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="reagent" data-line="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="4" fill="{}"/>"#,
                        c.line,
                        x - GLYPH,
                        y - 2.0,
                        2.0 * GLYPH,
                        style.reagent_color
                    );
                }
                ConnectorKind::Product => {
                    let base = if mid <= y { y - ARROW } else { y + ARROW };
                    let _ = writeln!(
                        s,
                        r#"<polygon class="product" data-line="{}" points="{:.2},{base:.2} {:.2},{base:.2} {x:.2},{y:.2}" fill="{}"/>"#,
                        c.line,
                        x - GLYPH,
                        x + GLYPH,
                        style.product_color
                    );
                }
                ConnectorKind::Catalyst => {
                    let _ = writeln!(
                        s,
                        r#"<path class="catalyst-link" d="M{:.2} {y:.2} L{x:.2} {y:.2}" stroke="{}" stroke-width="1.5"/>"#,
                        x - CATALYST_DX + CATALYST_R,
                        style.catalyst_color
                    );
                    let _ = writeln!(
                        s,
                        r#"<circle class="catalyst" data-line="{}" cx="{:.2}" cy="{y:.2}" r="{CATALYST_R}" fill="white" stroke="{}" stroke-width="1.5"/>"#,
                        c.line,
                        x - CATALYST_DX,
                        style.catalyst_color
                    );
                }
            }
            if c.multiplicity > 1 {
                let (dx, dy) = match c.kind {
                    ConnectorKind::Catalyst => (-CATALYST_DX - 2.0, -6.0),
                    _ => (GLYPH + 2.0, -6.0),
                };
                let anchor = if c.kind == ConnectorKind::Catalyst { "end" } else { "start" };
                let _ = writeln!(
                    s,
                    r#"<text class="multiplicity" x="{:.2}" y="{:.2}" font-size="10" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
                    x + dx,
                    y + dy,
                    c.multiplicity
                );
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn empty_set(s: &mut String, class: &str, x: f64, y: f64, color: &str) {
    let r = EMPTY_R;
    let _ = writeln!(
        s,
        r#"<path class="{class}" d="M{:.2} {y:.2} a{r},{r} 0 1,0 {:.2},0 a{r},{r} 0 1,0 {:.2},0 M{:.2} {:.2} L{:.2} {:.2}" stroke="{color}" stroke-width="1.5" fill="white"/>"#,
        x - r,
        2.0 * r,
        -2.0 * r,
        x - r - 1.0,
        y + r + 1.0,
        x + r + 1.0,
        y - r - 1.0
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::{Complex, Network, RateLaw};
    use crate::score::layout_score;

    fn count(s: &str, tag: &str) -> usize {
        s.matches(&format!("<{tag} ")).count()
    }

    #[test]
    fn conversion_has_two_lines_and_two_glyphs() {
        let mut n = Network::new();
        let a = n.add_species("A").id;
        let b = n.add_species("B").id;
        n.add_reaction(Complex::from_pairs([(a, 1)]), Complex::from_pairs([(b, 1)]), RateLaw::MassAction(1.0)).unwrap();
        let svg = render_svg(&layout_score(&n, None).unwrap(), &ScoreStyle::default());
        assert_eq!(count(&svg, "line"), 2);
        assert_eq!(count(&svg, "rect") + count(&svg, "polygon") + count(&svg, "circle"), 2);
        assert!(svg.contains(r#"class="link""#));
        assert!(!svg.contains(r#"class="stem""#));
    }

    #[test]
    fn source_sink_and_badges() {
        let mut n = Network::new();
        let a = n.add_species("A").id;
        n.add_reaction(Complex::new(), Complex::from_pairs([(a, 2)]), RateLaw::MassAction(1.0)).unwrap();
        n.add_reaction(Complex::from_pairs([(a, 1)]), Complex::new(), RateLaw::MassAction(1.0)).unwrap();
        let svg = render_svg(&layout_score(&n, None).unwrap(), &ScoreStyle::default());
        assert_eq!(svg.matches(r#"class="source""#).count(), 1);
        assert_eq!(svg.matches(r#"class="sink""#).count(), 1);
        assert!(svg.contains(">2</text>"));
    }

    #[test]
    fn names_are_escaped() {
        let mut n = Network::new();
        n.add_species("a<b");
        let svg = render_svg(&layout_score(&n, None).unwrap(), &ScoreStyle::default());
        assert!(svg.contains("a&lt;b"));
    }
}
