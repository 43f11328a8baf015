//! Minimal SVG plots: scatter, arrow and heat-scatter layers on shared axes.

use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Scatter {
        points: Vec<[f64; 2]>,
        color: String,
    },
    /// Arrows from `origins[i]` to `origins[i] + scale·vectors[i]`, where
    /// `scale` maps the longest vector to a fixed fraction of the plot.
    Arrows {
        origins: Vec<[f64; 2]>,
        vectors: Vec<[f64; 2]>,
    },
    /// Points colored from blue (lowest value) to red (highest).
    Heat {
        points: Vec<[f64; 2]>,
        values: Vec<f64>,
    },
}

impl Layer {
    fn points(&self) -> &[[f64; 2]] {
        match self {
            Layer::Scatter { points, .. } | Layer::Heat { points, .. } => points,
            Layer::Arrows { origins, .. } => origins,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            Layer::Scatter { .. } => "scatter",
            Layer::Arrows { .. } => "arrows",
            Layer::Heat { .. } => "heat",
        }
    }
}

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn of(layers: &[Layer]) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in layers.iter().flat_map(|l| l.points()) {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..2 {
            if !lo[k].is_finite() {
                lo[k] = -1.0;
                hi[k] = 1.0;
            } else if hi[k] - lo[k] < 1e-12 {
                lo[k] -= 0.5;
                hi[k] += 0.5;
            }
        }
        Frame { lo, hi }
    }

    fn span(&self) -> f64 {
        (self.hi[0] - self.lo[0]).max(self.hi[1] - self.lo[1])
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let w = SIZE - 2.0 * MARGIN;
        let x = MARGIN + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * w;
        let y = SIZE - MARGIN - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * w;
        (x, y)
    }
}

fn heat_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

pub fn render_svg(layers: &[Layer]) -> String {
    let frame = Frame::of(layers);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    s.push_str(
        "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" \
         markerHeight=\"6\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\"/></marker></defs>\n",
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    for layer in layers {
        let _ = writeln!(s, r#"<g class="{}">"#, layer.class());
        match layer {
            Layer::Scatter { points, color } => {
                for p in points {
                    let (x, y) = frame.map(*p);
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
                }
            }
            Layer::Heat { points, values } => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = if hi > lo { hi - lo } else { 1.0 };
                for (p, v) in points.iter().zip(values) {
                    let (x, y) = frame.map(*p);
                    let c = heat_color((v - lo) / range);
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{c}"/>"#);
                }
            }
            Layer::Arrows { origins, vectors } => {
                let longest = vectors.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
                let scale = if longest > 0.0 { 0.08 * frame.span() / longest } else { 0.0 };
                for (o, v) in origins.iter().zip(vectors) {
                    let (x1, y1) = frame.map(*o);
                    let (x2, y2) = frame.map([o[0] + scale * v[0], o[1] + scale * v[1]]);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="black" stroke-width="1" marker-end="url(#head)"/>"#
                    );
                }
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// First two columns of each row; a single column is paired with 0.
pub fn plane_points(rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<[f64; 2]> {
    rows.into_iter()
        .map(|r| [r.first().copied().unwrap_or(0.0), r.get(1).copied().unwrap_or(0.0)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_markers() {
        let svg = render_svg(&[Layer::Arrows {
            origins: vec![[0.0, 0.0], [1.0, 1.0]],
            vectors: vec![[0.0, 0.0], [0.0, 0.0]],
        }]);
        assert!(svg.contains("<marker id=\"head\""));
        assert_eq!(svg.matches("marker-end").count(), 2);
        assert!(svg.contains(r#"x1="30.00" y1="570.00" x2="30.00" y2="570.00""#));
    }

    #[test]
    fn all_layers() {
        let pts = vec![[0.0, 0.0], [1.0, 2.0]];
        let svg = render_svg(&[
            Layer::Scatter {
                points: pts.clone(),
                color: "gray".into(),
            },
            Layer::Heat {
                points: pts.clone(),
                values: vec![0.0, 1.0],
            },
            Layer::Arrows {
                origins: pts,
                vectors: vec![[1.0, 0.0], [0.0, 1.0]],
            },
        ]);
        for class in ["scatter", "heat", "arrows"] {
            assert!(svg.contains(&format!(r#"<g class="{class}">"#)));
        }
        assert!(svg.contains("#0040ff") && svg.contains("#ff4000"));
    }
}
