use std::fmt::Write as _;

use ndarray::ArrayView2;

use super::color::color_of;
use crate::error::{Error, Result};

pub const DEFAULT_CLIP_PERCENTILE: f64 = 99.0;

const MARGIN_LEFT: u32 = 44;
const MARGIN_TOP: u32 = 10;
const MARGIN_RIGHT: u32 = 10;
const MARGIN_BOTTOM: u32 = 44;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSpec {
    pub cell_width: u32,
    pub cell_height: u32,
    /// Percentile of |values| mapped to full colour, in (50, 100].
    pub clip_percentile: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            cell_width: 4,
            cell_height: 10,
            clip_percentile: DEFAULT_CLIP_PERCENTILE,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cell_width == 0 || self.cell_height == 0 {
            return Err(Error::InvalidConfig("cell sizes must be positive".into()));
        }
        if !(self.clip_percentile > 50.0 && self.clip_percentile <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "clip percentile must be in (50, 100], got {}",
                self.clip_percentile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub svg: String,
    /// `(-clip, +clip)`.
    pub value_range: (f64, f64),
}

impl Heatmap {
    pub fn svg_bytes(&self) -> &[u8] {
        self.svg.as_bytes()
    }
}

/// Linear-interpolation percentile (`p` in [0, 100]) of `values`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

fn escape(c: char) -> String {
    match c {
        '&' => "&amp;".into(),
        '<' => "&lt;".into(),
        '>' => "&gt;".into(),
        '"' => "&quot;".into(),
        '\'' => "&apos;".into(),
        c => c.to_string(),
    }
}

/// Frames run along x, coefficient bins along y with bin 0 at the bottom.
/// Optional per-frame labels are drawn under the x axis.
pub fn render_heatmap(
    matrix: ArrayView2<'_, f64>,
    spec: &RenderSpec,
    labels: Option<&[char]>,
) -> Result<Heatmap> {
    spec.validate()?;
    let (frames, bins) = matrix.dim();
    if let Some(labels) = labels {
        if labels.len() != frames {
            return Err(Error::LabelLengthMismatch {
                labels: labels.len(),
                frames,
            });
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("heatmap values must be finite".into()));
    }

    let magnitudes: Vec<f64> = matrix.iter().map(|v| v.abs()).collect();
    let mut clip = percentile(&magnitudes, spec.clip_percentile);
    if clip <= 0.0 {
        clip = 1.0;
    }

    let (cw, ch) = (spec.cell_width, spec.cell_height);
    let plot_w = frames as u32 * cw;
    let plot_h = bins as u32 * ch;
    let width = MARGIN_LEFT + plot_w + MARGIN_RIGHT;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;
    let axis_y = MARGIN_TOP + plot_h;

    let mut svg = String::with_capacity(64 * frames * bins + 1024);
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#FFFFFF"/>"##);
    let _ = writeln!(svg, r#"<g shape-rendering="crispEdges">"#);
    for (i, row) in matrix.outer_iter().enumerate() {
        let x = MARGIN_LEFT + i as u32 * cw;
        for (k, &v) in row.iter().enumerate() {
            let y = MARGIN_TOP + (bins - 1 - k) as u32 * ch;
            let fill = color_of(v, clip)?;
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}"/>"#
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000000" stroke-width="1"/>"##
    );
    let _ = writeln!(svg, r##"<g font-family="monospace" font-size="8" fill="#000000">"##);
    for k in (0..bins).step_by(5) {
        let y = MARGIN_TOP + (bins - 1 - k) as u32 * ch + ch / 2 + 3;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" text-anchor="end">{k}</text>"#,
            MARGIN_LEFT - 4
        );
    }
    if let Some(labels) = labels {
        for (i, &c) in labels.iter().enumerate() {
            if c == ' ' {
                continue;
            }
            let x = MARGIN_LEFT + i as u32 * cw + cw / 2;
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
                axis_y + 10,
                escape(c)
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">frame</text>"#,
        MARGIN_LEFT + plot_w / 2,
        axis_y + 26
    );
    let _ = writeln!(
        svg,
        r#"<text x="10" y="{}" text-anchor="middle" transform="rotate(-90 10 {})">MFCC</text>"#,
        MARGIN_TOP + plot_h / 2,
        MARGIN_TOP + plot_h / 2
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");

    Ok(Heatmap {
        svg,
        value_range: (-clip, clip),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn fills(svg: &str) -> Vec<&str> {
        svg.lines()
            .filter(|l| l.starts_with("<rect x=") && l.contains("width=\"4\""))
            .map(|l| {
                let start = l.find("fill=\"").unwrap() + 6;
                &l[start..start + 7]
            })
            .collect()
    }

    #[test]
    fn zero_matrix_is_white() {
        let h = render_heatmap(Array2::zeros((5, 26)).view(), &RenderSpec::default(), None).unwrap();
        let f = fills(&h.svg);
        assert_eq!(f.len(), 5 * 26);
        assert!(f.iter().all(|&c| c == "#FFFFFF"));
        assert_eq!(h.value_range, (-1.0, 1.0));
    }

    #[test]
    fn maximum_at_clip_is_pure_red() {
        let mut m = Array2::from_shape_fn((3, 26), |(i, k)| (i + k) as f64 * 0.01);
        m[[1, 4]] = 5.0;
        let spec = RenderSpec {
            clip_percentile: 100.0,
            ..RenderSpec::default()
        };
        let h = render_heatmap(m.view(), &spec, None).unwrap();
        assert_eq!(h.value_range, (-5.0, 5.0));
        let f = fills(&h.svg);
        // Row-major over frames; bin 4 of frame 1.
        assert_eq!(f[26 + 4], "#FF0000");
        assert_eq!(f.iter().filter(|&&c| c == "#FF0000").count(), 1);
    }

    #[test]
    fn bin_zero_is_drawn_at_the_bottom() {
        let mut m = Array2::zeros((1, 26));
        m[[0, 0]] = 1.0;
        let spec = RenderSpec {
            clip_percentile: 100.0,
            ..RenderSpec::default()
        };
        let h = render_heatmap(m.view(), &spec, None).unwrap();
        let red = h.svg.lines().find(|l| l.contains("#FF0000")).unwrap();
        assert!(red.contains(&format!("y=\"{}\"", MARGIN_TOP + 25 * 10)), "{red}");
    }

    #[test]
    fn deterministic_and_labelled() {
        let m = Array2::from_shape_fn((4, 26), |(i, k)| (i as f64 - k as f64).sin());
        let labels = ['a', ' ', '<', '-'];
        let a = render_heatmap(m.view(), &RenderSpec::default(), Some(&labels)).unwrap();
        let b = render_heatmap(m.view(), &RenderSpec::default(), Some(&labels)).unwrap();
        assert_eq!(a.svg_bytes(), b.svg_bytes());
        assert!(a.svg.contains(">a</text>") && a.svg.contains(">&lt;</text>"));
        assert!(matches!(
            render_heatmap(m.view(), &RenderSpec::default(), Some(&labels[..3])).unwrap_err(),
            Error::LabelLengthMismatch { labels: 3, frames: 4 }
        ));
    }

    #[test]
    fn percentile_behaviour() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 62.5), 3.5);
        let mut last = f64::INFINITY;
        for p in [100.0, 99.0, 90.0, 75.0, 51.0] {
            let c = percentile(&v, p);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn spec_validation() {
        for p in [50.0, 100.5, f64::NAN] {
            let spec = RenderSpec {
                clip_percentile: p,
                ..RenderSpec::default()
            };
            assert!(render_heatmap(Array2::zeros((1, 26)).view(), &spec, None).is_err());
        }
        let spec = RenderSpec {
            cell_width: 0,
            ..RenderSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
