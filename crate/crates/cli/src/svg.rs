//! SVG rendering of object-to-node placements.
//!
//! One circle per object at its logical coordinates, filled with a color
//! keyed to the owning node from a fixed palette of evenly spaced hues.
//! Output is deterministic: identical snapshots render byte-identical SVG.

use std::fmt::Write as _;

use simlb_core::WorkloadSnapshot;

/// Evenly spaced hue for node `i` of `n`, as a `#rrggbb` string.
pub fn node_color(node: usize, node_count: usize) -> String {
    let hue = 360.0 * node as f64 / node_count.max(1) as f64;
    let (r, g, b) = hsl_to_rgb(hue, 0.65, 0.55);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (to_byte(r1), to_byte(g1), to_byte(b1))
}

/// Pixel value with at most three decimals, trailing zeros trimmed.
fn px(v: f64) -> String {
    let mut text = format!("{v:.3}");
    while text.ends_with('0') {
        text.pop();
    }
    if text.ends_with('.') {
        text.pop();
    }
    text
}

/// Render a 2D snapshot. `scale` is pixels per coordinate unit.
pub fn render(s: &WorkloadSnapshot, scale: f64) -> anyhow::Result<String> {
    if s.coord_dims != 2 {
        anyhow::bail!(
            "viz needs 2D coordinates, snapshot has {} dimension(s)",
            s.coord_dims
        );
    }
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    for obj in &s.objects {
        max_x = max_x.max(obj.coords[0]);
        max_y = max_y.max(obj.coords[1]);
    }
    let width = px((max_x + 1.0) * scale);
    let height = px((max_y + 1.0) * scale);
    let radius = px(0.38 * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let mut objects: Vec<_> = s.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    for obj in objects {
        let cx = px((obj.coords[0] + 0.5) * scale);
        let cy = px((obj.coords[1] + 0.5) * scale);
        let fill = node_color(obj.home_node, s.node_count);
        let _ = writeln!(
            out,
            r#"<circle cx="{cx}" cy="{cy}" r="{radius}" fill="{fill}"><title>object {} node {} load {}</title></circle>"#,
            obj.id, obj.home_node, obj.load
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
