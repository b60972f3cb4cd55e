//! Stereographic pictures of fibres of `S³`.

use std::fmt::Write;

use fibration_forge::fibration::stereographic;
use nalgebra::DVector;

const SIZE: f64 = 800.0;
/// Points of `R³` farther out than this are not drawn.
const CLIP: f64 = 6.0;
/// View rotation: tilt about the x-axis after a turn about the z-axis.
const TURN: f64 = 0.5;
const TILT: f64 = 1.1;

fn to_page(p: [f64; 3]) -> [f64; 2] {
    let (c, s) = (TURN.cos(), TURN.sin());
    let (x, y, z) = (c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]);
    let (ct, st) = (TILT.cos(), TILT.sin());
    let (u, v) = (x, ct * y - st * z);
    let scale = 0.5 * SIZE / CLIP;
    [0.5 * SIZE + scale * u, 0.5 * SIZE - scale * v]
}

/// Splits a closed circle into runs of drawable points.
fn runs(fibre: &[(f64, DVector<f64>)]) -> Vec<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let closed = fibre.iter().chain(fibre.first());
    for (_, x) in closed {
        let q = stereographic(&[x[0], x[1], x[2], x[3]]);
        let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r.is_finite() && r <= CLIP {
            current.push(to_page(q));
        } else if current.len() > 1 {
            out.push(std::mem::take(&mut current));
        } else {
            current.clear();
        }
    }
    if current.len() > 1 {
        out.push(current);
    }
    out
}

/// One polyline per visible arc, coloured by fibre.
pub fn render(fibres: &[Vec<(f64, DVector<f64>)>]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (id, fibre) in fibres.iter().enumerate() {
        let hue = 360.0 * id as f64 / fibres.len() as f64;
        for run in runs(fibre) {
            let pts: Vec<String> = run.iter().map(|p| format!("{:.3},{:.3}", p[0], p[1])).collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"hsl({hue:.1},70%,40%)\" stroke-width=\"1.5\" points=\"{}\"/>",
                pts.join(" ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
