//! Artifact writers: trajectory CSV, JSON reports, and native SVG plots of
//! the observables against their bound lines.

use crate::bounds::BoundVerdict;
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::spectral::NormReport;
use std::io::Write;
use std::path::Path;

/// Fixed column order of the trajectory CSV.
pub const CSV_HEADER: &str =
    "t,norm_v2z2,norm_y2xi2,norm_p2th2,norm_g2,l4_vz,l6_vz,h1_uw,h1_vzphpsi,supnorm";

/// The nine observable columns of one sample, in header order.
pub fn observable_row(n: &NormReport) -> [f64; 9] {
    [
        n.vz_l2_sq(),
        n.yxi_sq(),
        n.ptheta_sq(),
        n.g_l2_sq(),
        n.vz_l4(),
        n.vz_l6(),
        n.uw_h1_sq(),
        n.vz_h1_sq() + n.phipsi_h1_sq(),
        n.sup,
    ]
}

/// Observable names matching [`observable_row`] and the verdict names they
/// are compared against.
pub const OBSERVABLE_NAMES: [&str; 9] = [
    "vz_l2",
    "yxi_l2",
    "ptheta_l2",
    "g_l2",
    "vz_l4",
    "vz_l6",
    "uw_h1",
    "vzphipsi_h1",
    "sup_norm",
];

/// Writes the trajectory CSV (full double precision, shortest round-trip
/// formatting). An empty trajectory produces a header-only file.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (traj.samples.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!("{}", s.t));
        for v in observable_row(&s.norms) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument {
        what: "write_json",
        message: e.to_string(),
    })?;
    write_bytes(path, json.as_bytes())
}

/// Wraps a map-shaped payload with the run's seed and config hash at the
/// top level; every JSON artifact embeds both.
#[derive(serde::Serialize)]
pub struct Artifact<'a, T: serde::Serialize> {
    pub seed: u64,
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub data: &'a T,
}

pub fn write_artifact_json<T: serde::Serialize>(
    data: &T,
    seed: u64,
    config_hash: &str,
    path: &Path,
) -> Result<()> {
    write_json(
        &Artifact {
            seed,
            config_hash,
            data,
        },
        path,
    )
}

const PALETTE: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22",
];

/// Renders the nine observables of a trajectory as SVG polylines on a
/// log10 scale, with one horizontal line per verdict bound (off-scale for
/// non-finite bounds, drawn at the top edge). The seed and config hash are
/// embedded as an XML comment.
pub fn write_trajectory_svg(
    traj: &Trajectory,
    verdicts: &[BoundVerdict],
    seed: u64,
    config_hash: &str,
    path: &Path,
) -> Result<()> {
    let (w, h) = (960.0_f64, 540.0_f64);
    let margin = 60.0;
    let plot_w = w - 2.0 * margin;
    let plot_h = h - 2.0 * margin;

    let t0 = traj.samples.first().map(|s| s.t).unwrap_or(0.0);
    let t1 = traj
        .samples
        .last()
        .map(|s| s.t)
        .unwrap_or(1.0)
        .max(t0 + 1e-12);

    // Log-scale range over all positive data points and finite bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &traj.samples {
        for v in observable_row(&s.norms) {
            if v > 0.0 && v.is_finite() {
                lo = lo.min(v.log10());
                hi = hi.max(v.log10());
            }
        }
    }
    for v in verdicts {
        if v.bound.is_finite() && v.bound > 0.0 {
            lo = lo.min(v.bound.log10());
            hi = hi.max(v.bound.log10());
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    lo -= 0.5;
    hi += 0.5;

    let x_of = |t: f64| margin + (t - t0) / (t1 - t0) * plot_w;
    let y_of = |v: f64| {
        let l = if v > 0.0 { v.log10() } else { lo };
        margin + (hi - l.clamp(lo, hi)) / (hi - lo) * plot_h
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!("<!-- seed={seed} config={config_hash} -->\n"));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\">t in [{t0:.3}, {t1:.3}], log10 scale</text>\n",
        margin,
        h - margin / 3.0
    ));

    for (i, name) in OBSERVABLE_NAMES.iter().enumerate() {
        let mut points = String::new();
        for s in &traj.samples {
            let v = observable_row(&s.norms)[i];
            points.push_str(&format!("{:.2},{:.2} ", x_of(s.t), y_of(v)));
        }
        svg.push_str(&format!(
            "<polyline class=\"observable\" data-name=\"{name}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            PALETTE[i],
            points.trim_end()
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{name}</text>\n",
            w - margin + 4.0,
            margin + 14.0 * i as f64,
            PALETTE[i]
        ));
    }

    for v in verdicts {
        let y = if v.bound.is_finite() {
            y_of(v.bound)
        } else {
            margin
        };
        let label = if v.bound.is_finite() {
            format!("{} bound", v.name)
        } else {
            format!("{} bound (off scale)", v.name)
        };
        svg.push_str(&format!(
            "<line class=\"bound\" data-name=\"{}\" x1=\"{margin}\" x2=\"{}\" y1=\"{y:.2}\" y2=\"{y:.2}\" stroke=\"#333\" stroke-dasharray=\"6,4\" stroke-width=\"1\"/>\n",
            v.name,
            w - margin
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"10\" fill=\"#333\">{label}</text>\n",
            margin + 4.0,
            y - 3.0
        ));
    }

    svg.push_str("</svg>\n");
    write_bytes(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{simulate, IntegratorConfig, Scheme};
    use crate::model::Parameters;
    use crate::spectral::{DomainSpec, ModalState, SineBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn empty_trajectory_writes_header_only() {
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 4).unwrap();
        let traj = Trajectory {
            samples: vec![],
            states: vec![],
            initial: ModalState::zero(&basis),
            final_state: ModalState::zero(&basis),
            dt_final: 1e-3,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&traj, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_roundtrips_full_precision() {
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 6).unwrap();
        let prm = Parameters::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let g0 = ModalState::random_ball(&basis, 2.0, &mut rng);
        let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 0.05, 10).unwrap();
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&traj, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, s) in lines.zip(&traj.samples) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 10);
            assert_eq!(cols[0], s.t);
            let row = observable_row(&s.norms);
            for (got, want) in cols[1..].iter().zip(row) {
                assert_eq!(*got, want, "lossy CSV formatting");
            }
        }
    }

    #[test]
    fn svg_structure_has_polylines_and_bound_lines() {
        let basis = SineBasis::new(DomainSpec::interval(PI).unwrap(), 6).unwrap();
        let prm = Parameters::default_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let g0 = ModalState::random_ball(&basis, 2.0, &mut rng);
        let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 0.1, 10).unwrap();
        let traj = simulate(&g0, &basis, &prm, &cfg).unwrap();
        let est = crate::spectral::embedding_constants(&basis, 1000, 7).unwrap();
        let bs = crate::bounds::compute_bound_set(&prm, basis.gamma(), PI, 1, est.delta, est.eta);
        let verdicts = crate::bounds::verify_absorption(&traj, &bs, 0.4, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.svg");
        write_trajectory_svg(&traj, &verdicts, 7, "deadbeef", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("class=\"observable\"").count(), 9);
        assert_eq!(text.matches("class=\"bound\"").count(), verdicts.len());
    }
}
