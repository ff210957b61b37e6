use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use restframe::canonical_transform::lw_mode_amplitude;
use restframe::lienard_wiechert::{lw_fourier, ParticleKinematics};
use restframe::radiation::extract_a_em;

use crate::config::Setup;
use crate::report::{num, write_toml, Status};

#[derive(Debug, Serialize)]
struct DecomposeReport {
    tau: f64,
    modes: usize,
    /// Largest `|a_em − expected|`, relative to the largest expected amplitude.
    max_residual: f64,
    tolerance: f64,
    pass: bool,
}

/// Extracts `a_em` from the combined transverse field at `τ` and compares it
/// with the free radiation phase plus the particles' Liénard–Wiechert
/// amplitudes.
pub fn run(setup: &Setup, out: &Path) -> anyhow::Result<Status> {
    let cfg = &setup.config;
    let tau = cfg.decompose.tau;
    let rad = &setup.radiation;
    let kin: Vec<(f64, ParticleKinematics)> = cfg
        .particles
        .iter()
        .map(|p| Ok((p.charge, ParticleKinematics::new(p.eta.into(), p.kappa.into(), p.mass, cfg.c)?)))
        .collect::<anyhow::Result<_>>()?;

    let mut rows = Vec::with_capacity(rad.grid.len());
    for (n, node) in rad.grid.nodes().iter().enumerate() {
        let (mut a, mut pi) = rad.fourier_fields(n, tau);
        let phase = Complex64::from_polar(1.0, -node.omega * tau);
        let mut expected = rad.amplitudes[n].map(|x| x * phase);
        for (e, p) in &kin {
            let f = lw_fourier(&node.k, p)?;
            a += f.potential * Complex64::new(*e, 0.0);
            pi += f.electric * Complex64::new(*e, 0.0);
            let lw = lw_mode_amplitude(node, &p.eta, &p.kappa, p.mass, cfg.c);
            for l in 0..2 {
                expected[l] += lw[l] * *e;
            }
        }
        let got = extract_a_em(&a, &pi, &node.k)?;
        let diff = (got[0] - expected[0]).norm().max((got[1] - expected[1]).norm());
        let size = expected[0].norm().max(expected[1].norm());
        rows.push((node, got, diff, size));
    }
    let scale = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut w = csv::Writer::from_path(out.join("spectrum.csv"))?;
    w.write_record(["kx", "ky", "kz", "weight", "re_a1", "im_a1", "re_a2", "im_a2", "residual"])?;
    let mut worst: f64 = 0.0;
    for (node, got, diff, _) in &rows {
        let residual = diff / scale;
        worst = worst.max(residual);
        let v = [node.k.x, node.k.y, node.k.z, node.weight, got[0].re, got[0].im, got[1].re, got[1].im, residual];
        w.write_record(v.map(num))?;
    }
    w.flush()?;

    let tolerance = cfg.tolerances.decompose;
    let pass = worst <= tolerance;
    write_toml(
        &out.join("decompose_report.toml"),
        &DecomposeReport { tau, modes: rows.len(), max_residual: worst, tolerance, pass },
    )?;
    Ok(Status::from_pass(pass))
}
