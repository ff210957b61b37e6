use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use restframe::canonical_transform::Frame;
use restframe::dynamics::{integrate_with, project_rest_frame, FlowOptions, InternalGenerators, TrajectorySample};
use restframe::grassmann::{Grassmann, GrassmannVec3};
use restframe::pair_integrals::PairRule;

use crate::config::Setup;
use crate::report::{num, write_toml, Status};

#[derive(Debug, Serialize)]
struct Summary {
    steps: usize,
    dt: f64,
    tau_end: f64,
    /// `max|ℰ_matter(τ) − ℰ_matter(0)| / |ℰ_matter(0)|`.
    energy_drift: f64,
    radiation_energy_drift: f64,
    /// Relative to `Σ|κ_i|` (absolute when all particles are at rest).
    momentum_drift: f64,
    /// Relative to `|𝒥(0)|` (absolute when it vanishes).
    angular_momentum_drift: f64,
    /// Largest `|𝒫_int|` or `|𝒦_int|` over the run.
    constraint_residual: f64,
    center_of_energy: [f64; 3],
    tolerances: SummaryTolerances,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct SummaryTolerances {
    energy_drift: f64,
    /// Only enforced when the run starts on the constraint surface.
    constraint: Option<f64>,
}

/// Generators evaluated at the configured real charges.
struct Observed {
    e_matter: f64,
    e_rad: f64,
    momentum: Vector3<f64>,
    angular_momentum: Vector3<f64>,
    boost: Vector3<f64>,
}

fn observe(g: &InternalGenerators, charges: &[f64]) -> anyhow::Result<Observed> {
    let v = |x: &GrassmannVec3| x.project(charges);
    let s = |x: &Grassmann| x.project(charges);
    let sp = g.split.as_ref().expect("dressed-frame generators carry a split");
    Ok(Observed {
        e_matter: s(&sp.matter.energy)?,
        e_rad: s(&sp.radiation.energy)?,
        momentum: v(&g.total.momentum)?,
        angular_momentum: v(&g.total.angular_momentum)?,
        boost: v(&g.total.boost)?,
    })
}

fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["tau".to_string()];
    for name in ["eta", "kappa"] {
        for i in 1..=n {
            h.extend(["x", "y", "z"].map(|a| format!("{name}{i}_{a}")));
        }
    }
    h.extend(["e_matter", "e_rad"].map(String::from));
    for name in ["p", "j", "k"] {
        h.extend(["x", "y", "z"].map(|a| format!("{name}_int_{a}")));
    }
    h
}

fn csv_row(sample: &TrajectorySample, o: &Observed, charges: &[f64]) -> anyhow::Result<Vec<String>> {
    let mut row = vec![sample.tau];
    for p in &sample.state.particles {
        row.extend(p.eta.project(charges)?.iter());
    }
    for p in &sample.state.particles {
        row.extend(p.kappa.project(charges)?.iter());
    }
    row.extend([o.e_matter, o.e_rad]);
    for v in [o.momentum, o.angular_momentum, o.boost] {
        row.extend(v.iter());
    }
    Ok(row.into_iter().map(num).collect())
}

pub fn run(setup: &Setup, out: &Path, commuting: bool) -> anyhow::Result<Status> {
    let cfg = &setup.config;
    let it = &cfg.integration;
    let tol = &cfg.tolerances;
    let rule = PairRule::default();
    let charges = setup.charges();

    let mut state = setup.state(Frame::Hatted, commuting)?;
    if it.project {
        state = project_rest_frame(&state, &rule)?;
    }
    let opts = FlowOptions {
        samples: it.samples,
        min_separation: it.min_separation,
        rule,
        ..FlowOptions::new(it.tau_span, it.dt)
    };
    let record = integrate_with(&state, &opts)?;
    log::info!("{} steps of {:e}", record.steps, record.dt);

    let observed: Vec<Observed> =
        record.samples.iter().map(|s| observe(&s.generators, &charges)).collect::<anyhow::Result<_>>()?;
    let first = &observed[0];
    let max_dev = |f: &dyn Fn(&Observed) -> f64| observed.iter().map(f).fold(0.0, f64::max);
    let relative = |d: f64, scale: f64| if scale > 0.0 { d / scale } else { d };

    let kappa_scale: f64 = setup.particles().iter().map(|p| p.kappa.norm()).sum();
    let summary = Summary {
        steps: record.steps,
        dt: record.dt,
        tau_end: record.last().tau,
        energy_drift: relative(max_dev(&|o| (o.e_matter - first.e_matter).abs()), first.e_matter.abs()),
        radiation_energy_drift: max_dev(&|o| (o.e_rad - first.e_rad).abs()),
        momentum_drift: relative(max_dev(&|o| (o.momentum - first.momentum).norm()), kappa_scale),
        angular_momentum_drift: relative(
            max_dev(&|o| (o.angular_momentum - first.angular_momentum).norm()),
            first.angular_momentum.norm(),
        ),
        constraint_residual: max_dev(&|o| o.momentum.norm().max(o.boost.norm())),
        center_of_energy: record.samples[0].generators.center_of_energy(cfg.c).map(|v| v + 0.0).into(),
        tolerances: SummaryTolerances { energy_drift: tol.energy_drift, constraint: it.project.then_some(tol.constraint) },
        pass: false,
    };
    let pass = summary.energy_drift <= tol.energy_drift && (!it.project || summary.constraint_residual <= tol.constraint);

    let mut w = csv::Writer::from_path(out.join("trajectory.csv"))?;
    w.write_record(csv_header(charges.len()))?;
    for (s, o) in record.samples.iter().zip(&observed) {
        w.write_record(csv_row(s, o, &charges)?)?;
    }
    w.flush()?;
    write_toml(&out.join("summary.toml"), &Summary { pass, ..summary })?;
    if !pass {
        eprintln!("drift or constraint check failed; see summary.toml");
    }
    Ok(Status::from_pass(pass))
}
