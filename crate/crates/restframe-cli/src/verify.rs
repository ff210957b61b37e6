use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use restframe::canonical_transform::{
    forward_transform, verify_canonicity, BracketOptions, ChargeModel, Frame, ParticleInit,
};
use restframe::dynamics::{cross_terms, internal_generators_hatted, internal_generators_original, PairSums};
use restframe::grassmann::Grassmann;
use restframe::lienard_wiechert::{lw_fourier, lw_wave_residual, ParticleKinematics};
use restframe::minkowski::{circular_basis, helicity_tetrad, metric, Sl2c};
use restframe::pair_integrals::PairRule;

use crate::config::Setup;
use crate::limits;
use crate::report::{write_toml, Check, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Suite {
    Tetrads,
    Grassmann,
    Lw,
    Canonicity,
    Generators,
    Limits,
}

impl Suite {
    const ALL: [Suite; 6] = [Suite::Tetrads, Suite::Grassmann, Suite::Lw, Suite::Canonicity, Suite::Generators, Suite::Limits];

    fn name(self) -> &'static str {
        match self {
            Suite::Tetrads => "tetrads",
            Suite::Grassmann => "grassmann",
            Suite::Lw => "lw",
            Suite::Canonicity => "canonicity",
            Suite::Generators => "generators",
            Suite::Limits => "limits",
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    pass: bool,
    checks: Vec<Check>,
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(-PI..PI);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

fn tetrads(setup: &Setup) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.seed);
    let tol = setup.config.tolerances.tetrad;
    let eta = metric();
    let (mut orthonormal, mut complete, mut phase): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        let mut k = unit_vector(&mut rng) * rng.random_range(0.1..5.0);
        if k.z < -0.95 * k.norm() {
            k.z = -k.z;
        }
        let Ok(t) = helicity_tetrad(&k, rng.random_range(0.2..3.0)) else { continue };
        let e = t.matrix();
        orthonormal = orthonormal.max((e * eta * e.transpose() - eta).amax());
        let (kv, kt) = (t.null_vector(), t.ktilde);
        let mut sum = kv.to_vector() * kt.to_vector().transpose() + kt.to_vector() * kv.to_vector().transpose();
        for l in 0..2 {
            let p = t.polarization(l);
            sum -= p.to_vector() * p.to_vector().transpose();
            orthonormal = orthonormal.max(kv.dot(&p).abs()).max(kt.dot(&p).abs());
        }
        orthonormal = orthonormal.max(kv.dot(&kv).abs()).max(kt.dot(&kt).abs()).max((kv.dot(&kt) - 1.0).abs());
        complete = complete.max((sum - eta).amax());

        let phi = rng.random_range(-PI..PI);
        let rot = Sl2c::rotation(&Vector3::z(), phi).lorentz();
        let Ok(rotated) = helicity_tetrad(&kv.transform(&rot).spatial(), t.omega_s) else { continue };
        let (before, after) = (circular_basis(&t), circular_basis(&rotated));
        for (h, sign) in [(0, -1.0), (1, 1.0)] {
            let factor = Complex64::from_polar(1.0, sign * phi);
            for mu in 0..4 {
                let moved: Complex64 = (0..4).map(|nu| before[h][nu] * rot[(mu, nu)]).sum();
                phase = phase.max((moved - factor * after[h][mu]).norm());
            }
        }
    }
    vec![
        Check::below("tetrads", "null tetrad orthonormality", orthonormal, tol),
        Check::below("tetrads", "null tetrad completeness", complete, tol),
        Check::below("tetrads", "circular polarization phase under axial rotation", phase, tol),
    ]
}

fn random_element(rng: &mut ChaCha8Rng, n: usize, base: f64) -> Grassmann {
    Grassmann::from_terms(n, (0..1u32 << n).map(|m| (m, if m == 0 { base } else { rng.random_range(-1.0..1.0) })))
}

fn grassmann(setup: &Setup) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.seed);
    let tol = setup.config.tolerances.grassmann;
    let n = 4;
    let one = Grassmann::constant(n, 1.0);
    let (mut nilpotent, mut recip, mut sqrt, mut trig): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let q = Grassmann::generator(n, i).expect("index below n");
        nilpotent = nilpotent.max((&q * &q).max_abs());
        for j in 0..n {
            let r = Grassmann::generator(n, j).expect("index below n");
            nilpotent = nilpotent.max((&q * &r - &r * &q).max_abs());
        }
    }
    for _ in 0..50 {
        let body = rng.random_range(0.5..3.0);
        let x = random_element(&mut rng, n, body);
        let soul = x.correction();
        let top = (0..n).fold(soul.clone(), |acc, _| &acc * &soul);
        nilpotent = nilpotent.max(top.max_abs());
        let inv = x.recip().expect("invertible body");
        recip = recip.max((&x * &inv - &one).max_abs());
        let r = x.sqrt();
        sqrt = sqrt.max((&r * &r - &x).max_abs() / x.base());
        let (s, c) = (x.sin(), x.cos());
        trig = trig.max((&s * &s + &c * &c - &one).max_abs());
    }
    vec![
        Check::below("grassmann", "charges square to zero and commute", nilpotent, tol),
        Check::below("grassmann", "reciprocal inverts", recip, tol),
        Check::below("grassmann", "square root squares back", sqrt, tol),
        Check::below("grassmann", "sin² + cos² = 1", trig, tol),
    ]
}

fn lw(setup: &Setup) -> anyhow::Result<Vec<Check>> {
    let cfg = &setup.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let particles: Vec<ParticleInit> = if cfg.particles.is_empty() {
        (0..10)
            .map(|_| ParticleInit {
                eta: unit_vector(&mut rng) * rng.random_range(0.0..2.0),
                kappa: unit_vector(&mut rng) * rng.random_range(0.0..5.0),
                mass: rng.random_range(0.1..3.0),
            })
            .collect()
    } else {
        setup.particles()
    };
    let ks: Vec<Vector3<f64>> = if setup.radiation.grid.is_empty() {
        (0..100).map(|_| unit_vector(&mut rng) * 10f64.powf(rng.random_range(-1.0..1.0))).collect()
    } else {
        setup.radiation.grid.nodes().iter().map(|n| n.k).collect()
    };
    let (mut wave, mut transverse): (f64, f64) = (0.0, 0.0);
    for p in &particles {
        let pk = ParticleKinematics::new(p.eta, p.kappa, p.mass, cfg.c)?;
        for k in &ks {
            let f = lw_fourier(k, &pk)?;
            let scale = k.norm_squared() * f.potential.norm();
            if scale == 0.0 {
                continue;
            }
            wave = wave.max(lw_wave_residual(k, &pk)?.norm() / scale);
            let kc = k.map(|x| Complex64::new(x, 0.0));
            transverse = transverse.max(kc.dot(&f.potential).norm() / (k.norm() * f.potential.norm()));
        }
    }
    let tol = cfg.tolerances.wave_equation;
    Ok(vec![
        Check::below("lw", "wave equation residual of the Fourier potential", wave, tol),
        Check::below("lw", "transversality of the Fourier potential", transverse, tol),
    ])
}

fn canonicity(setup: &Setup, commuting: bool) -> anyhow::Result<Vec<Check>> {
    let s = setup.state(Frame::Original, commuting)?;
    let report = verify_canonicity(&s, &BracketOptions::default())?;
    let dev = report.max_deviation();
    let tol = setup.config.tolerances.canonicity;
    let name = if matches!(s.charge_model(), ChargeModel::Commuting(_)) {
        "bracket table with commuting charges (expected to fail)"
    } else {
        "bracket table of the dressed coordinates"
    };
    Ok(vec![Check::below("canonicity", name, dev, tol)])
}

fn generators(setup: &Setup, commuting: bool) -> anyhow::Result<Vec<Check>> {
    let tol = &setup.config.tolerances;
    let s = setup.state(Frame::Original, commuting)?;
    let hatted = forward_transform(&s)?;
    let cross = cross_terms(&hatted)?.max_abs();
    let o = internal_generators_original(&s)?.total;
    let h = internal_generators_hatted(&hatted, PairSums::ModeGrid, &PairRule::default())?.total;
    Ok(vec![
        Check::below("generators", "particle-radiation cross terms", cross, tol.cross_terms),
        Check::below("generators", "energy agrees across frames", (&o.energy - &h.energy).max_abs(), tol.frame_equivalence),
        Check::below(
            "generators",
            "momentum agrees across frames",
            (&o.momentum - &h.momentum).max_abs(),
            tol.frame_equivalence,
        ),
        Check::below(
            "generators",
            "angular momentum agrees across frames",
            (&o.angular_momentum - &h.angular_momentum).max_abs(),
            tol.frame_equivalence,
        ),
    ])
}

pub fn run(setup: &Setup, out: &Path, suites: &[Suite], commuting: bool) -> anyhow::Result<Status> {
    let mut selected = if suites.is_empty() { Suite::ALL.to_vec() } else { suites.to_vec() };
    selected.sort();
    selected.dedup();
    let mut checks = vec![];
    for suite in selected {
        log::info!("suite {}", suite.name());
        checks.extend(match suite {
            Suite::Tetrads => tetrads(setup),
            Suite::Grassmann => grassmann(setup),
            Suite::Lw => lw(setup)?,
            Suite::Canonicity => canonicity(setup, commuting)?,
            Suite::Generators => generators(setup, commuting)?,
            Suite::Limits => limits::checks(setup)?,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {} ({:e} against {:e})", c.suite, c.name, c.residual, c.tolerance);
    }
    write_toml(&out.join("verify_report.toml"), &VerifyReport { pass, checks })?;
    Ok(Status::from_pass(pass))
}
