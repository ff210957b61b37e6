use std::path::Path;

use serde::Serialize;

use restframe::dynamics::{nr_limit_report, NrLimitReport, NrRow};
use restframe::pair_integrals::PairRule;

use crate::config::Setup;
use crate::report::{num, write_toml, Check, Status};

const EXPECTED_ORDER: f64 = -2.0;

/// Fitted order of one quantity, or `None` when it vanishes at every `c`.
#[derive(Debug, Serialize)]
struct Order {
    applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct LimitsReport {
    c_values: Vec<f64>,
    expected_order: f64,
    tolerance: f64,
    energy: Order,
    darwin: Order,
    boost: Order,
    pass: bool,
}

struct Fitted {
    report: NrLimitReport,
    /// `(name, order)` with `None` for quantities that vanish identically.
    orders: [(&'static str, Option<f64>); 3],
}

fn fit(setup: &Setup) -> anyhow::Result<Option<Fitted>> {
    let cfg = &setup.config;
    if cfg.particles.is_empty() {
        return Ok(None);
    }
    let particles = setup.particles();
    let report = nr_limit_report(&particles, &setup.charges(), &cfg.limits.c_values, &PairRule::default())?;
    // Roundoff floors: rest energy for the energy residual, Σm|η| for the
    // boost residual, exact zero for the Darwin term (it carries e_i e_j).
    let c_max = cfg.limits.c_values.iter().copied().fold(0.0, f64::max);
    let rest: f64 = particles.iter().map(|p| p.mass * c_max * c_max).sum();
    let lever: f64 = particles.iter().map(|p| p.mass * p.eta.norm()).sum::<f64>() + 1.0;
    let rows = &report.rows;
    let vanishes = |f: fn(&NrRow) -> f64, scale: f64| rows.iter().all(|r| f(r).abs() <= 64.0 * f64::EPSILON * scale);
    let energy_zero = vanishes(|r| r.energy_residual, rest);
    let darwin_zero = vanishes(|r| r.darwin_scaled - r.darwin_limit, 0.0);
    let boost_zero = vanishes(|r| r.boost_residual, lever);
    let orders = [
        ("energy residual", (!energy_zero).then_some(report.energy_order)),
        ("c² Darwin term against its limit", (!darwin_zero).then_some(report.darwin_order)),
        ("boost against the mass centroid", (!boost_zero).then_some(report.boost_order)),
    ];
    Ok(Some(Fitted { report, orders }))
}

fn order_ok(order: Option<f64>, tol: f64) -> bool {
    order.is_none_or(|o| (o - EXPECTED_ORDER).abs() < tol)
}

/// Checks for the verify report; quantities that vanish identically are
/// left out.
pub fn checks(setup: &Setup) -> anyhow::Result<Vec<Check>> {
    let tol = setup.config.tolerances.nr_order;
    let Some(f) = fit(setup)? else {
        log::warn!("limits suite skipped: no particles configured");
        return Ok(vec![]);
    };
    Ok(f.orders
        .iter()
        .filter_map(|(name, o)| {
            o.map(|o| Check::below("limits", &format!("order of the {name} in c"), (o - EXPECTED_ORDER).abs(), tol))
        })
        .collect())
}

pub fn run(setup: &Setup, out: &Path) -> anyhow::Result<Status> {
    let tol = setup.config.tolerances.nr_order;
    let Some(f) = fit(setup)? else {
        anyhow::bail!("the limits workflow needs at least one particle");
    };
    let mut w = csv::Writer::from_path(out.join("limits.csv"))?;
    w.write_record(["c", "energy_residual", "energy_prediction", "darwin_scaled", "darwin_limit", "boost_residual"])?;
    for r in &f.report.rows {
        let v = [r.c, r.energy_residual, r.energy_prediction, r.darwin_scaled, r.darwin_limit, r.boost_residual];
        w.write_record(v.map(num))?;
    }
    w.flush()?;

    let order = |o: Option<f64>| Order { applicable: o.is_some(), order: o, pass: order_ok(o, tol) };
    let [e, d, b] = f.orders.map(|(_, o)| order(o));
    let pass = e.pass && d.pass && b.pass;
    write_toml(
        &out.join("limits_report.toml"),
        &LimitsReport {
            c_values: setup.config.limits.c_values.clone(),
            expected_order: EXPECTED_ORDER,
            tolerance: tol,
            energy: e,
            darwin: d,
            boost: b,
            pass,
        },
    )?;
    Ok(Status::from_pass(pass))
}
