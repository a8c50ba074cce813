//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zk_core::config::{parse_override, ExperimentConfig, Preset};
use zk_core::diagnostics::{friedrichs_min_rayleigh, rayleigh_quotient};
use zk_core::forcing::NoForcing;
use zk_core::linear::{picard_iterate, DEFAULT_DUHAMEL_NODES};
use zk_core::nonlinearity::{g_h_eval, g_h_prime, TruncatedFlux};
use zk_core::runner::{run_experiment, Outcome};
use zk_core::solver::{run, SolverConfig};
use zk_core::{DomainSpec, Field, SpectralGrid};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn preset(p: Preset, overrides: &[&str]) -> Outcome {
    let ov: Vec<_> = overrides.iter().map(|s| parse_override(s).unwrap()).collect();
    let cfg = ExperimentConfig::parse_with_overrides(&format!("preset = \"{}\"", p.name()), &ov).unwrap();
    run_experiment(&cfg, None).unwrap()
}

fn num(out: &Outcome, key: &str) -> f64 {
    out.number(key).unwrap_or_else(|| panic!("report has no numeric {key}"))
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let dv = a.domain().cell_volume();
    (a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * dv).sqrt()
}

fn linear_conservation() -> Verdict {
    let out = preset(Preset::LinearDispersion, &[]);
    let drift = num(&out, "l2_drift");
    check(drift <= 1e-12, format!("relative L2 drift {drift:.2e} (tol 1e-12)"))
}

fn nonlinear_conservation() -> Verdict {
    let out = preset(Preset::Conservation, &[]);
    let (m, e, peak) = (num(&out, "mass_drift"), num(&out, "energy_drift"), num(&out, "max_abs"));
    check(
        m <= 1e-6 && e <= 1e-4 && (0.9..=1.1).contains(&peak),
        format!("mass drift {m:.2e} (tol 1e-6), energy drift {e:.2e} (tol 1e-4), max|u| {peak:.3}"),
    )
}

fn temporal_order() -> Verdict {
    let x_half = 2.0 * PI;
    let dom = DomainSpec::new(PI, PI, x_half, 32, 8, 8).unwrap();
    let grid = SpectralGrid::new(dom).unwrap();
    let u0 = Field::from_fn(dom, |x, y, z| (PI * x / x_half).cos() * y.sin() * z.sin()).unwrap();
    let solve = |dt: f64| {
        let mut c = SolverConfig::regularized(0.0, 0.0, dt, 1.0).with_stride(usize::MAX);
        c.enforce_seam_guard = false;
        run(&grid, &u0, &c, &NoForcing).unwrap().u
    };
    let reference = solve(1e-4);
    let dts = [1e-2, 5e-3, 2.5e-3];
    let errs: Vec<f64> = dts.iter().map(|&dt| l2_distance(&solve(dt), &reference)).collect();
    // least-squares slope of log error against log dt
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    check(
        (slope - 4.0).abs() <= 0.3,
        format!("slope {slope:.3} (4 ± 0.3), errors {:.2e} {:.2e} {:.2e}", errs[0], errs[1], errs[2]),
    )
}

fn g_h_contract() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_table = 0.0f64;
    let mut fails = Vec::new();
    for h in [1.0, 0.5, 0.2, 0.1, 0.05] {
        let t = TruncatedFlux::new(h).unwrap();
        for i in 0..=1000 {
            let u = (2.0 * i as f64 / 1000.0 - 1.0) / h;
            if t.g(u) != 0.5 * u * u {
                fails.push(format!("h={h}: g({u}) not quadratic"));
                break;
            }
        }
        for _ in 0..200_000 {
            let u: f64 = rng.random_range(-4.0 / h..4.0 / h);
            let d = g_h_prime(u, h).unwrap();
            if d.abs() > 2.0 / h * (1.0 + 1e-14) || d.abs() > 2.0 * u.abs() * (1.0 + 1e-14) {
                fails.push(format!("h={h}: |g'({u})| = {d}"));
                break;
            }
        }
        for i in 0..=400 {
            let u = (1.0 + i as f64 / 400.0) / h;
            worst_table = worst_table.max((t.g(u) - g_h_eval(u, h).unwrap()).abs());
        }
    }
    fails.truncate(3);
    check(
        fails.is_empty() && worst_table <= 1e-10,
        format!("1e6 derivative samples, table error {worst_table:.2e} (tol 1e-10) {}", fails.join("; ")),
    )
}

fn h_sweep() -> Verdict {
    let out = preset(Preset::HSweep, &[]);
    let res = num(&out, "max_residual");
    let cauchy = out.flag("cauchy") == Some(true);
    check(
        res <= 1e-6 && cauchy,
        format!(
            "max identity residual {res:.2e} (tol 1e-6), distances {} / {}, decreasing {cauchy}",
            out.get("distance[h=0.2,h=0.1]").unwrap_or("?"),
            out.get("distance[h=0.1,h=0.05]").unwrap_or("?")
        ),
    )
}

fn picard() -> Verdict {
    let dom = DomainSpec::new(PI, PI, 16.0, 64, 16, 16).unwrap();
    let grid = SpectralGrid::new(dom).unwrap();
    // peak 15 > 1/h so the truncation is active
    let u0 = Field::from_fn(dom, |x, y, z| 15.0 * (-(x / 3.0).powi(2)).exp() * y.sin() * z.sin()).unwrap();
    let cfg = SolverConfig::regularized(0.0, 0.1, 1e-3, 1e-3);
    let stepped = run(&grid, &u0, &cfg, &NoForcing).unwrap().u;
    let g = cfg.nonlinearity().unwrap();
    let p = picard_iterate(&grid, &u0, &NoForcing, &cfg.params, &g, 4, 1e-3, DEFAULT_DUHAMEL_NODES).unwrap();
    let gap = l2_distance(&grid.to_physical(&p.field).unwrap(), &grid.to_physical(&stepped).unwrap());
    let monotone = p.differences.windows(2).all(|w| w[1] < w[0]);
    let diffs: Vec<String> = p.differences.iter().map(|d| format!("{d:.1e}")).collect();
    check(
        gap <= 1e-6 && monotone,
        format!("gap {gap:.2e} (tol 1e-6), iterate differences [{}]", diffs.join(", ")),
    )
}

fn friedrichs() -> Verdict {
    let mut worst = 0.0f64;
    let mut weaker = true;
    for (l1, l2) in [(PI, PI), (1.0, 1.0), (2.0, 1.0), (PI, 0.5), (3.0, 7.0)] {
        let dom = DomainSpec::new(l1, l2, 4.0, 16, 12, 10).unwrap();
        let grid = SpectralGrid::new(dom).unwrap();
        let exact = PI * PI * (1.0 / (l1 * l1) + 1.0 / (l2 * l2));
        let phi = Field::from_fn(dom, |x, y, z| {
            (-(x * x)).exp() * (PI * y / l1).sin() * (PI * z / l2).sin()
        })
        .unwrap();
        let computed = rayleigh_quotient(&grid, &phi).unwrap();
        let r = friedrichs_min_rayleigh(&dom);
        worst = worst.max((computed - exact).abs() / exact).max((r.min_rayleigh - exact).abs() / exact);
        weaker &= r.crude_constant >= r.sharp_constant && (r.sharp_constant - 1.0 / exact.sqrt()).abs() < 1e-14;
    }
    check(
        worst <= 1e-12 && weaker,
        format!("max relative error {worst:.2e} (tol 1e-12), crude constant weaker {weaker}"),
    )
}

fn linear_decay() -> Verdict {
    let out = preset(Preset::DecaySweep, &[]);
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.05, 0.1, 0.2] {
        let l = format!("alpha={alpha}");
        let rate = num(&out, &format!("fitted_rate[{l}]"));
        let bound = 0.95 * 2.0 * alpha * (2.0 - 4.0 * alpha * alpha);
        let mono = out.flag(&format!("nonincreasing[{l}]")) == Some(true);
        ok &= rate >= bound && mono && out.get(&format!("status[{l}]")) == Some("valid");
        parts.push(format!("α={alpha}: {rate:.4} ≥ {bound:.4} nonincreasing {mono}"));
    }
    check(ok, parts.join("; "))
}

fn nonlinear_decay() -> Verdict {
    let out = preset(
        Preset::DecaySweep,
        &[
            "domain.x_half=128.0",
            "domain.nx=512",
            "domain.ny=6",
            "domain.nz=6",
            "solver.flux=\"quadratic\"",
            "initial_condition.center=64.0",
            "initial_condition.l2_norm=0.05",
            "experiment.window=112.0",
            "experiment.alphas=[0.1]",
        ],
    );
    let rate = num(&out, "fitted_rate[alpha=0.1]");
    let mono = out.flag("nonincreasing[alpha=0.1]") == Some(true);
    let status = out.get("status[alpha=0.1]").unwrap_or("?").to_string();
    check(
        rate > 0.0 && mono && status == "valid",
        format!("fitted rate {rate:.4}, nonincreasing {mono}, status {status}"),
    )
}

fn interpolation_audit() -> Verdict {
    let out = preset(Preset::InterpolationAudit, &[]);
    let change = num(&out, "max_change");
    let finite = out
        .entries
        .iter()
        .filter(|(k, _)| k.starts_with("max_ratio"))
        .all(|(_, v)| v.parse::<f64>().is_ok_and(|x| x.is_finite() && x > 0.0));
    check(
        change < 0.05 && finite,
        format!("largest change on doubling {:.2}% (tol 5%), all maxima finite {finite}", 100.0 * change),
    )
}

fn continuous_dependence() -> Verdict {
    let out = preset(Preset::Perturbation, &[]);
    let spread = num(&out, "ratio_spread");
    let max = num(&out, "ratio_max");
    check(
        spread < 0.2 && max.is_finite(),
        format!("ratio spread {:.2}% (tol 20%), max ratio {max:.4}", 100.0 * spread),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("linear conservation", linear_conservation),
        ("nonlinear conservation laws", nonlinear_conservation),
        ("temporal order", temporal_order),
        ("truncated flux contract", g_h_contract),
        ("regularized L2 identity and h-sweep", h_sweep),
        ("Picard cross-check", picard),
        ("Friedrichs constant", friedrichs),
        ("linear decay rate", linear_decay),
        ("nonlinear small-data decay", nonlinear_decay),
        ("interpolation audit", interpolation_audit),
        ("continuous dependence", continuous_dependence),
    ];
    let results: Vec<(Verdict, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, f)| {
                s.spawn(move || {
                    let t0 = Instant::now();
                    let v = std::panic::catch_unwind(f).unwrap_or_else(|e| {
                        let msg = e
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_default();
                        Err(format!("panicked: {msg}"))
                    });
                    (v, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (v, secs))) in criteria.iter().zip(&results).enumerate() {
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
