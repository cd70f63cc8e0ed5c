use atomion::adiabatic::{extract_avoided_crossings, gate_fidelity, landau_zener, GatePhaseSet};
use atomion::floquet::{build_floquet_matrix, diagonalize_floquet, reduce, zone_distance, FloquetSpectrum};
use atomion::propagator::{propagate_one_period, PropagatorResult};
use atomion::single_ion::{mathieu_floquet, mean_kinetic_energy, periodic_solution};
use atomion::spectra::{coupling_strengths, detect_dmm, find_resonances, scan_spectrum_with, DriveParams};
use atomion::{PeriodicHamiltonian, UnperturbedBasis};
use rayon::prelude::*;
use serde::Serialize;

use crate::run::{d_grid, fmt, steps, CliError, Result, Run, Setup, MAX_FLOQUET_DIM};
use crate::{Common, Engine, QuasiEngine};

const DMM_N_MIN: i64 = 3;
/// Engine agreement asked of `spectrum --engine both`.
const AGREEMENT_TOL: f64 = 1e-4;

fn grid_params(c: &Common) -> Vec<(&'static str, String)> {
    vec![("d_min", fmt(c.d_min)), ("d_max", fmt(c.d_max)), ("d_step", fmt(c.d_step)), ("ne", c.ne.to_string())]
}

fn drive(setup: &Setup) -> DriveParams {
    let s = &setup.scaled;
    DriveParams { gamma: s.gamma, delta_d: s.delta_d, l_ac: s.l_ac }
}

fn check_floquet_size(c: &Common) -> Result<()> {
    let dim = c.ne * (2 * c.nf + 1);
    if dim > MAX_FLOQUET_DIM {
        return Err(CliError::Scope(format!(
            "Floquet matrix of dimension {dim} exceeds {MAX_FLOQUET_DIM}; lower --ne or --nf, or use the propagator"
        )));
    }
    Ok(())
}

struct Quasi {
    floquet: Option<FloquetSpectrum>,
    propagator: Option<PropagatorResult>,
}

fn quasienergies(
    basis: &UnperturbedBasis,
    setup: &Setup,
    grid: &[f64],
    nf: Option<usize>,
    steps: Option<usize>,
    include_v2: bool,
    zone_center: f64,
) -> Result<Vec<Quasi>> {
    let p = drive(setup);
    let omega = setup.scaled.omega;
    let out = grid
        .par_iter()
        .map(|&d| -> atomion::Result<Quasi> {
            let ham = PeriodicHamiltonian::atom_ion(basis, d, omega, p, include_v2);
            let floquet = match nf {
                Some(nf) => Some(diagonalize_floquet(&build_floquet_matrix(&ham, nf)?, zone_center)?),
                None => None,
            };
            let propagator = match steps {
                Some(s) => Some(propagate_one_period(&ham, s)?),
                None => None,
            };
            Ok(Quasi { floquet, propagator })
        })
        .collect::<atomion::Result<Vec<_>>>()?;
    Ok(out)
}

#[derive(Serialize)]
struct DistanceAgreement {
    d: f64,
    max_dev: f64,
    /// same, restricted to classes with negligible weight in the outermost modes
    converged_max_dev: Option<f64>,
    compared: usize,
}

pub fn spectrum(c: &Common, engine: Engine, first_term_only: bool, zone_center: f64, compare: usize) -> Result<()> {
    let setup = Setup::load(c)?;
    let grid = d_grid(c)?;
    let figure = match engine {
        Engine::Static => "fig3",
        _ if first_term_only => "fig7",
        _ => "fig6",
    };
    let use_floquet = matches!(engine, Engine::Floquet | Engine::Both);
    let use_prop = matches!(engine, Engine::Propagator | Engine::Both);
    let mut params = grid_params(c);
    params.push(("engine", format!("{engine:?}").to_lowercase()));
    if engine != Engine::Static {
        params.push(("first_term_only", first_term_only.to_string()));
        params.push(("zone_center", fmt(zone_center)));
    }
    if use_floquet {
        params.push(("nf", c.nf.to_string()));
        check_floquet_size(c)?;
    }
    if use_prop {
        params.push(("steps", steps(c)?.to_string()));
    }
    if engine == Engine::Both {
        params.push(("compare", compare.to_string()));
    }
    let mut run = Run::start(c, Some(&setup), "spectrum", Some(figure), &params)?;
    let basis = setup.basis(c)?;
    let omega = setup.scaled.omega;

    if engine == Engine::Static {
        let spec = scan_spectrum_with(&basis, &grid, setup.scaled.delta_d, |_| {})?;
        let rows = spec.distances.iter().enumerate().flat_map(|(i, &d)| {
            let spec = &spec;
            (0..spec.energies[i].len()).map(move |k| {
                vec![fmt(d), spec.labels[i][k].to_string(), spec.tracks[i][k].to_string(), fmt(spec.energies[i][k])]
            })
        });
        run.csv("spectrum_static.csv", &["d", "label", "track", "energy"], rows)?;
        run.meta("ambiguous_continuations", spec.crossings.len());
        return run.finish();
    }

    let q = quasienergies(
        &basis,
        &setup,
        &grid,
        use_floquet.then_some(c.nf),
        if use_prop { Some(steps(c)?) } else { None },
        !first_term_only,
        zone_center,
    )?;

    if use_floquet {
        let mut rows = Vec::new();
        let (mut edge, mut unmatched) = (0.0f64, 0usize);
        for (&d, r) in grid.iter().zip(&q) {
            let f = r.floquet.as_ref().unwrap();
            unmatched += f.unmatched;
            for (k, cl) in f.classes.iter().enumerate() {
                edge = edge.max(cl.edge_weight);
                rows.push(vec![
                    fmt(d),
                    k.to_string(),
                    fmt(cl.quasienergy),
                    cl.dominant_n.to_string(),
                    cl.dominant_k.to_string(),
                    fmt(cl.k0_weight),
                    fmt(cl.edge_weight),
                ]);
            }
        }
        run.csv(
            "spectrum_floquet.csv",
            &["d", "class", "quasienergy", "dominant_n", "dominant_k", "k0_weight", "edge_weight"],
            rows,
        )?;
        run.meta("floquet.max_edge_weight", fmt(edge));
        run.meta("floquet.unmatched_vectors", unmatched);
    }
    if use_prop {
        let mut rows = Vec::new();
        let mut resid = 0.0f64;
        for (&d, r) in grid.iter().zip(&q) {
            let p = r.propagator.as_ref().unwrap();
            resid = resid.max(p.unitarity_residual);
            for (k, ph) in p.phases.iter().enumerate() {
                rows.push(vec![
                    fmt(d),
                    k.to_string(),
                    fmt(reduce(ph.quasienergy, omega, zone_center)),
                    ph.dominant_n.to_string(),
                    fmt(ph.overlap),
                ]);
            }
        }
        run.csv("spectrum_propagator.csv", &["d", "index", "quasienergy", "dominant_n", "overlap"], rows)?;
        run.meta("propagator.max_unitarity_residual", fmt(resid));
    }
    if engine == Engine::Both {
        let mut rows = Vec::new();
        let mut per_d = Vec::new();
        for (&d, r) in grid.iter().zip(&q) {
            let (f, p) = (r.floquet.as_ref().unwrap(), r.propagator.as_ref().unwrap());
            let mut classes: Vec<_> = f.classes.iter().collect();
            classes.sort_by(|a, b| a.quasienergy.abs().total_cmp(&b.quasienergy.abs()));
            let (mut worst, mut conv) = (0.0f64, None::<f64>);
            for (rank, cl) in classes.iter().take(compare).enumerate() {
                let (best, dev) = p
                    .phases
                    .iter()
                    .map(|ph| (ph.quasienergy, zone_distance(ph.quasienergy, cl.quasienergy, omega)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap_or((f64::NAN, f64::INFINITY));
                worst = worst.max(dev);
                if cl.edge_weight < 1e-8 {
                    conv = Some(conv.unwrap_or(0.0).max(dev));
                }
                rows.push(vec![
                    fmt(d),
                    rank.to_string(),
                    fmt(cl.quasienergy),
                    fmt(reduce(best, omega, zone_center)),
                    fmt(dev),
                    fmt(cl.edge_weight),
                    cl.dominant_n.to_string(),
                ]);
            }
            per_d.push(DistanceAgreement { d, max_dev: worst, converged_max_dev: conv, compared: compare.min(classes.len()) });
        }
        run.csv(
            "agreement.csv",
            &["d", "rank", "floquet", "propagator", "deviation", "edge_weight", "dominant_n"],
            rows,
        )?;
        let max_dev = per_d.iter().map(|a| a.max_dev).fold(0.0, f64::max);
        run.json(
            "agreement.json",
            serde_json::json!({
                "tolerance": AGREEMENT_TOL,
                "max_dev": max_dev,
                "agree": max_dev < AGREEMENT_TOL,
                "distances": per_d,
            }),
        )?;
        run.meta("agreement.max_dev", fmt(max_dev));
        if max_dev >= AGREEMENT_TOL {
            run.warn(format!("engines differ by {max_dev:.3e} ħω₀; raise --nf or lower --dt"));
        }
    }
    run.finish()
}

pub fn couplings(c: &Common, n_min: i64, n_max: i64) -> Result<()> {
    if n_min > n_max {
        return Err(CliError::Config(format!("empty level range {n_min}..{n_max}")));
    }
    let setup = Setup::load(c)?;
    let grid = d_grid(c)?;
    let threshold = c.threshold.unwrap_or(0.05);
    let p = drive(&setup);
    let figure = if p.delta_d != 0.0 || p.l_ac != 0.0 { "fig8" } else { "fig5" };
    let mut params = grid_params(c);
    params.extend([("n_min", n_min.to_string()), ("n_max", n_max.to_string()), ("threshold", fmt(threshold))]);
    let mut run = Run::start(c, Some(&setup), "couplings", Some(figure), &params)?;
    let basis = setup.basis(c)?;
    let (_, t) = coupling_strengths(&basis, &grid, p, (n_min, n_max))?;

    let mut header = vec!["d", "level", "track", "v1", "v2", "v2_direct"];
    if t.v3.is_some() {
        header.extend(["v3", "v4"]);
    }
    let mut rows = Vec::new();
    for (i, &d) in t.distances.iter().enumerate() {
        for (k, &level) in t.levels.iter().enumerate() {
            let mut r = vec![
                fmt(d),
                level.to_string(),
                t.tracks[i][k].to_string(),
                fmt(t.v1[i][k]),
                fmt(t.v2[i][k]),
                fmt(t.v2_direct[i][k]),
            ];
            if let (Some(v3), Some(v4)) = (&t.v3, &t.v4) {
                r.extend([fmt(v3[i][k]), fmt(v4[i][k])]);
            }
            rows.push(r);
        }
    }
    run.csv("couplings.csv", &header, rows)?;
    let dmm = detect_dmm(&t, threshold, DMM_N_MIN);
    let route = t.route_residual.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    run.json(
        "couplings.json",
        serde_json::json!({ "d_mm": dmm, "threshold": threshold, "n_min": DMM_N_MIN, "max_v2_route_residual": route }),
    )?;
    run.meta("v2_route_residual", fmt(route));
    run.finish()
}

pub fn resonances(c: &Common) -> Result<()> {
    let setup = Setup::load(c)?;
    let grid = d_grid(c)?;
    let mut run = Run::start(c, Some(&setup), "resonances", Some("fig4"), &grid_params(c))?;
    let basis = setup.basis(c)?;
    let max_level = basis.dim() as i64;
    let (spec, table) = coupling_strengths(&basis, &grid, drive(&setup), (0, max_level))?;
    let res = find_resonances(&spec, setup.scaled.omega, (c.d_min, c.d_max), Some(&table));
    let rows = res.iter().map(|r| {
        vec![
            r.order.to_string(),
            r.level.to_string(),
            fmt(r.distance),
            r.coupling.map_or(String::new(), fmt),
            r.low_confidence.to_string(),
        ]
    });
    run.csv("resonances.csv", &["order", "level", "distance", "coupling", "low_confidence"], rows)?;
    let count = |o| res.iter().filter(|r| r.order == o).count();
    run.json(
        "resonances.json",
        serde_json::json!({
            "range": [c.d_min, c.d_max],
            "omega_resonances": count(1),
            "two_omega_resonances": count(2),
            "low_confidence": res.iter().filter(|r| r.low_confidence).count(),
        }),
    )?;
    run.finish()
}

pub fn crossings(c: &Common, engine: QuasiEngine, first_term_only: bool, rate: f64) -> Result<()> {
    if !(rate > 0.0) {
        return Err(CliError::Config(format!("--rate {rate} must be positive")));
    }
    let setup = Setup::load(c)?;
    let grid = d_grid(c)?;
    let threshold = c.threshold.unwrap_or(0.05);
    let mut params = grid_params(c);
    params.push(("engine", format!("{engine:?}").to_lowercase()));
    params.push(("first_term_only", first_term_only.to_string()));
    params.push(("threshold", fmt(threshold)));
    params.push(("rate", fmt(rate)));
    let floquet = engine == QuasiEngine::Floquet;
    if floquet {
        check_floquet_size(c)?;
        params.push(("nf", c.nf.to_string()));
    } else {
        params.push(("steps", steps(c)?.to_string()));
    }
    let figure = if first_term_only { "fig7" } else { "fig6" };
    let mut run = Run::start(c, Some(&setup), "crossings", Some(figure), &params)?;
    let basis = setup.basis(c)?;
    let omega = setup.scaled.omega;
    let q = quasienergies(
        &basis,
        &setup,
        &grid,
        floquet.then_some(c.nf),
        if floquet { None } else { Some(steps(c)?) },
        !first_term_only,
        0.0,
    )?;
    let bands: Vec<Vec<f64>> = q
        .iter()
        .map(|r| {
            let mut b = match (&r.floquet, &r.propagator) {
                (Some(f), _) => f.quasienergies(),
                (_, Some(p)) => p.quasienergies(),
                _ => unreachable!(),
            };
            for e in &mut b {
                *e = reduce(*e, omega, 0.0);
            }
            b.sort_by(f64::total_cmp);
            b
        })
        .collect();
    let found = extract_avoided_crossings(&grid, &bands, omega, threshold)?;
    #[derive(Serialize)]
    struct Row<'a> {
        #[serde(flatten)]
        crossing: &'a atomion::adiabatic::AvoidedCrossing,
        p_lz: Option<f64>,
    }
    let rows: Vec<Row> = found.iter().map(|x| Row { crossing: x, p_lz: landau_zener(x, rate).ok() }).collect();
    run.meta("crossings", rows.len());
    run.json(
        "crossings.json",
        serde_json::json!({ "threshold": threshold, "rate": rate, "crossings": rows }),
    )?;
    run.finish()
}

pub fn single_ion(c: &Common, levels: usize, samples: usize, nm: usize) -> Result<()> {
    let setup = Setup::load(c)?;
    let s = setup.scaled;
    let params = [("levels", levels.to_string()), ("samples", samples.to_string()), ("nm", nm.to_string())];
    let mut run = Run::start(c, Some(&setup), "single-ion", None, &params)?;
    let sol = mathieu_floquet(setup.cfg.a, setup.cfg.q, s.omega, nm)?;
    let drive = periodic_solution(&sol, s.delta_d, s.omega * s.l_ac)?;
    let rows = (0..levels).map(|n| {
        let bare = mean_kinetic_energy(&sol, None, n);
        let ke = mean_kinetic_energy(&sol, Some(&drive), n);
        vec![
            n.to_string(),
            fmt(sol.quasienergy(n)),
            fmt(reduce(sol.quasienergy(n), s.omega, 0.0)),
            fmt(ke),
            fmt(ke - bare),
        ]
    });
    run.csv("single_ion_levels.csv", &["n", "quasienergy", "reduced", "kinetic", "excess_kinetic"], rows)?;
    let period = 2.0 * std::f64::consts::PI / s.omega;
    let traj = (0..samples).map(|i| {
        let t = period * i as f64 / samples as f64;
        vec![fmt(t), fmt(drive.x_p(t)), fmt(drive.v_p(t))]
    });
    run.csv("single_ion_trajectory.csv", &["t", "x_p", "v_p"], traj)?;
    run.json(
        "single_ion.json",
        serde_json::json!({
            "a": sol.a, "q": sol.q, "omega": sol.omega,
            "mu": sol.mu, "nu": sol.nu, "mu_correction": sol.mu - 1.0,
            "delta_d": s.delta_d, "l_ac": s.l_ac,
            "mean_v_sq": drive.mean_v_sq(),
        }),
    )?;
    run.meta("wronskian_drift", fmt((sol.wronskian(0.3 * period) - sol.wronskian(0.0)).norm()));
    run.finish()
}

pub fn fidelity(c: &Common, alpha: &[f64], p_e: f64) -> Result<()> {
    let alpha: [f64; 4] = alpha
        .try_into()
        .map_err(|_| CliError::Config(format!("--alpha needs four phases, got {}", alpha.len())))?;
    let params = [
        ("alpha", alpha.map(fmt).join(",")),
        ("p_e", fmt(p_e)),
        ("seed", c.seed.to_string()),
    ];
    let mut run = Run::start(c, None, "fidelity", None, &params)?;
    let g = gate_fidelity(&GatePhaseSet::from_alpha(alpha, p_e), c.seed)?;
    for w in &g.warnings {
        run.warn(w.clone());
    }
    run.json("fidelity.json", &g)?;
    run.finish()
}
