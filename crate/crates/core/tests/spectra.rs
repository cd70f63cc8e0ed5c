mod common;

use std::sync::OnceLock;

use atomion::linalg::eigh;
use atomion::numerov::UnperturbedBasis;
use atomion::spectra::*;
use atomion::TrapConfig;
use common::{fd_richardson, ba_rb_basis, ba_rb_scaled};
use faer::Mat;

fn grid(d0: f64, d1: f64, step: f64) -> Vec<f64> {
    let n = ((d1 - d0) / step).round() as usize;
    (0..=n).map(|i| d0 + i as f64 * step).collect()
}

fn ba_rb_params() -> DriveParams {
    DriveParams { gamma: ba_rb_scaled().gamma, delta_d: 0.0, l_ac: 0.0 }
}

/// Ba⁺/Rb couplings on d ∈ [0, 10] at 0.01 l_i.
fn ba_rb_table() -> &'static (StaticSpectrum, CouplingTable) {
    static T: OnceLock<(StaticSpectrum, CouplingTable)> = OnceLock::new();
    T.get_or_init(|| coupling_strengths(ba_rb_basis(), &grid(0.0, 10.0, 0.01), ba_rb_params(), (-5, 110)).unwrap())
}

fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

#[test]
fn displaced_oscillator_without_interaction() {
    let b = UnperturbedBasis::harmonic_analytic(80);
    for d in [0.0, 1.5, 3.0] {
        let (w, _) = eigh(build_h0(&b, d).as_ref()).unwrap();
        for n in 0..10 {
            assert!((w[n] - (n as f64 + 0.5)).abs() < 1e-9, "d={d} n={n}: {}", w[n]);
        }
    }
    let h = build_h0(&b, 0.0);
    for i in 0..80 {
        for j in 0..80 {
            let want = if i == j { b.energies[i] } else { 0.0 };
            assert_eq!(h[(i, j)], want);
        }
    }
}

#[test]
fn flat_curves_and_no_resonances_without_interaction() {
    let b = UnperturbedBasis::harmonic_analytic(60);
    let spec = scan_spectrum(&b, &grid(0.0, 3.0, 0.1)).unwrap();
    for (di, e) in spec.energies.iter().enumerate() {
        for n in 0..8 {
            assert!((e[n] - (n as f64 + 0.5)).abs() < 1e-9);
            assert_eq!(spec.labels[di][n], n as i64);
        }
    }
    assert!(find_resonances(&spec, 12.7, (0.0, 3.0), None).is_empty());
    let p = DriveParams { gamma: 0.5f64.sqrt(), delta_d: 0.0, l_ac: 0.0 };
    let (_, t) = coupling_strengths(&b, &grid(0.0, 3.0, 0.1), p, (0, 40)).unwrap();
    assert_eq!(detect_dmm(&t, 0.05, 3), None);
}

#[test]
fn dc_shift_is_a_reparameterisation() {
    let b = ba_rb_basis();
    let dd = 0.7;
    for d in [2.0, 5.3, 8.0] {
        let a = build_h0_dc(b, d, dd);
        let mut c = build_h0(b, d + dd);
        for i in 0..b.dim() {
            c[(i, i)] -= 0.5 * dd * dd;
        }
        assert!(max_abs_diff(&a, &c) < 1e-10);
    }
}

#[test]
fn second_term_identity_on_the_harmonic_ladder() {
    // {X, P} from the ladder matrices against the commutator form of iV₂
    let n = 40;
    let b = UnperturbedBasis::harmonic_analytic(n);
    let g = 0.5f64.sqrt();
    let ip = ip_matrix(&b);
    let anti = &b.x * &ip + &ip * &b.x;
    let iv2 = iv2_matrix(&b, 0.0, g);
    let mut worst = 0.0f64;
    for i in 0..n - 2 {
        for j in 0..n - 2 {
            worst = worst.max((iv2[(i, j)] + g * anti[(i, j)]).abs());
        }
    }
    assert!(worst < 1e-10, "{worst}");
    // V₁ and iV₂ share the (X − d)² structure: (iV₂)_{nm} = −(E_n − E_m)(V₁)_{nm}/γ off the diagonal
    let pb = ba_rb_basis();
    let d = 4.0;
    let v1 = v1_matrix(pb, d, g);
    let iv2 = iv2_matrix(pb, d, g);
    for i in (0..pb.dim()).step_by(13) {
        for j in (0..pb.dim()).step_by(7) {
            if i == j {
                continue;
            }
            let want = -(pb.energies[i] - pb.energies[j]) * v1[(i, j)] / g;
            assert!((iv2[(i, j)] - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }
}

#[test]
fn far_trap_is_nearly_harmonic() {
    let s = ba_rb_scaled();
    let b = ba_rb_basis();
    let d = 9.0;
    let spec = scan_spectrum(b, &[d]).unwrap();
    let g = b.grid.as_ref().unwrap();
    let (x0, x1) = (g.x[0], *g.x.last().unwrap());
    let r2 = s.r * s.r;
    let idx: Vec<usize> = (0..4).map(|n| b.first_index + spec.position(0, n).unwrap()).collect();
    let fd = fd_richardson(move |x| 0.5 * (x - d).powi(2) - 0.5 * r2 / x.powi(4), x0, x1, 150_000, &idx, -6000.0, 200.0);
    for n in 0..4 {
        let e = spec.energy(0, n as i64).unwrap();
        assert!((e - (n as f64 + 0.5)).abs() < 0.05, "n={n}: {e}");
        assert!((e - fd[n]).abs() < 1e-3, "n={n}: basis {e} vs grid {}", fd[n]);
    }
}

#[test]
fn ground_level_drops_inside_characteristic_distance() {
    let (spec, _) = ba_rb_table();
    let e = spec.ground_energy();
    let at = |d: f64| e[spec.index_of(d).unwrap()];
    assert!((at(9.0) - 0.5).abs() < 0.05);
    assert!(at(7.0) - at(5.0) > 0.0);
    assert!(at(5.0) - at(3.0) > 2.0 * (at(7.0) - at(5.0)));
    // molecular gaps near the bottom dwarf the trap spacing
    let low = &spec.energies[0];
    assert!(low[1] - low[0] > 50.0);
}

#[test]
fn ba_rb_resonance_counts() {
    let (spec, _) = ba_rb_table();
    let res = find_resonances(spec, ba_rb_scaled().omega, (0.0, 7.0), None);
    let c1 = res.iter().filter(|r| r.order == 1).count() as i64;
    let c2 = res.iter().filter(|r| r.order == 2).count() as i64;
    assert!((c1 - 10).abs() <= 2, "{c1} ω resonances");
    assert!((c2 - 15).abs() <= 2, "{c2} 2ω resonances");
}

#[test]
fn synthetic_crossing_gives_one_resonance() {
    let omega = 3.0;
    let d_star = 1.234;
    let distances = grid(0.0, 2.0, 0.1);
    let energies: Vec<Vec<f64>> = distances.iter().map(|&d| vec![0.5, 0.5 + omega + 0.8 * (d - d_star)]).collect();
    let nd = distances.len();
    let spec = StaticSpectrum {
        distances,
        energies,
        labels: vec![vec![0, 1]; nd],
        tracks: vec![vec![0, 1]; nd],
        crossings: Vec::new(),
        delta_d: 0.0,
    };
    let r = find_resonances(&spec, omega, (0.0, 2.0), None);
    assert_eq!(r.len(), 1);
    assert_eq!((r[0].level, r[0].order), (1, 1));
    assert!((r[0].distance - d_star).abs() < 0.1);
}

#[test]
fn couplings_follow_harmonic_selection_far_out() {
    let (_, t) = ba_rb_table();
    let k = t.nearest(9.0).unwrap();
    for (c, &l) in t.levels.iter().enumerate() {
        if l > 2 {
            assert!(t.v1[k][c] < 1e-2 && t.v2[k][c] < 1e-2, "level {l}: {} {}", t.v1[k][c], t.v2[k][c]);
        }
    }
    let c2 = t.column(2).unwrap();
    assert!(t.v1[k][c2] > 0.1, "⟨0|V₁|2⟩ stays allowed");
}

#[test]
fn strong_coupling_to_high_level_at_short_distance() {
    let (_, t) = ba_rb_table();
    let k = t.nearest(5.3).unwrap();
    let c = t.column(100).unwrap();
    let v2 = t.v2[k][c];
    assert!(v2 > 0.1 / 3.0 && v2 < 0.3, "|⟨0|V₂|100⟩| = {v2}");
    assert!(t.v1[k][c] < 0.1 * v2);
}

#[test]
fn stray_field_shifts_coupling_rise() {
    let b = ba_rb_basis();
    let d_grid = grid(3.0, 9.0, 0.01);
    let mut cfg = TrapConfig::ba_rb();
    cfg.e_dc = 0.01;
    let dd = cfg.scaled().unwrap().delta_d;
    let (_, t0) = coupling_strengths(b, &d_grid, ba_rb_params(), (-5, 110)).unwrap();
    let p = DriveParams { delta_d: dd, ..ba_rb_params() };
    let (_, t1) = coupling_strengths(b, &d_grid, p, (-5, 110)).unwrap();
    let a = detect_dmm(&t0, 0.05, 3).unwrap();
    let c = detect_dmm(&t1, 0.05, 3).unwrap();
    assert!(((a - c) - dd).abs() < 0.03, "shift {} vs δd {dd}", a - c);
}

#[test]
fn molecular_transition_under_field() {
    let s = ba_rb_scaled();
    let cfg = TrapConfig::ba_rb();
    let l_i = cfg.derived_lengths().unwrap().l_i;
    let spec = scan_spectrum(ba_rb_basis(), &grid(6.0, 10.0, 0.05)).unwrap();
    let fc = field_coupling(ba_rb_basis(), &spec, 6.0, 200.0, l_i).unwrap();
    assert!((fc.omega_f - 62.0).abs() < 15.0, "ω_f = {}", fc.omega_f);
    assert!(fc.dipole > 1.3e-4 / 3.0 && fc.dipole < 3.0 * 1.3e-4, "{}", fc.dipole);
    let f_mhz = fc.rabi / (2.0 * std::f64::consts::PI) / 1e6;
    assert!(f_mhz > 0.1 && f_mhz < 10.0, "{f_mhz} MHz");
    let zero = field_coupling(ba_rb_basis(), &spec, 6.0, 0.0, l_i).unwrap();
    assert_eq!(zero.rabi, 0.0);
    assert!(field_coupling(ba_rb_basis(), &spec, 6.01, 1.0, l_i).is_err());
    let _ = s;
}

#[test]
fn centre_of_mass_couplings() {
    let g = 0.5f64.sqrt();
    let c = cm_rel_couplings(g, 2, 0);
    assert!((c.x2 - 2f64.sqrt() / 4.0).abs() < 1e-15);
    assert_eq!(cm_rel_couplings(g, 2, 1), CmCouplings { x2: 0.0, anticommutator: 0.0 });
    assert_eq!(cm_rel_couplings(g, 5, 0), CmCouplings { x2: 0.0, anticommutator: 0.0 });
    assert!((sideband_detuning(11.7, 12.7)).abs() < 1e-15);
}
