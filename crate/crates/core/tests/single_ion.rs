mod common;

use std::f64::consts::PI;

use atomion::single_ion::*;
use atomion::C64;
use common::{mathieu_fdot_ratio, mathieu_trace};

#[test]
fn exponent_matches_direct_integration() {
    let (a, q, omega) = (0.0, 0.3, 1.0);
    let sol = mathieu_floquet(a, q, omega, 30).unwrap();
    // tr M^50 = 2cos(50 μ T)
    let period = 2.0 * PI / omega;
    let tr = mathieu_trace(a, q, omega, 50, 4000);
    let want = 2.0 * (50.0 * sol.mu * period).cos();
    assert!((tr - want).abs() < 1e-8 * 2.0, "{tr} vs {want}");
    let one = monodromy_exponent(a, q, omega, 4000).unwrap();
    assert!((one - sol.mu).abs() < 1e-8 * sol.mu);
}

#[test]
fn ba_rb_exponent_correction() {
    let omega = 12.7;
    let q = 2.0 * 2f64.sqrt() / omega;
    let sol = mathieu_floquet(0.0, q, omega, 30).unwrap();
    // μ sits a little above the secular value; its size relative to (ω₀/ω)² is
    // pinned in the acceptance run
    let corr = sol.mu - 1.0;
    assert!(corr > 0.0 && corr < 0.02, "{corr}");
    let tr = mathieu_trace(0.0, q, omega, 50, 2000);
    let want = 2.0 * (50.0 * sol.mu * 2.0 * PI / omega).cos();
    assert!((tr - want).abs() < 2e-8);
}

#[test]
fn wronskian_and_equation_residual() {
    let sol = mathieu_floquet(0.01, 0.4, 2.0, 30).unwrap();
    for i in 0..20 {
        let t = i as f64 * 0.37;
        let w = sol.wronskian(t);
        assert!((w - C64::new(0.0, -2.0 * sol.nu)).norm() < 1e-12 * sol.nu, "{w}");
        assert!(sol.ode_residual(t) < 1e-10);
    }
    let (f0, df0) = sol.f(0.0);
    assert!((f0 - 1.0).norm() < 1e-14);
    assert!((df0 - C64::new(0.0, sol.nu)).norm() < 1e-12);
}

#[test]
fn periodic_centre_solves_driven_equation() {
    let sol = mathieu_floquet(0.0, 0.25, 1.0, 30).unwrap();
    let (f0, f1) = (0.3, -0.7);
    let d = periodic_solution(&sol, f0, f1).unwrap();
    let period = 2.0 * PI;
    for i in 0..25 {
        let t = i as f64 * 0.29;
        assert!(d.ode_residual(&sol, t) < 1e-8 * (f0.abs() + f1.abs()));
        assert!((d.x_p(t + period) - d.x_p(t)).abs() < 1e-12);
    }
    // adding a homogeneous solution spoils periodicity
    let (f_t, _) = sol.f(period);
    let (f_0, _) = sol.f(0.0);
    assert!((f_t - f_0).norm() > 0.1);
}

#[test]
fn lowest_order_centre() {
    let (q, omega) = (0.1, 1.0);
    let sol = mathieu_floquet(0.0, q, omega, 30).unwrap();
    let w0 = omega * q / (2.0 * 2f64.sqrt());
    let (dd, l_ac) = (0.8, 1.3);
    // F₀ = ω₀²δd, F₁ = ωω₀ l_ac
    let d = periodic_solution(&sol, w0 * w0 * dd, omega * w0 * l_ac).unwrap();
    // Fourier components by quadrature over one period
    let n = 512;
    let (mut c0, mut cc, mut cs) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let t = 2.0 * PI * i as f64 / n as f64;
        let x = d.x_p(t);
        c0 += x / n as f64;
        cc += 2.0 * x * t.cos() / n as f64;
        cs += 2.0 * x * t.sin() / n as f64;
    }
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    assert!(rel(c0, dd) < 0.1, "{c0} vs {dd}");
    assert!(rel(cc, dd * q / 2.0) < 0.1, "{cc} vs {}", dd * q / 2.0);
    assert!(rel(cs, -(w0 / omega) * l_ac) < 0.1, "{cs} vs {}", -(w0 / omega) * l_ac);
}

#[test]
fn resonant_exponent_is_rejected() {
    let mut sol = mathieu_floquet(0.0, 0.2, 1.0, 20).unwrap();
    sol.mu = 0.0;
    assert!(periodic_solution(&sol, 1.0, 0.0).is_err());
}

#[test]
fn wavefunctions_stay_normalised() {
    let sol = mathieu_floquet(0.0, 0.2227, 12.7, 30).unwrap();
    let drive = periodic_solution(&sol, 0.5, 2.0).unwrap();
    let period = 2.0 * PI / 12.7;
    let h = 0.005;
    for n in [0usize, 3] {
        for j in 0..10 {
            let t = period * j as f64 / 10.0;
            let norm: f64 = (-3000..=3000)
                .map(|i| floquet_wavefunction(&sol, Some(&drive), n, i as f64 * h, t).norm_sqr() * h)
                .sum();
            assert!((norm - 1.0).abs() < 1e-8, "n={n} t={t}: {norm}");
        }
    }
}

#[test]
fn static_limit_wavefunctions() {
    // q = 0, a = 0.04, ω = 10 gives a plain oscillator with ω₀ = 1
    let sol = mathieu_floquet(0.04, 0.0, 10.0, 12).unwrap();
    for n in 0..4 {
        for &x in &[-1.7, -0.3, 0.0, 0.8, 2.2] {
            let t = 0.9;
            let psi = floquet_wavefunction(&sol, None, n, x, t);
            let want = C64::from_polar(hermite_function(n, x), -(n as f64 + 0.5) * t);
            assert!((psi - want).norm() < 1e-12, "n={n} x={x}: {psi} vs {want}");
        }
    }
}

#[test]
fn kinetic_energy_matches_direct_integration() {
    for omega in [12.7, 25.0] {
        let q = 2.0 * 2f64.sqrt() / omega;
        let sol = mathieu_floquet(0.0, q, omega, 30).unwrap();
        let ratio = mathieu_fdot_ratio(0.0, q, omega, 20_000);
        for n in 0..4 {
            let want = 0.5 * (n as f64 + 0.5) * ratio;
            let ke = mean_kinetic_energy(&sol, None, n);
            assert!((ke - want).abs() < 1e-8, "ω={omega} n={n}: {ke} vs {want}");
        }
    }
}

#[test]
fn kinetic_energy_tends_to_secular_value() {
    // relative excess over (n + ½)ω₀ falls off like (ω₀/ω)²
    let mut scaled = Vec::new();
    for omega in [12.7, 25.0, 50.0, 100.0] {
        let q = 2.0 * 2f64.sqrt() / omega;
        let sol = mathieu_floquet(0.0, q, omega, 30).unwrap();
        let ke = mean_kinetic_energy(&sol, None, 2);
        scaled.push((ke / 2.5 - 1.0) * omega * omega);
    }
    for w in scaled.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.15, "{scaled:?}");
    }
    assert!(scaled.iter().all(|&s| s > 0.0 && s < 6.0), "{scaled:?}");
    let sol = mathieu_floquet(0.0, 0.2, 8.0, 30).unwrap();
    let zero = periodic_solution(&sol, 0.0, 0.0).unwrap();
    assert_eq!(mean_kinetic_energy(&sol, Some(&zero), 0), mean_kinetic_energy(&sol, None, 0));
}

#[test]
fn excess_kinetic_energy_small_q() {
    let omega = 40.0;
    let q = 2.0 * 2f64.sqrt() / omega;
    let sol = mathieu_floquet(0.0, q, omega, 30).unwrap();
    let (dd, l_ac) = (0.7, 0.4);
    let d = periodic_solution(&sol, dd, omega * l_ac).unwrap();
    let excess = mean_kinetic_energy(&sol, Some(&d), 0) - mean_kinetic_energy(&sol, None, 0);
    let want = 0.5 * (dd * dd + 0.5 * l_ac * l_ac);
    assert!(((excess - want) / want).abs() < 0.01, "{excess} vs {want}");
}
