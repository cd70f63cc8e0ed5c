//! Trap parameters, derived scales and the dimensionless convention used
//! everywhere else: lengths in l_i, energies in ħω₀, time τ = ω₀t.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const E_CHARGE: f64 = 1.602_176_634e-19;
pub const BOHR: f64 = 5.291_772_109_03e-11;
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Short-range boundary parameter as supplied by the user. Stored
/// canonically as a phase once a config is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShortRange {
    Phase(f64),
    /// s-wave scattering length in metres.
    ScatteringLength(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub a: f64,
    pub q: f64,
    /// rf drive angular frequency [rad/s]
    pub omega: f64,
    pub m_ion: f64,
    pub m_atom: f64,
    /// αe² [J·m⁴]; zero switches the atom-ion interaction off.
    pub polarizability_term: f64,
    pub e_dc: f64,
    pub e_ac: f64,
    /// Canonical short-range phase φ_s in (−π, π].
    pub phase: f64,
}

/// Mass used when forming a length scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassConvention {
    Ion,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedLengths {
    pub l_i: f64,
    pub r_i: f64,
    pub l_rel: f64,
    pub r_rel: f64,
    pub l_ac: f64,
    pub delta_d: f64,
}

/// Everything the solvers need, already made dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    /// ω/ω₀
    pub omega: f64,
    pub gamma: f64,
    /// R_i/l_i (zero when the interaction is off)
    pub r: f64,
    pub phase: f64,
    /// δd/l_i
    pub delta_d: f64,
    /// l_ac/l_i
    pub l_ac: f64,
    /// a₀/l_i
    pub bohr: f64,
}

pub fn secular_frequency(a: f64, q: f64, omega: f64) -> Result<f64> {
    let s = a + 0.5 * q * q;
    if s < 0.0 || (s == 0.0 && a != 0.0) {
        return Err(Error::UnstableTrap(s));
    }
    Ok(0.5 * omega * s.sqrt())
}

pub fn gamma_factor(a: f64, q: f64) -> Result<f64> {
    if q == 0.0 {
        return Err(Error::Domain("gamma factor needs q != 0".into()));
    }
    let s = 1.0 + 2.0 * a / (q * q);
    if s <= 0.0 {
        return Err(Error::Domain(format!("1 + 2a/q^2 = {s} must be positive")));
    }
    Ok(1.0 / (2.0 * s).sqrt())
}

/// q giving secular frequency `omega0` at drive `omega` and static term `a`.
pub fn q_for_secular(omega0: f64, omega: f64, a: f64) -> Result<f64> {
    let s = (2.0 * omega0 / omega).powi(2) - a;
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "secular frequency {omega0} unreachable with a = {a}"
        )));
    }
    Ok((2.0 * s).sqrt())
}

/// Field amplitude from an rf phase mismatch φ_ac between electrodes of
/// radius `r_t`: E_ac ≃ (m/e)qω²R_tφ_ac. Prefactor convention as commonly quoted
/// for linear traps; treat as an estimate.
pub fn e_ac_from_phase(m_ion: f64, q: f64, omega: f64, r_t: f64, phi_ac: f64) -> f64 {
    m_ion / E_CHARGE * q * omega * omega * r_t * phi_ac
}

/// d_c = 2 R^{1/3} l^{2/3}, returned in units of l.
pub fn characteristic_distance(r_over_l: f64) -> f64 {
    2.0 * r_over_l.cbrt()
}

impl TrapConfig {
    /// ¹³⁵Ba⁺ / ⁸⁷Rb at ω₀ = 2π×100 kHz, ω = 2π×1.27 MHz, a = 0, R_i = 8927 a₀
    /// and b = 0.9 R_i.
    pub fn ba_rb() -> Self {
        let omega = 2.0 * PI * 1.27e6;
        let omega0 = 2.0 * PI * 100e3;
        let m_ion = 134.905_688_7 * AMU;
        let r_i = 8927.0 * BOHR;
        let mut cfg = TrapConfig {
            a: 0.0,
            q: 2.0 * 2f64.sqrt() * omega0 / omega,
            omega,
            m_ion,
            m_atom: 86.909_180_527 * AMU,
            polarizability_term: (r_i * HBAR).powi(2) / m_ion,
            e_dc: 0.0,
            e_ac: 0.0,
            phase: 0.0,
        };
        cfg.set_short_range(ShortRange::ScatteringLength(0.9 * r_i));
        cfg
    }

    /// Same trap, atom-ion interaction switched off.
    pub fn harmonic() -> Self {
        TrapConfig { polarizability_term: 0.0, ..Self::ba_rb() }
    }

    pub fn set_short_range(&mut self, sr: ShortRange) {
        self.phase = match sr {
            ShortRange::Phase(p) => wrap_phase(p),
            ShortRange::ScatteringLength(b) => {
                let r = self.r_star(MassConvention::Ion);
                // cot φ = −b/R with φ in (0, π)
                1f64.atan2(-b / r)
            }
        };
    }

    pub fn scattering_length(&self) -> f64 {
        -self.r_star(MassConvention::Ion) / self.phase.tan()
    }

    pub fn reduced_mass(&self) -> f64 {
        self.m_ion * self.m_atom / (self.m_ion + self.m_atom)
    }

    fn mass(&self, c: MassConvention) -> f64 {
        match c {
            MassConvention::Ion => self.m_ion,
            MassConvention::Reduced => self.reduced_mass(),
        }
    }

    pub fn r_star(&self, c: MassConvention) -> f64 {
        (self.mass(c) * self.polarizability_term).sqrt() / HBAR
    }

    pub fn secular_frequency(&self) -> Result<f64> {
        secular_frequency(self.a, self.q, self.omega)
    }

    pub fn gamma_factor(&self) -> Result<f64> {
        gamma_factor(self.a, self.q)
    }

    /// Hard violations are errors; soft ones (outside the |q| ≪ 1, |a| ≪ q²
    /// regime) come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.omega > 0.0) {
            return Err(Error::Config("omega must be positive".into()));
        }
        if !(self.m_ion > 0.0 && self.m_atom > 0.0) {
            return Err(Error::Config("masses must be positive".into()));
        }
        if !(self.polarizability_term >= 0.0) {
            return Err(Error::Config("polarizability term must be non-negative".into()));
        }
        let w0 = self.secular_frequency()?;
        if !(w0 > 0.0) {
            return Err(Error::Config("secular frequency vanishes".into()));
        }
        if w0 >= self.omega {
            return Err(Error::Config(format!(
                "secular frequency {w0:.4e} not below drive {:.4e}",
                self.omega
            )));
        }
        let mut warn = Vec::new();
        if self.q.abs() >= 1.0 {
            warn.push(format!("|q| = {} is not small", self.q.abs()));
        }
        if self.a.abs() >= self.q * self.q {
            warn.push(format!("|a| = {} is not below q^2 = {}", self.a.abs(), self.q * self.q));
        }
        if self.polarizability_term == 0.0 {
            warn.push("atom-ion interaction is switched off".into());
        }
        Ok(warn)
    }

    pub fn derived_lengths(&self) -> Result<DerivedLengths> {
        let w0 = self.secular_frequency()?;
        if !(w0 > 0.0) {
            return Err(Error::Domain("secular frequency must be positive".into()));
        }
        let mu = self.reduced_mass();
        Ok(DerivedLengths {
            l_i: (HBAR / (self.m_ion * w0)).sqrt(),
            r_i: self.r_star(MassConvention::Ion),
            l_rel: (HBAR / (mu * w0)).sqrt(),
            r_rel: self.r_star(MassConvention::Reduced),
            l_ac: E_CHARGE * self.e_ac / (self.m_ion * self.omega * w0),
            delta_d: E_CHARGE * self.e_dc / (self.m_ion * w0 * w0),
        })
    }

    /// d_c in units of l_i.
    pub fn characteristic_distance(&self) -> Result<f64> {
        let l = self.derived_lengths()?;
        Ok(characteristic_distance(l.r_i / l.l_i))
    }

    pub fn scaled(&self) -> Result<Scaled> {
        let w0 = self.secular_frequency()?;
        let l = self.derived_lengths()?;
        Ok(Scaled {
            omega: self.omega / w0,
            gamma: self.gamma_factor()?,
            r: l.r_i / l.l_i,
            phase: self.phase,
            delta_d: l.delta_d / l.l_i,
            l_ac: l.l_ac / l.l_i,
            bohr: BOHR / l.l_i,
        })
    }

    /// Apply `key = value` lines on top of `self`. Keys this type does not
    /// know are handed back untouched for the caller to interpret.
    pub fn apply_kv(&mut self, text: &str) -> Result<BTreeMap<String, String>> {
        enum Pending {
            Phase(f64),
            Length(f64),
            OverRi(f64),
        }
        let mut rest = BTreeMap::new();
        // scattering lengths refer to R_i, so they wait until masses and
        // polarizability are settled
        let mut pending_sr = None;
        let (mut r_t, mut phi_ac) = (None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: `{v}` is not a number", lineno + 1)))
            };
            match k {
                "a" => self.a = num()?,
                "q" => self.q = num()?,
                "omega" => self.omega = num()?,
                "omega_hz" => self.omega = 2.0 * PI * num()?,
                "secular_hz" => self.q = q_for_secular(2.0 * PI * num()?, self.omega, self.a)?,
                "m_ion" => self.m_ion = num()?,
                "m_ion_amu" => self.m_ion = num()? * AMU,
                "m_atom" => self.m_atom = num()?,
                "m_atom_amu" => self.m_atom = num()? * AMU,
                "polarizability_term" => self.polarizability_term = num()?,
                "r_i_bohr" => {
                    let r = num()? * BOHR;
                    self.polarizability_term = (r * HBAR).powi(2) / self.m_ion;
                }
                "e_dc" => self.e_dc = num()?,
                "e_ac" => self.e_ac = num()?,
                "electrode_radius" => r_t = Some(num()?),
                "ac_phase" => phi_ac = Some(num()?),
                "short_range_phase" => pending_sr = Some(Pending::Phase(num()?)),
                "scattering_length" => pending_sr = Some(Pending::Length(num()?)),
                "scattering_length_ri" => pending_sr = Some(Pending::OverRi(num()?)),
                _ => {
                    rest.insert(k.to_string(), v.to_string());
                }
            }
        }
        match pending_sr {
            Some(Pending::Phase(p)) => self.set_short_range(ShortRange::Phase(p)),
            Some(Pending::Length(b)) => self.set_short_range(ShortRange::ScatteringLength(b)),
            Some(Pending::OverRi(f)) => {
                let b = f * self.r_star(MassConvention::Ion);
                self.set_short_range(ShortRange::ScatteringLength(b));
            }
            None => {}
        }
        match (r_t, phi_ac) {
            (Some(r), Some(p)) => self.e_ac = e_ac_from_phase(self.m_ion, self.q, self.omega, r, p),
            (None, None) => {}
            _ => return Err(Error::Config("ac_phase and electrode_radius must be given together".into())),
        }
        Ok(rest)
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("a".into(), format!("{:e}", self.a)),
            ("q".into(), format!("{:e}", self.q)),
            ("omega".into(), format!("{:e}", self.omega)),
            ("m_ion".into(), format!("{:e}", self.m_ion)),
            ("m_atom".into(), format!("{:e}", self.m_atom)),
            ("polarizability_term".into(), format!("{:e}", self.polarizability_term)),
            ("e_dc".into(), format!("{:e}", self.e_dc)),
            ("e_ac".into(), format!("{:e}", self.e_ac)),
            ("short_range_phase".into(), format!("{:e}", self.phase)),
        ]
    }
}

fn wrap_phase(p: f64) -> f64 {
    let mut p = p % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secular_frequency_limits() {
        assert_eq!(secular_frequency(0.0, 0.0, 3.0).unwrap(), 0.0);
        let w = 7.3;
        assert!((secular_frequency(0.01, 0.0, w).unwrap() - 0.05 * w).abs() < 1e-15);
        assert!(matches!(secular_frequency(-0.1, 0.2, 1.0), Err(Error::UnstableTrap(_))));
    }

    #[test]
    fn ba_rb_drive_round_trip() {
        let w = 2.0 * PI * 1.27e6;
        let w0 = 2.0 * PI * 100e3;
        let q = q_for_secular(w0, w, 0.0).unwrap();
        assert!((q - 0.2227).abs() < 1e-4);
        let back = secular_frequency(0.0, q, w).unwrap();
        assert!((back / w0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_special_values() {
        assert!((gamma_factor(0.0, 0.3).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let q: f64 = 0.2;
        assert!((gamma_factor(q * q / 2.0, q).unwrap() - 0.5).abs() < 1e-15);
        assert!((gamma_factor(-q * q / 4.0, q).unwrap() - 1.0).abs() < 1e-14);
        assert!(gamma_factor(0.1, 0.0).is_err());
    }

    #[test]
    fn characteristic_distance_values() {
        assert!((characteristic_distance(1.0) - 2.0).abs() < 1e-15);
        assert!((characteristic_distance(8.0) - 4.0).abs() < 1e-14);
        assert!((characteristic_distance(17.26) - 5.2).abs() < 0.05);
    }

    #[test]
    fn ba_rb_lengths() {
        let cfg = TrapConfig::ba_rb();
        let l = cfg.derived_lengths().unwrap();
        assert!((l.l_i / BOHR - 516.0).abs() < 3.0, "l_i = {} a0", l.l_i / BOHR);
        assert!((l.r_i / BOHR - 8927.0).abs() < 1e-6);
        assert!((l.r_i / l.l_i - 17.2).abs() < 0.1);
        // reduced mass gives the smaller R*
        assert!((l.r_rel / BOHR - 5544.0).abs() < 60.0, "R* = {}", l.r_rel / BOHR);
    }

    #[test]
    fn dc_shift_ba_rb_value() {
        let mut cfg = TrapConfig::ba_rb();
        cfg.e_dc = 0.01;
        let l = cfg.derived_lengths().unwrap();
        assert!((l.delta_d / l.l_i - 0.7).abs() < 0.05, "{}", l.delta_d / l.l_i);
    }

    #[test]
    fn scattering_length_phase_round_trip() {
        let cfg = TrapConfig::ba_rb();
        let r = cfg.r_star(MassConvention::Ion);
        assert!((cfg.scattering_length() / r - 0.9).abs() < 1e-12);
        assert!(cfg.phase > 0.0 && cfg.phase < PI);
        assert!((1.0 / cfg.phase.tan() + 0.9).abs() < 1e-12);
    }

    #[test]
    fn mass_scaling() {
        let cfg = TrapConfig::ba_rb();
        let mut heavy = cfg.clone();
        heavy.m_ion *= 4.0;
        let (l1, l4) = (cfg.derived_lengths().unwrap(), heavy.derived_lengths().unwrap());
        assert!((l4.l_i / l1.l_i - 0.5).abs() < 1e-12);
        assert!((l4.r_i / l1.r_i - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kv_parsing() {
        let mut cfg = TrapConfig::ba_rb();
        let rest = cfg
            .apply_kv("# comment\na = 0.001\nomega_hz = 2e6\nx_max = 20 # numerics\nscattering_length_ri = -0.5\n")
            .unwrap();
        assert_eq!(cfg.a, 0.001);
        assert!((cfg.omega - 2.0 * PI * 2e6).abs() < 1e-6);
        assert_eq!(rest.get("x_max").map(String::as_str), Some("20"));
        assert!((cfg.scattering_length() / cfg.r_star(MassConvention::Ion) + 0.5).abs() < 1e-12);
        assert!(cfg.apply_kv("a 3").is_err());
        assert!(cfg.apply_kv("q = abc").is_err());
    }

    #[test]
    fn validation_warnings() {
        let mut cfg = TrapConfig::ba_rb();
        assert!(cfg.validate().unwrap().is_empty());
        cfg.a = 0.1;
        assert!(!cfg.validate().unwrap().is_empty());
        cfg.omega = -1.0;
        assert!(cfg.validate().is_err());
    }
}
