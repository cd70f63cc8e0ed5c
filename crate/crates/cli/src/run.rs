//! Configuration, basis caching and the run manifest shared by all commands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use atomion::{cache, numerov, BasisOptions, Scaled, TrapConfig, UnperturbedBasis};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Common;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] atomion::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("out of scope: {0}")]
    Scope(String),
    #[error("basis not cached at {} and --no-compute given", .0.display())]
    CacheMiss(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Largest Floquet matrix the CLI will build.
pub const MAX_FLOQUET_DIM: usize = 8000;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub struct Setup {
    pub cfg: TrapConfig,
    pub opts: BasisOptions,
    pub scaled: Scaled,
    pub warnings: Vec<String>,
}

impl Setup {
    pub fn load(common: &Common) -> Result<Self> {
        let mut cfg = TrapConfig::ba_rb();
        let mut opts = BasisOptions::default();
        if let Some(path) = &common.config {
            let text = io(path, fs::read_to_string(path))?;
            for (k, v) in cfg.apply_kv(&text)? {
                let num = || v.parse::<f64>().map_err(|_| CliError::Config(format!("{k}: `{v}` is not a number")));
                match k.as_str() {
                    "x_max" => opts.x_max = Some(num()?),
                    "grid_a" => opts.grid_a = num()?,
                    "grid_b" => opts.grid_b = num()?,
                    "harmonic_step" => opts.harmonic_step = num()?,
                    "e_lo" => opts.e_lo = num()?,
                    "e_hi" => opts.e_hi = num()?,
                    "r_min_bohr" => opts.r_min_target_bohr = num()?,
                    "n_states" => {
                        opts.n_states = v.parse().map_err(|_| CliError::Config(format!("n_states: `{v}` is not a count")))?
                    }
                    _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
                }
            }
        }
        let warnings = cfg.validate()?;
        let scaled = cfg.scaled()?;
        Ok(Setup { cfg, opts, scaled, warnings })
    }

    /// Unperturbed basis cut to `common.ne` states, from the cache when possible.
    pub fn basis(&self, common: &Common) -> Result<UnperturbedBasis> {
        let key = cache::basis_key(&self.scaled, &self.opts);
        let path = common.cache_dir.join(format!("basis-{}.bin", &cache::hex(&key)[..16]));
        let mut full = None;
        if !common.recompute && path.exists() {
            match cache::load(&path, &key) {
                Ok(b) => full = Some(b),
                Err(e) => eprintln!("ignoring cached basis {}: {e}", path.display()),
            }
        }
        let full = match full {
            Some(b) => b,
            None if common.no_compute => return Err(CliError::CacheMiss(path)),
            None => {
                let t = Instant::now();
                let b = numerov::solve_unperturbed(&self.scaled, &self.opts)?;
                eprintln!("solved {} states in {:.1} s", b.dim(), t.elapsed().as_secs_f64());
                io(&common.cache_dir, fs::create_dir_all(&common.cache_dir))?;
                cache::save(&path, &key, &b)?;
                b
            }
        };
        if common.ne == 0 || common.ne > full.dim() {
            return Err(CliError::Config(format!("--ne {} outside 1..={}", common.ne, full.dim())));
        }
        Ok(full.truncate(common.ne))
    }

    fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self.cfg.to_kv().into_iter().collect();
        if let Ok(serde_json::Value::Object(o)) = serde_json::to_value(&self.opts) {
            for (k, v) in o {
                m.insert(format!("basis.{k}"), v.to_string());
            }
        }
        m
    }
}

pub fn d_grid(common: &Common) -> Result<Vec<f64>> {
    let (lo, hi, step) = (common.d_min, common.d_max, common.d_step);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Config(format!("bad distance grid {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

pub fn steps(common: &Common) -> Result<usize> {
    if !(common.dt > 0.0 && common.dt <= 1.0) {
        return Err(CliError::Config(format!("--dt {} must lie in (0, 1]", common.dt)));
    }
    Ok((1.0 / common.dt).round().max(1.0) as usize)
}

/// What a run was asked to do. Its hash tags every output file; nothing
/// time- or host-dependent goes in, so identical requests give identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub figure: Option<String>,
    pub config: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
}

pub struct Run {
    manifest: RunManifest,
    hash: String,
    out_dir: PathBuf,
    outputs: Vec<String>,
    meta: BTreeMap<String, String>,
    warnings: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn start(
        common: &Common,
        setup: Option<&Setup>,
        command: &str,
        figure: Option<&str>,
        params: &[(&str, String)],
    ) -> Result<Self> {
        let manifest = RunManifest {
            tool: format!("atomion {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            figure: figure.map(str::to_string),
            config: setup.map(Setup::snapshot).unwrap_or_default(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        };
        let json = serde_json::to_string(&manifest).map_err(atomion::Error::from)?;
        let hash = cache::hex(&Sha256::digest(json.as_bytes()));
        io(&common.out_dir, fs::create_dir_all(&common.out_dir))?;
        let warnings = setup.map(|s| s.warnings.clone()).unwrap_or_default();
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        Ok(Run {
            manifest,
            hash,
            out_dir: common.out_dir.clone(),
            outputs: Vec::new(),
            meta: BTreeMap::new(),
            warnings,
            started: Instant::now(),
        })
    }

    /// Convergence and diagnostic values recorded in the manifest.
    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        eprintln!("warning: {w}");
        self.warnings.push(w);
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.out_dir.join(name);
        let mut f = io(&path, fs::File::create(&path))?;
        let mut head = format!("# manifest {}\n", self.hash);
        if let Some(fig) = &self.manifest.figure {
            head.push_str(&format!("# figure {fig}\n"));
        }
        io(&path, f.write_all(head.as_bytes()))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        io(&path, w.flush())?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, report: impl Serialize) -> Result<()> {
        let path = self.out_dir.join(name);
        let doc = serde_json::json!({
            "manifest": self.hash,
            "figure": self.manifest.figure,
            "report": report,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(atomion::Error::from)?;
        io(&path, fs::write(&path, text + "\n"))?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let m = &self.manifest;
        let mut s = String::new();
        s.push_str(&format!("hash = {}\n", self.hash));
        s.push_str(&format!("tool = {}\n", m.tool));
        s.push_str(&format!("command = {}\n", m.command));
        if let Some(f) = &m.figure {
            s.push_str(&format!("figure = {f}\n"));
        }
        for (k, v) in &m.config {
            s.push_str(&format!("config.{k} = {v}\n"));
        }
        for (k, v) in &m.params {
            s.push_str(&format!("param.{k} = {v}\n"));
        }
        for o in &self.outputs {
            s.push_str(&format!("output = {o}\n"));
        }
        for (k, v) in &self.meta {
            s.push_str(&format!("meta.{k} = {v}\n"));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning = {w}\n"));
        }
        let path = self.out_dir.join("manifest.txt");
        io(&path, fs::write(&path, s))?;
        eprintln!(
            "{}: {} file(s) in {} [{:.1} s, manifest {}]",
            m.command,
            self.outputs.len() + 1,
            self.out_dir.display(),
            self.started.elapsed().as_secs_f64(),
            &self.hash[..12]
        );
        Ok(())
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}
