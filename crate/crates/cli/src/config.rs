//! Config file loading and flag overrides.

use std::path::Path;

use crossdetect_core::clutter::TextureModel;
use crossdetect_core::config::{AngleGrid, ExperimentConfig, SnrGrid};
use crossdetect_core::scene::CovarianceModelParams;
use crossdetect_core::{Error, Result};
use toml::{Table, Value};

use crate::Common;

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// File, then `--set`, then flags.
pub fn resolve(c: &Common) -> Result<ExperimentConfig> {
    let mut table = match &c.config {
        Some(p) => load_table(p)?,
        None => Table::new(),
    };
    for kv in &c.set {
        apply_set(&mut table, kv)?;
    }
    let mut cfg: ExperimentConfig =
        Value::Table(table).try_into().map_err(|e: toml::de::Error| cfg_err(format!("config: {}", e.message())))?;
    if c.full_scale {
        cfg = cfg.full_scale();
    }
    apply_flags(&mut cfg, c)?;
    clamp_angles(&mut cfg);
    Ok(cfg)
}

fn load_table(p: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
    // Typed parse first so field errors carry line and column.
    toml::from_str::<ExperimentConfig>(&text).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
    text.parse::<Table>().map_err(|e| cfg_err(format!("{}: {e}", p.display())))
}

/// `a.b.c=value`; the value is read as TOML and falls back to a bare string.
fn apply_set(table: &mut Table, kv: &str) -> Result<()> {
    let (key, raw) = kv.split_once('=').ok_or_else(|| cfg_err(format!("--set {kv}: expected KEY=VALUE")))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| cfg_err(format!("--set {kv}: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn triple(flag: &str, s: &str) -> Result<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| cfg_err(format!("--{flag} {s}: expected start:stop:step")))?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(cfg_err(format!("--{flag} {s}: expected start:stop:step"))),
    }
}

pub fn parse_clutter(s: &str) -> Result<TextureModel> {
    let s = s.trim().to_ascii_lowercase();
    if s == "gaussian" {
        return Ok(TextureModel::Gaussian);
    }
    let rest = s.strip_prefix('k').ok_or_else(|| cfg_err(format!("--clutter {s}: expected gaussian or k,nu=<shape>")))?;
    let nu = match rest.trim_start_matches(',').trim() {
        "" => 0.5,
        r => r
            .strip_prefix("nu=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| cfg_err(format!("--clutter {s}: expected k,nu=<shape>")))?,
    };
    Ok(TextureModel::K { nu })
}

fn apply_flags(cfg: &mut ExperimentConfig, c: &Common) -> Result<()> {
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.threads {
        cfg.threads = v;
    }
    if let Some(v) = c.m {
        cfg.m = v;
    }
    if let Some(v) = c.k {
        cfg.k_secondary = Some(v);
    }
    if c.reuse_secondary {
        cfg.reuse_secondary = true;
    }
    if let Some(v) = c.n_h0 {
        cfg.n_h0 = v;
    }
    if let Some(v) = c.n_mc {
        cfg.n_mc = v;
    }
    if let Some(v) = c.pfa {
        cfg.pfa = v;
    }
    if !c.detectors.is_empty() {
        cfg.detectors = c.detectors.iter().map(|s| s.trim().to_string()).collect();
    }
    if let Some(s) = &c.clutter {
        cfg.clutter = parse_clutter(s)?;
    }
    if let Some(s) = &c.scene {
        cfg.scene = CovarianceModelParams::preset(s)
            .ok_or_else(|| cfg_err(format!("--scene {s}: expected baseline, correlated or decoupled")))?;
    }
    if let Some(s) = &c.snr {
        let (start_db, stop_db, step_db) = triple("snr", s)?;
        cfg.snr = SnrGrid { start_db, stop_db, step_db };
    }
    if let Some(s) = &c.theta {
        let (min_deg, max_deg, step_deg) = triple("theta", s)?;
        cfg.angles = AngleGrid { min_deg, max_deg, step_deg };
    }
    if let Some(s) = &c.target {
        let v: Vec<f64> = s.split(',').filter_map(|x| x.trim().parse().ok()).collect();
        let [t1, t2] = v[..] else {
            return Err(cfg_err(format!("--target {s}: expected theta1,theta2")));
        };
        cfg.target.theta1_deg = t1;
        cfg.target.theta2_deg = t2;
    }
    if let Some(v) = c.map_snr_db {
        cfg.map_snr_db = v;
    }
    if let Some(v) = c.max_iter {
        cfg.tyler.max_iter = v;
    }
    if let Some(v) = c.tol {
        cfg.tyler.tol = v;
    }
    Ok(())
}

fn clamp_angles(cfg: &mut ExperimentConfig) {
    let a = &mut cfg.angles;
    if a.min_deg < -90.0 || a.max_deg > 90.0 {
        eprintln!("warning: angle grid [{}, {}] clamped to [-90, 90]", a.min_deg, a.max_deg);
        a.min_deg = a.min_deg.max(-90.0);
        a.max_deg = a.max_deg.min(90.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_parses_typed_values() {
        let mut t = Table::new();
        apply_set(&mut t, "scene.beta=0.5").unwrap();
        apply_set(&mut t, "detectors=[\"nmf1\"]").unwrap();
        apply_set(&mut t, "clutter.kind=k").unwrap();
        apply_set(&mut t, "clutter.nu=2").unwrap();
        assert_eq!(t["scene"]["beta"].as_float(), Some(0.5));
        assert_eq!(t["clutter"]["kind"].as_str(), Some("k"));
        assert!(apply_set(&mut t, "novalue").is_err());
    }

    #[test]
    fn clutter_forms() {
        assert_eq!(parse_clutter("gaussian").unwrap(), TextureModel::Gaussian);
        assert_eq!(parse_clutter("k,nu=0.7").unwrap(), TextureModel::K { nu: 0.7 });
        assert_eq!(parse_clutter("K").unwrap(), TextureModel::K { nu: 0.5 });
        assert!(parse_clutter("weibull").is_err());
    }

    #[test]
    fn flags_override_set() {
        let c = Common { set: vec!["seed=3".into(), "m=8".into()], seed: Some(9), ..Default::default() };
        let cfg = resolve(&c).unwrap();
        assert_eq!((cfg.seed, cfg.m), (9, 8));
    }

    #[test]
    fn unknown_key_rejected() {
        let c = Common { set: vec!["bogus=1".into()], ..Default::default() };
        assert!(resolve(&c).unwrap_err().is_config());
    }
}
