//! Flat `key = value` run configuration with a fixed, versioned schema.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// Every accepted key with its default. Stages read the keys they need; keys of
/// other stages may share one file so a single config drives the whole pipeline.
const SCHEMA: &[(&str, &str, &str)] = &[
    ("schema_version", SCHEMA_VERSION, "config schema version"),
    ("grid_n", "4096", "interior radial nodes"),
    ("grid_rmax", "200", "radial domain length"),
    ("seed", "1", "seed of the random test batteries"),
    ("gs_tol", "1e-10", "ground-state residual target"),
    ("gs_max_iter", "4000", "ground-state iteration cap"),
    ("profile_beta_orders", "true", "build the β-dependent (ℓ = 1) orders"),
    ("profile_angular_nodes", "8", "Gauss–Legendre nodes for the angular projections"),
    ("profile_b_list", "0.2,0.1,0.05,0.025", "b values of the scaling sweep"),
    ("profile_beta_list", "0.2,0.1,0.05", "β values of the scaling sweep"),
    ("mod_b0", "0.1", "initial b"),
    ("mod_beta0", "0.02", "initial β₃"),
    ("mod_lambda0", "1", "initial λ"),
    ("mod_ds", "0.01", "RK4 step in s"),
    ("mod_s_span", "2000", "maximal s-span"),
    ("mod_lambda_min", "0.0625", "stop once λ falls below this"),
    ("evolve_b0", "0.1", "initial b (0 evolves Q itself)"),
    ("evolve_lambda0", "1", "initial λ"),
    ("evolve_gamma0", "0", "initial γ"),
    ("evolve_dt", "0.001", "time step at mesh scale 1"),
    ("evolve_t_end", "10", "final time"),
    ("evolve_sample_stride", "100", "steps between decomposed samples"),
    ("evolve_snapshot_stride", "0", "samples between snapshots (0: none)"),
    ("evolve_lambda_min", "0.5", "stop once the extracted λ falls below this"),
    ("evolve_scale_dt", "true", "shrink dt with the mesh scale"),
    ("evolve_richardson_t", "1", "time window of the splitting-order check"),
    ("diag_s_nodes", "200", "s-quadrature nodes for form values"),
    ("diag_operator_s_nodes", "64", "s-quadrature nodes inside the eigensolves"),
    ("diag_battery", "20", "random fields in the smoothing-identity battery"),
    ("diag_a_list", "8,16,32,64", "cutoff scales of the sweeps"),
    ("diag_mode", "consistent", "L₊,A potential coefficient: consistent (5/3) or printed (3/8)"),
    ("diag_eig_budget", "300", "Lanczos iterations per eigensolve"),
    ("diag_bih_n", "4095", "grid nodes of the biharmonic operator-norm sweep"),
    ("diag_bih_rmax", "2000", "domain of the biharmonic operator-norm sweep"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), no + 1).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {k}", no + 1)));
            }
            cfg.set(k, v)?;
        }
        if cfg.values["schema_version"] != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.values["schema_version"]
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown key {key}"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = &self.values[key];
        raw.parse()
            .map_err(|_| CliError::Config(format!("{key} = {raw} has the wrong type")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.values[key]
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{key}: bad list entry {s:?}")))
            })
            .collect()
    }

    /// Canonical text form: one `key = value` per line in key order.
    pub fn render(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).expect("string map")
    }

    pub fn help() -> String {
        SCHEMA.iter().map(|(k, v, h)| format!("{k} = {v}    # {h}\n")).collect()
    }
}
