//! Table of `q` in the three regimes for a list of profiles and exponents.

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use thinpl_core::fem::SolverOptions;
use thinpl_core::geometry::{PeriodicProfile, ProfileConfig, ProfileFamily};
use thinpl_core::homogenize::{q_for_regime, q_subcritical, q_supercritical, Regime};
use thinpl_core::{Exponent, Profile};

use crate::csvout::{num, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedProfile {
    pub name: String,
    pub profile: ProfileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    pub profiles: Vec<NamedProfile>,
    pub p_list: Vec<f64>,
    #[serde(default = "default_cell_h")]
    pub cell_h: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_cell_h() -> f64 {
    1.0 / 64.0
}

impl Default for CoeffConfig {
    fn default() -> Self {
        let named = |name: &str, p: Profile| NamedProfile { name: name.into(), profile: p.config() };
        CoeffConfig {
            profiles: vec![
                named("constant", PeriodicProfile::constant(1.0).expect("valid")),
                named("cosine", PeriodicProfile::cosine(2.0, 1.0, 1.0).expect("valid")),
                named(
                    "sawtooth",
                    PeriodicProfile::new(1.0, ProfileFamily::PiecewiseLinear { breakpoints: vec![0.0, 0.5, 1.0], values: vec![1.0, 3.0, 1.0] })
                        .expect("valid"),
                ),
            ],
            p_list: vec![2.0, 3.0],
            cell_h: default_cell_h(),
            solver: SolverOptions::default(),
        }
    }
}

impl CoeffConfig {
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoeffRow {
    pub profile: String,
    pub p: f64,
    pub q_sub: f64,
    /// Richardson-extrapolated cell value; `NaN` when the cell solve failed.
    pub q_res: f64,
    pub q_super: f64,
    pub failure: Option<String>,
}

fn row(named: &NamedProfile, p: f64, cfg: &CoeffConfig) -> CoeffRow {
    let mut out = CoeffRow { profile: named.name.clone(), p, q_sub: f64::NAN, q_res: f64::NAN, q_super: f64::NAN, failure: None };
    let run = |out: &mut CoeffRow| -> Result<()> {
        let g = PeriodicProfile::from_config(&named.profile)?;
        let e = Exponent::new(p)?;
        out.q_sub = q_subcritical(&g, e)?;
        out.q_super = q_supercritical(&g)?;
        out.q_res = q_for_regime(Regime::Resonant, &g, e, cfg.cell_h, &cfg.solver)?;
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.failure = Some(format!("{e:#}"));
    }
    out
}

pub fn run_coefficient_table(cfg: &CoeffConfig) -> Vec<CoeffRow> {
    let jobs: Vec<(&NamedProfile, f64)> = cfg.profiles.iter().flat_map(|n| cfg.p_list.iter().map(move |&p| (n, p))).collect();
    jobs.par_iter().map(|(n, p)| row(n, *p, cfg)).collect()
}

pub fn coefficient_table(cfg: &CoeffConfig, rows: &[CoeffRow]) -> Table {
    let mut t = Table::new("coeff", &cfg.hash(), &["profile", "p", "q_sub", "q_res", "q_super", "status"]);
    t.comment(format!("cell_h={}", num(cfg.cell_h)));
    for r in rows {
        t.push(vec![
            r.profile.clone(),
            num(r.p),
            num(r.q_sub),
            num(r.q_res),
            num(r.q_super),
            match &r.failure {
                None => "ok".into(),
                Some(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
            },
        ]);
    }
    t
}
