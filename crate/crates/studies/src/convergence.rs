//! eps-sweep of the thin-domain problem against its 1D limit.

use std::time::Instant;

use anyhow::Result;
use rayon::prelude::*;

use thinpl_core::concentration::trace_ratio;
use thinpl_core::fem::w1p_norm;
use thinpl_core::unfolding::{remainder_integrals, unfolding_error_report, UnfoldGrid};
use thinpl_core::{Model, Solution1D};

use crate::config::StudyConfig;
use crate::csvout::{num, Table};
use crate::pipeline::{homogenized_model, solve_2d, solve_limit};

#[derive(Debug, Clone)]
pub struct Row {
    pub eps: f64,
    pub dofs: usize,
    pub newton_iters: usize,
    pub outer_iters: usize,
    pub fixed_point_diff: f64,
    pub e_lp: f64,
    pub e_w1p: f64,
    /// `eps^(-1/p) ||u_eps||_{W^{1,p}}`
    pub apriori_norm: f64,
    pub trace_ratio: f64,
    /// `(1/eps) int_{R_1} |u_eps|`
    pub r1_remainder: f64,
    /// `eps^(-gamma-1) int_{O_1} |u_eps|`
    pub o1_remainder: f64,
    pub clamped: usize,
    pub wall_time: f64,
    /// `None` when every stage succeeded.
    pub failure: Option<String>,
}

impl Row {
    fn failed(eps: f64, msg: String, wall_time: f64) -> Self {
        Row {
            eps,
            dofs: 0,
            newton_iters: 0,
            outer_iters: 0,
            fixed_point_diff: f64::NAN,
            e_lp: f64::NAN,
            e_w1p: f64::NAN,
            apriori_norm: f64::NAN,
            trace_ratio: f64::NAN,
            r1_remainder: f64::NAN,
            o1_remainder: f64::NAN,
            clamped: 0,
            wall_time,
            failure: Some(msg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub model: Model,
    pub rows: Vec<Row>,
}

impl ConvergenceReport {
    /// `log(e_k / e_{k+1}) / log(eps_k / eps_{k+1})` for consecutive rows.
    pub fn orders(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let o = (a.e_lp / b.e_lp).ln() / (a.eps / b.eps).ln();
            out.push(if o.is_finite() { Some(o) } else { None });
        }
        out
    }

    pub fn e_lp(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_lp).collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "study",
            &self.config_hash,
            &[
                "eps",
                "dofs",
                "newton_iters",
                "outer_iters",
                "fixed_point_diff",
                "e_lp",
                "e_w1p",
                "apriori_norm",
                "trace_ratio",
                "r1_remainder",
                "o1_remainder",
                "order_lp",
                "clamped",
                "status",
            ],
        );
        let c_f = self.model.c_f().unwrap_or(f64::NAN);
        t.comment(format!("regime={} q={} c_f={}", self.model.regime, num(self.model.q), num(c_f)));
        for (r, o) in self.rows.iter().zip(self.orders()) {
            t.push(vec![
                num(r.eps),
                r.dofs.to_string(),
                r.newton_iters.to_string(),
                r.outer_iters.to_string(),
                num(r.fixed_point_diff),
                num(r.e_lp),
                num(r.e_w1p),
                num(r.apriori_norm),
                num(r.trace_ratio),
                num(r.r1_remainder),
                num(r.o1_remainder),
                o.map(num).unwrap_or_default(),
                r.clamped.to_string(),
                match &r.failure {
                    None => "ok".into(),
                    Some(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
                },
            ]);
        }
        t
    }
}

fn run_row(cfg: &StudyConfig, limit: &Solution1D, eps: f64) -> Result<Row> {
    let start = Instant::now();
    let s = solve_2d(cfg, eps)?;
    let p = s.spec.p_value();
    let grid = UnfoldGrid::new(&s.spec, cfg.sampling.per_dim, cfg.sampling.x_per_cell)?;
    let err = unfolding_error_report(&s.field, limit, p, &grid)?;
    let norm = w1p_norm(&s.field, p);
    let ratio = trace_ratio(&s.field, &s.spec, p).unwrap_or(f64::NAN);
    let (r1, o1) = remainder_integrals(&s.field, &s.spec);
    let failure = if s.converged { None } else { Some(format!("fixed point not converged ({} outer)", s.outer_iters)) };
    Ok(Row {
        eps,
        dofs: s.mesh.n_dofs(),
        newton_iters: s.newton_iters,
        outer_iters: s.outer_iters,
        fixed_point_diff: s.fixed_point_diff,
        e_lp: err.e_lp,
        e_w1p: err.e_w1p,
        apriori_norm: eps.powf(-1.0 / p) * norm,
        trace_ratio: ratio,
        r1_remainder: r1,
        o1_remainder: o1,
        clamped: err.clamped,
        wall_time: start.elapsed().as_secs_f64(),
        failure,
    })
}

/// Runs every eps of the config; rows are computed concurrently and kept in
/// sweep order. A failing eps yields a marked row.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let model = homogenized_model(cfg)?;
    let limit = solve_limit(cfg, &model)?;
    let rows: Vec<Row> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            run_row(cfg, &limit, eps).unwrap_or_else(|e| Row::failed(eps, format!("{e:#}"), start.elapsed().as_secs_f64()))
        })
        .collect();
    Ok(ConvergenceReport { config_hash: cfg.hash(), model, rows })
}
