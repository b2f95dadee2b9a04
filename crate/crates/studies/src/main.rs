use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use thinpl_core::fem::SolverOptions;
use thinpl_core::geometry::{build_cell_mesh, PeriodicProfile, ProfileConfig};
use thinpl_core::homogenize::{solve_cell_problem, Regime};
use thinpl_studies::coefficients::{coefficient_table, run_coefficient_table, CoeffConfig};
use thinpl_studies::csvout::{num, Table, TOOL};
use thinpl_studies::identity::run_identity_suite;
use thinpl_studies::pipeline::{homogenized_model, solve_2d, solve_limit};
use thinpl_studies::{run_convergence_study, StudyConfig};

#[derive(Parser)]
#[command(name = "thinpl", version, about = "p-Laplacian problems on rough thin domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated eps values replacing the configured sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Exponent(s); a comma-separated list for `coeff`.
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Oscillation regime: sets alpha to 0.5, 1 or 1.5.
    #[arg(long, global = true)]
    alpha_case: Option<Regime>,
}

#[derive(Subcommand)]
enum Command {
    /// Table of q in the three regimes.
    Coeff,
    /// Periodic cell problem; writes `y1,y2,w` per vertex.
    Cell,
    /// Thin-domain solve at the first eps; writes `x,y,u` per vertex.
    Solve2d {
        /// Also write the triangle table here.
        #[arg(long)]
        mesh_out: Option<PathBuf>,
    },
    /// 1D limit problem; writes `x,u`.
    Solve1d,
    /// Identity checks at every eps.
    Verify {
        /// Corrupt the strip tags first (negative control).
        #[arg(long)]
        mis_tag: bool,
    },
    /// Convergence sweep.
    Study,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellConfig {
    g: ProfileConfig,
    p: f64,
    #[serde(default = "default_cell_h")]
    h: f64,
    #[serde(default)]
    solver: SolverOptions,
}

fn default_cell_h() -> f64 {
    1.0 / 64.0
}

impl Cli {
    fn single_p(&self) -> Result<Option<f64>> {
        match self.p.as_deref() {
            None => Ok(None),
            Some([p]) => Ok(Some(*p)),
            Some(_) => bail!("--p takes a single value for this command"),
        }
    }

    fn study_config(&self) -> Result<StudyConfig> {
        let path = self.config.as_ref().context("--config is required")?;
        let mut cfg = StudyConfig::load(path)?;
        if let Some(e) = &self.eps_list {
            cfg.eps_list = e.clone();
        }
        if let Some(p) = self.single_p()? {
            cfg.p = p;
        }
        if let Some(r) = self.alpha_case {
            cfg.set_regime(r);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_path(&self, cfg_out: Option<&str>, fallback: &str) -> PathBuf {
        self.out.clone().or_else(|| cfg_out.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(fallback))
    }
}

fn write_rows(path: &Path, header: &[String], columns: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for h in header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "{columns}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn coeff(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<CoeffConfig>(&text).context("parsing coefficient config")?
        }
        None => CoeffConfig::default(),
    };
    if let Some(p) = &cli.p {
        cfg.p_list = p.clone();
    }
    let rows = run_coefficient_table(&cfg);
    let table = coefficient_table(&cfg, &rows);
    match &cli.out {
        Some(path) => table.save(path)?,
        None => print!("{}", table.to_string()),
    }
    Ok(())
}

fn cell(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<CellConfig>(&text).context("parsing cell config")?
        }
        None => CellConfig {
            g: PeriodicProfile::<f64>::cosine(2.0, 1.0, 1.0)?.config(),
            p: 2.0,
            h: default_cell_h(),
            solver: SolverOptions::default(),
        },
    };
    if let Some(p) = cli.single_p()? {
        cfg.p = p;
    }
    let g = PeriodicProfile::from_config(&cfg.g)?;
    let mesh = Arc::new(build_cell_mesh(&g, cfg.h)?);
    let sol = solve_cell_problem(&mesh, cfg.p, &cfg.solver)?;
    eprintln!("q = {:.12} (residual {:.3e}, {} Newton steps)", sol.q_value, sol.residual, sol.iterations);
    let path = cli.out_path(None, "cell.csv");
    let text = toml::to_string(&cfg)?;
    let hash = sha_hex(&text);
    let header = vec![format!("{TOOL} cell config_sha256={hash}"), format!("q={}", num(sol.q_value))];
    let rows = mesh.vertices.iter().enumerate().map(|(v, y)| format!("{},{},{}", num(y[0]), num(y[1]), num(sol.w.at_vertex(v))));
    write_rows(&path, &header, "y1,y2,w", rows)
}

fn sha_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn solve2d(cli: &Cli, mesh_out: Option<&Path>) -> Result<()> {
    let cfg = cli.study_config()?;
    let eps = cfg.eps_list[0];
    let s = solve_2d(&cfg, eps)?;
    eprintln!("eps = {eps}: {} dofs, {} Newton steps, {} outer steps", s.mesh.n_dofs(), s.newton_iters, s.outer_iters);
    let path = cli.out_path(None, "solve2d.csv");
    let header = vec![format!("{TOOL} solve2d config_sha256={}", cfg.hash()), format!("eps={}", num(eps))];
    let rows = s.mesh.vertices.iter().enumerate().map(|(v, p)| format!("{},{},{}", num(p[0]), num(p[1]), num(s.field.at_vertex(v))));
    write_rows(&path, &header, "x,y,u", rows)?;
    if let Some(mp) = mesh_out {
        let f = File::create(mp).with_context(|| format!("creating {}", mp.display()))?;
        let mut w = BufWriter::new(f);
        s.mesh.write_triangles(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn solve1d(cli: &Cli) -> Result<()> {
    let cfg = cli.study_config()?;
    let model = homogenized_model(&cfg)?;
    let sol = solve_limit(&cfg, &model)?;
    eprintln!("regime {} q = {:.12}", model.regime, model.q);
    let path = cli.out_path(None, "solve1d.csv");
    let header = vec![format!("{TOOL} solve1d config_sha256={}", cfg.hash()), format!("regime={} q={}", model.regime, num(model.q))];
    let rows = sol.rows().into_iter().map(|(x, u)| format!("{},{}", num(x), num(u)));
    write_rows(&path, &header, "x,u", rows)
}

fn verify(cli: &Cli, tamper: bool) -> Result<bool> {
    let cfg = cli.study_config()?;
    let report = run_identity_suite(&cfg, tamper)?;
    println!("{:<10} {:<22} {:<6} {:>12} {:>12}  result", "eps", "check", "kind", "value", "threshold");
    for c in &report.checks {
        let eps = if c.eps.is_nan() { "sweep".to_string() } else { format!("{:.6}", c.eps) };
        let kind = match c.kind {
            thinpl_studies::identity::CheckKind::Exact => "exact",
            thinpl_studies::identity::CheckKind::Trend => "trend",
        };
        println!(
            "{eps:<10} {:<22} {kind:<6} {:>12.4e} {:>12.4e}  {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(path) = &cli.out {
        report.table().save(path)?;
    }
    Ok(report.all_pass())
}

fn study(cli: &Cli) -> Result<()> {
    let cfg = cli.study_config()?;
    let report = run_convergence_study(&cfg)?;
    for r in &report.rows {
        eprintln!("eps = {:.6}: e_lp = {:.4e}, {:.2} s", r.eps, r.e_lp, r.wall_time);
    }
    let path = cli.out_path(cfg.output.as_deref(), "study.csv");
    let table: Table = report.table();
    table.save(&path)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("setting up the thread pool")?;
    }
    match &cli.command {
        Command::Coeff => coeff(&cli),
        Command::Cell => cell(&cli),
        Command::Solve2d { mesh_out } => solve2d(&cli, mesh_out.as_deref()),
        Command::Solve1d => solve1d(&cli),
        Command::Verify { mis_tag } => {
            if !verify(&cli, *mis_tag)? {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Study => study(&cli),
    }
}
