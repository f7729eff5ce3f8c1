use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ahlfors::approx::{weak_oka1_patch, PatchOptions};
use ahlfors::config::RunConfig;
use ahlfors::conformal::{kernel_convergence_gap, riemann_map, ConformalOptions};
use ahlfors::current::evaluate_disc;
use ahlfors::disc::LiftedDisc;
use ahlfors::geometry::{AdmissibleSetGeometry, DumbbellDomain};
use ahlfors::pipeline::{cauchy_check, run_pipeline, schedule_discs, verify_amalgamation, LedgerRow, TargetCurrentSpec};
use ahlfors::torus::test_forms;
use ahlfors::{checkpoint, report, Complex64, Error, Result};

/// Overrides the output directory of every command.
const OUT_ENV: &str = "AHLFORS_OUT";

#[derive(Parser)]
#[command(name = "ahlfors", version, about = "Ahlfors currents and disc amalgamation on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (beats the config file and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged construction, writing one checkpoint per stage.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue after the checkpoints already in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Re-check existing checkpoints without modifying them.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Area, boundary length, ratio and pairings of one disc or of the catalog.
    Current {
        #[command(flatten)]
        common: Common,
        /// Disc radius for a one-dimensional polynomial given by --coeff.
        #[arg(long)]
        radius: Option<f64>,
        /// Monomial coefficient `re,im`, repeated in increasing degree.
        #[arg(long = "coeff", value_parser = parse_complex)]
        coeffs: Vec<Complex64>,
    },
    /// Distance to the identity of Riemann maps onto shrinking dumbbells.
    ConformalTest {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.2, 0.1, 0.05])]
        widths: Vec<f64>,
        /// Sample circle |z| = rho * R.
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 2048)]
        nodes: usize,
    },
    /// Approximate z on D(0,1) and z^2 on D(4,1) by one entire lift.
    PatchDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        budget: f64,
        #[arg(long, default_value_t = 4.0)]
        center: f64,
    },
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err("expected `re` or `re,im`".into()),
    }
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok((cfg, out))
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

/// Ledger failures give exit status 2.
fn ledger_status(rows: &[LedgerRow]) -> u8 {
    let failed: Vec<&LedgerRow> = rows.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        eprintln!("ledger: stage {} slot {} failed: {:e} >= {:e}", r.stage, r.slot, r.lhs, r.bound);
    }
    if failed.is_empty() {
        0
    } else {
        2
    }
}

fn ratio_traces(rows: &[LedgerRow]) -> Vec<(String, Vec<f64>)> {
    ["t3.ratio", "t5.ratio", "t3.pairings", "t5.pairings"]
        .iter()
        .map(|slot| {
            let ys = rows.iter().filter(|r| r.slot == *slot).map(|r| (r.lhs.max(1e-16)).log10()).collect();
            (format!("log10 {slot}"), ys)
        })
        .filter(|s: &(String, Vec<f64>)| !s.1.is_empty())
        .collect()
}

fn cmd_run(common: &Common, resume: bool) -> Result<u8> {
    let (cfg, out) = common.load()?;
    let pcfg = cfg.pipeline()?;
    let dir = checkpoint_dir(&out);
    let previous = if resume && dir.is_dir() { checkpoint::read_all(&dir)? } else { Vec::new() };
    if !resume && dir.is_dir() {
        for cp in checkpoint::read_all(&dir)? {
            fs::remove_file(dir.join(checkpoint::file_name(cp.stage)))?;
        }
    }
    let mut save = |cp: &ahlfors::pipeline::StageCheckpoint| -> Result<()> {
        let path = checkpoint::write(&dir, cp)?;
        eprintln!("stage {} done: R = {}, eps = {:e} -> {}", cp.stage, cp.radius, cp.epsilon, path.display());
        Ok(())
    };
    let output = match run_pipeline(&pcfg, previous, &mut save) {
        Ok(o) => o,
        Err(Error::StageFailed { stage, source, ledger }) => {
            write(&out, "ledger.csv", &report::ledger_csv(ledger.rows())?)?;
            if cfg.output.svg {
                write(&out, "ledger.svg", &report::ledger_svg(ledger.rows()))?;
            }
            return Err(Error::StageFailed { stage, source, ledger });
        }
        Err(e) => return Err(e),
    };
    let mut rows = output.ledger.rows().to_vec();
    let claim = verify_amalgamation(output.final_disc(), &output.stages, &output.targets, &pcfg.torus, &pcfg.grid)?;
    rows.extend(claim.rows);
    rows.extend(cauchy_check(&output.stages, &pcfg.torus, pcfg.exec));
    write(&out, "ledger.csv", &report::ledger_csv(&rows)?)?;
    if cfg.output.svg {
        write(&out, "ledger.svg", &report::ledger_svg(&rows))?;
        write(&out, "traces.svg", &report::traces_svg(&ratio_traces(&rows)))?;
    }
    Ok(ledger_status(&rows))
}

fn cmd_verify(common: &Common) -> Result<u8> {
    let (cfg, out) = common.load()?;
    let pcfg = cfg.pipeline()?;
    let dir = checkpoint_dir(&out);
    let stages = checkpoint::read_all(&dir)?;
    if stages.is_empty() {
        return Err(Error::Checkpoint(format!("no checkpoints in {}", dir.display())));
    }
    let schedule = schedule_discs(&pcfg.catalog, stages.len())?;
    let targets = TargetCurrentSpec::build(&schedule, &pcfg.torus, test_forms(&pcfg.torus, pcfg.forms), &pcfg.grid)?;
    let mut rows: Vec<LedgerRow> = stages.iter().flat_map(|cp| cp.rows.iter().cloned()).collect();
    let last = stages.last().expect("non-empty");
    rows.extend(verify_amalgamation(&last.disc, &stages, &targets, &pcfg.torus, &pcfg.grid)?.rows);
    rows.extend(cauchy_check(&stages, &pcfg.torus, pcfg.exec));
    let text = report::ledger_csv(&rows)?;
    print!("{text}");
    Ok(ledger_status(&rows))
}

fn cmd_current(common: &Common, radius: Option<f64>, coeffs: &[Complex64]) -> Result<u8> {
    let (cfg, out) = common.load()?;
    let torus = cfg.torus()?;
    let grid = cfg.grid();
    let discs = if radius.is_some() || !coeffs.is_empty() {
        if torus.dim() != 1 {
            return Err(Error::InvalidParameter("--coeff describes a one-dimensional disc".into()));
        }
        let mono = if coeffs.is_empty() { vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] } else { coeffs.to_vec() };
        vec![LiftedDisc::from_monomials(Complex64::new(0.0, 0.0), radius.unwrap_or(1.0), vec![mono])?]
    } else {
        cfg.catalog()?
    };
    let forms = test_forms(&torus, cfg.pipeline.forms);
    let mut summary = Vec::new();
    let mut pairings = Vec::new();
    for (i, d) in discs.iter().enumerate() {
        let e = evaluate_disc(d, &torus, &forms, &grid)?;
        summary.push(vec![
            i.to_string(),
            d.radius().to_string(),
            e.area.to_string(),
            e.boundary_length.to_string(),
            e.ratio.to_string(),
        ]);
        for (f, p) in forms.iter().zip(&e.pairings) {
            pairings.push(vec![i.to_string(), f.index.to_string(), p.to_string()]);
        }
    }
    let text = report::table(&["disc", "radius", "area", "length", "ratio"], summary)?;
    print!("{text}");
    write(&out, "current.csv", &text)?;
    write(&out, "pairings.csv", &report::table(&["disc", "form", "pairing"], pairings)?)?;
    Ok(0)
}

fn cmd_conformal(common: &Common, widths: &[f64], rho: f64, nodes: usize) -> Result<u8> {
    let (cfg, out) = common.load()?;
    let domains = widths
        .iter()
        .map(|&w| DumbbellDomain::new(1.0, 3.0, 1.0, w, None, nodes))
        .collect::<Result<Vec<_>>>()?;
    let opts = ConformalOptions { boundary_nodes: nodes, exec: cfg.exec(), ..Default::default() };
    let gaps = kernel_convergence_gap(&domains, rho, &opts)?;
    let text = report::table(&["w", "gap"], widths.iter().zip(&gaps).map(|(w, g)| vec![w.to_string(), g.to_string()]))?;
    print!("{text}");
    write(&out, "conformal.csv", &text)?;
    if cfg.output.svg {
        if let Some(d) = domains.last() {
            let map = riemann_map(d, 1.0, &opts)?;
            write(&out, "conformal.svg", &report::conformal_svg(&map, &[0.3, 0.5, 0.7, 0.9]))?;
        }
    }
    Ok(0)
}

fn cmd_patch(common: &Common, budget: f64, center: f64) -> Result<u8> {
    let (cfg, out) = common.load()?;
    let torus = cfg.torus()?;
    if torus.dim() != 1 {
        return Err(Error::InvalidParameter("the patch demo runs on a one-dimensional torus".into()));
    }
    let c = Complex64::new(center, 0.0);
    let geometry = AdmissibleSetGeometry::two_discs(1.0, center, 1.0);
    geometry.validate()?;
    let f1 = LiftedDisc::identity(1.0);
    // (z - c + c)^2 expanded about c
    let f2 = LiftedDisc::from_monomials(c, 1.0, vec![vec![c * c, 2.0 * c, Complex64::new(1.0, 0.0)]])?;
    let opts = PatchOptions { exec: cfg.exec(), ..Default::default() };
    let (_, rep) = weak_oka1_patch(&geometry, &f1, &f2, budget, &torus, &opts)?;
    let third = budget / 3.0;
    let rows = [("e1", rep.e1, third), ("e2", rep.e2, third), ("e3", rep.e3, third), ("total", rep.total, budget)];
    let text = report::table(
        &["quantity", "value", "bound", "pass"],
        rows.iter().map(|(n, v, b)| vec![n.to_string(), v.to_string(), b.to_string(), (v <= b).to_string()]),
    )?;
    print!("{text}");
    write(&out, "patch.csv", &text)?;
    if cfg.output.svg {
        write(&out, "patch.svg", &report::geometry_svg(&geometry))?;
    }
    let ledger: Vec<LedgerRow> = rows
        .iter()
        .map(|(n, v, b)| LedgerRow { stage: 0, slot: format!("patch.{n}"), lhs: *v, bound: *b, pass: v <= b })
        .collect();
    Ok(ledger_status(&ledger))
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { common, resume } => cmd_run(common, *resume),
        Command::Verify { common } => cmd_verify(common),
        Command::Current { common, radius, coeffs } => cmd_current(common, *radius, coeffs),
        Command::ConformalTest { common, widths, rho, nodes } => cmd_conformal(common, widths, *rho, *nodes),
        Command::PatchDemo { common, budget, center } => cmd_patch(common, *budget, *center),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(parse_complex("1, -0.5").unwrap(), Complex64::new(1.0, -0.5));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }
}
