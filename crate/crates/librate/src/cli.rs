//! Command-line pipeline: dependency-ordered proof stages writing JSON-line
//! certificates, and CSV plot data derived from them.
//!
//! Stage order is family -> hyperbolicity -> fibers -> transversality; a
//! failed or unverified stage stops everything downstream.  Timings go to a
//! sidecar `run.log` so certificate files stay byte-identical across thread
//! counts.

use crate::cert::{
    read_chart, read_jsonl, write_chart, write_jsonl, ProofCertificate, Provenance,
};
use crate::chart::{enclose_b0, fit_chart, period_enclosure, Chart, FiberCertificate, LocalBox};
use crate::config::RunConfig;
use crate::error::{LibrateError, Result};
use crate::family::{
    chain_connected, seed_chain, verify_chain, verify_family_box, verify_hyperbolicity,
    FamilyCertificate, HyperbolicityCertificate,
};
use crate::model::hamiltonian;
use crate::transversal::{certify_transversal, SectionProbe};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "librate", version, about = "Validated proofs for Lyapunov orbits and their homoclinic intersections")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the proof pipeline up to and including a stage.
    Prove {
        #[arg(value_enum)]
        stage: Stage,
        #[arg(long)]
        config: PathBuf,
        /// Full published subdivision counts instead of the desk profile.
        #[arg(long)]
        long_run: bool,
        /// Worker threads (default: all cores); results are identical.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Emit CSV plot data from existing certificates.
    Plot {
        #[arg(long, value_enum)]
        what: PlotKind,
        #[arg(long)]
        out: PathBuf,
        /// Config locating the certificate directory (default config if omitted).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Stage {
    Family,
    Hyperbolicity,
    Fibers,
    Transversal,
}

#[derive(Copy, Clone, ValueEnum)]
pub enum PlotKind {
    Hill,
    Family,
    Slopes,
    Fibers,
    Section,
}

/// In-memory results handed from stage to stage.
#[derive(Default)]
struct PipelineState {
    family: Option<FamilyCertificate>,
    hyper: Option<HyperbolicityCertificate>,
    chart: Option<Chart>,
    fiber: Option<FiberCertificate>,
}

fn log_timing(dir: &Path, line: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))?;
    writeln!(f, "{line}")?;
    Ok(())
}

/// Runs the given stages in order (an empty list is a no-op success);
/// returns whether every certificate verified.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage], long_run: bool) -> Result<bool> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_dir);
    let provenance = Provenance::new(cfg)?;
    let mut state = PipelineState::default();
    for &s in stages {
        let t0 = Instant::now();
        let ok = run_stage(cfg, s, long_run, &provenance, &dir, &mut state)?;
        log_timing(
            &dir,
            &format!("stage {}: {:.3} s", stage_name(s), t0.elapsed().as_secs_f64()),
        )?;
        if !ok {
            eprintln!("stage {} did not verify; stopping", stage_name(s));
            return Ok(false);
        }
        println!("stage {}: verified", stage_name(s));
    }
    Ok(true)
}

/// Dependency-ordered pipeline up to and including `stage`.
pub fn run_prove(cfg: &RunConfig, stage: Stage, long_run: bool) -> Result<bool> {
    let all = [
        Stage::Family,
        Stage::Hyperbolicity,
        Stage::Fibers,
        Stage::Transversal,
    ];
    let stages: Vec<Stage> = all.into_iter().filter(|s| *s <= stage).collect();
    run_stages(cfg, &stages, long_run)
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Family => "family",
        Stage::Hyperbolicity => "hyperbolicity",
        Stage::Fibers => "fibers",
        Stage::Transversal => "transversal",
    }
}

fn run_stage(
    cfg: &RunConfig,
    s: Stage,
    long_run: bool,
    provenance: &Provenance,
    dir: &Path,
    state: &mut PipelineState,
) -> Result<bool> {
    let bx = cfg.family.family_box();
    match s {
        Stage::Family => {
            let reference = verify_family_box(&bx, cfg.mu)?;
            let fo = &cfg.family;
            let n = if long_run { fo.long_chain_n } else { fo.chain_n };
            let mut certs = vec![reference.clone()];
            let mut connected = true;
            if n > 0 {
                let seeds = seed_chain(
                    bx.x_c - fo.chain_offset,
                    n,
                    fo.chain_rx,
                    (bx.x_c, bx.py_c),
                    cfg.mu,
                )?;
                let chain = verify_chain(&seeds, fo.chain_rx, fo.chain_r0, fo.chain_r1, cfg.mu)?;
                connected = chain_connected(&chain);
                certs.extend(chain);
            }
            let ok = connected && certs.iter().all(|c| c.verified);
            let wrapped: Vec<ProofCertificate> = certs
                .iter()
                .map(|c| ProofCertificate::Family {
                    provenance: provenance.clone(),
                    cert: c.clone(),
                })
                .collect();
            write_jsonl(&dir.join("family.jsonl"), &wrapped)?;
            state.family = Some(reference);
            Ok(ok)
        }
        Stage::Hyperbolicity => {
            let cert = verify_hyperbolicity(&bx, cfg.mu)?;
            let ok = cert.verified;
            write_jsonl(
                &dir.join("hyperbolicity.jsonl"),
                &[ProofCertificate::Hyperbolicity {
                    provenance: provenance.clone(),
                    cert: cert.clone(),
                }],
            )?;
            state.hyper = Some(cert);
            Ok(ok)
        }
        Stage::Fibers => {
            let t = period_enclosure(&bx, cfg.mu)?;
            let chart = fit_chart(&bx, t, cfg.mu, cfg.chart.degree, cfg.chart.sigma)?;
            write_chart(&dir.join("chart.json"), &chart)?;
            let fo = &cfg.fibers;
            let lb = LocalBox {
                b0: enclose_b0(&chart, &bx)?,
                x_lo: fo.x_lo,
                x_hi: if long_run { fo.long_x_hi } else { fo.x_hi },
                n: if long_run { fo.long_n } else { fo.n },
            };
            let cert =
                crate::chart::certify_fibers(&chart, &lb, fo.alpha, fo.m, fo.refine, cfg.mu)?;
            let ok = cert.verified;
            write_jsonl(
                &dir.join("fibers.jsonl"),
                &[ProofCertificate::Fiber {
                    provenance: provenance.clone(),
                    chart_sha256: crate::cert::sha256_json(&chart)?,
                    cert: cert.clone(),
                }],
            )?;
            state.chart = Some(chart);
            state.fiber = Some(cert);
            Ok(ok)
        }
        Stage::Transversal => {
            let (chart, fiber, family, hyper) = match (
                &state.chart,
                &state.fiber,
                &state.family,
                &state.hyper,
            ) {
                (Some(c), Some(fb), Some(fa), Some(h)) => (c, fb, fa, h),
                _ => {
                    return Err(LibrateError::MissingCertificate(
                        "transversality needs the upstream stages in the same run".into(),
                    ))
                }
            };
            let to = &cfg.transversal;
            let probe = SectionProbe {
                x_m: to.x_m,
                half_width: to.half_width,
                n_parts: if long_run { to.long_n_parts } else { to.n_parts },
                refine: if long_run { to.long_refine } else { to.refine },
            };
            let cert = certify_transversal(chart, &probe, fiber, family, hyper, cfg.mu)?;
            let ok = cert.verified;
            write_jsonl(
                &dir.join("transversal.jsonl"),
                &[ProofCertificate::Transversal {
                    provenance: provenance.clone(),
                    chart_sha256: crate::cert::sha256_json(chart)?,
                    cert,
                }],
            )?;
            Ok(ok)
        }
    }
}

fn first_cert(dir: &Path, file: &str) -> Result<ProofCertificate> {
    let certs = read_jsonl(&dir.join(file))?;
    certs
        .into_iter()
        .next()
        .ok_or_else(|| LibrateError::MissingCertificate(format!("{file} is empty")))
}

/// Writes one CSV file derived from the certificates in `cfg.output_dir`.
pub fn run_plot(cfg: &RunConfig, what: PlotKind, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(out)?;
    match what {
        PlotKind::Hill => plot_hill(cfg, &dir, out),
        PlotKind::Family => plot_family(&dir, out),
        PlotKind::Slopes => plot_slopes(&dir, out),
        PlotKind::Fibers => plot_fibers(&dir, out),
        PlotKind::Section => plot_section(&dir, out),
    }
}

fn plot_hill(cfg: &RunConfig, dir: &Path, out: &Path) -> Result<PathBuf> {
    // energy level of the certified family center
    let cert = first_cert(dir, "family.jsonl")?;
    let ProofCertificate::Family { cert, .. } = cert else {
        return Err(LibrateError::MissingCertificate("family.jsonl".into()));
    };
    let h0 = hamiltonian(&[cert.bx.x_c, 0.0, 0.0, cert.bx.py_c], cfg.mu);
    let path = out.join("hill.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "x,y,omega,forbidden")?;
    let n = 301usize;
    for i in 0..n {
        let x = -1.5 + 3.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let y = -1.5 + 3.0 * j as f64 / (n - 1) as f64;
            // Omega = H at zero velocity, negated: H(q, p = (-y, x)) = -Omega
            let omega = -hamiltonian(&[x, y, -y, x], cfg.mu);
            let forbidden = (omega < -h0) as u8;
            writeln!(w, "{x},{y},{omega},{forbidden}")?;
        }
    }
    w.flush()?;
    Ok(path)
}

fn plot_family(dir: &Path, out: &Path) -> Result<PathBuf> {
    let certs = read_jsonl(&dir.join("family.jsonl"))?;
    let path = out.join("family.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "x_c,py_c,kappa_lo,kappa_hi,slope_lo,slope_hi,dhdx_lo,dhdx_hi")?;
    for pc in &certs {
        let ProofCertificate::Family { cert, .. } = pc else {
            continue;
        };
        let tube = cert.bx.tube_at(cert.bx.x_c);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            cert.bx.x_c,
            cert.bx.py_c,
            tube.lo(),
            tube.hi(),
            cert.alpha.lo(),
            cert.alpha.hi(),
            cert.dh_dx.lo(),
            cert.dh_dx.hi()
        )?;
    }
    w.flush()?;
    Ok(path)
}

fn plot_slopes(dir: &Path, out: &Path) -> Result<PathBuf> {
    let ProofCertificate::Transversal { cert, .. } = first_cert(dir, "transversal.jsonl")? else {
        return Err(LibrateError::MissingCertificate("transversal.jsonl".into()));
    };
    let path = out.join("slopes.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "part,slope_lo,slope_hi")?;
    for (i, s) in cert.slopes.iter().enumerate() {
        writeln!(w, "{i},{},{}", s.lo(), s.hi())?;
    }
    w.flush()?;
    Ok(path)
}

fn plot_fibers(dir: &Path, out: &Path) -> Result<PathBuf> {
    let chart = read_chart(&dir.join("chart.json"))?;
    let ProofCertificate::Fiber { cert, .. } = first_cert(dir, "fibers.jsonl")? else {
        return Err(LibrateError::MissingCertificate("fibers.jsonl".into()));
    };
    let path = out.join("fibers.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "part,x_lo,x_hi,y_lo,y_hi,px_lo,px_hi,py_lo,py_hi")?;
    for i in 0..cert.local_box.n {
        let amb = chart.to_ambient(&cert.local_box.part(i, cert.alpha));
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{}",
            amb[0].lo(),
            amb[0].hi(),
            amb[1].lo(),
            amb[1].hi(),
            amb[2].lo(),
            amb[2].hi(),
            amb[3].lo(),
            amb[3].hi()
        )?;
    }
    w.flush()?;
    Ok(path)
}

fn plot_section(dir: &Path, out: &Path) -> Result<PathBuf> {
    let ProofCertificate::Transversal { cert, .. } = first_cert(dir, "transversal.jsonl")? else {
        return Err(LibrateError::MissingCertificate("transversal.jsonl".into()));
    };
    let path = out.join("section.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "edge,x_lo,x_hi,px_lo,px_hi")?;
    for (label, img) in [("left", &cert.left_image), ("right", &cert.right_image)] {
        writeln!(
            w,
            "{label},{},{},{},{}",
            img[0].lo(),
            img[0].hi(),
            img[2].lo(),
            img[2].hi()
        )?;
    }
    w.flush()?;
    Ok(path)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.cmd {
        Command::Prove {
            stage,
            config,
            long_run,
            threads,
        } => {
            if let Some(t) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                    eprintln!("error: could not configure {t} threads: {e}");
                    return 2;
                }
            }
            RunConfig::load(&config).and_then(|cfg| run_prove(&cfg, stage, long_run))
        }
        Command::Plot { what, out, config } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p),
                None => Ok(RunConfig::default()),
            };
            cfg.and_then(|cfg| run_plot(&cfg, what, &out)).map(|path| {
                println!("wrote {}", path.display());
                true
            })
        }
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_prove_and_plot() {
        // [TRIVIAL] argument surface
        let cli = Cli::try_parse_from([
            "librate",
            "prove",
            "transversal",
            "--config",
            "cfg.json",
            "--long-run",
            "--threads",
            "4",
        ])
        .unwrap();
        match cli.cmd {
            Command::Prove {
                stage,
                long_run,
                threads,
                ..
            } => {
                assert!(stage == Stage::Transversal && long_run && threads == Some(4));
            }
            _ => panic!("expected prove"),
        }
        assert!(Cli::try_parse_from(["librate", "plot", "--what", "hill", "--out", "p"]).is_ok());
        assert!(Cli::try_parse_from(["librate", "prove", "everything", "--config", "c"]).is_err());
    }

    #[test]
    fn empty_pipeline_is_noop_success() {
        // [TRIVIAL] nothing to run, nothing to fail
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.output_dir = dir.path().join("out").display().to_string();
        assert!(run_stages(&cfg, &[], false).unwrap());
        assert!(!PathBuf::from(&cfg.output_dir).join("family.jsonl").exists());
    }

    #[test]
    fn stage_order_is_total() {
        assert!(Stage::Family < Stage::Hyperbolicity);
        assert!(Stage::Hyperbolicity < Stage::Fibers);
        assert!(Stage::Fibers < Stage::Transversal);
    }

    #[test]
    fn pipeline_through_hyperbolicity_writes_certificates() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.family.chain_n = 2;
        cfg.output_dir = dir.path().join("out").display().to_string();
        let ok = run_prove(&cfg, Stage::Hyperbolicity, false).unwrap();
        assert!(ok);
        let out = PathBuf::from(&cfg.output_dir);
        // [PAPER] the emitted certificates reproduce the published slope
        // enclosure for the reference box
        let family = read_jsonl(&out.join("family.jsonl")).unwrap();
        assert_eq!(family.len(), 3); // reference box + 2 chain boxes
        for c in &family {
            assert!(c.verified());
            c.self_check().unwrap();
        }
        let hyper = read_jsonl(&out.join("hyperbolicity.jsonl")).unwrap();
        assert_eq!(hyper.len(), 1);
        hyper[0].self_check().unwrap();
        assert!(out.join("run.log").exists());

        let plots = dir.path().join("plots");
        let path = run_plot(&cfg, PlotKind::Family, &plots).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 4); // header + 3 certificates
        assert!(text.starts_with("x_c,py_c,kappa_lo,kappa_hi"));
    }

    #[test]
    fn plot_without_certificates_is_missing_certificate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.output_dir = dir.path().join("empty").display().to_string();
        let err = run_plot(&cfg, PlotKind::Family, &dir.path().join("plots")).unwrap_err();
        assert!(matches!(err, LibrateError::MissingCertificate(_)), "{err}");
    }
}
