//! Proof certificates: the per-stage results wrapped with provenance
//! (config hash, chart hash, toolchain) and written as JSON lines.
//!
//! Timings deliberately live in a sidecar log, never in certificates, so a
//! run's outputs are byte-identical regardless of thread count.

use crate::chart::{Chart, FiberCertificate};
use crate::cones::certify_unstable_disc;
use crate::error::{LibrateError, Result};
use crate::family::{FamilyCertificate, HyperbolicityCertificate};
use crate::flow::to_imatrix;
use crate::transversal::{intersection_angle_deg, IntersectionCertificate};
use ivl::Interval;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::Path;

/// SHA-256 of a value's canonical (compact) JSON serialization.
pub fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Build fingerprint recorded in every certificate.
pub fn toolchain_fingerprint() -> String {
    format!(
        "librate {} ({}-{})",
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub config_sha256: String,
    pub toolchain: String,
}

impl Provenance {
    pub fn new<T: Serialize>(config: &T) -> Result<Provenance> {
        Ok(Provenance {
            config_sha256: sha256_json(config)?,
            toolchain: toolchain_fingerprint(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProofCertificate {
    Family {
        provenance: Provenance,
        cert: FamilyCertificate,
    },
    Hyperbolicity {
        provenance: Provenance,
        cert: HyperbolicityCertificate,
    },
    Fiber {
        provenance: Provenance,
        chart_sha256: String,
        cert: FiberCertificate,
    },
    Transversal {
        provenance: Provenance,
        chart_sha256: String,
        cert: IntersectionCertificate,
    },
}

impl ProofCertificate {
    pub fn verified(&self) -> bool {
        match self {
            ProofCertificate::Family { cert, .. } => cert.verified,
            ProofCertificate::Hyperbolicity { cert, .. } => cert.verified,
            ProofCertificate::Fiber { cert, .. } => cert.verified,
            ProofCertificate::Transversal { cert, .. } => cert.verified,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProofCertificate::Family { .. } => "family",
            ProofCertificate::Hyperbolicity { .. } => "hyperbolicity",
            ProofCertificate::Fiber { .. } => "fiber",
            ProofCertificate::Transversal { .. } => "transversal",
        }
    }

    /// Re-derives the stored inclusion conditions from the stored data;
    /// errors if a `verified` flag is not supported by its own record.
    pub fn self_check(&self) -> Result<()> {
        match self {
            ProofCertificate::Family { cert, .. } => check_family(cert),
            ProofCertificate::Hyperbolicity { cert, .. } => check_hyperbolicity(cert),
            ProofCertificate::Fiber { cert, .. } => check_fiber(cert),
            ProofCertificate::Transversal { cert, .. } => check_transversal(cert),
        }
    }
}

fn fail(what: &str) -> LibrateError {
    LibrateError::VerificationFailed(format!("certificate self-check: {what}"))
}

fn check_family(cert: &FamilyCertificate) -> Result<()> {
    let bx = &cert.bx;
    bx.validate()?;
    // the Newton image must sit strictly inside the uniqueness tube J0
    let xr = Interval::centered(bx.x_c, bx.rx);
    let tube = Interval::point(bx.py_c)
        + Interval::point(bx.slope) * (xr - Interval::point(bx.x_c))
        + Interval::centered(0.0, bx.r0);
    if cert.verified && !cert.n_enclosure.interior_subset(&tube) {
        return Err(fail("Newton enclosure not interior to the J0 tube"));
    }
    // the stored slope must be consistent with the stored derivative ratio
    let ratio = (-cert.dp21).checked_div(&cert.dp23)?;
    if cert.alpha.meet(&ratio).is_empty() {
        return Err(fail("slope enclosure inconsistent with -dP21/dP23"));
    }
    if cert.verified && cert.dh_dx.contains(0.0) {
        return Err(fail("energy foliation derivative not sign-definite"));
    }
    Ok(())
}

fn check_hyperbolicity(cert: &HyperbolicityCertificate) -> Result<()> {
    let lu = cert.lambda_unstable;
    let ls = cert.lambda_stable;
    if cert.verified && !(lu.abs().lo() > 1.0 && ls.abs().hi() < 1.0) {
        return Err(fail("stored multipliers are not hyperbolic"));
    }
    if !cert.eigen_product.contains(1.0) {
        return Err(fail("eigenvalue product excludes 1"));
    }
    if (lu * ls).meet(&cert.eigen_product).is_empty() {
        return Err(fail("eigenvalue product inconsistent with the factors"));
    }
    let trace = cert.b[0][0] + cert.b[1][1];
    if (lu + ls).meet(&trace).is_empty() {
        return Err(fail("eigenvalue sum inconsistent with the trace"));
    }
    Ok(())
}

fn check_fiber(cert: &FiberCertificate) -> Result<()> {
    cert.local_box.validate()?;
    // the cone conditions are cheap to re-run from the stored hull
    let rerun = certify_unstable_disc(&to_imatrix(&cert.df_hull), &cert.cone.cone, cert.cone.m)?;
    if rerun.verified != cert.verified
        || rerun.cc1.pass != cert.cone.cc1.pass
        || rerun.cc2.pass != cert.cone.cc2.pass
    {
        return Err(fail("cone conditions do not reproduce from the stored hull"));
    }
    Ok(())
}

fn check_transversal(cert: &IntersectionCertificate) -> Result<()> {
    if cert.verified {
        if !(cert.left_image[2].hi() < 0.0 && cert.right_image[2].lo() > 0.0) {
            return Err(fail("edge images do not straddle {px = 0}"));
        }
        if !(cert.slope_a.lo() > 0.0) {
            return Err(fail("slope enclosure not positive"));
        }
    }
    let mut hull = cert.slopes[0];
    for s in &cert.slopes[1..] {
        hull = hull.hull(s);
    }
    if hull != cert.slope_a {
        return Err(fail("slope hull does not reproduce from the parts"));
    }
    let angle = intersection_angle_deg(cert.slope_a)?;
    if angle.meet(&cert.angle_deg).is_empty() {
        return Err(fail("angle inconsistent with the slope enclosure"));
    }
    Ok(())
}

/// One JSON object per line, in order.
pub fn write_jsonl(path: &Path, certs: &[ProofCertificate]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for cert in certs {
        serde_json::to_writer(&mut out, cert)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ProofCertificate>> {
    let file = std::fs::File::open(path).map_err(|_| {
        LibrateError::MissingCertificate(path.display().to_string())
    })?;
    let mut certs = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        certs.push(serde_json::from_str(&line)?);
    }
    Ok(certs)
}

/// Chart sidecar (a single JSON object, not JSON lines).
pub fn write_chart(path: &Path, chart: &Chart) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(chart)?)?;
    Ok(())
}

pub fn read_chart(path: &Path) -> Result<Chart> {
    let text = std::fs::read_to_string(path).map_err(|_| {
        LibrateError::MissingCertificate(path.display().to_string())
    })?;
    Ok(serde_json::from_str(&text)?)
}
