//! On-disk cache of eigenform and plus-space coefficient tables.
//!
//! Layout: `<root>/manifest.json` lists every entry with its SHA-256; data
//! files sit beside it. Writers hold `<file>.lock` (created exclusively)
//! while writing, and `manifest.lock` while rewriting the manifest.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mfres::arith::{isqrt, PrimeTable};
use mfres::halfint::{plus_eigenbasis, PlusEigenbasis, PlusSpace};
use mfres::modforms::{dim_cusp_forms, hecke_eigenforms, Eigenform, PrimeCoeffs};
use mfres::qseries::{header_value, parse_header, ExactSeries};
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

const LOCK_WAIT: Duration = Duration::from_secs(120);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Eigenform,
    Plusform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub kind: Kind,
    /// Weight `2k` for eigenforms, `k` for plus forms.
    pub weight: u32,
    pub precision: u64,
    /// Mantissa bits of numeric data; absent for exact data.
    pub bits: Option<u32>,
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Manifest {
    entries: Vec<Entry>,
}

/// How a cached object was obtained.
#[derive(Clone, Debug, Serialize)]
pub struct CacheStatus {
    pub file: String,
    pub sha256: String,
    pub reused: bool,
    /// Why an existing entry was not used.
    pub rebuilt_because: Option<String>,
}

pub struct CacheManifest {
    root: PathBuf,
}

fn env_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Env(format!("cache {}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An exclusive lock file, removed on drop.
struct Lock {
    path: PathBuf,
}

impl Lock {
    fn acquire(path: PathBuf) -> Result<Lock, CliError> {
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(Lock { path }),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_WAIT {
                        return Err(env_err(&path, "lock held too long; remove it if no writer is running"));
                    }
                    std::thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(env_err(&path, format!("cannot create lock: {e}"))),
            }
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl CacheManifest {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| env_err(&root, format!("cannot create cache directory: {e}")))?;
        let c = CacheManifest { root };
        c.read_manifest()?;
        Ok(c)
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn read_manifest(&self) -> Result<Manifest, CliError> {
        let path = self.manifest_path();
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| env_err(&path, format!("unreadable manifest: {e}"))),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(env_err(&path, e)),
        }
    }

    /// The most precise usable entry: precision at least `min_prec` and, for
    /// numeric data, at least `bits` of mantissa.
    fn lookup(&self, kind: Kind, weight: u32, min_prec: u64, bits: Option<u32>) -> Result<(Option<Entry>, Option<String>), CliError> {
        let entries = self.read_manifest()?.entries;
        let same: Vec<&Entry> = entries.iter().filter(|e| e.kind == kind && e.weight == weight).collect();
        let usable = same
            .iter()
            .filter(|e| e.precision >= min_prec && bits.is_none_or(|b| e.bits.is_none_or(|eb| eb >= b)))
            .max_by_key(|e| (e.precision, e.bits));
        match usable {
            Some(e) => Ok((Some((*e).clone()), None)),
            None if same.is_empty() => Ok((None, None)),
            None => Ok((None, Some("cached precision is below the request".into()))),
        }
    }

    /// The file's contents if its hash matches the manifest.
    fn read_verified(&self, e: &Entry) -> Result<Option<String>, CliError> {
        let path = self.root.join(&e.file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(err) => return Err(env_err(&path, err)),
        };
        if sha256_hex(&bytes) != e.sha256 {
            log::warn!("rejecting {}: content hash does not match the manifest", path.display());
            return Ok(None);
        }
        String::from_utf8(bytes).map(Some).map_err(|_| env_err(&path, "not UTF-8"))
    }

    fn store(&self, kind: Kind, weight: u32, precision: u64, bits: Option<u32>, text: &str) -> Result<Entry, CliError> {
        let name = match (kind, bits) {
            (Kind::Eigenform, None) => format!("eigenform-w{weight}-p{precision}.txt"),
            (Kind::Eigenform, Some(b)) => format!("eigenform-w{weight}-p{precision}-b{b}.txt"),
            (Kind::Plusform, _) => format!("plus-k{weight}-p{precision}.txt"),
        };
        let path = self.root.join(&name);
        let _entry_lock = Lock::acquire(self.root.join(format!("{name}.lock")))?;
        let tmp = self.root.join(format!("{name}.tmp"));
        fs::write(&tmp, text).map_err(|e| env_err(&tmp, format!("cannot write: {e}")))?;
        fs::rename(&tmp, &path).map_err(|e| env_err(&path, e))?;
        let entry = Entry {
            kind,
            weight,
            precision,
            bits,
            file: name,
            sha256: sha256_hex(text.as_bytes()),
        };
        let _manifest_lock = Lock::acquire(self.root.join("manifest.lock"))?;
        let mut m = self.read_manifest()?;
        m.entries.retain(|e| e.file != entry.file);
        m.entries.push(entry.clone());
        m.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        let mpath = self.manifest_path();
        let mtmp = self.root.join("manifest.json.tmp");
        fs::write(&mtmp, json + "\n").map_err(|e| env_err(&mtmp, format!("cannot write: {e}")))?;
        fs::rename(&mtmp, &mpath).map_err(|e| env_err(&mpath, e))?;
        Ok(entry)
    }

    /// Hecke eigenforms of `weight` with prime coefficients up to at least
    /// `prec_primes`.
    pub fn eigenforms(&self, weight: u32, prec_primes: u64, bits: u32) -> Result<(Vec<Eigenform>, CacheStatus), CliError> {
        let numeric_bits = (dim_cusp_forms(weight) > 1).then_some(bits);
        let (hit, mut why) = self.lookup(Kind::Eigenform, weight, prec_primes, numeric_bits)?;
        if let Some(e) = hit {
            if let Some(text) = self.read_verified(&e)? {
                match parse_eigenforms(&text) {
                    Ok(forms) => {
                        let forms = match numeric_bits {
                            Some(b) => forms.into_iter().map(|f| round_to(f, b)).collect::<Result<_, _>>()?,
                            None => forms,
                        };
                        return Ok((
                            forms,
                            CacheStatus {
                                file: e.file,
                                sha256: e.sha256,
                                reused: true,
                                rebuilt_because: None,
                            },
                        ));
                    }
                    Err(err) => why = Some(format!("unparseable entry: {err}")),
                }
            } else {
                why = Some("missing file or hash mismatch".into());
            }
        }
        let forms = hecke_eigenforms(weight, prec_primes, bits)?;
        let entry = self.store(Kind::Eigenform, weight, prec_primes, numeric_bits, &eigenforms_text(&forms))?;
        Ok((
            forms,
            CacheStatus {
                file: entry.file,
                sha256: entry.sha256,
                reused: false,
                rebuilt_because: why,
            },
        ))
    }

    /// Plus-space eigenbasis of weight `k + 1/2` to precision `prec`.
    pub fn plus_basis(&self, k: u32, prec: usize, bits: u32) -> Result<(PlusEigenbasis, CacheStatus), CliError> {
        let (hit, mut why) = self.lookup(Kind::Plusform, k, prec as u64, None)?;
        let mut cached = None;
        if let Some(e) = hit {
            match self.read_verified(&e)? {
                Some(text) => match parse_plus_space(&text) {
                    Ok(space) => cached = Some((space, e)),
                    Err(err) => why = Some(format!("unparseable entry: {err}")),
                },
                None => why = Some("missing file or hash mismatch".into()),
            }
        }
        let (space, status) = match cached {
            Some((space, e)) => (
                truncate_space(space, prec),
                CacheStatus {
                    file: e.file,
                    sha256: e.sha256,
                    reused: true,
                    rebuilt_because: None,
                },
            ),
            None => {
                let space = mfres::halfint::plus_space(k, prec)?;
                let entry = self.store(Kind::Plusform, k, prec as u64, None, &plus_space_text(&space))?;
                (
                    space,
                    CacheStatus {
                        file: entry.file,
                        sha256: entry.sha256,
                        reused: false,
                        rebuilt_because: why,
                    },
                )
            }
        };
        let lifts = if space.basis.is_empty() {
            Vec::new()
        } else {
            let prec_primes = (isqrt(prec as u64) + 1).max(3);
            self.eigenforms(2 * k, prec_primes, bits)?.0
        };
        Ok((plus_eigenbasis(space, &lifts, bits)?, status))
    }
}

fn truncate_space(space: PlusSpace, prec: usize) -> PlusSpace {
    if space.prec == prec {
        return space;
    }
    PlusSpace {
        k: space.k,
        prec,
        cutoff: space.cutoff,
        basis: space.basis.iter().map(|b| b.truncate(prec)).collect(),
        pivots: space.pivots,
    }
}

fn round_to(f: Eigenform, bits: u32) -> Result<Eigenform, CliError> {
    match f.prime_coeffs() {
        PrimeCoeffs::Numeric { bits: b, values } if *b != bits => {
            let values = values.iter().map(|v| Float::with_val(bits, v)).collect();
            Ok(Eigenform::from_prime_coeffs(
                f.weight(),
                f.label(),
                Arc::new(f.primes().to_vec()),
                PrimeCoeffs::Numeric { bits, values },
                f.prec_primes(),
            )?)
        }
        _ => Ok(f),
    }
}

/// Header `# weight=<w> prec_primes=<P> forms=<r> bits=<b|exact>`, then one
/// line `p,a_1(p),…,a_r(p)` per prime.
pub fn eigenforms_text(forms: &[Eigenform]) -> String {
    let f0 = &forms[0];
    let bits = f0.bits().map_or("exact".to_string(), |b| b.to_string());
    let mut out = format!(
        "# weight={} prec_primes={} forms={} bits={bits}\n",
        f0.weight(),
        f0.prec_primes(),
        forms.len()
    );
    for (i, p) in f0.primes().iter().enumerate() {
        out.push_str(&p.to_string());
        for f in forms {
            out.push(',');
            match f.prime_coeffs() {
                PrimeCoeffs::Exact(v) => out.push_str(&v[i].to_string()),
                PrimeCoeffs::Numeric { values, .. } => out.push_str(&values[i].to_string_radix(10, None)),
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_eigenforms(text: &str) -> Result<Vec<Eigenform>, mfres::Error> {
    let bad = |line: usize, msg: &str| mfres::Error::Parse { line, msg: msg.into() };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let fields = parse_header(header, 1)?;
    let weight: u32 = header_value(&fields, "weight", 1)?;
    let prec_primes: u64 = header_value(&fields, "prec_primes", 1)?;
    let r: usize = header_value(&fields, "forms", 1)?;
    let bits_field: String = header_value(&fields, "bits", 1)?;
    let bits: Option<u32> = if bits_field == "exact" {
        None
    } else {
        Some(bits_field.parse().map_err(|_| bad(1, "bad bits"))?)
    };
    let primes = Arc::new(PrimeTable::new(prec_primes).primes().to_vec());
    let mut exact: Vec<Vec<Integer>> = vec![Vec::with_capacity(primes.len()); r];
    let mut numeric: Vec<Vec<Float>> = vec![Vec::with_capacity(primes.len()); r];
    let mut count = 0;
    for (i, line) in lines {
        let lineno = i + 1;
        let mut parts = line.split(',');
        let p: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(lineno, "bad prime"))?;
        if primes.get(count) != Some(&p) {
            return Err(bad(lineno, "prime list does not match the header"));
        }
        for nu in 0..r {
            let s = parts.next().ok_or_else(|| bad(lineno, "missing coefficient"))?;
            match bits {
                None => exact[nu].push(s.parse().map_err(|_| bad(lineno, "bad integer"))?),
                Some(b) => {
                    let v = Float::parse(s).map_err(|_| bad(lineno, "bad float"))?;
                    numeric[nu].push(Float::with_val(b, v));
                }
            }
        }
        if parts.next().is_some() {
            return Err(bad(lineno, "too many fields"));
        }
        count += 1;
    }
    if count != primes.len() {
        return Err(bad(count + 1, "truncated prime table"));
    }
    (0..r)
        .map(|nu| {
            let coeffs = match bits {
                None => PrimeCoeffs::Exact(std::mem::take(&mut exact[nu])),
                Some(b) => PrimeCoeffs::Numeric {
                    bits: b,
                    values: std::mem::take(&mut numeric[nu]),
                },
            };
            Eigenform::from_prime_coeffs(weight, nu + 1, primes.clone(), coeffs, prec_primes)
        })
        .collect()
}

/// Header `# k=<k> prec=<M> cutoff=<c> dim=<r> pivots=<i,j,…>`, then each
/// echelon basis element as `@ <index>` followed by its series text.
pub fn plus_space_text(space: &PlusSpace) -> String {
    let pivots: Vec<String> = space.pivots.iter().map(|p| p.to_string()).collect();
    let mut out = format!(
        "# k={} prec={} cutoff={} dim={} pivots={}\n",
        space.k,
        space.prec,
        space.cutoff,
        space.basis.len(),
        if pivots.is_empty() { "-".to_string() } else { pivots.join(",") }
    );
    for (i, b) in space.basis.iter().enumerate() {
        out.push_str(&format!("@ {i}\n"));
        out.push_str(&b.to_text());
    }
    out
}

pub fn parse_plus_space(text: &str) -> Result<PlusSpace, mfres::Error> {
    let bad = |line: usize, msg: &str| mfres::Error::Parse { line, msg: msg.into() };
    let header = text.lines().next().ok_or_else(|| bad(1, "empty input"))?;
    let fields = parse_header(header, 1)?;
    let k: u32 = header_value(&fields, "k", 1)?;
    let prec: usize = header_value(&fields, "prec", 1)?;
    let cutoff: usize = header_value(&fields, "cutoff", 1)?;
    let dim: usize = header_value(&fields, "dim", 1)?;
    let piv: String = header_value(&fields, "pivots", 1)?;
    let pivots: Vec<usize> = if piv == "-" {
        Vec::new()
    } else {
        piv.split(',')
            .map(|s| s.parse().map_err(|_| bad(1, "bad pivot")))
            .collect::<Result<_, _>>()?
    };
    let mut sections: Vec<String> = Vec::new();
    for line in text.lines().skip(1) {
        if line.starts_with("@ ") {
            sections.push(String::new());
        } else {
            let s = sections.last_mut().ok_or_else(|| bad(2, "data before the first section"))?;
            s.push_str(line);
            s.push('\n');
        }
    }
    if sections.len() != dim || pivots.len() != dim {
        return Err(bad(1, "dimension does not match the sections"));
    }
    let basis = sections
        .iter()
        .map(|s| ExactSeries::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    if basis.iter().any(|b| b.prec() != prec) {
        return Err(bad(1, "section precision differs from the header"));
    }
    Ok(PlusSpace {
        k,
        prec,
        cutoff,
        basis,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenform_text_roundtrip() {
        for w in [12, 24] {
            let forms = hecke_eigenforms(w, 200, 96).unwrap();
            let text = eigenforms_text(&forms);
            let back = parse_eigenforms(&text).unwrap();
            assert_eq!(eigenforms_text(&back), text);
            for (a, b) in forms.iter().zip(&back) {
                for &p in a.primes() {
                    assert_eq!(a.prime_coeff(p).unwrap(), b.prime_coeff(p).unwrap());
                }
            }
        }
    }

    #[test]
    fn plus_text_roundtrip() {
        let space = mfres::halfint::plus_space(12, 400).unwrap();
        let text = plus_space_text(&space);
        let back = parse_plus_space(&text).unwrap();
        assert_eq!(back.basis, space.basis);
        assert_eq!(back.pivots, space.pivots);
        assert_eq!(plus_space_text(&back), text);
    }

    #[test]
    fn corrupt_entry_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CacheManifest::open(dir.path()).unwrap();
        let (_, s) = cache.eigenforms(12, 100, 64).unwrap();
        assert!(!s.reused);
        let (_, s) = cache.eigenforms(12, 50, 64).unwrap();
        assert!(s.reused);
        let path = dir.path().join(&s.file);
        let mut text = fs::read_to_string(&path).unwrap();
        text = text.replacen("2,-24", "2,-25", 1);
        fs::write(&path, text).unwrap();
        let (forms, s) = cache.eigenforms(12, 100, 64).unwrap();
        assert!(!s.reused);
        assert_eq!(s.rebuilt_because.as_deref(), Some("missing file or hash mismatch"));
        assert_eq!(forms[0].prime_coeff_f64(2).unwrap(), -24.0);
        let (_, s) = cache.eigenforms(12, 200, 64).unwrap();
        assert_eq!(s.rebuilt_because.as_deref(), Some("cached precision is below the request"));
    }
}
