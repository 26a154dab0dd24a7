//! Coordinate-format Matrix Market files with complex entries, and the
//! directory layout used to exchange a system pair.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assemble::{validate_external, ExternalSystem};
use crate::bounds::PairMeta;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    General,
    /// Only the lower triangle is stored; `a_ji = conj(a_ij)`.
    Hermitian,
}

pub const A1_FILE: &str = "A1.mtx";
pub const A2_FILE: &str = "A2.mtx";
pub const D_FILE: &str = "D.mtx";
pub const M_FILE: &str = "M.mtx";
pub const META_FILE: &str = "meta.json";

/// Serializes `m` with 17 significant digits per component.
pub fn matrix_market_string(m: &CsrMatrix<C64>, sym: Symmetry) -> String {
    let entries: Vec<_> = m
        .triplets()
        .filter(|&(i, j, _)| sym == Symmetry::General || i >= j)
        .collect();
    let name = match sym {
        Symmetry::General => "general",
        Symmetry::Hermitian => "hermitian",
    };
    let mut s = format!("%%MatrixMarket matrix coordinate complex {name}\n");
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:.16e} {:.16e}", i + 1, j + 1, v.re, v.im);
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &CsrMatrix<C64>, sym: Symmetry) -> Result<()> {
    if sym == Symmetry::Hermitian && m.hermitian_defect() != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{} is not exactly Hermitian; write it as general",
            path.display()
        )));
    }
    std::fs::write(path, matrix_market_string(m, sym)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix<C64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, &path.display().to_string())
}

/// Parses a coordinate-format matrix. `origin` names the source in errors.
pub fn parse_matrix_market(text: &str, origin: &str) -> Result<CsrMatrix<C64>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" || words[2] != "coordinate" {
        return Err(err(hl, format!("expected `%%MatrixMarket matrix coordinate <field> <symmetry>`, got `{header}`")));
    }
    let field = words[3].as_str();
    if !matches!(field, "complex" | "real" | "integer") {
        return Err(err(hl, format!("unsupported field `{field}`")));
    }
    let sym = match words[4].as_str() {
        "general" => Symmetry::General,
        "hermitian" => Symmetry::Hermitian,
        "symmetric" if field != "complex" => Symmetry::Hermitian,
        other => return Err(err(hl, format!("unsupported symmetry `{other}`"))),
    };

    let mut size = None;
    for (ln, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let nums: Vec<&str> = t.split_whitespace().collect();
        let parsed: std::result::Result<Vec<usize>, _> = nums.iter().map(|s| s.parse::<usize>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => size = Some((ln, v[0], v[1], v[2])),
            _ => return Err(err(ln, format!("expected `rows cols entries`, got `{t}`"))),
        }
        break;
    }
    let (size_line, nrows, ncols, nnz) = size.ok_or_else(|| err(hl, "missing size line".into()))?;
    if sym == Symmetry::Hermitian && nrows != ncols {
        return Err(err(size_line, "Hermitian matrix must be square".into()));
    }

    let per_entry = if field == "complex" { 4 } else { 3 };
    let mut trips = Vec::with_capacity(nnz * 2);
    let mut count = 0;
    let mut last_line = size_line;
    for (ln, line) in lines {
        last_line = ln;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if parts.len() != per_entry {
            return Err(err(ln, format!("expected {per_entry} fields, got {}", parts.len())));
        }
        let idx = |s: &str, bound: usize, what: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| err(ln, format!("bad {what} index `{s}`")))?;
            if v == 0 {
                return Err(err(ln, format!("{what} index 0: indices are 1-based")));
            }
            if v > bound {
                return Err(err(ln, format!("{what} index {v} out of range 1..={bound}")));
            }
            Ok(v - 1)
        };
        let i = idx(parts[0], nrows, "row")?;
        let j = idx(parts[1], ncols, "column")?;
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(ln, format!("bad number `{s}`")))?;
            if !v.is_finite() {
                return Err(err(ln, format!("non-finite value `{s}`")));
            }
            Ok(v)
        };
        let v = if field == "complex" {
            C64::new(num(parts[2])?, num(parts[3])?)
        } else {
            C64::new(num(parts[2])?, 0.0)
        };
        count += 1;
        if count > nnz {
            return Err(err(ln, format!("more than the declared {nnz} entries")));
        }
        match sym {
            Symmetry::General => trips.push((i, j, v)),
            Symmetry::Hermitian => {
                if i < j {
                    return Err(err(ln, "entry above the diagonal in a Hermitian file".into()));
                }
                if i == j && v.im != 0.0 {
                    return Err(err(ln, "non-real diagonal entry in a Hermitian file".into()));
                }
                trips.push((i, j, v));
                if i != j {
                    trips.push((j, i, v.conj()));
                }
            }
        }
    }
    if count != nnz {
        return Err(err(last_line, format!("declared {nnz} entries, found {count}")));
    }
    Ok(CsrMatrix::from_triplets(nrows, ncols, &trips))
}

fn real_part(m: CsrMatrix<C64>, name: &str) -> Result<CsrMatrix<f64>> {
    m.to_real().ok_or_else(|| Error::InvalidSystem {
        matrix: name.into(),
        reason: "entries must be real".into(),
    })
}

/// Reads and validates the four matrices of a pair from explicit paths.
pub fn read_external(a1: &Path, a2: &Path, d: &Path, m: &Path) -> Result<ExternalSystem> {
    let sys = ExternalSystem {
        a1: read_matrix_market(a1)?,
        a2: read_matrix_market(a2)?,
        d: real_part(read_matrix_market(d)?, "D")?,
        m: real_part(read_matrix_market(m)?, "M")?,
    };
    validate_external(sys)
}

/// Reads `A1.mtx`, `A2.mtx`, `D.mtx`, `M.mtx` and, if present, `meta.json`
/// from `dir`.
pub fn read_matrix_exchange(dir: &Path) -> Result<(ExternalSystem, Option<PairMeta>)> {
    let sys = read_external(&dir.join(A1_FILE), &dir.join(A2_FILE), &dir.join(D_FILE), &dir.join(M_FILE))?;
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok((sys, meta))
}

/// Writes the pair into `dir` (created if needed) and returns the paths.
pub fn write_matrix_exchange(sys: &ExternalSystem, meta: Option<&PairMeta>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    let sym_of = |m: &CsrMatrix<C64>| {
        if m.hermitian_defect() == 0.0 {
            Symmetry::Hermitian
        } else {
            Symmetry::General
        }
    };
    for (name, m, sym) in [
        (A1_FILE, sys.a1.clone(), Symmetry::General),
        (A2_FILE, sys.a2.clone(), Symmetry::General),
        (D_FILE, sys.d.to_complex(), sym_of(&sys.d.to_complex())),
        (M_FILE, sys.m.to_complex(), sym_of(&sys.m.to_complex())),
    ] {
        let p = dir.join(name);
        write_matrix_market(&p, &m, sym)?;
        out.push(p);
    }
    if let Some(meta) = meta {
        let p = dir.join(META_FILE);
        let text = serde_json::to_string_pretty(meta)? + "\n";
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        out.push(p);
    }
    Ok(out)
}
