//! Ensemble files and atomic report writes.
//!
//! An ensemble file is one header line
//! `QRE1 {"dim":D,"n":N,"kind":K,"seed":S,"materialized":B}` followed, when
//! materialized, by `N·D²` little-endian `(re, im)` f64 pairs, row-major
//! within each unitary and unitaries in ensemble order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{c, ComplexMatrix};
use crate::sampler::{EnsembleKind, Unitary, UnitaryEnsemble};

pub const MAGIC: &str = "QRE1 ";
/// Largest `‖U†U − I‖_max` accepted on load.
pub const LOAD_UNITARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dim: usize,
    n: usize,
    kind: EnsembleKind,
    seed: u64,
    materialized: bool,
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn save_ensemble(ensemble: &UnitaryEnsemble, path: &Path) -> Result<()> {
    let header = Header {
        dim: ensemble.dim(),
        n: ensemble.len(),
        kind: ensemble.kind(),
        seed: ensemble.seed(),
        materialized: ensemble.is_materialized(),
    };
    let mut bytes = format!("{MAGIC}{}\n", serde_json::to_string(&header)?).into_bytes();
    if header.materialized {
        bytes.reserve(header.n * header.dim * header.dim * 16);
        for u in ensemble.members() {
            let m = u.to_dense();
            for r in 0..header.dim {
                for col in 0..header.dim {
                    let z = m[(r, col)];
                    bytes.extend_from_slice(&z.re.to_le_bytes());
                    bytes.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    write_atomic(path, &bytes)
}

pub fn load_ensemble(path: &Path) -> Result<UnitaryEnsemble> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(MAGIC.as_bytes()) {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("header line is not terminated".into()))?;
    let header: Header = serde_json::from_slice(&bytes[MAGIC.len()..newline])
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    let body = &bytes[newline + 1..];
    if !header.materialized {
        if !body.is_empty() {
            return Err(Error::Format("header-only file carries a body".into()));
        }
        return UnitaryEnsemble::lazy(header.dim, header.n, header.kind, header.seed);
    }
    let per_unitary = header.dim * header.dim * 16;
    let expected = header.n * per_unitary;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let read = |off: usize| f64::from_le_bytes(body[off..off + 8].try_into().expect("8 bytes"));
    let mut members = Vec::with_capacity(header.n);
    for j in 0..header.n {
        let base = j * per_unitary;
        let m = ComplexMatrix::from_fn(header.dim, header.dim, |r, col| {
            let off = base + (r * header.dim + col) * 16;
            c(read(off), read(off + 8))
        });
        let u = Unitary::Dense(m);
        let residual = u.unitarity_residual();
        if !(residual <= LOAD_UNITARITY_TOL) {
            return Err(Error::Format(format!(
                "member {j} fails the unitarity audit (residual {residual:.3e})"
            )));
        }
        members.push(u);
    }
    UnitaryEnsemble::from_members(header.kind, header.seed, members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{build_ensemble, SeededStream};

    #[test]
    fn haar_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("haar.qre");
        let e = build_ensemble(8, 4, EnsembleKind::Haar, &SeededStream::new(3)).unwrap();
        save_ensemble(&e, &path).unwrap();
        let back = load_ensemble(&path).unwrap();
        assert_eq!(back, e);
        for j in 0..4 {
            let (a, b) = (e.member(j).to_dense(), back.member(j).to_dense());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn header_only_pauli_regenerates_members() {
        let dir = tempfile::tempdir().unwrap();
        let e = build_ensemble(8, 6, EnsembleKind::Pauli, &SeededStream::new(5)).unwrap();
        let full = dir.path().join("full.qre");
        let lazy = dir.path().join("lazy.qre");
        save_ensemble(&e, &full).unwrap();
        save_ensemble(&e.clone().into_lazy(), &lazy).unwrap();
        let text = fs::read_to_string(&lazy).unwrap();
        assert_eq!(
            text,
            format!("QRE1 {{\"dim\":8,\"n\":6,\"kind\":\"pauli\",\"seed\":{},\"materialized\":false}}\n", e.seed())
        );
        let (a, b) = (load_ensemble(&full).unwrap(), load_ensemble(&lazy).unwrap());
        assert!(!b.is_materialized());
        for j in 0..6 {
            assert_eq!(a.member(j).to_dense(), b.member(j).to_dense());
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.qre");
        let e = build_ensemble(4, 2, EnsembleKind::Haar, &SeededStream::new(1)).unwrap();
        save_ensemble(&e, &path).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_ensemble(&path), Err(Error::Format(_))));

        fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_ensemble(&path), Err(Error::Format(_))));

        let mut skewed = good.clone();
        let last = skewed.len() - 16;
        skewed[last..last + 8].copy_from_slice(&0.5f64.to_le_bytes());
        fs::write(&path, &skewed).unwrap();
        assert!(matches!(load_ensemble(&path), Err(Error::Format(_))));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
