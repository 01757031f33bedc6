//! Molecular integrals in an orthonormal orbital basis: FCIDUMP input/output,
//! closed-shell Fock matrices and orbital rotations.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Array4, Axis};

use crate::error::{Error, Result};
use crate::linalg::eigh;

/// One- and two-electron integrals (chemists' notation), core energy and
/// electron counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_orb: usize,
    pub n_elec: usize,
    pub ms2: i32,
    pub h: Array2<f64>,
    pub g: Array4<f64>,
    pub e_core: f64,
}

impl IntegralSet {
    pub fn new(
        h: Array2<f64>,
        g: Array4<f64>,
        e_core: f64,
        n_elec: usize,
        ms2: i32,
    ) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || g.shape() != [n, n, n, n] {
            return Err(Error::Dimension(format!(
                "h is {:?}, g is {:?}",
                h.shape(),
                g.shape()
            )));
        }
        let set = IntegralSet {
            n_orb: n,
            n_elec,
            ms2,
            h,
            g,
            e_core,
        };
        set.check_counts()?;
        Ok(set)
    }

    fn check_counts(&self) -> Result<()> {
        let twice_alpha = self.n_elec as i64 + self.ms2 as i64;
        if twice_alpha < 0 || twice_alpha % 2 != 0 || twice_alpha / 2 > self.n_orb as i64 {
            return Err(Error::Input(format!(
                "NELEC={} MS2={} incompatible with NORB={}",
                self.n_elec, self.ms2, self.n_orb
            )));
        }
        let n_beta = self.n_elec as i64 - twice_alpha / 2;
        if n_beta < 0 || n_beta > self.n_orb as i64 {
            return Err(Error::Input(format!(
                "NELEC={} MS2={} incompatible with NORB={}",
                self.n_elec, self.ms2, self.n_orb
            )));
        }
        Ok(())
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_elec as i64 + self.ms2 as i64) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        self.n_elec - self.n_alpha()
    }

    /// Largest deviation from the symmetries of `h` and `g`.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.n_orb;
        let mut err: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                err = err.max((self.h[[p, q]] - self.h[[q, p]]).abs());
                for r in 0..n {
                    for s in 0..n {
                        let v = self.g[[p, q, r, s]];
                        for img in eri_images(p, q, r, s) {
                            err = err.max((self.g[img] - v).abs());
                        }
                    }
                }
            }
        }
        err
    }
}

fn eri_images(p: usize, q: usize, r: usize, s: usize) -> [[usize; 4]; 8] {
    [
        [p, q, r, s],
        [q, p, r, s],
        [p, q, s, r],
        [q, p, s, r],
        [r, s, p, q],
        [s, r, p, q],
        [r, s, q, p],
        [s, r, q, p],
    ]
}

/// Replace every symmetry orbit of `g` by its mean, so the result is exactly
/// 8-fold symmetric.
pub(crate) fn symmetrize_eri(g: &mut Array4<f64>) {
    let n = g.shape()[0];
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let imgs = eri_images(p, q, r, s);
                    let mean = imgs.iter().map(|&i| g[i]).sum::<f64>() / 8.0;
                    for i in imgs {
                        g[i] = mean;
                    }
                }
            }
        }
    }
}

fn symmetrize_h(h: &mut Array2<f64>) {
    let n = h.nrows();
    for p in 0..n {
        for q in 0..p {
            let m = 0.5 * (h[[p, q]] + h[[q, p]]);
            h[[p, q]] = m;
            h[[q, p]] = m;
        }
    }
}

struct Header {
    norb: usize,
    nelec: usize,
    ms2: i32,
}

fn parse_header(text: &str, line: usize) -> Result<Header> {
    let err = |msg: String| Error::Fcidump { line, msg };
    let body = text.trim_start();
    let body = body
        .strip_prefix("&FCI")
        .or_else(|| body.strip_prefix("&fci"))
        .ok_or_else(|| err("header must start with &FCI".into()))?;
    let mut norb = None;
    let mut nelec = None;
    let mut ms2 = None;
    // Collapse "KEY = value" into "KEY=value" and drop list separators.
    let mut flat = body.replace(',', " ");
    while flat.contains(" =") || flat.contains("= ") {
        flat = flat.replace(" =", "=").replace("= ", "=");
    }
    for tok in flat.split_whitespace() {
        let Some((key, val)) = tok.split_once('=') else {
            continue;
        };
        let parse_int = |v: &str| -> Result<i64> {
            v.parse::<i64>()
                .map_err(|_| err(format!("bad integer {v:?} for {key}")))
        };
        match key.to_ascii_uppercase().as_str() {
            "NORB" => norb = Some(parse_int(val)?),
            "NELEC" => nelec = Some(parse_int(val)?),
            "MS2" => ms2 = Some(parse_int(val)?),
            _ => {}
        }
    }
    let norb = norb.ok_or_else(|| err("missing NORB".into()))?;
    let nelec = nelec.ok_or_else(|| err("missing NELEC".into()))?;
    if norb <= 0 || nelec < 0 {
        return Err(err(format!("NORB={norb} NELEC={nelec}")));
    }
    Ok(Header {
        norb: norb as usize,
        nelec: nelec as usize,
        ms2: ms2.unwrap_or(0) as i32,
    })
}

/// Parse FCIDUMP text. Missing entries are zero, later duplicates overwrite
/// earlier ones, and the result is closed under the integral symmetries.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let mut header = String::new();
    let mut body_start = None;
    for (k, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        let upper = trimmed.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            header.push_str(&trimmed[..pos]);
            body_start = Some(k + 1);
            break;
        }
        if trimmed.ends_with('/') {
            header.push_str(trimmed.trim_end_matches('/'));
            body_start = Some(k + 1);
            break;
        }
        header.push_str(trimmed);
        header.push(' ');
    }
    let body_start = body_start.ok_or(Error::Fcidump {
        line: 1,
        msg: "unterminated header".into(),
    })?;
    let hd = parse_header(&header, 1)?;
    let n = hd.norb;
    let mut h = Array2::zeros((n, n));
    let mut g = Array4::zeros((n, n, n, n));
    let mut e_core = 0.0;
    for (k, line) in text.lines().enumerate().skip(body_start) {
        let lineno = k + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Fcidump {
                line: lineno,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let value: f64 =
            fields[0]
                .replace(['D', 'd'], "E")
                .parse()
                .map_err(|_| Error::Fcidump {
                    line: lineno,
                    msg: format!("non-numeric value {:?}", fields[0]),
                })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            let v: i64 = f.parse().map_err(|_| Error::Fcidump {
                line: lineno,
                msg: format!("bad index {f:?}"),
            })?;
            if v < 0 || v as usize > n {
                return Err(Error::Fcidump {
                    line: lineno,
                    msg: format!("index {v} outside [0, {n}]"),
                });
            }
            *slot = v as usize;
        }
        match idx {
            [0, 0, 0, 0] => e_core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h[[i - 1, j - 1]] = value;
                h[[j - 1, i - 1]] = value;
            }
            [_, 0, 0, 0] => {} // orbital energy record
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                for img in eri_images(i - 1, j - 1, k - 1, l - 1) {
                    g[img] = value;
                }
            }
            _ => {
                return Err(Error::Fcidump {
                    line: lineno,
                    msg: format!("invalid index pattern {idx:?}"),
                });
            }
        }
    }
    IntegralSet::new(h, g, e_core, hd.nelec, hd.ms2).map_err(|e| Error::Fcidump {
        line: 1,
        msg: e.to_string(),
    })
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<IntegralSet> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_fcidump(&text)
}

/// Serialize in FCIDUMP format, writing each symmetry-unique nonzero integral once.
pub fn write_fcidump(ints: &IntegralSet) -> String {
    let n = ints.n_orb;
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, "&FCI NORB={n},NELEC={},MS2={},", ints.n_elec, ints.ms2);
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, "&END");
    let fmt = |v: f64| format!("{v:>23.14E}");
    for i in 0..n {
        for j in 0..=i {
            let ij = i * (i + 1) / 2 + j;
            for k in 0..n {
                for l in 0..=k {
                    if k * (k + 1) / 2 + l > ij {
                        continue;
                    }
                    let v = ints.g[[i, j, k, l]];
                    if v != 0.0 {
                        let _ = writeln!(
                            out,
                            "{} {:>3} {:>3} {:>3} {:>3}",
                            fmt(v),
                            i + 1,
                            j + 1,
                            k + 1,
                            l + 1
                        );
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = ints.h[[i, j]];
            if v != 0.0 {
                let _ = writeln!(
                    out,
                    "{} {:>3} {:>3} {:>3} {:>3}",
                    fmt(v),
                    i + 1,
                    j + 1,
                    0,
                    0
                );
            }
        }
    }
    let _ = writeln!(
        out,
        "{} {:>3} {:>3} {:>3} {:>3}",
        fmt(ints.e_core),
        0,
        0,
        0,
        0
    );
    out
}

/// Orthogonal orbital rotation; column `k` holds new orbital `k` in the old basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(Array2<f64>);

impl RotationMatrix {
    pub fn new(u: Array2<f64>) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n {
            return Err(Error::Dimension(format!("rotation is {:?}", u.shape())));
        }
        let dev = (u.t().dot(&u) - Array2::<f64>::eye(n))
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if dev > 1e-10 {
            return Err(Error::Input(format!(
                "rotation not orthogonal (deviation {dev:.2e})"
            )));
        }
        Ok(RotationMatrix(u))
    }

    pub fn identity(n: usize) -> Self {
        RotationMatrix(Array2::eye(n))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `self` followed by `next`, i.e. the matrix product `self · next`.
    pub fn then(&self, next: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0.dot(&next.0))
    }
}

/// Closed-shell Fock matrix, its eigenvalues and the reference energy.
#[derive(Debug, Clone, PartialEq)]
pub struct FockResult {
    pub f: Array2<f64>,
    pub eps: Array1<f64>,
    pub e_hf: f64,
}

/// Aufbau occupations: the lowest `n_elec / 2` orbitals doubly occupied.
pub fn closed_shell_occupations(ints: &IntegralSet) -> Result<Vec<f64>> {
    if !ints.n_elec.is_multiple_of(2) || ints.ms2 != 0 {
        return Err(Error::OpenShell {
            orbital: ints.n_elec / 2,
            value: 1.0,
        });
    }
    Ok((0..ints.n_orb)
        .map(|p| if p < ints.n_elec / 2 { 2.0 } else { 0.0 })
        .collect())
}

pub fn build_fock(ints: &IntegralSet, occ: &[f64]) -> Result<FockResult> {
    let n = ints.n_orb;
    if occ.len() != n {
        return Err(Error::Dimension(format!(
            "{} occupations for {n} orbitals",
            occ.len()
        )));
    }
    for (p, &o) in occ.iter().enumerate() {
        if o != 0.0 && o != 2.0 {
            return Err(Error::OpenShell {
                orbital: p,
                value: o,
            });
        }
    }
    let total: f64 = occ.iter().sum();
    if total != ints.n_elec as f64 {
        return Err(Error::Input(format!(
            "occupations sum to {total}, NELEC={}",
            ints.n_elec
        )));
    }
    let docc: Vec<usize> = (0..n).filter(|&p| occ[p] == 2.0).collect();
    let (h, g) = (&ints.h, &ints.g);
    let mut f = h.clone();
    for p in 0..n {
        for q in 0..n {
            f[[p, q]] += docc
                .iter()
                .map(|&i| 2.0 * g[[p, q, i, i]] - g[[p, i, i, q]])
                .sum::<f64>();
        }
    }
    symmetrize_h(&mut f);
    let mut e_hf = ints.e_core;
    for &i in &docc {
        e_hf += 2.0 * h[[i, i]];
        for &j in &docc {
            e_hf += 2.0 * g[[i, i, j, j]] - g[[i, j, j, i]];
        }
    }
    let (eps, _) = eigh(&f);
    Ok(FockResult { f, eps, e_hf })
}

/// `h' = uᵀ h u` and the four-index transform of `g`, one index at a time.
pub fn rotate_integrals(ints: &IntegralSet, u: &RotationMatrix) -> Result<IntegralSet> {
    let n = ints.n_orb;
    if u.dim() != n {
        return Err(Error::Dimension(format!(
            "rotation of size {} for {n} orbitals",
            u.dim()
        )));
    }
    let u = u.as_array();
    let mut h = u.t().dot(&ints.h).dot(u);
    symmetrize_h(&mut h);
    let mut g = ints.g.clone();
    for _ in 0..4 {
        // Transform the leading index, then cycle it to the back.
        let flat = g.into_shape_with_order((n, n * n * n)).expect("contiguous");
        let t = u
            .t()
            .dot(&flat)
            .into_shape_with_order((n, n, n, n))
            .expect("contiguous");
        g = t
            .permuted_axes([1, 2, 3, 0])
            .as_standard_layout()
            .into_owned();
    }
    symmetrize_eri(&mut g);
    Ok(IntegralSet {
        n_orb: n,
        n_elec: ints.n_elec,
        ms2: ints.ms2,
        h,
        g,
        e_core: ints.e_core,
    })
}

/// Integrals in closed-shell canonical HF orbitals (Fock eigenbasis,
/// ascending). Inputs that are already stationary are only rotated within
/// the occupied and virtual blocks; others go through Roothaan iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalHf {
    pub integrals: IntegralSet,
    /// Rotation from the input basis.
    pub rotation: RotationMatrix,
    pub eps: Array1<f64>,
    pub e_hf: f64,
    /// False when the Fock matrix still had off-diagonal elements above
    /// tolerance after the iteration limit.
    pub converged: bool,
}

const ROOTHAAN_MAX_ITER: usize = 200;
const ROOTHAAN_TOL: f64 = 1e-10;
/// Largest occupied-virtual Fock element for which the input orbitals are
/// taken as an existing HF solution.
const STATIONARY_TOL: f64 = 1e-6;

pub fn canonical_hf(ints: &IntegralSet) -> Result<CanonicalHf> {
    let occ = closed_shell_occupations(ints)?;
    let n = ints.n_orb;
    let n_occ = ints.n_elec / 2;
    let fock = build_fock(ints, &occ)?;
    let ov = (0..n_occ)
        .flat_map(|i| (n_occ..n).map(move |a| (i, a)))
        .fold(0.0f64, |m, (i, a)| m.max(fock.f[[i, a]].abs()));

    let (cur, rotation, converged) = if ov < STATIONARY_TOL {
        // Already stationary. Plain Roothaan steps can drift away from a
        // solution like this when it is only weakly stable, so rotate within
        // the occupied and virtual blocks and keep the determinant.
        let mut u = Array2::zeros((n, n));
        for block in [0..n_occ, n_occ..n] {
            let idx: Vec<usize> = block.collect();
            let sub =
                Array2::from_shape_fn((idx.len(), idx.len()), |(x, y)| fock.f[[idx[x], idx[y]]]);
            let (_, v) = eigh(&sub);
            for (x, &p) in idx.iter().enumerate() {
                for (y, &q) in idx.iter().enumerate() {
                    u[[p, q]] = v[[x, y]];
                }
            }
        }
        let step = RotationMatrix::new(u)?;
        (rotate_integrals(ints, &step)?, step, true)
    } else {
        let mut cur = ints.clone();
        let mut rotation = RotationMatrix::identity(n);
        let mut converged = false;
        for _ in 0..ROOTHAAN_MAX_ITER {
            let fock = build_fock(&cur, &occ)?;
            let (_, u) = eigh(&fock.f);
            let step = RotationMatrix::new(u)?;
            cur = rotate_integrals(&cur, &step)?;
            rotation = rotation.then(&step);
            let off = fock
                .f
                .indexed_iter()
                .filter(|((p, q), _)| p != q)
                .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
            let sorted = (1..n).all(|p| fock.f[[p - 1, p - 1]] <= fock.f[[p, p]]);
            if off < ROOTHAAN_TOL && sorted {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("closed-shell Roothaan iteration did not converge");
        }
        (cur, rotation, converged)
    };
    let fock = build_fock(&cur, &occ)?;
    let eps = Array1::from_iter((0..n).map(|p| fock.f[[p, p]]));
    if n_occ > 0 && n_occ < n && eps[n_occ - 1] > eps[n_occ] {
        log::warn!(
            "HF solution is not aufbau: HOMO {:.6} above LUMO {:.6}",
            eps[n_occ - 1],
            eps[n_occ]
        );
    }
    Ok(CanonicalHf {
        integrals: cur,
        rotation,
        eps,
        e_hf: fock.e_hf,
        converged,
    })
}

/// Restrict integrals to the given orbitals (no embedding).
pub(crate) fn sub_block(g: &Array4<f64>, idx: &[usize]) -> Array4<f64> {
    let g = g
        .select(Axis(0), idx)
        .select(Axis(1), idx)
        .select(Axis(2), idx);
    g.select(Axis(3), idx)
}

/// Random symmetric integrals with a diagonally dominant `h`, for tests.
#[cfg(test)]
pub(crate) fn random_integrals(n: usize, n_elec: usize, seed: u64) -> IntegralSet {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut h = Array2::from_shape_fn((n, n), |_| rng.random_range(-0.2..0.2));
    for p in 0..n {
        h[[p, p]] = -2.0 + p as f64;
    }
    symmetrize_h(&mut h);
    let mut g = Array4::from_shape_fn((n, n, n, n), |_| rng.random_range(-0.05..0.05));
    for p in 0..n {
        for q in 0..n {
            g[[p, p, q, q]] += 0.4;
        }
    }
    symmetrize_eri(&mut g);
    IntegralSet::new(h, g, 0.3, n_elec, 0).expect("valid sizes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: &str = "&FCI NORB=1,NELEC=2,MS2=0,\n ORBSYM=1,\n ISYM=1,\n&END\n 0.5 1 1 1 1\n -1.25 1 1 0 0\n 0.7 0 0 0 0\n";

    #[test]
    fn one_orbital_records() {
        let ints = parse_fcidump(H2).unwrap();
        assert_eq!(ints.g[[0, 0, 0, 0]], 0.5);
        assert_eq!(ints.h[[0, 0]], -1.25);
        assert_eq!(ints.e_core, 0.7);
    }

    #[test]
    fn two_electron_record_fills_all_images() {
        let text = "&FCI NORB=3,NELEC=2,MS2=0 /\n 0.3 1 2 3 1\n";
        let ints = parse_fcidump(text).unwrap();
        for img in eri_images(0, 1, 2, 0) {
            assert_eq!(ints.g[img], 0.3);
        }
        assert_eq!(ints.symmetry_error(), 0.0);
    }

    #[test]
    fn duplicates_overwrite_and_fortran_exponents_parse() {
        let text = "&FCI NORB=2,NELEC=2,\n&END\n 1.0 1 2 0 0\n 2.5D-01 2 1 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!(ints.h[[0, 1]], 0.25);
        assert_eq!(ints.h[[1, 0]], 0.25);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(
            parse_fcidump("NORB=2\n1 1 1 1 1\n"),
            Err(Error::Fcidump { .. })
        ));
        let out_of_range = "&FCI NORB=2,NELEC=2 &END\n 1.0 3 1 0 0\n";
        assert!(matches!(
            parse_fcidump(out_of_range),
            Err(Error::Fcidump { line: 2, .. })
        ));
        let bad_value = "&FCI NORB=2,NELEC=2 &END\n abc 1 1 0 0\n";
        assert!(matches!(
            parse_fcidump(bad_value),
            Err(Error::Fcidump { line: 2, .. })
        ));
        assert!(parse_fcidump("&FCI NELEC=2 &END\n").is_err());
    }

    #[test]
    fn header_with_spaces_around_equals() {
        let text = "&FCI NORB = 2, NELEC = 2, MS2 = 0,\n ORBSYM=1,1,\n ISYM=1\n /\n 1.0 1 1 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!((ints.n_orb, ints.n_elec, ints.ms2), (2, 2, 0));
    }

    #[test]
    fn empty_reference_gives_bare_h() {
        let ints = parse_fcidump(H2).unwrap();
        let ints = IntegralSet { n_elec: 0, ..ints };
        let fr = build_fock(&ints, &[0.0]).unwrap();
        assert_eq!(fr.f, ints.h);
        assert_eq!(fr.e_hf, ints.e_core);
    }

    #[test]
    fn open_shell_occupation_is_rejected() {
        let ints = parse_fcidump(H2).unwrap();
        assert!(matches!(
            build_fock(&ints, &[1.0]),
            Err(Error::OpenShell { .. })
        ));
    }

    #[test]
    fn non_orthogonal_rotation_is_rejected() {
        let u = ndarray::arr2(&[[1.0, 0.1], [0.0, 1.0]]);
        assert!(RotationMatrix::new(u).is_err());
    }

    #[test]
    fn rotation_dimension_mismatch() {
        let ints = parse_fcidump(H2).unwrap();
        assert!(matches!(
            rotate_integrals(&ints, &RotationMatrix::identity(2)),
            Err(Error::Dimension(_))
        ));
    }
}
