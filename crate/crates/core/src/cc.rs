//! Coupled-cluster doubles on a closed-shell reference. Used as an
//! alternative amplitude source for the UCJ sampler.
//!
//! The equations are solved in the spin-orbital basis and returned in the
//! closed-shell layout of [`Amplitudes`]: `t[i,j,a,b]` is the amplitude of
//! `i(alpha) j(beta) -> a(alpha) b(beta)`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array4};

use crate::error::{Error, Result};
use crate::integrals::{build_fock, closed_shell_occupations, IntegralSet};
use crate::obmp2::Amplitudes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub diis_size: usize,
}

impl Default for CcdOptions {
    fn default() -> Self {
        CcdOptions {
            max_iter: 200,
            tol: 1e-9,
            diis_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdResult {
    pub amplitudes: Amplitudes,
    pub e_corr: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MIN_DENOM: f64 = 1e-8;

/// Antisymmetrized spin-orbital integrals `<pq||rs>` restricted to index ranges.
struct SpinOrbitals {
    n: usize,
    occ: Vec<usize>,
    virt: Vec<usize>,
}

impl SpinOrbitals {
    fn spatial(&self, p: usize) -> (usize, usize) {
        (p % self.n, p / self.n)
    }

    fn anti(&self, g: &Array4<f64>, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let (p, sp) = self.spatial(p);
        let (q, sq) = self.spatial(q);
        let (r, sr) = self.spatial(r);
        let (s, ss) = self.spatial(s);
        let mut v = 0.0;
        if sp == sr && sq == ss {
            v += g[[p, r, q, s]];
        }
        if sp == ss && sq == sr {
            v -= g[[p, s, q, r]];
        }
        v
    }

    fn block(
        &self,
        g: &Array4<f64>,
        a: &[usize],
        b: &[usize],
        c: &[usize],
        d: &[usize],
    ) -> Array4<f64> {
        Array4::from_shape_fn((a.len(), b.len(), c.len(), d.len()), |(p, q, r, s)| {
            self.anti(g, a[p], b[q], c[r], d[s])
        })
    }
}

/// Pulay extrapolation over amplitude iterates.
struct Diis {
    size: usize,
    vecs: Vec<Array4<f64>>,
    errs: Vec<Array4<f64>>,
}

impl Diis {
    fn push(&mut self, t: Array4<f64>, err: Array4<f64>) {
        if self.vecs.len() == self.size {
            self.vecs.remove(0);
            self.errs.remove(0);
        }
        self.vecs.push(t);
        self.errs.push(err);
    }

    fn extrapolate(&self) -> Option<Array4<f64>> {
        let m = self.vecs.len();
        if m < 2 {
            return None;
        }
        let mut b = DMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] = (&self.errs[i] * &self.errs[j]).sum();
            }
            b[(i, m)] = -1.0;
            b[(m, i)] = -1.0;
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = -1.0;
        let c = b.lu().solve(&rhs)?;
        let mut out = Array4::zeros(self.vecs[0].raw_dim());
        for (k, v) in self.vecs.iter().enumerate() {
            out.scaled_add(c[k], v);
        }
        Some(out)
    }
}

/// CCD ground state of the aufbau closed-shell determinant of `ints`.
pub fn ccd(ints: &IntegralSet, opts: &CcdOptions) -> Result<CcdResult> {
    let occ_f = closed_shell_occupations(ints)?;
    let fock = build_fock(ints, &occ_f)?.f;
    let n = ints.n_orb;
    let n_occ = ints.n_elec / 2;
    let spatial_occ: Vec<usize> = (0..n_occ).collect();
    let spatial_virt: Vec<usize> = (n_occ..n).collect();
    if n_occ == 0 || n_occ == n {
        let amplitudes = Amplitudes::zeros(n, spatial_occ, spatial_virt);
        return Ok(CcdResult {
            amplitudes,
            e_corr: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let so = SpinOrbitals {
        n,
        occ: (0..n_occ).chain(n..n + n_occ).collect(),
        virt: (n_occ..n).chain(n + n_occ..2 * n).collect(),
    };
    let (o, v) = (so.occ.len(), so.virt.len());
    let f_so = |p: usize, q: usize| {
        let ((p, sp), (q, sq)) = (so.spatial(p), so.spatial(q));
        if sp == sq {
            fock[[p, q]]
        } else {
            0.0
        }
    };
    let f_oo = Array2::from_shape_fn((o, o), |(i, j)| f_so(so.occ[i], so.occ[j]));
    let f_vv = Array2::from_shape_fn((v, v), |(a, b)| f_so(so.virt[a], so.virt[b]));
    let g = &ints.g;
    let oovv = so.block(g, &so.occ, &so.occ, &so.virt, &so.virt);
    let oooo = so.block(g, &so.occ, &so.occ, &so.occ, &so.occ);
    let vvvv = so.block(g, &so.virt, &so.virt, &so.virt, &so.virt);
    let ovvo = so.block(g, &so.occ, &so.virt, &so.virt, &so.occ);

    let denom = Array4::from_shape_fn((o, o, v, v), |(i, j, a, b)| {
        f_oo[[i, i]] + f_oo[[j, j]] - f_vv[[a, a]] - f_vv[[b, b]]
    });
    if let Some(((i, j, a, b), &d)) = denom.indexed_iter().find(|(_, d)| d.abs() < MIN_DENOM) {
        let (i, j, a, b) = (so.occ[i] % n, so.occ[j] % n, so.virt[a] % n, so.virt[b] % n);
        return Err(Error::DegenerateGap {
            i,
            j,
            a,
            b,
            denom: d,
        });
    }
    let energy = |t: &Array4<f64>| 0.25 * (&oovv * t).sum();

    let mut t = &oovv / &denom;
    let mut e = energy(&t);
    let mut diis = Diis {
        size: opts.diis_size,
        vecs: Vec::new(),
        errs: Vec::new(),
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let r = residual(&t, &f_oo, &f_vv, &oovv, &oooo, &vvvv, &ovvo);
        let mut t_new = &t + &(&r / &denom);
        let delta = (&t_new - &t).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if opts.diis_size >= 2 {
            diis.push(t_new.clone(), &t_new - &t);
            if let Some(x) = diis.extrapolate() {
                t_new = x;
            }
        }
        let e_new = energy(&t_new);
        let de = (e_new - e).abs();
        t = t_new;
        e = e_new;
        if delta < opts.tol && de < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("CCD not converged after {iterations} iterations");
    }

    let mut amplitudes = Amplitudes::zeros(n, spatial_occ, spatial_virt);
    let (no, nv) = (n_occ, n - n_occ);
    for ((i, j, a, b), x) in amplitudes.t.indexed_iter_mut() {
        *x = t[[i, no + j, a, nv + b]];
    }
    Ok(CcdResult {
        amplitudes,
        e_corr: e,
        iterations,
        converged,
    })
}

/// Doubles residual `<ab_ij| exp(-T) H exp(T) |0>` in spin orbitals.
fn residual(
    t: &Array4<f64>,
    f_oo: &Array2<f64>,
    f_vv: &Array2<f64>,
    oovv: &Array4<f64>,
    oooo: &Array4<f64>,
    vvvv: &Array4<f64>,
    ovvo: &Array4<f64>,
) -> Array4<f64> {
    let (o, _, v, _) = t.dim();
    let mut r = oovv.clone();

    // quadratic terms folded into dressed Fock and ladder intermediates
    let mut w_oooo = oooo.clone();
    let mut x_oo = f_oo.clone();
    let mut x_vv = f_vv.clone();
    for m in 0..o {
        for nn in 0..o {
            for e in 0..v {
                for f in 0..v {
                    let a = oovv[[m, nn, e, f]];
                    if a == 0.0 {
                        continue;
                    }
                    for i in 0..o {
                        for j in 0..o {
                            w_oooo[[m, nn, i, j]] += 0.5 * a * t[[i, j, e, f]];
                        }
                        x_oo[[m, i]] += 0.5 * a * t[[i, nn, e, f]];
                    }
                    for b in 0..v {
                        x_vv[[b, e]] -= 0.5 * a * t[[m, nn, b, f]];
                    }
                }
            }
        }
    }
    // ring intermediate: ovvo + 1/2 <mn||ef> t_jn^bf, contracted with t_im^ae
    let mut w_ovvo = ovvo.clone();
    for m in 0..o {
        for nn in 0..o {
            for e in 0..v {
                for f in 0..v {
                    let a = oovv[[m, nn, e, f]];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..o {
                        for b in 0..v {
                            w_ovvo[[m, b, e, j]] += 0.5 * a * t[[j, nn, b, f]];
                        }
                    }
                }
            }
        }
    }

    for i in 0..o {
        for j in 0..o {
            for a in 0..v {
                for b in 0..v {
                    let mut s = 0.0;
                    for e in 0..v {
                        s += x_vv[[b, e]] * t[[i, j, a, e]] - x_vv[[a, e]] * t[[i, j, b, e]];
                    }
                    for m in 0..o {
                        s += x_oo[[m, i]] * t[[j, m, a, b]] - x_oo[[m, j]] * t[[i, m, a, b]];
                    }
                    for e in 0..v {
                        for f in 0..v {
                            s += 0.5 * vvvv[[a, b, e, f]] * t[[i, j, e, f]];
                        }
                    }
                    for m in 0..o {
                        for nn in 0..o {
                            s += 0.5 * w_oooo[[m, nn, i, j]] * t[[m, nn, a, b]];
                        }
                    }
                    for m in 0..o {
                        for e in 0..v {
                            s += w_ovvo[[m, b, e, j]] * t[[i, m, a, e]];
                            s -= w_ovvo[[m, b, e, i]] * t[[j, m, a, e]];
                            s -= w_ovvo[[m, a, e, j]] * t[[i, m, b, e]];
                            s += w_ovvo[[m, a, e, i]] * t[[j, m, b, e]];
                        }
                    }
                    r[[i, j, a, b]] += s;
                }
            }
        }
    }
    r
}
