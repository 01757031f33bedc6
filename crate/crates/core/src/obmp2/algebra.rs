//! Normal-ordered operators over spin orbitals and their commutators.
//!
//! An operator is `c0 + sum c1[p,q] {p† q} + 1/4 sum c2[p,q,r,s] {p† q† s r}`,
//! normal ordered with respect to a single determinant whose spin-orbital
//! occupations `n_p` are 0 or 1. `c2` is antisymmetric in (p,q) and in (r,s).
//! The commutator keeps everything up to two-body rank; the discarded
//! three-body part is exactly what the one-body reduction drops.

use ndarray::{Array2, Array4, Ix4};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalOrderedOp {
    pub c0: f64,
    pub c1: Array2<f64>,
    pub c2: Array4<f64>,
}

/// Highest particle rank kept in a commutator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    One,
    Two,
}

impl NormalOrderedOp {
    pub fn zeros(n: usize) -> Self {
        NormalOrderedOp {
            c0: 0.0,
            c1: Array2::zeros((n, n)),
            c2: Array4::zeros((n, n, n, n)),
        }
    }

    pub fn dim(&self) -> usize {
        self.c1.nrows()
    }
}

fn perm(a: &Array4<f64>, axes: [usize; 4]) -> Array4<f64> {
    a.view()
        .permuted_axes(axes)
        .as_standard_layout()
        .into_owned()
}

fn as_matrix(a: Array4<f64>, rows: usize, cols: usize) -> Array2<f64> {
    a.into_shape_with_order((rows, cols))
        .expect("standard layout")
}

fn as_tensor(a: Array2<f64>, n: usize) -> Array4<f64> {
    a.into_shape_with_order((n, n, n, n))
        .expect("standard layout")
        .into_dimensionality::<Ix4>()
        .expect("rank 4")
}

/// `[a, b]` truncated at `rank`, for reference occupations `occ`.
pub fn commutator(
    a: &NormalOrderedOp,
    b: &NormalOrderedOp,
    occ: &[f64],
    rank: Rank,
) -> NormalOrderedOp {
    let n = a.dim();
    assert_eq!(b.dim(), n);
    assert_eq!(occ.len(), n);
    let hole: Vec<f64> = occ.iter().map(|x| 1.0 - x).collect();
    let (a1, a2, b1, b2) = (&a.c1, &a.c2, &b.c1, &b.c2);

    // Scalar.
    let mut c0 = 0.0;
    for p in 0..n {
        for q in 0..n {
            c0 += a1[[p, q]] * b1[[q, p]] * (occ[p] - occ[q]);
        }
    }
    let mut quarter = 0.0;
    for p in 0..n {
        for q in 0..n {
            let pq = occ[p] * occ[q];
            if pq == 0.0 {
                continue;
            }
            for r in 0..n {
                for s in 0..n {
                    let w = pq * hole[r] * hole[s];
                    if w != 0.0 {
                        quarter += w
                            * (a2[[p, q, r, s]] * b2[[r, s, p, q]]
                                - b2[[p, q, r, s]] * a2[[r, s, p, q]]);
                    }
                }
            }
        }
    }
    c0 += 0.25 * quarter;

    // One-body.
    let mut c1 = a1.dot(b1) - b1.dot(a1);
    for r in 0..n {
        for s in 0..n {
            let dn = occ[r] - occ[s];
            if dn == 0.0 {
                continue;
            }
            let (ar, br) = (a1[[r, s]] * dn, b1[[r, s]] * dn);
            if ar == 0.0 && br == 0.0 {
                continue;
            }
            for p in 0..n {
                for q in 0..n {
                    c1[[p, q]] += ar * b2[[s, p, r, q]] - br * a2[[s, p, r, q]];
                }
            }
        }
    }
    // 1/2 sum_rst w[r,s,t] (A[t,p,r,s] B[r,s,t,q] - B[t,p,r,s] A[r,s,t,q])
    let n3 = n * n * n;
    let w3 = Array2::from_shape_fn((1, n3), |(_, k)| {
        let (r, s, t) = (k / (n * n), k / n % n, k % n);
        occ[r] * occ[s] * hole[t] + hole[r] * hole[s] * occ[t]
    });
    let left = |x: &Array4<f64>| as_matrix(perm(x, [1, 2, 3, 0]), n, n3) * &w3;
    let right = |x: &Array4<f64>| as_matrix(x.as_standard_layout().into_owned(), n3, n);
    c1 = c1 + (left(a2).dot(&right(b2)) - left(b2).dot(&right(a2))) * 0.5;

    if rank == Rank::One {
        return NormalOrderedOp {
            c0,
            c1,
            c2: Array4::zeros((n, n, n, n)),
        };
    }

    // Two-body.
    let mat = |x: &Array4<f64>| as_matrix(x.as_standard_layout().into_owned(), n, n3);
    let x = as_tensor(a1.dot(&mat(b2)) - b1.dot(&mat(a2)), n);
    let mut c2 = &x - &perm(&x, [1, 0, 2, 3]);

    // Y[p,q,r,s] = sum_t B2[p,q,t,s] A1[t,r] - A2[p,q,t,s] B1[t,r]
    let tlast = |x: &Array4<f64>| as_matrix(perm(x, [0, 1, 3, 2]), n3, n);
    let y = as_tensor(tlast(b2).dot(a1) - tlast(a2).dot(b1), n);
    let y = perm(&y, [0, 1, 3, 2]);
    c2 = c2 - (&y - &perm(&y, [0, 1, 3, 2]));

    let n2 = n * n;
    let w2 = Array2::from_shape_fn((1, n2), |(_, k)| 1.0 - occ[k / n] - occ[k % n]);
    let pair = |x: &Array4<f64>| as_matrix(x.as_standard_layout().into_owned(), n2, n2);
    let ladder = (pair(a2) * &w2).dot(&pair(b2)) - (pair(b2) * &w2).dot(&pair(a2));
    c2 = c2 + as_tensor(ladder, n) * 0.5;

    // Z[p,q,r,s] = sum_tu (n_t - n_u) A2[u,q,t,s] B2[t,p,u,r]
    let dn = Array2::from_shape_fn((1, n2), |(_, k)| occ[k / n] - occ[k % n]);
    // A2[u,q,t,s] -> [q,s,t,u]
    let za = as_matrix(perm(a2, [1, 3, 2, 0]), n2, n2) * &dn;
    // B2[t,p,u,r] -> [t,u,p,r]
    let zb = as_matrix(perm(b2, [0, 2, 1, 3]), n2, n2);
    // product indexed [q,s,p,r] -> [p,q,r,s]
    let z = perm(&as_tensor(za.dot(&zb), n), [2, 0, 3, 1]);
    let z = &z - &perm(&z, [1, 0, 2, 3]);
    let z = &z - &perm(&z, [0, 1, 3, 2]);
    c2 = c2 - z;

    NormalOrderedOp { c0, c1, c2 }
}
