//! Thick-restart Lanczos for the largest eigenpairs of a symmetric operator,
//! with full reorthogonalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub struct LanczosOptions {
    /// Krylov subspace size before each restart.
    pub basis: usize,
    pub max_restarts: usize,
    /// Converged when `|A u - theta u| <= tol` for a unit Ritz vector.
    pub tol: f64,
    pub seed: u64,
}

impl LanczosOptions {
    pub fn for_count(n: usize, nev: usize) -> Self {
        Self {
            basis: (2 * nev + 20).max(40).min(n),
            max_restarts: 1000,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// Orthogonalizes `w` against the columns of `basis` (twice), returning the
/// accumulated coefficients.
fn orthogonalize(basis: &[DVector<f64>], w: &mut DVector<f64>) -> Vec<f64> {
    let mut coeff = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeff.iter_mut().zip(basis) {
            let h = v.dot(w);
            w.axpy(-h, v, 1.0);
            *c += h;
        }
    }
    coeff
}

/// A random unit vector orthogonal to `basis`.
fn fresh_vector(basis: &[DVector<f64>], n: usize, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    for _ in 0..10 {
        let mut w = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        orthogonalize(basis, &mut w);
        let norm = w.norm();
        if norm > 1e-8 {
            return Ok(w / norm);
        }
    }
    Err(Error::NoConvergence(
        "could not extend the Krylov basis".into(),
    ))
}

/// The `nev` largest eigenpairs of the symmetric operator `apply` on
/// vectors of length `n`, sorted by descending eigenvalue.
pub fn largest_eigenpairs<F>(
    apply: F,
    n: usize,
    nev: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if nev == 0 || nev > n {
        return Err(Error::InvalidParameter(format!(
            "cannot compute {nev} eigenpairs of a {n}x{n} operator"
        )));
    }
    let m = opts.basis.clamp(nev + 1, n).max(nev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<DVector<f64>> = vec![fresh_vector(&[], n, &mut rng)?];
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut kept = 0;

    for _restart in 0..opts.max_restarts {
        let mut beta = 0.0;
        let mut residual = DVector::zeros(n);
        for j in kept..m {
            let mut w = apply(&basis[j]);
            let coeff = orthogonalize(&basis, &mut w);
            for (i, c) in coeff.iter().enumerate() {
                h[(i, j)] = *c;
                h[(j, i)] = *c;
            }
            beta = w.norm();
            if j + 1 == m {
                residual = w;
                break;
            }
            if beta <= 1e-12 * h[(j, j)].abs().max(1.0) {
                // invariant subspace found; continue with a new direction
                beta = 0.0;
                basis.push(fresh_vector(&basis, n, &mut rng)?);
            } else {
                basis.push(w / beta);
            }
            h[(j + 1, j)] = beta;
            h[(j, j + 1)] = beta;
        }
        if m == n {
            beta = 0.0;
        }

        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let resid = |i: usize| (beta * eig.eigenvectors[(m - 1, i)]).abs();
        let converged = order[..nev].iter().all(|&i| resid(i) <= opts.tol);

        let keep = if converged {
            nev
        } else {
            (nev + (m - nev) / 2).min(m - 1)
        };
        let y = eig.eigenvectors.select_columns(&order[..keep]);
        let ritz: Vec<DVector<f64>> = (0..keep)
            .map(|c| {
                let mut u = DVector::zeros(n);
                for (i, v) in basis.iter().enumerate().take(m) {
                    u.axpy(y[(i, c)], v, 1.0);
                }
                u
            })
            .collect();
        if converged {
            let values = order[..nev].iter().map(|&i| eig.eigenvalues[i]).collect();
            return Ok((values, DMatrix::from_columns(&ritz)));
        }

        h.fill(0.0);
        for c in 0..keep {
            h[(c, c)] = eig.eigenvalues[order[c]];
            let coupling = beta * y[(m - 1, c)];
            h[(keep, c)] = coupling;
            h[(c, keep)] = coupling;
        }
        basis = ritz;
        let next = if beta > 0.0 {
            let mut r = residual / beta;
            orthogonalize(&basis, &mut r);
            let norm = r.norm();
            if norm > 1e-8 {
                r / norm
            } else {
                fresh_vector(&basis, n, &mut rng)?
            }
        } else {
            fresh_vector(&basis, n, &mut rng)?
        };
        basis.push(next);
        kept = keep;
    }
    Err(Error::NoConvergence(format!(
        "Lanczos did not converge after {} restarts",
        opts.max_restarts
    )))
}
