//! Lowest-k Hermitian eigenpairs by Lanczos with full reorthogonalization.
//!
//! A single Krylov sequence sees at most one vector per distinct eigenvalue,
//! so degenerate partners are picked up by restarting from fresh random
//! vectors orthogonal to everything already locked. The search stops once a
//! restart finds nothing below the current k-th locked value.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

const SEED: u64 = 0x5eed_1a2c_205f;

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    /// Ritz residual threshold, relative to the operator scale.
    pub tol: f64,
    /// Krylov dimension of the first attempt of each restart.
    pub min_krylov: usize,
    pub max_restarts: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig {
            tol: 1e-11,
            min_krylov: 60,
            max_restarts: 64,
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(w: &mut [Complex64], against: &[Vec<Complex64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let c = dot(q, w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

struct RitzPair {
    value: f64,
    vector: Vec<Complex64>,
}

/// One Lanczos run in the orthogonal complement of `locked`. Returns the
/// converged Ritz pairs (ascending), or an empty list if the complement is
/// empty.
fn krylov_run(
    h: &HermitianOperator,
    locked: &[Vec<Complex64>],
    want: usize,
    cfg: &LanczosConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RitzPair>> {
    let dim = h.dim();
    let room = dim - locked.len();
    if room == 0 {
        return Ok(Vec::new());
    }
    let tol = cfg.tol * h.scale();
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    orthogonalize(&mut start, locked);
    let nrm = norm(&start);
    if nrm < 1e-12 {
        return Ok(Vec::new());
    }
    start.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<Complex64>> = vec![start];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut limit = cfg.min_krylov.max(2 * want + 20).min(room);

    loop {
        let j = basis.len() - 1;
        let mut w = h.apply(&basis[j]);
        let a = dot(&basis[j], &w).re;
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= a * qi;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * qi;
            }
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        alpha.push(a);
        let b = norm(&w);
        let exhausted = b < 1e-10 * h.scale().max(1.0) || basis.len() >= room;
        let at_limit = basis.len() >= limit;

        if exhausted || at_limit || (basis.len() >= want + 10 && basis.len().is_multiple_of(10)) {
            let m = alpha.len();
            let mut t = Array2::<f64>::zeros((m, m));
            for i in 0..m {
                t[[i, i]] = alpha[i];
                if i + 1 < m {
                    t[[i, i + 1]] = beta[i];
                    t[[i + 1, i]] = beta[i];
                }
            }
            let (vals, vecs) = t
                .eigh(UPLO::Lower)
                .map_err(|e| Error::Eigensolver(format!("tridiagonal solve: {e}")))?;
            let residual = |i: usize| if exhausted { 0.0 } else { (b * vecs[[m - 1, i]]).abs() };
            let take = want.min(m);
            let converged_prefix = (0..take).take_while(|&i| residual(i) <= tol).count();
            if converged_prefix == take || exhausted || (at_limit && limit >= room) {
                let mut out = Vec::new();
                for i in 0..m {
                    if residual(i) > tol {
                        // only a converged prefix is trustworthy as "lowest"
                        break;
                    }
                    let mut v = vec![Complex64::new(0.0, 0.0); dim];
                    for (k, q) in basis.iter().enumerate() {
                        let s = vecs[[k, i]];
                        for (vi, qi) in v.iter_mut().zip(q) {
                            *vi += s * qi;
                        }
                    }
                    let nv = norm(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    out.push(RitzPair {
                        value: vals[i],
                        vector: v,
                    });
                    if out.len() >= want {
                        break;
                    }
                }
                if out.is_empty() && !exhausted {
                    let worst = residual(0);
                    return Err(Error::NonConvergence {
                        max_residual: worst,
                        tol,
                    });
                }
                return Ok(out);
            }
            if at_limit {
                limit = (limit * 2).min(room);
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
}

/// The `k` smallest eigenpairs of `h`, ascending.
pub fn lowest_k(h: &HermitianOperator, k: usize, cfg: &LanczosConfig) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let dim = h.dim();
    let k = k.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut locked: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let tol = cfg.tol * h.scale();

    let mut restarts = 0;
    loop {
        if restarts > cfg.max_restarts {
            return Err(Error::Eigensolver(format!(
                "lowest-{k} search did not settle after {} restarts",
                cfg.max_restarts
            )));
        }
        restarts += 1;
        let vectors: Vec<Vec<Complex64>> = locked.iter().map(|(_, v)| v.clone()).collect();
        let threshold = if locked.len() >= k {
            let mut vals: Vec<f64> = locked.iter().map(|p| p.0).collect();
            vals.sort_by(f64::total_cmp);
            vals[k - 1]
        } else {
            f64::INFINITY
        };
        let want = k.saturating_sub(locked.len()).max(1);
        let found = krylov_run(h, &vectors, want, cfg, &mut rng)?;
        let fresh: Vec<RitzPair> = found.into_iter().filter(|p| p.value < threshold - tol).collect();
        if fresh.is_empty() {
            if locked.len() >= k || locked.len() == dim {
                break;
            }
            if vectors.len() + 1 > dim {
                break;
            }
            continue;
        }
        for p in fresh {
            locked.push((p.value, p.vector));
        }
    }

    locked.sort_by(|a, b| a.0.total_cmp(&b.0));
    locked.truncate(k);
    let mut vecs = Array2::<Complex64>::zeros((dim, locked.len()));
    let mut vals = Vec::with_capacity(locked.len());
    for (c, (val, v)) in locked.iter().enumerate() {
        vals.push(*val);
        vecs.column_mut(c).assign(&Array1::from(v.clone()));
    }
    Ok((vals, vecs))
}
