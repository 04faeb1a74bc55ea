//! Samplers for the constructions behind the beta densities: Haar orthogonal
//! matrices, (noncentral) Wishart and pseudo-Wishart scatter matrices, and
//! the beta type I/II matrices themselves, reduced to rank-q spectral form.
//!
//! Randomness comes from counter-based ChaCha streams; a (seed, stream)
//! pair pins the draw sequence bit-for-bit regardless of how callers chunk
//! the work.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::betadist::{BetaKind, BetaParams, SpectralPoint};
use crate::error::{Error, Result};
use crate::linalg;

/// Condition-number cap used when inverting A + B or B.
pub const COND_CAP: f64 = 1e12;

/// RNG for one (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// R-diagonal sign correction that makes the law exactly invariant.
pub fn haar_orthogonal(m: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    assert!(m >= 1);
    let g = gaussian_matrix(m, m, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Haar rotation on SO(3) via a uniform quaternion. For integrands of even
/// degree in H (every trace-word kernel in this crate) the O(3) average
/// equals the SO(3) average because -H covers the reflection coset, so hot
/// Monte Carlo loops at m = 3 can use this much cheaper draw.
pub(crate) fn so3_haar(rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let w: f64 = rng.sample(StandardNormal);
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    )
}

/// Random PSD probe matrix with spread-out spectrum (test helper).
#[cfg(test)]
pub(crate) fn random_psd(m: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let g = gaussian_matrix(m, m, rng);
    let mut w = &g * g.transpose() / m as f64;
    for i in 0..m {
        w[(i, i)] += rng.random::<f64>();
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterKind {
    Wishart,
    PseudoWishart,
}

/// A sampled scatter matrix Z'Z with its construction parameters.
#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    pub matrix: DMatrix<f64>,
    pub dof: usize,
    pub noncentrality: DMatrix<f64>,
    pub kind: ScatterKind,
}

fn mean_rows_full(m: usize, n_rows: usize, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    // M'M = Omega with the symmetric PSD square root stacked over zero rows
    let half = linalg::psd_sqrt(omega)?;
    let mut mean = DMatrix::zeros(n_rows, m);
    mean.view_mut((0, 0), (m, m)).copy_from(&half);
    Ok(mean)
}

fn mean_rows_truncated(m: usize, r: usize, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    // r < m rows: need rank(Omega) <= r; use the top-r spectral factor
    let (vals, vecs) = linalg::sym_eigen_desc(omega);
    let scale = vals[0].abs().max(1.0);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * scale).count();
    if rank > r {
        return Err(Error::InvalidParams(format!(
            "pseudo-Wishart noncentrality must have rank <= r = {r}, got rank {rank}"
        )));
    }
    let mut mean = DMatrix::zeros(r, m);
    for i in 0..r.min(m) {
        let v = vals[i].max(0.0).sqrt();
        for c in 0..m {
            mean[(i, c)] = v * vecs[(c, i)];
        }
    }
    Ok(mean)
}

/// Noncentral Wishart draw: B = Z'Z with Z an s x m Gaussian matrix of
/// identity row covariance and mean M, M'M = Omega.
pub fn wishart_sample(
    m: usize,
    s: usize,
    omega: &DMatrix<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<ScatterMatrix> {
    if s < m {
        return Err(Error::InvalidDof(format!("Wishart needs s >= m, got s = {s}, m = {m}")));
    }
    linalg::check_psd(omega, "noncentrality")?;
    let mean = mean_rows_full(m, s, omega)?;
    let z = gaussian_matrix(s, m, rng) + mean;
    Ok(ScatterMatrix {
        matrix: z.transpose() * &z,
        dof: s,
        noncentrality: omega.clone(),
        kind: ScatterKind::Wishart,
    })
}

/// Noncentral pseudo-Wishart draw: A = Z'Z with Z an r x m Gaussian matrix,
/// r < m; almost surely rank r.
pub fn pseudo_wishart_sample(
    m: usize,
    r: usize,
    omega: &DMatrix<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<ScatterMatrix> {
    if r == 0 || r >= m {
        return Err(Error::InvalidDof(format!(
            "pseudo-Wishart needs 1 <= r < m, got r = {r}, m = {m}"
        )));
    }
    linalg::check_psd(omega, "noncentrality")?;
    let mean = mean_rows_truncated(m, r, omega)?;
    let z = gaussian_matrix(r, m, rng) + mean;
    Ok(ScatterMatrix {
        matrix: z.transpose() * &z,
        dof: r,
        noncentrality: omega.clone(),
        kind: ScatterKind::PseudoWishart,
    })
}

fn scatter_pair(params: &BetaParams, rng: &mut ChaCha12Rng) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = params.m;
    let r = params.r.round() as usize;
    let s = params.s.round() as usize;
    if (params.r - r as f64).abs() > 1e-9 || (params.s - s as f64).abs() > 1e-9 {
        return Err(Error::InvalidDof(
            "sampling requires integer degrees of freedom (Z'Z construction)".into(),
        ));
    }
    let a = if r < m {
        pseudo_wishart_sample(m, r, &params.omega1, rng)?
    } else {
        wishart_sample(m, r, &params.omega1, rng)?
    };
    let b = wishart_sample(m, s, &params.omega2, rng)?;
    Ok((a.matrix, b.matrix))
}

/// Draw U = (A+B)^{-1/2} A ((A+B)^{-1/2})' and return its rank-q spectral
/// form; A is (pseudo-)Wishart with Omega1, B Wishart with Omega2.
pub fn beta1_sample(params: &BetaParams, rng: &mut ChaCha12Rng) -> Result<SpectralPoint> {
    let (a, b) = scatter_pair(params, rng)?;
    let inv_half = linalg::psd_inv_sqrt(&(&a + &b), COND_CAP)?;
    let u = linalg::symmetrize(&(&inv_half * a * &inv_half));
    Ok(eigdecomp_rank_q(&u, params.q)?.point(BetaKind::Beta1)?)
}

/// Draw F = B^{-1/2} A (B^{-1/2})' in rank-q spectral form.
pub fn beta2_sample(params: &BetaParams, rng: &mut ChaCha12Rng) -> Result<SpectralPoint> {
    let (a, b) = scatter_pair(params, rng)?;
    let inv_half = linalg::psd_inv_sqrt(&b, COND_CAP)?;
    let f = linalg::symmetrize(&(&inv_half * a * &inv_half));
    Ok(eigdecomp_rank_q(&f, params.q)?.point(BetaKind::Beta2)?)
}

/// Result of a rank-q spectral extraction.
#[derive(Debug, Clone)]
pub struct RankDecomp {
    pub eigenvalues: Vec<f64>,
    pub frame: DMatrix<f64>,
    /// Raised when some retained gap is below 1e-10 relative; eigenvectors
    /// are then only defined up to rotation within the near-degenerate block.
    pub near_degenerate: bool,
}

impl RankDecomp {
    pub fn point(self, kind: BetaKind) -> Result<SpectralPoint> {
        SpectralPoint::new(self.eigenvalues, self.frame, kind)
    }
}

/// Top-q eigenpairs of a symmetric PSD matrix, eigenvalues strictly
/// decreasing, eigenvector signs fixed by the largest-magnitude entry.
/// Errors when the numerical rank is below q.
pub fn eigdecomp_rank_q(x: &DMatrix<f64>, q: usize) -> Result<RankDecomp> {
    let m = linalg::check_square(x, "eigdecomp input")?;
    if !linalg::is_symmetric(x, 1e-10) {
        return Err(Error::Domain("eigdecomp input must be symmetric".into()));
    }
    if q == 0 || q > m {
        return Err(Error::InvalidParams(format!("rank q = {q} outside 1..={m}")));
    }
    let (vals, vecs) = linalg::sym_eigen_desc(x);
    let scale = vals[0].abs().max(f64::MIN_POSITIVE);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * scale).count();
    if rank < q {
        return Err(Error::RankDeficient { needed: q, found: rank });
    }
    let eigenvalues: Vec<f64> = vals[..q].to_vec();
    let mut near_degenerate = false;
    for w in eigenvalues.windows(2) {
        if w[0] - w[1] < 1e-10 * scale {
            near_degenerate = true;
        }
    }
    // also flag a tie between the retained block and the discarded one
    if q < m && eigenvalues[q - 1] - vals[q] < 1e-10 * scale {
        near_degenerate = true;
    }
    let frame = vecs.columns(0, q).clone_owned();
    Ok(RankDecomp { eigenvalues, frame, near_degenerate })
}

/// Reconstruction H1 L H1' from a decomposition (test helper).
pub fn reconstruct(d: &RankDecomp) -> DMatrix<f64> {
    let l = DMatrix::from_diagonal(&DVector::from_vec(d.eigenvalues.clone()));
    &d.frame * l * d.frame.transpose()
}
