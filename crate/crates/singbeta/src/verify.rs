//! Monte Carlo and quadrature oracles: Haar symmetrisation, the
//! orthogonal-average splitting identity, scalar ground truths, marginal
//! eigenvalue densities and normalization checks, plus the small statistics
//! toolbox the tests run on (KS, chi-square, Gauss-Legendre).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::betadist::{BetaKind, BetaParams, DensityContext, DensityFamily, SpectralPoint};
use crate::combinat::{ln_gamma_signed, mv_gamma_ln};
use crate::error::{Error, Result};
use crate::hypermat::SeriesControl;
use crate::invariant::{theta_coeff, InvariantComponent, TracePrimitives};
use crate::randmat::{haar_orthogonal, stream_rng};
use crate::zonal::ZonalTables;

const BLOCK: usize = 4096;

/// One Monte Carlo estimate. Reproducible bit-for-bit from (seed, n): the
/// sample stream is split into fixed blocks with per-block ChaCha streams
/// reduced in block order, so worker layout cannot change the result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MCResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn mc_blocks<F>(n: usize, seed: u64, mut body: F) -> (f64, f64)
where
    F: FnMut(&mut rand_chacha::ChaCha12Rng, usize, &mut dyn FnMut(f64)),
{
    // accumulate around the first sample so constant integrands report an
    // exactly zero standard error
    let mut shift: Option<f64> = None;
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    let mut remaining = n;
    let mut block = 0u64;
    while remaining > 0 {
        let this = remaining.min(BLOCK);
        let mut rng = stream_rng(seed, block);
        let mut bsum = 0.0;
        let mut bsumsq = 0.0;
        body(&mut rng, this, &mut |v| {
            let s = *shift.get_or_insert(v);
            bsum += v - s;
            bsumsq += (v - s) * (v - s);
        });
        sum += bsum;
        sumsq += bsumsq;
        remaining -= this;
        block += 1;
    }
    let s = shift.unwrap_or(0.0);
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    (s + mean, (var / n as f64).sqrt())
}

/// Haar Monte Carlo estimate of the symmetrised density
/// f_s(X) = int_{O(m)} f(H X H') (dH): the rotation moves the frame of the
/// spectral point, so the evaluator sees rotated points with the original
/// spectrum.
pub fn symmetrise_mc<F>(
    evaluator: F,
    point: &SpectralPoint,
    n: usize,
    seed: u64,
) -> Result<MCResult>
where
    F: Fn(&SpectralPoint) -> Result<f64>,
{
    let m = point.m();
    let mut err = None;
    let (estimate, std_error) = mc_blocks(n, seed, |rng, count, push| {
        for _ in 0..count {
            let h = haar_orthogonal(m, rng);
            match evaluator(&point.rotated(&h)) {
                Ok(v) => push(v),
                Err(e) => {
                    err.get_or_insert(e);
                    push(f64::NAN);
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(MCResult { estimate, std_error, n_samples: n, seed })
}

/// Monte Carlo residual of the orthogonal-average splitting identity for one
/// invariant component:
/// int C_phi^{kappa,lambda}(A H'XH, B H'YH) (dH)
///   - C_phi^{kappa,lambda}(A,B) C_phi^{kappa,lambda}(X,Y) / (theta C_phi(I)).
pub fn lemma4_check(
    component: &InvariantComponent,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    n: usize,
    seed: u64,
    zonal: &ZonalTables,
) -> Result<MCResult> {
    let m = a.nrows();
    let theta = theta_coeff(component, zonal, m)?;
    let c_phi_id = zonal.eval_identity(&component.phi, m)?;
    let rhs = component.eval(a, b)? * component.eval(x, y)? / (theta * c_phi_id);
    let (mean, std_error) = mc_blocks(n, seed, |rng, count, push| {
        for _ in 0..count {
            let h = haar_orthogonal(m, rng);
            let w1 = h.transpose() * x * &h;
            let w2 = h.transpose() * y * &h;
            let prims = TracePrimitives::new_unchecked(&(a * w1), &(b * w2));
            push(component.eval_prims(&prims));
        }
    });
    Ok(MCResult { estimate: mean - rhs, std_error, n_samples: n, seed })
}

/// Scalar oracle value with a truncation diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct OracleValue {
    pub value: f64,
    /// Unaccounted Poisson mass: (1 - cdf_j) + (1 - cdf_k) at the cutoff.
    pub tail_bound: f64,
}

/// Independent scalar ground truth for every m = 1 reduction: the doubly
/// noncentral beta density as the double Poisson mixture
/// sum_{j,k} P(w1/2)_j P(w2/2)_k Beta(r/2 + j, s/2 + k).pdf(u).
pub fn scalar_dnc_oracle(
    r: f64,
    s: f64,
    omega1: f64,
    omega2: f64,
    u: f64,
    j_max: usize,
) -> Result<OracleValue> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("u = {u} outside (0,1)")));
    }
    let ln_beta_pdf = |a: f64, b: f64| {
        (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() + ln_gamma_signed(a + b).0
            - ln_gamma_signed(a).0
            - ln_gamma_signed(b).0
    };
    // Poisson(w/2) log-pmf table and cdf
    let pois = |w: f64| -> (Vec<f64>, f64) {
        if w == 0.0 {
            let mut lp = vec![f64::NEG_INFINITY; j_max + 1];
            lp[0] = 0.0;
            return (lp, 1.0);
        }
        let half = w / 2.0;
        let mut lp = Vec::with_capacity(j_max + 1);
        let mut cdf = 0.0;
        for j in 0..=j_max {
            let l = -half + j as f64 * half.ln() - crate::combinat::factorial_ln(j);
            lp.push(l);
            cdf += l.exp();
        }
        (lp, cdf)
    };
    let (lp1, cdf1) = pois(omega1);
    let (lp2, cdf2) = pois(omega2);
    let mut value = 0.0;
    for (j, &l1) in lp1.iter().enumerate() {
        if l1 == f64::NEG_INFINITY {
            continue;
        }
        for (k, &l2) in lp2.iter().enumerate() {
            if l2 == f64::NEG_INFINITY {
                continue;
            }
            value += (l1 + l2 + ln_beta_pdf(r / 2.0 + j as f64, s / 2.0 + k as f64)).exp();
        }
    }
    Ok(OracleValue { value, tail_bound: (1.0 - cdf1).max(0.0) + (1.0 - cdf2).max(0.0) })
}

/// ln of the total volume of the Stiefel manifold V_{q,m} under the
/// (H1' dH1) convention used by the joint eigenvalue measure:
/// 2^q pi^{mq/2} / Gamma_q[m/2]. The m = q = 1 case gives volume 2 = |O(1)|,
/// which is what makes the scalar joint density integrate to one.
pub fn stiefel_volume_ln(q: usize, m: usize) -> Result<f64> {
    let v = mv_gamma_ln(q, m as f64 / 2.0)?;
    Ok(q as f64 * 2f64.ln() + (m * q) as f64 / 2.0 * std::f64::consts::PI.ln()
        - v.log_magnitude)
}

/// Marginal eigenvalue density on a grid (rank-one case).
#[derive(Debug, Clone)]
pub struct MarginalDensity {
    pub grid: Vec<f64>,
    /// Normalized so the trapezoid integral over the grid is one.
    pub density: Vec<f64>,
    /// Trapezoid integral before self-normalization, under the explicit
    /// Stiefel-volume convention; near one when the grid covers the support.
    pub raw_integral: f64,
}

/// Marginal density of l_1 for q = 1, integrating the joint density over the
/// frame by Monte Carlo on V_{1,m}.
#[allow(clippy::too_many_arguments)]
pub fn marginal_eigen_density(
    params: &BetaParams,
    ctrl: &SeriesControl,
    kind: BetaKind,
    family: DensityFamily,
    l_grid: &[f64],
    n_frames: usize,
    seed: u64,
    ctx: &DensityContext,
) -> Result<MarginalDensity> {
    if params.q != 1 {
        return Err(Error::InvalidParams(
            "marginal_eigen_density supports rank q = 1; use eigen_joint_density directly for larger ranks".into(),
        ));
    }
    let m = params.m;
    let ln_vol = stiefel_volume_ln(1, m)?;
    // frames and whether the integrand actually varies over them
    let frame_dependent = !params.is_central() && family != DensityFamily::Symmetrised;
    let n_use = if frame_dependent { n_frames.max(1) } else { 1 };
    let mut rng = stream_rng(seed, 0);
    let frames: Vec<DMatrix<f64>> = (0..n_use)
        .map(|_| haar_orthogonal(m, &mut rng).columns(0, 1).clone_owned())
        .collect();
    let mut density = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut acc = 0.0;
        for frame in &frames {
            let point = SpectralPoint::new(vec![l], frame.clone(), kind)?;
            let dens = ctx.density(family, &point, params, ctrl)?;
            acc += dens.value.to_f64();
        }
        let mean = acc / n_use as f64;
        let jac = 0.5 * l.powi((m - 1) as i32);
        density.push(mean * jac * ln_vol.exp());
    }
    let raw_integral = trapezoid(l_grid, &density);
    let normed: Vec<f64> = density.iter().map(|d| d / raw_integral).collect();
    Ok(MarginalDensity { grid: l_grid.to_vec(), density: normed, raw_integral })
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 1..x.len() {
        total += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizationMethod {
    Quadrature1d,
    Mc,
}

/// Result of integrating a density over its support.
#[derive(Debug, Clone, Copy)]
pub struct NormalizationReport {
    pub result: MCResult,
    /// Largest series tail ratio seen across evaluations; quantifies the
    /// truncation bias separately from the Monte Carlo error.
    pub max_tail_ratio: f64,
}

/// Integrate the selected density: exhaustive quadrature for m = q = 1,
/// Monte Carlo over (L, H1) for m <= 2.
#[allow(clippy::too_many_arguments)]
pub fn normalization_check(
    params: &BetaParams,
    ctrl: &SeriesControl,
    kind: BetaKind,
    family: DensityFamily,
    method: NormalizationMethod,
    n: usize,
    seed: u64,
    ctx: &DensityContext,
) -> Result<NormalizationReport> {
    match method {
        NormalizationMethod::Quadrature1d => {
            if params.m != 1 || params.q != 1 {
                return Err(Error::InvalidParams("quadrature_1d needs m = q = 1".into()));
            }
            let (nodes, weights) = gauss_legendre(400, 0.0, 1.0);
            let mut total = 0.0;
            let mut max_tail = 0.0f64;
            let frame = DMatrix::from_element(1, 1, 1.0);
            for (&t, &w) in nodes.iter().zip(&weights) {
                let (l, jac) = match kind {
                    BetaKind::Beta1 => (t, 1.0),
                    BetaKind::Beta2 => (t / (1.0 - t), 1.0 / ((1.0 - t) * (1.0 - t))),
                };
                let point = SpectralPoint::new(vec![l], frame.clone(), kind)?;
                let dens = ctx.density(family, &point, params, ctrl)?;
                max_tail = max_tail.max(dens.tail_ratio);
                total += w * dens.value.to_f64() * jac;
            }
            Ok(NormalizationReport {
                result: MCResult { estimate: total, std_error: 0.0, n_samples: nodes.len(), seed },
                max_tail_ratio: max_tail,
            })
        }
        NormalizationMethod::Mc => {
            if params.m > 2 {
                return Err(Error::InvalidParams("MC normalization implemented for m <= 2".into()));
            }
            let (m, q) = (params.m, params.q);
            let ln_vol = stiefel_volume_ln(q, m)?;
            let vol = ln_vol.exp();
            let region = if q == 2 { 0.5 } else { 1.0 };
            let mut max_tail = 0.0f64;
            let mut err = None;
            let (estimate, std_error) = mc_blocks(n, seed, |rng, count, push| {
                use rand::RngExt;
                for _ in 0..count {
                    let h = haar_orthogonal(m, rng);
                    let frame = h.columns(0, q).clone_owned();
                    // uniform ordered eigenvalues with the unit-cube transform
                    let mut ls: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
                    ls.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    let mut jac_transform = 1.0;
                    let ls: Vec<f64> = match kind {
                        BetaKind::Beta1 => ls,
                        BetaKind::Beta2 => ls
                            .iter()
                            .map(|&t| {
                                jac_transform /= (1.0 - t) * (1.0 - t);
                                t / (1.0 - t)
                            })
                            .collect(),
                    };
                    if ls.windows(2).any(|w| w[0] <= w[1]) {
                        push(0.0); // measure-zero tie under the transform
                        continue;
                    }
                    let point = match SpectralPoint::new(ls.clone(), frame, kind) {
                        Ok(p) => p,
                        Err(e) => {
                            err.get_or_insert(e);
                            push(f64::NAN);
                            continue;
                        }
                    };
                    match ctx.eigen_joint_density(&point, params, ctrl, family) {
                        Ok(d) => {
                            max_tail = max_tail.max(d.tail_ratio);
                            push(d.value.to_f64() * jac_transform * vol * region);
                        }
                        Err(Error::DegenerateSpectrum { .. }) => push(0.0),
                        Err(e) => {
                            err.get_or_insert(e);
                            push(f64::NAN);
                        }
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            Ok(NormalizationReport {
                result: MCResult { estimate, std_error, n_samples: n, seed },
                max_tail_ratio: max_tail,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// small numerics/statistics toolbox
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Newton from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    for i in 0..n {
        nodes[i] = mid - half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lg = ln_gamma_signed(a).0;
    if x < a + 1.0 {
        // series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + a * x.ln() - x - lg).exp()
    } else {
        // continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1e300;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            c = b + an / c;
            if c.abs() < 1e-300 {
                c = 1e-300;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (a * x.ln() - x - lg).exp() * h
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    (1.0 - reg_lower_gamma(df / 2.0, x / 2.0)).clamp(0.0, 1.0)
}

/// Kolmogorov distribution survival function Q(lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..101 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS statistic and asymptotic p-value; inputs must be sorted.
pub fn ks_two_sample_sorted(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n1, n2) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let f1 = i as f64 / n1 as f64;
        let f2 = j as f64 / n2 as f64;
        d = d.max((f1 - f2).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 as f64 + n2 as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_sf(lambda))
}

/// One-sample KS statistic of sorted samples against a CDF tabulated by
/// cumulative trapezoid integration of a normalized grid density.
pub fn ks_vs_grid_density(samples_sorted: &[f64], grid: &[f64], density: &[f64]) -> f64 {
    let n = grid.len();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = cdf[n - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    let interp = |x: f64| -> f64 {
        if x <= grid[0] {
            return 0.0;
        }
        if x >= grid[n - 1] {
            return 1.0;
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if grid[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
        cdf[lo] + t * (cdf[hi] - cdf[lo])
    };
    let nn = samples_sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples_sorted.iter().enumerate() {
        let c = interp(x);
        d = d.max((c - i as f64 / nn).abs()).max(((i + 1) as f64 / nn - c).abs());
    }
    d
}
