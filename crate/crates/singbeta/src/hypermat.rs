//! Hypergeometric functions of a symmetric matrix argument: the confluent
//! series 1F1 used by the noncentral densities, plus 0F0 = etr as a
//! degenerate self-check.

use nalgebra::DMatrix;

use crate::combinat::{enumerate_partitions, factorial_ln, gen_pochhammer_ln, LogValue};
use crate::error::{Error, Result};
use crate::linalg;
use crate::zonal::ZonalTables;

/// Truncation and diagnostics policy shared by every zonal-type series.
#[derive(Debug, Clone)]
pub struct SeriesControl {
    /// Truncation by total degree (inclusive).
    pub k_max: usize,
    /// Threshold on the reported tail ratio above which a series is flagged
    /// as not converged.
    pub tail_warn: f64,
    /// Terms with |value| below this are skipped outright.
    pub abs_floor: f64,
}

impl SeriesControl {
    pub fn new(k_max: usize) -> Self {
        SeriesControl { k_max, tail_warn: 1e-8, abs_floor: 1e-300 }
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl::new(20)
    }
}

/// A truncated series value with its tail diagnostic: |last shell| divided by
/// |cumulative sum|.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEval {
    pub value: f64,
    pub tail_ratio: f64,
    /// False when the tail ratio exceeded the configured warn threshold.
    pub converged: bool,
}

fn shell_value(
    a: Option<f64>,
    b: Option<f64>,
    k: usize,
    eig: &[f64],
    zonal: &ZonalTables,
) -> Result<f64> {
    let m = eig.len();
    let ln_kfact = factorial_ln(k);
    let mut shell = 0.0f64;
    for kappa in enumerate_partitions(k, m.min(k.max(1))) {
        let mut coeff = LogValue::from_ln(-ln_kfact);
        if let Some(a) = a {
            coeff = coeff * gen_pochhammer_ln(a, &kappa);
        }
        if let Some(b) = b {
            let denom = gen_pochhammer_ln(b, &kappa);
            if denom.is_zero() {
                return Err(Error::PochhammerPole { a: b, kappa: kappa.parts().to_vec() });
            }
            coeff = coeff / denom;
        }
        if coeff.is_zero() {
            continue;
        }
        let c = zonal.eval(&kappa, eig)?;
        shell += coeff.to_f64() * c;
    }
    Ok(shell)
}

fn hyper_series(
    a: Option<f64>,
    b: Option<f64>,
    x: &DMatrix<f64>,
    ctrl: &SeriesControl,
    zonal: &ZonalTables,
) -> Result<SeriesEval> {
    linalg::check_square(x, "hypergeometric argument")?;
    if !linalg::is_symmetric(x, 1e-10) {
        return Err(Error::Domain("hypergeometric argument must be symmetric".into()));
    }
    let eig = linalg::sym_eigenvalues_desc(x);
    let mut total = 0.0f64;
    let mut last_shell = 0.0f64;
    for k in 0..=ctrl.k_max {
        let shell = shell_value(a, b, k, &eig, zonal)?;
        if shell.abs() > ctrl.abs_floor || k == 0 {
            total += shell;
        }
        last_shell = shell;
    }
    let tail_ratio =
        if total == 0.0 { last_shell.abs() } else { last_shell.abs() / total.abs() };
    Ok(SeriesEval { value: total, tail_ratio, converged: tail_ratio <= ctrl.tail_warn })
}

/// Confluent hypergeometric function of matrix argument,
/// 1F1(a; b; X) = sum_k sum_{kappa ⊢ k} (a)_kappa / (b)_kappa C_kappa(X) / k!,
/// truncated at total degree `ctrl.k_max` with shells accumulated in
/// descending-lex partition order.
pub fn hyper_1f1(
    a: f64,
    b: f64,
    x: &DMatrix<f64>,
    ctrl: &SeriesControl,
    zonal: &ZonalTables,
) -> Result<SeriesEval> {
    hyper_series(Some(a), Some(b), x, ctrl, zonal)
}

/// 0F0(X) = etr(X), as the same truncated series with the Pochhammer factors
/// removed.
pub fn hyper_0f0(x: &DMatrix<f64>, ctrl: &SeriesControl, zonal: &ZonalTables) -> Result<SeriesEval> {
    hyper_series(None, None, x, ctrl, zonal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonal::build_restricted;

    fn zt(kmax: usize, mp: usize) -> ZonalTables {
        build_restricted(kmax, mp).unwrap()
    }

    #[test]
    fn zero_argument_is_one() {
        let z = zt(6, 2);
        let x = DMatrix::zeros(2, 2);
        let v = hyper_1f1(1.3, 2.7, &x, &SeriesControl::new(6), &z).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(v.tail_ratio, 0.0);
    }

    #[test]
    fn scalar_identity_exponential() {
        // 1F1(1; 2; x) = (e^x - 1)/x at m = 1
        let z = zt(30, 1);
        let x = DMatrix::from_element(1, 1, 1.0);
        let v = hyper_1f1(1.0, 2.0, &x, &SeriesControl::new(30), &z).unwrap();
        assert!((v.value - (1f64.exp() - 1.0)).abs() < 1e-12, "{}", v.value);
        assert!(v.converged);
    }

    #[test]
    fn scalar_reference_grid() {
        // against the plain scalar series, |x| <= 5
        let z = zt(38, 1);
        let ctrl = SeriesControl::new(38);
        let scalar_1f1 = |a: f64, b: f64, x: f64| {
            let mut term = 1.0;
            let mut sum = 1.0;
            for n in 0..200 {
                term *= (a + n as f64) / (b + n as f64) * x / (n as f64 + 1.0);
                sum += term;
                if term.abs() < 1e-16 * sum.abs() {
                    break;
                }
            }
            sum
        };
        for &a in &[0.5, 1.0, 2.5, 7.0] {
            for &b in &[0.5, 1.0, 2.5, 7.0] {
                for &x in &[-5.0, -1.2, 0.3, 2.0, 5.0] {
                    let xm = DMatrix::from_element(1, 1, x);
                    let got = hyper_1f1(a, b, &xm, &ctrl, &z).unwrap().value;
                    let want = scalar_1f1(a, b, x);
                    assert!(
                        (got - want).abs() <= 1e-8 * want.abs().max(1.0),
                        "a={a} b={b} x={x}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn kummer_relation_scalar() {
        // 1F1(a;b;x) = e^x 1F1(b-a; b; -x) at m = 1
        let z = zt(38, 1);
        let ctrl = SeriesControl::new(38);
        for &(a, b, x) in &[(0.5, 2.5, 1.7), (2.5, 7.0, -2.0), (1.0, 2.5, 3.0)] {
            let lhs = hyper_1f1(a, b, &DMatrix::from_element(1, 1, x), &ctrl, &z).unwrap().value;
            let rhs = x.exp()
                * hyper_1f1(b - a, b, &DMatrix::from_element(1, 1, -x), &ctrl, &z).unwrap().value;
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn etr_degenerate_check() {
        let z = zt(25, 3);
        let x = DMatrix::from_row_slice(
            3,
            3,
            &[0.31, 0.12, -0.05, 0.12, -0.22, 0.08, -0.05, 0.08, 0.15],
        );
        let v = hyper_0f0(&x, &SeriesControl::new(25), &z).unwrap();
        let want = x.trace().exp();
        assert!((v.value - want).abs() < 1e-9 * want, "{} vs {want}", v.value);

        let d = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, -0.2]);
        let z2 = zt(25, 2);
        let v = hyper_0f0(&d, &SeriesControl::new(25), &z2).unwrap();
        assert!((v.value - 0.1f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn tail_ratio_decreases_with_kmax() {
        let z = zt(24, 2);
        let x = DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.3, 0.5]);
        let mut prev = f64::INFINITY;
        for kmax in [6usize, 12, 18, 24] {
            let v = hyper_0f0(&x, &SeriesControl::new(kmax), &z).unwrap();
            assert!(v.tail_ratio < prev, "tail not decreasing at kmax={kmax}");
            prev = v.tail_ratio;
        }
    }

    #[test]
    fn orthogonal_invariance() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let z = zt(16, 3);
        let ctrl = SeriesControl::new(16);
        let x = crate::randmat::random_psd(3, &mut rng) * 0.4;
        let h = crate::randmat::haar_orthogonal(3, &mut rng);
        let v1 = hyper_1f1(2.0, 3.5, &x, &ctrl, &z).unwrap().value;
        let v2 = hyper_1f1(2.0, 3.5, &(&h * &x * h.transpose()), &ctrl, &z).unwrap().value;
        assert!((v1 - v2).abs() <= 1e-10 * v1.abs());
    }

    #[test]
    fn pochhammer_pole_detected() {
        let z = zt(6, 2);
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.2]);
        // b = 1/2 gives (b)_kappa = 0 for kappa = (1,1): factor (b - 1/2)
        let err = hyper_1f1(1.0, 0.5, &x, &SeriesControl::new(4), &z);
        assert!(matches!(err, Err(Error::PochhammerPole { .. })));
    }
}
