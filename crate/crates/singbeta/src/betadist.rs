//! Density evaluators for central, noncentral and doubly noncentral
//! matrix-variate beta type I and II distributions, in both the nonsingular
//! (q = m) and singular (q = r < m) cases, plus the eigenvalue-space measure
//! factor for joint densities over (L, H1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::combinat::{
    enumerate_partitions, factorial_ln, gen_pochhammer_ln, mv_gamma_ln, LogValue, Partition,
};
use crate::error::{Error, Result};
use crate::hypermat::{hyper_1f1, SeriesControl};
use crate::invariant::{InvariantComponent, InvariantTables, TracePrimitives};
use crate::linalg;
use crate::zonal::{build_restricted, ZonalTables};

/// Which of the two beta families a spectral point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaKind {
    /// Type I: eigenvalues in (0, 1).
    Beta1,
    /// Type II: eigenvalues positive.
    Beta2,
}

/// Parameters (m, q, r, s, Omega1, Omega2) shared by every density here.
#[derive(Debug, Clone)]
pub struct BetaParams {
    pub m: usize,
    pub q: usize,
    pub r: f64,
    pub s: f64,
    pub omega1: DMatrix<f64>,
    pub omega2: DMatrix<f64>,
}

impl BetaParams {
    pub fn new(
        m: usize,
        q: usize,
        r: f64,
        s: f64,
        omega1: DMatrix<f64>,
        omega2: DMatrix<f64>,
    ) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParams("dimension m must be >= 1".into()));
        }
        if !(s > m as f64 - 1.0) {
            return Err(Error::InvalidParams(format!("need s > m - 1 = {}, got {s}", m - 1)));
        }
        if q == m {
            if !(r > m as f64 - 1.0) {
                return Err(Error::InvalidParams(format!(
                    "nonsingular case q = m needs r > m - 1 = {}, got {r}",
                    m - 1
                )));
            }
        } else if q >= 1 && q < m {
            if (r - q as f64).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "singular case needs q = r < m with integer r; got q = {q}, r = {r}"
                )));
            }
        } else {
            return Err(Error::InvalidParams(format!("rank q = {q} outside 1..={m}")));
        }
        if omega1.nrows() != m || omega2.nrows() != m {
            return Err(Error::InvalidParams("noncentrality matrices must be m x m".into()));
        }
        linalg::check_psd(&omega1, "omega1")?;
        linalg::check_psd(&omega2, "omega2")?;
        Ok(BetaParams { m, q, r, s, omega1, omega2 })
    }

    /// Central parameters: both noncentrality matrices zero.
    pub fn central(m: usize, q: usize, r: f64, s: f64) -> Result<Self> {
        BetaParams::new(m, q, r, s, DMatrix::zeros(m, m), DMatrix::zeros(m, m))
    }

    pub fn is_central(&self) -> bool {
        self.omega1.amax() == 0.0 && self.omega2.amax() == 0.0
    }
}

/// A rank-q non-negative definite matrix stored spectrally: eigenvalues
/// l_1 > ... > l_q in the kind's range plus a Stiefel frame with orthonormal
/// columns.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    eigenvalues: Vec<f64>,
    frame: DMatrix<f64>,
    kind: BetaKind,
}

impl SpectralPoint {
    pub fn new(eigenvalues: Vec<f64>, frame: DMatrix<f64>, kind: BetaKind) -> Result<Self> {
        let q = eigenvalues.len();
        if q == 0 || frame.ncols() != q || frame.nrows() < q {
            return Err(Error::InvalidParams(format!(
                "frame is {}x{}, expected m x {q} with m >= q",
                frame.nrows(),
                frame.ncols()
            )));
        }
        // ties are admissible for the matrix densities themselves; the joint
        // eigenvalue measure rejects them separately where its Jacobian
        // vanishes
        for w in eigenvalues.windows(2) {
            if !(w[0] >= w[1]) {
                return Err(Error::Domain(format!(
                    "eigenvalues must be nonincreasing, got {:?}",
                    eigenvalues
                )));
            }
        }
        for (i, &l) in eigenvalues.iter().enumerate() {
            let ok = match kind {
                BetaKind::Beta1 => l > 0.0 && l < 1.0,
                BetaKind::Beta2 => l > 0.0,
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "eigenvalue {i} = {l} outside the {kind:?} range"
                )));
            }
        }
        let gram = frame.transpose() * &frame;
        if (&gram - DMatrix::<f64>::identity(q, q)).amax() > 1e-12 {
            return Err(Error::Domain("frame columns are not orthonormal to 1e-12".into()));
        }
        Ok(SpectralPoint { eigenvalues, frame, kind })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn kind(&self) -> BetaKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.frame.nrows()
    }

    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The represented matrix H1 L H1'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        &self.frame * l * self.frame.transpose()
    }

    /// Rotate the point: X -> H X H' moves the frame and keeps the spectrum.
    pub fn rotated(&self, h: &DMatrix<f64>) -> SpectralPoint {
        SpectralPoint {
            eigenvalues: self.eigenvalues.clone(),
            frame: h * &self.frame,
            kind: self.kind,
        }
    }

    /// For type II points: (I + F)^{-1} F and (I + F)^{-1}, both functions of
    /// the same spectrum and frame.
    fn type2_transforms(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.m();
        let shrunk: Vec<f64> = self.eigenvalues.iter().map(|&g| g / (1.0 + g)).collect();
        let d = DMatrix::from_diagonal(&DVector::from_vec(shrunk));
        let base = &self.frame * d * self.frame.transpose();
        let inv = DMatrix::<f64>::identity(m, m) - &base;
        (base, inv)
    }
}

/// A series-based density value: log-space density, the tail diagnostic of
/// the truncated series, and a flag raised when poor truncation drove the
/// series factor negative.
#[derive(Debug, Clone, Copy)]
pub struct DensityEval {
    pub value: LogValue,
    pub tail_ratio: f64,
    pub series_negative: bool,
}

impl DensityEval {
    fn exact(value: LogValue) -> Self {
        DensityEval { value, tail_ratio: 0.0, series_negative: false }
    }
}

/// Selects the evaluator behind joint-density and CLI entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityFamily {
    Central,
    DoublyNoncentral,
    NoncentralA,
    NoncentralB,
    Symmetrised,
}

/// Normalizing constant of Eqs. (1) and (4) in log space:
/// pi^((-mr + rq)/2) Gamma_m[(r+s)/2] / (Gamma_q[r/2] Gamma_m[s/2]).
pub fn norm_const_ln(params: &BetaParams) -> Result<LogValue> {
    let (m, q, r, s) = (params.m, params.q, params.r, params.s);
    let pi_exp = (-(m as f64) * r + r * q as f64) / 2.0;
    let mut v = LogValue::from_ln(pi_exp * std::f64::consts::PI.ln());
    v = v * mv_gamma_ln(m, (r + s) / 2.0)?;
    v = v / mv_gamma_ln(q, r / 2.0)?;
    v = v / mv_gamma_ln(m, s / 2.0)?;
    Ok(v)
}

fn check_point(point: &SpectralPoint, params: &BetaParams, kind: BetaKind) -> Result<()> {
    if point.kind() != kind {
        return Err(Error::Domain(format!(
            "point has kind {:?}, evaluator needs {kind:?}",
            point.kind()
        )));
    }
    if point.m() != params.m || point.q() != params.q {
        return Err(Error::DimensionMismatch(format!(
            "point is rank {} in dimension {}, params say q = {}, m = {}",
            point.q(),
            point.m(),
            params.q,
            params.m
        )));
    }
    Ok(())
}

/// Central type I density (with respect to the Hausdorff measure (dU)):
/// c |L|^((r-m-1)/2) |I - U|^((s-m-1)/2), the determinant |L| running over
/// the q nonzero eigenvalues.
pub fn beta1_central_density(point: &SpectralPoint, params: &BetaParams) -> Result<LogValue> {
    check_point(point, params, BetaKind::Beta1)?;
    let (m, r, s) = (params.m as f64, params.r, params.s);
    let mut ln = norm_const_ln(params)?;
    let e1 = (r - m - 1.0) / 2.0;
    let e2 = (s - m - 1.0) / 2.0;
    let mut add = 0.0;
    for &l in point.eigenvalues() {
        add += e1 * l.ln() + e2 * (1.0 - l).ln();
    }
    ln.log_magnitude += add;
    Ok(ln)
}

/// Central type II density: c |G|^((r-m-1)/2) |I + F|^(-(r+s)/2).
pub fn beta2_central_density(point: &SpectralPoint, params: &BetaParams) -> Result<LogValue> {
    check_point(point, params, BetaKind::Beta2)?;
    let (m, r, s) = (params.m as f64, params.r, params.s);
    let mut ln = norm_const_ln(params)?;
    let e1 = (r - m - 1.0) / 2.0;
    let e2 = -(r + s) / 2.0;
    let mut add = 0.0;
    for &g in point.eigenvalues() {
        add += e1 * g.ln() + e2 * (1.0 + g).ln();
    }
    ln.log_magnitude += add;
    Ok(ln)
}

/// Shared table context for every series-based evaluator.
///
/// Holds zonal tables restricted to the working dimension (so scalar series
/// can run to high degree) together with the invariant-polynomial tables.
pub struct DensityContext {
    pub zonal: ZonalTables,
    pub invariant: InvariantTables,
    m: usize,
}

impl DensityContext {
    /// Context for dimension `m` supporting series truncation up to `k_max`
    /// total degree (matrix cases are additionally capped by the invariant
    /// tables' degree).
    pub fn new(m: usize, k_max: usize) -> Result<Self> {
        let deg = k_max.max(8).min(crate::zonal::RESTRICTED_DEGREE_CAP);
        let max_parts = m.min(deg).max(1);
        let zonal = build_restricted(deg, max_parts)?;
        let invariant = InvariantTables::fixture()?;
        Ok(DensityContext { zonal, invariant, m })
    }

    /// Swap in another table source (e.g. bootstrapped components).
    pub fn with_invariant_tables(mut self, tables: InvariantTables) -> Self {
        self.invariant = tables;
        self
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    /// (1/2 (r+s))_phi / ((1/2 r)_kappa (1/2 s)_lambda k! l!) via log space.
    fn series_coeff(
        &self,
        r: f64,
        s: f64,
        kappa: &Partition,
        lambda: &Partition,
        phi: &Partition,
    ) -> Result<f64> {
        let num = gen_pochhammer_ln((r + s) / 2.0, phi);
        let den_r = gen_pochhammer_ln(r / 2.0, kappa);
        let den_s = gen_pochhammer_ln(s / 2.0, lambda);
        if den_r.is_zero() {
            return Err(Error::PochhammerPole { a: r / 2.0, kappa: kappa.parts().to_vec() });
        }
        if den_s.is_zero() {
            return Err(Error::PochhammerPole { a: s / 2.0, kappa: lambda.parts().to_vec() });
        }
        let mut v = num / den_r / den_s;
        v.log_magnitude -= factorial_ln(kappa.weight()) + factorial_ln(lambda.weight());
        Ok(v.to_f64())
    }

    /// Series of Theorems 1-2: sum over kappa, lambda, phi of
    /// coeff * theta_phi * C_phi^{kappa,lambda}(X1, X2).
    ///
    /// kappa runs over at most q parts and lambda over at most m parts: the
    /// invariant polynomial vanishes identically when an argument's rank is
    /// below the part count, and exactly those terms would hit Pochhammer
    /// zeros in the singular case.
    fn theorem_series(
        &self,
        x1: &DMatrix<f64>,
        x2: &DMatrix<f64>,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<(f64, f64, bool)> {
        let (m, q, r, s) = (params.m, params.q, params.r, params.s);
        let prims = TracePrimitives::new(x1, x2)?;
        let scalar = m == 1;
        if !scalar && ctrl.k_max > self.invariant.max_total_degree {
            return Err(Error::UnsupportedBidegree {
                k: ctrl.k_max,
                l: 0,
                cap: self.invariant.max_total_degree,
            });
        }
        let mut total = 0.0f64;
        let mut last_shell = 0.0f64;
        for d in 0..=ctrl.k_max {
            let mut shell = 0.0f64;
            if d == 0 {
                shell = 1.0;
            } else if scalar {
                let (x, y) = (x1[(0, 0)], x2[(0, 0)]);
                for k in (0..=d).rev() {
                    let l = d - k;
                    let c = InvariantComponent::scalar(k, l);
                    let coeff = self.series_coeff(r, s, &c.kappa, &c.lambda, &c.phi)?;
                    shell += coeff * x.powi(k as i32) * y.powi(l as i32);
                }
            } else {
                for k in (0..=d).rev() {
                    let l = d - k;
                    for kappa in enumerate_partitions(k, q.min(k.max(1))) {
                        for lambda in enumerate_partitions(l, m.min(l.max(1))) {
                            for comp in self.invariant.pair_components(&kappa, &lambda) {
                                if comp.phi.num_parts() > m {
                                    continue;
                                }
                                let coeff = self.series_coeff(r, s, &kappa, &lambda, &comp.phi)?;
                                shell += coeff * comp.theta * comp.eval_prims(&prims);
                            }
                        }
                    }
                }
            }
            if shell.abs() > ctrl.abs_floor || d == 0 {
                total += shell;
            }
            last_shell = shell;
        }
        let tail = if total == 0.0 { last_shell.abs() } else { last_shell.abs() / total.abs() };
        Ok((total, tail, total <= 0.0))
    }

    /// Series of Lemmas 2-3: coeff * C_phi^{kappa,lambda}(Omega1/2, Omega2/2)
    /// * C_phi^{kappa,lambda}(Y1, Y2) / C_phi(I_m).
    fn lemma_series(
        &self,
        y1: &DMatrix<f64>,
        y2: &DMatrix<f64>,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<(f64, f64, bool)> {
        let (m, q, r, s) = (params.m, params.q, params.r, params.s);
        let omega_prims =
            TracePrimitives::new(&(&params.omega1 * 0.5), &(&params.omega2 * 0.5))?;
        let point_prims = TracePrimitives::new(y1, y2)?;
        let scalar = m == 1;
        if !scalar && ctrl.k_max > self.invariant.max_total_degree {
            return Err(Error::UnsupportedBidegree {
                k: ctrl.k_max,
                l: 0,
                cap: self.invariant.max_total_degree,
            });
        }
        let mut total = 0.0f64;
        let mut last_shell = 0.0f64;
        for d in 0..=ctrl.k_max {
            let mut shell = 0.0f64;
            if d == 0 {
                shell = 1.0;
            } else if scalar {
                let (w1, w2) = (omega_prims.0[0], omega_prims.0[1]);
                let (u, v) = (point_prims.0[0], point_prims.0[1]);
                for k in (0..=d).rev() {
                    let l = d - k;
                    let c = InvariantComponent::scalar(k, l);
                    let coeff = self.series_coeff(r, s, &c.kappa, &c.lambda, &c.phi)?;
                    shell += coeff
                        * (w1.powi(k as i32) * w2.powi(l as i32))
                        * (u.powi(k as i32) * v.powi(l as i32));
                }
            } else {
                for k in (0..=d).rev() {
                    let l = d - k;
                    for kappa in enumerate_partitions(k, q.min(k.max(1))) {
                        for lambda in enumerate_partitions(l, m.min(l.max(1))) {
                            for comp in self.invariant.pair_components(&kappa, &lambda) {
                                if comp.phi.num_parts() > m {
                                    continue;
                                }
                                let coeff = self.series_coeff(r, s, &kappa, &lambda, &comp.phi)?;
                                let c_phi_id = self.zonal.eval_identity(&comp.phi, m)?;
                                shell += coeff * comp.eval_prims(&omega_prims)
                                    * comp.eval_prims(&point_prims)
                                    / c_phi_id;
                            }
                        }
                    }
                }
            }
            if shell.abs() > ctrl.abs_floor || d == 0 {
                total += shell;
            }
            last_shell = shell;
        }
        let tail = if total == 0.0 { last_shell.abs() } else { last_shell.abs() / total.abs() };
        Ok((total, tail, total <= 0.0))
    }

    fn etr_neg_half_omegas(&self, params: &BetaParams) -> LogValue {
        LogValue::from_ln(-0.5 * (params.omega1.trace() + params.omega2.trace()))
    }

    fn combine(central: LogValue, etr: LogValue, series: (f64, f64, bool)) -> DensityEval {
        let (sum, tail, negative) = series;
        let value = central * etr * LogValue::from_f64(sum);
        DensityEval { value, tail_ratio: tail, series_negative: negative }
    }

    /// Doubly noncentral type I density: central factor times
    /// etr(-(Omega1+Omega2)/2) times the invariant-polynomial series with
    /// kernel C_phi^{kappa,lambda}(Omega1 U / 2, Omega2 (I-U) / 2).
    pub fn beta1_dnc_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        let central = beta1_central_density(point, params)?;
        let u = point.reconstruct();
        let m = params.m;
        let x1 = &params.omega1 * &u * 0.5;
        let x2 = &params.omega2 * (DMatrix::<f64>::identity(m, m) - &u) * 0.5;
        let series = self.theorem_series(&x1, &x2, params, ctrl)?;
        Ok(Self::combine(central, self.etr_neg_half_omegas(params), series))
    }

    /// Doubly noncentral type II density; kernel arguments
    /// Omega1 (I+F)^{-1} F / 2 and Omega2 (I+F)^{-1} / 2 share the point's
    /// eigenvectors, so no extra factorization is needed.
    pub fn beta2_dnc_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        let central = beta2_central_density(point, params)?;
        let (f_shrunk, inv) = point.type2_transforms();
        let x1 = &params.omega1 * &f_shrunk * 0.5;
        let x2 = &params.omega2 * &inv * 0.5;
        let series = self.theorem_series(&x1, &x2, params, ctrl)?;
        Ok(Self::combine(central, self.etr_neg_half_omegas(params), series))
    }

    /// Symmetrised doubly noncentral type I density (Haar average of the
    /// plain one): factorized kernel, no theta weight.
    pub fn beta1_symmetrised_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        let central = beta1_central_density(point, params)?;
        let u = point.reconstruct();
        let m = params.m;
        let iu = DMatrix::<f64>::identity(m, m) - &u;
        let series = self.lemma_series(&u, &iu, params, ctrl)?;
        Ok(Self::combine(central, self.etr_neg_half_omegas(params), series))
    }

    /// Symmetrised doubly noncentral type II density.
    pub fn beta2_symmetrised_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        let central = beta2_central_density(point, params)?;
        let (f_shrunk, inv) = point.type2_transforms();
        let series = self.lemma_series(&f_shrunk, &inv, params, ctrl)?;
        Ok(Self::combine(central, self.etr_neg_half_omegas(params), series))
    }

    fn require_zero(omega: &DMatrix<f64>, which: &str) -> Result<()> {
        if omega.amax() != 0.0 {
            return Err(Error::InvalidParams(format!(
                "{which} must be zero for this noncentral special case"
            )));
        }
        Ok(())
    }

    /// 1F1 factor at the symmetrized argument sqrt(W) M sqrt(W) / 2, whose
    /// spectrum equals that of W M / 2.
    fn one_f1_factor(
        &self,
        a: f64,
        b: f64,
        omega: &DMatrix<f64>,
        mat: &DMatrix<f64>,
        ctrl: &SeriesControl,
    ) -> Result<(f64, f64)> {
        let half = linalg::psd_sqrt(omega)?;
        let arg = linalg::symmetrize(&(&half * mat * &half * 0.5));
        let eval = hyper_1f1(a, b, &arg, ctrl, &self.zonal)?;
        Ok((eval.value, eval.tail_ratio))
    }

    /// Noncentral type I(A) (Omega1 = 0): central * etr(-Omega2/2) *
    /// 1F1((r+s)/2; s/2; Omega2 (I-U)/2).
    pub fn beta1_nca_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        Self::require_zero(&params.omega1, "omega1")?;
        let central = beta1_central_density(point, params)?;
        let m = params.m;
        let iu = DMatrix::<f64>::identity(m, m) - point.reconstruct();
        let (f1, tail) = self.one_f1_factor(
            (params.r + params.s) / 2.0,
            params.s / 2.0,
            &params.omega2,
            &iu,
            ctrl,
        )?;
        let etr = LogValue::from_ln(-0.5 * params.omega2.trace());
        Ok(Self::combine(central, etr, (f1, tail, f1 <= 0.0)))
    }

    /// Noncentral type I(B) (Omega2 = 0): central * etr(-Omega1/2) *
    /// 1F1((r+s)/2; r/2; Omega1 U / 2). The second parameter is r/2, which is
    /// what the kappa-collapse of the doubly noncentral series produces.
    pub fn beta1_ncb_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        Self::require_zero(&params.omega2, "omega2")?;
        let central = beta1_central_density(point, params)?;
        let u = point.reconstruct();
        let (f1, tail) = self.one_f1_factor(
            (params.r + params.s) / 2.0,
            params.r / 2.0,
            &params.omega1,
            &u,
            ctrl,
        )?;
        let etr = LogValue::from_ln(-0.5 * params.omega1.trace());
        Ok(Self::combine(central, etr, (f1, tail, f1 <= 0.0)))
    }

    /// Noncentral type II(A) (Omega1 = 0): 1F1((r+s)/2; s/2; Omega2 (I+F)^{-1}/2).
    pub fn beta2_nca_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        Self::require_zero(&params.omega1, "omega1")?;
        let central = beta2_central_density(point, params)?;
        let (_, inv) = point.type2_transforms();
        let (f1, tail) = self.one_f1_factor(
            (params.r + params.s) / 2.0,
            params.s / 2.0,
            &params.omega2,
            &inv,
            ctrl,
        )?;
        let etr = LogValue::from_ln(-0.5 * params.omega2.trace());
        Ok(Self::combine(central, etr, (f1, tail, f1 <= 0.0)))
    }

    /// Noncentral type II(B) (Omega2 = 0): 1F1((r+s)/2; r/2; Omega1 (I+F)^{-1} F/2).
    pub fn beta2_ncb_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        Self::require_zero(&params.omega2, "omega2")?;
        let central = beta2_central_density(point, params)?;
        let (f_shrunk, _) = point.type2_transforms();
        let (f1, tail) = self.one_f1_factor(
            (params.r + params.s) / 2.0,
            params.r / 2.0,
            &params.omega1,
            &f_shrunk,
            ctrl,
        )?;
        let etr = LogValue::from_ln(-0.5 * params.omega1.trace());
        Ok(Self::combine(central, etr, (f1, tail, f1 <= 0.0)))
    }

    /// Density of the selected family at a point.
    pub fn density(
        &self,
        family: DensityFamily,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
    ) -> Result<DensityEval> {
        match (family, point.kind()) {
            (DensityFamily::Central, BetaKind::Beta1) => {
                Ok(DensityEval::exact(beta1_central_density(point, params)?))
            }
            (DensityFamily::Central, BetaKind::Beta2) => {
                Ok(DensityEval::exact(beta2_central_density(point, params)?))
            }
            (DensityFamily::DoublyNoncentral, BetaKind::Beta1) => {
                self.beta1_dnc_density(point, params, ctrl)
            }
            (DensityFamily::DoublyNoncentral, BetaKind::Beta2) => {
                self.beta2_dnc_density(point, params, ctrl)
            }
            (DensityFamily::NoncentralA, BetaKind::Beta1) => {
                self.beta1_nca_density(point, params, ctrl)
            }
            (DensityFamily::NoncentralA, BetaKind::Beta2) => {
                self.beta2_nca_density(point, params, ctrl)
            }
            (DensityFamily::NoncentralB, BetaKind::Beta1) => {
                self.beta1_ncb_density(point, params, ctrl)
            }
            (DensityFamily::NoncentralB, BetaKind::Beta2) => {
                self.beta2_ncb_density(point, params, ctrl)
            }
            (DensityFamily::Symmetrised, BetaKind::Beta1) => {
                self.beta1_symmetrised_density(point, params, ctrl)
            }
            (DensityFamily::Symmetrised, BetaKind::Beta2) => {
                self.beta2_symmetrised_density(point, params, ctrl)
            }
        }
    }

    /// Joint density of (L, H1) with respect to prod dl_i ^ (H1' dH1):
    /// the selected matrix density times 2^{-q} prod l_i^{m-q}
    /// prod_{i<j}(l_i - l_j).
    pub fn eigen_joint_density(
        &self,
        point: &SpectralPoint,
        params: &BetaParams,
        ctrl: &SeriesControl,
        family: DensityFamily,
    ) -> Result<DensityEval> {
        let ls = point.eigenvalues();
        let scale = ls[0].abs().max(1.0);
        for i in 0..ls.len().saturating_sub(1) {
            let gap = ls[i] - ls[i + 1];
            if gap < 1e-10 * scale {
                return Err(Error::DegenerateSpectrum { i, j: i + 1, gap });
            }
        }
        let mut dens = self.density(family, point, params, ctrl)?;
        let (m, q) = (params.m, params.q);
        let mut ln = -(q as f64) * 2f64.ln();
        for &l in ls {
            ln += (m - q) as f64 * l.ln();
        }
        for i in 0..q {
            for j in (i + 1)..q {
                ln += (ls[i] - ls[j]).ln();
            }
        }
        dens.value.log_magnitude += ln;
        Ok(dens)
    }
}
