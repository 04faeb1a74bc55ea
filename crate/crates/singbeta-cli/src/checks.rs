//! The named verification checks behind `singbeta verify`. Each check is
//! independent and deterministic given (n, seed); workers only control how
//! many run concurrently.

use nalgebra::DMatrix;
use serde::Serialize;

use singbeta::betadist::{BetaKind, BetaParams, DensityContext, DensityFamily, SpectralPoint};
use singbeta::hypermat::SeriesControl;
use singbeta::invariant::{bootstrap_invariants, InvariantTables};
use singbeta::verify::{
    ks_vs_grid_density, lemma4_check, marginal_eigen_density, normalization_check,
    scalar_dnc_oracle, symmetrise_mc, NormalizationMethod,
};
use singbeta::zonal::build_zonal_table;
use singbeta::{beta1_sample, stream_rng};

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
    pub seed: u64,
}

type AnyError = Box<dyn std::error::Error>;

struct Check {
    name: &'static str,
    run: fn(usize, u64) -> Result<CheckReport, String>,
}

const CHECKS: &[Check] = &[
    Check { name: "zonal_sum_identity", run: check_zonal_sum },
    Check { name: "scalar_dnc_vs_oracle", run: check_scalar_oracle },
    Check { name: "collapse_chain", run: check_collapse },
    Check { name: "symmetrisation", run: check_symmetrisation },
    Check { name: "splitting_identity", run: check_splitting },
    Check { name: "normalization_scalar", run: check_normalization_scalar },
    Check { name: "normalization_m2", run: check_normalization_m2 },
    Check { name: "sampler_vs_marginal", run: check_sampler_marginal },
    Check { name: "bootstrap_vs_fixture", run: check_bootstrap_fixture },
];

pub fn run_suite(
    only: Option<&str>,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<CheckReport>, AnyError> {
    let selected: Vec<&Check> = match only {
        Some(name) => {
            let c = CHECKS
                .iter()
                .find(|c| c.name == name)
                .ok_or_else(|| format!("unknown check '{name}'"))?;
            vec![c]
        }
        None => CHECKS.iter().collect(),
    };
    let workers = workers.max(1);
    let mut reports: Vec<Option<CheckReport>> = vec![None; selected.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let errors = std::sync::Mutex::new(Vec::<String>::new());
    let reports_mx = std::sync::Mutex::new(&mut reports);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(selected.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= selected.len() {
                    break;
                }
                match (selected[i].run)(n, seed) {
                    Ok(rep) => {
                        reports_mx.lock().unwrap()[i] = Some(rep);
                    }
                    Err(e) => {
                        errors.lock().unwrap().push(format!("{}: {e}", selected[i].name));
                    }
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    if let Some(e) = errors.first() {
        return Err(e.clone().into());
    }
    Ok(reports.into_iter().map(|r| r.expect("check ran")).collect())
}

fn report(
    name: &str,
    params: serde_json::Value,
    estimate: f64,
    std_error: f64,
    pass: bool,
    seed: u64,
) -> CheckReport {
    CheckReport { check: name.to_string(), params, estimate, std_error, pass, seed }
}

fn err_str<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn check_zonal_sum(_n: usize, seed: u64) -> Result<CheckReport, String> {
    let tables = build_zonal_table(6).map_err(err_str)?;
    let mut rng = stream_rng(seed, 10);
    let mut worst = 0.0f64;
    for m in 1..=5usize {
        use rand::RngExt;
        let g = DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.2);
        let x = &g * g.transpose();
        for k in 0..=6 {
            worst = worst.max(tables.identity_check(k, &x).map_err(err_str)?);
        }
    }
    Ok(report(
        "zonal_sum_identity",
        serde_json::json!({"k_max": 6, "sizes": [1, 5], "tolerance": 1e-9}),
        worst,
        0.0,
        worst < 1e-9,
        seed,
    ))
}

fn check_scalar_oracle(_n: usize, seed: u64) -> Result<CheckReport, String> {
    let (r, s, w1, w2) = (3.0, 5.0, 1.2, 0.7);
    let ctx = DensityContext::new(1, 30).map_err(err_str)?;
    let ctrl = SeriesControl::new(30);
    let params = BetaParams::new(
        1,
        1,
        r,
        s,
        DMatrix::from_element(1, 1, w1),
        DMatrix::from_element(1, 1, w2),
    )
    .map_err(err_str)?;
    let frame = DMatrix::from_element(1, 1, 1.0);
    let mut worst = 0.0f64;
    for i in 1..20 {
        let u = i as f64 / 20.0;
        let point = SpectralPoint::new(vec![u], frame.clone(), BetaKind::Beta1).map_err(err_str)?;
        let got = ctx.beta1_dnc_density(&point, &params, &ctrl).map_err(err_str)?;
        let oracle = scalar_dnc_oracle(r, s, w1, w2, u, 60).map_err(err_str)?;
        worst = worst.max((got.value.to_f64() - oracle.value).abs() / oracle.value);
    }
    Ok(report(
        "scalar_dnc_vs_oracle",
        serde_json::json!({"r": r, "s": s, "omega1": w1, "omega2": w2, "tolerance": 1e-6}),
        worst,
        0.0,
        worst < 1e-6,
        seed,
    ))
}

fn check_collapse(_n: usize, seed: u64) -> Result<CheckReport, String> {
    let ctx = DensityContext::new(2, 3).map_err(err_str)?;
    let ctrl = SeriesControl::new(3);
    let mut rng = stream_rng(seed, 20);
    use rand::RngExt;
    let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>());
    let omega = &g * g.transpose();
    let zero = DMatrix::zeros(2, 2);
    let frame = DMatrix::identity(2, 2);
    let point =
        SpectralPoint::new(vec![0.62, 0.21], frame, BetaKind::Beta1).map_err(err_str)?;
    let mut worst = 0.0f64;
    let pa = BetaParams::new(2, 2, 4.0, 5.0, zero.clone(), omega.clone()).map_err(err_str)?;
    let dnc = ctx.beta1_dnc_density(&point, &pa, &ctrl).map_err(err_str)?.value.to_f64();
    let nca = ctx.beta1_nca_density(&point, &pa, &ctrl).map_err(err_str)?.value.to_f64();
    worst = worst.max((dnc - nca).abs() / nca.abs());
    let pb = BetaParams::new(2, 2, 4.0, 5.0, omega, zero).map_err(err_str)?;
    let dnc = ctx.beta1_dnc_density(&point, &pb, &ctrl).map_err(err_str)?.value.to_f64();
    let ncb = ctx.beta1_ncb_density(&point, &pb, &ctrl).map_err(err_str)?.value.to_f64();
    worst = worst.max((dnc - ncb).abs() / ncb.abs());
    let pc = BetaParams::central(2, 2, 4.0, 5.0).map_err(err_str)?;
    let dnc = ctx.beta1_dnc_density(&point, &pc, &ctrl).map_err(err_str)?.value.to_f64();
    let central =
        singbeta::beta1_central_density(&point, &pc).map_err(err_str)?.to_f64();
    worst = worst.max((dnc - central).abs() / central.abs());
    Ok(report(
        "collapse_chain",
        serde_json::json!({"m": 2, "tolerance": 1e-12}),
        worst,
        0.0,
        worst < 1e-12,
        seed,
    ))
}

fn check_symmetrisation(n: usize, seed: u64) -> Result<CheckReport, String> {
    let ctx = DensityContext::new(2, 3).map_err(err_str)?;
    let ctrl = SeriesControl::new(3);
    let mut rng = stream_rng(seed, 30);
    use rand::RngExt;
    let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>());
    let omega1 = &g * g.transpose();
    let h = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>());
    let omega2 = &h * h.transpose();
    let params = BetaParams::new(2, 2, 4.0, 5.0, omega1, omega2).map_err(err_str)?;
    let hq = singbeta::haar_orthogonal(2, &mut rng);
    let point = SpectralPoint::new(vec![0.7, 0.3], hq.columns(0, 2).clone_owned(), BetaKind::Beta1)
        .map_err(err_str)?;
    let mc = symmetrise_mc(
        |p| Ok(ctx.beta1_dnc_density(p, &params, &ctrl)?.value.to_f64()),
        &point,
        n,
        seed,
    )
    .map_err(err_str)?;
    let sym =
        ctx.beta1_symmetrised_density(&point, &params, &ctrl).map_err(err_str)?.value.to_f64();
    let z = (mc.estimate - sym).abs() / mc.std_error.max(1e-300);
    Ok(report(
        "symmetrisation",
        serde_json::json!({"m": 2, "q": 2, "n": n, "criterion": "|z| <= 3"}),
        mc.estimate - sym,
        mc.std_error,
        z <= 3.0,
        seed,
    ))
}

fn check_splitting(n: usize, seed: u64) -> Result<CheckReport, String> {
    let zonal = build_zonal_table(6).map_err(err_str)?;
    let tables = InvariantTables::fixture().map_err(err_str)?;
    let mut rng = stream_rng(seed, 40);
    use rand::RngExt;
    let psd = |rng: &mut rand_chacha::ChaCha12Rng| {
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.3);
        &g * g.transpose() + DMatrix::identity(3, 3) * 0.2
    };
    let (a, b, x, y) = (psd(&mut rng), psd(&mut rng), psd(&mut rng), psd(&mut rng));
    let mut worst_z = 0.0f64;
    let mut worst_res = 0.0f64;
    for comp in tables.components() {
        let (k, l) = comp.bidegree();
        if k + l > 2 {
            continue;
        }
        let res = lemma4_check(comp, &a, &b, &x, &y, n, seed, &zonal).map_err(err_str)?;
        if res.std_error < 1e-12 {
            worst_res = worst_res.max(res.estimate.abs());
            continue;
        }
        worst_z = worst_z.max(res.estimate.abs() / res.std_error);
    }
    Ok(report(
        "splitting_identity",
        serde_json::json!({"m": 3, "components": "k+l <= 2", "n": n, "criterion": "|z| <= 3"}),
        worst_z,
        1.0,
        worst_z <= 3.0 && worst_res < 1e-8,
        seed,
    ))
}

fn check_normalization_scalar(_n: usize, seed: u64) -> Result<CheckReport, String> {
    let ctx = DensityContext::new(1, 6).map_err(err_str)?;
    let ctrl = SeriesControl::new(6);
    let params = BetaParams::central(1, 1, 2.0, 4.0).map_err(err_str)?;
    let mut worst = 0.0f64;
    for kind in [BetaKind::Beta1, BetaKind::Beta2] {
        let rep = normalization_check(
            &params,
            &ctrl,
            kind,
            DensityFamily::Central,
            NormalizationMethod::Quadrature1d,
            0,
            seed,
            &ctx,
        )
        .map_err(err_str)?;
        worst = worst.max((rep.result.estimate - 1.0).abs());
    }
    Ok(report(
        "normalization_scalar",
        serde_json::json!({"m": 1, "q": 1, "r": 2.0, "s": 4.0, "tolerance": 1e-10}),
        worst,
        0.0,
        worst < 1e-10,
        seed,
    ))
}

fn check_normalization_m2(n: usize, seed: u64) -> Result<CheckReport, String> {
    let ctx = DensityContext::new(2, 3).map_err(err_str)?;
    let ctrl = SeriesControl::new(3);
    let mut worst = 0.0f64;
    let mut worst_se = 0.0f64;
    for (q, r, s) in [(1usize, 1.0, 3.0), (2usize, 4.0, 4.0)] {
        let params = BetaParams::central(2, q, r, s).map_err(err_str)?;
        let rep = normalization_check(
            &params,
            &ctrl,
            BetaKind::Beta1,
            DensityFamily::Central,
            NormalizationMethod::Mc,
            n,
            seed,
            &ctx,
        )
        .map_err(err_str)?;
        worst = worst.max((rep.result.estimate - 1.0).abs());
        worst_se = worst_se.max(rep.result.std_error);
    }
    Ok(report(
        "normalization_m2",
        serde_json::json!({"m": 2, "q": [1, 2], "n": n, "tolerance": 0.01}),
        worst,
        worst_se,
        worst < 0.01,
        seed,
    ))
}

fn check_sampler_marginal(n: usize, seed: u64) -> Result<CheckReport, String> {
    let params = BetaParams::central(2, 1, 1.0, 3.0).map_err(err_str)?;
    let ctx = DensityContext::new(2, 3).map_err(err_str)?;
    let ctrl = SeriesControl::new(3);
    let mut rng = stream_rng(seed, 50);
    let mut draws: Vec<f64> = (0..n)
        .map(|_| Ok(beta1_sample(&params, &mut rng)?.eigenvalues()[0]))
        .collect::<Result<_, singbeta::Error>>()
        .map_err(err_str)?;
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let grid: Vec<f64> = (1..600).map(|i| i as f64 / 600.0).collect();
    let marg = marginal_eigen_density(
        &params,
        &ctrl,
        BetaKind::Beta1,
        DensityFamily::Central,
        &grid,
        32,
        seed,
        &ctx,
    )
    .map_err(err_str)?;
    let ks = ks_vs_grid_density(&draws, &marg.grid, &marg.density);
    Ok(report(
        "sampler_vs_marginal",
        serde_json::json!({"m": 2, "q": 1, "r": 1.0, "s": 3.0, "n": n, "tolerance": 0.02}),
        ks,
        0.0,
        ks < 0.02,
        seed,
    ))
}

fn check_bootstrap_fixture(n: usize, seed: u64) -> Result<CheckReport, String> {
    let zonal = build_zonal_table(6).map_err(err_str)?;
    let fixture = InvariantTables::fixture().map_err(err_str)?;
    let n = n.max(200_000);
    let mut worst = 0.0f64;
    for (k, l) in [(1usize, 0usize), (0, 1), (2, 0), (0, 2), (1, 1)] {
        for c in bootstrap_invariants(k, l, n, seed, &zonal).map_err(err_str)? {
            let f = fixture
                .component(&c.kappa, &c.lambda, &c.phi)
                .ok_or_else(|| format!("no fixture for {}:{}:{}", c.kappa, c.lambda, c.phi))?;
            worst = worst.max((c.theta - f.theta).abs());
            for (w, fv) in &f.coeffs {
                let v = c.coeffs.iter().find(|(cw, _)| cw == w).map(|(_, x)| *x).unwrap_or(0.0);
                worst = worst.max((v - fv).abs());
            }
        }
    }
    Ok(report(
        "bootstrap_vs_fixture",
        serde_json::json!({"bidegrees": "k+l <= 2", "n": n, "tolerance": 1e-3}),
        worst,
        0.0,
        worst < 1e-3,
        seed,
    ))
}
