//! Zonal polynomials C_kappa(X) on the monomial symmetric basis, built by the
//! classical coefficient recurrence and evaluated from eigenvalues.
//!
//! Normalization is fixed by the sum identity sum_{kappa ⊢ k} C_kappa(X) =
//! (tr X)^k, which is the one the density series of this crate require.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combinat::{enumerate_partitions, Partition};
use crate::error::{Error, Result};
use crate::linalg;

/// Hard cap on full-basis table construction; beyond this the tables are far
/// larger than anything the density series can consume.
pub const DEFAULT_DEGREE_CAP: usize = 12;

/// Cap for dimension-restricted tables (parts bounded by a small m), which
/// stay tiny even at high degree.
pub const RESTRICTED_DEGREE_CAP: usize = 40;

/// Coefficient table for one degree: rows are partitions kappa ⊢ k, columns
/// are monomial symmetric functions m_lambda of the same degree.
#[derive(Debug, Clone)]
pub struct ZonalTable {
    pub degree: usize,
    /// Maximum number of parts retained in rows and columns.
    pub max_parts: usize,
    monos: Vec<Partition>,
    rows: Vec<(Partition, Vec<(usize, f64)>)>,
    index: HashMap<Partition, usize>,
}

impl ZonalTable {
    pub fn partitions(&self) -> impl Iterator<Item = &Partition> {
        self.rows.iter().map(|(p, _)| p)
    }

    /// Coefficient of m_lambda in C_kappa, zero when absent.
    pub fn coefficient(&self, kappa: &Partition, lambda: &Partition) -> f64 {
        let Some(&r) = self.index.get(kappa) else { return 0.0 };
        let li = self.monos.iter().position(|m| m == lambda);
        match li {
            Some(li) => self.rows[r]
                .1
                .iter()
                .find(|(i, _)| *i == li)
                .map(|(_, c)| *c)
                .unwrap_or(0.0),
            None => 0.0,
        }
    }
}

/// Tables for every degree 0..=k_max.
#[derive(Debug, Clone)]
pub struct ZonalTables {
    pub k_max: usize,
    pub max_parts: usize,
    per_degree: Vec<ZonalTable>,
}

/// Build full tables (rows and columns over all partitions) for degrees up to
/// `k_max`. Errors when `k_max` exceeds the configured cap.
pub fn build_zonal_table(k_max: usize) -> Result<ZonalTables> {
    if k_max > DEFAULT_DEGREE_CAP {
        return Err(Error::ZonalDegreeCap { requested: k_max, cap: DEFAULT_DEGREE_CAP });
    }
    Ok(build_restricted(k_max, k_max.max(1)).expect("cap already checked"))
}

/// Build tables keeping only partitions with at most `max_parts` parts.
///
/// The coefficient recurrence moves mass towards earlier parts, so the
/// restricted column set is closed under it and the retained coefficients
/// equal those of the full table. Evaluation at `m <= max_parts` eigenvalues
/// is exact because monomials with more than m parts vanish there.
pub fn build_restricted(k_max: usize, max_parts: usize) -> Result<ZonalTables> {
    if k_max > RESTRICTED_DEGREE_CAP {
        return Err(Error::ZonalDegreeCap { requested: k_max, cap: RESTRICTED_DEGREE_CAP });
    }
    let mut per_degree = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        per_degree.push(build_degree(k, max_parts));
    }
    Ok(ZonalTables { k_max, max_parts, per_degree })
}

fn rho(kappa: &[usize]) -> i64 {
    kappa
        .iter()
        .enumerate()
        .map(|(i, &k)| k as i64 * (k as i64 - (i as i64 + 1)))
        .sum()
}

fn conjugate(kappa: &[usize]) -> Vec<usize> {
    if kappa.is_empty() {
        return Vec::new();
    }
    (1..=kappa[0]).map(|j| kappa.iter().filter(|&&p| p >= j).count()).collect()
}

/// Leading coefficient of C_kappa on m_kappa: 2^k k! / prod over cells of
/// (2(arm+1) + leg). Numerator and denominator grow together, so the ratio
/// is formed from partial products to stay in range at high degree.
fn leading_coefficient(kappa: &[usize]) -> f64 {
    let k: usize = kappa.iter().sum();
    let kc = conjugate(kappa);
    let mut hooks = Vec::with_capacity(k);
    for (i, &row) in kappa.iter().enumerate() {
        for j in 0..row {
            let arm = row - (j + 1);
            let leg = kc[j] - (i + 1);
            hooks.push((2 * (arm + 1) + leg) as f64);
        }
    }
    let mut c = 1.0f64;
    for (i, h) in (1..=k).zip(&hooks) {
        c *= 2.0 * i as f64 / h;
    }
    c
}

fn build_degree(k: usize, max_parts: usize) -> ZonalTable {
    let parts = enumerate_partitions(k, max_parts.max(1));
    let index: HashMap<Partition, usize> =
        parts.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let n = parts.len();
    let mut rows = Vec::with_capacity(n);
    for kappa in &parts {
        // dense scratch row indexed like `parts`
        let mut dense = vec![0.0f64; n];
        let r_kappa = rho(kappa.parts());
        dense[index[kappa]] = leading_coefficient(kappa.parts());
        // walk lambdas strictly below kappa in descending lex order
        let start = index[kappa] + 1;
        for li in start..n {
            let lam = parts[li].parts();
            let mut num = 0.0f64;
            let p = lam.len();
            for j in 0..p {
                for i in 0..j {
                    for t in 1..=lam[j] {
                        let mut mu: Vec<usize> = lam.to_vec();
                        mu[i] += t;
                        mu[j] -= t;
                        mu.retain(|&x| x > 0);
                        mu.sort_unstable_by(|a, b| b.cmp(a));
                        let mu = Partition::new(mu).expect("valid by construction");
                        if let Some(&mi) = index.get(&mu) {
                            if dense[mi] != 0.0 {
                                num += ((lam[i] + t) as f64 - (lam[j] - t) as f64) * dense[mi];
                            }
                        }
                    }
                }
            }
            if num != 0.0 {
                let denom = (r_kappa - rho(lam)) as f64;
                dense[li] = num / denom;
            }
        }
        let sparse: Vec<(usize, f64)> =
            dense.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(i, &c)| (i, c)).collect();
        rows.push((kappa.clone(), sparse));
    }
    ZonalTable { degree: k, max_parts, monos: parts, rows, index }
}

/// Monomial symmetric function m_lambda at the given values.
fn monomial_eval(lambda: &[usize], xs: &[f64]) -> f64 {
    let p = lambda.len();
    if p == 0 {
        return 1.0;
    }
    if p > xs.len() {
        return 0.0;
    }
    // sum over injective assignments, then divide by multiplicities of equal
    // exponents
    let m = xs.len();
    let mut total = 0.0;
    let mut idx: Vec<usize> = Vec::with_capacity(p);
    let mut used = vec![false; m];
    fn rec(
        lambda: &[usize],
        xs: &[f64],
        used: &mut [bool],
        idx: &mut Vec<usize>,
        total: &mut f64,
    ) {
        if idx.len() == lambda.len() {
            let mut prod = 1.0;
            for (&i, &e) in idx.iter().zip(lambda) {
                prod *= xs[i].powi(e as i32);
            }
            *total += prod;
            return;
        }
        for i in 0..xs.len() {
            if !used[i] {
                used[i] = true;
                idx.push(i);
                rec(lambda, xs, used, idx, total);
                idx.pop();
                used[i] = false;
            }
        }
    }
    rec(lambda, xs, &mut used, &mut idx, &mut total);
    let mut mult = 1.0;
    let mut run = 1usize;
    for w in lambda.windows(2) {
        if w[0] == w[1] {
            run += 1;
            mult *= run as f64;
        } else {
            run = 1;
        }
    }
    total / mult
}

impl ZonalTables {
    pub fn table(&self, degree: usize) -> Result<&ZonalTable> {
        self.per_degree.get(degree).ok_or(Error::MissingZonalTable {
            degree,
            built: self.k_max,
            max_parts: self.max_parts,
        })
    }

    /// C_kappa at an eigenvalue list. Returns 0 when kappa has more parts
    /// than there are eigenvalues.
    pub fn eval(&self, kappa: &Partition, eigenvalues: &[f64]) -> Result<f64> {
        let m = eigenvalues.len();
        assert!(m >= 1, "need at least one eigenvalue");
        if kappa.num_parts() > m {
            return Ok(0.0);
        }
        // monomial columns with up to min(m, k) parts contribute at dimension
        // m, so a restricted table must retain at least that many
        if kappa.weight() > self.k_max || self.max_parts < m.min(kappa.weight()) {
            return Err(Error::MissingZonalTable {
                degree: kappa.weight(),
                built: self.k_max,
                max_parts: self.max_parts,
            });
        }
        let tab = self.table(kappa.weight())?;
        let r = tab.index[kappa];
        let mut total = 0.0;
        for &(li, c) in &tab.rows[r].1 {
            let lam = tab.monos[li].parts();
            if lam.len() <= m {
                total += c * monomial_eval(lam, eigenvalues);
            }
        }
        Ok(total)
    }

    /// C_kappa of a symmetric matrix argument, via its spectrum.
    pub fn eval_matrix(&self, kappa: &Partition, x: &DMatrix<f64>) -> Result<f64> {
        linalg::check_square(x, "zonal argument")?;
        let eig = linalg::sym_eigenvalues_desc(x);
        self.eval(kappa, &eig)
    }

    /// C_kappa(I_m).
    pub fn eval_identity(&self, kappa: &Partition, m: usize) -> Result<f64> {
        self.eval(kappa, &vec![1.0; m])
    }

    /// Relative residual of sum_{kappa ⊢ k} C_kappa(X) = (tr X)^k.
    pub fn identity_check(&self, k: usize, x: &DMatrix<f64>) -> Result<f64> {
        let m = linalg::check_square(x, "identity check argument")?;
        let eig = linalg::sym_eigenvalues_desc(x);
        let mut total = 0.0;
        for kappa in enumerate_partitions(k, m.min(self.max_parts).max(1)) {
            total += self.eval(&kappa, &eig)?;
        }
        let target = x.trace().powi(k as i32);
        if target == 0.0 {
            return Ok(total.abs());
        }
        Ok((total - target).abs() / target.abs())
    }
}

/// One serialized coefficient: C_{partition} picks up `coefficient` times the
/// monomial symmetric function with exponent vector `monomial_exponents`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZonalRecord {
    pub degree: usize,
    pub partition: Vec<usize>,
    pub monomial_exponents: Vec<usize>,
    pub coefficient: f64,
}

pub fn to_records(tables: &ZonalTables) -> Vec<ZonalRecord> {
    let mut out = Vec::new();
    for tab in &tables.per_degree {
        for (kappa, row) in &tab.rows {
            for &(li, c) in row {
                out.push(ZonalRecord {
                    degree: tab.degree,
                    partition: kappa.parts().to_vec(),
                    monomial_exponents: tab.monos[li].parts().to_vec(),
                    coefficient: c,
                });
            }
        }
    }
    out
}

pub fn records_to_json(tables: &ZonalTables) -> String {
    serde_json::to_string_pretty(&to_records(tables)).expect("serializable")
}
