//! Densities and samplers for matrix-variate beta type I and II
//! distributions — central, noncentral and doubly noncentral, in both the
//! nonsingular and the singular (rank-deficient) case — together with the
//! machinery they stand on: zonal polynomials, two-matrix invariant
//! polynomials, hypergeometric functions of matrix argument, and a Monte
//! Carlo verification toolbox that ties the densities back to their Wishart
//! constructions.

pub mod betadist;
pub mod combinat;
pub mod error;
pub mod hypermat;
pub mod invariant;
mod linalg;
pub mod randmat;
pub mod verify;
pub mod zonal;

pub use betadist::{
    beta1_central_density, beta2_central_density, norm_const_ln, BetaKind, BetaParams,
    DensityContext, DensityEval, DensityFamily, SpectralPoint,
};
pub use combinat::{
    enumerate_partitions, gen_pochhammer, gen_pochhammer_ln, mv_gamma_ln, LogValue, Partition,
};
pub use error::{Error, ErrorKind, Result};
pub use hypermat::{hyper_0f0, hyper_1f1, SeriesControl, SeriesEval};
pub use invariant::{
    bootstrap_invariants, theta_coeff, BiTraceMonomial, InvariantComponent, InvariantTables,
};
pub use randmat::{
    beta1_sample, beta2_sample, eigdecomp_rank_q, haar_orthogonal, pseudo_wishart_sample,
    stream_rng, wishart_sample, ScatterKind, ScatterMatrix,
};
pub use verify::{
    lemma4_check, marginal_eigen_density, normalization_check, scalar_dnc_oracle, symmetrise_mc,
    MCResult, NormalizationMethod,
};
pub use zonal::{build_zonal_table, ZonalTable, ZonalTables};
