//! Chord integrals, mixed chord integrals and Orlicz chord addition of star
//! bodies, evaluated by spherical quadrature.
//!
//! Bodies are represented by their radial functions (see [`star_body`]);
//! every functional depends only on the half-chord function
//! `d(K, u) = (rho(K, u) + rho(K, -u)) / 2`, sampled on the nodes of a
//! [`quadrature::SphereQuadrature`].

pub mod chord_addition;
pub mod chord_integrals;
pub mod error;
pub mod falsification;
pub mod generators;
pub mod inequality_suite;
pub mod orlicz_fn;
pub mod quadrature;
pub mod roots;
pub mod star_body;

pub use chord_addition::{
    eps_combination, lp_chord_add, orlicz_chord_add, orlicz_chord_combine, LpCombination,
    OrliczCombination,
};
pub use chord_integrals::{
    chord_integral, chord_measure, ith_mixed_chord, lp_mixed_chord, mixed_chord_integral,
    orlicz_mixed_chord, variational_derivative, ChordMeasure, IntegralResult,
};
pub use error::{ChordError, Result};
pub use falsification::{
    falsification_search, sl_drift_probe, CheckName, SearchOutcome, SearchSpec,
};
pub use inequality_suite::{
    check_decomposition, check_jensen_bound, check_lp_bm, check_lp_minkowski, check_minkowski_ith,
    check_orlicz_bm, check_orlicz_minkowski, CheckCase, CheckKind, InequalityReport,
};
pub use orlicz_fn::{Family, OrliczFunction, OrliczGauge};
pub use quadrature::{RuleKind, SphereQuadrature};
pub use star_body::{BodyExpr, LinearMap, StarBody, UnitDirection};
