//! Perturbations of a flow: seeds, spacetime symmetries, Jacobi-field fits,
//! the escape experiment and the parameter-space bookkeeping around it.

mod audit;
mod bisection;
mod escape;
mod jacobi;
mod seed;
mod transform;

pub use audit::{compliant_pairs, separation_audit, separation_predicate, AuditReport};
pub use bisection::{
    dumbbell_profile, dumbbell_verdict, neck_location_bisection, Bracket, DumbbellSpec,
    PinchVerdict,
};
pub use escape::{
    near_degenerate_base, run_escape_experiment, CeilingCheck, ConditionRow, EscapeOptions,
    EscapeReport, TranslatedEscape,
};
pub use jacobi::{difference_series, jacobi_fit, JacobiFit};
pub use seed::{apply_seed_perturbation, cutoff};
pub use transform::{transform_state, SpacetimeTransform, TransformedSlice};
