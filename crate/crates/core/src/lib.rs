//! Picard ranks of the K3 surfaces obtained by resolving 14-nodal
//! Cayley–Rohn quartics: point counting over finite fields, Weil and Tate
//! bounds from above, explicit divisors from below.

pub mod arith;
pub mod count;
pub mod divisors;
pub mod family;
pub mod ff;
pub mod linalg;
pub mod pipeline;
pub mod poly;
pub mod surd;
pub mod tate;
pub mod weil;

pub use count::{CountError, Method, PointCounts};
pub use divisors::{DivisorClass, DivisorError, DivisorKind, LowerBound};
pub use family::{BadReduction, CoefficientVector, FamilyError, ReducedSurface};
pub use ff::{ExtField, Fq};
pub use pipeline::{
    analyze_surface_at_prime, determine_rank, distinguish_surfaces, report, Outcome, PrimePolicy, PrimeRecord,
    ResultStore, SurfaceVerdict,
};
pub use tate::{CombinedBound, RankBoundAtPrime, TateError};
pub use weil::{PsiCandidate, SignResolution, SignStatus, WeilError};
