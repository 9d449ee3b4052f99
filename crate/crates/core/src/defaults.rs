//! Numerical defaults used across the crate.
//!
//! Every tunable tolerance lives here so experiment configurations and the
//! acceptance suite agree on a single table.
//!
//! | constant | value | used by |
//! |---|---|---|
//! | `QUAD_REL_TOL` | 1e-10 | adaptive Gauss-Kronrod panels |
//! | `QUAD_MAX_SUBDIVISIONS` | 2000 | adaptive Gauss-Kronrod panels |
//! | `DECAY_TOL` | 1e-10 | `exp_decay_integral` tail cutoff |
//! | `DECAY_R_MAX` | 1e300 | `exp_decay_integral` divergence probe |
//! | `CF_CUTOFF` | 1e-12 | frequency cutoff of density inversion |
//! | `DENSITY_POINTS` | 2^14 | initial density grid size |
//! | `DENSITY_MAX_POINTS` | 2^21 | largest density grid |
//! | `DENSITY_EDGE_RATIO` | 1e-7 | edge-to-peak ratio accepted before widening |
//! | `FISHER_FLOOR` | 1e-14 | relative positivity floor for p'^2/p |
//! | `CRITERION_N_MAX` | 10^4 | modes enumerated by series criteria |
//! | `CRITERION_TAIL_TOL` | 0.5 | admissible extrapolated tail share |
//! | `BOUND_K_MAX` | 10^4 | modes scanned for sup-type constants |
//! | `CF_BAND` | 3 | empirical CF half-width multiplier (/sqrt M) |

pub const QUAD_REL_TOL: f64 = 1e-10;
pub const QUAD_ABS_TOL: f64 = 1e-300;
pub const QUAD_MAX_SUBDIVISIONS: usize = 2000;

pub const DECAY_TOL: f64 = 1e-10;
pub const DECAY_R_MAX: f64 = 1e300;

pub const CF_CUTOFF: f64 = 1e-12;
pub const DENSITY_POINTS: usize = 1 << 14;
pub const DENSITY_MAX_POINTS: usize = 1 << 21;
pub const DENSITY_EDGE_RATIO: f64 = 1e-7;
pub const DENSITY_RESOLUTION: f64 = 20.0;
pub const DENSITY_CLIP_FLOOR: f64 = -1e-12;
pub const FISHER_FLOOR: f64 = 1e-14;

pub const CRITERION_N_MAX: usize = 10_000;
pub const CRITERION_TAIL_TOL: f64 = 0.5;
/// Fitted index-space decay exponents below this are summable.
pub const CRITERION_FINITE_SLOPE: f64 = -1.05;
/// Fitted index-space decay exponents above this are not summable.
pub const CRITERION_DIVERGENT_SLOPE: f64 = -1.02;

pub const BOUND_K_MAX: usize = 10_000;
pub const BOUND_CHUNK: usize = 256;

pub const CF_BAND: f64 = 3.0;
