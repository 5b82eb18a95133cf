//! Oracle constructions: weight sequences, oracle coefficients on the
//! compressed scale, first-hit streams and closed-form bounds.

pub mod bounds;
mod coef;
mod first_hit;
mod weights;

pub use coef::{oracle_b_interaction, oracle_b_main, oracle_b_scaled, InteractionSpec, OracleCoefficients};
pub use first_hit::{first_hit_stream, stream_cap, FirstHitStream};
pub use weights::{
    geometric_m, geometric_weights, interaction_ratios, interaction_weights, main_weights, marginal_m_pmf,
    power_taylor_coefs, series_weights, truncated_weights, truncation_point, SignalStats, WeightKind, WeightVector,
};
