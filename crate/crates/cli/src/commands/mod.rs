pub mod anomaly;
pub mod augment;
pub mod detect;
pub mod eval;
pub mod phantom;
pub mod stats;
