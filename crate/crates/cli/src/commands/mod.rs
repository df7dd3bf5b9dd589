pub mod analyze;
pub mod evolve;
pub mod lindblad;
pub mod meanfield;
pub mod plot;
pub mod scan;
