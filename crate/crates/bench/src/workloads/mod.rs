pub mod churn;
pub mod life;
pub mod matmult;
pub mod pi;
pub mod quicksort;
pub mod sieve;
pub mod sieve_cml;
