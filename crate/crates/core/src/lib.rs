//! Closed-loop AI-as-a-service on a simulated software-defined infrastructure.
//!
//! MAPE-K loops (monitor, analyze, plan, execute over shared knowledge) are
//! described as chains of functions, embedded into a modeled multi-tier
//! infrastructure according to per-step QoS, and run side by side under an
//! orchestrator that detects and arbitrates conflicting actions.
//!
//! | module | contents |
//! |---|---|
//! | [`sdi`] | topology, resources, allocation, path metrics |
//! | [`metrics`] | workloads, scraping, datasets, normalization, CSV |
//! | [`engines`] | autoencoder, linear regression, LSTM forecaster |
//! | [`chain`] | MKL-chain definition, validation, embedding, action catalog |
//! | [`control`] | lifecycle, ticking, conflict detection, arbitration, sandbox, scheduling |
//! | [`harness`] | end-to-end scenarios and their reports |

pub mod sdi;
pub mod metrics;
pub mod engines;
pub mod chain;
pub mod control;
pub mod harness;
