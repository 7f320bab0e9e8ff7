//! Simulation and order-preservation analysis for coupled stochastic functional
//! differential equations with Brownian and Poisson drivers.
//!
//! The state of a delay equation at time `t` is the segment `X_t(theta) = X(t + theta)`,
//! `theta` in `[-r0, 0]`. Two equations driven by the same noise are order-preserving
//! when componentwise-ordered initial segments yield ordered solutions for all time.

pub mod coeff;
pub mod existence;
pub mod noise;
pub mod order;
pub mod sampling;
pub mod segment;
pub mod solver;

pub use coeff::{CoeffError, CoefficientSet, Coefficients, ControlFunction, Equation, Shape};
pub use existence::{bihari_bound, mollify, truncate, BihariKernel, ExistenceError, MollifierLaw};
pub use noise::{JumpEvent, Mark, MarkMeasure, NoiseError, NoiseRealization, NoiseSpec, SeedRecord};
pub use order::{psi, psi_prime, psi_second, verify_order_mc, ConditionReport, McOptions, OrderError, OrderMetric};
pub use segment::{History, OrderWitness, Segment, SegmentError, SegmentLiteral};
pub use solver::{solve_coupled, solve_path, PairResult, PathResult, SolverConfig, SolverError};
