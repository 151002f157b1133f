//! Variational renormalization group and RBM-based deep networks on Ising
//! models.
//!
//! The numerical core is generic over the floating-point scalar (`f32` or
//! `f64`, see [`Scalar`]). Every identity check in this crate is done by
//! exact enumeration, so the `f64` aliases at the bottom of this file are
//! what most callers want.

pub mod dnn;
pub mod enumerate;
pub mod error;
pub mod io;
pub mod mapping;
pub mod rbm;
pub mod rg;
pub mod sampler;
pub mod scalar;
pub mod spin;
pub mod transfer;

pub use dnn::{
    build_decimation_dnn, receptive_field_size, receptive_fields,
    reconstruction_magnetization_correlation, train_stack, DecimationDnn, DnnStack, LayerActivity,
    PropagationMode, ReceptiveFieldSet, Reconstruction,
};
pub use enumerate::{Enumerator, DEFAULT_ENUMERATION_LIMIT};
pub use error::{Error, Result};
pub use mapping::{BoltzmannMachine, MappingReport};
pub use rbm::{RbmGradient, RbmParams, TrainConfig, TrainOutcome};
pub use rg::{
    decimation_step_coupling, rg_flow, FittedHamiltonian, RenormalizedHamiltonian, RgFlow,
    RgOperator, TermBasis,
};
pub use sampler::{Observables, SampleDataset, SamplerConfig};
pub use scalar::Scalar;
pub use spin::{Boundary, Hamiltonian, Lattice, LatticeKind, SpinConfig, SpinDomain, Term};

pub type Hamiltonian64 = Hamiltonian<f64>;
pub type Hamiltonian32 = Hamiltonian<f32>;
pub type RbmParams64 = RbmParams<f64>;
pub type RbmParams32 = RbmParams<f32>;
pub type RgOperator64 = RgOperator<f64>;
pub type RgOperator32 = RgOperator<f32>;
pub type RgFlow64 = RgFlow<f64>;
pub type RgFlow32 = RgFlow<f32>;
pub type DnnStack64 = DnnStack<f64>;
pub type DnnStack32 = DnnStack<f32>;
pub type BoltzmannMachine64 = BoltzmannMachine<f64>;
pub type TrainConfig64 = TrainConfig<f64>;
