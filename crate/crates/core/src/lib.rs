//! Parametric kernel-matrix approximation by Chebyshev interpolation with a tensor-train
//! compressed coefficient tensor.

pub mod baselines;
pub mod bessel;
pub mod chebyshev;
pub mod cross;
pub mod error;
pub mod global;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod products;
pub mod parametric;
pub mod points;
pub mod tensor;
pub mod tt;

pub use baselines::{aca, truncated_svd, AcaResult, LowRankPair};
pub use chebyshev::{ChebyshevGrid, Interval};
pub use cross::{CrossOptions, CrossResult, NestedIndexSets};
pub use error::{ContainerError, Error, Result};
pub use global::{global_offline, global_online, GlobalFactorization, GlobalInstance};
pub use kernels::{EntryOracle, Kernel, KernelFamily, KernelOracle, KernelSpec, ProblemGeometry};
pub use metrics::{relative_error, subsampled_relative_error, Norm};
pub use parametric::{offline, online, ttk, OfflineOptions, ParametricFactorization};
pub use points::generate_points;
pub use tensor::{DenseTensor, RealMatrix};
pub use tt::TtTensor;
