//! Minimal reverse-mode differentiation engine and the layer zoo the agent
//! needs: convolution, dense linear, Tucker-factored tensor regression
//! layers, dueling heads, and the categorical distributional output.

mod checkpoint;
mod error;
mod heads;
mod layers;
mod network;
mod param;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest, ParamEntry, MANIFEST_FILE};
pub use error::{NetError, Result};
pub use heads::{dueling_combine, expected_q, support_points, LinearMap};
pub use layers::{conv_output_size, Conv2d, Dense, TrlLayer};
pub use network::{Layer, Network, ScatterFront, Tape};
pub use param::{LinearMapStats, MapKind, ParamId, Parameter};
pub use spec::{
    count_parameters, infer_shapes, scalar_rank_to_ranks, HeadKindSpec, HeadSpec, LayerCount,
    LayerSpec, MapSpec, NetworkSpec, ParamCountReport,
};
