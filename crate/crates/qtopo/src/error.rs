use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero quaternion has no inverse")]
    ZeroQuaternion,

    #[error("matrix lacks quaternion structure (max deviation {deviation:.3e})")]
    MalformedQuatMatrix { deviation: f64 },

    #[error("band gap closed: |h| = {min_h:.3e} at grid site ({i}, {j})")]
    GapClosed { i: usize, j: usize, min_h: f64 },

    #[error("zero field vector has no eigenstates")]
    ZeroField,

    #[error("degenerate spin triple: solid-angle denominator {denom:.3e}")]
    DegenerateTriple { denom: f64 },

    #[error("Chern sum ill-conditioned: rounding residual {residual:.3e} exceeds {limit}")]
    IllConditioned { residual: f64, limit: f64 },

    #[error("conical parameter must satisfy |eps| < 1, got {0}")]
    InvalidEpsilon(f64),

    #[error("noise regeneration exhausted after {0} attempts")]
    NoiseExhausted(u32),

    #[error("quaternion convolution vector residue {0:.3e} exceeds 1e-9")]
    VectorResidue(f64),

    #[error("layer {layer} ({kind}): {msg}")]
    LayerConfig {
        layer: usize,
        kind: &'static str,
        msg: String,
    },

    #[error("non-finite value produced by layer {layer} ({kind})")]
    NumericalFailure { layer: usize, kind: &'static str },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
