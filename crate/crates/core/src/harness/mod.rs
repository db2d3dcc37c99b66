//! Synthetic ground truth, tensor file I/O, and flat experiment configs.

pub mod coils;
pub mod kv;
pub mod phantom;
pub mod tensor;

pub use coils::{coil_center, make_synth_coils, make_synth_coils_with_width, DEFAULT_LOBE_WIDTH};
pub use kv::KvConfig;
pub use phantom::{gaussian_blur, make_phantom, PhantomKind, PhantomPhase, PhantomSpec};
pub use tensor::{load_tensor, save_tensor, DType, Tensor, TensorData};
