//! Dictionary-based ego-noise reduction for microphone arrays.
//!
//! Calibration turns a short noise-only recording into a dictionary: one
//! spatial covariance matrix (SCM) per 0.5 s segment, flattened into
//! supervectors, compressed with PCA, and stored together with precomputed
//! loaded inverses. At test time each segment's mixture SCM is projected with
//! the same PCA, the nearest dictionary entry is selected by squared
//! Euclidean distance, and trace-normalized MVDR weights with a one-hot
//! reference channel filter every frame before weighted overlap-add
//! resynthesis.
//!
//! All core math is generic over the sample scalar (`f32` or `f64`, see
//! [`Scalar`]); the `*F64` aliases below are the reference instantiation used
//! by the CLI and the persisted dictionary format.
//!
//! ```
//! use egonoise_core::{calibrate, enhance_stream, EnhancerConfig, AudioF64};
//!
//! let cfg = EnhancerConfig {
//!     sample_rate: 8000,
//!     frame_size: 256,
//!     hop: 64,
//!     segment_length: 0.125,
//!     pca_dims: 4,
//!     ..EnhancerConfig::default()
//! };
//! // Two channels of "ego-noise" with a weak tone mixed in at test time.
//! let noise: Vec<f64> = (0..8000).map(|i| ((i * 2654435761usize) as f64 / 4e9).sin()).collect();
//! let calib = AudioF64::new(vec![noise.clone(), noise.clone()], 8000).unwrap();
//! let dict = calibrate(&calib, &cfg).unwrap();
//! let mix: Vec<f64> = noise.iter().enumerate()
//!     .map(|(i, n)| n + 0.3 * (0.5 * i as f64).sin())
//!     .collect();
//! let input = AudioF64::new(vec![mix.clone(), mix], 8000).unwrap();
//! let (enhanced, reports) = enhance_stream(&input, &dict, &cfg).unwrap();
//! assert_eq!(enhanced.channel_count(), 1);
//! assert_eq!(reports.len(), 8);
//! ```

pub mod audio;
pub mod dictionary;
pub mod enhancer;
pub mod error;
pub mod evalkit;
pub mod pca;
mod scalar;
pub mod scm;
pub mod stft;

pub use audio::MultichannelAudio;
pub use dictionary::{calibrate, lookup, Fingerprint, NoiseDictionary};
pub use enhancer::{
    apply_weights_stream, compute_weights, enhance_stream, enhance_stream_detailed,
    select_reference, Enhancer, EnhancerConfig, MvdrWeights, ReferencePolicy, SegmentReport,
};
pub use error::{Error, Result};
pub use evalkit::{
    evaluate_run, parse_scene_spec, sdr, snr, synthesize_scene, ComparisonChannel, MetricReport,
    Scene, SceneSpec, TargetSource,
};
pub use pca::{project, train, PcaModel, ReducedVector};
pub use scalar::Scalar;
pub use scm::{estimate, flatten, invert_loaded, unflatten, Scm, Supervector};
pub use stft::{analyze, synthesize, Spectrogram, StreamState, Window};

/// Reference `f64` instantiations.
pub type AudioF64 = MultichannelAudio<f64>;
pub type SpectrogramF64 = Spectrogram<f64>;
pub type StreamStateF64 = StreamState<f64>;
pub type ScmF64 = Scm<f64>;
pub type SupervectorF64 = Supervector<f64>;
pub type PcaModelF64 = PcaModel<f64>;
pub type NoiseDictionaryF64 = NoiseDictionary<f64>;
pub type MvdrWeightsF64 = MvdrWeights<f64>;
pub type SceneF64 = Scene<f64>;

/// Single-precision instantiations.
pub type AudioF32 = MultichannelAudio<f32>;
pub type SpectrogramF32 = Spectrogram<f32>;
pub type StreamStateF32 = StreamState<f32>;
pub type ScmF32 = Scm<f32>;
pub type SupervectorF32 = Supervector<f32>;
pub type PcaModelF32 = PcaModel<f32>;
pub type NoiseDictionaryF32 = NoiseDictionary<f32>;
pub type MvdrWeightsF32 = MvdrWeights<f32>;
pub type SceneF32 = Scene<f32>;
