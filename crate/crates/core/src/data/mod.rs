//! Dataset construction: records, balancing, splits, scaling, ROI instance
//! selection, cropping, batching and synthetic subjects.

pub mod batch;
pub mod instance;
pub mod preprocess;
pub mod records;
pub mod synth;
pub mod volume;

pub use batch::{batch_order, build_batches, MixedBatch};
pub use instance::{
    clamp_window, crop_roi, modal_centroid, mode_of_centroids, select_instance, slice_centroids,
    slice_window_select, InstanceRecord, DEFAULT_CROP, DEFAULT_SLICE_COUNT,
};
pub use preprocess::{
    minmax_scale, one_hot, one_hot_gender, MinMax, MixedSample, Preprocessor, RawSample,
    TABULAR_DIM,
};
pub use records::{
    apportion, balance_indices, cdr_to_label, select_latest_visit, split_subjects,
    stratified_split, undersample_balance, Cdr, Class, Gender, SplitIndices, SplitRatios,
    SubjectRecord, VisitDate,
};
pub use synth::{synth_generate, synth_subject, SynthConfig, SynthSubject};
pub use volume::{Hemisphere, RoiMask, Volume};
