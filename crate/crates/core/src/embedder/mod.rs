//! Environment + attack x-vectors: TDNN classifier over 270 joint
//! classes, LDA reduction, verification and confusion analyses.

mod analysis;
mod lda;
mod tdnn;

pub use analysis::{
    confusion_analysis, cosine, verification_eer, Confusion, Grouping, QualityVsDistance, Verification, EMBEDDING_SCALE,
};
pub use lda::{LdaModel, WITHIN_RIDGE};
pub use tdnn::{
    extract_xvector, extract_xvectors, mfcc_sequence, train_xvector_extractor, TdnnConfig, XvectorTraining,
};
