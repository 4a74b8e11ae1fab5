//! Training, mixed fine-tuning, evaluation metrics and error export.

mod errors;
mod metrics;
mod train;

pub use errors::{collect_errors, export_errors, ErrorCategory, ErrorManifest, ErrorRecord, EXPORT_CROP_SIZE};
pub use metrics::{precision_recall, predicted_labels, roc_auc, EvalReport, PrecisionRecall, DECISION_THRESHOLD};
pub use train::{
    evaluate, finetune_mixed, score, train, BatchAudit, Dataset, HistoryEntry, TrainConfig, TrainHistory,
};
