//! Log-to-features glue shared by the CLI and the tests.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::features::FeatureTable;
use crate::ingest::{
    build_windows, completeness_filter, label_windows, IngestReport, WindowConfig,
};
use crate::model::{SensorKind, SensorRecord, TaskAnnotation};

/// Windows, labels, filters and extracts unnormalized features. The window
/// counters of `report` are filled in.
pub fn featurize(
    records: &[SensorRecord],
    annotations: &[TaskAnnotation],
    cfg: WindowConfig,
    required: &BTreeSet<SensorKind>,
    strict: bool,
    report: &mut IngestReport,
) -> Result<FeatureTable> {
    let windows = build_windows(records, cfg)?;
    report.windows_built = windows.len();
    let windows = label_windows(windows, annotations);
    report.windows_labeled = windows.iter().filter(|w| w.is_training_eligible()).count();
    let (kept, dropped) = completeness_filter(windows, required);
    report.windows_dropped_missing = dropped;
    FeatureTable::from_windows(&kept, strict)
}
