//! Sensor-log and annotation parsing, window assembly and labeling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, WorkrError};
use crate::model::{
    LabeledWindow, SensorKind, SensorRecord, TaskAnnotation, TimeSlot, DEFAULT_SLOT_SECONDS,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: usize,
    pub records_rejected: usize,
    pub windows_built: usize,
    pub windows_labeled: usize,
    pub windows_dropped_missing: usize,
    /// `(line number, reason)` for every rejected line, 1-based.
    #[serde(skip)]
    pub rejections: Vec<(usize, String)>,
}

impl IngestReport {
    fn reject(&mut self, line: usize, reason: String) {
        self.records_rejected += 1;
        self.rejections.push((line, reason));
    }
}

fn parse_lines<R, T, F>(reader: R, strict: bool, mut decode: F) -> Result<(Vec<T>, IngestReport)>
where
    R: BufRead,
    F: FnMut(&Value) -> Result<T>,
{
    let mut out = Vec::new();
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        report.records_read += 1;
        let decoded = serde_json::from_str::<Value>(&line)
            .map_err(WorkrError::from)
            .and_then(|v| decode(&v));
        match decoded {
            Ok(item) => out.push(item),
            Err(e) if strict => {
                return Err(WorkrError::MalformedLine {
                    line: lineno,
                    reason: e.to_string(),
                })
            }
            Err(e) => report.reject(lineno, e.to_string()),
        }
    }
    Ok((out, report))
}

/// Parses a JSON Lines sensor log. Invalid lines are counted and skipped
/// unless `strict`, in which case the first one is an error.
pub fn parse_sensor_log<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<(Vec<SensorRecord>, IngestReport)> {
    parse_lines(reader, strict, SensorRecord::from_json)
}

/// Parses a JSON Lines annotation file and rejects overlapping intervals of
/// the same user (in either mode).
pub fn parse_annotations<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<(Vec<TaskAnnotation>, IngestReport)> {
    let (annotations, report) = parse_lines(reader, strict, TaskAnnotation::from_json)?;
    check_overlaps(&annotations)?;
    Ok((annotations, report))
}

fn group_annotations(annotations: &[TaskAnnotation]) -> BTreeMap<&str, Vec<&TaskAnnotation>> {
    let mut by_user: BTreeMap<&str, Vec<&TaskAnnotation>> = BTreeMap::new();
    for a in annotations {
        by_user.entry(a.user.as_str()).or_default().push(a);
    }
    for list in by_user.values_mut() {
        list.sort_by_key(|a| (a.ts_start, a.ts_end));
    }
    by_user
}

pub fn check_overlaps(annotations: &[TaskAnnotation]) -> Result<()> {
    for (user, list) in group_annotations(annotations) {
        for pair in list.windows(2) {
            if pair[1].ts_start < pair[0].ts_end {
                return Err(WorkrError::OverlappingAnnotation {
                    user: user.to_string(),
                    first_start: pair[0].ts_start,
                    first_end: pair[0].ts_end,
                    second_start: pair[1].ts_start,
                    second_end: pair[1].ts_end,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub slot_len: i64,
    pub stride: i64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            slot_len: DEFAULT_SLOT_SECONDS,
            stride: DEFAULT_SLOT_SECONDS,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_len <= 0 || self.stride <= 0 || self.stride > self.slot_len {
            return Err(WorkrError::InvalidWindowConfig {
                slot_len: self.slot_len,
                stride: self.stride,
            });
        }
        Ok(())
    }
}

/// Groups records into per-user windows of `slot_len` seconds starting every
/// `stride` seconds. Window starts are aligned to multiples of the stride;
/// empty windows are omitted. Output is ordered by `(user, slot.start)`.
pub fn build_windows(records: &[SensorRecord], cfg: WindowConfig) -> Result<Vec<LabeledWindow>> {
    cfg.validate()?;
    let mut by_user: BTreeMap<&str, Vec<&SensorRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(r.user.as_str()).or_default().push(r);
    }

    let mut out = Vec::new();
    for (user, mut recs) in by_user {
        recs.sort_by_key(|r| r.ts);
        let min_ts = recs[0].ts;
        let base = min_ts.div_euclid(cfg.stride) * cfg.stride;
        let mut windows: BTreeMap<i64, LabeledWindow> = BTreeMap::new();
        for r in recs {
            let offset = r.ts - base;
            // window k covers [base + k*stride, base + k*stride + slot_len)
            let last = offset.div_euclid(cfg.stride);
            let first = (offset - cfg.slot_len).div_euclid(cfg.stride) + 1;
            for k in first.max(0)..=last {
                let start = base + k * cfg.stride;
                windows
                    .entry(start)
                    .or_insert_with(|| {
                        LabeledWindow::new(
                            user,
                            TimeSlot {
                                start,
                                length: cfg.slot_len,
                            },
                        )
                    })
                    .push(r.clone());
            }
        }
        out.extend(windows.into_values());
    }
    Ok(out)
}

/// Attaches the label of the annotation (same user) whose half-open interval
/// contains each window's start.
pub fn label_windows(
    mut windows: Vec<LabeledWindow>,
    annotations: &[TaskAnnotation],
) -> Vec<LabeledWindow> {
    let by_user = group_annotations(annotations);
    for w in &mut windows {
        w.label = None;
        w.work_related = false;
        let Some(list) = by_user.get(w.user.as_str()) else {
            continue;
        };
        let start = w.slot.start;
        let idx = list.partition_point(|a| a.ts_start <= start);
        if idx == 0 {
            continue;
        }
        let ann = list[idx - 1];
        if ann.contains(start) {
            w.label = Some(ann.occupation);
            w.work_related = ann.work_related;
        }
    }
    windows
}

pub fn default_required_kinds() -> BTreeSet<SensorKind> {
    [
        SensorKind::Imu,
        SensorKind::App,
        SensorKind::Screen,
        SensorKind::Noise,
        SensorKind::Bluetooth,
        SensorKind::Wifi,
        SensorKind::Barometer,
        SensorKind::Steps,
    ]
    .into_iter()
    .collect()
}

/// Keeps windows holding at least one record of every required kind.
pub fn completeness_filter(
    windows: Vec<LabeledWindow>,
    required: &BTreeSet<SensorKind>,
) -> (Vec<LabeledWindow>, usize) {
    let before = windows.len();
    let kept: Vec<_> = windows
        .into_iter()
        .filter(|w| required.iter().all(|k| w.has_kind(*k)))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}
