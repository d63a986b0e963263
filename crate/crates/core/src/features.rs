//! Windowed feature extraction in four groups (physical, app usage,
//! social/environmental, temporal), min-max normalization fitted on training
//! rows only, and the feature-matrix CSV format.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WorkrError};
use crate::model::{
    parse_occupation, LabeledWindow, Occupation, Payload, SensorKind, TimeSlot,
    DEFAULT_SLOT_SECONDS,
};

pub const PHYSICAL_LEN: usize = 23;
pub const APP_LEN: usize = 12;
pub const SOCIAL_LEN: usize = 12;
pub const TEMPORAL_LEN: usize = 31;
pub const FULL_LEN: usize = PHYSICAL_LEN + APP_LEN + SOCIAL_LEN + TEMPORAL_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Physical,
    App,
    Social,
    Temporal,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Physical,
        FeatureGroup::App,
        FeatureGroup::Social,
        FeatureGroup::Temporal,
    ];

    pub fn letter(self) -> char {
        match self {
            FeatureGroup::Physical => 'P',
            FeatureGroup::App => 'A',
            FeatureGroup::Social => 'S',
            FeatureGroup::Temporal => 'T',
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureGroup::Physical => "p_",
            FeatureGroup::App => "a_",
            FeatureGroup::Social => "s_",
            FeatureGroup::Temporal => "t_",
        }
    }

    pub fn of_column(name: &str) -> Option<FeatureGroup> {
        Self::ALL.into_iter().find(|g| name.starts_with(g.prefix()))
    }
}

/// Which feature groups feed a model. Written as a subset of the letters
/// `PAST`, e.g. `"PAS"`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupMask {
    pub include_p: bool,
    pub include_a: bool,
    pub include_s: bool,
    pub include_t: bool,
}

impl GroupMask {
    pub const ALL: GroupMask = GroupMask {
        include_p: true,
        include_a: true,
        include_s: true,
        include_t: true,
    };

    pub fn includes(&self, g: FeatureGroup) -> bool {
        match g {
            FeatureGroup::Physical => self.include_p,
            FeatureGroup::App => self.include_a,
            FeatureGroup::Social => self.include_s,
            FeatureGroup::Temporal => self.include_t,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.include_p || self.include_a || self.include_s || self.include_t)
    }

    /// Compact form, e.g. `PAS`.
    pub fn letters(&self) -> String {
        FeatureGroup::ALL
            .into_iter()
            .filter(|g| self.includes(*g))
            .map(FeatureGroup::letter)
            .collect()
    }

    /// Table form, e.g. `P+ A+ S`.
    pub fn table_label(&self) -> String {
        let parts: Vec<String> = FeatureGroup::ALL
            .into_iter()
            .filter(|g| self.includes(*g))
            .map(|g| g.letter().to_string())
            .collect();
        parts.join("+ ")
    }
}

impl fmt::Display for GroupMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.letters())
    }
}

impl FromStr for GroupMask {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        let mut mask = GroupMask::default();
        for ch in s.trim().chars() {
            let flag = match ch.to_ascii_uppercase() {
                'P' => &mut mask.include_p,
                'A' => &mut mask.include_a,
                'S' => &mut mask.include_s,
                'T' => &mut mask.include_t,
                '+' | ' ' => continue,
                _ => return Err(WorkrError::InvalidMask(s.to_string())),
            };
            if *flag {
                return Err(WorkrError::InvalidMask(s.to_string()));
            }
            *flag = true;
        }
        if mask.is_empty() {
            return Err(WorkrError::InvalidMask(s.to_string()));
        }
        Ok(mask)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AppCategory {
    Communication,
    Social,
    Reference,
    PhotoVideo,
    Shopping,
    Education,
    Finance,
    Management,
    Music,
    Games,
    Other,
}

impl AppCategory {
    pub const ALL: [AppCategory; 11] = [
        AppCategory::Communication,
        AppCategory::Social,
        AppCategory::Reference,
        AppCategory::PhotoVideo,
        AppCategory::Shopping,
        AppCategory::Education,
        AppCategory::Finance,
        AppCategory::Management,
        AppCategory::Music,
        AppCategory::Games,
        AppCategory::Other,
    ];

    /// Name used in sensor logs.
    pub fn name(self) -> &'static str {
        match self {
            AppCategory::Communication => "Communication",
            AppCategory::Social => "Social",
            AppCategory::Reference => "Reference",
            AppCategory::PhotoVideo => "Photo&Video",
            AppCategory::Shopping => "Shopping",
            AppCategory::Education => "Education",
            AppCategory::Finance => "Finance",
            AppCategory::Management => "Management",
            AppCategory::Music => "Music",
            AppCategory::Games => "Games",
            AppCategory::Other => "Other",
        }
    }

    fn column_stem(self) -> &'static str {
        match self {
            AppCategory::Communication => "communication",
            AppCategory::Social => "social",
            AppCategory::Reference => "reference",
            AppCategory::PhotoVideo => "photo_video",
            AppCategory::Shopping => "shopping",
            AppCategory::Education => "education",
            AppCategory::Finance => "finance",
            AppCategory::Management => "management",
            AppCategory::Music => "music",
            AppCategory::Games => "games",
            AppCategory::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<AppCategory> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

const STAT_NAMES: [&str; 7] = ["mean", "median", "std", "max", "min", "iqr", "rms"];
const WEEKDAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

fn group_columns(group: FeatureGroup) -> Vec<String> {
    match group {
        FeatureGroup::Physical => {
            let mut cols = Vec::with_capacity(PHYSICAL_LEN);
            for stream in ["accel", "gyro", "mag"] {
                for stat in STAT_NAMES {
                    cols.push(format!("p_{stream}_{stat}"));
                }
            }
            cols.push("p_steps_total".into());
            cols.push("p_places_distinct".into());
            cols
        }
        FeatureGroup::App => AppCategory::ALL
            .iter()
            .map(|c| format!("a_app_{}", c.column_stem()))
            .chain(std::iter::once("a_screen_on".to_string()))
            .collect(),
        FeatureGroup::Social => {
            let mut cols: Vec<String> = ["s_noise_mean", "s_noise_max", "s_noise_min"]
                .into_iter()
                .map(String::from)
                .collect();
            cols.push("s_bluetooth_mean".into());
            cols.push("s_wifi_mean".into());
            for stat in STAT_NAMES {
                cols.push(format!("s_baro_{stat}"));
            }
            cols
        }
        FeatureGroup::Temporal => WEEKDAYS
            .iter()
            .map(|d| format!("t_wd_{d}"))
            .chain((0..24).map(|h| format!("t_hour_{h:02}")))
            .collect(),
    }
}

/// Ordered column names of a feature matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub columns: Vec<String>,
}

impl Layout {
    pub fn new(columns: Vec<String>) -> Layout {
        Layout { columns }
    }

    /// All four groups in `P, A, S, T` order (78 columns).
    pub fn full() -> Layout {
        Layout::for_mask(GroupMask::ALL)
    }

    pub fn for_mask(mask: GroupMask) -> Layout {
        let columns = FeatureGroup::ALL
            .into_iter()
            .filter(|g| mask.includes(*g))
            .flat_map(group_columns)
            .collect();
        Layout { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Indices of the columns belonging to groups enabled in `mask`.
    pub fn mask_indices(&self, mask: GroupMask) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| FeatureGroup::of_column(c).is_some_and(|g| mask.includes(g)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Layout {
        Layout {
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }

    /// Appends `n` latent columns named `l_<tag>_<j>`.
    pub fn with_latent(&self, tag: &str, n: usize) -> Layout {
        let mut columns = self.columns.clone();
        columns.extend((0..n).map(|j| format!("l_{tag}_{j:02}")));
        Layout { columns }
    }

    /// Short stable digest of the column names.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.columns {
            hasher.update(c.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Seven summary statistics of a series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats7 {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub iqr: f64,
    pub rms: f64,
}

impl Stats7 {
    /// Values in column order: mean, median, std, max, min, iqr, rms.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.mean,
            self.median,
            self.std,
            self.max,
            self.min,
            self.iqr,
            self.rms,
        ]
    }
}

/// Quantile of sorted data, linearly interpolated at rank `q * (n - 1)`.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Mean, median, population standard deviation, max, min, interquartile
/// range and root mean square.
pub fn stats7(series: &[f64]) -> Result<Stats7> {
    if series.is_empty() {
        return Err(WorkrError::EmptySeries);
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(WorkrError::NonFiniteValue { field: "series" });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rms = (series.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = sorted_quantile(&sorted, 0.25);
    let q3 = sorted_quantile(&sorted, 0.75);
    Ok(Stats7 {
        mean,
        median: sorted_quantile(&sorted, 0.5),
        std: var.sqrt(),
        max: sorted[sorted.len() - 1],
        min: sorted[0],
        iqr: (q3 - q1).max(0.0),
        rms,
    })
}

/// `stats7` of a possibly empty series; empty gives all zeros.
fn stats7_or_zero(series: &[f64]) -> [f64; 7] {
    stats7(series).map(|s| s.to_array()).unwrap_or([0.0; 7])
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn mean_or_zero(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Magnitude statistics of accelerometer, gyroscope and magnetometer,
/// total steps and number of distinct places.
pub fn physical_features(w: &LabeledWindow) -> [f64; PHYSICAL_LEN] {
    let mut accel = Vec::new();
    let mut gyro = Vec::new();
    let mut mag = Vec::new();
    for r in w.of_kind(SensorKind::Imu) {
        if let Payload::Imu(s) = &r.payload {
            accel.push(norm3(&s.accel));
            gyro.push(norm3(&s.gyro));
            mag.push(norm3(&s.mag));
        }
    }
    let steps: u64 = w
        .of_kind(SensorKind::Steps)
        .iter()
        .filter_map(|r| match r.payload {
            Payload::Steps { count } => Some(count),
            _ => None,
        })
        .sum();
    let places: BTreeSet<&str> = w
        .of_kind(SensorKind::Location)
        .iter()
        .filter_map(|r| match &r.payload {
            Payload::Location { place_id } => Some(place_id.as_str()),
            _ => None,
        })
        .collect();

    let mut out = [0.0; PHYSICAL_LEN];
    out[0..7].copy_from_slice(&stats7_or_zero(&accel));
    out[7..14].copy_from_slice(&stats7_or_zero(&gyro));
    out[14..21].copy_from_slice(&stats7_or_zero(&mag));
    out[21] = steps as f64;
    out[22] = places.len() as f64;
    out
}

/// Share of the slot spent in each app category, plus the screen-on share.
/// Unknown categories count as `Other` unless `strict`.
pub fn app_features(w: &LabeledWindow, strict: bool) -> Result<[f64; APP_LEN]> {
    let slot = w.slot.length as f64;
    let mut out = [0.0; APP_LEN];
    for r in w.of_kind(SensorKind::App) {
        if let Payload::App { category, duration } = &r.payload {
            let cat = match AppCategory::from_name(category) {
                Some(c) => c,
                None if strict => return Err(WorkrError::UnknownAppCategory(category.clone())),
                None => AppCategory::Other,
            };
            out[cat as usize] += duration;
        }
    }
    for r in w.of_kind(SensorKind::Screen) {
        if let Payload::Screen { on: true, duration } = r.payload {
            out[APP_LEN - 1] += duration;
        }
    }
    for v in &mut out {
        *v = (*v / slot).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Noise mean/max/min, mean Bluetooth and WiFi counts, barometer statistics.
pub fn social_env_features(w: &LabeledWindow) -> [f64; SOCIAL_LEN] {
    let collect = |kind: SensorKind| -> Vec<f64> {
        w.of_kind(kind)
            .iter()
            .filter_map(|r| match r.payload {
                Payload::Noise { db } => Some(db),
                Payload::Bluetooth { count } | Payload::Wifi { count } => Some(count as f64),
                Payload::Barometer { hpa } => Some(hpa),
                _ => None,
            })
            .collect()
    };
    let noise = collect(SensorKind::Noise);
    let mut out = [0.0; SOCIAL_LEN];
    if !noise.is_empty() {
        out[0] = mean_or_zero(&noise);
        out[1] = noise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out[2] = noise.iter().copied().fold(f64::INFINITY, f64::min);
    }
    out[3] = mean_or_zero(&collect(SensorKind::Bluetooth));
    out[4] = mean_or_zero(&collect(SensorKind::Wifi));
    out[5..12].copy_from_slice(&stats7_or_zero(&collect(SensorKind::Barometer)));
    out
}

/// Monday = 0, from the UTC calendar.
pub fn weekday_index(ts: i64) -> usize {
    // 1970-01-01 was a Thursday
    (ts.div_euclid(86_400) + 3).rem_euclid(7) as usize
}

pub fn hour_of_day(ts: i64) -> usize {
    (ts.rem_euclid(86_400) / 3_600) as usize
}

/// One-hot weekday (7) followed by one-hot hour of day (24).
pub fn temporal_features(slot: TimeSlot) -> [f64; TEMPORAL_LEN] {
    let mut out = [0.0; TEMPORAL_LEN];
    out[weekday_index(slot.start)] = 1.0;
    out[7 + hour_of_day(slot.start)] = 1.0;
    out
}

/// One row of the feature matrix. Column names live in the owning
/// [`FeatureTable`]'s layout.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub user: String,
    pub slot: TimeSlot,
    pub label: Option<Occupation>,
    pub values: Vec<f64>,
}

/// Unnormalized 78-column features of one window. The row is labeled only
/// when the window is training-eligible (labeled and work-related).
pub fn extract(w: &LabeledWindow, strict: bool) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FULL_LEN);
    values.extend_from_slice(&physical_features(w));
    values.extend_from_slice(&app_features(w, strict)?);
    values.extend_from_slice(&social_env_features(w));
    values.extend_from_slice(&temporal_features(w.slot));
    Ok(FeatureVector {
        user: w.user.clone(),
        slot: w.slot,
        label: if w.is_training_eligible() {
            w.label
        } else {
            None
        },
        values,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub layout: Layout,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn from_windows(windows: &[LabeledWindow], strict: bool) -> Result<FeatureTable> {
        let rows = windows
            .iter()
            .map(|w| extract(w, strict))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            layout: Layout::full(),
            rows,
        })
    }

    pub fn labeled(&self) -> Vec<FeatureVector> {
        self.rows
            .iter()
            .filter(|r| r.label.is_some())
            .cloned()
            .collect()
    }

    /// Writes `user,slot_start,label,<columns…>` with values at 9
    /// significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["user".to_string(), "slot_start".into(), "label".into()];
        header.extend(self.layout.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(row.user.clone());
            rec.push(row.slot.start.to_string());
            rec.push(
                row.label
                    .map(|l| l.canonical_name().to_string())
                    .unwrap_or_default(),
            );
            rec.extend(row.values.iter().map(|v| format_sig9(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, slot_len: i64) -> Result<FeatureTable> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let names: Vec<&str> = header.iter().collect();
        if names.len() < 3 || names[..3] != ["user", "slot_start", "label"] {
            return Err(WorkrError::LayoutMismatch(
                "feature CSV must start with user,slot_start,label".into(),
            ));
        }
        let layout = Layout::new(names[3..].iter().map(|s| s.to_string()).collect());
        if let Some(bad) = layout
            .columns
            .iter()
            .find(|c| FeatureGroup::of_column(c).is_none())
        {
            return Err(WorkrError::LayoutMismatch(format!(
                "unknown column group: {bad}"
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |reason: String| WorkrError::MalformedLine { line, reason };
            let start: i64 = rec[1]
                .parse()
                .map_err(|e| bad(format!("slot_start: {e}")))?;
            let label = match &rec[2] {
                "" => None,
                s => Some(parse_occupation(s)?),
            };
            let values = rec
                .iter()
                .skip(3)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| bad(format!("value `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureVector {
                user: rec[0].to_string(),
                slot: TimeSlot::new(start, slot_len)?,
                label,
                values,
            });
        }
        Ok(FeatureTable { layout, rows })
    }
}

impl Default for FeatureTable {
    fn default() -> Self {
        FeatureTable {
            layout: Layout::full(),
            rows: Vec::new(),
        }
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnScale {
    MinMax { min: f64, max: f64 },
    PassThrough,
}

impl ColumnScale {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, ColumnScale::MinMax { min, max } if min == max)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ColumnScale::PassThrough => x,
            ColumnScale::MinMax { min, max } if max > min => {
                ((x - min) / (max - min)).clamp(0.0, 1.0)
            }
            ColumnScale::MinMax { .. } => 0.0,
        }
    }
}

/// Per-column min-max scaling learned from training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub layout: Layout,
    pub columns: Vec<ColumnScale>,
}

/// Learns per-column `(min, max)` over `train` only. Temporal one-hot columns
/// pass through unchanged.
pub fn fit_normalizer(layout: &Layout, train: &[FeatureVector]) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(WorkrError::EmptyTrainingSet);
    }
    let mut columns = Vec::with_capacity(layout.len());
    for (j, name) in layout.columns.iter().enumerate() {
        if FeatureGroup::of_column(name) == Some(FeatureGroup::Temporal) {
            columns.push(ColumnScale::PassThrough);
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in train {
            let v = *row.values.get(j).ok_or(WorkrError::DimensionMismatch {
                expected: layout.len(),
                got: row.values.len(),
            })?;
            min = min.min(v);
            max = max.max(v);
        }
        columns.push(ColumnScale::MinMax { min, max });
    }
    Ok(Normalizer {
        layout: layout.clone(),
        columns,
    })
}

impl Normalizer {
    pub fn degenerate_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .zip(&self.layout.columns)
            .filter(|(c, _)| c.is_degenerate())
            .map(|(_, n)| n.as_str())
            .collect()
    }

    pub fn apply_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.columns.len() {
            return Err(WorkrError::DimensionMismatch {
                expected: self.columns.len(),
                got: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(&self.columns)
            .map(|(v, c)| c.apply(*v))
            .collect())
    }

    pub fn apply(&self, row: &FeatureVector) -> Result<FeatureVector> {
        Ok(FeatureVector {
            values: self.apply_values(&row.values)?,
            ..row.clone()
        })
    }
}

/// Normalizes a raw row and keeps the columns of the enabled groups, in
/// `P, A, S, T` order. Returns the reduced layout alongside the row.
pub fn assemble_row(
    raw: &FeatureVector,
    mask: GroupMask,
    normalizer: &Normalizer,
) -> Result<(Layout, FeatureVector)> {
    let normalized = normalizer.apply(raw)?;
    let idx = normalizer.layout.mask_indices(mask);
    let layout = normalizer.layout.select(&idx);
    let values = idx.iter().map(|&i| normalized.values[i]).collect();
    Ok((
        layout,
        FeatureVector {
            values,
            ..normalized
        },
    ))
}

/// Extracts, normalizes and masks the features of one window.
pub fn assemble(
    w: &LabeledWindow,
    mask: GroupMask,
    normalizer: &Normalizer,
) -> Result<(Layout, FeatureVector)> {
    if normalizer.layout != Layout::full() {
        return Err(WorkrError::LayoutMismatch(
            "normalizer was not fitted on the full feature layout".into(),
        ));
    }
    assemble_row(&extract(w, false)?, mask, normalizer)
}

/// Slot length assumed when reading a feature CSV.
pub const CSV_SLOT_SECONDS: i64 = DEFAULT_SLOT_SECONDS;
