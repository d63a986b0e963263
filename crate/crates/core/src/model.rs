//! Domain types shared across the pipeline: occupation classes, time slots,
//! raw sensor records, task annotations and labeled windows.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Result, WorkrError};

/// Default time-slot length in seconds.
pub const DEFAULT_SLOT_SECONDS: i64 = 900;

/// The six occupation classes. The discriminant is the stable class index
/// used for model outputs and confusion matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Occupation {
    Professionals = 0,
    Managers = 1,
    IctProfessional = 2,
    Student = 3,
    Technicians = 4,
    ServiceSales = 5,
}

impl Occupation {
    pub const COUNT: usize = 6;

    pub const ALL: [Occupation; Occupation::COUNT] = [
        Occupation::Professionals,
        Occupation::Managers,
        Occupation::IctProfessional,
        Occupation::Student,
        Occupation::Technicians,
        Occupation::ServiceSales,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Occupation> {
        Self::ALL.get(index).copied()
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            Occupation::Professionals => "Professionals",
            Occupation::Managers => "Managers",
            Occupation::IctProfessional => "IctProfessional",
            Occupation::Student => "Student",
            Occupation::Technicians => "Technicians",
            Occupation::ServiceSales => "ServiceSales",
        }
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl FromStr for Occupation {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        parse_occupation(s)
    }
}

/// Case-insensitive lookup of a canonical occupation name.
pub fn parse_occupation(name: &str) -> Result<Occupation> {
    let trimmed = name.trim();
    Occupation::ALL
        .iter()
        .copied()
        .find(|c| c.canonical_name().eq_ignore_ascii_case(trimmed))
        .ok_or_else(|| WorkrError::UnknownOccupation(name.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeSlot {
    pub start: i64,
    pub length: i64,
}

impl TimeSlot {
    pub fn new(start: i64, length: i64) -> Result<TimeSlot> {
        if length <= 0 {
            return Err(WorkrError::InvalidConfig(format!(
                "time slot length must be positive, got {length}"
            )));
        }
        Ok(TimeSlot { start, length })
    }

    pub fn end(&self) -> i64 {
        self.start + self.length
    }

    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Imu,
    Steps,
    Location,
    App,
    Screen,
    Noise,
    Bluetooth,
    Wifi,
    Barometer,
}

impl SensorKind {
    pub const ALL: [SensorKind; 9] = [
        SensorKind::Imu,
        SensorKind::Steps,
        SensorKind::Location,
        SensorKind::App,
        SensorKind::Screen,
        SensorKind::Noise,
        SensorKind::Bluetooth,
        SensorKind::Wifi,
        SensorKind::Barometer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Imu => "imu",
            SensorKind::Steps => "steps",
            SensorKind::Location => "location",
            SensorKind::App => "app",
            SensorKind::Screen => "screen",
            SensorKind::Noise => "noise",
            SensorKind::Bluetooth => "bluetooth",
            SensorKind::Wifi => "wifi",
            SensorKind::Barometer => "barometer",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = WorkrError;

    fn from_str(s: &str) -> Result<Self> {
        SensorKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkrError::MissingField {
                field: format!("kind (unknown value `{s}`)"),
            })
    }
}

/// One inertial sample: accelerometer (m/s²), gyroscope (rad/s) and
/// magnetometer (µT), three axes each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
    pub mag: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Imu(ImuSample),
    Steps { count: u64 },
    Location { place_id: String },
    App { category: String, duration: f64 },
    Screen { on: bool, duration: f64 },
    Noise { db: f64 },
    Bluetooth { count: u64 },
    Wifi { count: u64 },
    Barometer { hpa: f64 },
}

impl Payload {
    pub fn kind(&self) -> SensorKind {
        match self {
            Payload::Imu(_) => SensorKind::Imu,
            Payload::Steps { .. } => SensorKind::Steps,
            Payload::Location { .. } => SensorKind::Location,
            Payload::App { .. } => SensorKind::App,
            Payload::Screen { .. } => SensorKind::Screen,
            Payload::Noise { .. } => SensorKind::Noise,
            Payload::Bluetooth { .. } => SensorKind::Bluetooth,
            Payload::Wifi { .. } => SensorKind::Wifi,
            Payload::Barometer { .. } => SensorKind::Barometer,
        }
    }
}

const IMU_FIELDS: [&str; 9] = ["ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"];

#[derive(Clone, Debug, PartialEq)]
pub struct SensorRecord {
    pub user: String,
    pub ts: i64,
    pub payload: Payload,
}

impl SensorRecord {
    pub fn kind(&self) -> SensorKind {
        self.payload.kind()
    }

    /// Builds a record from one decoded JSON object, then validates it.
    pub fn from_json(value: &Value) -> Result<SensorRecord> {
        let obj = value.as_object().ok_or_else(|| WorkrError::MissingField {
            field: "<object>".into(),
        })?;
        let user = get_str(obj, "user")?.to_string();
        let ts = get_i64(obj, "ts")?;
        let kind: SensorKind = get_str(obj, "kind")?.parse()?;
        let payload = match kind {
            SensorKind::Imu => {
                let mut v = [0.0; 9];
                for (slot, name) in v.iter_mut().zip(IMU_FIELDS) {
                    *slot = get_f64(obj, name)?;
                }
                Payload::Imu(ImuSample {
                    accel: [v[0], v[1], v[2]],
                    gyro: [v[3], v[4], v[5]],
                    mag: [v[6], v[7], v[8]],
                })
            }
            SensorKind::Steps => Payload::Steps {
                count: get_u64(obj, "count")?,
            },
            SensorKind::Location => Payload::Location {
                place_id: get_str(obj, "place_id")?.to_string(),
            },
            SensorKind::App => Payload::App {
                category: get_str(obj, "category")?.to_string(),
                duration: get_f64(obj, "duration")?,
            },
            SensorKind::Screen => Payload::Screen {
                on: obj
                    .get("on")
                    .and_then(Value::as_bool)
                    .ok_or_else(|| missing("on"))?,
                duration: get_f64(obj, "duration")?,
            },
            SensorKind::Noise => Payload::Noise {
                db: get_f64(obj, "db")?,
            },
            SensorKind::Bluetooth => Payload::Bluetooth {
                count: get_u64(obj, "count")?,
            },
            SensorKind::Wifi => Payload::Wifi {
                count: get_u64(obj, "count")?,
            },
            SensorKind::Barometer => Payload::Barometer {
                hpa: get_f64(obj, "hpa")?,
            },
        };
        let record = SensorRecord { user, ts, payload };
        validate_record(&record)?;
        Ok(record)
    }

    /// Encodes the record as a JSON object in the sensor-log schema.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("user".into(), json!(self.user));
        obj.insert("ts".into(), json!(self.ts));
        obj.insert("kind".into(), json!(self.kind().as_str()));
        match &self.payload {
            Payload::Imu(s) => {
                let all = s.accel.iter().chain(&s.gyro).chain(&s.mag);
                for (name, v) in IMU_FIELDS.iter().zip(all) {
                    obj.insert((*name).into(), json!(v));
                }
            }
            Payload::Steps { count } => {
                obj.insert("count".into(), json!(count));
            }
            Payload::Location { place_id } => {
                obj.insert("place_id".into(), json!(place_id));
            }
            Payload::App { category, duration } => {
                obj.insert("category".into(), json!(category));
                obj.insert("duration".into(), json!(duration));
            }
            Payload::Screen { on, duration } => {
                obj.insert("on".into(), json!(on));
                obj.insert("duration".into(), json!(duration));
            }
            Payload::Noise { db } => {
                obj.insert("db".into(), json!(db));
            }
            Payload::Bluetooth { count } => {
                obj.insert("count".into(), json!(count));
            }
            Payload::Wifi { count } => {
                obj.insert("count".into(), json!(count));
            }
            Payload::Barometer { hpa } => {
                obj.insert("hpa".into(), json!(hpa));
            }
        }
        Value::Object(obj)
    }

    pub fn to_json_line(&self) -> String {
        self.to_json().to_string()
    }
}

fn missing(field: &str) -> WorkrError {
    WorkrError::MissingField {
        field: field.to_string(),
    }
}

fn get_str<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str> {
    obj.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| missing(field))
}

fn get_i64(obj: &Map<String, Value>, field: &str) -> Result<i64> {
    obj.get(field)
        .and_then(Value::as_i64)
        .ok_or_else(|| missing(field))
}

fn get_u64(obj: &Map<String, Value>, field: &str) -> Result<u64> {
    obj.get(field)
        .and_then(Value::as_u64)
        .ok_or_else(|| missing(field))
}

fn get_f64(obj: &Map<String, Value>, field: &str) -> Result<f64> {
    obj.get(field)
        .and_then(Value::as_f64)
        .ok_or_else(|| missing(field))
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(WorkrError::NonFiniteValue { field })
    }
}

/// Checks the per-kind invariants of a record.
pub fn validate_record(r: &SensorRecord) -> Result<()> {
    if r.ts < 0 {
        return Err(WorkrError::NegativeTimestamp(r.ts));
    }
    match &r.payload {
        Payload::Imu(s) => {
            let all = s.accel.iter().chain(&s.gyro).chain(&s.mag);
            for (name, v) in IMU_FIELDS.iter().zip(all) {
                finite(name, *v)?;
            }
        }
        Payload::App { duration, .. } | Payload::Screen { duration, .. } => {
            finite("duration", *duration)?
        }
        Payload::Noise { db } => finite("db", *db)?,
        Payload::Barometer { hpa } => finite("hpa", *hpa)?,
        Payload::Steps { .. }
        | Payload::Location { .. }
        | Payload::Bluetooth { .. }
        | Payload::Wifi { .. } => {}
    }
    Ok(())
}

/// A task annotation: a half-open interval `[ts_start, ts_end)` with the
/// user's primary occupation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAnnotation {
    pub user: String,
    pub ts_start: i64,
    pub ts_end: i64,
    pub category: String,
    pub work_related: bool,
    pub occupation: Occupation,
}

impl TaskAnnotation {
    pub fn contains(&self, ts: i64) -> bool {
        self.ts_start <= ts && ts < self.ts_end
    }

    pub fn from_json(value: &Value) -> Result<TaskAnnotation> {
        let obj = value.as_object().ok_or_else(|| missing("<object>"))?;
        let ann = TaskAnnotation {
            user: get_str(obj, "user")?.to_string(),
            ts_start: get_i64(obj, "ts_start")?,
            ts_end: get_i64(obj, "ts_end")?,
            category: get_str(obj, "category")?.to_string(),
            work_related: obj
                .get("work_related")
                .and_then(Value::as_bool)
                .ok_or_else(|| missing("work_related"))?,
            occupation: parse_occupation(get_str(obj, "occupation")?)?,
        };
        if ann.ts_start < 0 {
            return Err(WorkrError::NegativeTimestamp(ann.ts_start));
        }
        if ann.ts_end <= ann.ts_start {
            return Err(WorkrError::InvalidConfig(format!(
                "annotation interval [{}, {}) is empty",
                ann.ts_start, ann.ts_end
            )));
        }
        Ok(ann)
    }

    pub fn to_json_line(&self) -> String {
        json!({
            "user": self.user,
            "ts_start": self.ts_start,
            "ts_end": self.ts_end,
            "category": self.category,
            "work_related": self.work_related,
            "occupation": self.occupation.canonical_name(),
        })
        .to_string()
    }
}

/// All readings of one user falling in one time slot, grouped by kind.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindow {
    pub user: String,
    pub slot: TimeSlot,
    pub records: BTreeMap<SensorKind, Vec<SensorRecord>>,
    pub label: Option<Occupation>,
    pub work_related: bool,
}

impl LabeledWindow {
    pub fn new(user: impl Into<String>, slot: TimeSlot) -> LabeledWindow {
        LabeledWindow {
            user: user.into(),
            slot,
            records: BTreeMap::new(),
            label: None,
            work_related: false,
        }
    }

    pub fn push(&mut self, record: SensorRecord) {
        self.records.entry(record.kind()).or_default().push(record);
    }

    pub fn of_kind(&self, kind: SensorKind) -> &[SensorRecord] {
        self.records.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_kind(&self, kind: SensorKind) -> bool {
        !self.of_kind(kind).is_empty()
    }

    pub fn record_count(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    /// Labeled and marked work-related: the only windows used for training
    /// and evaluation.
    pub fn is_training_eligible(&self) -> bool {
        self.label.is_some() && self.work_related
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_names_round_trip() {
        for (i, c) in Occupation::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(Occupation::from_index(i), Some(*c));
            assert_eq!(parse_occupation(c.canonical_name()).unwrap(), *c);
        }
        assert_eq!(Occupation::from_index(6), None);
    }

    #[test]
    fn parse_occupation_examples() {
        assert_eq!(parse_occupation("Student").unwrap().index(), 3);
        assert_eq!(parse_occupation("student").unwrap().index(), 3);
        assert!(matches!(
            parse_occupation("Astronaut"),
            Err(WorkrError::UnknownOccupation(_))
        ));
    }

    #[test]
    fn validate_imu_at_epoch_zero() {
        let r = SensorRecord {
            user: "u".into(),
            ts: 0,
            payload: Payload::Imu(ImuSample {
                accel: [0.0, 0.0, 9.81],
                gyro: [0.0; 3],
                mag: [0.0; 3],
            }),
        };
        assert!(validate_record(&r).is_ok());
    }

    #[test]
    fn validate_rejects_nan_noise() {
        let r = SensorRecord {
            user: "u".into(),
            ts: 5,
            payload: Payload::Noise { db: f64::NAN },
        };
        assert!(matches!(
            validate_record(&r),
            Err(WorkrError::NonFiniteValue { field: "db" })
        ));
    }

    #[test]
    fn validate_rejects_negative_ts() {
        let r = SensorRecord {
            user: "u".into(),
            ts: -1,
            payload: Payload::Wifi { count: 3 },
        };
        assert!(matches!(
            validate_record(&r),
            Err(WorkrError::NegativeTimestamp(-1))
        ));
    }

    #[test]
    fn steps_without_count_is_missing_field() {
        let v: Value = serde_json::from_str(r#"{"user":"u","ts":10,"kind":"steps"}"#).unwrap();
        match SensorRecord::from_json(&v) {
            Err(WorkrError::MissingField { field }) => assert_eq!(field, "count"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_every_kind() {
        let payloads = vec![
            Payload::Imu(ImuSample {
                accel: [0.1, -0.2, 9.7],
                gyro: [0.01, 0.0, -0.03],
                mag: [20.0, -5.5, 40.25],
            }),
            Payload::Steps { count: 17 },
            Payload::Location {
                place_id: "office".into(),
            },
            Payload::App {
                category: "Social".into(),
                duration: 12.5,
            },
            Payload::Screen {
                on: true,
                duration: 30.0,
            },
            Payload::Noise { db: 55.3 },
            Payload::Bluetooth { count: 4 },
            Payload::Wifi { count: 9 },
            Payload::Barometer { hpa: 1013.25 },
        ];
        for payload in payloads {
            let r = SensorRecord {
                user: "alice".into(),
                ts: 1234,
                payload,
            };
            let line = r.to_json_line();
            let back = SensorRecord::from_json(&serde_json::from_str(&line).unwrap()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn annotation_rejects_empty_interval() {
        let v: Value = serde_json::from_str(
            r#"{"user":"u","ts_start":10,"ts_end":10,"category":"x","work_related":true,"occupation":"Student"}"#,
        )
        .unwrap();
        assert!(TaskAnnotation::from_json(&v).is_err());
    }

    #[test]
    fn slot_is_half_open() {
        let s = TimeSlot::new(900, 900).unwrap();
        assert!(s.contains(900));
        assert!(s.contains(1799));
        assert!(!s.contains(1800));
        assert!(TimeSlot::new(0, 0).is_err());
    }
}
