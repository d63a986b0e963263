//! Deterministic profile-driven generator of multi-occupation sensor logs
//! and task annotations.
//!
//! Every random draw comes from a generator keyed by `(seed, user, time,
//! stream)`, so a value does not depend on what else was generated before it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Result, WorkrError};
use crate::features::AppCategory;
use crate::model::{ImuSample, Occupation, Payload, SensorRecord, TaskAnnotation};

/// Two-mode lognormal model of steps per hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMixture {
    pub high_weight: f64,
    pub high_median: f64,
    pub high_sigma: f64,
    pub low_median: f64,
    pub low_sigma: f64,
}

impl StepMixture {
    /// `P(steps > threshold)` in closed form.
    pub fn share_above(&self, threshold: f64) -> f64 {
        let tail = |median: f64, sigma: f64| {
            let z = (threshold.ln() - median.ln()) / sigma;
            0.5 * erfc(z / std::f64::consts::SQRT_2)
        };
        self.high_weight * tail(self.high_median, self.high_sigma)
            + (1.0 - self.high_weight) * tail(self.low_median, self.low_sigma)
    }

    /// Returns `(steps, high_mode)`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, bool) {
        let high = rng.random::<f64>() < self.high_weight;
        let (median, sigma) = if high {
            (self.high_median, self.high_sigma)
        } else {
            (self.low_median, self.low_sigma)
        };
        let d = LogNormal::new(median.ln(), sigma).expect("validated sigma");
        (d.sample(rng), high)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub mean: f64,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub label: Occupation,
    pub steps_per_hour: StepMixture,
    /// Weight per app category name; sums to 1.
    pub app_mix: BTreeMap<String, f64>,
    /// Mean number of app sessions per slot.
    pub app_sessions: f64,
    /// Mean fraction of a slot with the screen on.
    pub screen_share: f64,
    pub noise_db: NoiseLevel,
    pub bluetooth_rate: f64,
    pub wifi_rate: f64,
    /// Active hours for Monday through Sunday.
    pub work_hours: Vec<Vec<u32>>,
    pub barometer_base: f64,
    pub imu_activity: f64,
}

impl OccupationProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(WorkrError::InvalidConfig(format!(
                "{} profile: {msg}",
                self.label
            )))
        };
        let s = &self.steps_per_hour;
        if !(0.0..=1.0).contains(&s.high_weight)
            || [s.high_median, s.high_sigma, s.low_median, s.low_sigma]
                .iter()
                .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad(format!("invalid step mixture {s:?}"));
        }
        for name in self.app_mix.keys() {
            if AppCategory::from_name(name).is_none() {
                return bad(format!("unknown app category `{name}`"));
            }
        }
        let total: f64 = self.app_mix.values().sum();
        if self.app_mix.values().any(|w| !(w.is_finite() && *w >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return bad(format!(
                "app_mix must be non-negative and sum to 1, sums to {total}"
            ));
        }
        let rates = [
            self.app_sessions,
            self.screen_share,
            self.noise_db.spread,
            self.bluetooth_rate,
            self.wifi_rate,
            self.imu_activity,
        ];
        if rates.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.screen_share > 1.0 {
            return bad("rates must be finite and non-negative".into());
        }
        if !(self.noise_db.mean.is_finite()
            && self.barometer_base.is_finite()
            && self.barometer_base > 0.0)
        {
            return bad("noise mean and barometer base must be finite".into());
        }
        if self.work_hours.len() != 7 {
            return bad(format!(
                "work_hours needs 7 weekdays, got {}",
                self.work_hours.len()
            ));
        }
        if self.work_hours.iter().all(Vec::is_empty) {
            return bad("work_hours is empty".into());
        }
        if self.work_hours.iter().flatten().any(|h| *h >= 24) {
            return bad("work hours must be in 0..24".into());
        }
        Ok(())
    }

    fn app_weights(&self) -> Vec<f64> {
        AppCategory::ALL
            .iter()
            .map(|c| self.app_mix.get(c.name()).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Reads a JSON array of profiles.
pub fn load_profiles<R: Read>(reader: R) -> Result<Vec<OccupationProfile>> {
    let profiles: Vec<OccupationProfile> = serde_json::from_reader(reader)?;
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}

/// App-usage shares for the ten named categories in `AppCategory::ALL`
/// order; whatever remains goes to `Other`. Rows summing above one are
/// scaled down proportionally.
fn app_mix(shares: [f64; 10]) -> BTreeMap<String, f64> {
    let total: f64 = shares.iter().sum();
    let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
    let mut mix: BTreeMap<String, f64> = AppCategory::ALL[..10]
        .iter()
        .zip(shares)
        .map(|(c, s)| (c.name().to_string(), s * scale))
        .collect();
    let rest = 1.0 - mix.values().sum::<f64>();
    mix.insert(AppCategory::Other.name().into(), rest.max(0.0));
    mix
}

fn hours(days: &[usize], from: u32, to: u32) -> Vec<Vec<u32>> {
    (0..7)
        .map(|d| {
            if days.contains(&d) {
                (from..to).collect()
            } else {
                Vec::new()
            }
        })
        .collect()
}

const WEEKDAYS: [usize; 5] = [0, 1, 2, 3, 4];

/// The six built-in profiles, in class-index order.
pub fn default_profiles() -> Vec<OccupationProfile> {
    let steps = |high_weight: f64, low_median: f64| StepMixture {
        high_weight,
        high_median: 900.0,
        high_sigma: 0.3,
        low_median,
        low_sigma: 0.6,
    };
    vec![
        OccupationProfile {
            label: Occupation::Professionals,
            steps_per_hour: steps(0.12, 110.0),
            app_mix: app_mix([0.19, 0.13, 0.15, 0.15, 0.16, 0.08, 0.05, 0.05, 0.02, 0.02]),
            app_sessions: 4.0,
            screen_share: 0.30,
            noise_db: NoiseLevel {
                mean: 48.0,
                spread: 6.0,
            },
            bluetooth_rate: 6.0,
            wifi_rate: 14.0,
            work_hours: hours(&WEEKDAYS, 9, 17),
            barometer_base: 1012.0,
            imu_activity: 1.0,
        },
        OccupationProfile {
            label: Occupation::Managers,
            steps_per_hour: steps(0.15, 130.0),
            app_mix: app_mix([0.19, 0.20, 0.14, 0.13, 0.08, 0.08, 0.06, 0.06, 0.04, 0.04]),
            app_sessions: 5.0,
            screen_share: 0.35,
            noise_db: NoiseLevel {
                mean: 52.0,
                spread: 6.0,
            },
            bluetooth_rate: 11.0,
            wifi_rate: 16.0,
            work_hours: hours(&WEEKDAYS, 8, 17),
            barometer_base: 1012.6,
            imu_activity: 1.05,
        },
        OccupationProfile {
            label: Occupation::IctProfessional,
            steps_per_hour: steps(0.10, 90.0),
            app_mix: app_mix([0.23, 0.13, 0.17, 0.13, 0.06, 0.08, 0.05, 0.02, 0.05, 0.07]),
            app_sessions: 4.5,
            screen_share: 0.40,
            noise_db: NoiseLevel {
                mean: 46.0,
                spread: 5.0,
            },
            bluetooth_rate: 7.0,
            wifi_rate: 18.0,
            work_hours: hours(&WEEKDAYS, 9, 18),
            barometer_base: 1011.4,
            imu_activity: 0.9,
        },
        OccupationProfile {
            label: Occupation::Student,
            steps_per_hour: steps(0.18, 150.0),
            app_mix: app_mix([0.15, 0.14, 0.17, 0.16, 0.10, 0.08, 0.03, 0.03, 0.08, 0.06]),
            app_sessions: 5.5,
            screen_share: 0.38,
            noise_db: NoiseLevel {
                mean: 50.0,
                spread: 7.0,
            },
            bluetooth_rate: 9.0,
            wifi_rate: 20.0,
            work_hours: hours(&WEEKDAYS, 10, 17),
            barometer_base: 1013.1,
            imu_activity: 1.1,
        },
        OccupationProfile {
            label: Occupation::Technicians,
            steps_per_hour: steps(0.44, 120.0),
            app_mix: app_mix([0.13, 0.17, 0.15, 0.16, 0.10, 0.07, 0.08, 0.06, 0.06, 0.03]),
            app_sessions: 3.0,
            screen_share: 0.20,
            noise_db: NoiseLevel {
                mean: 62.0,
                spread: 8.0,
            },
            bluetooth_rate: 5.0,
            wifi_rate: 8.0,
            work_hours: hours(&WEEKDAYS, 8, 16),
            barometer_base: 1010.7,
            imu_activity: 1.4,
        },
        OccupationProfile {
            label: Occupation::ServiceSales,
            steps_per_hour: steps(0.14, 180.0),
            app_mix: app_mix([0.23, 0.17, 0.11, 0.17, 0.07, 0.06, 0.03, 0.06, 0.03, 0.06]),
            app_sessions: 3.5,
            screen_share: 0.25,
            noise_db: NoiseLevel {
                mean: 58.0,
                spread: 7.0,
            },
            bluetooth_rate: 8.0,
            wifi_rate: 10.0,
            work_hours: hours(&[1, 2, 3, 4, 5], 10, 18),
            barometer_base: 1013.6,
            imu_activity: 1.2,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users_per_class: usize,
    pub days: usize,
    pub seed: u64,
    pub slot_seconds: i64,
    /// First day, UTC midnight.
    pub start_ts: i64,
    /// Probability that a slot carries one wild barometer reading.
    pub glitch_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users_per_class: 5,
            days: 14,
            seed: 1,
            slot_seconds: 900,
            // Monday 2024-01-01
            start_ts: 1_704_067_200,
            glitch_rate: 0.02,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(WorkrError::InvalidConfig(msg.into()));
        if self.n_users_per_class == 0 {
            return bad("n_users_per_class must be positive");
        }
        if self.slot_seconds <= 0 || 3600 % self.slot_seconds != 0 {
            return bad("slot_seconds must be a positive divisor of 3600");
        }
        if self.start_ts < 0 || self.start_ts % 86_400 != 0 {
            return bad("start_ts must be a non-negative UTC midnight");
        }
        if !(0.0..=1.0).contains(&self.glitch_rate) {
            return bad("glitch_rate must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<SensorRecord>,
    pub annotations: Vec<TaskAnnotation>,
}

impl SynthOutput {
    /// Writes both streams as JSONL.
    pub fn write_jsonl<S: Write, A: Write>(
        &self,
        mut sensors: S,
        mut annotations: A,
    ) -> Result<()> {
        for r in &self.records {
            writeln!(sensors, "{}", r.to_json_line())?;
        }
        for a in &self.annotations {
            writeln!(annotations, "{}", a.to_json_line())?;
        }
        sensors.flush()?;
        annotations.flush()?;
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    UserTraits = 1,
    HourSteps,
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

fn keyed_rng(seed: u64, user: usize, t: i64, stream: Stream) -> ChaCha8Rng {
    let mut k = splitmix64(seed);
    k = splitmix64(k ^ user as u64);
    k = splitmix64(k ^ t as u64);
    k = splitmix64(k ^ stream as u64);
    ChaCha8Rng::seed_from_u64(k)
}

/// Stable per-user deviations from the class profile.
struct UserTraits {
    barometer_offset: f64,
    noise_offset: f64,
    social_factor: f64,
    imu_factor: f64,
    mag_field: [f64; 3],
    places: usize,
}

fn user_traits(seed: u64, user: usize) -> UserTraits {
    let mut rng = keyed_rng(seed, user, 0, Stream::UserTraits);
    let n = |rng: &mut ChaCha8Rng, sd: f64| Normal::new(0.0, sd).expect("sd").sample(rng);
    UserTraits {
        barometer_offset: n(&mut rng, 0.4),
        noise_offset: n(&mut rng, 2.0),
        social_factor: n(&mut rng, 0.2).exp(),
        imu_factor: n(&mut rng, 0.1).exp(),
        mag_field: [
            20.0 + n(&mut rng, 3.0),
            5.0 + n(&mut rng, 3.0),
            -40.0 + n(&mut rng, 3.0),
        ],
        places: rng.random_range(3..=8),
    }
}

fn user_id(index: usize) -> String {
    format!("u{index:03}")
}

const TASKS: [&str; 3] = ["focused work", "meeting", "coordination"];

/// Generates logs for `n_users_per_class` users per profile over `days`
/// days. Users are assigned to profiles round-robin. Output is ordered by
/// `(user, ts)`.
pub fn generate(profiles: &[OccupationProfile], cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    if profiles.is_empty() {
        return Err(WorkrError::InvalidConfig(
            "at least one profile is required".into(),
        ));
    }
    for p in profiles {
        p.validate()?;
    }
    let mut out = SynthOutput::default();
    let n_users = cfg.n_users_per_class * profiles.len();
    for u in 0..n_users {
        let profile = &profiles[u % profiles.len()];
        let (records, annotations) = generate_user(u, profile, cfg);
        out.records.extend(records);
        out.annotations.extend(annotations);
    }
    Ok(out)
}

/// Contiguous runs `[from, to)` of a sorted hour list.
fn runs(hours: &[u32]) -> Vec<(u32, u32)> {
    let mut sorted = hours.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for h in sorted {
        match out.last_mut() {
            Some((_, to)) if *to == h => *to += 1,
            _ => out.push((h, h + 1)),
        }
    }
    out
}

fn generate_user(
    u: usize,
    profile: &OccupationProfile,
    cfg: &SynthConfig,
) -> (Vec<SensorRecord>, Vec<TaskAnnotation>) {
    let user = user_id(u);
    let traits = user_traits(cfg.seed, u);
    let mut records = Vec::new();
    let mut annotations = Vec::new();

    for day in 0..cfg.days {
        let midnight = cfg.start_ts + day as i64 * 86_400;
        let weekday = day % 7;
        for (from, to) in runs(&profile.work_hours[weekday]) {
            let at = |h: u32| midnight + h as i64 * 3600;
            let mut annotate = |start: i64, end: i64, work: bool, category: &str| {
                annotations.push(TaskAnnotation {
                    user: user.clone(),
                    ts_start: start,
                    ts_end: end,
                    category: category.into(),
                    work_related: work,
                    occupation: profile.label,
                });
            };
            let task = TASKS[(u + day) % TASKS.len()];
            if from < 12 && 12 < to {
                // half-hour lunch break, annotated but not work-related
                annotate(at(from), at(12), true, task);
                annotate(at(12), at(12) + 1800, false, "break");
                annotate(at(12) + 1800, at(to), true, task);
            } else {
                annotate(at(from), at(to), true, task);
            }
            let off_hour = to < 24 && !profile.work_hours[weekday].contains(&to);
            let last = if off_hour { to + 1 } else { to };
            for h in from..last {
                emit_hour(&mut records, u, &user, at(h), profile, &traits, cfg);
            }
        }
    }
    records.sort_by_key(|r| r.ts);
    (records, annotations)
}

fn emit_hour(
    out: &mut Vec<SensorRecord>,
    u: usize,
    user: &str,
    hour_start: i64,
    profile: &OccupationProfile,
    traits: &UserTraits,
    cfg: &SynthConfig,
) {
    let slots = (3600 / cfg.slot_seconds) as usize;
    let mut rng = keyed_rng(cfg.seed, u, hour_start, Stream::HourSteps);
    let (hour_steps, high) = profile.steps_per_hour.sample(&mut rng);
    // share the hour's steps across its slots
    let weights: Vec<f64> = (0..slots).map(|_| rng.random_range(0.6..1.4)).collect();
    let wsum: f64 = weights.iter().sum();
    for (i, w) in weights.iter().enumerate() {
        let start = hour_start + i as i64 * cfg.slot_seconds;
        let steps = (hour_steps * w / wsum).round() as u64;
        emit_slot(out, u, user, start, steps, high, profile, traits, cfg);
    }
}

fn record(user: &str, ts: i64, payload: Payload) -> SensorRecord {
    SensorRecord {
        user: user.to_string(),
        ts,
        payload,
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_slot(
    out: &mut Vec<SensorRecord>,
    u: usize,
    user: &str,
    start: i64,
    steps: u64,
    high: bool,
    profile: &OccupationProfile,
    traits: &UserTraits,
    cfg: &SynthConfig,
) {
    let len = cfg.slot_seconds;
    let rng_for = |s: Stream| keyed_rng(cfg.seed, u, start, s);
    let ts_in = |rng: &mut ChaCha8Rng| start + rng.random_range(0..len);
    let normal =
        |rng: &mut ChaCha8Rng, mean: f64, sd: f64| Normal::new(mean, sd).expect("sd").sample(rng);
    let poisson = |rng: &mut ChaCha8Rng, rate: f64| {
        if rate <= 0.0 {
            0
        } else {
            Poisson::new(rate).expect("rate").sample(rng) as u64
        }
    };

    let mut rng = rng_for(Stream::Imu);
    let movement = (steps as f64 / 150.0).min(4.0);
    let accel_sd = profile.imu_activity * traits.imu_factor * (0.2 + 0.5 * movement);
    let gyro_sd = profile.imu_activity * traits.imu_factor * (0.05 + 0.15 * movement);
    for _ in 0..8 {
        let sample = ImuSample {
            accel: [
                normal(&mut rng, 0.0, accel_sd),
                normal(&mut rng, 0.0, accel_sd),
                normal(&mut rng, 9.81, accel_sd),
            ],
            gyro: [
                normal(&mut rng, 0.0, gyro_sd),
                normal(&mut rng, 0.0, gyro_sd),
                normal(&mut rng, 0.0, gyro_sd),
            ],
            mag: traits.mag_field.map(|m| normal(&mut rng, m, 1.5)),
        };
        out.push(record(user, ts_in(&mut rng), Payload::Imu(sample)));
    }

    let mut rng = rng_for(Stream::Steps);
    let parts = 3u64;
    let mut left = steps;
    for i in 0..parts {
        let count = if i + 1 == parts {
            left
        } else {
            rng.random_range(0..=left / 2)
        };
        left -= count;
        out.push(record(user, ts_in(&mut rng), Payload::Steps { count }));
    }

    let mut rng = rng_for(Stream::Location);
    let extra = if high {
        rng.random_range(1..=3)
    } else {
        usize::from(rng.random::<f64>() < 0.15)
    };
    let first = rng.random_range(0..traits.places);
    for k in 0..=extra {
        let place_id = format!("{user}-place-{}", (first + k) % traits.places);
        out.push(record(
            user,
            ts_in(&mut rng),
            Payload::Location { place_id },
        ));
    }

    let mut rng = rng_for(Stream::App);
    let sessions = 1 + poisson(&mut rng, profile.app_sessions);
    let mix = WeightedIndex::new(profile.app_weights()).expect("validated app_mix");
    for _ in 0..sessions {
        let category = AppCategory::ALL[mix.sample(&mut rng)].name().to_string();
        let duration = rng.random_range(10.0..120.0_f64).round();
        out.push(record(
            user,
            ts_in(&mut rng),
            Payload::App { category, duration },
        ));
    }

    let mut rng = rng_for(Stream::Screen);
    let on_total = (profile.screen_share * len as f64 * rng.random_range(0.5..1.5)).min(len as f64);
    let pieces = rng.random_range(1..=3);
    for _ in 0..pieces {
        let duration = (on_total / pieces as f64).round();
        out.push(record(
            user,
            ts_in(&mut rng),
            Payload::Screen { on: true, duration },
        ));
    }
    out.push(record(
        user,
        ts_in(&mut rng),
        Payload::Screen {
            on: false,
            duration: (len as f64 - on_total).max(0.0).round(),
        },
    ));

    let mut rng = rng_for(Stream::Noise);
    let level = profile.noise_db.mean + traits.noise_offset + if high { 4.0 } else { 0.0 };
    for _ in 0..4 {
        let db = normal(&mut rng, level, profile.noise_db.spread).clamp(20.0, 120.0);
        out.push(record(user, ts_in(&mut rng), Payload::Noise { db }));
    }

    let mut rng = rng_for(Stream::Bluetooth);
    for _ in 0..3 {
        let count = poisson(&mut rng, profile.bluetooth_rate * traits.social_factor);
        out.push(record(user, ts_in(&mut rng), Payload::Bluetooth { count }));
    }

    let mut rng = rng_for(Stream::Wifi);
    for _ in 0..3 {
        let count = poisson(&mut rng, profile.wifi_rate * traits.social_factor);
        out.push(record(user, ts_in(&mut rng), Payload::Wifi { count }));
    }

    let mut rng = rng_for(Stream::Barometer);
    let base = profile.barometer_base + traits.barometer_offset;
    let glitch = rng.random::<f64>() < cfg.glitch_rate;
    for i in 0..4 {
        let hpa = if glitch && i == 0 {
            let jump = rng.random_range(20.0..60.0);
            if rng.random::<bool>() {
                base + jump
            } else {
                base - jump
            }
        } else {
            normal(&mut rng, base, 0.03)
        };
        out.push(record(user, ts_in(&mut rng), Payload::Barometer { hpa }));
    }
}

/// Markdown table of profile parameters.
pub fn describe(profiles: &[OccupationProfile]) -> String {
    let mut out = String::from(
        "| Occupation | High-move weight | P(steps/h > 500) | Noise dB | Bluetooth | WiFi | Barometer hPa | IMU activity | Work hours/week | app_mix sum |\n\
         |---|---|---|---|---|---|---|---|---|---|\n",
    );
    for p in profiles {
        let week: usize = p.work_hours.iter().map(Vec::len).sum();
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.3} | {:.1} ± {:.1} | {:.1} | {:.1} | {:.1} | {:.2} | {} | {:.4} |",
            p.label,
            p.steps_per_hour.high_weight,
            p.steps_per_hour.share_above(500.0),
            p.noise_db.mean,
            p.noise_db.spread,
            p.bluetooth_rate,
            p.wifi_rate,
            p.barometer_base,
            p.imu_activity,
            week,
            p.app_mix.values().sum::<f64>(),
        );
    }
    out
}
