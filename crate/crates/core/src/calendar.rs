//! Working-time arithmetic: one daily work program, weekends off, plus
//! explicitly excepted dates. Instants are naive local times at minute
//! resolution; seconds are ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::Minutes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanUnit {
    Minutes,
    Hours,
    Days,
    Months,
}

impl FromStr for PlanUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minutes" | "minute" | "min" => Ok(PlanUnit::Minutes),
            "hours" | "hour" | "h" => Ok(PlanUnit::Hours),
            "days" | "day" | "d" => Ok(PlanUnit::Days),
            "months" | "month" => Ok(PlanUnit::Months),
            other => Err(format!("unknown time unit `{other}`")),
        }
    }
}

impl fmt::Display for PlanUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanUnit::Minutes => "minutes",
            PlanUnit::Hours => "hours",
            PlanUnit::Days => "days",
            PlanUnit::Months => "months",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("InvalidProgram: work start {start} must be before work end {end}")]
    InvalidProgram { start: String, end: String },
    #[error("StartHourOutsideProgram: project start hour {0} is outside the work program")]
    StartHourOutsideProgram(String),
    #[error("StartOutsideProgram: {0} is not inside a working interval")]
    StartOutsideProgram(NaiveDateTime),
    #[error("BadTime: {0}")]
    BadTime(String),
    #[error("InvalidMonthLength: a month needs at least one working day")]
    InvalidMonthLength,
}

impl CalendarError {
    pub fn code(&self) -> &'static str {
        match self {
            CalendarError::InvalidProgram { .. } => "InvalidProgram",
            CalendarError::StartHourOutsideProgram(_) => "StartHourOutsideProgram",
            CalendarError::StartOutsideProgram(_) => "StartOutsideProgram",
            CalendarError::BadTime(_) => "BadTime",
            CalendarError::InvalidMonthLength => "InvalidMonthLength",
        }
    }
}

fn default_month_days() -> u32 {
    20
}

/// Wire form of the calendar block in project files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CalendarConfig {
    start_date: NaiveDate,
    start_hour: String,
    program: [String; 2],
    unit: PlanUnit,
    #[serde(default)]
    exceptions: Vec<NaiveDate>,
    #[serde(default = "default_month_days")]
    month_days: u32,
}

fn parse_hhmm(s: &str) -> Result<NaiveTime, CalendarError> {
    NaiveTime::parse_from_str(s.trim(), "%H:%M").map_err(|e| CalendarError::BadTime(format!("`{s}`: {e}")))
}

fn fmt_hhmm(t: NaiveTime) -> String {
    t.format("%H:%M").to_string()
}

fn minute_of_day(t: NaiveTime) -> i64 {
    i64::from(t.hour()) * 60 + i64::from(t.minute())
}

fn at_minute(date: NaiveDate, minute: i64) -> NaiveDateTime {
    date.and_hms_opt((minute / 60) as u32, (minute % 60) as u32, 0)
        .expect("minute within a day")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CalendarConfig", into = "CalendarConfig")]
pub struct WorkCalendar {
    start_date: NaiveDate,
    start_hour: NaiveTime,
    work_start: NaiveTime,
    work_end: NaiveTime,
    unit: PlanUnit,
    exceptions: BTreeSet<NaiveDate>,
    month_days: u32,
}

impl TryFrom<CalendarConfig> for WorkCalendar {
    type Error = CalendarError;

    fn try_from(c: CalendarConfig) -> Result<Self, Self::Error> {
        let mut cal = WorkCalendar::new(
            c.start_date,
            parse_hhmm(&c.start_hour)?,
            (parse_hhmm(&c.program[0])?, parse_hhmm(&c.program[1])?),
            c.unit,
        )?;
        if c.month_days == 0 {
            return Err(CalendarError::InvalidMonthLength);
        }
        cal.month_days = c.month_days;
        cal.exceptions = c.exceptions.into_iter().collect();
        Ok(cal)
    }
}

impl From<WorkCalendar> for CalendarConfig {
    fn from(c: WorkCalendar) -> Self {
        CalendarConfig {
            start_date: c.start_date,
            start_hour: fmt_hhmm(c.start_hour),
            program: [fmt_hhmm(c.work_start), fmt_hhmm(c.work_end)],
            unit: c.unit,
            exceptions: c.exceptions.into_iter().collect(),
            month_days: c.month_days,
        }
    }
}

impl WorkCalendar {
    pub fn new(
        start_date: NaiveDate,
        start_hour: NaiveTime,
        program: (NaiveTime, NaiveTime),
        unit: PlanUnit,
    ) -> Result<Self, CalendarError> {
        let (work_start, work_end) = (program.0.with_second(0).unwrap(), program.1.with_second(0).unwrap());
        if work_start >= work_end {
            return Err(CalendarError::InvalidProgram {
                start: fmt_hhmm(work_start),
                end: fmt_hhmm(work_end),
            });
        }
        if start_hour < work_start || start_hour >= work_end {
            return Err(CalendarError::StartHourOutsideProgram(fmt_hhmm(start_hour)));
        }
        Ok(WorkCalendar {
            start_date,
            start_hour: start_hour.with_second(0).unwrap(),
            work_start,
            work_end,
            unit,
            exceptions: BTreeSet::new(),
            month_days: default_month_days(),
        })
    }

    pub fn with_month_days(mut self, days: u32) -> Result<Self, CalendarError> {
        if days == 0 {
            return Err(CalendarError::InvalidMonthLength);
        }
        self.month_days = days;
        Ok(self)
    }

    pub fn unit(&self) -> PlanUnit {
        self.unit
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn program(&self) -> (NaiveTime, NaiveTime) {
        (self.work_start, self.work_end)
    }

    pub fn exceptions(&self) -> &BTreeSet<NaiveDate> {
        &self.exceptions
    }

    pub fn minutes_per_day(&self) -> Minutes {
        minute_of_day(self.work_end) - minute_of_day(self.work_start)
    }

    /// Marks a date as non-working. Adding the same date twice is a no-op.
    pub fn add_exception(&self, date: NaiveDate) -> WorkCalendar {
        let mut next = self.clone();
        next.exceptions.insert(date);
        next
    }

    pub fn is_working_day(&self, date: NaiveDate) -> bool {
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.exceptions.contains(&date)
    }

    /// Working day, time within `[work_start, work_end]`.
    pub fn is_working_instant(&self, t: NaiveDateTime) -> bool {
        let m = minute_of_day(t.time());
        self.is_working_day(t.date()) && m >= minute_of_day(self.work_start) && m <= minute_of_day(self.work_end)
    }

    pub fn next_working_day(&self, after: NaiveDate) -> NaiveDate {
        let mut d = after + Duration::days(1);
        while !self.is_working_day(d) {
            d += Duration::days(1);
        }
        d
    }

    /// Earliest instant from which work can proceed: `t` itself when it lies
    /// strictly before the end of a working interval, otherwise the next
    /// work-program start.
    pub fn roll_forward(&self, t: NaiveDateTime) -> NaiveDateTime {
        let start = minute_of_day(self.work_start);
        let end = minute_of_day(self.work_end);
        let m = minute_of_day(t.time());
        let date = t.date();
        if self.is_working_day(date) {
            if m < start {
                return at_minute(date, start);
            }
            if m < end {
                return at_minute(date, m);
            }
        }
        at_minute(self.next_working_day(date), start)
    }

    /// The configured start, before any rolling forward.
    pub fn start_instant(&self) -> NaiveDateTime {
        self.start_date.and_time(self.start_hour)
    }

    /// Project origin: the configured start, moved to the next working
    /// instant if the start date is not a working day.
    pub fn origin(&self) -> NaiveDateTime {
        self.roll_forward(self.start_date.and_time(self.start_hour))
    }

    /// Instant after `working` working minutes from `start`. A completion
    /// exactly at the end of a day reports that day's `work_end`.
    pub fn advance(&self, start: NaiveDateTime, working: Minutes) -> Result<NaiveDateTime, CalendarError> {
        if !self.is_working_instant(start) || working < 0 {
            return Err(CalendarError::StartOutsideProgram(start));
        }
        let end = minute_of_day(self.work_end);
        let mut date = start.date();
        let mut minute = minute_of_day(start.time());
        let mut remaining = working;
        loop {
            let available = end - minute;
            if remaining <= available {
                return Ok(at_minute(date, minute + remaining));
            }
            remaining -= available;
            date = self.next_working_day(date);
            minute = minute_of_day(self.work_start);
        }
    }

    /// Working minutes between two instants; negative when `b < a`.
    pub fn working_time_between(&self, a: NaiveDateTime, b: NaiveDateTime) -> Minutes {
        if b < a {
            return -self.working_time_between(b, a);
        }
        let start = minute_of_day(self.work_start);
        let end = minute_of_day(self.work_end);
        let mut total = 0;
        let mut date = a.date();
        while date <= b.date() {
            if self.is_working_day(date) {
                let lo = if date == a.date() { minute_of_day(a.time()).max(start) } else { start };
                let hi = if date == b.date() { minute_of_day(b.time()).min(end) } else { end };
                total += (hi - lo).max(0);
            }
            date += Duration::days(1);
        }
        total
    }

    pub fn minutes_per(&self, unit: PlanUnit) -> Minutes {
        match unit {
            PlanUnit::Minutes => 1,
            PlanUnit::Hours => 60,
            PlanUnit::Days => self.minutes_per_day(),
            PlanUnit::Months => self.minutes_per_day() * Minutes::from(self.month_days),
        }
    }

    /// Working minutes in one unit of the plan's declared time unit.
    pub fn plan_unit_minutes(&self) -> Minutes {
        self.minutes_per(self.unit)
    }

    pub fn convert_units(&self, value: f64, from: PlanUnit, to: PlanUnit) -> f64 {
        value * self.minutes_per(from) as f64 / self.minutes_per(to) as f64
    }

    /// `value` in `unit`, as whole working minutes (nearest).
    pub fn to_minutes(&self, value: f64, unit: PlanUnit) -> Minutes {
        self.convert_units(value, unit, PlanUnit::Minutes).round() as Minutes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dt(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, min, 0).unwrap()
    }

    fn hm(h: u32, m: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, 0).unwrap()
    }

    // 2024-03-04 is a Monday.
    fn nine_to_five() -> WorkCalendar {
        WorkCalendar::new(
            NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
            hm(9, 0),
            (hm(9, 0), hm(17, 0)),
            PlanUnit::Minutes,
        )
        .unwrap()
    }

    #[test]
    fn advance_identity_and_day_end() {
        let cal = nine_to_five();
        assert_eq!(cal.advance(dt(2024, 3, 4, 9, 0), 0).unwrap(), dt(2024, 3, 4, 9, 0));
        assert_eq!(cal.advance(dt(2024, 3, 4, 9, 0), 8 * 60).unwrap(), dt(2024, 3, 4, 17, 0));
    }

    #[test]
    fn advance_skips_weekend() {
        let cal = nine_to_five();
        assert_eq!(cal.advance(dt(2024, 3, 8, 9, 0), 20 * 60).unwrap(), dt(2024, 3, 12, 13, 0));
        assert_eq!(cal.working_time_between(dt(2024, 3, 8, 9, 0), dt(2024, 3, 12, 13, 0)), 20 * 60);
    }

    #[test]
    fn between_examples() {
        let cal = nine_to_five();
        assert_eq!(cal.working_time_between(dt(2024, 3, 4, 9, 0), dt(2024, 3, 4, 9, 0)), 0);
        assert_eq!(cal.working_time_between(dt(2024, 3, 8, 17, 0), dt(2024, 3, 11, 9, 0)), 0);
        assert_eq!(cal.working_time_between(dt(2024, 3, 4, 7, 0), dt(2024, 3, 4, 20, 0)), 480);
        assert_eq!(cal.working_time_between(dt(2024, 3, 4, 10, 0), dt(2024, 3, 4, 9, 0)), -60);
    }

    #[test]
    fn rejects_start_outside_program() {
        let cal = nine_to_five();
        assert!(matches!(
            cal.advance(dt(2024, 3, 9, 10, 0), 5),
            Err(CalendarError::StartOutsideProgram(_))
        ));
        assert!(cal.advance(dt(2024, 3, 4, 8, 59), 5).is_err());
        // The end of the program is a valid start; work continues next day.
        assert_eq!(cal.advance(dt(2024, 3, 4, 17, 0), 30).unwrap(), dt(2024, 3, 5, 9, 30));
    }

    #[test]
    fn exceptions() {
        let cal = nine_to_five().add_exception(NaiveDate::from_ymd_opt(2024, 3, 11).unwrap());
        assert_eq!(cal.advance(dt(2024, 3, 8, 9, 0), 8 * 60).unwrap(), dt(2024, 3, 8, 17, 0));
        assert_eq!(cal.advance(dt(2024, 3, 8, 9, 0), 9 * 60).unwrap(), dt(2024, 3, 12, 10, 0));
        let again = cal.add_exception(NaiveDate::from_ymd_opt(2024, 3, 11).unwrap());
        assert_eq!(again, cal);

        let base = nine_to_five();
        let sat = base.add_exception(NaiveDate::from_ymd_opt(2024, 3, 9).unwrap());
        for w in [0, 100, 480, 2000] {
            assert_eq!(
                sat.advance(dt(2024, 3, 8, 9, 0), w).unwrap(),
                base.advance(dt(2024, 3, 8, 9, 0), w).unwrap()
            );
        }

        let mut week_off = nine_to_five();
        for day in 11..=15 {
            week_off = week_off.add_exception(NaiveDate::from_ymd_opt(2024, 3, day).unwrap());
        }
        assert_eq!(week_off.advance(dt(2024, 3, 8, 16, 0), 120).unwrap(), dt(2024, 3, 18, 10, 0));
    }

    #[test]
    fn unit_conversion() {
        let cal = nine_to_five();
        assert_eq!(cal.to_minutes(2.0, PlanUnit::Days), 960);
        assert_eq!(cal.to_minutes(60.0, PlanUnit::Minutes), 60);
        assert_eq!(cal.to_minutes(1.0, PlanUnit::Months), 9600);
        assert_eq!(cal.to_minutes(1.5, PlanUnit::Hours), 90);
        assert_eq!(cal.convert_units(960.0, PlanUnit::Minutes, PlanUnit::Days), 2.0);
        let short = cal.with_month_days(22).unwrap();
        assert_eq!(short.minutes_per(PlanUnit::Months), 22 * 480);
    }

    #[test]
    fn invariants_are_checked() {
        let d = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
        assert!(matches!(
            WorkCalendar::new(d, hm(9, 0), (hm(17, 0), hm(9, 0)), PlanUnit::Hours),
            Err(CalendarError::InvalidProgram { .. })
        ));
        assert!(matches!(
            WorkCalendar::new(d, hm(17, 0), (hm(9, 0), hm(17, 0)), PlanUnit::Hours),
            Err(CalendarError::StartHourOutsideProgram(_))
        ));
    }

    #[test]
    fn origin_rolls_off_weekend() {
        let cal = WorkCalendar::new(
            NaiveDate::from_ymd_opt(2024, 3, 9).unwrap(),
            hm(10, 0),
            (hm(9, 0), hm(17, 0)),
            PlanUnit::Minutes,
        )
        .unwrap();
        assert_eq!(cal.origin(), dt(2024, 3, 11, 9, 0));
        assert_eq!(nine_to_five().origin(), dt(2024, 3, 4, 9, 0));
    }

    #[test]
    fn config_block_round_trip() {
        let json = r#"{"start_date":"2024-03-04","start_hour":"09:30","program":["08:00","16:00"],"unit":"hours","exceptions":["2024-03-06"]}"#;
        let cal: WorkCalendar = serde_json::from_str(json).unwrap();
        assert_eq!(cal.minutes_per_day(), 480);
        assert_eq!(cal.unit(), PlanUnit::Hours);
        assert!(!cal.is_working_day(NaiveDate::from_ymd_opt(2024, 3, 6).unwrap()));
        let back: WorkCalendar = serde_json::from_str(&serde_json::to_string(&cal).unwrap()).unwrap();
        assert_eq!(back, cal);

        let bad = r#"{"start_date":"2024-03-04","start_hour":"7:00","program":["08:00","16:00"],"unit":"hours"}"#;
        assert!(serde_json::from_str::<WorkCalendar>(bad).is_err());
    }
}
