//! Minute-resolution UTC timestamps.

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Parses an ISO-8601 timestamp. Accepts RFC 3339 (`2018-02-08T22:23:00Z`,
/// offsets allowed) and naive UTC forms with or without seconds.
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(Error::invalid(format!("malformed timestamp `{s}`")))
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Truncates to the start of the minute.
pub fn floor_minute(t: &Timestamp) -> Timestamp {
    t.with_second(0).and_then(|t| t.with_nanosecond(0)).unwrap_or(*t)
}

pub fn minutes_between(from: &Timestamp, to: &Timestamp) -> i64 {
    (*to - *from).num_minutes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a = parse_timestamp("2018-02-08T22:23:00Z").unwrap();
        let b = parse_timestamp("2018-02-08T22:23").unwrap();
        let c = parse_timestamp("2018-02-08 22:23:00").unwrap();
        let d = parse_timestamp("2018-02-08T23:23:00+01:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
        assert_eq!(format_timestamp(&a), "2018-02-08T22:23:00Z");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_timestamp("yesterday").is_err());
        assert!(parse_timestamp("2018-13-08T22:23").is_err());
    }
}
