use crate::error::{Error, Result};

/// Extract the rating from a backend reply: the first integer token, which
/// must lie in 1..=7. A leading minus sign binds to the digits.
pub fn parse_rating(raw: &str) -> Result<u8> {
    let bytes = raw.as_bytes();
    let start = bytes
        .iter()
        .position(u8::is_ascii_digit)
        .ok_or_else(|| Error::Unparseable(raw.to_string()))?;
    let end = bytes[start..]
        .iter()
        .position(|b| !b.is_ascii_digit())
        .map_or(bytes.len(), |n| start + n);
    let negative = start > 0 && bytes[start - 1] == b'-';
    let digits = &raw[start..end];
    let value: i64 = match digits.parse::<i64>() {
        Ok(v) => v,
        // absurdly long digit runs
        Err(_) => return Err(Error::OutOfRange(i64::MAX)),
    };
    let value = if negative { -value } else { value };
    if (1..=7).contains(&value) {
        Ok(value as u8)
    } else {
        Err(Error::OutOfRange(value))
    }
}
