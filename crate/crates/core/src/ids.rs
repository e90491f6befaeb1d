use std::fmt;
use std::str::FromStr;

/// Identifier of a marketplace or interest category, e.g. `Business` or
/// `Business/Accounting`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryId(String);

impl CategoryId {
    pub fn new(id: impl Into<String>) -> Self {
        CategoryId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Usable as a field in the line-oriented file formats.
    pub fn is_valid(&self) -> bool {
        !self.0.is_empty() && !self.0.chars().any(|c| c == '\t' || c == '\n' || c == '\r')
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CategoryId {
    fn from(s: &str) -> Self {
        CategoryId(s.to_owned())
    }
}

impl From<String> for CategoryId {
    fn from(s: String) -> Self {
        CategoryId(s)
    }
}

/// Service ordinal pair `(i, j)`, written `i:j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceId(pub u32, pub u32);

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

impl FromStr for ServiceId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("service id {s:?} is not i:j"))?;
        let parse = |p: &str| p.parse::<u32>().map_err(|e| format!("service id {s:?}: {e}"));
        Ok(ServiceId(parse(a)?, parse(b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn service_id_text_form() {
        let id: ServiceId = "3:14".parse().unwrap();
        assert_eq!(id, ServiceId(3, 14));
        assert_eq!(id.to_string(), "3:14");
        assert!("3-14".parse::<ServiceId>().is_err());
        assert!("3:".parse::<ServiceId>().is_err());
    }
}
