use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Language of the system under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetLanguage {
    Python,
    Java,
}

impl TargetLanguage {
    pub const ALL: [TargetLanguage; 2] = [TargetLanguage::Python, TargetLanguage::Java];

    pub fn source_extension(self) -> &'static str {
        match self {
            TargetLanguage::Python => "py",
            TargetLanguage::Java => "java",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetLanguage::Python => "Python",
            TargetLanguage::Java => "Java",
        }
    }

    /// Fence tag used when embedding code of this language in markdown.
    pub fn fence_tag(self) -> &'static str {
        match self {
            TargetLanguage::Python => "python",
            TargetLanguage::Java => "java",
        }
    }

    /// Whether a file stem (no extension) names an existing test under this
    /// language's conventions.
    pub fn is_test_stem(self, stem: &str) -> bool {
        match self {
            TargetLanguage::Python => stem.starts_with("test_") || stem.ends_with("_test"),
            TargetLanguage::Java => stem.ends_with("Test") || stem.ends_with("Tests"),
        }
    }

    /// Whether `file_name` (with extension) is a test file for this language.
    pub fn is_test_file_name(self, file_name: &str) -> bool {
        match file_name.strip_suffix(&format!(".{}", self.source_extension())) {
            Some(stem) => self.is_test_stem(stem),
            None => false,
        }
    }
}

impl fmt::Display for TargetLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsupportedLanguage(pub String);

impl fmt::Display for UnsupportedLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unsupported language `{}` (expected Python or Java)", self.0)
    }
}

impl std::error::Error for UnsupportedLanguage {}

impl FromStr for TargetLanguage {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" | "python3" => Ok(TargetLanguage::Python),
            "java" => Ok(TargetLanguage::Java),
            other => Err(UnsupportedLanguage(other.to_string())),
        }
    }
}
