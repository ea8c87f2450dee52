//! Verifier-level1 findings shared by the parser, checker and verifier.

use serde::{Deserialize, Serialize};

/// A defect found in a generated model.
///
/// Compilation errors point at a source line; lacking details point at an
/// `object.activity` pair and carry the matching description from the
/// conceptual representation when one is known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Defect {
    #[serde(rename = "compilation_error")]
    Compilation { line: u32, excerpt: String, reason: String },
    #[serde(rename = "lacking_detail")]
    LackingDetail {
        object: String,
        activity: String,
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
    },
}

impl Defect {
    pub fn compilation(line: u32, excerpt: impl Into<String>, reason: impl Into<String>) -> Self {
        Defect::Compilation {
            line: line.max(1),
            excerpt: excerpt.into(),
            reason: reason.into(),
        }
    }

    pub fn is_compilation(&self) -> bool {
        matches!(self, Defect::Compilation { .. })
    }

    pub fn is_lacking_detail(&self) -> bool {
        matches!(self, Defect::LackingDetail { .. })
    }

    pub fn reason(&self) -> &str {
        match self {
            Defect::Compilation { reason, .. } | Defect::LackingDetail { reason, .. } => reason,
        }
    }

    pub fn line(&self) -> Option<u32> {
        match self {
            Defect::Compilation { line, .. } => Some(*line),
            Defect::LackingDetail { .. } => None,
        }
    }

    /// One JSON object per defect, as emitted by `sage verify`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("defect serializes")
    }
}

impl std::fmt::Display for Defect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Defect::Compilation { line, excerpt, reason } => write!(f, "line {line}: {reason} (`{excerpt}`)"),
            Defect::LackingDetail {
                object,
                activity,
                reason,
                ..
            } => write!(f, "{object}.{activity}: {reason}"),
        }
    }
}
