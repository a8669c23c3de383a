//! Versioned prompt templates for the two LLM stages.
//!
//! Templates ship as resource files and are hashed into run records so a
//! prompt edit invalidates any cached results built on it.

use sha2::{Digest, Sha256};

pub const QE_TEMPLATE_ID: &str = "qe-v1";
pub const RR_TEMPLATE_ID: &str = "rr-v1";

const QE_TEMPLATE: &str = include_str!("../../resources/qe-v1.txt");
const RR_TEMPLATE: &str = include_str!("../../resources/rr-v1.txt");

/// The pair of stage templates in use.
#[derive(Debug, Clone)]
pub struct Templates {
    qe: String,
    rr: String,
}

/// Content hashes of the two templates.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TemplateHashes {
    pub qe: String,
    pub rr: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            qe: QE_TEMPLATE.to_string(),
            rr: RR_TEMPLATE.to_string(),
        }
    }

    pub fn hashes(&self) -> TemplateHashes {
        TemplateHashes {
            qe: sha256_hex(&self.qe),
            rr: sha256_hex(&self.rr),
        }
    }

    pub fn render_qe(&self, query_text: &str) -> String {
        self.qe.replace("{query}", query_text)
    }

    /// Render the listwise ranking prompt over numbered passages.
    ///
    /// `passages` must already be truncated; they are joined as one
    /// `[i] text` line each, 1-based.
    pub fn render_rr(&self, query_text: &str, passages: &[String]) -> String {
        let numbered = passages
            .iter()
            .enumerate()
            .map(|(i, p)| format!("[{}] {}", i + 1, p))
            .collect::<Vec<_>>()
            .join("\n");
        self.rr
            .replace("{count}", &passages.len().to_string())
            .replace("{query}", query_text)
            .replace("{passages}", &numbered)
    }
}

fn sha256_hex(s: &str) -> String {
    let mut h = Sha256::new();
    h.update(s.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
