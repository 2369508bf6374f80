use std::fs;
use std::path::Path;

use super::ProviderError;

/// Prompt templates with `{{name}}` placeholders. The defaults are compiled
/// in from `prompts/*.txt`; [`PromptTemplates::load_dir`] overrides any of
/// them with same-named files from a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub compress: String,
    pub extract: String,
    pub canonicalize: String,
    pub reconstruct: String,
    pub judge: String,
    pub select: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            compress: include_str!("../../prompts/compress.txt").to_string(),
            extract: include_str!("../../prompts/extract.txt").to_string(),
            canonicalize: include_str!("../../prompts/canonicalize.txt").to_string(),
            reconstruct: include_str!("../../prompts/reconstruct.txt").to_string(),
            judge: include_str!("../../prompts/judge.txt").to_string(),
            select: include_str!("../../prompts/select.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn load_dir(dir: &Path) -> Result<Self, ProviderError> {
        let mut t = PromptTemplates::default();
        for (name, slot) in [
            ("compress", &mut t.compress),
            ("extract", &mut t.extract),
            ("canonicalize", &mut t.canonicalize),
            ("reconstruct", &mut t.reconstruct),
            ("judge", &mut t.judge),
            ("select", &mut t.select),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = fs::read_to_string(&path)
                    .map_err(|e| ProviderError::Precondition(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(t)
    }
}

pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}
