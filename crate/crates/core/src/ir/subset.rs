use std::collections::BTreeMap;

use super::{parse_module_with, ParseError, ParseOptions};

/// Counts constructs outside the supported subset, sorted by construct name.
///
/// Never fails: the file is parsed leniently, and if it still does not parse
/// the counts gathered so far are returned along with a `syntax_error` entry.
pub fn subset_report(text: &str) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let opts = ParseOptions {
        lenient: true,
        size_limit: usize::MAX,
    };
    match parse_module_with(text, opts) {
        Ok(m) => {
            for s in &m.skipped {
                *counts.entry(s.construct.clone()).or_default() += 1;
            }
        }
        Err(e) => {
            // The lenient parse gave up; approximate with a line scan.
            for (construct, n) in line_scan(text) {
                *counts.entry(construct).or_default() += n;
            }
            let key = match e {
                ParseError::UnresolvedReference { .. } => "unresolved_reference",
                _ => "syntax_error",
            };
            *counts.entry(key.to_string()).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

fn line_scan(text: &str) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines() {
        let code = line.split(';').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        if code.starts_with('!') {
            *counts.entry("metadata".into()).or_default() += 1;
        } else if code.starts_with("module asm") {
            *counts.entry("module_asm".into()).or_default() += 1;
        } else if code
            .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .any(|w| w == "asm")
        {
            *counts.entry("inline_asm".into()).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supported_file_reports_nothing() {
        let text = "define i32 @f(i32 %a) {\nentry:\n  ret i32 %a\n}\n";
        assert!(subset_report(text).is_empty());
    }

    #[test]
    fn counts_inline_asm_blocks() {
        let text = r#"
define void @f() {
entry:
  call void asm sideeffect "nop", ""()
  call void asm sideeffect "pause", "~{memory}"()
  ret void
}
"#;
        assert_eq!(subset_report(text), vec![("inline_asm".to_string(), 2)]);
    }

    #[test]
    fn broken_file_still_reports() {
        let r = subset_report("define i32 @f( {\n");
        assert!(r.iter().any(|(c, n)| c == "syntax_error" && *n == 1));
    }
}
