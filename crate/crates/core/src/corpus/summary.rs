use super::CorpusError;

/// Extracts the first sentence of a documentation comment as lowercase
/// word tokens.
///
/// Handles `/** … */` block comments with leading `*` gutters, `///` line
/// comments, and XML-style tags such as `<summary>`. A sentence ends at the
/// first `.`, `!` or `?` followed by whitespace or end of text, or at the
/// first block tag (`@param`, `@return`, …).
pub fn extract_summary(comment: &str) -> Result<Vec<String>, CorpusError> {
    let text = strip_markup(comment);
    let sentence = first_sentence(&text);
    let words: Vec<String> = sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    if words.is_empty() {
        return Err(CorpusError::NoSummary);
    }
    Ok(words)
}

fn strip_markup(comment: &str) -> String {
    let mut lines = Vec::new();
    for raw in comment.lines() {
        let mut line = raw.trim();
        for marker in ["/**", "/*", "///", "//"] {
            if let Some(rest) = line.strip_prefix(marker) {
                line = rest;
                break;
            }
        }
        if let Some(rest) = line.strip_suffix("*/") {
            line = rest;
        }
        let line = line.trim_start().trim_start_matches('*').trim();
        if line.starts_with('@') {
            break;
        }
        lines.push(remove_tags(line));
    }
    lines.join(" ")
}

fn remove_tags(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_tag = false;
    for c in line.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

fn first_sentence(text: &str) -> &str {
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => return &text[..i],
                Some((_, next)) if next.is_whitespace() => return &text[..i],
                _ => {}
            }
        }
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn takes_first_sentence() {
        assert_eq!(
            extract_summary("Read a text file. Returns lines.").unwrap(),
            words(&["read", "a", "text", "file"])
        );
    }

    #[test]
    fn single_word() {
        assert_eq!(extract_summary("save").unwrap(), words(&["save"]));
    }

    #[test]
    fn marker_only_is_error() {
        assert!(matches!(extract_summary("///"), Err(CorpusError::NoSummary)));
        assert!(matches!(extract_summary("/** */"), Err(CorpusError::NoSummary)));
    }

    #[test]
    fn javadoc_block() {
        let c = "/**\n * Copies the given file\n * to a new location! Overwrites.\n * @param src source\n */";
        assert_eq!(
            extract_summary(c).unwrap(),
            words(&["copies", "the", "given", "file", "to", "a", "new", "location"])
        );
    }

    #[test]
    fn csharp_summary_tags() {
        let c = "/// <summary>\n/// Read a Text file\n/// </summary>\n/// <param name=\"path\">p</param>";
        assert_eq!(
            extract_summary(c).unwrap(),
            words(&["read", "a", "text", "file", "p"])
        );
        let c = "/// <summary>\n/// Read a Text file.\n/// </summary>";
        assert_eq!(extract_summary(c).unwrap(), words(&["read", "a", "text", "file"]));
    }

    #[test]
    fn inner_dots_do_not_split() {
        assert_eq!(
            extract_summary("Parses config.toml into a map. Then more.").unwrap(),
            words(&["parses", "config", "toml", "into", "a", "map"])
        );
    }
}
