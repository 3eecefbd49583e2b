use std::sync::OnceLock;

use regex::Regex;

fn time_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\d{1,3}:\d{1,2}(?:[.:]\d{1,3})?\]").unwrap())
}

fn metadata_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*\[(?:ti|ar|al|by|offset)\s*:[^\]]*\]\s*$").unwrap())
}

/// True for code points in the CJK Unified Ideographs blocks (base block and
/// extensions A through H).
pub fn is_cjk_ideograph(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x323AF)
}

fn clean_line(line: &str) -> Option<String> {
    if metadata_line().is_match(line) {
        return None;
    }
    let stripped = time_tag().replace_all(line, " ");
    let mut out = String::with_capacity(stripped.len());
    let mut pending_space = false;
    for c in stripped.chars() {
        if is_cjk_ideograph(c) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    Some(out)
}

/// Strips LRC time tags and metadata headers, replaces every non-ideograph
/// with a space, collapses whitespace and trims.
pub fn clean_lyric_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.lines() {
        if let Some(cleaned) = clean_line(line) {
            if cleaned.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&cleaned);
        }
    }
    out
}

/// Number of lines that still carry text after cleaning.
pub fn count_content_lines(raw: &str) -> usize {
    raw.lines().filter_map(clean_line).filter(|l| !l.is_empty()).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        assert_eq!(clean_lyric_text(""), "");
    }

    #[test]
    fn time_tag_and_latin_removed() {
        assert_eq!(clean_lyric_text("[00:12.34]我爱你, baby!"), "我爱你");
    }

    #[test]
    fn metadata_header_dropped() {
        assert_eq!(clean_lyric_text("[ti:歌名]\n[00:01]春天"), "春天");
        assert_eq!(
            clean_lyric_text("[ar:歌手]\n[al:专辑]\n[by:某人]\n[offset:500]\n[00:01.123]夏天"),
            "夏天"
        );
    }

    #[test]
    fn all_tag_precisions() {
        assert_eq!(clean_lyric_text("[01:02]一[01:02.3]二[01:02.345]三"), "一 二 三");
    }

    #[test]
    fn whitespace_collapses_across_lines() {
        assert_eq!(clean_lyric_text("  你好 ,,\n\n\t世界  "), "你好 世界");
    }

    #[test]
    fn pure_timestamps_clean_to_nothing() {
        assert_eq!(clean_lyric_text("[00:01.00]\n[00:02.00]\n"), "");
        assert_eq!(count_content_lines("[00:01.00]\n[00:02.00]\n"), 0);
    }

    #[test]
    fn content_lines_counted() {
        assert_eq!(count_content_lines("[ti:歌]\n[00:01]一二\n\n[00:02]三 四\nla la"), 2);
    }

    #[test]
    fn fullwidth_punctuation_is_not_cjk() {
        assert!(!is_cjk_ideograph('，'));
        assert!(!is_cjk_ideograph('。'));
        assert!(is_cjk_ideograph('爱'));
        assert!(is_cjk_ideograph('\u{3400}'));
    }
}
