//! OSC 1.0 address pattern matching, used for cue dispatch.
//!
//! Tokens: `?` one character, `*` any run of characters, `[...]` character
//! class with `!` negation and `-` ranges, `{a,b}` literal alternation.
//! None of them ever match `/`, so a wildcard stays within one address
//! segment.

use super::PatternError;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Literal(char),
    AnyChar,
    AnyRun,
    Class {
        negated: bool,
        items: Vec<ClassItem>,
    },
    Alt(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
enum ClassItem {
    Char(char),
    Range(char, char),
}

/// Check a pattern's syntax without matching anything — what a rules
/// loader wants, so a typo fails at load time rather than mid-show.
pub fn validate_pattern(pattern: &str) -> Result<(), PatternError> {
    if !pattern.starts_with('/') {
        return Err(PatternError::Malformed("pattern must begin with '/'"));
    }
    parse(pattern).map(|_| ())
}

/// Decide whether `address` matches `pattern`. Both must begin with '/'.
pub fn match_address(pattern: &str, address: &str) -> Result<bool, PatternError> {
    if !pattern.starts_with('/') {
        return Err(PatternError::Malformed("pattern must begin with '/'"));
    }
    if !address.starts_with('/') {
        return Err(PatternError::Malformed("address must begin with '/'"));
    }
    let tokens = parse(pattern)?;
    let chars: Vec<char> = address.chars().collect();
    Ok(match_tokens(&tokens, &chars))
}

fn parse(pattern: &str) -> Result<Vec<Token>, PatternError> {
    let mut tokens = Vec::new();
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '?' => tokens.push(Token::AnyChar),
            '*' => tokens.push(Token::AnyRun),
            '[' => {
                let negated = chars.peek() == Some(&'!');
                if negated {
                    chars.next();
                }
                let mut body = Vec::new();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == ']' {
                        closed = true;
                        break;
                    }
                    body.push(c);
                }
                if !closed {
                    return Err(PatternError::Malformed("unterminated '['"));
                }
                tokens.push(Token::Class {
                    negated,
                    items: parse_class(&body),
                });
            }
            '{' => {
                let mut alts = Vec::new();
                let mut current = String::new();
                let mut closed = false;
                for c in chars.by_ref() {
                    match c {
                        '}' => {
                            closed = true;
                            break;
                        }
                        ',' => alts.push(std::mem::take(&mut current)),
                        '{' => return Err(PatternError::Malformed("nested '{'")),
                        other => current.push(other),
                    }
                }
                if !closed {
                    return Err(PatternError::Malformed("unterminated '{'"));
                }
                alts.push(current);
                tokens.push(Token::Alt(alts));
            }
            ']' => return Err(PatternError::Malformed("']' without '['")),
            '}' => return Err(PatternError::Malformed("'}' without '{'")),
            other => tokens.push(Token::Literal(other)),
        }
    }
    Ok(tokens)
}

/// `-` forms a range between two characters; at the start or end of the
/// class body it is a literal.
fn parse_class(body: &[char]) -> Vec<ClassItem> {
    let mut items = Vec::new();
    let mut i = 0;
    while i < body.len() {
        if i + 2 < body.len() && body[i + 1] == '-' {
            items.push(ClassItem::Range(body[i], body[i + 2]));
            i += 3;
        } else {
            items.push(ClassItem::Char(body[i]));
            i += 1;
        }
    }
    items
}

fn class_contains(items: &[ClassItem], c: char) -> bool {
    items.iter().any(|item| match item {
        ClassItem::Char(x) => *x == c,
        ClassItem::Range(lo, hi) => *lo <= c && c <= *hi,
    })
}

fn match_tokens(tokens: &[Token], chars: &[char]) -> bool {
    let Some((token, rest_tokens)) = tokens.split_first() else {
        return chars.is_empty();
    };
    match token {
        Token::Literal(c) => chars.first() == Some(c) && match_tokens(rest_tokens, &chars[1..]),
        Token::AnyChar => {
            matches!(chars.first(), Some(&c) if c != '/') && match_tokens(rest_tokens, &chars[1..])
        }
        Token::Class { negated, items } => match chars.first() {
            Some(&c) if c != '/' && (class_contains(items, c) != *negated) => {
                match_tokens(rest_tokens, &chars[1..])
            }
            _ => false,
        },
        Token::AnyRun => {
            let run_end = chars.iter().position(|&c| c == '/').unwrap_or(chars.len());
            (0..=run_end).any(|k| match_tokens(rest_tokens, &chars[k..]))
        }
        Token::Alt(alts) => alts.iter().any(|alt| {
            let alt_chars: Vec<char> = alt.chars().collect();
            chars.starts_with(&alt_chars) && match_tokens(rest_tokens, &chars[alt_chars.len()..])
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pattern: &str, address: &str) -> bool {
        match_address(pattern, address).unwrap()
    }

    #[test]
    fn literal_identity() {
        assert!(m("/cue/7", "/cue/7"));
        assert!(!m("/cue/7", "/cue/8"));
    }

    #[test]
    fn star_stays_within_a_segment() {
        assert!(m("/cue/*", "/cue/12"));
        assert!(m("/cue/*", "/cue/"));
        assert!(!m("/cue/*", "/cue/1/2"));
        assert!(m("/cue/*/go", "/cue/12/go"));
    }

    #[test]
    fn question_matches_one_non_slash_char() {
        assert!(m("/a?c", "/abc"));
        assert!(!m("/a?c", "/ac"));
        assert!(!m("/a?c", "/a/c"));
    }

    #[test]
    fn alternation_is_literal_and_exact() {
        assert!(m("/k/{on,off}", "/k/off"));
        assert!(m("/k/{on,off}", "/k/on"));
        assert!(!m("/k/{on,off}", "/k/of"));
        assert!(!m("/k/{on,off}", "/k/offf"));
    }

    #[test]
    fn char_classes_with_ranges_and_negation() {
        assert!(m("/cue/[0-9]", "/cue/5"));
        assert!(!m("/cue/[0-9]", "/cue/x"));
        assert!(m("/cue/[!0-9]", "/cue/x"));
        assert!(!m("/cue/[!0-9]", "/cue/5"));
        // '-' at the edge of a class is a literal.
        assert!(m("/x/[-a]", "/x/-"));
        // A class never matches '/', even negated.
        assert!(!m("/a[!b]c", "/a/c"));
    }

    #[test]
    fn malformed_patterns_error() {
        assert!(match_address("/a[bc", "/abc").is_err());
        assert!(match_address("/a{b,c", "/ab").is_err());
        assert!(match_address("/a{b,{c}}", "/ab").is_err());
        assert!(match_address("cue/*", "/cue/1").is_err());
        assert!(match_address("/cue/*", "cue/1").is_err());
    }

    #[test]
    fn star_backtracks_across_following_tokens() {
        assert!(m("/*end", "/the-end"));
        assert!(m("/*e*d", "/feed"));
        assert!(!m("/*end", "/endless"));
    }
}
