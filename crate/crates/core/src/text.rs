//! Tokenization shared by mention tagging and subtitle alignment.
//!
//! A token is a maximal run of alphanumeric characters; an apostrophe is
//! kept when it sits between two alphanumerics (`O'Rourke`). Tokens are
//! lowercased and curly apostrophes are folded to `'`. An `@` followed by
//! handle characters (`[A-Za-z0-9_]`) starts a user handle, which is
//! skipped entirely.

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_handle_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercased word tokens of `text` with `@handles` removed.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '@' && cur.is_empty() {
            let mut j = i + 1;
            while j < chars.len() && is_handle_char(chars[j]) {
                j += 1;
            }
            if j > i + 1 {
                i = j;
                continue;
            }
        }
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            cur.push('\'');
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        i += 1;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Token-level F1 between two token multisets.
pub fn token_f1(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut counts: std::collections::HashMap<&str, isize> = std::collections::HashMap::new();
    for t in a {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in b {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / b.len() as f64;
    let recall = overlap as f64 / a.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(toks("Jon, Snow!  #GoT"), vec!["jon", "snow", "got"]);
    }

    #[test]
    fn keeps_inner_apostrophe() {
        assert_eq!(toks("Beto O'Rourke's"), vec!["beto", "o'rourke's"]);
        assert_eq!(toks("O\u{2019}Rourke"), vec!["o'rourke"]);
        assert_eq!(toks("'quoted'"), vec!["quoted"]);
    }

    #[test]
    fn drops_handles() {
        assert_eq!(toks("@beto_fanpage great night"), vec!["great", "night"]);
        assert_eq!(toks("RT @jon: hi"), vec!["rt", "hi"]);
        assert_eq!(toks("a @ b"), vec!["a", "b"]);
    }

    #[test]
    fn f1_counts_multiset_overlap() {
        let a = toks("winter is coming");
        assert_eq!(token_f1(&a, &a), 1.0);
        assert_eq!(token_f1(&a, &toks("hello there")), 0.0);
        // overlap 1, precision 1/2, recall 1/1
        let f = token_f1(&toks("the"), &toks("the the"));
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }
}
