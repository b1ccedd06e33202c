//! Message streams, alias tables, mention tagging and minute binning.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// One timestamped post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    /// Epoch seconds.
    pub t: i64,
    #[serde(default)]
    pub author: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedMessages {
    pub messages: Vec<Message>,
    pub malformed: Vec<MalformedLine>,
}

/// Parses a JSON Lines message stream.
///
/// Malformed lines are collected rather than failing the whole load; a
/// duplicate id is fatal. Output is stably sorted by `t`.
pub fn parse_messages(source: &str) -> Result<ParsedMessages> {
    let mut out = ParsedMessages::default();
    let mut seen = HashSet::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let msg: Message = match serde_json::from_str(raw) {
            Ok(m) => m,
            Err(e) => {
                out.malformed.push(MalformedLine {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let problem = if msg.id.is_empty() {
            Some("empty id")
        } else if msg.t < 0 {
            Some("negative timestamp")
        } else if msg.text.trim().is_empty() {
            Some("empty text")
        } else {
            None
        };
        if let Some(reason) = problem {
            out.malformed.push(MalformedLine {
                line,
                reason: reason.to_string(),
            });
            continue;
        }
        if !seen.insert(msg.id.clone()) {
            return Err(Error::DuplicateMessageId(msg.id));
        }
        out.messages.push(msg);
    }
    out.messages.sort_by_key(|m| m.t);
    Ok(out)
}

/// Serializes messages back into the JSON Lines stream format.
pub fn write_messages(messages: &[Message]) -> String {
    let mut s = String::new();
    for m in messages {
        s.push_str(&serde_json::to_string(m).expect("message serializes"));
        s.push('\n');
    }
    s
}

/// Drops retweet-style duplicates, keeping the earliest copy.
///
/// Two messages are duplicates when their token streams agree after a
/// leading `RT` marker is removed (handles are already ignored by the
/// tokenizer).
pub fn dedup_retweets(messages: &[Message]) -> Vec<Message> {
    let mut seen = HashSet::new();
    messages
        .iter()
        .filter(|m| {
            let mut toks = tokenize(&m.text);
            if toks.first().is_some_and(|t| t == "rt") {
                toks.remove(0);
            }
            seen.insert(toks.join(" "))
        })
        .cloned()
        .collect()
}

#[derive(Debug, Deserialize)]
struct AliasRecord {
    name: String,
    aliases: Vec<String>,
}

/// Canonical character names and the aliases that refer to them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    order: Vec<String>,
    entries: BTreeMap<String, BTreeSet<String>>,
    // normalized alias key -> canonical name
    index: HashMap<String, String>,
    max_alias_tokens: usize,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `alias` for `canonical`, rejecting an alias already claimed by
    /// another name.
    pub fn insert(&mut self, canonical: &str, alias: &str) -> Result<()> {
        let key_tokens = tokenize(alias);
        if key_tokens.is_empty() {
            return Err(Error::AliasFormat {
                line: 0,
                reason: format!("alias `{alias}` for `{canonical}` has no word characters"),
            });
        }
        let key = key_tokens.join(" ");
        if let Some(owner) = self.index.get(&key) {
            if owner != canonical {
                return Err(Error::AliasCollision {
                    alias: alias.to_string(),
                    first: owner.clone(),
                    second: canonical.to_string(),
                });
            }
        }
        if !self.entries.contains_key(canonical) {
            self.order.push(canonical.to_string());
        }
        self.entries
            .entry(canonical.to_string())
            .or_default()
            .insert(alias.to_string());
        self.index.insert(key, canonical.to_string());
        self.max_alias_tokens = self.max_alias_tokens.max(key_tokens.len());
        Ok(())
    }

    /// Canonical names in the order they were first added.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn aliases(&self, canonical: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(canonical)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Resolves a canonical name or alias (case-insensitive) to its
    /// canonical name.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        if let Some(n) = self.order.iter().find(|n| n.eq_ignore_ascii_case(name)) {
            return Some(n);
        }
        self.index.get(&tokenize(name).join(" ")).map(String::as_str)
    }

    /// Canonical names with at least one alias occurring as a whole token
    /// sequence in `text`.
    pub fn tag_text(&self, text: &str) -> BTreeSet<String> {
        let tokens = tokenize(text);
        let mut found = BTreeSet::new();
        for start in 0..tokens.len() {
            for len in 1..=self.max_alias_tokens.min(tokens.len() - start) {
                let key = tokens[start..start + len].join(" ");
                if let Some(name) = self.index.get(&key) {
                    found.insert(name.clone());
                }
            }
        }
        found
    }
}

/// Parses an alias file.
///
/// Each non-blank line is either a JSON object `{"name", "aliases"}` or the
/// shorthand `Canonical Name: alias, alias, alias`.
pub fn parse_alias_table(source: &str) -> Result<AliasTable> {
    let mut table = AliasTable::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, aliases) = if trimmed.starts_with('{') {
            let rec: AliasRecord = serde_json::from_str(trimmed).map_err(|e| Error::AliasFormat {
                line,
                reason: e.to_string(),
            })?;
            (rec.name.trim().to_string(), rec.aliases)
        } else {
            let (name, rest) = trimmed.split_once(':').ok_or_else(|| Error::AliasFormat {
                line,
                reason: "expected `Name: alias, alias`".into(),
            })?;
            let aliases = rest
                .split(',')
                .map(|a| a.trim().to_string())
                .filter(|a| !a.is_empty())
                .collect();
            (name.trim().to_string(), aliases)
        };
        if name.is_empty() {
            return Err(Error::AliasFormat {
                line,
                reason: "empty canonical name".into(),
            });
        }
        if aliases.is_empty() {
            return Err(Error::AliasFormat {
                line,
                reason: format!("`{name}` has no aliases"),
            });
        }
        for alias in &aliases {
            table.insert(&name, alias).map_err(|e| match e {
                Error::AliasFormat { reason, .. } => Error::AliasFormat { line, reason },
                other => other,
            })?;
        }
    }
    Ok(table)
}

/// Characters mentioned in a message. The author field and `@handles` are
/// never matched.
pub fn tag_mentions(message: &Message, aliases: &AliasTable) -> BTreeSet<String> {
    aliases.tag_text(&message.text)
}

/// Messages posted within one minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteBin {
    pub minute_index: u64,
    /// Epoch seconds at which this minute begins.
    pub start_t: i64,
    pub messages: Vec<String>,
    pub mention_counts: BTreeMap<String, usize>,
    pub mention_fraction: BTreeMap<String, f64>,
}

impl MinuteBin {
    fn empty(minute_index: u64, origin: i64) -> Self {
        MinuteBin {
            minute_index,
            start_t: origin + 60 * minute_index as i64,
            messages: Vec::new(),
            mention_counts: BTreeMap::new(),
            mention_fraction: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn end_t(&self) -> i64 {
        self.start_t + 60
    }
}

/// Groups messages into consecutive one-minute bins starting at the first
/// message's timestamp.
pub fn bin_by_minute(messages: &[Message], aliases: &AliasTable) -> Vec<MinuteBin> {
    match messages.iter().map(|m| m.t).min() {
        Some(origin) => bin_with_origin(messages, aliases, origin).0,
        None => Vec::new(),
    }
}

/// Bins from an explicit origin. Messages earlier than `origin` are left
/// out; their count is returned alongside the bins.
pub fn bin_with_origin(
    messages: &[Message],
    aliases: &AliasTable,
    origin: i64,
) -> (Vec<MinuteBin>, usize) {
    let mut bins: Vec<MinuteBin> = Vec::new();
    let mut dropped = 0;
    for m in messages {
        if m.t < origin {
            dropped += 1;
            continue;
        }
        let idx = ((m.t - origin) / 60) as u64;
        while bins.len() as u64 <= idx {
            let next = bins.len() as u64;
            bins.push(MinuteBin::empty(next, origin));
        }
        let bin = &mut bins[idx as usize];
        bin.messages.push(m.id.clone());
        for name in tag_mentions(m, aliases) {
            *bin.mention_counts.entry(name).or_default() += 1;
        }
    }
    for bin in &mut bins {
        let n = bin.messages.len() as f64;
        bin.mention_fraction = bin
            .mention_counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / n))
            .collect();
    }
    (bins, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msg(id: &str, t: i64, text: &str) -> Message {
        Message {
            id: id.into(),
            t,
            author: "someone".into(),
            text: text.into(),
        }
    }

    fn got_table() -> AliasTable {
        parse_alias_table(
            "Petyr Baelish: Petyr, Baelish, Littlefinger\n\
             Jon Snow: Jon, Snow\n\
             Daenerys Targaryen: Daenerys, Targaryen, Dany, Mother of Dragons\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_and_sorts_messages() {
        let src = r#"{"id":"b","t":120,"author":"x","text":"two"}
{"id":"a","t":60,"author":"y","text":"one"}
{"id":"c","t":180,"author":"z","text":"three","lang":"en"}
"#;
        let parsed = parse_messages(src).unwrap();
        let ids: Vec<_> = parsed.messages.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(parsed.malformed.is_empty());
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let parsed = parse_messages("").unwrap();
        assert!(parsed.messages.is_empty());
        assert!(parsed.malformed.is_empty());
    }

    #[test]
    fn missing_timestamp_is_reported_with_line() {
        let src = r#"{"id":"a","t":1,"author":"x","text":"one"}
{"id":"b","author":"x","text":"no time"}
{"id":"c","t":2,"author":"x","text":"two"}"#;
        let parsed = parse_messages(src).unwrap();
        assert_eq!(parsed.messages.len(), 2);
        assert_eq!(parsed.malformed.len(), 1);
        assert_eq!(parsed.malformed[0].line, 2);
        assert!(parsed.malformed[0].reason.contains("`t`"));
    }

    #[test]
    fn bad_timestamp_and_blank_text_are_malformed() {
        let src = r#"{"id":"a","t":"noon","author":"x","text":"one"}
{"id":"b","t":-4,"author":"x","text":"neg"}
{"id":"c","t":4,"author":"x","text":"   "}"#;
        let parsed = parse_messages(src).unwrap();
        assert!(parsed.messages.is_empty());
        let lines: Vec<_> = parsed.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, [1, 2, 3]);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let src = r#"{"id":"a","t":1,"author":"x","text":"one"}
{"id":"a","t":2,"author":"x","text":"two"}"#;
        match parse_messages(src) {
            Err(Error::DuplicateMessageId(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alias_shorthand_and_json_lines() {
        let t = got_table();
        assert_eq!(t.aliases("Petyr Baelish").unwrap().len(), 3);
        let t = parse_alias_table(r#"{"name":"Beto O'Rourke","aliases":["Robert","O'Rourke","Beto"]}"#)
            .unwrap();
        let a = t.aliases("Beto O'Rourke").unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.contains("O'Rourke"));
        assert_eq!(t.names(), ["Beto O'Rourke"]);
    }

    #[test]
    fn alias_collision_names_both() {
        match parse_alias_table("A: x\nB: x\n") {
            Err(Error::AliasCollision { first, second, .. }) => {
                assert_eq!(first, "A");
                assert_eq!(second, "B");
            }
            other => panic!("{other:?}"),
        }
        // collisions are case-insensitive
        assert!(parse_alias_table("A: Jon\nB: JON\n").is_err());
    }

    #[test]
    fn alias_without_entries_is_an_error() {
        assert!(parse_alias_table("A:\n").is_err());
        assert!(parse_alias_table("just words\n").is_err());
    }

    #[test]
    fn tags_whole_tokens_only() {
        let t = got_table();
        let m = msg("1", 0, "Littlefinger is scheming again");
        assert_eq!(tag_mentions(&m, &t), BTreeSet::from(["Petyr Baelish".to_string()]));
        let m = msg("2", 0, "a Jonquil in the snowfall");
        assert!(tag_mentions(&m, &t).is_empty());
        let m = msg("3", 0, "nothing to see");
        assert!(tag_mentions(&m, &t).is_empty());
        let m = msg("4", 0, "the MOTHER of dragons and jon!!");
        assert_eq!(tag_mentions(&m, &t).len(), 2);
    }

    #[test]
    fn handles_and_author_are_not_mentions() {
        let t = parse_alias_table("Beto O'Rourke: Robert, O'Rourke, Beto\n").unwrap();
        let m = Message {
            id: "1".into(),
            t: 0,
            author: "beto".into(),
            text: "@beto_fanpage great night".into(),
        };
        assert!(tag_mentions(&m, &t).is_empty());
        let m = msg("2", 0, "O'Rourke speaking now");
        assert_eq!(tag_mentions(&m, &t).len(), 1);
    }

    #[test]
    fn single_bin_fraction() {
        let t = got_table();
        let msgs: Vec<_> = (0..10)
            .map(|i| msg(&i.to_string(), 1000 + i, if i < 4 { "Jon!" } else { "meh" }))
            .collect();
        let bins = bin_by_minute(&msgs, &t);
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].mention_fraction["Jon Snow"], 0.4);
    }

    #[test]
    fn gap_minute_yields_empty_bin() {
        let t = got_table();
        let msgs = vec![
            msg("a", 0, "x"),
            msg("b", 61, "y"),
            msg("c", 190, "z"),
        ];
        let bins = bin_by_minute(&msgs, &t);
        assert_eq!(bins.len(), 4);
        assert!(bins[2].is_empty());
        assert!(bins[2].mention_fraction.is_empty());
        assert_eq!(bins[3].start_t, 180);
    }

    #[test]
    fn fractions_follow_alias_table() {
        // 12 messages in one minute; hand count:
        //   "Littlefinger" x3, "Petyr" x2, "Baelish and Jon" x1, "Jon" x2, other x4
        // full table:  Petyr Baelish 6/12, Jon Snow 3/12
        // without the nickname: Petyr Baelish 3/12
        let texts = [
            "Littlefinger!", "littlefinger again", "LITTLEFINGER", "Petyr", "petyr smirks",
            "Baelish and Jon", "Jon", "jon lives", "wine", "dragons", "snowfall", "the wall",
        ];
        let msgs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, s)| msg(&format!("m{i}"), i as i64, s))
            .collect();
        let full = got_table();
        let bins = bin_by_minute(&msgs, &full);
        assert_eq!(bins[0].mention_fraction["Petyr Baelish"], 6.0 / 12.0);
        assert_eq!(bins[0].mention_fraction["Jon Snow"], 3.0 / 12.0);

        let reduced = parse_alias_table("Petyr Baelish: Petyr, Baelish\nJon Snow: Jon, Snow\n").unwrap();
        let bins = bin_by_minute(&msgs, &reduced);
        assert_eq!(bins[0].mention_fraction["Petyr Baelish"], 3.0 / 12.0);
        assert_eq!(bins[0].mention_fraction["Jon Snow"], 3.0 / 12.0);
    }

    #[test]
    fn explicit_origin_drops_earlier_messages() {
        let t = got_table();
        let msgs = vec![msg("a", 10, "x"), msg("b", 100, "y")];
        let (bins, dropped) = bin_with_origin(&msgs, &t, 60);
        assert_eq!(dropped, 1);
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].messages, ["b"]);
    }

    #[test]
    fn dedup_collapses_retweets() {
        let msgs = vec![
            msg("a", 0, "Jon is back"),
            msg("b", 1, "RT @fan: Jon is back"),
            msg("c", 2, "jon is BACK"),
            msg("d", 3, "something else"),
        ];
        let ids: Vec<_> = dedup_retweets(&msgs).into_iter().map(|m| m.id).collect();
        assert_eq!(ids, ["a", "d"]);
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        ("[a-z0-9]{1,8}", 0i64..100_000, "[a-z_]{0,6}", "[ -~]{0,20}[a-zA-Z]")
            .prop_map(|(id, t, author, text)| Message { id, t, author, text })
    }

    proptest! {
        #[test]
        fn messages_round_trip(msgs in proptest::collection::vec(arb_message(), 0..20)) {
            let mut uniq = Vec::new();
            let mut seen = HashSet::new();
            for m in msgs {
                if seen.insert(m.id.clone()) {
                    uniq.push(m);
                }
            }
            uniq.sort_by_key(|m| m.t);
            let back = parse_messages(&write_messages(&uniq)).unwrap();
            prop_assert!(back.malformed.is_empty());
            prop_assert_eq!(back.messages, uniq);
        }

        #[test]
        fn bins_conserve_messages(
            ts in proptest::collection::vec(0i64..3600, 1..200),
            hits in proptest::collection::vec(any::<bool>(), 200),
        ) {
            let t = got_table();
            let mut msgs: Vec<_> = ts.iter().enumerate()
                .map(|(i, &ts)| msg(&i.to_string(), ts, if hits[i] { "Jon" } else { "x" }))
                .collect();
            msgs.sort_by_key(|m| m.t);
            let bins = bin_by_minute(&msgs, &t);
            let total: usize = bins.iter().map(|b| b.len()).sum();
            prop_assert_eq!(total, msgs.len());
            for (i, b) in bins.iter().enumerate() {
                prop_assert_eq!(b.minute_index, i as u64);
                for f in b.mention_fraction.values() {
                    prop_assert!((0.0..=1.0).contains(f));
                }
            }
        }

        #[test]
        fn tagging_ignores_alias_order(rot in 0usize..3, text in "[A-Za-z ,!']{0,40}") {
            let lines = [
                "Petyr Baelish: Petyr, Baelish, Littlefinger",
                "Jon Snow: Jon, Snow",
                "Arya Stark: Arya, Stark",
            ];
            let a = parse_alias_table(&lines.join("\n")).unwrap();
            let mut rotated = lines.to_vec();
            rotated.rotate_left(rot);
            let b = parse_alias_table(&rotated.join("\n")).unwrap();
            prop_assert_eq!(a.tag_text(&text), b.tag_text(&text));
        }
    }
}
