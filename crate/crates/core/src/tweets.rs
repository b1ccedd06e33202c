//! Picks the message that best describes each scene.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{tag_mentions, AliasTable, Message};
use crate::embedding::{nearest_to_centroid, EmbeddedItem, EmbeddingStore};
use crate::error::{Error, Result};
use crate::scenes::Scene;

/// Which candidate pool the selected message came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionTier {
    /// Mentions every trigger character.
    AllTriggers,
    /// Mentions at least one trigger character.
    AnyTrigger,
    /// No character constraint.
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetSelection {
    pub message_id: String,
    pub tier: SelectionTier,
}

/// Selects the scene message closest (cosine) to the centroid of all scene
/// messages, preferring messages that name every trigger character, then
/// any trigger character, then any message at all.
pub fn select_scene_tweet(
    scene: &Scene,
    messages: &HashMap<String, Message>,
    tweet_store: &EmbeddingStore,
    aliases: &AliasTable,
) -> Result<TweetSelection> {
    if scene.message_ids.is_empty() {
        return Err(Error::EmptyScene);
    }
    let mut items: Vec<EmbeddedItem> = Vec::with_capacity(scene.message_ids.len());
    let mut missing = Vec::new();
    for id in &scene.message_ids {
        match tweet_store.get(id) {
            Some(it) => items.push(it.clone()),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let mentions: HashMap<&str, BTreeSet<String>> = scene
        .message_ids
        .iter()
        .map(|id| {
            let tagged = messages
                .get(id)
                .map(|m| tag_mentions(m, aliases))
                .unwrap_or_default();
            (id.as_str(), tagged)
        })
        .collect();
    let triggers = &scene.trigger_characters;
    let accepts = |tier: SelectionTier, m: &BTreeSet<String>| match tier {
        SelectionTier::AllTriggers => !triggers.is_empty() && triggers.is_subset(m),
        SelectionTier::AnyTrigger => !triggers.is_disjoint(m),
        SelectionTier::Unrestricted => true,
    };
    for tier in [SelectionTier::AllTriggers, SelectionTier::AnyTrigger, SelectionTier::Unrestricted] {
        match nearest_to_centroid(&items, |it| accepts(tier, &mentions[it.id.as_str()])) {
            Ok(it) => {
                return Ok(TweetSelection {
                    message_id: it.id.clone(),
                    tier,
                })
            }
            Err(Error::NoCandidate) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoCandidate)
}
