//! Pronoun groups and grammatical-role mapping between them.

use std::collections::BTreeSet;

use crate::text::{self, Span, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PronounRole {
    Subject,
    Object,
    Determiner,
    Possessive,
}

const ROLES: [PronounRole; 4] = [
    PronounRole::Subject,
    PronounRole::Object,
    PronounRole::Determiner,
    PronounRole::Possessive,
];

/// One person/number group, e.g. he / him / his / his.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounGroup {
    forms: [String; 4],
}

impl PronounGroup {
    pub fn new(subject: &str, object: &str, determiner: &str, possessive: &str) -> Self {
        Self {
            forms: [subject, object, determiner, possessive].map(str::to_lowercase),
        }
    }

    pub fn form(&self, role: PronounRole) -> &str {
        &self.forms[role as usize]
    }

    pub fn surface_forms(&self) -> BTreeSet<&str> {
        self.forms.iter().map(String::as_str).collect()
    }

    fn roles_of(&self, lower: &str) -> Vec<PronounRole> {
        ROLES
            .into_iter()
            .filter(|&r| self.form(r) == lower)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounLexicon {
    groups: Vec<PronounGroup>,
}

// Words after "her"/"his" that signal the pronoun is not a determiner.
const NON_NOUN_FOLLOWERS: &[&str] = &[
    "the", "a", "an", "to", "and", "or", "but", "in", "on", "at", "of", "for", "with", "by",
    "from", "that", "this", "as", "if", "is", "was", "are", "were", "has", "had", "have", "will",
    "would", "can", "could", "should", "not", "be", "been", "when", "while", "after", "before",
    "about", "into", "up", "down", "out", "over", "back", "again",
];

impl PronounLexicon {
    /// Builds a lexicon, rejecting groups that share a surface form.
    pub fn new(groups: Vec<PronounGroup>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for g in &groups {
            for f in g.surface_forms() {
                if !seen.insert(f.to_string()) {
                    return Err(format!("pronoun form {f:?} appears in two groups"));
                }
            }
        }
        Ok(Self { groups })
    }

    /// Bundled groups: he, she, they, I, we, you, it.
    pub fn bundled() -> Self {
        Self::new(vec![
            PronounGroup::new("he", "him", "his", "his"),
            PronounGroup::new("she", "her", "her", "hers"),
            PronounGroup::new("they", "them", "their", "theirs"),
            PronounGroup::new("i", "me", "my", "mine"),
            PronounGroup::new("we", "us", "our", "ours"),
            PronounGroup::new("you", "you", "your", "yours"),
            PronounGroup::new("it", "it", "its", "its"),
        ])
        .expect("bundled pronoun groups are disjoint")
    }

    pub fn empty() -> Self {
        Self { groups: Vec::new() }
    }

    pub fn groups(&self) -> &[PronounGroup] {
        &self.groups
    }

    pub fn contains(&self, lower: &str) -> bool {
        self.group_index(lower).is_some()
    }

    pub fn group_index(&self, lower: &str) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.forms.iter().any(|f| f == lower))
    }

    /// Grammatical role of the pronoun at `span`, using the neighbouring tokens
    /// to split ambiguous forms ("her" object vs determiner, "you" subject vs
    /// object). Returns `None` for words outside the lexicon.
    pub fn role_at(&self, text: &str, span: Span) -> Option<PronounRole> {
        let word = text::slice(text, span)?.to_lowercase();
        let group = &self.groups[self.group_index(&word)?];
        let roles = group.roles_of(&word);
        if roles.len() == 1 {
            return Some(roles[0]);
        }
        let tokens = text::word_tokens(text);
        let pos = tokens.iter().position(|t| t.span == span)?;
        let next = tokens.get(pos + 1);
        let next_is_word_after_space = next.is_some_and(|n| {
            let gap = text::slice(text, Span::new(span.end, n.span.start)).unwrap_or("");
            gap.chars().all(char::is_whitespace) && n.text != "'s"
        });
        let next_lower = next.map(|n| n.text.to_lowercase());
        let next_is_noun_like = next_is_word_after_space
            && next_lower
                .as_deref()
                .is_some_and(|w| !NON_NOUN_FOLLOWERS.contains(&w) && !self.contains(w));

        if roles.contains(&PronounRole::Determiner) {
            if next_is_noun_like {
                return Some(PronounRole::Determiner);
            }
            return roles
                .iter()
                .copied()
                .find(|r| *r != PronounRole::Determiner);
        }
        // subject vs object ("you", "it")
        let token = &tokens[pos];
        let prev = pos.checked_sub(1).map(|p| &tokens[p]);
        if token.sentence_initial || prev.is_none() {
            return Some(PronounRole::Subject);
        }
        let prev_gap_has_clause_break = prev.is_some_and(|p| {
            text::slice(text, Span::new(p.span.end, span.start))
                .unwrap_or("")
                .chars()
                .any(|c| matches!(c, ',' | ';' | ':'))
        });
        if prev_gap_has_clause_break || next_is_verb_like(next) {
            Some(PronounRole::Subject)
        } else {
            Some(PronounRole::Object)
        }
    }

    /// The form of group `target` that corresponds to the pronoun at `span`,
    /// with the original capitalization carried over.
    pub fn map_to_group(&self, text: &str, span: Span, target: usize) -> Option<String> {
        let original = text::slice(text, span)?;
        let lower = original.to_lowercase();
        let source = self.group_index(&lower)?;
        if source == target {
            return None;
        }
        let role = self.role_at(text, span)?;
        let replacement = self.groups.get(target)?.form(role);
        if replacement == lower {
            return None;
        }
        if replacement == "i" {
            return Some("I".to_string());
        }
        let sentence_initial = text::word_tokens(text)
            .iter()
            .find(|t| t.span == span)
            .is_some_and(|t| t.sentence_initial);
        if lower == "i" {
            return Some(if sentence_initial {
                text::capitalize(replacement)
            } else {
                replacement.to_string()
            });
        }
        Some(text::match_case(original, replacement))
    }
}

fn next_is_verb_like(next: Option<&Token<'_>>) -> bool {
    let Some(n) = next else { return false };
    let w = n.text.to_lowercase();
    super::verbs::is_auxiliary(&w) || w.ends_with("ed") || (w.ends_with('s') && !w.ends_with("ss"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span_of(text: &str, word: &str) -> Span {
        text::word_tokens(text)
            .into_iter()
            .find(|t| t.text == word)
            .unwrap()
            .span
    }

    #[test]
    fn bundled_groups_are_disjoint() {
        let lex = PronounLexicon::bundled();
        let mut all = Vec::new();
        for g in lex.groups() {
            all.extend(g.surface_forms());
        }
        let unique: BTreeSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn overlapping_groups_rejected() {
        let groups = vec![
            PronounGroup::new("he", "him", "his", "his"),
            PronounGroup::new("she", "him", "her", "hers"),
        ];
        assert!(PronounLexicon::new(groups).is_err());
    }

    #[test]
    fn his_before_noun_maps_to_her() {
        let lex = PronounLexicon::bundled();
        let text = "in his first meeting with";
        let she = lex.group_index("she").unwrap();
        assert_eq!(
            lex.map_to_group(text, span_of(text, "his"), she).as_deref(),
            Some("her")
        );
    }

    #[test]
    fn her_object_vs_determiner() {
        let lex = PronounLexicon::bundled();
        let he = lex.group_index("he").unwrap();
        let t1 = "They thanked her.";
        assert_eq!(
            lex.map_to_group(t1, span_of(t1, "her"), he).as_deref(),
            Some("him")
        );
        let t2 = "They praised her work";
        assert_eq!(
            lex.map_to_group(t2, span_of(t2, "her"), he).as_deref(),
            Some("his")
        );
    }

    #[test]
    fn capitalization_is_carried() {
        let lex = PronounLexicon::bundled();
        let they = lex.group_index("they").unwrap();
        let text = "He said so.";
        assert_eq!(
            lex.map_to_group(text, span_of(text, "He"), they).as_deref(),
            Some("They")
        );
        let i = lex.group_index("i").unwrap();
        let text = "and he left";
        assert_eq!(
            lex.map_to_group(text, span_of(text, "he"), i).as_deref(),
            Some("I")
        );
    }

    #[test]
    fn unknown_word_unmappable() {
        let lex = PronounLexicon::bundled();
        assert_eq!(lex.map_to_group("the cat", Span::new(4, 7), 0), None);
    }
}
