//! Antonym extraction from a WordNet `data.adj` dump.
//!
//! Line layout: `offset lex_filenum ss_type w_cnt word lex_id ... p_cnt
//! [symbol offset pos source/target]... | gloss`. Lines starting with spaces
//! are the license preamble. Direct antonyms come from `!` pointers between
//! specific words; satellite synsets (`s`) inherit the antonyms of the head
//! synset they point to with `&`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug)]
struct Synset {
    ss_type: char,
    words: Vec<String>,
    pointers: Vec<Pointer>,
}

#[derive(Debug)]
struct Pointer {
    symbol: String,
    target: u64,
    source_word: usize,
    target_word: usize,
}

fn normalize_word(raw: &str) -> String {
    // adjective markers like "(a)", "(p)", "(ip)"
    let base = raw.split('(').next().unwrap_or(raw);
    base.replace('_', " ").to_lowercase()
}

fn parse_line(line: &str, lineno: usize) -> Result<(u64, Synset), String> {
    let body = line.split(" | ").next().unwrap_or(line);
    let fields: Vec<&str> = body.split_whitespace().collect();
    let err = |m: &str| format!("line {lineno}: {m}");
    let get = |i: usize| {
        fields
            .get(i)
            .copied()
            .ok_or_else(|| err("truncated synset"))
    };
    let offset: u64 = get(0)?.parse().map_err(|_| err("bad offset"))?;
    let ss_type = get(2)?.chars().next().ok_or_else(|| err("bad ss_type"))?;
    let w_cnt = usize::from_str_radix(get(3)?, 16).map_err(|_| err("bad w_cnt"))?;
    let mut words = Vec::with_capacity(w_cnt);
    let mut i = 4;
    for _ in 0..w_cnt {
        words.push(normalize_word(get(i)?));
        i += 2;
    }
    let p_cnt: usize = get(i)?.parse().map_err(|_| err("bad p_cnt"))?;
    i += 1;
    let mut pointers = Vec::with_capacity(p_cnt);
    for _ in 0..p_cnt {
        let symbol = get(i)?.to_string();
        let target: u64 = get(i + 1)?.parse().map_err(|_| err("bad pointer offset"))?;
        let st = get(i + 3)?;
        if st.len() != 4 {
            return Err(err("bad source/target field"));
        }
        let source_word =
            usize::from_str_radix(&st[..2], 16).map_err(|_| err("bad source/target"))?;
        let target_word =
            usize::from_str_radix(&st[2..], 16).map_err(|_| err("bad source/target"))?;
        pointers.push(Pointer {
            symbol,
            target,
            source_word,
            target_word,
        });
        i += 4;
    }
    Ok((
        offset,
        Synset {
            ss_type,
            words,
            pointers,
        },
    ))
}

fn word_at(s: &Synset, n: usize) -> Vec<&str> {
    if n == 0 {
        s.words.iter().map(String::as_str).collect()
    } else {
        s.words
            .get(n - 1)
            .map(|w| vec![w.as_str()])
            .unwrap_or_default()
    }
}

/// Parses the dump and returns a symmetric adjective → antonyms map.
pub fn parse_antonyms(content: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut synsets = HashMap::new();
    for (n, line) in content.lines().enumerate() {
        if line.starts_with(' ') || line.trim().is_empty() {
            continue;
        }
        let (offset, synset) = parse_line(line, n + 1)?;
        synsets.insert(offset, synset);
    }

    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for synset in synsets.values() {
        for p in synset.pointers.iter().filter(|p| p.symbol == "!") {
            let Some(target) = synsets.get(&p.target) else {
                continue;
            };
            for a in word_at(synset, p.source_word) {
                for b in word_at(target, p.target_word) {
                    pairs.insert((a.to_string(), b.to_string()));
                }
            }
        }
    }
    // satellites inherit the antonyms of their head
    for synset in synsets.values().filter(|s| s.ss_type == 's') {
        for p in synset.pointers.iter().filter(|p| p.symbol == "&") {
            let Some(head) = synsets.get(&p.target) else {
                continue;
            };
            for hp in head.pointers.iter().filter(|hp| hp.symbol == "!") {
                let Some(anto) = synsets.get(&hp.target) else {
                    continue;
                };
                for a in &synset.words {
                    for b in word_at(anto, hp.target_word) {
                        pairs.insert((a.clone(), b.to_string()));
                    }
                }
            }
        }
    }

    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (a, b) in pairs {
        if a == b {
            continue;
        }
        map.entry(a.clone()).or_default().insert(b.clone());
        map.entry(b).or_default().insert(a);
    }
    Ok(map
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect())
}
