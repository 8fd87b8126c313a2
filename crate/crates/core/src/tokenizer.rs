//! Byte-level BPE encoding.
//!
//! Text is split into pre-tokens, each pre-token's UTF-8 bytes are mapped to
//! printable characters through [`ByteMap`], and merges are then applied
//! greedily: the adjacent pair with the lowest merge index is merged first,
//! leftmost occurrence on ties, until no mergeable pair remains.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, FxHashMap, Result};

/// Marker the byte map assigns to the ASCII space (U+0120, `Ġ`).
pub const SPACE_MARKER: char = '\u{120}';

/// Bijection between the 256 byte values and printable characters.
///
/// Bytes 33..=126, 161..=172 and 174..=255 map to themselves; the remaining
/// 68 bytes map, in increasing byte order, to successive code points from
/// U+0100.
#[derive(Debug, Clone)]
pub struct ByteMap {
    to_char: [char; 256],
    from_char: FxHashMap<char, u8>,
}

impl ByteMap {
    pub fn new() -> Self {
        let mut to_char = ['\0'; 256];
        let mut next = 256u32;
        for b in 0..=255u8 {
            let printable = matches!(b, 33..=126 | 161..=172 | 174..=255);
            to_char[b as usize] = if printable {
                char::from(b)
            } else {
                let c = char::from_u32(next).expect("code points 256..324 are valid");
                next += 1;
                c
            };
        }
        let from_char = to_char
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();
        ByteMap { to_char, from_char }
    }

    #[inline]
    pub fn encode(&self, byte: u8) -> char {
        self.to_char[byte as usize]
    }

    #[inline]
    pub fn decode(&self, c: char) -> Option<u8> {
        self.from_char.get(&c).copied()
    }

    /// Maps raw text to its byte-level surface form.
    pub fn encode_str(&self, text: &str) -> String {
        text.bytes().map(|b| self.encode(b)).collect()
    }
}

impl Default for ByteMap {
    fn default() -> Self {
        Self::new()
    }
}

/// How text is split before merges are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pretokenizer {
    /// GPT-2 style splitting: contractions, letter runs, digit runs and
    /// punctuation runs, each optionally carrying one leading space.
    #[default]
    Gpt2,
    /// Merges run over the whole input as a single piece.
    Whole,
}

/// Vocabulary, merge list and byte map of a byte-level BPE tokenizer.
#[derive(Debug, Clone)]
pub struct TokenizerSpec {
    id: String,
    vocab: FxHashMap<String, u32>,
    tokens: FxHashMap<u32, String>,
    vocab_size: usize,
    merges: Vec<(String, String)>,
    // (left id, right id) -> (merge index, merged id)
    merge_table: FxHashMap<(u32, u32), (u32, u32)>,
    byte_map: ByteMap,
    byte_ids: [Option<u32>; 256],
    pretokenizer: Pretokenizer,
}

impl TokenizerSpec {
    /// Builds a tokenizer, checking that ids are unique and that both sides
    /// and the result of every merge are in the vocabulary.
    pub fn new<V>(id: impl Into<String>, vocab: V, merges: Vec<(String, String)>) -> Result<Self>
    where
        V: IntoIterator<Item = (String, u32)>,
    {
        let mut map = FxHashMap::default();
        let mut tokens = FxHashMap::default();
        for (token, token_id) in vocab {
            if let Some(prev) = tokens.insert(token_id, token.clone()) {
                return Err(Error::InvalidRecord(alloc::format!(
                    "id {token_id} assigned to both `{prev}` and `{token}`"
                )));
            }
            if map.insert(token.clone(), token_id).is_some() {
                return Err(Error::InvalidRecord(alloc::format!(
                    "token `{token}` listed twice"
                )));
            }
        }
        let vocab_size = tokens.keys().max().map_or(0, |&m| m as usize + 1);

        let mut merge_table = FxHashMap::default();
        for (rank, (left, right)) in merges.iter().enumerate() {
            let lookup = |s: &str| {
                map.get(s)
                    .copied()
                    .ok_or_else(|| Error::VocabularyIncomplete(s.to_string()))
            };
            let l = lookup(left)?;
            let r = lookup(right)?;
            let mut joined = String::with_capacity(left.len() + right.len());
            joined.push_str(left);
            joined.push_str(right);
            let merged = lookup(&joined)?;
            merge_table.entry((l, r)).or_insert((rank as u32, merged));
        }

        let byte_map = ByteMap::new();
        let mut byte_ids = [None; 256];
        let mut buf = [0u8; 4];
        for (b, slot) in byte_ids.iter_mut().enumerate() {
            let c = byte_map.encode(b as u8);
            *slot = map.get(&*c.encode_utf8(&mut buf)).copied();
        }

        Ok(TokenizerSpec {
            id: id.into(),
            vocab: map,
            tokens,
            vocab_size,
            merges,
            merge_table,
            byte_map,
            byte_ids,
            pretokenizer: Pretokenizer::default(),
        })
    }

    pub fn with_pretokenizer(mut self, pretokenizer: Pretokenizer) -> Self {
        self.pretokenizer = pretokenizer;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// One past the largest id.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn byte_map(&self) -> &ByteMap {
        &self.byte_map
    }

    pub fn pretokenizer(&self) -> Pretokenizer {
        self.pretokenizer
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(&id).map(String::as_str)
    }

    /// Splits `text` into the pieces merges are applied to.
    pub fn pretokens<'t>(&self, text: &'t str) -> Vec<&'t str> {
        match self.pretokenizer {
            Pretokenizer::Gpt2 => gpt2_pieces(text),
            Pretokenizer::Whole if text.is_empty() => Vec::new(),
            Pretokenizer::Whole => alloc::vec![text],
        }
    }

    /// Encodes text into subword ids.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        for piece in self.pretokens(text) {
            self.encode_piece_into(piece, &mut out)?;
        }
        Ok(out)
    }

    /// Encodes one pre-token without further splitting.
    pub fn encode_piece(&self, piece: &str) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        self.encode_piece_into(piece, &mut out)?;
        Ok(out)
    }

    fn encode_piece_into(&self, piece: &str, out: &mut Vec<u32>) -> Result<()> {
        let mut symbols = Vec::with_capacity(piece.len());
        for b in piece.bytes() {
            match self.byte_ids[b as usize] {
                Some(id) => symbols.push(id),
                None => {
                    return Err(Error::VocabularyIncomplete(
                        self.byte_map.encode(b).to_string(),
                    ))
                }
            }
        }
        loop {
            let mut best: Option<(usize, u32, u32)> = None;
            for (i, pair) in symbols.windows(2).enumerate() {
                if let Some(&(rank, merged)) = self.merge_table.get(&(pair[0], pair[1])) {
                    if best.is_none_or(|(_, r, _)| rank < r) {
                        best = Some((i, rank, merged));
                    }
                }
            }
            let Some((i, _, merged)) = best else { break };
            symbols[i] = merged;
            symbols.remove(i + 1);
        }
        out.extend_from_slice(&symbols);
        Ok(())
    }

    /// Decodes ids back to raw bytes.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        for &id in ids {
            let token = self
                .token(id)
                .ok_or_else(|| Error::Lookup(alloc::format!("token id {id}")))?;
            for c in token.chars() {
                let b = self.byte_map.decode(c).ok_or_else(|| {
                    Error::Domain(alloc::format!("character {c:?} outside the byte map"))
                })?;
                bytes.push(b);
            }
        }
        Ok(bytes)
    }

    /// Decodes ids to text, replacing invalid UTF-8 sequences.
    pub fn decode_lossy(&self, ids: &[u32]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode(ids)?).into_owned())
    }
}

/// Returns the id of the first subword of `response`.
///
/// With `leading_space` the response is encoded as `" " + response`, the
/// form it takes when it follows a preamble ending in a blank.
pub fn first_subword(spec: &TokenizerSpec, response: &str, leading_space: bool) -> Result<u32> {
    if response.is_empty() {
        return Err(Error::Argument("empty response".into()));
    }
    let ids = if leading_space {
        let mut spaced = String::with_capacity(response.len() + 1);
        spaced.push(' ');
        spaced.push_str(response);
        spec.encode(&spaced)?
    } else {
        spec.encode(response)?
    };
    ids.first()
        .copied()
        .ok_or_else(|| Error::Argument("response encodes to no tokens".into()))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Letter,
    Number,
    Space,
    Other,
}

fn class(c: char) -> CharClass {
    if c.is_alphabetic() {
        CharClass::Letter
    } else if c.is_numeric() {
        CharClass::Number
    } else if c.is_whitespace() {
        CharClass::Space
    } else {
        CharClass::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

/// Hand-written equivalent of the GPT-2 split pattern
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`.
fn gpt2_pieces(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(o, _)| o);
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = chars[i].0;
        let rest = &text[start..];
        if let Some(c) = CONTRACTIONS.iter().find(|c| rest.starts_with(**c)) {
            let len = c.chars().count();
            pieces.push(&text[start..end_of(i + len)]);
            i += len;
            continue;
        }

        // optional single space followed by a non-space run of one class
        let (run_start, run_class) = match (chars[i].1, chars.get(i + 1)) {
            (' ', Some(&(_, next))) if class(next) != CharClass::Space => (i + 1, class(next)),
            (c, _) => (i, class(c)),
        };
        if run_class != CharClass::Space {
            let mut j = run_start + 1;
            while j < chars.len() && class(chars[j].1) == run_class {
                j += 1;
            }
            pieces.push(&text[start..end_of(j)]);
            i = j;
            continue;
        }

        let mut j = i + 1;
        while j < chars.len() && class(chars[j].1) == CharClass::Space {
            j += 1;
        }
        // leave the last blank for the following word unless at end of input
        if j < chars.len() && j - i > 1 {
            j -= 1;
        } else if j < chars.len() {
            j = i + 1;
        }
        pieces.push(&text[start..end_of(j)]);
        i = j;
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> TokenizerSpec {
        let tokens = ["h", "e", "l", "o", "he", "ll", "hell", "hello", "Ġ", "Ġh"];
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as u32));
        let merges = [
            ("h", "e"),
            ("l", "l"),
            ("he", "ll"),
            ("hell", "o"),
            ("Ġ", "h"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        TokenizerSpec::new("toy", vocab, merges).unwrap()
    }

    fn ids(spec: &TokenizerSpec, tokens: &[&str]) -> Vec<u32> {
        tokens.iter().map(|t| spec.token_id(t).unwrap()).collect()
    }

    #[test]
    fn byte_map_is_a_bijection() {
        let m = ByteMap::new();
        let mut seen = crate::FxHashSet::default();
        for b in 0..=255u8 {
            let c = m.encode(b);
            assert!(seen.insert(c));
            assert_eq!(m.decode(c), Some(b));
        }
        assert_eq!(m.encode(b' '), SPACE_MARKER);
        assert_eq!(m.encode(b'A'), 'A');
        assert_eq!(m.encode(0), '\u{100}');
        assert_eq!(m.encode(173), '\u{143}');
    }

    #[test]
    fn merges_apply_in_priority_order() {
        let spec = toy();
        assert_eq!(spec.encode("hello").unwrap(), ids(&spec, &["hello"]));
        assert_eq!(spec.encode("helo").unwrap(), ids(&spec, &["he", "l", "o"]));
        assert!(spec.encode("").unwrap().is_empty());
    }

    #[test]
    fn first_subword_respects_leading_space() {
        let spec = toy();
        assert_eq!(
            first_subword(&spec, "helo", false).unwrap(),
            spec.token_id("he").unwrap()
        );
        // "he" outranks "Ġh", so the space is left on its own
        assert_eq!(
            first_subword(&spec, "hello", true).unwrap(),
            spec.token_id("Ġ").unwrap()
        );
        assert!(matches!(
            first_subword(&spec, "", true),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn missing_base_byte_is_reported() {
        let spec = toy();
        assert_eq!(
            spec.encode("hex"),
            Err(Error::VocabularyIncomplete("x".into()))
        );
    }

    #[test]
    fn merge_result_must_be_in_vocab() {
        let vocab = vec![("a".to_string(), 0), ("b".to_string(), 1)];
        let merges = vec![("a".to_string(), "b".to_string())];
        assert_eq!(
            TokenizerSpec::new("bad", vocab, merges).unwrap_err(),
            Error::VocabularyIncomplete("ab".into())
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let vocab = vec![("a".to_string(), 0), ("b".to_string(), 0)];
        assert!(TokenizerSpec::new("bad", vocab, vec![]).is_err());
    }

    #[test]
    fn gpt2_split_pattern() {
        assert_eq!(
            gpt2_pieces("don't stop  now\n\nok 123 (x)"),
            vec!["don", "'t", " stop", " ", " now", "\n", "\n", "ok", " 123", " (", "x", ")"]
        );
        assert_eq!(gpt2_pieces("a  "), vec!["a", "  "]);
        assert_eq!(gpt2_pieces(" hive"), vec![" hive"]);
        assert_eq!(gpt2_pieces("x \ny"), vec!["x", " ", "\n", "y"]);
        assert_eq!(gpt2_pieces("x\t y"), vec!["x", "\t", " y"]);
        assert!(gpt2_pieces("").is_empty());
    }

    #[test]
    fn whole_pretokenizer_merges_across_words() {
        let spec = toy().with_pretokenizer(Pretokenizer::Whole);
        assert_eq!(spec.encode("he hello").unwrap().len(), 3);
    }
}
