//! Words in the free monoid on `g` letters and reduced words in the free group
//! `F_g`.
//!
//! Both kinds share one representation: a sequence of signed letters. In
//! monoid mode every sign is positive; in group mode the sequence is kept
//! reduced, so structural equality is group equality.
//!
//! Words are ordered graded-lexicographically: shorter words first, then
//! letter by letter with `x1 < x1^-1 < x2 < x2^-1 < …` (in the monoid there
//! are no inverse letters, so this is `x1 < x2 < …`).

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Free monoid: polynomials evaluated at self-adjoint tuples.
    Monoid,
    /// Free group: trigonometric polynomials evaluated at unitary tuples.
    Group,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Monoid => f.write_str("monoid"),
            Mode::Group => f.write_str("group"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("mode mismatch: {0} vs {1}")]
    ModeMismatch(Mode, Mode),
    #[error("alphabet mismatch: g={0} vs g={1}")]
    AlphabetMismatch(u32, u32),
    #[error("letter x{index} outside alphabet of size {g}")]
    LetterOutOfRange { index: u32, g: u32 },
    #[error("inverse letter x{0}^-1 is not allowed in monoid mode")]
    InverseInMonoid(u32),
    #[error("alphabet size must be positive")]
    EmptyAlphabet,
    #[error("cannot parse word {text:?} at byte {position}: {reason}")]
    Parse { text: String, position: usize, reason: String },
}

/// A generator `x_i` or its inverse; `index` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    pub index: u32,
    pub inverse: bool,
}

impl Letter {
    pub fn new(index: u32) -> Self {
        Letter { index, inverse: false }
    }

    pub fn inv(index: u32) -> Self {
        Letter { index, inverse: true }
    }

    pub fn inverted(self) -> Self {
        Letter { index: self.index, inverse: !self.inverse }
    }

    /// Position in the letter order `x1, x1^-1, x2, x2^-1, …`.
    pub fn key(self) -> u32 {
        2 * (self.index - 1) + u32::from(self.inverse)
    }

    /// Inverse of [`Letter::key`].
    pub fn from_key(key: u32) -> Self {
        Letter { index: key / 2 + 1, inverse: key % 2 == 1 }
    }

    fn cancels(self, other: Letter) -> bool {
        self.index == other.index && self.inverse != other.inverse
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "x{}^-1", self.index)
        } else {
            write!(f, "x{}", self.index)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Word {
    mode: Mode,
    g: u32,
    letters: Vec<Letter>,
}

impl PartialEq for Word {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.g == other.g && self.letters == other.letters
    }
}

impl Eq for Word {}

impl Hash for Word {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.mode.hash(state);
        self.letters.hash(state);
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.iter().map(|l| l.key()).cmp(other.letters.iter().map(|l| l.key())))
            .then_with(|| self.mode.cmp(&other.mode))
            .then_with(|| self.g.cmp(&other.g))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn reduce_into(out: &mut Vec<Letter>, letters: impl IntoIterator<Item = Letter>) {
    for l in letters {
        match out.last() {
            Some(&last) if last.cancels(l) => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
}

impl Word {
    pub fn empty(g: u32, mode: Mode) -> Self {
        Word { mode, g, letters: Vec::new() }
    }

    /// The generator `x_index`.
    pub fn generator(g: u32, mode: Mode, index: u32) -> Result<Self, WordError> {
        Word::from_letters(g, mode, [Letter::new(index)])
    }

    /// Builds a word from letters, validating the alphabet. In group mode the
    /// sequence is freely reduced.
    pub fn from_letters(g: u32, mode: Mode, letters: impl IntoIterator<Item = Letter>) -> Result<Self, WordError> {
        if g == 0 {
            return Err(WordError::EmptyAlphabet);
        }
        let mut out = Vec::new();
        let mut checked = Vec::new();
        for l in letters {
            if l.index == 0 || l.index > g {
                return Err(WordError::LetterOutOfRange { index: l.index, g });
            }
            if l.inverse && mode == Mode::Monoid {
                return Err(WordError::InverseInMonoid(l.index));
            }
            checked.push(l);
        }
        match mode {
            Mode::Monoid => out = checked,
            Mode::Group => reduce_into(&mut out, checked),
        }
        Ok(Word { mode, g, letters: out })
    }

    /// Parses the text syntax `x1 x2^-1`; the identity is spelled `1`.
    pub fn parse(text: &str, g: u32, mode: Mode) -> Result<Self, WordError> {
        let err = |position: usize, reason: &str| WordError::Parse {
            text: text.to_string(),
            position,
            reason: reason.to_string(),
        };
        let trimmed = text.trim();
        if trimmed == "1" {
            return Ok(Word::empty(g, mode));
        }
        if trimmed.is_empty() {
            return Err(err(0, "empty word must be written as `1`"));
        }
        let mut letters = Vec::new();
        let mut offset = 0;
        for token in text.split_whitespace() {
            let position = text[offset..].find(token).map_or(offset, |p| p + offset);
            offset = position + token.len();
            let body = token.strip_prefix('x').ok_or_else(|| err(position, "letters must start with `x`"))?;
            let (digits, inverse) = match body.strip_suffix("^-1") {
                Some(d) => (d, true),
                None => (body, false),
            };
            let index: u32 = digits.parse().map_err(|_| err(position + 1, "expected a letter index"))?;
            letters.push(Letter { index, inverse });
        }
        Word::from_letters(g, mode, letters).map_err(|e| match e {
            WordError::Parse { .. } => e,
            other => err(0, &other.to_string()),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn alphabet(&self) -> u32 {
        self.g
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    fn check_compatible(&self, other: &Word) -> Result<(), WordError> {
        if self.mode != other.mode {
            return Err(WordError::ModeMismatch(self.mode, other.mode));
        }
        if self.g != other.g {
            return Err(WordError::AlphabetMismatch(self.g, other.g));
        }
        Ok(())
    }

    /// Product `self · other` (juxtaposition, then reduction in group mode).
    pub fn concat(&self, other: &Word) -> Result<Word, WordError> {
        self.check_compatible(other)?;
        let mut letters = self.letters.clone();
        match self.mode {
            Mode::Monoid => letters.extend_from_slice(&other.letters),
            Mode::Group => reduce_into(&mut letters, other.letters.iter().copied()),
        }
        Ok(Word { mode: self.mode, g: self.g, letters })
    }

    /// Prepends a single letter.
    pub fn left_mul(&self, letter: Letter) -> Result<Word, WordError> {
        let w = Word::from_letters(self.g, self.mode, [letter])?;
        w.concat(self)
    }

    /// `w*`: reversal in the monoid, group inverse in the free group.
    pub fn involute(&self) -> Word {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|&l| match self.mode {
                Mode::Monoid => l,
                Mode::Group => l.inverted(),
            })
            .collect();
        Word { mode: self.mode, g: self.g, letters }
    }

    /// True when no adjacent pair cancels (always true in the monoid).
    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|p| !p[0].cancels(p[1]))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Letters available in `mode`, in comparison order.
pub fn alphabet_letters(g: u32, mode: Mode) -> Vec<Letter> {
    match mode {
        Mode::Monoid => (1..=g).map(Letter::new).collect(),
        Mode::Group => (0..2 * g).map(Letter::from_key).collect(),
    }
}

/// All words of length at most `d`, sorted graded-lexicographically.
pub fn enumerate(g: u32, d: usize, mode: Mode) -> Vec<Word> {
    assert!(g >= 1, "alphabet size must be positive");
    let alphabet = alphabet_letters(g, mode);
    let mut out = vec![Word::empty(g, mode)];
    let mut layer_start = 0;
    for _ in 0..d {
        let layer_end = out.len();
        for i in layer_start..layer_end {
            for &l in &alphabet {
                let prefix = &out[i].letters;
                if mode == Mode::Group && prefix.last().is_some_and(|&last| last.cancels(l)) {
                    continue;
                }
                let mut letters = prefix.clone();
                letters.push(l);
                out.push(Word { mode, g, letters });
            }
        }
        layer_start = layer_end;
    }
    out
}

/// Number of words of length at most `d`: `N(d)` for the monoid and
/// `N_red(d)` for the free group.
pub fn count(g: u32, d: usize, mode: Mode) -> usize {
    assert!(g >= 1, "alphabet size must be positive");
    let g = g as usize;
    let mut total = 1usize;
    match mode {
        Mode::Monoid => {
            let mut layer = 1usize;
            for _ in 0..d {
                layer *= g;
                total += layer;
            }
        }
        Mode::Group => {
            let mut layer = 2 * g;
            for _ in 0..d {
                total += layer;
                layer *= 2 * g - 1;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str, g: u32, mode: Mode) -> Word {
        Word::parse(s, g, mode).unwrap()
    }

    #[test]
    fn concat_examples() {
        let m = Mode::Monoid;
        assert_eq!(w("x1", 2, m).concat(&w("x2", 2, m)).unwrap(), w("x1 x2", 2, m));
        let e = Word::empty(2, m);
        assert_eq!(e.concat(&w("x2 x1", 2, m)).unwrap(), w("x2 x1", 2, m));
        let gm = Mode::Group;
        let prod = w("x1 x2", 2, gm).concat(&w("x2^-1 x1", 2, gm)).unwrap();
        assert_eq!(prod.to_string(), "x1 x1");
    }

    #[test]
    fn concat_rejects_mismatch() {
        let a = Word::empty(2, Mode::Monoid);
        assert_eq!(a.concat(&Word::empty(2, Mode::Group)), Err(WordError::ModeMismatch(Mode::Monoid, Mode::Group)));
        assert_eq!(a.concat(&Word::empty(3, Mode::Monoid)), Err(WordError::AlphabetMismatch(2, 3)));
    }

    #[test]
    fn involute_examples() {
        assert_eq!(w("x1 x2", 2, Mode::Monoid).involute(), w("x2 x1", 2, Mode::Monoid));
        assert_eq!(Word::empty(3, Mode::Group).involute(), Word::empty(3, Mode::Group));
        let u = w("x1 x2^-1", 2, Mode::Group);
        assert_eq!(u.involute(), w("x2 x1^-1", 2, Mode::Group));
        assert!(u.concat(&u.involute()).unwrap().is_empty());
    }

    #[test]
    fn enumerate_examples() {
        let words: Vec<String> = enumerate(2, 2, Mode::Monoid).iter().map(|w| w.to_string()).collect();
        assert_eq!(words, ["1", "x1", "x2", "x1 x1", "x1 x2", "x2 x1", "x2 x2"]);
        let words: Vec<String> = enumerate(2, 1, Mode::Group).iter().map(|w| w.to_string()).collect();
        assert_eq!(words, ["1", "x1", "x1^-1", "x2", "x2^-1"]);
        assert_eq!(enumerate(1, 0, Mode::Monoid).len(), 1);
        assert_eq!(enumerate(1, 0, Mode::Group).len(), 1);
    }

    #[test]
    fn count_examples() {
        assert_eq!(count(2, 2, Mode::Monoid), 7);
        assert_eq!(count(2, 2, Mode::Group), 17);
        assert_eq!(count(2, 1, Mode::Group), 5);
        for g in 1..5 {
            assert_eq!(count(g, 0, Mode::Monoid), 1);
            assert_eq!(count(g, 0, Mode::Group), 1);
        }
    }

    #[test]
    fn count_matches_closed_forms() {
        for g in 2u32..5 {
            for d in 0..5usize {
                let gi = g as usize;
                assert_eq!(count(g, d, Mode::Monoid), (gi.pow(d as u32 + 1) - 1) / (gi - 1));
                assert_eq!(count(g, d, Mode::Group), (gi * (2 * gi - 1).pow(d as u32) - 1) / (gi - 1));
            }
        }
    }

    #[test]
    fn exhaustive_word_properties() {
        for mode in [Mode::Monoid, Mode::Group] {
            for g in 1..=3u32 {
                let d = if mode == Mode::Group && g == 3 { 3 } else { 4 };
                let words = enumerate(g, d, mode);
                assert_eq!(words.len(), count(g, d, mode));
                assert!(words.windows(2).all(|p| p[0] < p[1]), "strictly increasing");
                for a in &words {
                    assert_eq!(&a.involute().involute(), a);
                    if mode == Mode::Group {
                        assert!(a.concat(&a.involute()).unwrap().is_empty());
                    }
                }
                for a in words.iter().take(40) {
                    for b in words.iter().take(40) {
                        let ab = a.concat(b).unwrap();
                        assert_eq!(ab.involute(), b.involute().concat(&a.involute()).unwrap());
                        assert!(ab.is_reduced());
                    }
                }
            }
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["1", "x1", "x2^-1 x1 x3"] {
            assert_eq!(w(s, 3, Mode::Group).to_string(), s);
        }
        assert!(matches!(Word::parse("x1 y2", 2, Mode::Monoid), Err(WordError::Parse { position: 3, .. })));
        assert!(Word::parse("x1^-1", 2, Mode::Monoid).is_err());
        assert!(Word::parse("x3", 2, Mode::Monoid).is_err());
        assert!(Word::parse("", 2, Mode::Monoid).is_err());
    }

    #[test]
    fn parse_reduces_group_words() {
        assert!(w("x1 x1^-1", 1, Mode::Group).is_empty());
    }
}
