//! Extracting summary sentences from model output and subsampling them.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::templates::ListStyle;
use crate::textproc::split_sentences;

fn numbered_item(line: &str) -> Option<&str> {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = line[digits..].strip_prefix('.')?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

/// Dash style keeps lines starting with `-`, numbered style keeps lines
/// starting with `<digits>. `; anything else (preambles, sign-offs) is
/// ignored. Plain style splits the whole response into sentences.
pub fn parse_listed_sentences(response: &str, style: ListStyle) -> Vec<String> {
    let items = response.lines().map(str::trim);
    let extracted: Vec<&str> = match style {
        ListStyle::DashBulleted => items.filter_map(|l| l.strip_prefix('-').map(str::trim)).collect(),
        ListStyle::Numbered => items.filter_map(numbered_item).collect(),
        ListStyle::Plain => return split_sentences(response).into_vec(),
    };
    extracted
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Picks `required` sentences uniformly without replacement, keeping their
/// original order. With `required >= len` the input is returned unchanged.
pub fn subsample_sentences<T: Clone>(sentences: &[T], required: usize, seed: u64) -> Vec<T> {
    subsample_with_stream(sentences, required, seed, 0)
}

/// As [`subsample_sentences`], on an independent random stream (one per record).
pub fn subsample_with_stream<T: Clone>(sentences: &[T], required: usize, seed: u64, stream: u64) -> Vec<T> {
    if sentences.len() <= required {
        return sentences.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut picked = index::sample(&mut rng, sentences.len(), required).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| sentences[i].clone()).collect()
}
