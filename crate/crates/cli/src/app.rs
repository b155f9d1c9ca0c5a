//! Config and store loading, kanji arguments, and exit codes.

use std::path::Path;

use anyhow::Context;
use kanjidist::config::EngineConfig;
use kanjidist::engine::Engine;
use kanjidist::store::{read_kanji_list, Store};

pub const EXIT_IO: u8 = 2;
pub const EXIT_UNKNOWN_KANJI: u8 = 3;
pub const EXIT_BAD_ARGS: u8 = 4;
pub const EXIT_SERVE: u8 = 5;

/// The HTTP server could not start or stopped with an error.
#[derive(Debug)]
pub struct ServeError(pub String);

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "serve failed: {}", self.0)
    }
}

impl std::error::Error for ServeError {}

/// Exit code for an error, from the first cause that has a known kind.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ServeError>().is_some() {
            return EXIT_SERVE;
        }
        if let Some(e) = cause.downcast_ref::<kanjidist::Error>() {
            match e {
                kanjidist::Error::UnknownKanji(_) => return EXIT_UNKNOWN_KANJI,
                kanjidist::Error::Io(_) | kanjidist::Error::Json(_) => return EXIT_IO,
                _ => {}
            }
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_BAD_ARGS
}

/// A kanji given literally, as `U+XXXX`, or as a hex codepoint such as `7c8b`.
pub fn parse_kanji(s: &str) -> kanjidist::Result<char> {
    let s = s.trim();
    let mut chars = s.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        return Ok(c);
    }
    let hex = s.strip_prefix("U+").or_else(|| s.strip_prefix("u+")).unwrap_or(s);
    u32::from_str_radix(hex, 16)
        .ok()
        .and_then(char::from_u32)
        .ok_or_else(|| kanjidist::Error::InvalidParameter(format!("not a kanji or codepoint: {s:?}")))
}

pub fn hex_codepoint(c: char) -> String {
    format!("{:05x}", c as u32)
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(EngineConfig::default()),
    }
}

pub fn load_engine(config: &EngineConfig) -> anyhow::Result<Engine> {
    let mut store =
        Store::load(&config.store).with_context(|| format!("loading store {}", config.store.display()))?;
    if let Some(corpus) = &config.corpus {
        let text =
            std::fs::read_to_string(corpus).with_context(|| format!("reading corpus list {}", corpus.display()))?;
        store.retain(&read_kanji_list(&text));
    }
    Ok(Engine::new(store, config.params, config.resolution)?)
}

/// Reads a kanji list file for commands that take a set.
pub fn read_set(path: &Path) -> anyhow::Result<Vec<char>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading kanji set {}", path.display()))?;
    Ok(read_kanji_list(&text))
}
