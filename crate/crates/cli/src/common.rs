use std::fmt::Display;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::anyhow;
use sentecon::dictionary::DictionaryError;
use sentecon::embedding::{EmbeddingProvider, PseudoProvider, ServiceConfig, ServiceProvider, StoreProvider};
use sentecon::lexicon::{liwc_topical_keep_list, parse_category_tsv, parse_keep_list, parse_liwc_dic};
use sentecon::representation::EncodeError;
use sentecon::table::read_delimited;
use sentecon::Lexicon;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::args::{InputArgs, InputFormat, LexiconArgs, LexiconFormat, ProviderArgs};

/// A failed run, tagged with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or malformed inputs, bad arguments: exit 2.
    Input(anyhow::Error),
    /// The embedding source failed or lacked a text: exit 3.
    Provider(anyhow::Error),
    /// Anything else, such as an unwritable output: exit 1.
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Provider(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Provider(e) | Failure::Other(e) => e,
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn input(self, context: impl Display) -> CmdResult<T>;
    fn provider(self, context: impl Display) -> CmdResult<T>;
    fn other(self, context: impl Display) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self, context: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Input(e.into().context(context.to_string())))
    }

    fn provider(self, context: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Provider(e.into().context(context.to_string())))
    }

    fn other(self, context: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Other(e.into().context(context.to_string())))
    }
}

pub fn input_error(message: impl Display) -> Failure {
    Failure::Input(anyhow!("{message}"))
}

pub fn dictionary_failure(e: DictionaryError, context: impl Display) -> Failure {
    let provider = matches!(e, DictionaryError::Embed { .. });
    let err = anyhow::Error::from(e).context(context.to_string());
    if provider {
        Failure::Provider(err)
    } else {
        Failure::Input(err)
    }
}

pub fn encode_failure(e: EncodeError, context: impl Display) -> Failure {
    let provider = match &e {
        EncodeError::Embed(_) => true,
        EncodeError::Batch { source, .. } => matches!(**source, EncodeError::Embed(_)),
        _ => false,
    };
    let err = anyhow::Error::from(e).context(context.to_string());
    if provider {
        Failure::Provider(err)
    } else {
        Failure::Input(err)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_file(path: &Path) -> CmdResult<Vec<u8>> {
    std::fs::read(path).input(format!("reading {}", path.display()))
}

pub fn file_hash(path: &Path) -> CmdResult<String> {
    Ok(sha256_hex(&read_file(path)?))
}

/// Hash of the resolved settings. Inputs enter through their content
/// hashes, so neither file locations nor the worker count affect it.
pub fn config_hash(echo: &Value) -> String {
    sha256_hex(&serde_json::to_vec(echo).expect("json values serialize"))
}

/// Writes to a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| input_error(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.other(format!("writing {}", path.display()))
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
pub fn print_json(value: &Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

pub struct OpenedLexicon {
    pub lexicon: Lexicon,
    /// Hash of the raw file.
    pub file_sha256: String,
    pub filter: Value,
}

pub fn load_lexicon(args: &LexiconArgs) -> CmdResult<OpenedLexicon> {
    let path = &args.lexicon;
    let bytes = read_file(path)?;
    let is_dic = match args.lexicon_format {
        LexiconFormat::Dic => true,
        LexiconFormat::Tsv => false,
        LexiconFormat::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("dic")),
    };
    let parsed = if is_dic {
        parse_liwc_dic(bytes.as_slice())
    } else {
        parse_category_tsv(bytes.as_slice())
    };
    let mut lexicon = parsed.input(path.display())?;
    let mut filter = Value::Null;
    if let Some(keep) = &args.keep {
        let kb = read_file(keep)?;
        let names = parse_keep_list(kb.as_slice()).input(keep.display())?;
        lexicon = lexicon
            .filter_categories(&names)
            .input(format!("applying {}", keep.display()))?;
        filter = json!({ "keep_sha256": sha256_hex(&kb) });
    } else if args.liwc_topical {
        lexicon = lexicon
            .filter_categories(&liwc_topical_keep_list())
            .input(format!("{}: keeping the topical LIWC categories", path.display()))?;
        filter = json!("liwc-topical");
    }
    Ok(OpenedLexicon {
        lexicon,
        file_sha256: sha256_hex(&bytes),
        filter,
    })
}

pub fn open_provider(args: &ProviderArgs) -> CmdResult<Box<dyn EmbeddingProvider>> {
    let spec = args.provider.as_str();
    if let Some(rest) = spec.strip_prefix("pseudo:") {
        let mut parts = rest.split(':');
        let seed = parts
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| input_error(format!("provider {spec:?}: expected pseudo:SEED[:DIM]")))?;
        let dim = match parts.next() {
            None => 64,
            Some(d) => d
                .parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| input_error(format!("provider {spec:?}: bad dimension {d:?}")))?,
        };
        if parts.next().is_some() {
            return Err(input_error(format!("provider {spec:?}: expected pseudo:SEED[:DIM]")));
        }
        return Ok(Box::new(PseudoProvider::new(seed, dim)));
    }
    if spec.starts_with("https://") {
        return Err(input_error(format!(
            "provider {spec:?}: this build has no TLS support; use a local http:// endpoint"
        )));
    }
    if spec.starts_with("http://") {
        let config = ServiceConfig {
            retries: args.retries,
            timeout: Duration::from_secs(args.timeout_secs),
            batch_size: args.batch_size as usize,
            ..ServiceConfig::default()
        };
        let p = ServiceProvider::connect(spec, config).provider(format!("connecting to {spec}"))?;
        return Ok(Box::new(p));
    }
    let p = StoreProvider::load(spec).input(format!("loading embedding store {spec}"))?;
    Ok(Box::new(p))
}

/// Sentences plus the columns copied through to the output.
pub struct Sentences {
    pub passthrough_header: Vec<String>,
    pub passthrough: Vec<Vec<String>>,
    pub texts: Vec<String>,
    pub file_sha256: String,
}

pub fn read_sentences(args: &InputArgs) -> CmdResult<Sentences> {
    let path = &args.input;
    let bytes = read_file(path)?;
    let file_sha256 = sha256_hex(&bytes);
    match args.input_format {
        InputFormat::Lines => {
            let text = String::from_utf8(bytes).input(path.display())?;
            let mut passthrough = Vec::new();
            let mut texts = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                passthrough.push(vec![(i + 1).to_string()]);
                texts.push(line.to_string());
            }
            Ok(Sentences {
                passthrough_header: vec!["line".into()],
                passthrough,
                texts,
                file_sha256,
            })
        }
        InputFormat::Tsv => {
            let table = read_delimited(BufReader::new(bytes.as_slice())).input(path.display())?;
            let col = table.column(&args.text_column).input(path.display())?;
            let keep: Vec<usize> = (0..table.header.len())
                .filter(|&c| c != col || args.keep_text)
                .collect();
            Ok(Sentences {
                passthrough_header: keep.iter().map(|&c| table.header[c].clone()).collect(),
                passthrough: table
                    .rows
                    .iter()
                    .map(|r| keep.iter().map(|&c| r[c].clone()).collect())
                    .collect(),
                texts: table.rows.iter().map(|r| r[col].clone()).collect(),
                file_sha256,
            })
        }
    }
}

pub fn read_lines(path: &Path) -> CmdResult<Vec<String>> {
    let text = String::from_utf8(read_file(path)?).input(path.display())?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}
