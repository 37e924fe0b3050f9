//! Config-file defaults, applied by splicing `--key value` pairs into the
//! argument list right after the subcommand name. Every argument is marked
//! `args_override_self`, so a flag repeated later on the real command line
//! replaces the file's value.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::CommandFactory;

use crate::args::Cli;

const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--config", "--workers"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Index of the subcommand token, skipping global options and their values.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn value_args(key: &str, value: &toml::Value) -> anyhow::Result<Vec<String>> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &toml::Value| -> anyhow::Result<String> {
        Ok(match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            other => bail!("config key {key:?}: unsupported value {other}"),
        })
    };
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<anyhow::Result<Vec<_>>>()?;
            vec![flag, parts.join(",")]
        }
        other => vec![flag, scalar(other)?],
    })
}

/// Returns `args` with the config file's defaults spliced in. Without a
/// `--config` flag the arguments are returned unchanged.
pub fn expand(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_idx) = subcommand_index(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;

    let cli = Cli::command();
    let sub_name = args[sub_idx].to_string_lossy().to_string();
    let Some(sub) = cli.find_subcommand(&sub_name) else {
        // let clap report the unknown subcommand
        return Ok(args);
    };
    let longs = |c: &clap::Command| -> BTreeSet<String> {
        c.get_arguments()
            .filter_map(|a| a.get_long().map(str::to_string))
            .collect()
    };
    let accepted = longs(sub);
    let globals = longs(&cli);
    let known: BTreeSet<String> = cli
        .get_subcommands()
        .flat_map(longs)
        .chain(globals.iter().cloned())
        .collect();
    let subcommands: BTreeSet<&str> = cli.get_subcommands().map(|c| c.get_name()).collect();

    let mut injected: Vec<String> = Vec::new();
    let mut own_table = None;
    for (key, value) in &table {
        if let toml::Value::Table(t) = value {
            if !subcommands.contains(key.as_str()) {
                bail!("config {}: unknown section [{key}]", path.display());
            }
            if key == &sub_name {
                own_table = Some(t);
            }
            continue;
        }
        let long = key.replace('_', "-");
        if long == "config" {
            bail!(
                "config {}: a config file cannot name another config file",
                path.display()
            );
        }
        if !known.contains(&long) {
            bail!("config {}: unknown key {key:?}", path.display());
        }
        if accepted.contains(&long) || globals.contains(&long) {
            injected.extend(value_args(key, value)?);
        }
    }
    if let Some(t) = own_table {
        for (key, value) in t {
            let long = key.replace('_', "-");
            if !accepted.contains(&long) && !globals.contains(&long) || long == "config" {
                return Err(anyhow!(
                    "config {}: [{sub_name}] has unknown key {key:?}",
                    path.display()
                ));
            }
            injected.extend(value_args(key, value)?);
        }
    }

    let mut out = args[..=sub_idx].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend_from_slice(&args[sub_idx + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    fn with_config(toml: &str, argv: &[&str]) -> anyhow::Result<Vec<OsString>> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(toml.as_bytes()).unwrap();
        let mut args = os(&["sentecon", "--config", f.path().to_str().unwrap()]);
        args.extend(os(argv));
        expand(args)
    }

    #[test]
    fn file_supplies_defaults_and_flags_win() {
        let toml = "seed = 7\ncentroids = 2\nlabel_column = \"y\"\n[build-dict]\nprovider = \"pseudo:1\"\nlexicon = \"lex.tsv\"\noutput = \"d.scdi\"\n";
        let args = with_config(toml, &["build-dict", "--seed", "9"]).unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let crate::args::Command::BuildDict(b) = cli.command else {
            panic!()
        };
        assert_eq!(b.seed, 9);
        assert_eq!(b.centroids, 2);
        assert_eq!(b.provider.provider, "pseudo:1");
    }

    #[test]
    fn list_values_and_override() {
        let toml = "ignore_columns = [\"a\", \"b\"]\n";
        let argv = ["probe-train", "--train", "t.tsv", "-o", "m.scpm"];
        let cli = Cli::try_parse_from(with_config(toml, &argv).unwrap()).unwrap();
        let crate::args::Command::ProbeTrain(p) = cli.command else {
            panic!()
        };
        assert_eq!(p.table.ignore_columns, ["a", "b"]);
        let argv = [
            "probe-train",
            "--train",
            "t.tsv",
            "-o",
            "m.scpm",
            "--ignore-columns",
            "c",
        ];
        let cli = Cli::try_parse_from(with_config(toml, &argv).unwrap()).unwrap();
        let crate::args::Command::ProbeTrain(p) = cli.command else {
            panic!()
        };
        assert_eq!(p.table.ignore_columns, ["c"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(with_config("bogus = 1\n", &["encode"]).is_err());
        assert!(with_config("[encode]\ncentroids = 2\n", &["encode"]).is_err());
        assert!(with_config("[nope]\nx = 1\n", &["encode"]).is_err());
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["sentecon", "encode", "--seed", "1"]);
        assert_eq!(expand(args.clone()).unwrap(), args);
    }
}
