use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use sentecon::analysis::{
    assemble_sense_data, human_agreement, parse_annotations, parse_sense_keywords, parse_sense_sentences,
    word_sense_eval, AnalysisError, RatioMode,
};
use sentecon::baselines::{Increment, SoftMatchConfig, SoftMatcher};
use sentecon::dictionary::{build_dictionary, collect_reference_items, collect_word_items};
use sentecon::embedding::EmbeddingStore;
use sentecon::lexicon::{encode_bag_of_categories, tokenize};
use sentecon::probe::{
    baseline_majority_mean, train_linear_probe, LabeledDataset, ProbeConfig, ProbeModel, Split, Targets, Task,
};
use sentecon::representation::{encode_batch, EncodeError};
use sentecon::table::{format_sig, read_delimited, write_feature_table, DelimitedTable};
use sentecon::{CategoryDictionary, Method, Representation};
use serde_json::{json, Value};

use crate::args::*;
use crate::common::*;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Feature-table metadata key giving the number of passthrough columns
/// that precede the category columns.
const PASSTHROUGH_KEY: &str = "passthrough_columns";

pub fn run(command: &Command) -> CmdResult<()> {
    match command {
        Command::BuildDict(a) => build_dict(a),
        Command::Encode(a) => encode(a),
        Command::Baseline(a) => baseline(a),
        Command::ProbeTrain(a) => probe_train(a),
        Command::ProbeEval(a) => probe_eval(a),
        Command::AnalyzeAgreement(a) => analyze_agreement(a),
        Command::AnalyzeWordsense(a) => analyze_wordsense(a),
    }
}

fn build_dict(a: &BuildDictArgs) -> CmdResult<()> {
    let lex = load_lexicon(&a.lexicon)?;
    let provider = open_provider(&a.provider)?;
    let (items, corpus_sha256) = match a.mode {
        ModeArg::Word => (
            collect_word_items(&lex.lexicon).map_err(|e| dictionary_failure(e, a.lexicon.lexicon.display()))?,
            None,
        ),
        ModeArg::Reference => {
            let path = a.corpus.as_deref().expect("clap requires --corpus in reference mode");
            let corpus = read_lines(path)?;
            if corpus.is_empty() {
                log::warn!(
                    "reference corpus {} is empty; every category falls back to its words",
                    path.display()
                );
            }
            (collect_reference_items(&lex.lexicon, &corpus), Some(file_hash(path)?))
        }
    };
    let counts = items.counts();
    log::info!(
        "embedding items for {} categories ({} items) with {}",
        counts.len(),
        counts.iter().sum::<usize>(),
        provider.id()
    );

    let echo = json!({
        "command": "build-dict",
        "lexicon_sha256": lex.file_sha256,
        "filter": lex.filter,
        "mode": if a.mode == ModeArg::Reference { "reference" } else { "word" },
        "corpus_sha256": corpus_sha256,
        "centroids": a.centroids,
        "seed": a.seed,
        "provider": provider.id(),
    });
    let hash = config_hash(&echo);
    let dict = build_dictionary(&items, provider.as_ref(), a.centroids as usize, a.seed)
        .map_err(|e| dictionary_failure(e, "building the dictionary"))?
        .with_config_hash(hash.clone());
    write_atomic(&a.output, &dict.to_bytes())?;

    let prov = dict.provenance();
    let per_category: serde_json::Map<String, Value> = dict
        .categories()
        .iter()
        .zip(&prov.items_per_category)
        .map(|(c, n)| (c.clone(), json!(n)))
        .collect();
    print_json(&json!({
        "command": "build-dict",
        "output": a.output,
        "mode": prov.mode,
        "categories": dict.len(),
        "dim": dict.dim(),
        "centroids_requested": a.centroids,
        "items_per_category": per_category,
        "fallback_categories": prov.fallback_categories,
        "seed": a.seed,
        "provider": prov.provider_id,
        "config_hash": hash,
    }));
    Ok(())
}

fn metadata_pairs(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Feature table plus the optional EMBS matrix copy.
fn write_features(
    output: &Path,
    matrix_out: Option<&Path>,
    metadata: &[(String, String)],
    sentences: &Sentences,
    categories: &[String],
    reps: &[Representation],
) -> CmdResult<()> {
    let mut buf = Vec::new();
    write_feature_table(
        &mut buf,
        metadata,
        &sentences.passthrough_header,
        categories,
        sentences
            .passthrough
            .iter()
            .cloned()
            .zip(reps.iter().map(|r| r.weights().to_vec())),
    )
    .other("formatting the feature table")?;
    write_atomic(output, &buf)?;

    if let Some(path) = matrix_out {
        let mut store = EmbeddingStore::new(categories.len()).other("creating the matrix")?;
        for (k, v) in metadata {
            store.insert_metadata(k, v).other("writing matrix metadata")?;
        }
        for (i, r) in reps.iter().enumerate() {
            let row = r.weights().iter().map(|&w| w as f32).collect();
            store
                .insert(i.to_string(), row)
                .input(format!("row {i} of {}", path.display()))?;
        }
        write_atomic(path, &store.to_bytes())?;
    }
    Ok(())
}

fn input_echo(i: &InputArgs, sentences: &Sentences) -> Value {
    json!({
        "input_sha256": sentences.file_sha256,
        "input_format": if i.input_format == InputFormat::Lines { "lines" } else { "tsv" },
        "text_column": i.text_column,
        "keep_text": i.keep_text,
    })
}

fn encode(a: &EncodeArgs) -> CmdResult<()> {
    let dict_bytes = read_file(&a.dictionary)?;
    let dict = CategoryDictionary::from_bytes(&dict_bytes).input(a.dictionary.display())?;
    let provider = open_provider(&a.provider)?;
    if provider.id() != dict.provenance().provider_id {
        log::warn!(
            "dictionary was built with {} but sentences are embedded with {}",
            dict.provenance().provider_id,
            provider.id()
        );
    }
    let sentences = read_sentences(&a.input)?;
    log::info!("encoding {} sentences", sentences.texts.len());
    let reps = encode_batch(&dict, &sentences.texts, provider.as_ref())
        .map_err(|e| encode_failure(e, a.input.input.display()))?;

    let echo = json!({
        "command": "encode",
        "dictionary_sha256": sha256_hex(&dict_bytes),
        "provider": provider.id(),
        "input": input_echo(&a.input, &sentences),
    });
    let hash = config_hash(&echo);
    let metadata = metadata_pairs(&[
        ("command", "encode".into()),
        ("method", Method::Sentecon.as_str().into()),
        ("version", VERSION.into()),
        ("seed", dict.provenance().seed.to_string()),
        ("provider", provider.id()),
        ("dictionary_sha256", sha256_hex(&dict_bytes)),
        ("config_hash", hash.clone()),
        (PASSTHROUGH_KEY, sentences.passthrough_header.len().to_string()),
    ]);
    write_features(
        &a.output,
        a.matrix_out.as_deref(),
        &metadata,
        &sentences,
        dict.categories(),
        &reps,
    )?;
    print_json(&json!({
        "command": "encode",
        "output": a.output,
        "rows": reps.len(),
        "categories": dict.len(),
        "seed": dict.provenance().seed,
        "provider": provider.id(),
        "config_hash": hash,
    }));
    Ok(())
}

fn baseline(a: &BaselineArgs) -> CmdResult<()> {
    let lex = load_lexicon(&a.lexicon)?;
    let sentences = read_sentences(&a.input)?;
    let tokens: Vec<_> = sentences.texts.par_iter().map(|t| tokenize(t)).collect();

    let (method, provider_id, store_hash, reps) = match a.method {
        BaselineMethod::Bow => {
            let reps = tokens
                .par_iter()
                .map(|t| encode_bag_of_categories(&lex.lexicon, t, a.normalize))
                .collect::<Result<Vec<_>, _>>()
                .input(a.input.input.display())?;
            (Method::Bow, "none".to_string(), None, reps)
        }
        BaselineMethod::Softmatch => {
            let path = a.store.as_deref().expect("clap requires --store for softmatch");
            let bytes = read_file(path)?;
            let store = EmbeddingStore::from_bytes(&bytes).input(path.display())?;
            let cfg = SoftMatchConfig {
                threshold: a.threshold,
                increment: match a.increment {
                    IncrementArg::Unit => Increment::Unit,
                    IncrementArg::Similarity => Increment::Similarity,
                },
            };
            let matcher = SoftMatcher::new(&lex.lexicon, &store, cfg).input("soft matching")?;
            let reps: Vec<_> = tokens.par_iter().map(|t| matcher.encode(t)).collect();
            let digest = sha256_hex(&bytes);
            (Method::Softmatch, format!("store:sha256:{digest}"), Some(digest), reps)
        }
    };

    let echo = json!({
        "command": "baseline",
        "method": method.as_str(),
        "lexicon_sha256": lex.file_sha256,
        "filter": lex.filter,
        "input": input_echo(&a.input, &sentences),
        "normalize": a.normalize,
        "store_sha256": store_hash,
        "threshold": (a.method == BaselineMethod::Softmatch).then_some(a.threshold),
        "increment": (a.method == BaselineMethod::Softmatch).then_some(cfg_increment_name(a.increment)),
        "seed": a.seed,
    });
    let hash = config_hash(&echo);
    let metadata = metadata_pairs(&[
        ("command", "baseline".into()),
        ("method", method.as_str().into()),
        ("version", VERSION.into()),
        ("seed", a.seed.to_string()),
        ("provider", provider_id.clone()),
        ("lexicon_sha256", lex.file_sha256.clone()),
        ("config_hash", hash.clone()),
        (PASSTHROUGH_KEY, sentences.passthrough_header.len().to_string()),
    ]);
    write_features(
        &a.output,
        a.matrix_out.as_deref(),
        &metadata,
        &sentences,
        lex.lexicon.categories(),
        &reps,
    )?;
    print_json(&json!({
        "command": "baseline",
        "method": method.as_str(),
        "output": a.output,
        "rows": reps.len(),
        "categories": lex.lexicon.len(),
        "seed": a.seed,
        "provider": provider_id,
        "config_hash": hash,
    }));
    Ok(())
}

fn cfg_increment_name(i: IncrementArg) -> &'static str {
    match i {
        IncrementArg::Unit => "unit",
        IncrementArg::Similarity => "similarity",
    }
}

fn task_of(t: TaskArg) -> Task {
    match t {
        TaskArg::Classification => Task::Classification,
        TaskArg::Regression => Task::Regression,
    }
}

/// Columns a feature table declares as passthrough.
fn passthrough_columns(table: &DelimitedTable, path: &Path) -> CmdResult<Vec<String>> {
    let Some(raw) = table.meta(PASSTHROUGH_KEY) else {
        return Ok(Vec::new());
    };
    let k: usize = raw
        .parse()
        .ok()
        .filter(|&k| k <= table.header.len())
        .ok_or_else(|| input_error(format!("{}: bad {PASSTHROUGH_KEY} value {raw:?}", path.display())))?;
    Ok(table.header[..k].to_vec())
}

/// Loads a split from a feature table or an EMBS matrix plus labels file,
/// returning the dataset and the content hashes that identify it.
fn load_dataset(
    table_path: Option<&Path>,
    embs: Option<&Path>,
    labels: Option<&Path>,
    t: &TableArgs,
    split: Split,
) -> CmdResult<(LabeledDataset, Value)> {
    let task = task_of(t.task);
    if let Some(path) = table_path {
        let bytes = read_file(path)?;
        let table = read_delimited(BufReader::new(bytes.as_slice())).input(path.display())?;
        let mut ignore = t.ignore_columns.clone();
        for c in passthrough_columns(&table, path)? {
            if c != t.label_column && !ignore.contains(&c) {
                ignore.push(c);
            }
        }
        let ds = LabeledDataset::from_table(&table, &t.label_column, &ignore, task, split).input(path.display())?;
        return Ok((ds, json!({ "table_sha256": sha256_hex(&bytes), "ignore": ignore })));
    }
    let path = embs.expect("clap requires a table or a matrix");
    let labels_path = labels.expect("clap requires labels with a matrix");
    let bytes = read_file(path)?;
    let store = EmbeddingStore::from_bytes(&bytes).input(path.display())?;
    let raw = read_lines(labels_path)?;
    let targets = match task {
        Task::Classification => Targets::Labels(raw),
        Task::Regression => Targets::Real(
            raw.iter()
                .enumerate()
                .map(|(i, v)| {
                    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                        input_error(format!(
                            "{}: target {} ({v:?}) is not a finite number",
                            labels_path.display(),
                            i + 1
                        ))
                    })
                })
                .collect::<CmdResult<Vec<_>>>()?,
        ),
    };
    let ds = LabeledDataset::from_store(&store, targets, split).input(path.display())?;
    Ok((
        ds,
        json!({ "matrix_sha256": sha256_hex(&bytes), "labels_sha256": file_hash(labels_path)? }),
    ))
}

fn probe_train(a: &ProbeTrainArgs) -> CmdResult<()> {
    let (train, data_echo) = load_dataset(
        a.train.as_deref(),
        a.train_embs.as_deref(),
        a.train_labels.as_deref(),
        &a.table,
        Split::Train,
    )?;
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(input_error(format!("--lr must be positive, got {}", a.lr)));
    }
    if !(a.l2 >= 0.0 && a.l2.is_finite()) {
        return Err(input_error(format!("--l2 must be non-negative, got {}", a.l2)));
    }
    if !(a.tolerance >= 0.0) || a.patience == 0 {
        return Err(input_error("--tolerance must be non-negative and --patience positive"));
    }
    let config = ProbeConfig {
        learning_rate: a.lr,
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        patience: a.patience,
        l2: a.l2,
        standardize: a.standardize,
        seed: a.seed,
    };
    let echo = json!({
        "command": "probe-train",
        "data": data_echo,
        "label_column": a.table.label_column,
        "task": task_of(a.table.task),
        "probe": config,
    });
    let hash = config_hash(&echo);
    log::info!("training on {} rows x {} features", train.len(), train.width());
    let mut model = train_linear_probe(&train, &config).input("training the probe")?;
    model.summary.config_hash = Some(hash.clone());
    let train_metric = model.evaluate(&train).input("scoring the training split")?;
    write_atomic(&a.output, &model.to_bytes())?;
    print_json(&json!({
        "command": "probe-train",
        "output": a.output,
        "task": model.task,
        "n_train": train.len(),
        "features": train.width(),
        "classes": model.classes,
        "iterations": model.summary.iterations,
        "final_loss": model.summary.final_loss,
        "final_learning_rate": model.summary.final_learning_rate,
        "train_metric": train_metric,
        "seed": a.seed,
        "config_hash": hash,
        "config": echo,
    }));
    Ok(())
}

fn probe_eval(a: &ProbeEvalArgs) -> CmdResult<()> {
    let model_bytes = read_file(&a.model)?;
    let model = ProbeModel::from_bytes(&model_bytes).input(a.model.display())?;
    if task_of(a.table.task) != model.task {
        return Err(input_error(format!(
            "--task {:?} does not match the model's task {:?}",
            a.table.task, model.task
        )));
    }
    let (test, test_echo) = load_dataset(
        a.test.as_deref(),
        a.test_embs.as_deref(),
        a.test_labels.as_deref(),
        &a.table,
        Split::Test,
    )?;
    let metric = model.evaluate(&test).input("scoring the test split")?;
    let (baseline, train_echo) = if a.train.is_some() || a.train_embs.is_some() {
        let (train, echo) = load_dataset(
            a.train.as_deref(),
            a.train_embs.as_deref(),
            a.train_labels.as_deref(),
            &a.table,
            Split::Train,
        )?;
        let b = baseline_majority_mean(&train, &test).input("majority/mean baseline")?;
        (Some(b), echo)
    } else {
        (None, Value::Null)
    };
    let echo = json!({
        "command": "probe-eval",
        "model_sha256": sha256_hex(&model_bytes),
        "test": test_echo,
        "baseline_train": train_echo,
        "label_column": a.table.label_column,
    });
    let hash = config_hash(&echo);
    let report = json!({
        "command": "probe-eval",
        "metric": metric.kind,
        "value": metric.value,
        "n": metric.n,
        "baseline": baseline,
        "seed": model.summary.config.seed,
        "model_sha256": sha256_hex(&model_bytes),
        "train_config_hash": model.summary.config_hash,
        "config_hash": hash,
    });
    if let Some(path) = &a.output {
        let mut text = serde_json::to_string_pretty(&report).expect("json values serialize");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    print_json(&report);
    Ok(())
}

fn method_from(meta: Option<&str>) -> Method {
    match meta {
        Some("bow") => Method::Bow,
        Some("softmatch") => Method::Softmatch,
        _ => Method::Sentecon,
    }
}

fn analysis_failure(e: AnalysisError, context: impl std::fmt::Display) -> Failure {
    match e {
        AnalysisError::Encode { homonym, source } => {
            let provider = match &source {
                EncodeError::Embed(_) => true,
                EncodeError::Batch { source, .. } => matches!(**source, EncodeError::Embed(_)),
                _ => false,
            };
            let err = anyhow::Error::from(AnalysisError::Encode { homonym, source }).context(context.to_string());
            if provider {
                Failure::Provider(err)
            } else {
                Failure::Input(err)
            }
        }
        other => Failure::Input(anyhow::Error::from(other).context(context.to_string())),
    }
}

fn analyze_agreement(a: &AgreementArgs) -> CmdResult<()> {
    let fbytes = read_file(&a.features)?;
    let table = read_delimited(BufReader::new(fbytes.as_slice())).input(a.features.display())?;
    let id_col = table.column(&a.id_column).input(a.features.display())?;
    let passthrough = passthrough_columns(&table, &a.features)?;
    let cat_cols: Vec<usize> = if passthrough.is_empty() {
        (0..table.header.len()).filter(|&c| c != id_col).collect()
    } else {
        (passthrough.len()..table.header.len()).collect()
    };
    let categories: Arc<[String]> = cat_cols.iter().map(|&c| table.header[c].clone()).collect();
    let method = method_from(table.meta("method"));
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut reps = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let weights = cat_cols
            .iter()
            .map(|&c| table.float(r, c))
            .collect::<Result<Vec<_>, _>>()
            .input(a.features.display())?;
        ids.push(table.rows[r][id_col].trim().to_string());
        reps.push(Representation::new(method, categories.clone(), weights));
    }
    let abytes = read_file(&a.annotations)?;
    let annotations = parse_annotations(BufReader::new(abytes.as_slice())).input(a.annotations.display())?;
    let report = human_agreement(&ids, &reps, &annotations).map_err(|e| analysis_failure(e, "human agreement"))?;

    let echo = json!({
        "command": "analyze-agreement",
        "features_sha256": sha256_hex(&fbytes),
        "annotations_sha256": sha256_hex(&abytes),
        "id_column": a.id_column,
    });
    let hash = config_hash(&echo);
    let seed = table.meta("seed").map(str::to_string);
    let provider = table.meta("provider").map(str::to_string);
    if let Some(path) = &a.output {
        let mut out = String::new();
        for (k, v) in [
            ("command", "analyze-agreement".to_string()),
            ("version", VERSION.into()),
            ("seed", seed.clone().unwrap_or_else(|| "none".into())),
            ("provider", provider.clone().unwrap_or_else(|| "none".into())),
            ("config_hash", hash.clone()),
            ("mean_r", format_sig(report.mean_r, 6)),
            ("excluded", report.excluded.len().to_string()),
        ] {
            out.push_str(&format!("#{k}={v}\n"));
        }
        out.push_str("id\tr\n");
        for (id, r) in &report.per_sentence {
            out.push_str(&format!("{id}\t{}\n", format_sig(*r, 6)));
        }
        write_atomic(path, out.as_bytes())?;
    }
    print_json(&json!({
        "command": "analyze-agreement",
        "method": method.as_str(),
        "mean_r": report.mean_r,
        "n_scored": report.per_sentence.len(),
        "n_excluded": report.excluded.len(),
        "excluded": report.excluded,
        "seed": seed,
        "provider": provider,
        "config_hash": hash,
    }));
    Ok(())
}

fn analyze_wordsense(a: &WordSenseArgs) -> CmdResult<()> {
    let dict_bytes = read_file(&a.dictionary)?;
    let dict = CategoryDictionary::from_bytes(&dict_bytes).input(a.dictionary.display())?;
    let provider = open_provider(&a.provider)?;
    let sbytes = read_file(&a.sentences)?;
    let kbytes = read_file(&a.keywords)?;
    let rows = parse_sense_sentences(BufReader::new(sbytes.as_slice())).input(a.sentences.display())?;
    let keywords = parse_sense_keywords(BufReader::new(kbytes.as_slice())).input(a.keywords.display())?;
    let data = assemble_sense_data(rows, &keywords).map_err(|e| analysis_failure(e, a.sentences.display()))?;
    let mode = match a.ratio {
        RatioArg::MeanOfSimilarities => RatioMode::MeanOfSimilarities,
        RatioArg::MeanOfRatios => RatioMode::MeanOfRatios,
    };
    let mut reports = Vec::with_capacity(data.len());
    for d in &data {
        log::info!("{}: {} sentences", d.homonym(), d.sentences().len());
        reports.push(
            word_sense_eval(&dict, provider.as_ref(), d, mode)
                .map_err(|e| analysis_failure(e, "word-sense analysis"))?,
        );
    }

    let echo = json!({
        "command": "analyze-wordsense",
        "dictionary_sha256": sha256_hex(&dict_bytes),
        "provider": provider.id(),
        "sentences_sha256": sha256_hex(&sbytes),
        "keywords_sha256": sha256_hex(&kbytes),
        "ratio": mode,
    });
    let hash = config_hash(&echo);
    if let Some(path) = &a.output {
        let mut out = String::new();
        for (k, v) in [
            ("command", "analyze-wordsense".to_string()),
            ("version", VERSION.into()),
            ("seed", dict.provenance().seed.to_string()),
            ("provider", provider.id()),
            ("config_hash", hash.clone()),
            (
                "ratio",
                serde_json::to_value(mode)
                    .expect("enum serializes")
                    .as_str()
                    .unwrap_or("")
                    .to_string(),
            ),
        ] {
            out.push_str(&format!("#{k}={v}\n"));
        }
        out.push_str("homonym\tn_sentences\tmean_matching\tmean_opposing\tratio\tt\tdf\tp\n");
        for r in &reports {
            let (t, df, p) = match &r.t_test {
                Some(t) => (format_sig(t.t, 6), format_sig(t.df, 6), format_sig(t.p, 6)),
                None => ("nan".into(), "nan".into(), "nan".into()),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{t}\t{df}\t{p}\n",
                r.homonym,
                r.n_sentences,
                format_sig(r.mean_matching, 6),
                format_sig(r.mean_opposing, 6),
                format_sig(r.ratio, 6),
            ));
        }
        write_atomic(path, out.as_bytes())?;
    }
    print_json(&json!({
        "command": "analyze-wordsense",
        "ratio_mode": mode,
        "reports": reports,
        "seed": dict.provenance().seed,
        "provider": provider.id(),
        "config_hash": hash,
    }));
    Ok(())
}
