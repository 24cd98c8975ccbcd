use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;

use super::args::{
    beta_of, check_combine, method_of, parse_grid, policy_of, CombineArg, MethodArg, ReportArgs, RunArgs,
};
use super::CliError;
use crate::dump::{parse_dump, read_dump, warnings, DumpError, RawSentence, SentenceDump};
use crate::eval::{
    evaluate_run, parse_multiged_tsv, render_table, tune_default, tune_threshold, write_predictions,
    EvalError, Label, LabeledSentence, ReportRow, Summary, SweepResult, TsvError,
};
use crate::measure::{oddballness_bounds, GFunction};
use crate::scoring::{
    apply_threshold, combine_sentences, score_corpus, AggregationPolicy, Method, ScoreRecord, SentenceScores,
};

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn read_dump_file(path: &Path) -> Result<Vec<SentenceDump>, CliError> {
    read_dump(open(path)?).map_err(|e| match e {
        DumpError::Io(source) => CliError::io(path, source),
        other => CliError::Failed(format!("{}: {other}", path.display())),
    })
}

fn read_gold(path: &Path) -> Result<Vec<LabeledSentence>, CliError> {
    parse_multiged_tsv(open(path)?).map_err(|e| match e {
        TsvError::Io(source) => CliError::io(path, source),
        other => CliError::Failed(format!("{}: {other}", path.display())),
    })
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::LengthMismatch { .. } => CliError::Failed(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

pub fn validate(path: &Path) -> Result<u8, CliError> {
    let (mut sentences, mut tokens, mut problems, mut exact) = (0usize, 0usize, 0usize, 0usize);
    for item in parse_dump(open(path)?) {
        match item {
            Ok(sentence) => {
                sentences += 1;
                tokens += sentence.tokens.len();
                for w in warnings(&RawSentence::from(&sentence)) {
                    println!("warning: {w}");
                }
                exact += sentence
                    .tokens
                    .iter()
                    .filter(|t| {
                        oddballness_bounds(&t.dist, t.p_actual, GFunction::Identity)
                            .map(|b| b.exact)
                            .unwrap_or(false)
                    })
                    .count();
            }
            Err(DumpError::Io(source)) => return Err(CliError::io(path, source)),
            Err(DumpError::Validation { line, violations }) => {
                problems += violations.len();
                for v in violations {
                    println!("line {line}: {v}");
                }
            }
            Err(e) => {
                problems += 1;
                println!("{e}");
            }
        }
    }
    let exactness = if tokens == 0 {
        1.0
    } else {
        exact as f64 / tokens as f64
    };
    println!(
        "{}: {sentences} valid sentences, {tokens} tokens, {problems} violations, oddballness exactness {exactness:.4}",
        path.display()
    );
    Ok(u8::from(problems > 0))
}

/// Scores one split, optionally combined with a second model's dump.
fn score_split(
    dump: &Path,
    dump2: Option<&Path>,
    combine: Option<CombineArg>,
    gold: Option<&[LabeledSentence]>,
    method: Method,
    policy: AggregationPolicy,
) -> Result<(Vec<SentenceScores>, usize), CliError> {
    match (dump2, combine) {
        (Some(_), None) => return Err(CliError::Usage("a second dump needs --combine".into())),
        (None, Some(_)) => return Err(CliError::Usage("--combine needs a second dump".into())),
        (Some(_), Some(c)) => check_combine(method, c)?,
        (None, None) => {}
    }
    let words: Option<Vec<Vec<String>>> = gold.map(|g| {
        g.iter()
            .map(|s| s.tokens.iter().map(|t| t.surface.clone()).collect())
            .collect()
    });

    let mut depth = 0;
    let mut score_one = |path: &Path| -> Result<Vec<SentenceScores>, CliError> {
        let dumps = read_dump_file(path)?;
        if let Some(g) = gold {
            if g.len() != dumps.len() {
                return Err(CliError::Failed(format!(
                    "{}: {} sentences but the gold file has {}",
                    path.display(),
                    dumps.len(),
                    g.len()
                )));
            }
        }
        depth = dumps.iter().map(|d| d.meta.k).fold(depth, usize::max);
        score_corpus(&dumps, words.as_deref(), method, policy)
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
    };

    let first = score_one(dump)?;
    let scored = match dump2 {
        None => first,
        Some(path) => {
            let second = score_one(path)?;
            if second.len() != first.len() {
                return Err(CliError::Failed(format!(
                    "{} has {} sentences, {} has {}",
                    dump.display(),
                    first.len(),
                    path.display(),
                    second.len()
                )));
            }
            first
                .iter()
                .zip(&second)
                .map(|(a, b)| combine_sentences(a, b, method))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Failed(e.to_string()))?
        }
    };
    Ok((scored, depth))
}

fn flatten(scored: &[SentenceScores], gold: &[LabeledSentence]) -> (Vec<f64>, Vec<Label>) {
    let scores = scored
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.score))
        .collect();
    let labels = gold.iter().flat_map(|s| s.labels()).collect();
    (scores, labels)
}

fn run_method(args: &RunArgs) -> Result<Method, CliError> {
    Ok(method_of(*require(&args.method, "method")?, args.g))
}

fn exactness(scored: &[SentenceScores]) -> f64 {
    let total: usize = scored.iter().map(|s| s.total_records).sum();
    let exact: usize = scored.iter().map(|s| s.exact_records).sum();
    if total == 0 {
        1.0
    } else {
        exact as f64 / total as f64
    }
}

pub fn score(args: RunArgs) -> Result<u8, CliError> {
    let method = run_method(&args)?;
    if args.grid.is_some() {
        return Err(CliError::Usage("score takes --threshold, not --grid".into()));
    }
    let gold = args.gold.as_deref().map(read_gold).transpose()?;
    let (mut scored, _) = score_split(
        require(&args.dump, "dump")?,
        args.dump2.as_deref(),
        args.combine,
        gold.as_deref(),
        method,
        policy_of(args.agg),
    )?;
    if let Some(threshold) = args.threshold {
        method
            .check_threshold(threshold)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        for s in &mut scored {
            s.tokens = apply_threshold(&s.tokens, method, threshold).expect("checked threshold");
        }
    }
    let mut out = Vec::new();
    for s in &scored {
        serde_json::to_writer(&mut out, &ScoreRecord::from(s)).expect("serializable");
        out.push(b'\n');
    }
    write_to(args.out.as_deref(), &out)?;
    let tokens: usize = scored.iter().map(|s| s.tokens.len()).sum();
    eprintln!(
        "scored {} sentences, {tokens} dataset tokens with {method}; exactness {:.4}",
        scored.len(),
        exactness(&scored)
    );
    Ok(0)
}

fn tune_split(
    scores: &[f64],
    labels: &[Label],
    method: Method,
    grid: Option<Vec<f64>>,
    depth: usize,
    beta: f64,
) -> Result<SweepResult, CliError> {
    match grid {
        Some(grid) => tune_threshold(scores, labels, method, &grid, beta),
        None => tune_default(scores, labels, method, depth, beta),
    }
    .map_err(eval_error)
}

pub fn tune(args: RunArgs) -> Result<u8, CliError> {
    let method = run_method(&args)?;
    if args.threshold.is_some() {
        return Err(CliError::Usage("tune takes --grid, not --threshold".into()));
    }
    let beta = beta_of(args.beta)?;
    let grid = parse_grid(args.grid.as_deref().unwrap_or("default"))?;
    let gold = read_gold(require(&args.gold, "gold")?)?;
    let (scored, depth) = score_split(
        require(&args.dump, "dump")?,
        args.dump2.as_deref(),
        args.combine,
        Some(&gold),
        method,
        policy_of(args.agg),
    )?;
    let (scores, labels) = flatten(&scored, &gold);
    let sweep = tune_split(&scores, &labels, method, grid, depth, beta)?;
    write_to(args.out.as_deref(), &to_json(&sweep))?;
    let best = sweep.best();
    eprintln!(
        "{method}: best threshold {} over {} points, F{beta} {:.2} (TP {}, FP {}, FN {}){}",
        sweep.best_threshold,
        sweep.grid.len(),
        100.0 * sweep.best_f,
        best.result.true_positives,
        best.result.false_positives,
        best.result.false_negatives,
        if sweep.degenerate {
            "; gold has no incorrect tokens"
        } else {
            ""
        }
    );
    Ok(0)
}

pub fn eval(args: RunArgs) -> Result<u8, CliError> {
    let method = run_method(&args)?;
    let beta = beta_of(args.beta)?;
    if args.grid.is_some() {
        return Err(CliError::Usage(
            "eval takes --threshold or --sweep, not --grid".into(),
        ));
    }
    let (threshold, dev) = match (args.threshold, &args.sweep) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --threshold or --sweep".into())),
        (None, None) => return Err(CliError::Usage("missing --threshold or --sweep".into())),
        (Some(t), None) => (t, None),
        (None, Some(path)) => {
            let sweep: SweepResult = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
            if sweep.method != method.to_string() {
                return Err(CliError::Usage(format!(
                    "{} was tuned for {}, not {method}",
                    path.display(),
                    sweep.method
                )));
            }
            (sweep.best_threshold, Some(sweep.best().result))
        }
    };
    method
        .check_threshold(threshold)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let gold = read_gold(require(&args.gold, "gold")?)?;
    let (scored, _) = score_split(
        require(&args.dump, "dump")?,
        args.dump2.as_deref(),
        args.combine,
        Some(&gold),
        method,
        policy_of(args.agg),
    )?;
    let (scores, labels) = flatten(&scored, &gold);
    let test = evaluate_run(&scores, &labels, threshold, method, beta).map_err(eval_error)?;

    let rows = [ReportRow {
        method,
        threshold,
        dev,
        test: Some(test),
    }];
    let table = render_table(&rows, beta);
    print!("{table}");
    if let Some(path) = &args.table {
        write_to(Some(path), table.as_bytes())?;
    }
    if let Some(path) = &args.out {
        write_to(Some(path), &to_json(&Summary::new(&rows, beta)))?;
    }
    if let Some(path) = &args.predictions {
        let flags: Vec<Vec<bool>> = scored
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .map(|t| method.flags(t.score, threshold))
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        write_predictions(&gold, &flags, &mut out).map_err(|e| CliError::io(path, e))?;
        write_to(Some(path), &out)?;
    }
    Ok(0)
}

pub fn report(args: ReportArgs) -> Result<u8, CliError> {
    let beta = beta_of(args.beta)?;
    let policy = policy_of(args.agg);
    let dev_gold = read_gold(require(&args.dev_gold, "dev-gold")?)?;
    let test_gold = read_gold(require(&args.test_gold, "test-gold")?)?;
    if args.dev_dump2.is_some() != args.test_dump2.is_some() {
        return Err(CliError::Usage("--dev-dump2 and --test-dump2 go together".into()));
    }
    let combining = args.dev_dump2.is_some();
    match (args.combine, combining) {
        (None, true) => return Err(CliError::Usage("second dumps need --combine".into())),
        (Some(_), false) => {
            return Err(CliError::Usage(
                "--combine needs --dev-dump2 and --test-dump2".into(),
            ))
        }
        _ => {}
    }

    let methods = args
        .methods
        .clone()
        .unwrap_or_else(|| vec![MethodArg::Topk, MethodArg::Probability, MethodArg::Oddballness]);
    let mut rows = Vec::new();
    for m in methods {
        let method = method_of(m, args.g);
        let combine_as = if combining {
            let c = args.combine.unwrap_or(CombineArg::Auto);
            if check_combine(method, c).is_err() {
                eprintln!("skipping {method}: not combinable with --combine {c:?}");
                continue;
            }
            Some(c)
        } else {
            None
        };
        let (dev_scored, depth) = score_split(
            require(&args.dev_dump, "dev-dump")?,
            args.dev_dump2.as_deref(),
            combine_as,
            Some(&dev_gold),
            method,
            policy,
        )?;
        let (scores, labels) = flatten(&dev_scored, &dev_gold);
        let sweep = tune_split(&scores, &labels, method, None, depth, beta)?;

        let (test_scored, _) = score_split(
            require(&args.test_dump, "test-dump")?,
            args.test_dump2.as_deref(),
            combine_as,
            Some(&test_gold),
            method,
            policy,
        )?;
        let (scores, labels) = flatten(&test_scored, &test_gold);
        let test = evaluate_run(&scores, &labels, sweep.best_threshold, method, beta).map_err(eval_error)?;
        rows.push(ReportRow {
            method,
            threshold: sweep.best_threshold,
            dev: Some(sweep.best().result),
            test: Some(test),
        });
    }

    let table = render_table(&rows, beta);
    print!("{table}");
    let summary = Summary::new(&rows, beta);
    match &summary.ordinal {
        Some(c) if c.holds => println!("ordinal check: {}", c.message),
        Some(c) => println!("warning: ordinal check does not hold: {}", c.message),
        None => {}
    }
    if let Some(path) = &args.table {
        write_to(Some(path), table.as_bytes())?;
    }
    if let Some(path) = &args.out {
        write_to(Some(path), &to_json(&summary))?;
    }
    Ok(0)
}
