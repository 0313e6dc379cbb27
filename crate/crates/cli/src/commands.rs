use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use uee_core::detect::{events_from_json, events_to_csv, events_to_json};
use uee_core::pipeline::{self, AnalysisConfig, EventAnalytics, ReportTables};
use uee_core::report::summary_table;
use uee_core::synth::{fixture_suite_with, write_corpus, FixtureConfig};
use uee_core::{detect_all, DetectionCriteria, InputFormat, TradeDay, UeeEvent, ValidationReport};

use crate::manifest::{FileRecord, Manifest, Status, SubsetCheck, ValidationCounts};
use crate::{AnalysisArgs, AnalyzeArgs, Command, CriteriaArgs, InputArgs, ReportArgs, RunArgs, SynthArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Detect(a) => detect(&a.input, &a.criteria, &a.out),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Run(a) => run(a),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = if args.small { FixtureConfig::small() } else { FixtureConfig::standard() };
    let mut corpus = fixture_suite_with(args.seed, &config).context("fixture generation failed")?;
    let files = write_corpus(&args.out, &mut corpus)?;
    eprintln!(
        "wrote {} files ({} planted events, {} positives) to {}",
        files.len(),
        corpus.truth.events.len(),
        corpus.truth.count(uee_core::synth::PlantKind::Positive),
        args.out.display()
    );
    Ok(())
}

fn criteria_from(args: &CriteriaArgs) -> Result<Vec<DetectionCriteria>> {
    let durations: BTreeSet<_> = args.max_duration.iter().copied().collect();
    durations
        .into_iter()
        .map(|d| {
            let c = DetectionCriteria {
                threshold: args.threshold,
                min_trades: args.min_trades,
                max_duration: d,
                strict: args.strict_monotonic,
            };
            c.validate()?;
            Ok(c)
        })
        .collect()
}

fn load_format(path: Option<&Path>) -> Result<InputFormat> {
    match path {
        Some(p) => InputFormat::load(p).with_context(|| format!("bad format descriptor {}", p.display())),
        None => Ok(InputFormat::default()),
    }
}

fn load_universe(path: &Path) -> Result<HashSet<String>> {
    Ok(pipeline::read_universe(path)?.into_iter().map(|e| e.symbol).collect())
}

fn write_validation(dir: &Path, stem: &str, report: &ValidationReport, m: &mut Manifest) -> Result<()> {
    let json = dir.join(format!("{stem}.json"));
    let txt = dir.join(format!("{stem}.txt"));
    fs::write(&json, report.to_json() + "\n")?;
    fs::write(&txt, report.summary())?;
    m.record_outputs(dir, &[json, txt]);
    Ok(())
}

fn criterion_dir(out: &Path, c: &DetectionCriteria) -> PathBuf {
    out.join(c.label())
}

fn detect(input: &InputArgs, criteria: &CriteriaArgs, out: &Path) -> Result<()> {
    let criteria = criteria_from(criteria)?;
    let format = load_format(input.format.as_deref())?;
    let mut m = Manifest::new(criteria.clone(), format.clone());
    m.begin(out)?;

    let trade_files = pipeline::input_files(&input.trades)?;
    ensure!(!trade_files.is_empty(), "no trade files found");
    m.trades = FileRecord::all(&trade_files)?;
    let universe = match &input.universe {
        Some(path) => {
            m.universe = Some(FileRecord::of(path)?);
            Some(load_universe(path)?)
        }
        None => None,
    };
    m.save(out)?;

    let (mut days, report) = pipeline::read_trade_files(&trade_files, &format)?;
    if let Some(u) = &universe {
        days.retain(|d| u.contains(&d.symbol));
    }
    m.trade_validation = Some(ValidationCounts::from(&report));
    write_validation(out, "validation_trades", &report, &mut m)?;

    let mut sets: Vec<(String, Vec<UeeEvent>)> = Vec::new();
    for c in &criteria {
        let events = detect_all(&days, c);
        let dir = criterion_dir(out, c);
        fs::create_dir_all(&dir)?;
        let csv = dir.join("events.csv");
        let json = dir.join("events.json");
        fs::write(&csv, events_to_csv(&events, c))?;
        fs::write(&json, events_to_json(&events, c))?;
        m.record_outputs(out, &[csv, json]);
        m.events.insert(c.label(), events.len() as u64);
        sets.push((c.label(), events));
    }

    // Criteria are sorted by duration, so each earlier set should nest in each later one.
    for (i, (narrow, a)) in sets.iter().enumerate() {
        for (wide, b) in &sets[i + 1..] {
            let wide_keys: HashSet<_> = b.iter().map(UeeEvent::key).collect();
            let narrow_keys: HashSet<_> = a.iter().map(UeeEvent::key).collect();
            m.subset_checks.push(SubsetCheck {
                narrow: narrow.clone(),
                wide: wide.clone(),
                holds: narrow_keys.is_subset(&wide_keys),
                additional: wide_keys.difference(&narrow_keys).count() as u64,
            });
        }
    }

    let summary = summary_table(sets.iter().map(|(l, e)| (l.as_str(), e.as_slice())));
    let summary_path = out.join("summary.csv");
    fs::write(&summary_path, summary.to_csv())?;
    m.record_outputs(out, &[summary_path]);

    m.detected = true;
    m.finish(out)?;
    for (label, events) in &sets {
        eprintln!("{label}: {} events", events.len());
    }
    Ok(())
}

fn analysis_config(args: &AnalysisArgs) -> AnalysisConfig {
    let mut config = AnalysisConfig { n_max: args.nmax, skip_quotes: args.skip_quotes, ..AnalysisConfig::default() };
    config.spread.half_width = args.window;
    config
}

fn load_events(dir: &Path) -> Result<Vec<UeeEvent>> {
    let path = dir.join("events.json");
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(events_from_json(&text).with_context(|| format!("bad event file {}", path.display()))?.events)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    analyze_stage(&args.out, &args.trades, &args.analysis)
}

fn analyze_stage(out: &Path, trades: &[PathBuf], args: &AnalysisArgs) -> Result<()> {
    let mut m = Manifest::load(out)?;
    ensure!(
        m.detected && !m.criteria.is_empty(),
        "{} does not hold a completed detection run",
        out.display()
    );
    ensure!(
        args.skip_quotes || !args.quotes.is_empty(),
        "quote analytics need --quotes; pass --skip-quotes to run without them"
    );

    // Trade inputs must be byte-identical to those detection ran on.
    let recorded: Vec<PathBuf> = m.trades.iter().map(|r| PathBuf::from(&r.path)).collect();
    let current = FileRecord::all(&recorded)?;
    if current != m.trades {
        bail!("trade inputs changed since detection; rerun `ueescan detect`");
    }
    if !trades.is_empty() {
        let given = FileRecord::all(&pipeline::input_files(trades)?)?;
        let hashes = |v: &[FileRecord]| v.iter().map(|r| r.sha256.clone()).collect::<Vec<_>>();
        ensure!(hashes(&given) == hashes(&m.trades), "--trades differ from the inputs recorded by detection");
    }
    let universe = match &m.universe {
        Some(rec) => {
            let path = PathBuf::from(&rec.path);
            ensure!(FileRecord::of(&path)? == *rec, "universe file changed since detection");
            Some(load_universe(&path)?)
        }
        None => None,
    };

    let config = analysis_config(args);
    let quote_files = if config.skip_quotes { Vec::new() } else { pipeline::input_files(&args.quotes)? };
    m.analysis = Some(config);
    m.quotes = FileRecord::all(&quote_files)?;
    m.begin(out)?;

    let (mut days, _) = pipeline::read_trade_files(&recorded, &m.format)?;
    let quotes = if config.skip_quotes {
        None
    } else {
        let (mut q, report) = pipeline::read_quote_files(&quote_files, &m.format)?;
        if let Some(u) = &universe {
            q.retain(|d| u.contains(&d.symbol));
        }
        m.quote_validation = Some(ValidationCounts::from(&report));
        write_validation(out, "validation_quotes", &report, &mut m)?;
        Some(q)
    };
    if let Some(u) = &universe {
        days.retain(|d: &TradeDay| u.contains(&d.symbol));
    }

    for c in m.criteria.clone() {
        let dir = criterion_dir(out, &c);
        let events = load_events(&dir)?;
        let analysis = pipeline::analyze(&events, &days, quotes.as_deref(), &config)?;
        let written = analysis.write(&dir)?;
        m.record_outputs(out, &written);
        let d = &analysis.diagnostics;
        eprintln!(
            "{}: {} events analysed, {} without quote move, {} incomplete spread windows",
            c.label(),
            d.events,
            d.no_quote_move,
            d.incomplete_windows
        );
    }
    m.finish(out)
}

fn report(args: ReportArgs) -> Result<()> {
    let out = &args.out;
    let mut m = Manifest::load(out)?;
    ensure!(m.status == Status::Complete, "{} does not hold a completed run", out.display());
    let config = m.analysis.unwrap_or(AnalysisConfig { skip_quotes: true, ..AnalysisConfig::default() });
    m.begin(out)?;
    for c in m.criteria.clone() {
        let dir = criterion_dir(out, &c);
        let events = load_events(&dir)?;
        let analytics: Option<Vec<EventAnalytics>> = if m.analysis.is_some() && !config.skip_quotes {
            let path = dir.join("event_analytics.json");
            let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            let a: Vec<EventAnalytics> = serde_json::from_str(&text).with_context(|| format!("bad {}", path.display()))?;
            ensure!(a.len() == events.len(), "{} does not match events.json", path.display());
            Some(a)
        } else {
            None
        };
        let tables = ReportTables::build(&events, analytics.as_deref(), &config);
        let written = tables.write(&dir)?;
        m.record_outputs(out, &written);
    }
    m.finish(out)
}

fn run(args: RunArgs) -> Result<()> {
    detect(&args.input, &args.criteria, &args.out)?;
    analyze_stage(&args.out, &[], &args.analysis)
}
