use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use serde_json::json;

use diagscore::document::{parse_document, InputFormat};
use diagscore::judge::{JudgeConfig, JudgeGateway};
use diagscore::pipeline::{records_from_jsonl, EvalRequest, Evaluator, ModeFlags};
use diagscore::registry::{CohortSplit, CorpusItem, Registry, RegistryStore};
use diagscore::sampler::{monte_carlo_validate, sample_cohort, CorpusEntry};
use diagscore::scoring::{
    dqs_delta_surface, fit_season_params, linspace, summarize, SeasonParams, StepPolicy, TraceLog,
};
use diagscore::Mode;

use crate::config::{CliConfig, FlagValues};
use crate::io::{emit, jsonl_header, read_corpus, read_items, resolve_weights, write_atomic};
use crate::{
    Cli, Command, IngestArgs, InitArgs, McArgs, ReportArgs, SampleArgs, ScoreArgs, SeasonCommand,
    SurfaceArgs,
};

/// An error with its process exit code.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: 1,
            error: e.into(),
        }
    }
}

fn external(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: Cli) -> CmdResult {
    let (judge_endpoint, judge_model, judge_runs, weights) = match &cli.command {
        Command::Score(a) => (
            a.judge_endpoint.clone(),
            a.judge_model.clone(),
            a.judge_runs,
            a.weights.clone(),
        ),
        Command::Report(a) => (None, None, None, a.weights.clone()),
        _ => (None, None, None, None),
    };
    let flags = FlagValues {
        config: cli.global.config.clone(),
        registry: cli.global.registry.clone(),
        cache_dir: cli.global.cache_dir.clone(),
        weights,
        log_level: cli.global.log_level.clone(),
        judge_endpoint,
        judge_model,
        judge_runs,
    };
    let cwd = std::env::current_dir()?;
    let cfg = CliConfig::resolve(&flags, |k| std::env::var(k).ok(), &cwd)?;
    let _ = env_logger::Builder::new()
        .parse_filters(&cfg.log_level)
        .try_init();
    if cli.global.verbose {
        eprintln!("effective config: {}", serde_json::to_string(&cfg)?);
    }
    match cli.command {
        Command::Init(a) => cmd_init(&cfg, a),
        Command::Ingest(a) => cmd_ingest(&cfg, a),
        Command::Score(a) => cmd_score(&cfg, a),
        Command::Sample(a) => cmd_sample(&cfg, a),
        Command::Mc(a) => cmd_mc(&cfg, a),
        Command::Report(a) => cmd_report(&cfg, a),
        Command::DqsSurface(a) => cmd_surface(a),
        Command::Season(s) => cmd_season(&cfg, s),
    }
}

fn load_registry(cfg: &CliConfig) -> anyhow::Result<(RegistryStore, Registry)> {
    let store = RegistryStore::new(&cfg.registry);
    if !store.exists() {
        bail!(
            "no registry at {} (run `diagscore init` first)",
            cfg.registry.display()
        );
    }
    let reg = store.load()?;
    Ok((store, reg))
}

fn cmd_init(cfg: &CliConfig, a: InitArgs) -> CmdResult {
    let store = RegistryStore::new(&cfg.registry);
    if store.exists() {
        return Err(anyhow!("registry already exists at {}", cfg.registry.display()).into());
    }
    let mut items = Vec::new();
    for p in &a.items {
        items.extend(read_items(p, None)?);
    }
    let count = items.len();
    let reg = Registry::bootstrap(a.season.clone(), a.seed, items)?;
    store.save(&reg)?;
    println!(
        "initialised season {} with {count} active items at {}",
        a.season,
        cfg.registry.display()
    );
    Ok(())
}

fn cmd_ingest(cfg: &CliConfig, a: IngestArgs) -> CmdResult {
    let (store, mut reg) = load_registry(cfg)?;
    let mut accepted: Vec<CorpusItem> = Vec::new();
    let mut rejected = 0usize;
    for path in &a.paths {
        let items = match read_items(path, a.format.as_deref()) {
            Ok(items) => items,
            Err(e) => {
                println!("rejected {}: {e:#}", path.display());
                rejected += 1;
                continue;
            }
        };
        for item in items {
            let verdict = if a.mode.is_some_and(|m| m != item.mode) {
                Err(format!("mode {} does not match --mode", item.mode))
            } else if reg.item(&item.id).is_some() || accepted.iter().any(|x| x.id == item.id) {
                Err("duplicate id".to_string())
            } else {
                item.validate().map_err(|e| e.to_string())
            };
            match verdict {
                Ok(()) => {
                    println!("ok {}", item.id);
                    accepted.push(item);
                }
                Err(reason) => {
                    println!("rejected {}: {reason}", item.id);
                    rejected += 1;
                }
            }
        }
    }
    if rejected > 0 && (a.strict || accepted.is_empty()) {
        return Err(anyhow!("{rejected} item(s) rejected; nothing staged").into());
    }
    let staged = accepted.len();
    let season = reg.stage_items(accepted)?;
    println!(
        "staged {staged} item(s) into season {} (staging pool: {})",
        season.season_id,
        season.staging_pool.len()
    );
    store.save(&reg)?;
    Ok(())
}

fn cmd_score(cfg: &CliConfig, a: ScoreArgs) -> CmdResult {
    let item: CorpusItem = if Path::new(&a.item).is_file() {
        let mut items = read_items(Path::new(&a.item), None)?;
        if items.len() != 1 {
            return Err(anyhow!("{} must hold exactly one item", a.item).into());
        }
        items.remove(0)
    } else {
        let (_, reg) = load_registry(cfg)?;
        reg.item(&a.item)
            .cloned()
            .ok_or_else(|| anyhow!("item '{}' is neither a file nor a registry id", a.item))?
    };
    let format = match &a.format {
        Some(f) => f.parse::<InputFormat>().map_err(|e| anyhow!(e))?,
        None => a
            .doc
            .extension()
            .and_then(|e| e.to_str())
            .and_then(InputFormat::from_extension)
            .ok_or_else(|| {
                anyhow!(
                    "cannot infer the format of {}; pass --format",
                    a.doc.display()
                )
            })?,
    };
    let bytes = fs::read(&a.doc).with_context(|| format!("reading {}", a.doc.display()))?;
    let document =
        parse_document(&bytes, format).with_context(|| format!("parsing {}", a.doc.display()))?;
    let mut policy = StepPolicy::default();
    policy.tools.extend(a.step_tools.iter().cloned());
    let trace = match &a.trace {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TraceLog::from_jsonl(&text, policy)?
        }
        None => {
            eprintln!("warning: no trace given; step count is 0");
            TraceLog::new(Vec::new(), policy)
        }
    };
    let params = match (a.k, a.r) {
        (Some(k), Some(r)) => SeasonParams::new("adhoc", k, r)?.freeze(),
        (None, None) => {
            let (_, reg) = load_registry(cfg)?;
            reg.current()
                .params
                .get(&item.mode)
                .cloned()
                .ok_or_else(|| anyhow!("season {} has no frozen {} parameters; pass --k and --r or run `season freeze`", reg.current().season_id, item.mode))?
        }
        _ => return Err(anyhow!("--k and --r must be given together").into()),
    };
    let flags = ModeFlags {
        perceptual: a.perceptual.unwrap_or(a.mode),
        blank: a.blank.unwrap_or(a.mode),
    };
    let weights = resolve_weights(&cfg.weights)?;
    let evaluator = if flags == ModeFlags::default() {
        Evaluator::deterministic()
    } else {
        let endpoint = cfg.judge_endpoint.clone().ok_or_else(|| {
            anyhow!(
                "judge mode needs an endpoint (--judge-endpoint, config file or JUDGE_ENDPOINT)"
            )
        })?;
        let mut jc = JudgeConfig::new(endpoint, cfg.judge_model.clone(), cfg.cache_dir.clone());
        jc.api_key = cfg.judge_api_key.clone();
        jc.runs = cfg.judge_runs;
        jc.temperature = cfg.judge_temperature;
        jc.timeout = Duration::from_secs(cfg.judge_timeout_secs);
        Evaluator::with_judge(JudgeGateway::http(jc)?)
    };
    let req = EvalRequest {
        item,
        system: a.system.clone(),
        document,
        trace,
        flags,
        weights,
    };
    let detail = match evaluator.evaluate_detailed(&req, &params) {
        Ok(d) => d,
        Err(e) if e.is_external() => return Err(external(e.into())),
        Err(e) => return Err(e.into()),
    };
    let r = &detail.record;
    let m = &r.metrics;
    println!("task      P     R     Design Blank Read  Align Steps  s     DQS");
    println!(
        "{:<9} {:.3} {:.3} {:.3}  {:.3} {:.3} {:.3} {:<6} {:.4} {:.4}",
        r.task_id,
        m.precision,
        m.recall,
        m.design,
        m.blank,
        m.readability,
        m.align,
        r.n,
        r.s,
        r.dqs
    );
    if let Some(out) = &a.out {
        let doc = json!({
            "tool_version": diagscore::TOOL_VERSION,
            "schema_version": diagscore::SCHEMA_VERSION,
            "record": r,
            "detail": {
                "design": detail.design,
                "blank": detail.blank,
                "readability": detail.readability,
                "required": detail.required,
                "generated": detail.generated,
            }
        });
        write_atomic(out, (serde_json::to_string_pretty(&doc)? + "\n").as_bytes())?;
    }
    if let Some(path) = &a.append {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        if fresh {
            f.write_all(jsonl_header().as_bytes())?;
        }
        f.write_all((serde_json::to_string(r)? + "\n").as_bytes())?;
    }
    Ok(())
}

fn corpus_for(
    cfg: &CliConfig,
    args: &crate::CorpusArgs,
    mode: Mode,
) -> anyhow::Result<Vec<CorpusEntry>> {
    match read_corpus(args, mode)? {
        Some(c) => Ok(c),
        None => {
            let (_, reg) = load_registry(cfg)?;
            Ok(reg.active_corpus(mode))
        }
    }
}

fn cmd_sample(cfg: &CliConfig, a: SampleArgs) -> CmdResult {
    let corpus = corpus_for(cfg, &a.corpus, a.mode)?;
    let res = sample_cohort(&corpus, a.n, a.mode, a.seed)?;
    let text = if a.json {
        serde_json::to_string_pretty(&json!({
            "tool_version": diagscore::TOOL_VERSION,
            "schema_version": diagscore::SCHEMA_VERSION,
            "mode": a.mode,
            "cohort": res,
        }))? + "\n"
    } else {
        let diff: BTreeMap<&str, u32> = corpus
            .iter()
            .map(|e| (e.id.as_str(), e.difficulty))
            .collect();
        let mut s = format!(
            "# {} schema={} mode={} n={} seed={} mu_s={} sigma_s={} J={} epsilon={} converged={}\nitem_id,difficulty\n",
            diagscore::TOOL_VERSION,
            diagscore::SCHEMA_VERSION,
            a.mode,
            a.n,
            res.seed_used,
            res.mu_s,
            res.sigma_s,
            res.j,
            res.epsilon,
            res.converged
        );
        for id in &res.item_ids {
            s.push_str(&format!("{id},{}\n", diff[id.as_str()]));
        }
        s
    };
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

fn cmd_mc(cfg: &CliConfig, a: McArgs) -> CmdResult {
    let corpus = corpus_for(cfg, &a.corpus, a.mode)?;
    let report = monte_carlo_validate(&corpus, a.mode, &a.n_list, a.repeats, a.seed)?;
    emit(a.out.as_deref(), &report.to_csv())?;
    Ok(())
}

fn cmd_report(cfg: &CliConfig, a: ReportArgs) -> CmdResult {
    let text = fs::read_to_string(&a.records)
        .with_context(|| format!("reading {}", a.records.display()))?;
    let mut records =
        records_from_jsonl(&text).with_context(|| format!("parsing {}", a.records.display()))?;
    if records.is_empty() {
        return Err(anyhow!("{} holds no records", a.records.display()).into());
    }
    if a.weights.is_some() {
        let w = resolve_weights(&cfg.weights)?;
        for r in &mut records {
            r.s = diagscore::scoring::base_score(&r.metrics, &w)?;
            r.weights_id = w.id.clone();
        }
        // Re-fit per mode so DQS stays consistent with the new base scores.
        let mut by_mode = BTreeMap::new();
        for mode in Mode::ALL {
            let block: Vec<_> = records.iter().filter(|r| r.mode == mode).cloned().collect();
            if !block.is_empty() {
                by_mode.insert(mode, fit_season_params("reweighted", &block)?);
            }
        }
        for r in &mut records {
            r.dqs = diagscore::scoring::dqs(r.s, r.n, &by_mode[&r.mode])?;
        }
    }
    let summary = summarize(&records);
    let text = match a.format.as_str() {
        "csv" => summary.to_csv(),
        "json" => summary.to_json() + "\n",
        _ => summary.to_table(),
    };
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

fn cmd_surface(a: SurfaceArgs) -> CmdResult {
    let n_max = a.n_max.unwrap_or(4.0 * a.k);
    let surf = dqs_delta_surface(
        a.k,
        a.r,
        &linspace(0.0, 1.0, a.s_points),
        &linspace(a.n_min, n_max, a.n_points),
    )?;
    write_atomic(&a.out, surf.to_csv().as_bytes())?;
    println!(
        "wrote {}x{} grid to {}",
        surf.s_grid.len(),
        surf.n_grid.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_season(cfg: &CliConfig, cmd: SeasonCommand) -> CmdResult {
    let (store, mut reg) = load_registry(cfg)?;
    match cmd {
        SeasonCommand::Freeze { records, mode } => {
            let text = fs::read_to_string(&records)
                .with_context(|| format!("reading {}", records.display()))?;
            let recs = records_from_jsonl(&text)?;
            let season_id = reg.current().season_id.clone();
            let modes: Vec<Mode> = mode.map_or(Mode::ALL.to_vec(), |m| vec![m]);
            let mut frozen = 0;
            for m in modes {
                let block: Vec<_> = recs.iter().filter(|r| r.mode == m).cloned().collect();
                if block.is_empty() {
                    continue;
                }
                let p = fit_season_params(&season_id, &block)?;
                println!("{m}: K={:.4} r={:.4} ({} records)", p.k, p.r, block.len());
                reg.freeze_params(m, p)?;
                frozen += 1;
            }
            if frozen == 0 {
                return Err(anyhow!("no records to fit").into());
            }
        }
        SeasonCommand::Precommit { months, t2i, ti2i } => {
            let season = reg.precommit_cohorts(months, CohortSplit { t2i, ti2i })?;
            println!(
                "season {}: {} monthly cohorts committed",
                season.season_id,
                season.committed_cohorts.len()
            );
        }
        SeasonCommand::Advance { id } => {
            let season = reg.advance_season(id)?;
            println!(
                "opened season {} with {} active items",
                season.season_id,
                season.active_pool.len()
            );
        }
        SeasonCommand::Show => {
            let s = reg.current();
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "season_id": s.season_id,
                    "master_seed": s.master_seed,
                    "active": s.active_pool.len(),
                    "staging": s.staging_pool.len(),
                    "months_committed": s.committed_cohorts.len(),
                    "params": s.params,
                }))?
            );
            return Ok(());
        }
    }
    store.save(&reg)?;
    Ok(())
}
