//! Subcommand implementations. Every command reads its inputs, writes its
//! artifacts under the output directory and finishes with a run manifest.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hjd_core::ablation::{
    compare_to_target, estimates_to_map, load_distribution_file, metric_report_tsv, report_tsv, run_ablation,
    AblationRow, AblationSpec, Direction, ExcludedInstance, FtBlock, MetricReport,
};
use hjd_core::backend::{BackendSettings, LlmClient, ResponseCache, RetryPolicy};
use hjd_core::dataset::{
    load_explanations, load_instances, load_label_records, load_labeled_instances, read_jsonl, split_dev_test,
    to_jsonl, NliInstance,
};
use hjd_core::distribution::LabelDistribution;
use hjd_core::estimator::{estimate_batch, EstimatorConfig, IncompleteInstance};
use hjd_core::explanation::{ExplanationPool, ExplanationSet};
use hjd_core::generation::generate_explanations;
use hjd_core::label::NliLabel;
use hjd_core::proxy::{
    evaluate_against_reference, evaluate_single_label, soft_corpus, train_soft, F1Target, ProxyClassifier,
};
use hjd_core::selection::{
    apply_validation_replacement, human_sets, select, Preference, ReplacementKind, ReplacementStrategy, SelectionSpec,
    SelectionStrategy, ValidationRecord,
};
use hjd_core::variability::{mean_report, pairwise_variability, VariabilityConfig, VariabilityReport};
use serde::Serialize;

use crate::args::{
    AblateArgs, Cli, Command, EstimateArgs, EvalProxyArgs, EvaluateArgs, ExportTernaryArgs, GenerateArgs, GlobalArgs,
    SelectArgs, TrainProxyArgs, VariabilityArgs,
};
use crate::config::{validate_config, RunConfig};
use crate::error::CliError;
use crate::manifest::{write_manifest, write_text, Record};
use crate::ternary::{ternary_csv, ternary_svg};

/// Config file (if any) with command-line flags applied on top.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(cache) = &global.cache {
        cfg.paths.cache = Some(cache.clone());
    }
    if let Some(kind) = global.backend {
        cfg.backend.kind = Some(kind);
    }
    if let Some(out) = &global.out {
        cfg.paths.out_dir = out.clone();
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    let diagnostics = validate_config(&cfg);
    if let Command::CheckConfig = cli.command {
        for d in &diagnostics {
            println!("{d}");
        }
        if diagnostics.is_empty() {
            println!("config ok");
        }
    }
    if !diagnostics.is_empty() {
        let joined: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(CliError::Config(joined.join("; ")));
    }
    Context::new(cfg).execute(&cli.command).map(|_| ())
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn strategy_name(s: SelectionStrategy) -> &'static str {
    match s {
        SelectionStrategy::LabelFree => "label_free",
        SelectionStrategy::LabelGuided => "label_guided",
    }
}

fn replacement_name(kind: ReplacementKind, pref: Preference) -> String {
    let k = match kind {
        ReplacementKind::Greedy => "greedy",
        ReplacementKind::Representative => "representative",
    };
    let p = match pref {
        Preference::Preferred => "preferred",
        Preference::Unpreferred => "unpreferred",
    };
    format!("{k}_{p}")
}

#[derive(Debug, Serialize)]
struct Failure<'a> {
    uid: &'a str,
    reason: String,
}

#[derive(Debug, Serialize)]
struct AblationOutput<'a> {
    rows: &'a [AblationRow],
    excluded: &'a BTreeMap<String, Vec<ExcludedInstance>>,
}

#[derive(Debug, Serialize)]
struct VariabilityRow {
    name: String,
    instances: usize,
    skipped: usize,
    report: VariabilityReport,
}

pub struct Context {
    pub cfg: RunConfig,
    client: OnceCell<LlmClient>,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        Context {
            cfg,
            client: OnceCell::new(),
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.out_dir.join(name)
    }

    fn client(&self) -> Result<&LlmClient, CliError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let b = &self.cfg.backend;
        let mut settings = BackendSettings::from_env(b.kind, self.cfg.seed)?;
        if let Some(url) = &b.url {
            settings.url = Some(url.clone());
        }
        let backend = settings.build()?;
        let cache = self.cfg.paths.cache.as_deref().map(ResponseCache::open).transpose()?;
        let retry = RetryPolicy {
            max_attempts: b.max_attempts,
            ..RetryPolicy::default()
        };
        let client = LlmClient::with_options(backend, cache, retry, b.concurrency);
        Ok(self.client.get_or_init(|| client))
    }

    fn required<'a>(&self, field: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        p.as_deref()
            .ok_or_else(|| CliError::Config(format!("paths.{field} must be set for this command")))
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            dispatch_shuffle_seed: Some(self.cfg.seed),
            ..self.cfg.estimator_config()
        }
    }

    fn instances(&self, rec: &mut Record) -> Result<Vec<NliInstance>, CliError> {
        let p = self.required("instances", &self.cfg.paths.instances)?;
        rec.input(p);
        Ok(load_instances(p)?)
    }

    fn human_sets(&self, rec: &mut Record) -> Result<BTreeMap<String, ExplanationSet>, CliError> {
        let p = self.required("human_explanations", &self.cfg.paths.human_explanations)?;
        rec.input(p);
        let records = load_explanations(p)?;
        Ok(human_sets(&records).into_iter().map(|s| (s.uid.clone(), s)).collect())
    }

    fn model_pool(&self, path: Option<&Path>, rec: &mut Record) -> Result<ExplanationPool, CliError> {
        let p = path
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.out("model_explanations.jsonl"));
        rec.input(&p);
        Ok(ExplanationPool::from_records(load_explanations(&p)?))
    }

    fn distributions(&self, p: &Path, rec: &mut Record) -> Result<BTreeMap<String, LabelDistribution>, CliError> {
        rec.input(p);
        Ok(load_distribution_file(p)?)
    }

    fn write(&self, rec: &mut Record, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.out(name);
        write_text(&p, text)?;
        rec.output(&p);
        Ok(p)
    }

    /// Runs one command, writes its manifest and returns what it recorded.
    pub fn execute(&self, command: &Command) -> Result<Record, CliError> {
        let start = Instant::now();
        let before = self.client.get().map(|c| c.stats());
        let mut rec = Record::default();
        let tag = match command {
            Command::Generate(a) => self.generate(a, &mut rec)?,
            Command::Select(a) => self.select(a, &mut rec)?,
            Command::Estimate(a) => self.estimate(a, &mut rec)?,
            Command::Evaluate(a) => self.evaluate(a, &mut rec)?,
            Command::Ablate(a) => self.ablate(a, &mut rec)?,
            Command::Variability(a) => self.variability(a, &mut rec)?,
            Command::TrainProxy(a) => self.train_proxy(a, &mut rec)?,
            Command::EvalProxy(a) => self.eval_proxy(a, &mut rec)?,
            Command::ExportTernary(a) => self.export_ternary(a, &mut rec)?,
            Command::Pipeline => self.pipeline(&mut rec)?,
            Command::CheckConfig => return Ok(rec),
        };
        if let Some(c) = self.client.get() {
            let now = c.stats();
            let then = before.unwrap_or_default();
            if !matches!(command, Command::Pipeline) {
                rec.runtime
                    .insert("backend_calls".into(), now.backend_calls - then.backend_calls);
                rec.runtime
                    .insert("cache_hits".into(), now.cache_hits - then.cache_hits);
            }
            rec.backend.get_or_insert_with(|| c.backend_id().to_string());
        }
        let elapsed = start.elapsed();
        if !matches!(command, Command::Pipeline) {
            rec.stages.push((tag.clone(), elapsed));
        }
        let manifest = write_manifest(&self.cfg, &self.cfg.paths.out_dir, &tag, &rec, elapsed)?;
        log::info!("{tag}: wrote {}", manifest.display());
        Ok(rec)
    }

    fn generate(&self, args: &GenerateArgs, rec: &mut Record) -> Result<String, CliError> {
        let instances = self.instances(rec)?;
        let labels = if args.labels.is_empty() {
            NliLabel::ALL.to_vec()
        } else {
            args.labels.clone()
        };
        let outcome = generate_explanations(&instances, &labels, self.client()?, &self.cfg.backend.model)?;
        self.write(rec, "model_explanations.jsonl", &to_jsonl(&outcome.records))?;
        self.write(rec, "generation_failures.jsonl", &to_jsonl(&outcome.failures))?;
        rec.note("explanations", outcome.records.len());
        rec.note("failures", outcome.failures.len());
        Ok("generate".into())
    }

    fn guidance(&self, source: &str, rec: &mut Record) -> Result<BTreeMap<String, Vec<NliLabel>>, CliError> {
        if source == "human" {
            return Ok(self
                .human_sets(rec)?
                .into_iter()
                .map(|(uid, s)| (uid, s.labels()))
                .collect());
        }
        let p = self.required("labels", &self.cfg.paths.labels)?;
        rec.input(p);
        let mut by_source = load_label_records(p)?;
        let out: BTreeMap<String, Vec<NliLabel>> = by_source
            .remove(source)
            .unwrap_or_default()
            .into_iter()
            .map(|r| (r.uid, r.labels))
            .collect();
        if out.is_empty() {
            return Err(CliError::Config(format!(
                "no label records with source {source:?} in {}",
                p.display()
            )));
        }
        Ok(out)
    }

    fn select(&self, args: &SelectArgs, rec: &mut Record) -> Result<String, CliError> {
        let pool = self.model_pool(args.pool.as_deref(), rec)?;
        if let Some(kind) = args.validated {
            return self.select_validated(kind, args.preference, &pool, rec);
        }
        let strategy = args.strategy.unwrap_or(self.cfg.selection.strategy);
        let mode = args.mode.unwrap_or(self.cfg.selection.mode);
        let guidance = match strategy {
            SelectionStrategy::LabelFree => None,
            SelectionStrategy::LabelGuided => {
                let source = args
                    .guidance
                    .as_deref()
                    .or(self.cfg.selection.guidance_source.as_deref())
                    .ok_or_else(|| CliError::Config("label_guided selection needs a guidance source".into()))?;
                Some(self.guidance(source, rec)?)
            }
        };
        let instances = self.instances(rec)?;
        let mut sets = Vec::new();
        let mut failures = Vec::new();
        for inst in &instances {
            let guidance_labels = match &guidance {
                None => None,
                Some(g) => match g.get(&inst.uid) {
                    Some(l) => Some(l.clone()),
                    None => {
                        failures.push(Failure {
                            uid: &inst.uid,
                            reason: "no guidance labels".into(),
                        });
                        continue;
                    }
                },
            };
            let spec = SelectionSpec {
                strategy,
                mode,
                guidance_labels,
            };
            match select(&pool, &inst.uid, &spec) {
                Ok(set) => sets.push(set),
                Err(e) => failures.push(Failure {
                    uid: &inst.uid,
                    reason: e.to_string(),
                }),
            }
        }
        let name = format!("{}_{mode}", strategy_name(strategy));
        self.write(rec, &format!("sets_{name}.jsonl"), &to_jsonl(&sets))?;
        self.write(rec, &format!("sets_{name}.failures.jsonl"), &to_jsonl(&failures))?;
        rec.note("sets", sets.len());
        rec.note("failures", failures.len());
        Ok(format!("select_{name}"))
    }

    fn select_validated(
        &self,
        kind: ReplacementKind,
        preference: Preference,
        pool: &ExplanationPool,
        rec: &mut Record,
    ) -> Result<String, CliError> {
        let p = self.required("validations", &self.cfg.paths.validations)?;
        rec.input(p);
        let validations: Vec<ValidationRecord> = read_jsonl(p)?;
        let strategy = ReplacementStrategy { kind, preference };
        let (mut replaced, mut slots) = (0, 0);
        let mut sets = Vec::new();
        for human in self.human_sets(rec)?.values() {
            let outcome = apply_validation_replacement(human, pool, &validations, strategy);
            replaced += outcome.replaced;
            slots += outcome.set.len();
            sets.push(outcome.set);
        }
        let name = format!("validated_{}", replacement_name(kind, preference));
        self.write(rec, &format!("sets_{name}.jsonl"), &to_jsonl(&sets))?;
        rec.note("sets", sets.len());
        rec.note("replaced", replaced);
        rec.note("slots", slots);
        Ok(format!("select_{name}"))
    }

    fn estimate(&self, args: &EstimateArgs, rec: &mut Record) -> Result<String, CliError> {
        let instances = self.instances(rec)?;
        let (default_name, sets) = match args.sets.as_str() {
            "none" => ("none".to_string(), None),
            "human" => ("human".to_string(), Some(self.human_sets(rec)?)),
            path => {
                let p = PathBuf::from(path);
                rec.input(&p);
                let sets: Vec<ExplanationSet> = read_jsonl(&p)?;
                (
                    file_stem(&p),
                    Some(sets.into_iter().map(|s| (s.uid.clone(), s)).collect()),
                )
            }
        };
        let name = args.name.clone().unwrap_or(default_name);
        let (instances, sets) = match sets {
            None => (instances, BTreeMap::new()),
            Some(s) => (instances.into_iter().filter(|i| s.contains_key(&i.uid)).collect(), s),
        };
        let est_cfg = self.estimator_config();
        let batch = estimate_batch(&instances, &sets, self.client()?, &est_cfg)?;
        let tau = est_cfg.metric.softmax_temperature;
        let records: Vec<_> = batch.estimates.iter().map(|e| e.to_record(tau)).collect();
        self.write(rec, &format!("mjd_{name}.jsonl"), &to_jsonl(&records))?;
        self.write(
            rec,
            &format!("mjd_{name}.incomplete.jsonl"),
            &to_jsonl::<IncompleteInstance>(&batch.incomplete),
        )?;
        rec.note("estimated", records.len());
        rec.note("incomplete", batch.incomplete.len());
        rec.note("configurations", records.iter().map(|r| r.plan_size).sum::<usize>());
        Ok(format!("estimate_{name}"))
    }

    fn evaluate(&self, args: &EvaluateArgs, rec: &mut Record) -> Result<String, CliError> {
        let name = args.name.clone().unwrap_or_else(|| file_stem(&args.candidate));
        let candidate = self.distributions(&args.candidate, rec)?;
        let target_path = match &args.target {
            Some(p) => p.as_path(),
            None => self.required("reference", &self.cfg.paths.reference)?,
        };
        let target = self.distributions(target_path, rec)?;
        let shared: BTreeMap<String, LabelDistribution> = target
            .iter()
            .filter(|(u, _)| candidate.contains_key(*u))
            .map(|(u, d)| (u.clone(), *d))
            .collect();
        let dropped_target = target.len() - shared.len();
        let dropped_candidate = candidate.len() - shared.len();
        if dropped_target + dropped_candidate > 0 {
            log::warn!(
                "{name}: comparing {} shared uids ({dropped_candidate} candidate-only, {dropped_target} target-only)",
                shared.len()
            );
        }
        let candidate: BTreeMap<String, LabelDistribution> =
            candidate.into_iter().filter(|(u, _)| shared.contains_key(u)).collect();
        let mut report = compare_to_target(&candidate, &shared, &self.cfg.metric.metric_config(), args.direction)?;
        for p in &args.ft {
            rec.input(p);
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Output {
                path: p.clone(),
                source,
            })?;
            let block: FtBlock = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: not an FT block: {e}", p.display())))?;
            report.ft.push(block);
        }
        self.write(rec, &format!("eval_{name}.tsv"), &metric_report_tsv(&name, &report))?;
        self.write(rec, &format!("eval_{name}.json"), &json_pretty(&report))?;
        rec.note("instances", report.instances);
        rec.note("candidate_only", dropped_candidate);
        rec.note("target_only", dropped_target);
        Ok(format!("evaluate_{name}"))
    }

    fn ablate(&self, args: &AblateArgs, rec: &mut Record) -> Result<String, CliError> {
        let instances = self.instances(rec)?;
        let human = self.human_sets(rec)?;
        let pool = self.model_pool(args.pool.as_deref(), rec)?;
        let est_cfg = self.estimator_config();
        let client = self.client()?;
        let default_target = self.out("mjd_human.jsonl");
        let target = match &args.target {
            Some(p) => self.distributions(p, rec)?,
            None if default_target.is_file() => self.distributions(&default_target, rec)?,
            None => {
                log::info!("no human-explanation MJD found; estimating it");
                let batch = estimate_batch(&instances, &human, client, &est_cfg)?;
                estimates_to_map(&batch.estimates)
            }
        };
        let mut rows = Vec::new();
        let mut excluded = BTreeMap::new();
        for &kind in &self.cfg.ablation.kinds {
            let spec = AblationSpec {
                rates: self.cfg.ablation.rates.clone(),
                replacement_kind: kind,
                mode: self.cfg.ablation.mode,
                seed: self.cfg.seed,
            };
            let sweep = run_ablation(
                kind.as_str(),
                &instances,
                &human,
                &pool,
                &spec,
                &target,
                client,
                &est_cfg,
            )?;
            rows.extend(sweep.rows);
            excluded.insert(kind.as_str().to_string(), sweep.excluded);
        }
        self.write(rec, "ablation.tsv", &report_tsv(&rows))?;
        self.write(
            rec,
            "ablation.json",
            &json_pretty(&AblationOutput {
                rows: &rows,
                excluded: &excluded,
            }),
        )?;
        rec.note("rows", rows.len());
        rec.note("excluded", excluded.values().map(Vec::len).sum::<usize>());
        Ok("ablate".into())
    }

    fn variability(&self, args: &VariabilityArgs, rec: &mut Record) -> Result<String, CliError> {
        let mut sources: Vec<(String, Vec<ExplanationSet>)> =
            vec![("human".into(), self.human_sets(rec)?.into_values().collect())];
        for spec in &args.sets {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--sets expects name=path, got {spec:?}")))?;
            let p = PathBuf::from(path);
            rec.input(&p);
            sources.push((name.to_string(), read_jsonl(&p)?));
        }
        let vcfg = VariabilityConfig::default();
        let mut rows = Vec::new();
        for (name, sets) in sources {
            let mut reports = Vec::new();
            let mut skipped = 0;
            for set in &sets {
                if set.len() < 2 {
                    skipped += 1;
                    continue;
                }
                let texts: Vec<&str> = set.explanations.iter().map(|e| e.text.as_str()).collect();
                reports.push(pairwise_variability(&texts, &vcfg)?);
            }
            match mean_report(&reports) {
                Some(report) => rows.push(VariabilityRow {
                    name,
                    instances: reports.len(),
                    skipped,
                    report,
                }),
                None => log::warn!("{name}: no set has two or more explanations"),
            }
        }
        let table: Vec<(String, VariabilityReport)> = rows.iter().map(|r| (r.name.clone(), r.report)).collect();
        self.write(rec, "variability.tsv", &hjd_core::variability::report_tsv(&table))?;
        self.write(rec, "variability.json", &json_pretty(&rows))?;
        rec.note("sources", rows.len());
        Ok("variability".into())
    }

    fn train_proxy(&self, args: &TrainProxyArgs, rec: &mut Record) -> Result<String, CliError> {
        let instances = self.instances(rec)?;
        let dists = self.distributions(&args.soft_labels, rec)?;
        let corpus = soft_corpus(&instances, &dists);
        let clf = train_soft(&corpus, &self.cfg.training_config(), self.cfg.training.dim)?;
        self.write(rec, &format!("proxy_{}.json", args.name), &clf.to_json())?;
        rec.note("examples", corpus.len());
        if let Some(t) = &clf.training {
            rec.note("final_loss", t.epoch_losses.last());
        }
        Ok(format!("train_proxy_{}", args.name))
    }

    fn load_proxy(&self, p: &Path, rec: &mut Record) -> Result<ProxyClassifier, CliError> {
        rec.input(p);
        let text = std::fs::read_to_string(p).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        })?;
        Ok(ProxyClassifier::from_json(&text)?)
    }

    fn eval_proxy(&self, args: &EvalProxyArgs, rec: &mut Record) -> Result<String, CliError> {
        let candidate = self.load_proxy(&args.candidate, rec)?;
        let reference = self.load_proxy(&args.reference, rec)?;
        let p = self.required("eval_instances", &self.cfg.paths.eval_instances)?;
        rec.input(p);
        let labeled = load_labeled_instances(p)?;
        let uids: Vec<String> = labeled.iter().map(|l| l.instance.uid.clone()).collect();
        let (dev_uids, _) = split_dev_test(&uids, self.cfg.training.dev_fraction, self.cfg.seed)?;
        let (dev, test): (Vec<_>, Vec<_>) = labeled.iter().partition(|l| dev_uids.contains(&l.instance.uid));
        let strip =
            |v: Vec<&hjd_core::dataset::LabeledInstance>| v.into_iter().map(|l| l.instance.clone()).collect::<Vec<_>>();
        let gold: BTreeMap<String, NliLabel> = labeled.iter().map(|l| (l.instance.uid.clone(), l.label)).collect();
        let gold_ref = (self.cfg.training.f1_target == F1Target::Gold).then_some(&gold);
        let block = evaluate_against_reference(
            &args.name,
            &candidate,
            &reference,
            &strip(dev),
            &strip(test),
            &self.cfg.metric.metric_config(),
            gold_ref,
        )?;
        let pairs: Vec<(NliInstance, NliLabel)> = labeled.iter().map(|l| (l.instance.clone(), l.label)).collect();
        let ood_f1 = evaluate_single_label(&candidate, &pairs)?;
        self.write(rec, &format!("ft_{}.json", args.name), &json_pretty(&block))?;
        self.write(rec, &format!("ft_{}.tsv", args.name), &ft_tsv(&block))?;
        rec.note("dev", dev_uids.len());
        rec.note("test", uids.len() - dev_uids.len());
        rec.note("gold_weighted_f1", ood_f1);
        Ok(format!("eval_proxy_{}", args.name))
    }

    fn export_ternary(&self, args: &ExportTernaryArgs, rec: &mut Record) -> Result<String, CliError> {
        let name = args.name.clone().unwrap_or_else(|| file_stem(&args.input));
        let points = self.distributions(&args.input, rec)?;
        self.write(rec, &format!("ternary_{name}.csv"), &ternary_csv(&points))?;
        self.write(rec, &format!("ternary_{name}.svg"), &ternary_svg(&name, &points))?;
        rec.note("points", points.len());
        Ok(format!("export_ternary_{name}"))
    }

    fn pipeline(&self, rec: &mut Record) -> Result<String, CliError> {
        let reference = self.required("reference", &self.cfg.paths.reference)?.to_path_buf();
        let mut stage = |c: Command| -> Result<(), CliError> {
            let r = self.execute(&c)?;
            rec.absorb(r);
            Ok(())
        };
        stage(Command::Generate(GenerateArgs { labels: Vec::new() }))?;
        stage(Command::Select(SelectArgs {
            pool: None,
            strategy: None,
            mode: None,
            guidance: None,
            validated: None,
            preference: Preference::Preferred,
        }))?;
        let selected_name = format!(
            "{}_{}",
            strategy_name(self.cfg.selection.strategy),
            self.cfg.selection.mode
        );
        let selected_sets = self.out(&format!("sets_{selected_name}.jsonl"));
        stage(Command::Estimate(EstimateArgs {
            sets: "human".into(),
            name: None,
        }))?;
        stage(Command::Estimate(EstimateArgs {
            sets: selected_sets.display().to_string(),
            name: Some(selected_name.clone()),
        }))?;
        let systems = ["human".to_string(), selected_name.clone()];
        let with_ft = self.cfg.paths.eval_instances.is_some();
        if with_ft {
            stage(Command::TrainProxy(TrainProxyArgs {
                soft_labels: reference.clone(),
                name: "reference".into(),
            }))?;
            for s in &systems {
                stage(Command::TrainProxy(TrainProxyArgs {
                    soft_labels: self.out(&format!("mjd_{s}.jsonl")),
                    name: s.clone(),
                }))?;
                stage(Command::EvalProxy(EvalProxyArgs {
                    candidate: self.out(&format!("proxy_{s}.json")),
                    reference: self.out("proxy_reference.json"),
                    name: s.clone(),
                }))?;
            }
        }
        let mut table = Vec::new();
        for s in &systems {
            let ft = if with_ft {
                vec![self.out(&format!("ft_{s}.json"))]
            } else {
                Vec::new()
            };
            stage(Command::Evaluate(EvaluateArgs {
                candidate: self.out(&format!("mjd_{s}.jsonl")),
                target: Some(reference.clone()),
                name: Some(s.clone()),
                ft,
                direction: Direction::CandidateFirst,
            }))?;
            let text =
                std::fs::read_to_string(self.out(&format!("eval_{s}.json"))).map_err(|source| CliError::Output {
                    path: self.out(&format!("eval_{s}.json")),
                    source,
                })?;
            let report: MetricReport = serde_json::from_str(&text).expect("report written by evaluate");
            table.push((s.clone(), report));
        }
        stage(Command::Ablate(AblateArgs {
            pool: None,
            target: None,
        }))?;
        stage(Command::Variability(VariabilityArgs {
            sets: vec![format!("{selected_name}={}", selected_sets.display())],
        }))?;
        stage(Command::ExportTernary(ExportTernaryArgs {
            input: reference.clone(),
            name: Some("reference".into()),
        }))?;
        for s in &systems {
            stage(Command::ExportTernary(ExportTernaryArgs {
                input: self.out(&format!("mjd_{s}.jsonl")),
                name: Some(s.clone()),
            }))?;
        }
        let summary = summary_table(&table);
        self.write(rec, "table.tsv", &summary)?;
        rec.note("systems", systems.len());
        Ok("pipeline".into())
    }
}

/// One FT block as a two-row table.
fn ft_tsv(block: &FtBlock) -> String {
    let cells = [
        block.dev.kl,
        block.test.kl,
        block.dev.ce,
        block.test.ce,
        block.dev.weighted_f1,
        block.test.weighted_f1,
    ];
    format!(
        "name\tKL(dev)\tKL(test)\tCE(dev)\tCE(test)\tF1(dev)\tF1(test)\n{}\t{}\n",
        block.name,
        cells.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join("\t")
    )
}

/// Comparison rows under one header; FT blocks are shown under a common
/// `FT` prefix.
pub fn summary_table(rows: &[(String, MetricReport)]) -> String {
    let mut out = String::new();
    for (i, (name, report)) in rows.iter().enumerate() {
        let mut r = report.clone();
        for b in &mut r.ft {
            b.name = "FT".into();
        }
        let tsv = metric_report_tsv(name, &r);
        let mut lines = tsv.lines();
        let header = lines.next().unwrap_or_default();
        if i == 0 {
            out.push_str(header);
            out.push('\n');
        }
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}
