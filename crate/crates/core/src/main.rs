//! Command-line front end. Machine-readable output goes to stdout,
//! diagnostics to stderr. Exit codes: 0 success (for `resolve`, an
//! attribution), 1 for an unidentified resolution or a failed verification,
//! 2 for usage and input errors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use domorg::audit::{build_report, ingest_flows_file, AuditReport, RelationSet};
use domorg::certinfo::summarize_certificate;
use domorg::config::{Config, StoreMode};
use domorg::domain::Fqdn;
use domorg::eval::{evaluate_technique, TABLE_HEADER};
use domorg::policy::classifier::{load_corpus, train_classifier, ClassifierConfig};
use domorg::policy::PolicyText;
use domorg::replay::{verify_archive, TlsOutcome};
use domorg::resolver::{to_record_line, Attribution, FetchPolicy, Flag, Method};
use domorg::whois::{RegistrantField, WhoisClient};

#[derive(Parser)]
#[command(
    name = "domorg",
    version,
    about = "Attributes web domains to the organizations operating them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Key-value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Serve all transactions from this fixture archive; no network.
    #[arg(long, global = true, value_name = "DIR", conflicts_with_all = ["record", "live"])]
    replay: Option<PathBuf>,
    /// Perform transactions live and persist each one into this archive.
    #[arg(long, global = true, value_name = "DIR", conflicts_with = "live")]
    record: Option<PathBuf>,
    /// Perform transactions live through the evidence cache.
    #[arg(long, global = true)]
    live: bool,
    /// Worker threads for batch resolution.
    #[arg(long, global = true, value_name = "N")]
    parallelism: Option<usize>,
    /// Emit machine-readable JSON instead of human-oriented text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve one domain to its operating organization.
    Resolve {
        domain: String,
        /// Attach a certificate summary as informational evidence.
        #[arg(long)]
        certificate: bool,
    },
    /// Resolve every domain listed in a file, one per line.
    Batch {
        domains: PathBuf,
        /// Write result records here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare WHOIS, certificate, policy, and combined attribution for one domain.
    Techniques { domain: String },
    /// Score a result-record file against a ground-truth file.
    Eval {
        results: PathBuf,
        truth: PathBuf,
        /// Also write the full evaluation as JSON here.
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
        /// Print one line per judged domain after the table.
        #[arg(long)]
        details: bool,
    },
    /// Train the policy classifier from a labeled corpus manifest.
    Train {
        corpus: PathBuf,
        /// Where to write the trained model.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u32>,
    },
    /// Cross-reference data flows against policy disclosures.
    Audit {
        /// Flow log: app, destination, transport, data types (tab-separated).
        flows: PathBuf,
        /// Organization relations: child, parent (tab-separated).
        relations: PathBuf,
        /// Directory of per-app policy texts named <app_id>.txt.
        policies: PathBuf,
        /// Reject the whole flow log on the first malformed line.
        #[arg(long)]
        strict: bool,
    },
    /// Record or verify fixture archives.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Subcommand)]
enum FixturesAction {
    /// Resolve domains from a file, recording every transaction into DIR.
    Record { domains: PathBuf, dir: PathBuf },
    /// Check an archive's index, files, and payload digests.
    Verify { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Resolve {
            domain,
            certificate,
        } => cmd_resolve(cli, &config, domain, *certificate),
        Command::Batch { domains, out } => cmd_batch(cli, &config, domains, out.as_deref()),
        Command::Techniques { domain } => cmd_techniques(cli, &config, domain),
        Command::Eval {
            results,
            truth,
            summary,
            details,
        } => cmd_eval(cli, results, truth, summary.as_deref(), *details),
        Command::Train {
            corpus,
            out,
            seed,
            epochs,
        } => cmd_train(cli, corpus, out, *seed, *epochs),
        Command::Audit {
            flows,
            relations,
            policies,
            strict,
        } => cmd_audit(cli, &config, flows, relations, policies, *strict),
        Command::Fixtures { action } => match action {
            FixturesAction::Record { domains, dir } => cmd_fixtures_record(&config, domains, dir),
            FixturesAction::Verify { dir } => cmd_fixtures_verify(dir),
        },
    }
}

/// Command-line mode flags win over the config file; something must pick one.
fn choose_mode(cli: &Cli, config: &Config) -> anyhow::Result<StoreMode> {
    if let Some(dir) = &cli.replay {
        return Ok(StoreMode::Replay(dir.clone()));
    }
    if let Some(dir) = &cli.record {
        return Ok(StoreMode::Record(dir.clone()));
    }
    if cli.live {
        return Ok(StoreMode::Live);
    }
    config.mode.clone().ok_or_else(|| {
        anyhow::anyhow!("no transaction mode: pass --replay DIR, --record DIR, or --live, or set mode in the config file")
    })
}

fn fetch_policy(config: &Config, include_certificate: bool) -> FetchPolicy {
    let mut policy = config.fetch_policy();
    policy.include_certificate = policy.include_certificate || include_certificate;
    policy
}

fn cmd_resolve(
    cli: &Cli,
    config: &Config,
    domain: &str,
    certificate: bool,
) -> anyhow::Result<ExitCode> {
    let bundle = config.bundle()?;
    let store = config.open_store(choose_mode(cli, config)?)?;
    let resolver = bundle.resolver(&store);
    let attribution = resolver.resolve(domain, fetch_policy(config, certificate))?;
    if cli.json {
        println!("{}", to_record_line(&attribution));
    } else {
        print_attribution(&attribution);
    }
    Ok(if attribution.method == Method::Unidentified {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn print_attribution(a: &Attribution) {
    println!("domain:       {}", a.input_fqdn);
    println!("registrable:  {}", a.registrable_domain);
    match &a.organization {
        Some(org) => println!("organization: {org}"),
        None => println!("organization: (unidentified)"),
    }
    println!("method:       {}", a.method.as_str());
    match &a.evidence {
        Some(domorg::resolver::Evidence::Policy {
            url,
            paragraph_index,
        }) => println!("evidence:     policy page {url}, paragraph {paragraph_index}"),
        Some(domorg::resolver::Evidence::Whois { server, query }) => {
            println!("evidence:     whois {server} for {query}")
        }
        None => {}
    }
    if !a.flags.is_empty() {
        let texts: Vec<String> = a.flags.iter().map(|f| f.as_text()).collect();
        println!("flags:        {}", texts.join(", "));
    }
    if let Some(cert) = &a.certificate_note {
        let subject = cert
            .subject_organization
            .as_deref()
            .or(cert.subject_common_name.as_deref())
            .unwrap_or("(no subject)");
        println!("certificate:  {subject} ({:?})", cert.tier);
    }
}

fn read_domain_list(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn cmd_batch(
    cli: &Cli,
    config: &Config,
    domains: &Path,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let inputs = read_domain_list(domains)?;
    let bundle = config.bundle()?;
    let store = config.open_store(choose_mode(cli, config)?)?;
    let resolver = bundle.resolver(&store);
    let parallelism = cli.parallelism.unwrap_or(config.parallelism);
    let results = resolver.resolve_batch(&inputs, fetch_policy(config, false), parallelism);

    let mut lines = Vec::with_capacity(results.len());
    let mut invalid = 0usize;
    for (input, result) in inputs.iter().zip(&results) {
        match result {
            Ok(attribution) => lines.push(to_record_line(attribution)),
            Err(e) => {
                invalid += 1;
                eprintln!("{input}: {e}");
            }
        }
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, &body)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
        }
    }
    Ok(if invalid > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

/// One row of the technique comparison.
#[derive(serde::Serialize)]
struct TechniqueRow {
    technique: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    organization: Option<String>,
    detail: String,
}

impl TechniqueRow {
    fn print(&self) {
        println!(
            "{}\t{}\t{}",
            self.technique,
            self.organization.as_deref().unwrap_or("-"),
            self.detail
        );
    }
}

fn cmd_techniques(cli: &Cli, config: &Config, domain: &str) -> anyhow::Result<ExitCode> {
    let bundle = config.bundle()?;
    let store = config.open_store(choose_mode(cli, config)?)?;
    let resolver = bundle.resolver(&store);

    let parsed = Fqdn::parse(domain)?;
    let registrable = parsed.registrable_with(&bundle.suffix_rules)?;

    let attribution = resolver.resolve(domain, fetch_policy(config, true))?;

    let whois_row = {
        let client = WhoisClient::new(&store, &bundle.whois_servers, &bundle.redaction_lexicon);
        match client.lookup(&registrable) {
            Ok(lookup) => match lookup.registrant {
                RegistrantField::Org(name) => TechniqueRow {
                    technique: "whois",
                    organization: Some(name),
                    detail: format!("registrant organization via {}", lookup.servers.join(" -> ")),
                },
                RegistrantField::Redacted(value) => TechniqueRow {
                    technique: "whois",
                    organization: None,
                    detail: format!("redacted: {value}"),
                },
                RegistrantField::Empty => TechniqueRow {
                    technique: "whois",
                    organization: None,
                    detail: "registrant field present but blank".into(),
                },
                RegistrantField::Absent => TechniqueRow {
                    technique: "whois",
                    organization: None,
                    detail: "no registrant organization field".into(),
                },
            },
            Err(e) => TechniqueRow {
                technique: "whois",
                organization: None,
                detail: format!("lookup failed: {e}"),
            },
        }
    };

    let certificate_row = match store.tls(registrable.text(), 443) {
        Ok(TlsOutcome::Leaf { der }) => match summarize_certificate(&der, &bundle.ev_policies) {
            Ok(summary) => {
                let detail = format!("{:?} certificate", summary.tier);
                match summary.subject_organization {
                    Some(org) => TechniqueRow {
                        technique: "certificate",
                        organization: Some(org),
                        detail,
                    },
                    None => TechniqueRow {
                        technique: "certificate",
                        organization: None,
                        detail: format!("{detail}, no subject organization"),
                    },
                }
            }
            Err(e) => TechniqueRow {
                technique: "certificate",
                organization: None,
                detail: format!("unparseable certificate: {e}"),
            },
        },
        Ok(TlsOutcome::NoTls) => TechniqueRow {
            technique: "certificate",
            organization: None,
            detail: "no TLS on port 443".into(),
        },
        Ok(other) => TechniqueRow {
            technique: "certificate",
            organization: None,
            detail: format!("handshake not completed: {other:?}"),
        },
        Err(e) => TechniqueRow {
            technique: "certificate",
            organization: None,
            detail: format!("handshake not available: {e}"),
        },
    };

    let policy_row = if attribution.method == Method::PolicyAnalysis {
        let detail = match &attribution.evidence {
            Some(domorg::resolver::Evidence::Policy {
                url,
                paragraph_index,
            }) => format!("{url}, paragraph {paragraph_index}"),
            _ => "policy analysis".into(),
        };
        TechniqueRow {
            technique: "policy",
            organization: attribution.organization.clone(),
            detail,
        }
    } else if attribution.has_flag(&Flag::CrossSldRedirect) {
        TechniqueRow {
            technique: "policy",
            organization: None,
            detail: "discarded: homepage redirected across registrable domains".into(),
        }
    } else {
        let stage = attribution
            .flags
            .iter()
            .find_map(|flag| match flag {
                Flag::PolicyStageFailed(stage) => Some(stage.clone()),
                _ => None,
            })
            .unwrap_or_else(|| "not attempted".into());
        TechniqueRow {
            technique: "policy",
            organization: None,
            detail: format!("stage failure: {stage}"),
        }
    };

    let roi_row = TechniqueRow {
        technique: "roi",
        organization: attribution.organization.clone(),
        detail: format!("method {}", attribution.method.as_str()),
    };

    let rows = [whois_row, certificate_row, policy_row, roi_row];
    if cli.json {
        println!("{}", serde_json::to_string(&rows)?);
    } else {
        println!("technique\torganization\tdetail");
        for row in &rows {
            row.print();
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    cli: &Cli,
    results: &Path,
    truth: &Path,
    summary: Option<&Path>,
    details: bool,
) -> anyhow::Result<ExitCode> {
    let evaluation = evaluate_technique(results, truth)?;
    if let Some(path) = summary {
        std::fs::write(path, serde_json::to_string_pretty(&evaluation)?)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    }
    if cli.json {
        println!("{}", serde_json::to_string(&evaluation)?);
    } else {
        println!("{TABLE_HEADER}");
        println!("{}", evaluation.table_row("roi"));
        if details {
            for outcome in &evaluation.outcomes {
                println!(
                    "{}\t{}\t{}\t{}",
                    outcome.domain,
                    outcome.expected,
                    outcome.produced.as_deref().unwrap_or("-"),
                    outcome.outcome
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(
    cli: &Cli,
    corpus: &Path,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<u32>,
) -> anyhow::Result<ExitCode> {
    let docs = load_corpus(corpus)?;
    let mut config = ClassifierConfig::default();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(epochs) = epochs {
        config.epochs = epochs;
    }
    let model = train_classifier(&docs, &config)?;
    model.save(out)?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "documents": docs.len(),
                "vocabulary": model.weights().len(),
                "model": out.display().to_string(),
            })
        );
    } else {
        println!(
            "trained on {} documents (vocabulary {}), saved to {}",
            docs.len(),
            model.weights().len(),
            out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads `<app_id>.txt` files; paragraphs are blank-line-separated blocks.
fn read_policies_dir(dir: &Path) -> anyhow::Result<BTreeMap<String, PolicyText>> {
    let mut policies = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(app_id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        let paragraphs: Vec<String> = text
            .split("\n\n")
            .map(|block| block.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|block| !block.is_empty())
            .collect();
        policies.insert(
            app_id.to_string(),
            PolicyText {
                url: format!("file://{}", path.display()),
                full_text: paragraphs.join("\n"),
                paragraphs,
            },
        );
    }
    Ok(policies)
}

fn cmd_audit(
    cli: &Cli,
    config: &Config,
    flows: &Path,
    relations: &Path,
    policies: &Path,
    strict: bool,
) -> anyhow::Result<ExitCode> {
    let ingest = ingest_flows_file(flows, strict)?;
    for skipped in &ingest.skipped {
        eprintln!("skipped flow line {}: {}", skipped.line, skipped.reason);
    }
    let relations = RelationSet::from_file(relations)?;
    let policies = read_policies_dir(policies)?;

    let bundle = config.bundle()?;
    let store = config.open_store(choose_mode(cli, config)?)?;
    let resolver = bundle.resolver(&store);

    let destinations: BTreeSet<String> = ingest
        .records
        .iter()
        .map(|flow| flow.destination.text().to_string())
        .collect();
    let inputs: Vec<String> = destinations.into_iter().collect();
    let parallelism = cli.parallelism.unwrap_or(config.parallelism);
    let results = resolver.resolve_batch(&inputs, fetch_policy(config, false), parallelism);
    let mut resolutions = HashMap::with_capacity(inputs.len());
    for (input, result) in inputs.iter().zip(results) {
        resolutions.insert(input.clone(), result?);
    }

    let report = build_report(
        &ingest.records,
        &resolutions,
        &policies,
        &relations,
        &bundle.entity_rules,
        &bundle.known_orgs,
    )?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_audit_report(&report);
    }
    Ok(ExitCode::SUCCESS)
}

fn print_audit_report(report: &AuditReport) {
    println!(
        "flows: {} total, {} attributed to an organization",
        report.flows_total, report.flows_attributed
    );
    println!(
        "apps: {} with flows, {} without a policy on file",
        report.apps.len(),
        report.no_policy.len()
    );
    println!(
        "disclosure: {} full, {} partial, {} none",
        report.status_counts.full, report.status_counts.partial, report.status_counts.none
    );
    println!();
    println!("app\tstatus\treceived\tdisclosed");
    for app in &report.apps {
        let status = app.status.map_or("no-policy", |s| s.as_str());
        println!(
            "{}\t{}\t{}\t{}",
            app.app_id,
            status,
            join_set(&app.received),
            join_set(&app.disclosed)
        );
    }
    print_count_section("apps per data type", &report.apps_per_data_type);
    print_count_section("apps per destination domain", &report.apps_per_destination);
    print_count_section("apps per head organization", &report.apps_per_head_org);
    if !report.org_disclosure.is_empty() {
        println!();
        println!("organization\tdisclosed-by\tundisclosed-by");
        for (org, counts) in &report.org_disclosure {
            println!("{org}\t{}\t{}", counts.disclosed, counts.undisclosed);
        }
    }
}

fn join_set(set: &BTreeSet<String>) -> String {
    if set.is_empty() {
        "-".to_string()
    } else {
        set.iter().cloned().collect::<Vec<_>>().join(", ")
    }
}

fn print_count_section(title: &str, counts: &BTreeMap<String, u64>) {
    if counts.is_empty() {
        return;
    }
    println!();
    println!("{title}");
    for (key, count) in counts {
        println!("{key}\t{count}");
    }
}

fn cmd_fixtures_record(config: &Config, domains: &Path, dir: &Path) -> anyhow::Result<ExitCode> {
    let inputs = read_domain_list(domains)?;
    let bundle = config.bundle()?;
    let store = config.open_store(StoreMode::Record(dir.to_path_buf()))?;
    let resolver = bundle.resolver(&store);
    let policy = fetch_policy(config, true);

    for input in &inputs {
        let attribution = resolver.resolve(input, policy)?;
        eprintln!(
            "{input}: {} ({})",
            attribution.organization.as_deref().unwrap_or("-"),
            attribution.method.as_str()
        );
        // Capture the WHOIS and TLS transactions unconditionally so the
        // archive can replay technique comparisons, not just resolutions.
        let registrable = Fqdn::parse(input)?.registrable_with(&bundle.suffix_rules)?;
        let client = WhoisClient::new(&store, &bundle.whois_servers, &bundle.redaction_lexicon);
        if let Err(e) = client.lookup(&registrable) {
            eprintln!("{input}: whois capture failed: {e}");
        }
        if let Err(e) = store.tls(registrable.text(), 443) {
            eprintln!("{input}: tls capture failed: {e}");
        }
    }
    println!("recorded {} domains into {}", inputs.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fixtures_verify(dir: &Path) -> anyhow::Result<ExitCode> {
    let problems = verify_archive(dir)?;
    if problems.is_empty() {
        println!("archive ok: {}", dir.display());
        Ok(ExitCode::SUCCESS)
    } else {
        for problem in &problems {
            eprintln!("{problem}");
        }
        eprintln!("{} problem(s) in {}", problems.len(), dir.display());
        Ok(ExitCode::from(1))
    }
}
