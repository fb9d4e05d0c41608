use ks_observer::harness::{parse_config, run, RunSpec, Scenario};
use ks_observer::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
ks-observer — Kuramoto–Sivashinsky observer experiments

USAGE:
    ks-observer <SUBCOMMAND> [--config <path>] [--out <dir>] [--set key=value]...

SUBCOMMANDS:
    simulate            run one scenario (config scenario: free | observe)
    sweep               run a parameter sweep (sweep-lambda | sweep-s)
    cps-verify          compare the projection constant against its closed form
    validate-sensors    admissibility verdicts for the configured sensor family

FLAGS:
    --config <path>     key = value config document (see repo docs)
    --out <dir>         output directory (overrides config out_dir)
    --set key=value     override one config key; repeatable

ENVIRONMENT:
    KS_OBSERVER_WORKERS   max worker threads for sweeps

EXIT CODES:
    0 success, 2 config error, 3 numerical blow-up, 4 verification failure
";

struct CliArgs {
    subcommand: String,
    config_path: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    overrides: Vec<(String, String)>,
}

fn parse_args(args: &[String]) -> Result<CliArgs, String> {
    let mut it = args.iter();
    let subcommand = it.next().ok_or_else(|| "missing subcommand".to_string())?.clone();
    let mut parsed = CliArgs {
        subcommand,
        config_path: None,
        out_dir: None,
        overrides: Vec::new(),
    };
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => {
                let v = it.next().ok_or("--config needs a path")?;
                parsed.config_path = Some(PathBuf::from(v));
            }
            "--out" => {
                let v = it.next().ok_or("--out needs a directory")?;
                parsed.out_dir = Some(PathBuf::from(v));
            }
            "--set" => {
                let v = it.next().ok_or("--set needs key=value")?;
                let mut kv = v.splitn(2, '=');
                let key = kv.next().unwrap_or("").trim().to_string();
                let value = kv
                    .next()
                    .ok_or_else(|| format!("--set '{v}': expected key=value"))?
                    .trim()
                    .to_string();
                parsed.overrides.push((key, value));
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(parsed)
}

fn build_spec(cli: &CliArgs) -> Result<RunSpec, Error> {
    let text = match &cli.config_path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", p.display()))
        })?,
        None => String::new(),
    };
    // The verification subcommands imply their scenario, so a bare invocation
    // works; simulate/sweep must say which member they mean.
    let implied = match cli.subcommand.as_str() {
        "cps-verify" => Some(Scenario::CpsVerify),
        "validate-sensors" => Some(Scenario::ValidateSensors),
        _ => None,
    };
    let mut spec = match parse_config(&text, &cli.overrides) {
        Ok(spec) => spec,
        Err(Error::Config(msg)) if msg.contains("scenario required") && implied.is_some() => {
            let mut overrides = vec![(
                "scenario".to_string(),
                implied.expect("checked").to_string(),
            )];
            overrides.extend(cli.overrides.iter().cloned());
            parse_config(&text, &overrides)?
        }
        Err(e) => return Err(e),
    };

    let compatible = match cli.subcommand.as_str() {
        "simulate" => matches!(spec.scenario, Scenario::Free | Scenario::Observe),
        "sweep" => matches!(spec.scenario, Scenario::SweepLambda | Scenario::SweepS),
        "cps-verify" => spec.scenario == Scenario::CpsVerify,
        "validate-sensors" => spec.scenario == Scenario::ValidateSensors,
        _ => false,
    };
    if !compatible {
        return Err(Error::Config(format!(
            "scenario '{}' does not belong to subcommand '{}'",
            spec.scenario, cli.subcommand
        )));
    }
    if let Some(dir) = &cli.out_dir {
        spec.out_dir = dir.clone();
    }
    Ok(spec)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } => 2,
        Error::BlowUp { .. } => 3,
        Error::Inadmissible(_) | Error::Verification(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let cli = match parse_args(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    if !matches!(
        cli.subcommand.as_str(),
        "simulate" | "sweep" | "cps-verify" | "validate-sensors"
    ) {
        eprintln!("error: unknown subcommand '{}'\n\n{USAGE}", cli.subcommand);
        return ExitCode::from(2);
    }

    let spec = match build_spec(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    match run(&spec) {
        Ok(outcome) => {
            for msg in &outcome.messages {
                println!("{msg}");
            }
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
