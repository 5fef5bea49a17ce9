use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use selectc::attack::{
    eliminated_options, extract_class, game_exact, game_simulate, kpa_filter, run_attack,
    AttStrategy, ObfStrategy, DEFAULT_CAP,
};
use selectc::crypto::{KeyFile, SecretKey};
use selectc::demo::{demo, Level, TASK1_SOURCE};
use selectc::interp::Inputs;
use selectc::lower::lower;
use selectc::metrics::{measure, potency_reduction};
use selectc::obfuscate::{
    deobfuscate, encrypt_inputs, eval_encrypted, obfuscate_statement_level, ObfProgram,
    ObfuscationConfig, DEFAULT_SEED,
};
use selectc::patterns::{
    aggregate, export_table, mine, parse_trees, surface_to_trees, PatternTable,
};
use selectc::surface::parse_surface;
use selectc::{Program, Value, Var};

const SEED_ENV: &str = "SELECTC_SEED";

#[derive(Parser)]
#[command(
    name = "selectc",
    version,
    about = "Obfuscate programs with encrypted selector variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obfuscate a program and write the selector key.
    Obfuscate {
        src: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate an obfuscated program on encrypted inputs and print the result.
    Run {
        obf: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Comma-separated `name=value` pairs.
        #[arg(long, default_value = "")]
        inputs: String,
    },
    /// Recover the confidential program.
    Deobfuscate {
        obf: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Count patterns in expression-tree corpora.
    Mine {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Read the inputs as source programs instead of tree files.
        #[arg(long)]
        source: bool,
        /// Also write the per-corpus percentage table here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Enumerate, filter and rank the candidate programs.
    Attack {
        obf: PathBuf,
        /// One pair per line: `name=value,... -> output`.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Selector key, to report the confidential program's rank.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// Cost and strength figures for a program and its obfuscation.
    Metrics {
        src: PathBuf,
        obf: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Known pairs; adds the share of misleading options they eliminate.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// The frequent-statement guessing game.
    Game {
        #[arg(long = "pl")]
        p_l: f64,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = GameObf::Uniform)]
        obfuscator: GameObf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the L0 or L1 case-study artifacts.
    Demo {
        level: Level,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameObf {
    Uniform,
    Frequent,
}

type Result<T, E = String> = std::result::Result<T, E>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn seed_or_default(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}: `{v}` is not an unsigned integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn sets_seed(config: &str) -> bool {
    config
        .lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .any(|(k, _)| k.trim() == "seed")
}

/// Reads three-address text, falling back to source syntax.
fn load_program(path: &Path) -> Result<Program> {
    let text = read(path)?;
    let tac = match Program::parse(&text) {
        Ok(p) => return Ok(p),
        Err(e) => e,
    };
    let sp = parse_surface(&text)
        .map_err(|e| format!("{}: not a program ({tac}) nor source ({e})", path.display()))?;
    lower(&sp).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_obf(path: &Path) -> Result<ObfProgram> {
    ObfProgram::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_key(path: &Path) -> Result<KeyFile> {
    KeyFile::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_table(path: &Path) -> Result<PatternTable> {
    PatternTable::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_inputs(text: &str) -> Result<Inputs> {
    let mut out = Inputs::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected `name=value`, got `{item}`"))?;
        let value: i64 = value
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not an integer", value.trim()))?;
        out.insert(Var::new(name.trim()), Value::from_i64(value));
    }
    Ok(out)
}

fn load_pairs(path: &Path) -> Result<Vec<(Inputs, Value)>> {
    let mut pairs = Vec::new();
    for (i, raw) in read(path)?.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: String| format!("{}:{}: {e}", path.display(), i + 1);
        let (ins, out) = line
            .split_once("->")
            .ok_or_else(|| at("expected `inputs -> output`".into()))?;
        let out: i64 = out
            .trim()
            .parse()
            .map_err(|_| at(format!("`{}` is not an integer", out.trim())))?;
        pairs.push((parse_inputs(ins).map_err(at)?, Value::from_i64(out)));
    }
    Ok(pairs)
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Obfuscate {
            src,
            config,
            out,
            key,
            seed,
        } => {
            let p = load_program(&src)?;
            let text = config.as_deref().map(read).transpose()?.unwrap_or_default();
            let mut cfg = ObfuscationConfig::parse(&text, |t| {
                let base = config
                    .as_deref()
                    .and_then(Path::parent)
                    .unwrap_or(Path::new("."));
                load_table(&base.join(t))
            })
            .map_err(|e| match &config {
                Some(path) => format!("{}: {e}", path.display()),
                None => e.to_string(),
            })?;
            // Precedence: flag, then the config file, then the environment.
            if seed.is_some() || !sets_seed(&text) {
                cfg.seed = seed_or_default(seed)?;
            }
            let (op, selectors) = obfuscate_statement_level(&p, &cfg).map_err(|e| e.to_string())?;
            write(&out, &op.to_text())?;
            write(
                &key,
                &KeyFile {
                    seed: cfg.seed,
                    selectors,
                }
                .to_text(),
            )?;
            Ok(String::new())
        }
        Command::Run { obf, key, inputs } => {
            let op = load_obf(&obf)?;
            let kf = load_key(&key)?;
            let sk = SecretKey::keygen(kf.seed);
            let enc = encrypt_inputs(&sk, &parse_inputs(&inputs)?);
            let c = eval_encrypted(&op, &sk, &kf.selectors, &enc).map_err(|e| e.to_string())?;
            let v = sk.dec(c).map_err(|e| e.to_string())?;
            Ok(format!("{}\n", v.to_signed()))
        }
        Command::Deobfuscate { obf, key, out } => {
            let op = load_obf(&obf)?;
            let kf = load_key(&key)?;
            let p = deobfuscate(&op, &kf.selectors).map_err(|e| e.to_string())?;
            match out {
                Some(path) => write(&path, &p.to_text()).map(|_| String::new()),
                None => Ok(p.to_text()),
            }
        }
        Command::Mine {
            corpora,
            out,
            source,
            export,
        } => {
            let mut tables = Vec::new();
            for path in &corpora {
                let text = read(path)?;
                let trees = if source {
                    surface_to_trees(
                        &parse_surface(&text).map_err(|e| format!("{}: {e}", path.display()))?,
                    )
                } else {
                    parse_trees(&text).map_err(|e| format!("{}: {e}", path.display()))?
                };
                let table = mine(&trees).map_err(|e| format!("{}: {e}", path.display()))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                tables.push((name, table));
            }
            let mut merged = PatternTable::default();
            for (_, t) in &tables {
                merged.merge(t);
            }
            write(&out, &merged.to_text())?;
            if let Some(path) = export {
                write(&path, &export_table(&aggregate(&tables)))?;
            }
            Ok(String::new())
        }
        Command::Attack {
            obf,
            pairs,
            table,
            key,
            cap,
        } => {
            let op = load_obf(&obf)?;
            let pairs = pairs
                .as_deref()
                .map(load_pairs)
                .transpose()?
                .unwrap_or_default();
            let table = table
                .as_deref()
                .map(load_table)
                .transpose()?
                .unwrap_or_default();
            let key = key.as_deref().map(load_key).transpose()?;
            let report = run_attack(&op, &pairs, &table, key.as_ref().map(|k| &k.selectors), cap)
                .map_err(|e| e.to_string())?;
            Ok(report.to_text())
        }
        Command::Metrics {
            src,
            obf,
            samples,
            seed,
            pairs,
            cap,
        } => {
            let p = load_program(&src)?;
            let op = load_obf(&obf)?;
            let mut report =
                measure(&p, &op, samples, seed_or_default(seed)?).map_err(|e| e.to_string())?;
            if let Some(path) = pairs {
                let pairs = load_pairs(&path)?;
                let cd = extract_class(&op);
                let survivors = kpa_filter(&cd, &pairs, cap).map_err(|e| e.to_string())?;
                report.potency_reduction = Some(
                    potency_reduction(&cd, &eliminated_options(&cd, &survivors))
                        .map_err(|e| e.to_string())?,
                );
            }
            Ok(report.to_text())
        }
        Command::Game {
            p_l,
            n,
            trials,
            obfuscator,
            seed,
        } => {
            let obf = match obfuscator {
                GameObf::Uniform => ObfStrategy::UniformMisleading,
                GameObf::Frequent => ObfStrategy::FrequentAsMisleading,
            };
            let att = AttStrategy::PreferFrequent;
            let v = game_exact(p_l, n, obf, att).map_err(|e| e.to_string())?;
            let sim = game_simulate(p_l, n, trials, seed_or_default(seed)?, obf, att)
                .map_err(|e| e.to_string())?;
            Ok(format!(
                "exact {:.4}\nalt_form {:.4}\nsimulated {:.4}\ntrials {trials}\n",
                v.exact, v.alt_form, sim
            ))
        }
        Command::Demo { level, out, seed } => {
            let seed = seed_or_default(seed)?;
            let d = demo(level, seed).map_err(|e| e.to_string())?;
            fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            write(&out.join("task1.src"), TASK1_SOURCE)?;
            write(&out.join("task1.tac"), &d.program.to_text())?;
            write(&out.join("task1.obf"), &d.obfuscated.to_text())?;
            write(
                &out.join("task1.key"),
                &KeyFile {
                    seed,
                    selectors: d.key,
                }
                .to_text(),
            )?;
            Ok(format!(
                "class_size {}\n",
                extract_class(&d.obfuscated).size()
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
