//! `tcbisim`: compare processes declared in a process file.
//!
//! Exit codes: 0 related, 1 not related, 2 bound exhausted, 3 input error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use tcbisim::prebisim::{approx_profile, p_max, ApproxOutcome, FinitaryOutcome};
use tcbisim::syntax::parse_pomsets;
use tcbisim::testgen::enumerate_trees;
use tcbisim::{
    bisim, distinguishing_tree, fin_preorder, finitary_via_trees, kernel, level_approx, parse, prebisim, strat,
    Level, Process, RelationKind, Semantics, StratParams, SyncTree, TreeBound, Verdict, Witness,
};

#[derive(Parser, Debug)]
#[command(
    name = "tcbisim",
    version,
    about = "Truly concurrent bisimulations and prebisimulation preorders",
    after_help = "Preorder queries test LEFT below RIGHT.\n\
                  Exit codes: 0 related, 1 not related, 2 bound exhausted, 3 input error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide a bisimulation, or with --pre a preorder, between two processes.
    Check(CheckArgs),
    /// Report the level of the approximation chain at which a pair falls out.
    Approx(ApproxArgs),
    /// Stream test trees over the transition labels of a process.
    Trees(TreesArgs),
    /// Print a tree below LEFT but not below RIGHT, if there is one.
    Explain(ExplainArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Rel {
    Pomset,
    Step,
    Hp,
    Hhp,
}

impl From<Rel> for RelationKind {
    fn from(r: Rel) -> Self {
        match r {
            Rel::Pomset => RelationKind::Pomset,
            Rel::Step => RelationKind::Step,
            Rel::Hp => RelationKind::Hp,
            Rel::Hhp => RelationKind::Hhp,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Sem {
    Es,
    TreeNative,
}

impl From<Sem> for Semantics {
    fn from(s: Sem) -> Self {
        match s {
            Sem::Es => Semantics::EventStructure,
            Sem::TreeNative => Semantics::TreeNative,
        }
    }
}

#[derive(Args, Debug)]
struct Pair {
    #[arg(long)]
    left: String,
    #[arg(long)]
    right: String,
    #[arg(long, value_enum)]
    rel: Rel,
    #[arg(long, value_enum, default_value = "es")]
    semantics: Sem,
    /// Process file.
    file: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    pair: Pair,
    /// Decide the prebisimulation preorder instead of bisimilarity.
    #[arg(long)]
    pre: bool,
    /// Decide the kernel of the preorder (related both ways).
    #[arg(long, conflicts_with_all = ["level", "restrict", "finitary", "tree_tests"])]
    kernel: bool,
    /// Level of the approximation chain, a number or `omega`.
    #[arg(long, requires = "pre", value_parser = parse_level)]
    level: Option<Level>,
    /// File of pomset literals restricting the observable moves.
    #[arg(long, requires = "pre")]
    restrict: Option<PathBuf>,
    /// Decide the restricted limit over every finite restriction.
    #[arg(long, requires = "pre", conflicts_with_all = ["level", "restrict"])]
    finitary: bool,
    /// Compare by enumerated test trees.
    #[arg(long, requires = "pre", conflicts_with_all = ["level", "restrict", "finitary"])]
    tree_tests: bool,
    #[arg(long, default_value_t = 3, requires = "tree_tests")]
    depth: usize,
    #[arg(long, default_value_t = 2, requires = "tree_tests")]
    width: usize,
    #[arg(long, default_value_t = 20_000, requires = "tree_tests")]
    max_trees: usize,
    /// Print the witness of a negative answer.
    #[arg(long)]
    witness: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[command(flatten)]
    pair: Pair,
    #[arg(long)]
    max_level: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct TreesArgs {
    #[arg(long)]
    alphabet_from: String,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    width: usize,
    /// Stop after this many trees.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value = "es")]
    semantics: Sem,
    file: PathBuf,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    pair: Pair,
    #[arg(long)]
    json: bool,
}

fn parse_level(s: &str) -> Result<Level, String> {
    if s == "omega" || s == "w" {
        return Ok(Level::Omega);
    }
    s.parse().map(Level::Finite).map_err(|_| format!("`{s}` is neither a number nor `omega`"))
}

#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

enum Answer {
    Related,
    NotRelated,
    Exhausted,
}

impl Answer {
    fn of(related: bool) -> Self {
        if related {
            Answer::Related
        } else {
            Answer::NotRelated
        }
    }

    fn code(&self) -> u8 {
        match self {
            Answer::Related => 0,
            Answer::NotRelated => 1,
            Answer::Exhausted => 2,
        }
    }
}

fn load(path: &PathBuf) -> Result<BTreeMap<String, SyncTree>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| InputError(format!("{}:{e}", path.display())))
}

fn lookup<'a>(defs: &'a BTreeMap<String, SyncTree>, name: &str) -> Result<&'a SyncTree, InputError> {
    defs.get(name)
        .ok_or_else(|| InputError(format!("no process named `{name}`")))
}

fn processes(pair: &Pair) -> Result<(Process, Process), InputError> {
    let defs = load(&pair.file)?;
    let sem = pair.semantics.into();
    let p = Process::from_tree(lookup(&defs, &pair.left)?, sem)?;
    let q = Process::from_tree(lookup(&defs, &pair.right)?, sem)?;
    Ok((p, q))
}

fn witness_json(w: &Option<Witness>) -> Value {
    match w {
        Some(w) => json!({"kind": w.kind(), "value": w.to_string()}),
        None => Value::Null,
    }
}

fn level_json(level: Option<usize>) -> Value {
    match level {
        Some(n) => json!(n),
        None => json!("omega"),
    }
}

struct Report<'a> {
    pair: &'a Pair,
    preorder: bool,
    related: bool,
    level: Option<usize>,
    witness: Option<Witness>,
    start: Instant,
}

impl Report<'_> {
    fn json(&self) -> Value {
        json!({
            "left": self.pair.left,
            "right": self.pair.right,
            "relation": RelationKind::from(self.pair.rel).name(),
            "preorder": self.preorder,
            "related": self.related,
            "level": level_json(self.level),
            "witness": witness_json(&self.witness),
            "semantics": Semantics::from(self.pair.semantics).name(),
            "elapsed_ms": self.start.elapsed().as_secs_f64() * 1000.0,
        })
    }
}

fn check(args: &CheckArgs) -> Result<Answer, InputError> {
    let start = Instant::now();
    let (p, q) = processes(&args.pair)?;
    let kind: RelationKind = args.pair.rel.into();
    let preorder = args.pre || args.kernel;
    let mut level = None;
    let mut answer = None;
    let mut note = None;
    let verdict = if args.kernel {
        let there = prebisim(&p, &q, kind);
        if !there.related {
            there
        } else {
            let back = prebisim(&q, &p, kind);
            debug_assert_eq!(back.related, kernel(&p, &q, kind));
            back
        }
    } else if !args.pre {
        bisim(&p, &q, kind)
    } else if args.tree_tests {
        let bound = TreeBound {
            depth: args.depth,
            width: args.width,
            max_trees: args.max_trees,
        };
        match finitary_via_trees(&p, &q, kind, &bound)? {
            FinitaryOutcome::Related { trees_tested, .. } => {
                note = Some(format!("{trees_tested} trees tested"));
                Verdict::holds()
            }
            FinitaryOutcome::NotRelated { witness, .. } => Verdict::fails(Some(Witness::Tree(witness))),
            FinitaryOutcome::BoundExhausted { trees_tested } => {
                note = Some(format!("bound exhausted after {trees_tested} trees"));
                answer = Some(Answer::Exhausted);
                Verdict::fails(None)
            }
        }
    } else if args.finitary {
        fin_preorder(&p, &q, kind)
    } else if let Some(path) = &args.restrict {
        let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let pomsets = parse_pomsets(&text).map_err(|e| InputError(format!("{}:{e}", path.display())))?;
        let mut restriction = std::collections::BTreeSet::new();
        for u in pomsets {
            if kind.is_history_preserving() && u.len() != 1 {
                eprintln!("warning: ignoring `{u}`: {kind} observes single actions only");
                continue;
            }
            restriction.insert(u);
        }
        let lvl = args.level.unwrap_or(Level::Omega);
        if let Level::Finite(n) = lvl {
            level = Some(n);
        }
        Verdict {
            related: strat(&p, &q, kind, &StratParams { restriction, level: lvl }),
            witness: None,
        }
    } else if let Some(lvl) = args.level {
        if let Level::Finite(n) = lvl {
            level = Some(n);
        }
        let related = level_approx(&p, &q, kind, lvl);
        if related {
            Verdict::holds()
        } else {
            // the level at which the pair leaves the chain
            Verdict::fails(prebisim(&p, &q, kind).witness)
        }
    } else {
        prebisim(&p, &q, kind)
    };
    let answer = answer.unwrap_or(Answer::of(verdict.related));
    let report = Report {
        pair: &args.pair,
        preorder,
        related: verdict.related,
        level,
        witness: if args.witness || args.json { verdict.witness.clone() } else { None },
        start,
    };
    if args.json {
        println!("{}", report.json());
    } else {
        let op = match (args.kernel, preorder) {
            (true, _) => "=~",
            (false, true) => "<=",
            (false, false) => "~",
        };
        let status = match answer {
            Answer::Related => "related",
            Answer::NotRelated => "not related",
            Answer::Exhausted => "undecided",
        };
        let mut line = format!("{} {op} {} [{kind}]: {status}", args.pair.left, args.pair.right);
        if let Some(n) = note {
            line.push_str(&format!(" ({n})"));
        }
        println!("{line}");
        if let (true, Some(w)) = (args.witness, &verdict.witness) {
            println!("witness ({}): {w}", w.kind());
        }
    }
    Ok(answer)
}

fn approx(args: &ApproxArgs) -> Result<Answer, InputError> {
    let start = Instant::now();
    let (p, q) = processes(&args.pair)?;
    let kind = args.pair.rel.into();
    let outcome = approx_profile(&p, &q, kind, args.max_level);
    let (answer, level, text) = match outcome {
        ApproxOutcome::FallsOut(n) => (Answer::NotRelated, Some(n), format!("falls out at level {n}")),
        ApproxOutcome::Stable(n) => (Answer::Related, None, format!("stable (from level {n})")),
        ApproxOutcome::Undecided(n) => (Answer::Exhausted, Some(n), format!("still related at level {n}")),
    };
    if args.json {
        let report = Report {
            pair: &args.pair,
            preorder: true,
            related: !matches!(answer, Answer::NotRelated),
            level,
            witness: match outcome {
                ApproxOutcome::FallsOut(n) => Some(Witness::Level(n)),
                _ => None,
            },
            start,
        };
        println!("{}", report.json());
    } else {
        println!("{text}");
    }
    Ok(answer)
}

fn trees(args: &TreesArgs) -> Result<Answer, InputError> {
    let defs = load(&args.file)?;
    let p = Process::from_tree(lookup(&defs, &args.alphabet_from)?, args.semantics.into())?;
    let alphabet = p_max(&p, &p, RelationKind::Pomset);
    let limit = args.limit.unwrap_or(usize::MAX);
    for t in enumerate_trees(&alphabet, args.depth, args.width).take(limit) {
        println!("{t}");
    }
    Ok(Answer::Related)
}

fn explain(args: &ExplainArgs) -> Result<Answer, InputError> {
    let start = Instant::now();
    let (p, q) = processes(&args.pair)?;
    let kind = args.pair.rel.into();
    let tree = distinguishing_tree(&p, &q, kind)?;
    let answer = Answer::of(tree.is_none());
    if args.json {
        let report = Report {
            pair: &args.pair,
            preorder: true,
            related: tree.is_none(),
            level: None,
            witness: tree.map(Witness::Tree),
            start,
        };
        println!("{}", report.json());
    } else {
        match tree {
            Some(t) => println!("{t}"),
            None => println!("no distinguishing tree: {} <= {} [{kind}]", args.pair.left, args.pair.right),
        }
    }
    Ok(answer)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Check(a) => check(a),
        Command::Approx(a) => approx(a),
        Command::Trees(a) => trees(a),
        Command::Explain(a) => explain(a),
    };
    match result {
        Ok(answer) => ExitCode::from(answer.code()),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
