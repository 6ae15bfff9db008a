use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "corrkit",
    version,
    about = "Compute, bound and certify bipartite quantum correlations"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Seed for every randomized path.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// SDP relative tolerance.
    #[arg(long = "sdp-tol", global = true)]
    pub sdp_tol: Option<f64>,
    /// SDP iteration cap.
    #[arg(long = "sdp-max-iter", global = true)]
    pub sdp_max_iter: Option<usize>,
    /// Run the inner loops sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// JSON run configuration (overrides CORRKIT_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// W-state correlations: single-shot table (depth 1) or the sequential
    /// coarse-grained table with the Hardy test (depth 2).
    Wstate {
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Hardy test on a coarse-grained W-state style table.
    Hardy {
        /// JSON table; defaults to the computed W-state table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Moment-matrix upper bound and see-saw lower bound for CHSH.
    ChshBound {
        #[arg(long, default_value = "1+AB")]
        level: String,
        /// Skip the see-saw lower bound.
        #[arg(long)]
        no_seesaw: bool,
    },
    /// Moment-matrix relaxations.
    Npa {
        #[command(subcommand)]
        mode: NpaMode,
    },
    /// Local polytope membership.
    Local {
        #[command(flatten)]
        table: TableSource,
    },
    /// Realize steering data by a state and measurements.
    Steer {
        /// JSON steering data `{"d": .., "alpha": [[matrix]]}`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Random instance `d,k,m`.
        #[arg(long, value_parser = parse_triple)]
        random: Option<[usize; 3]>,
    },
    /// Steering-game sandwich: see-saw lower bound and moment upper bound.
    Game {
        #[command(flatten)]
        game: GameSource,
        /// Alice's dimension for the see-saw.
        #[arg(long, default_value_t = 2)]
        da: usize,
        /// Bob's dimension for the see-saw.
        #[arg(long, default_value_t = 2)]
        db: usize,
        #[arg(long, default_value = "1")]
        level: String,
    },
    /// Norm estimates in truncated regular representations.
    Norm {
        #[command(subcommand)]
        mode: NormMode,
    },
    /// Check a free-subgroup witness on all reduced words up to a length.
    FreeCheck {
        #[arg(long, value_enum)]
        witness: WitnessArg,
        /// Factor orders of the target group, e.g. `3,3`.
        #[arg(long)]
        orders: Option<String>,
        /// Rank for the free-in-free witness.
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long = "max-len", default_value_t = 8)]
        max_len: usize,
    },
    /// Stinespring and Naimark dilations.
    Dilate {
        #[command(subcommand)]
        mode: DilateMode,
    },
}

#[derive(Subcommand, Debug)]
pub enum NpaMode {
    /// Upper bound on a Bell functional.
    Bound {
        /// JSON Bell functional.
        #[arg(long, conflicts_with = "preset")]
        functional: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<FunctionalPreset>,
        #[arg(long, default_value = "1+AB")]
        level: String,
        /// Write the moment problem as JSON.
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
    /// Consistency of a correlation table with the relaxation.
    Membership {
        #[command(flatten)]
        table: TableSource,
        #[arg(long, default_value = "1+AB")]
        level: String,
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
    /// Upper bound on a steering-game value.
    Game {
        #[command(flatten)]
        game: GameSource,
        #[arg(long, default_value = "1")]
        level: String,
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct TableSource {
    /// JSON correlation table.
    #[arg(long, conflicts_with = "preset")]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<TablePreset>,
}

#[derive(Args, Debug, Clone)]
pub struct GameSource {
    /// JSON steering game `{"d": .., "v": .., "w": ..}`.
    #[arg(long = "game", conflicts_with = "random")]
    pub game: Option<PathBuf>,
    /// Random game `d,k,m`.
    #[arg(long, value_parser = parse_triple)]
    pub random: Option<[usize; 3]>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FunctionalPreset {
    Chsh,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum TablePreset {
    PrBox,
    Uniform,
    Wstate,
    WstateCoarse,
    TsirelsonChsh,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum WitnessArg {
    TwoCyclic,
    ThreeZ2,
    FreeInFree,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KindArg {
    Left,
    Biregular,
}

#[derive(Subcommand, Debug)]
pub enum NormMode {
    /// Estimate at one radius.
    Estimate {
        #[command(flatten)]
        common: NormCommon,
        #[arg(long, default_value_t = 12)]
        radius: usize,
    },
    /// Estimates at several radii.
    Scan {
        #[command(flatten)]
        common: NormCommon,
        /// Comma-separated radii.
        #[arg(long, default_value = "2,4,6,8,10,12")]
        radii: String,
    },
}

#[derive(Args, Debug, Clone)]
pub struct NormCommon {
    /// Element, e.g. `a + a^-1 + b + b^-1`; biregular terms are `g|h`, a
    /// bare `g` meaning `g|g`.
    #[arg(long)]
    pub element: String,
    /// Factor orders, `0` for infinite cyclic.
    #[arg(long, default_value = "[0,0]")]
    pub signature: String,
    #[arg(long, value_enum, default_value = "left")]
    pub kind: KindArg,
    /// Estimate `sqrt(||x* x||)` for non-self-adjoint elements.
    #[arg(long)]
    pub allow_non_self_adjoint: bool,
    /// Seeded random start vector instead of the identity.
    #[arg(long)]
    pub random_start: bool,
}

#[derive(Subcommand, Debug)]
pub enum DilateMode {
    /// Stinespring dilation of a unital completely positive map.
    Stinespring {
        /// JSON `{"n": .., "d": .., "choi": matrix}` or `{"kraus": [matrix]}`.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Random map `n,d,r` from `M_n` to `M_d` with `r` Kraus operators.
        #[arg(long, value_parser = parse_triple)]
        random: Option<[usize; 3]>,
    },
    /// Naimark dilation of a POVM.
    Naimark {
        /// JSON list of POVM elements.
        #[arg(long)]
        povm: Option<PathBuf>,
        /// Random POVM `d,m`.
        #[arg(long, value_parser = parse_pair)]
        random: Option<[usize; 2]>,
    },
}

fn parse_list<const N: usize>(s: &str) -> Result<[usize; N], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad integer '{t}'")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated integers"))
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    parse_list::<3>(s)
}

fn parse_pair(s: &str) -> Result<[usize; 2], String> {
    parse_list::<2>(s)
}
