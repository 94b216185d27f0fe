//! Truly concurrent bisimulations and divergence-sensitive prebisimulation
//! preorders over finite pomset processes.
//!
//! Processes are finite synchronisation trees whose prefixes are pomsets.
//! By default a tree is compiled into a prime event structure and its
//! transitions are the configuration extensions; [`Semantics::TreeNative`]
//! reads the summands directly instead.
//!
//! ```
//! use tcbisim::{bisim, parse, Process, RelationKind};
//!
//! let defs = parse("proc I = a:(b:0) + b:(a:0)\nproc C = {a,b}:0").unwrap();
//! let i = Process::compile(&defs["I"]).unwrap();
//! let c = Process::compile(&defs["C"]).unwrap();
//! assert!(!bisim(&i, &c, RelationKind::Step).related);
//! ```

pub mod bits;
pub mod equiv;
pub mod estructure;
mod game;
pub mod pomset;
pub mod prebisim;
pub mod process;
pub mod sync_tree;
pub mod syntax;
pub mod testgen;

pub use equiv::{bisim, Verdict, Witness};
pub use estructure::{compile_tree, PrimeEventStructure, ProcessState, StructureError, TransitionKind};
pub use pomset::{Label, LabelledPoset, Pomset};
pub use prebisim::{fin_preorder, finitary_via_trees, kernel, level_approx, prebisim, strat, strat_omega, Level, StratParams};
pub use process::{Process, RelationKind, Semantics};
pub use sync_tree::SyncTree;
pub use syntax::{parse, parse_tree, ParseError};
pub use testgen::{distinguishing_tree, TreeBound};
