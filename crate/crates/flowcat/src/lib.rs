//! Combinatorial and chain-level models of stratified moduli.
//!
//! The crate provides:
//!
//! * [`corner`]: finite categories with corner structure, overcategories,
//!   Boolean-lattice recognition, and normal-direction bookkeeping.
//! * [`arcs`]: arc categories indexed by sequences of object sets with
//!   energy labels, their faces, horns, and block functors.
//! * [`flow`]: flow categories and flow simplices built from formal
//!   component data, with faces, degeneracies, suspension, and cones.
//! * [`bimodule`]: bimodule composition, two-simplex homotopies, and the
//!   null homotopies attached to a cone.
//! * [`homology`]: exact chain complexes over the integers and the field
//!   with two elements, Smith normal form, chain maps, and exactness checks.
//! * [`geom`]: degeneration geometry, namely L-blocks, conic fibers,
//!   boundary strata, and horn filling by glued stratified blocks.
//! * [`morse`]: simplicial complexes, acyclic matchings, Morse flow
//!   categories, continuation bimodules, and a reference homology oracle.
//! * [`io`]: serialization to and from the on-disk JSON, DOT, and CSV
//!   formats used by the command line tool.

pub mod arcs;
pub mod bimodule;
pub mod corner;
pub mod corpus;
pub mod flow;
pub mod geom;
pub mod homology;
pub mod io;
pub mod morse;
pub mod par;
pub mod report;
