//! Tag-driven translation of a legacy Fortran subset onto a simulated
//! accelerator.
//!
//! The pipeline has four stages. [`frontend`] lexes and parses free-form
//! source into an AST with comments preserved. [`regions`] splits each
//! subroutine body into host regions and `!#LOOPY_START`/`!#LOOPY_END`
//! parallel regions. [`loopir`] lowers a parallel region into a loop
//! kernel (iteration domains mapped onto a thread grid plus a
//! straight-line instruction body) after proving the loop nest free of
//! loop-carried dependencies. [`vdevice`] executes kernels over a
//! simulated device with residency-tracked buffers, and [`hostexec`]
//! interprets the host regions against the same buffers, dispatching
//! `CALL` statements to translated subroutines or registered externals.
//!
//! [`mg`] puts the whole stack to work: a variable-coefficient
//! structured-grid multigrid solver whose relaxation, residual, grid
//! transfer and coarse-solve packing kernels are all written in the
//! Fortran subset (see `corpus/` at the repository root) and run through
//! the translator.

pub mod frontend;
pub mod hostexec;
pub mod loopir;
pub mod mg;
pub mod regions;
pub mod translate;
pub mod vdevice;
