pub mod benchmark;
pub mod evaluate;
pub mod pca;
pub mod synth;
pub mod train;
