pub mod chain;
pub mod concentration;
pub mod experiment;
pub mod mdp;
pub mod osp;
pub mod rng;
pub mod sample_path;
