pub mod alignment;
pub mod correction;
pub mod evalkit;
pub mod f0lab;
pub mod interp;
pub mod nnet;
pub mod pipeline;
pub mod score;
pub mod seq;
pub mod timing;

pub use seq::Seq;
