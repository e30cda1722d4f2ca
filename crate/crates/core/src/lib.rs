pub mod alignment;
pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod neural;
pub mod phrase_miner;
pub mod seq2seq;
