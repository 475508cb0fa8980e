pub mod bench;
pub mod inspect;
pub mod mine;
pub mod preprocess;
pub mod train;
