pub mod complete;
pub mod decode;
pub mod evaluate;
pub mod iaa;
pub mod plan;
pub mod report;
pub mod scramble;
pub mod simulate;
pub mod split;
