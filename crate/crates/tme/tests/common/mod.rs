#![allow(dead_code)]

pub mod gaussian;
pub mod kitaev;
