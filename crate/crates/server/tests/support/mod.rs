#![allow(dead_code)]

pub mod http_matrix;
pub mod process;
pub mod races;
pub mod route_oracle;
pub mod server;
