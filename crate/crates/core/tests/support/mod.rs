#![allow(dead_code)]

pub mod two_link;
