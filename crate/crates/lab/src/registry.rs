//! The experiment registry.

use crate::error::{LabError, LabResult};
use crate::exp;
use crate::experiment::{Entry, Runnable};

pub fn all() -> Vec<Box<dyn Runnable>> {
    vec![
        Box::new(Entry::<exp::s1_02::S102>::default()),
        Box::new(Entry::<exp::s1_03::S103>::default()),
        Box::new(Entry::<exp::s1_04::S104>::default()),
        Box::new(Entry::<exp::s1_05::S105>::default()),
        Box::new(Entry::<exp::s2_02::S202>::default()),
        Box::new(Entry::<exp::s2_03::S203>::default()),
        Box::new(Entry::<exp::s2_04::S204>::default()),
        Box::new(Entry::<exp::s3_01::S301>::default()),
        Box::new(Entry::<exp::s3_02::S302>::default()),
        Box::new(Entry::<exp::s3_03::S303>::default()),
        Box::new(Entry::<exp::s3_04::S304>::default()),
        Box::new(Entry::<exp::s3_05::S305>::default()),
        Box::new(Entry::<exp::s3_06::S306>::default()),
        Box::new(Entry::<exp::s3_07::S307>::default()),
        Box::new(Entry::<exp::s3_08::S308>::default()),
    ]
}

pub fn get(id: &str) -> LabResult<Box<dyn Runnable>> {
    all().into_iter().find(|e| e.id() == id).ok_or_else(|| LabError::UnknownId(id.to_string()))
}
